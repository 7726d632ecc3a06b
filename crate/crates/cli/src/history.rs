//! `history.csv`: one row per recorded step, full precision.

use std::io::{self, Write};

use chns_core::diagnostics::{HistoryRow, HISTORY_HEADER};
use chns_core::ieq::Mode;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("history line {line}: {message}")]
pub struct HistoryError {
    pub line: usize,
    pub message: String,
}

pub fn header() -> String {
    HISTORY_HEADER.join(",")
}

pub fn mode_from_label(s: &str) -> Option<Mode> {
    [Mode::C, Mode::P, Mode::CpBeforeSwitch, Mode::CpAfterSwitch].into_iter().find(|m| m.label() == s)
}

pub fn format_row(r: &HistoryRow) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
        r.step,
        r.time,
        r.energy,
        r.raw_energy,
        r.original_energy,
        r.mass,
        r.div_residual,
        r.identity_residual,
        r.mode.label()
    )
}

pub fn write_header(w: &mut impl Write) -> io::Result<()> {
    w.write_all(header().as_bytes())?;
    w.write_all(b"\n")
}

pub fn write_row(w: &mut impl Write, r: &HistoryRow) -> io::Result<()> {
    w.write_all(format_row(r).as_bytes())?;
    w.write_all(b"\n")
}

pub fn write_history(w: &mut impl Write, rows: &[HistoryRow]) -> io::Result<()> {
    write_header(w)?;
    rows.iter().try_for_each(|r| write_row(w, r))
}

pub fn read_history(text: &str) -> Result<Vec<HistoryRow>, HistoryError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header() => {}
        _ => return Err(HistoryError { line: 1, message: "missing or unexpected header".to_string() }),
    }
    lines
        .map(|(i, l)| {
            let err = |message: String| HistoryError { line: i + 1, message };
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != HISTORY_HEADER.len() {
                return Err(err(format!("expected {} fields, found {}", HISTORY_HEADER.len(), fields.len())));
            }
            let num = |k: usize| fields[k].parse::<f64>().map_err(|_| err(format!("bad number `{}`", fields[k])));
            Ok(HistoryRow {
                step: fields[0].parse().map_err(|_| err(format!("bad step `{}`", fields[0])))?,
                time: num(1)?,
                energy: num(2)?,
                raw_energy: num(3)?,
                original_energy: num(4)?,
                mass: num(5)?,
                div_residual: num(6)?,
                identity_residual: num(7)?,
                mode: mode_from_label(fields[8]).ok_or_else(|| err(format!("bad mode `{}`", fields[8])))?,
            })
        })
        .collect()
}
