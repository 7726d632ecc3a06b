//! The four subcommands, as library functions returning their results.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chns_core::convergence::{space_study, time_study, StudyRow};
use chns_core::diagnostics::{ErrorNorms, HistoryRow};
use chns_core::ieq::Variant;
use chns_core::stepper::{start, Simulation};

use crate::config::{parse_config, RunConfig};
use crate::error::{io_err, CliError};
use crate::history;
use crate::vtk::{write_vtk, VertexFields};

pub const THREADS_VAR: &str = "CHNS_IEQ_THREADS";

/// Worker threads for assembly: the machine's parallelism, capped by `CHNS_IEQ_THREADS`.
pub fn threads_from_env() -> Result<usize, CliError> {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n.min(available)),
            _ => Err(CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(available),
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|source| CliError::Config { path: path.to_path_buf(), source })
}

fn simulation(cfg: &RunConfig, variant: Variant, threads: usize) -> Result<Simulation, CliError> {
    let spec = cfg.run_spec(threads);
    let disc = Arc::new(spec.discretization()?);
    let phi0 = cfg.example.initial_phase(&cfg.params);
    let u0 = cfg.example.initial_velocity();
    let mut sc = spec.scheme_config();
    sc.variant = variant;
    Ok(start(disc, sc, cfg.example.forcing(&cfg.params), &*phi0, &*u0)?)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub history_path: PathBuf,
    pub vtk_files: Vec<PathBuf>,
    /// Rows written to the history, initial row first.
    pub rows: Vec<HistoryRow>,
    pub switch_step: Option<usize>,
}

fn dump_vtk(dir: &Path, sim: &Simulation) -> Result<PathBuf, CliError> {
    let s = sim.state();
    let path = dir.join(format!("fields_{:06}.vtk", s.step));
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    let title = format!("chns-ieq step {} time {:.16e}", s.step, s.time);
    write_vtk(&mut w, &sim.discretization().mesh, &VertexFields::from_state(s), &title).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

/// Runs one configuration, writing `history.csv` and the VTK series into its output directory.
pub fn run(cfg: &RunConfig, threads: usize, mut progress: impl FnMut(&HistoryRow)) -> Result<RunSummary, CliError> {
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let mut sim = simulation(cfg, cfg.variant, threads)?;
    let history_path = dir.join("history.csv");
    let mut out = BufWriter::new(File::create(&history_path).map_err(io_err(&history_path))?);
    history::write_header(&mut out).map_err(io_err(&history_path))?;
    let mut rows = Vec::new();
    let mut vtk_files = Vec::new();

    let first = sim.initial_row();
    history::write_row(&mut out, &first).map_err(io_err(&history_path))?;
    progress(&first);
    rows.push(first);
    if cfg.vtk_every > 0 {
        vtk_files.push(dump_vtk(dir, &sim)?);
    }
    for step in 1..=cfg.n_steps {
        let outcome = sim.advance()?;
        if step % cfg.history_every == 0 || step == cfg.n_steps {
            history::write_row(&mut out, &outcome.row).map_err(io_err(&history_path))?;
            progress(&outcome.row);
            rows.push(outcome.row);
        }
        if cfg.vtk_every > 0 && step % cfg.vtk_every == 0 {
            vtk_files.push(dump_vtk(dir, &sim)?);
        }
    }
    out.flush().map_err(io_err(&history_path))?;
    Ok(RunSummary { history_path, vtk_files, rows, switch_step: sim.switch_step() })
}

/// Mesh refinement study of the configuration's example at its `tau` and final time.
pub fn converge_space(
    cfg: &RunConfig,
    nxs: &[usize],
    threads: usize,
    progress: impl FnMut(&StudyRow),
) -> Result<Vec<StudyRow>, CliError> {
    if nxs.is_empty() || nxs.contains(&0) {
        return Err(CliError::Usage("--nx needs a list of positive mesh sizes".to_string()));
    }
    Ok(space_study(&cfg.run_spec(threads), nxs, progress)?)
}

/// Time step refinement study at the configuration's mesh and final time.
pub fn converge_time(
    cfg: &RunConfig,
    taus: &[f64],
    threads: usize,
    progress: impl FnMut(&StudyRow),
) -> Result<Vec<StudyRow>, CliError> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(CliError::Usage("--tau needs a list of positive time steps".to_string()));
    }
    let t_end = cfg.t_end();
    for &tau in taus {
        let n = (t_end / tau).round();
        if n < 1.0 || (n * tau - t_end).abs() > 1e-9 * t_end {
            return Err(CliError::Usage(format!("tau = {tau} does not divide the final time {t_end}")));
        }
    }
    Ok(time_study(&cfg.run_spec(threads), taus, progress)?)
}

/// Aligned error and rate table; `size_label` names the refined quantity.
pub fn rates_table(rows: &[StudyRow], size_label: &str) -> String {
    let mut s = format!("{size_label:>12}");
    for l in ErrorNorms::LABELS {
        let _ = write!(s, " {l:>12} {:>6}", "rate");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{:>12.4e}", r.size);
        let e = r.errors.as_array();
        for k in 0..4 {
            match r.rates {
                Some(rates) => {
                    let _ = write!(s, " {:>12.4e} {:>6.2}", e[k], rates[k]);
                }
                None => {
                    let _ = write!(s, " {:>12.4e} {:>6}", e[k], "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_rates_csv(path: &Path, rows: &[StudyRow], size_label: &str) -> Result<(), CliError> {
    let mut out = format!("{size_label},l2_phi,h1_phi,l2_u,h1_u,rate_l2_phi,rate_h1_phi,rate_l2_u,rate_h1_u\n");
    for r in rows {
        let _ = write!(out, "{:.16e}", r.size);
        for e in r.errors.as_array() {
            let _ = write!(out, ",{e:.16e}");
        }
        for k in 0..4 {
            match r.rates {
                Some(rates) => {
                    let _ = write!(out, ",{:.16e}", rates[k]);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Histories of the three variants on one configuration.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub c: Vec<HistoryRow>,
    pub p: Vec<HistoryRow>,
    pub cp: Vec<HistoryRow>,
    /// Step `n` whose successor the CP run retook in projected mode.
    pub switch_step: Option<usize>,
    pub tau: f64,
}

pub fn compare_variants(cfg: &RunConfig, threads: usize) -> Result<Comparison, CliError> {
    let mut histories = Vec::with_capacity(3);
    let mut switch_step = None;
    for variant in [Variant::C, Variant::P, Variant::Cp] {
        let mut sim = simulation(cfg, variant, threads)?;
        let mut rows = vec![sim.initial_row()];
        for step in 1..=cfg.n_steps {
            let out = sim.advance()?;
            if step % cfg.history_every == 0 || step == cfg.n_steps {
                rows.push(out.row);
            }
        }
        if variant == Variant::Cp {
            switch_step = sim.switch_step();
        }
        histories.push(rows);
    }
    let cp = histories.pop().expect("three runs");
    let p = histories.pop().expect("three runs");
    let c = histories.pop().expect("three runs");
    Ok(Comparison { c, p, cp, switch_step, tau: cfg.tau })
}

impl Comparison {
    pub fn switch_line(&self) -> String {
        match self.switch_step {
            Some(n) => format!("CP switch: n* = {n} (t = {:.6e})", n as f64 * self.tau),
            None => "CP switch: no switch".to_string(),
        }
    }

    pub fn report(&self) -> String {
        let mut s = format!(
            "{:>8} {:>14} {:>24} {:>24} {:>24} {:>6}\n",
            "step", "time", "energy C", "energy P", "energy CP", "mode"
        );
        for ((c, p), cp) in self.c.iter().zip(&self.p).zip(&self.cp) {
            let _ = writeln!(
                s,
                "{:>8} {:>14.6e} {:>24.16e} {:>24.16e} {:>24.16e} {:>6}",
                c.step,
                c.time,
                c.energy,
                p.energy,
                cp.energy,
                cp.mode.label()
            );
        }
        s.push_str(&self.switch_line());
        s.push('\n');
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut out = String::from("step,time,energy_c,energy_p,energy_cp,mode_cp\n");
        for ((c, p), cp) in self.c.iter().zip(&self.p).zip(&self.cp) {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                c.step,
                c.time,
                c.energy,
                p.energy,
                cp.energy,
                cp.mode.label()
            );
        }
        fs::write(path, out).map_err(io_err(path))
    }
}

/// Creates the output directory of `cfg` and returns `dir/name`.
pub fn output_file(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    create_dir(&cfg.output_dir)?;
    Ok(cfg.output_dir.join(name))
}
