use std::fs;
use std::path::Path;
use std::process::Command;

use chns_ieq::config::parse_config;
use chns_ieq::driver::{compare_variants, converge_space, converge_time, rates_table, run};
use chns_ieq::history::read_history;

fn config(dir: &Path, text: &str) -> chns_ieq::config::RunConfig {
    parse_config(&format!("{text}\noutput_dir = {}", dir.display())).unwrap()
}

fn files_with_extension(dir: &Path, ext: &str) -> usize {
    fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext)).count()
}

#[test]
fn run_without_snapshots_writes_only_the_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = ex41\nscheme = bdf1\nvariant = p\nnx = 4\ntau = 1e-6\nn_steps = 10\nvtk_every = 0");
    let summary = run(&cfg, 1, |_| {}).unwrap();
    assert!(summary.vtk_files.is_empty());
    assert_eq!(files_with_extension(dir.path(), "vtk"), 0);
    let rows = read_history(&fs::read_to_string(&summary.history_path).unwrap()).unwrap();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows.len(), summary.rows.len());
    for (a, b) in rows.iter().zip(&summary.rows) {
        assert_eq!((a.step, a.mode), (b.step, b.mode));
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        assert_eq!(a.mass.to_bits(), b.mass.to_bits());
    }
}

#[test]
fn snapshots_and_thinned_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = ex42\nnx = 6\nn_steps = 5\nvtk_every = 2\nhistory_every = 2");
    let summary = run(&cfg, 2, |_| {}).unwrap();
    let names: Vec<String> =
        summary.vtk_files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["fields_000000.vtk", "fields_000002.vtk", "fields_000004.vtk"]);
    let steps: Vec<usize> = summary.rows.iter().map(|r| r.step).collect();
    assert_eq!(steps, [0, 2, 4, 5]);
    let vtk = fs::read_to_string(&summary.vtk_files[1]).unwrap();
    assert!(vtk.contains("POINTS 49 double") && vtk.contains("CELLS 72 288"));
}

#[test]
fn zero_steps_gives_the_initial_row_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = ex41\nnx = 4\nn_steps = 0");
    let summary = run(&cfg, 1, |_| {}).unwrap();
    let text = fs::read_to_string(&summary.history_path).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0,"));
}

#[test]
fn identical_runs_write_identical_histories() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let text = "preset = ex42\nnx = 6\nn_steps = 4\nscheme = bdf2\nvariant = cp";
    let ra = run(&config(a.path(), text), 1, |_| {}).unwrap();
    let rb = run(&config(b.path(), text), 3, |_| {}).unwrap();
    assert_eq!(fs::read(ra.history_path).unwrap(), fs::read(rb.history_path).unwrap());
}

#[test]
fn space_study_errors_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = ex41\ntau = 1e-6\nt_end = 1e-5");
    let rows = converge_space(&cfg, &[4, 8, 16], 1, |_| {}).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].rates.is_none() && rows[1].rates.is_some());
    for w in rows.windows(2) {
        let (c, f) = (w[0].errors.as_array(), w[1].errors.as_array());
        assert!((0..4).all(|k| f[k] < c[k]), "{c:?} -> {f:?}");
        assert!((w[0].size / w[1].size - 2.0).abs() < 1e-12);
    }
    let table = rates_table(&rows, "h");
    assert_eq!(table.lines().count(), 4);
    assert!(table.lines().next().unwrap().contains("L2(phi)"));
}

#[test]
fn rates_use_the_actual_refinement_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = ex41\ntau = 1e-6\nt_end = 2e-6");
    let rows = converge_space(&cfg, &[4, 12], 1, |_| {}).unwrap();
    let (c, f) = (rows[0].errors.as_array(), rows[1].errors.as_array());
    let rates = rows[1].rates.unwrap();
    for k in 0..4 {
        assert!((rates[k] - (c[k] / f[k]).ln() / 3f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn time_study_checks_its_steps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = ex41\nnx = 4\ntau = 0.1\nt_end = 0.2");
    assert!(converge_time(&cfg, &[0.1, 0.03], 1, |_| {}).is_err());
    assert!(converge_time(&cfg, &[], 1, |_| {}).is_err());
    let rows = converge_time(&cfg, &[0.1, 0.05], 1, |_| {}).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].size, 0.05);
}

#[test]
fn studies_need_an_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = ex42\nnx = 4\nn_steps = 1");
    assert!(converge_space(&cfg, &[2, 4], 1, |_| {}).is_err());
}

#[test]
fn compare_variants_reports_the_switch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = ex45\nscheme = bdf1\nb = 100\ntau = 1e-7\nn_steps = 100");
    let cmp = compare_variants(&cfg, 1).unwrap();
    assert_eq!(cmp.c.len(), 101);
    let n_star = cmp.c.windows(2).position(|w| w[1].energy > w[0].energy);
    assert_eq!(cmp.switch_step, n_star);
    assert!(n_star.is_some());
    let report = cmp.report();
    assert!(report.contains(&format!("n* = {}", n_star.unwrap())), "{report}");

    let calm = config(dir.path(), "preset = ex42\nnx = 6\nn_steps = 3");
    let cmp = compare_variants(&calm, 1).unwrap();
    assert!(cmp.switch_step.is_none());
    assert!(cmp.report().contains("no switch"));
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chns-ieq"))
}

#[test]
fn binary_runs_and_reports_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.conf");
    fs::write(&good, format!("preset = ex41\nnx = 4\nn_steps = 2\noutput_dir = {}\n", dir.path().join("out").display()))
        .unwrap();
    let out = binary().args(["run", good.to_str().unwrap()]).env("CHNS_IEQ_THREADS", "2").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/history.csv").exists());

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "preset = ex41\ntau = -1\n").unwrap();
    let out = binary().args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("tau"), "{err}");

    let out = binary().args(["run", good.to_str().unwrap()]).env("CHNS_IEQ_THREADS", "zero").output().unwrap();
    assert!(!out.status.success());

    let out = binary()
        .args(["converge-space", good.to_str().unwrap(), "--nx", "2,4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rate"));
    assert!(dir.path().join("out/convergence_space.csv").exists());
}
