use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chns_ieq::config::RunConfig;
use chns_ieq::driver::{self, threads_from_env};
use chns_ieq::CliError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chns-ieq", version, about = "Cahn-Hilliard-Navier-Stokes IEQ finite element solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write history.csv (plus VTK snapshots if requested).
    Run { config: PathBuf },
    /// Mesh refinement study against the exact solution.
    ConvergeSpace {
        config: PathBuf,
        /// Comma separated mesh sizes, e.g. 4,8,16,32.
        #[arg(long, value_delimiter = ',', required = true)]
        nx: Vec<usize>,
    },
    /// Time step refinement study against the exact solution.
    ConvergeTime {
        config: PathBuf,
        /// Comma separated time steps, e.g. 0.04,0.02,0.01,0.005.
        #[arg(long, value_delimiter = ',', required = true)]
        tau: Vec<f64>,
    },
    /// Run the C, P and CP variants and report their energies and the CP switch step.
    CompareVariants { config: PathBuf },
}

fn describe(cfg: &RunConfig, threads: usize) {
    eprintln!(
        "{}: {:?}/{:?}, {}x{} mesh, tau = {:e}, {} steps, {} thread(s)",
        cfg.example.name(),
        cfg.scheme,
        cfg.variant,
        cfg.nx,
        cfg.ny,
        cfg.tau,
        cfg.n_steps,
        threads
    );
}

fn study(cfg: &RunConfig, label: &str, file: &str, rows: &[chns_core::convergence::StudyRow]) -> Result<(), CliError> {
    print!("{}", driver::rates_table(rows, label));
    let path = driver::output_file(cfg, file)?;
    driver::write_rates_csv(&path, rows, label)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn load(path: &Path) -> Result<(RunConfig, usize), CliError> {
    let cfg = driver::load_config(path)?;
    let threads = threads_from_env()?;
    describe(&cfg, threads);
    Ok((cfg, threads))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    match cli.command {
        Command::Run { config } => {
            let (cfg, threads) = load(&config)?;
            let summary = driver::run(&cfg, threads, |r| {
                eprintln!("step {:>8}  t = {:.6e}  E = {:.10e}  mass = {:.10e}  {}", r.step, r.time, r.energy, r.mass, r.mode.label())
            })?;
            let (first, last) = (&summary.rows[0], summary.rows.last().expect("initial row"));
            println!("history: {}", summary.history_path.display());
            println!("vtk files: {}", summary.vtk_files.len());
            println!("energy: {:.16e} -> {:.16e}", first.energy, last.energy);
            println!("mass change: {:.3e}", last.mass - first.mass);
            if cfg.variant == chns_core::ieq::Variant::Cp {
                match summary.switch_step {
                    Some(n) => println!("CP switch: n* = {n}"),
                    None => println!("CP switch: no switch"),
                }
            }
        }
        Command::ConvergeSpace { config, nx } => {
            let (cfg, threads) = load(&config)?;
            let rows = driver::converge_space(&cfg, &nx, threads, |r| eprintln!("h = {:.4e} done", r.size))?;
            study(&cfg, "h", "convergence_space.csv", &rows)?;
        }
        Command::ConvergeTime { config, tau } => {
            let (cfg, threads) = load(&config)?;
            let rows = driver::converge_time(&cfg, &tau, threads, |r| eprintln!("tau = {:.4e} done", r.size))?;
            study(&cfg, "tau", "convergence_time.csv", &rows)?;
        }
        Command::CompareVariants { config } => {
            let (cfg, threads) = load(&config)?;
            let cmp = driver::compare_variants(&cfg, threads)?;
            print!("{}", cmp.report());
            let path = driver::output_file(&cfg, "compare_variants.csv")?;
            cmp.write_csv(&path)?;
            eprintln!("wrote {}", path.display());
        }
    }
    eprintln!("elapsed {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
