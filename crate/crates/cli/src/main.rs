//! `alexr`: run experiments, rate sweeps and synthetic data generation from the command line.
//!
//! Exit codes: 0 success, 1 invalid input (config, parameters, usage), 2 failure while running.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alexr::harness::{emit_synthetic, parse_params, run_experiment, sweep_rate, ExperimentConfig};
use alexr::Error;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "alexr", version, about = "Stochastic compositional solvers: experiments and rate sweeps")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for (solver, seed) cells; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every solver and seed; write records, aggregate.csv and manifest.toml.
    Run { config: PathBuf },
    /// Measure iterations to reach each target in `[sweep]` and fit the rate.
    SweepRate { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write a synthetic dataset (`gdro` or `pauc`) and a starter config.
    EmitSynthetic {
        instance: String,
        /// `key=value` pairs, e.g. `n_groups=20 d=10` or `n_groups=20,d=10`.
        params: Vec<String>,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn invalid(e: Error) -> Failure {
    Failure::Invalid(e.to_string())
}

/// Input problems found while running count as invalid input, the rest as runtime failures.
fn classify(e: Error) -> Failure {
    match e {
        Error::Config { .. } | Error::Parse { .. } | Error::MissingColumn(_) => Failure::Invalid(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::from_path(path).map_err(invalid)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let (built, resolved) = cfg.validate().map_err(invalid)?;
            println!(
                "ok: n = {}, dim = {}, {} solver(s), {} candidate(s), {} seed(s)",
                built.problem.n(),
                built.problem.dim(),
                resolved.len(),
                resolved.iter().map(Vec::len).sum::<usize>(),
                cfg.seeds.len()
            );
            Ok(())
        }
        Command::Run { config } => {
            let cfg = load(&config)?;
            cfg.validate().map_err(invalid)?;
            let summary = run_experiment(&cfg, &cli.out).map_err(classify)?;
            for (label, solver, score) in &summary.selected {
                let json = serde_json::to_string(solver).unwrap_or_default();
                println!("{label}: final objective {score:.6e}  {json}");
            }
            println!("wrote {}", summary.out_dir.display());
            Ok(())
        }
        Command::SweepRate { config } => {
            let cfg = load(&config)?;
            if cfg.sweep.is_none() {
                return Err(Failure::Invalid(format!("{}: missing [sweep] table", config.display())));
            }
            cfg.validate().map_err(invalid)?;
            let report = sweep_rate(&cfg, &cli.out).map_err(classify)?;
            for s in &report.solvers {
                for p in &s.points {
                    match p.iterations {
                        Some(t) => println!("{}: eps {:e} -> T {t}", s.solver, p.epsilon),
                        None => println!("{}: eps {:e} -> not reached", s.solver, p.epsilon),
                    }
                }
                match (&s.fit, &s.fit_error) {
                    (Some(f), _) => println!("{}: slope {:.4} (r^2 {:.4})", s.solver, f.slope, f.r_squared),
                    (None, Some(e)) => println!("{}: no fit: {e}", s.solver),
                    (None, None) => {}
                }
            }
            println!("wrote {}", report.out_dir.display());
            if report.is_complete() {
                Ok(())
            } else {
                Err(Failure::Runtime("some targets were not reached or the fit failed".into()))
            }
        }
        Command::EmitSynthetic { instance, params } => {
            let params = parse_params(&params).map_err(invalid)?;
            let files = emit_synthetic(&instance, params, &cli.out).map_err(classify)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Invalid(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
