#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod stages;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::path::PathBuf;
use std::process::ExitCode;
use tovpulse_core::config::RunConfig;
use tovpulse_core::{Error, Result};

#[derive(Parser)]
#[command(name = "tovpulse", version, about = "Relativistic star equilibria, radial pulsations and exterior matching")]
struct Cli {
    #[command(subcommand)]
    stage: Stage,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding [output] dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Central density, or a comma-separated sweep.
    #[arg(long = "rho-c", global = true, value_delimiter = ',')]
    rho_c: Vec<f64>,
    /// Number of pulsation modes.
    #[arg(long, global = true)]
    modes: Option<usize>,
    /// Perturbation amplitude of the driving mode.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Also check the model operator spectrum against its closed form.
    #[arg(long, global = true)]
    oracle: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq, Debug)]
pub enum Stage {
    /// Integrate the equilibrium.
    Tov,
    /// Solve the pulsation eigenproblem.
    Spectrum,
    /// Evolve the driving mode.
    Evolve,
    /// Evolve configured initial data.
    Cauchy,
    /// Match the evolved surface to the exterior.
    Match,
    /// Run tov, spectrum, evolve, cauchy and match.
    All,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.rho_c.as_slice() {
        [] => {}
        [one] => {
            cfg.tov.rho_c = *one;
            cfg.tov.sweep.clear();
        }
        many => cfg.tov.sweep = many.to_vec(),
    }
    if let Some(m) = cli.modes {
        cfg.pulsation.modes = m;
    }
    if let Some(e) = cli.epsilon {
        cfg.evolution.epsilon = e;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads() -> Result<usize> {
    match std::env::var("TOVPULSE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("TOVPULSE_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn execute(cli: &Cli) -> Result<Vec<Result<String>>> {
    let cfg = load_config(cli)?;
    let root = PathBuf::from(&cfg.output.dir);
    let densities = cfg.tov.densities();
    let jobs: Vec<(RunConfig, PathBuf)> = if densities.len() == 1 {
        vec![(cfg.clone(), root)]
    } else {
        densities
            .iter()
            .enumerate()
            .map(|(i, &rho_c)| {
                let mut c = cfg.clone();
                c.tov.rho_c = rho_c;
                c.tov.sweep.clear();
                (c, root.join(format!("rho_c_{i:03}")))
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads()?)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let sweep = jobs.len() > 1;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|(c, dir)| {
                std::fs::create_dir_all(dir)?;
                let text = stages::run_stage(cli.stage, c, dir, cli.oracle)?;
                Ok(if sweep { format!("[{}]\n{text}", dir.display()) } else { text })
            })
            .collect()
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let results = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut code = 0;
    for r in results {
        match r {
            Ok(text) => print!("{text}"),
            Err(e) => {
                eprintln!("error: {e}");
                if code == 0 {
                    code = e.exit_code();
                }
            }
        }
    }
    ExitCode::from(code as u8)
}
