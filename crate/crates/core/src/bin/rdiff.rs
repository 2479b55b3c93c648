use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use resilient_diffusion::combine::AlgorithmKind;
use resilient_diffusion::harness::{self, Experiment, ExperimentConfig};
use resilient_diffusion::{Error, Result};

#[derive(Parser)]
#[command(name = "rdiff", version, about = "Resilient diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo experiment and write CSV traces plus a manifest.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        algorithm: Option<AlgorithmKind>,
    },
    /// Write the steady-state MSD report as JSON.
    Theory {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the per-node mean-stability step bounds.
    Bound { config: PathBuf },
    /// Print alive edges and subnetworks after N iterations as JSON.
    TopologySnapshot {
        config: PathBuf,
        #[arg(long)]
        iteration: usize,
    },
    /// Write the per-cluster PSD of a sensing scenario as CSV.
    Psd {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also run the experiment and add the estimated PSD.
        #[arg(long)]
        estimate: bool,
    },
}

fn write(path: &PathBuf, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })
}

/// Writes to stdout, tolerating a closed pipe.
fn stdout(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            runs,
            seed,
            algorithm,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(a) = algorithm {
                cfg.algorithm = a;
            }
            let (exp, trace) = harness::run_config(cfg)?;
            let manifest = harness::emit_outputs(&exp, &trace, &out)?;
            let last = trace.msd_network.last().copied().unwrap_or(f64::NAN);
            println!(
                "{}: {} runs, final MSD {:.2} dB, {} divergent, outputs in {}",
                exp.config.algorithm,
                exp.config.runs,
                harness::to_db(last),
                manifest.divergences.len(),
                out.display()
            );
        }
        Command::Theory { config, out } => {
            let report = Experiment::load(&config)?.theory()?;
            write(&out, &serde_json::to_string_pretty(&report)?)?;
            match report.msd_db {
                Some(db) => println!("steady-state MSD {db:.2} dB, spectral radius {:.6}", report.spectral_radius),
                None => println!("unstable: spectral radius {:.6}", report.spectral_radius),
            }
        }
        Command::Bound { config } => {
            let mut text = String::from("node,step_size,bound,stable\n");
            for b in Experiment::load(&config)?.step_bounds()? {
                text += &format!("{},{},{},{}\n", b.node, b.step_size, b.bound, b.step_size < b.bound);
            }
            stdout(&text);
        }
        Command::TopologySnapshot { config, iteration } => {
            let snap = harness::topology_snapshot(&ExperimentConfig::load(&config)?, iteration)?;
            stdout(&(serde_json::to_string_pretty(&snap)? + "\n"));
        }
        Command::Psd { config, out, estimate } => {
            let exp = Experiment::load(&config)?;
            let trace = if estimate {
                Some(harness::run_experiment(&exp)?)
            } else {
                None
            };
            write(&out, &harness::psd_csv(&exp, trace.as_ref())?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
