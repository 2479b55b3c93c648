//! All six algorithms on the same impulsive, attacked network.

use std::path::Path;

use resilient_diffusion::combine::AlgorithmKind;
use resilient_diffusion::harness::{run_config, ExperimentConfig};

fn main() -> resilient_diffusion::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/impulsive_noise.json");
    let base = ExperimentConfig::load(&path)?;
    println!("{:<8} {:>12} {:>10}", "kind", "steady dB", "diverged");
    for kind in AlgorithmKind::ALL {
        let mut cfg = base.clone();
        cfg.algorithm = kind;
        let (_, trace) = run_config(cfg)?;
        let tail = trace.msd_network.len() / 10;
        println!(
            "{:<8} {:>12.2} {:>10}",
            kind.name(),
            10.0 * trace.steady_state_msd(tail).log10(),
            trace.divergent_runs.len()
        );
    }
    Ok(())
}
