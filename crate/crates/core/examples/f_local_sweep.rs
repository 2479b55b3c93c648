//! Steady-state cost of removing more neighbors per iteration when no
//! attacker is present.

use std::path::Path;

use resilient_diffusion::harness::{run_config, ExperimentConfig};

fn main() -> resilient_diffusion::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/f_sweep.json");
    let mut base = ExperimentConfig::load(&path)?;
    base.runs = 20;
    for f in 0..=3 {
        let mut cfg = base.clone();
        cfg.combine.removal_count = f;
        let (_, trace) = run_config(cfg)?;
        let tail = trace.msd_network.len() / 5;
        println!(
            "F = {f}: steady MSD {:.2} dB, {} subnetworks",
            10.0 * trace.steady_state_msd(tail).log10(),
            trace.subnetworks.len()
        );
    }
    Ok(())
}
