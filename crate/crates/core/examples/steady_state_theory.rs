//! Steady-state MSD predictions against Monte-Carlo averages, for the
//! 8-node two-cluster network and a 36-node random geometric graph.

use std::path::Path;

use resilient_diffusion::harness::{run_config, ExperimentConfig, PerNode};

fn compare(name: &str, cfg: ExperimentConfig) -> resilient_diffusion::Result<()> {
    let (exp, trace) = run_config(cfg)?;
    let report = exp.theory()?;
    let tail = trace.msd_network.len() / 20;
    let sim = 10.0 * trace.steady_state_msd(tail).log10();
    match report.msd_db {
        Some(theory) => println!(
            "{name}: theory {theory:.2} dB, simulation {sim:.2} dB, rho(Phi) {:.5}",
            report.spectral_radius
        ),
        None => println!("{name}: unstable, rho(Phi) {:.5}", report.spectral_radius),
    }
    Ok(())
}

fn main() -> resilient_diffusion::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let base = ExperimentConfig::load(&dir.join("theory_match.json"))?;
    for (mu, lambda) in [(0.01, 0.5), (0.02, 2.0), (0.05, 1.0)] {
        let mut cfg = base.clone();
        cfg.adapt.step_size = PerNode::Shared(mu);
        cfg.adapt.gm_lambda = lambda;
        cfg.runs = 20;
        compare(&format!("8 nodes, mu={mu}, lambda={lambda}"), cfg)?;
    }
    compare("36-node geometric graph", ExperimentConfig::load(&dir.join("random_geometric.json"))?)
}
