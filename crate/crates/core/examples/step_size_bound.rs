//! The mean-stability step bound and what happens on either side of it.

use std::path::Path;

use resilient_diffusion::harness::{run_config, ExperimentConfig, PerNode};
use resilient_diffusion::theory::mean_step_bound;

fn main() -> resilient_diffusion::Result<()> {
    println!("bound for sigma_u^2 = 1:");
    println!("{:>8} {:>10} {:>10} {:>10}", "lambda", "s2=0.01", "s2=0.1", "s2=1");
    for lambda in [0.0, 0.5, 1.0, 2.0] {
        let b: Vec<f64> = [0.01, 0.1, 1.0].iter().map(|&s| mean_step_bound(1.0, lambda, s)).collect();
        println!("{lambda:>8} {:>10.4} {:>10.4} {:>10.4}", b[0], b[1], b[2]);
    }

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/step_bound.json");
    let base = ExperimentConfig::load(&path)?;
    let (exp, _) = run_config(ExperimentConfig { iterations: 0, ..base.clone() })?;
    let bound = exp.step_bounds()?[0].bound;
    println!("\nsingle LMG node, bound {bound}:");
    for factor in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let mut cfg = base.clone();
        cfg.adapt.step_size = PerNode::Shared(factor * bound);
        cfg.iterations = 10_000;
        let (_, trace) = run_config(cfg)?;
        let first = trace.divergent_runs.iter().map(|d| d.iteration).min();
        println!(
            "  mu = {factor:>4} x bound: {:>2}/{} runs diverged{}",
            trace.divergent_runs.len(),
            base.runs,
            first.map_or(String::new(), |n| format!(", first at iteration {n}"))
        );
    }
    Ok(())
}
