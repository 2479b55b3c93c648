//! A single Byzantine node drags its DLMG neighbors to a chosen state.
//! Compares the simulated distance decay with the capture-time formula.

use std::path::Path;

use resilient_diffusion::attack::predicted_capture_time;
use resilient_diffusion::harness::{run_config, ExperimentConfig};

fn main() -> resilient_diffusion::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/two_cluster_attack.json");
    let cfg = ExperimentConfig::load(&path)?;
    let (exp, trace) = run_config(cfg)?;
    let byz = exp.topology.byzantine_nodes()[0];
    let step = exp.config.attack.as_ref().and_then(|a| a.step(byz)).unwrap();

    for eps in [0.1, 0.01, 0.001] {
        println!("(1 - {step})^n <= {eps} first holds at n = {}", predicted_capture_time(step, eps)?);
    }
    println!("\nmean distance to the malicious state:");
    print!("{:>6}", "iter");
    for i in &trace.attacked_nodes {
        print!("{:>9}", format!("node {i}"));
    }
    println!();
    for (row, n) in trace.iterations.iter().enumerate().filter(|(_, n)| *n % 500 == 0) {
        print!("{n:>6}");
        for d in &trace.attacked_distance[row] {
            print!("{d:>9.4}");
        }
        println!();
    }
    println!("\nfinal weight on the Byzantine edge:");
    for &i in &trace.attacked_nodes {
        println!("  a[{byz}->{i}] = {:.4}", trace.final_weight(byz, i));
    }
    Ok(())
}
