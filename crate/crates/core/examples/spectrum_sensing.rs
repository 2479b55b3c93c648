//! Cooperative spectrum estimation with alpha-stable impulses and one
//! Byzantine node. Prints true and estimated PSD per cluster.

use std::path::Path;

use resilient_diffusion::harness::{psd_csv, run_config, ExperimentConfig, ScenarioConfig};

fn main() -> resilient_diffusion::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/spectrum_sensing.json");
    let (exp, trace) = run_config(ExperimentConfig::load(&path)?)?;
    let ScenarioConfig::Sensing(s) = &exp.config.scenario else { unreachable!() };
    let topo = &exp.topology;
    for (label, support) in &s.active_bases {
        let members: Vec<usize> = topo.normal_nodes().into_iter().filter(|&i| topo.cluster_label(i) == label).collect();
        let mean = |m: usize| members.iter().map(|&i| trace.mean_final_estimates[i][m]).sum::<f64>() / members.len() as f64;
        let total: f64 = (0..s.num_basis).map(mean).sum();
        let on: f64 = support.iter().map(|&m| mean(m)).sum();
        println!("cluster {label}: {:.1}% of estimated power on its {} active bases", 100.0 * on / total, support.len());
        for &m in support {
            println!("  basis {m:>2}: {:.3} (true {})", mean(m), s.power);
        }
    }
    let csv = psd_csv(&exp, Some(&trace))?;
    let out = std::env::temp_dir().join("psd.csv");
    std::fs::write(&out, csv).expect("temp dir is writable");
    println!("PSD table written to {}", out.display());
    Ok(())
}
