use std::fs;
use std::path::PathBuf;

use resilient_diffusion::combine::AlgorithmKind;
use resilient_diffusion::harness::{
    emit_outputs, networked_from_subnetworks, run_config, run_experiment, Experiment, ExperimentConfig, Manifest,
};

fn config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).unwrap()
}

fn small(name: &str) -> ExperimentConfig {
    let mut c = config(name);
    c.runs = 3;
    c.iterations = 400;
    c
}

#[test]
fn manifest_config_reproduces_identical_csvs() {
    let (exp, trace) = run_config(small("two_cluster_attack.json")).unwrap();
    let first = tempfile::tempdir().unwrap();
    emit_outputs(&exp, &trace, first.path()).unwrap();

    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(first.path().join("manifest.json")).unwrap()).unwrap();
    let (exp2, trace2) = run_config(manifest.config).unwrap();
    let second = tempfile::tempdir().unwrap();
    emit_outputs(&exp2, &trace2, second.path()).unwrap();
    for f in ["msd_network.csv", "msd_per_node.csv", "msd_subnetwork.csv", "attacked_distance.csv", "weights_final.csv", "manifest.json"] {
        assert_eq!(fs::read(first.path().join(f)).unwrap(), fs::read(second.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn networked_msd_matches_subnetwork_average_on_every_row() {
    for name in ["two_cluster_attack.json", "impulsive_noise.json", "f_sweep.json"] {
        let (_, trace) = run_config(small(name)).unwrap();
        assert!(trace.msd_network.iter().all(|x| x.is_finite()));
        for row in 0..trace.iterations.len() {
            let a = trace.msd_network[row];
            assert!((a - networked_from_subnetworks(&trace, row)).abs() <= 1e-12 * a.max(1.0), "{name} row {row}");
        }
    }
}

#[test]
fn nc_kinds_never_mix_clusters() {
    let mut cfg = small("f_sweep.json");
    cfg.algorithm = AlgorithmKind::NcLmg;
    let (exp, trace) = run_config(cfg).unwrap();
    assert_eq!(trace.subnetworks.len(), exp.topology.normal_nodes().len());
    for (j, i, a) in &trace.final_weights {
        assert_eq!(*a, if j == i { 1.0 } else { 0.0 });
    }
}

#[test]
fn attack_free_dlmg_and_rdlmg_with_zero_removal_agree() {
    let mut a = small("f_sweep.json");
    a.algorithm = AlgorithmKind::Dlmg;
    let mut b = small("f_sweep.json");
    b.combine.removal_count = 0;
    assert_eq!(run_config(a).unwrap().1.msd_per_node, run_config(b).unwrap().1.msd_per_node);
}

#[test]
fn theory_ignores_byzantine_and_cross_cluster_structure() {
    let exp = Experiment::from_config(config("two_cluster_attack.json")).unwrap();
    let inputs = exp.theory_inputs().unwrap();
    assert_eq!(inputs.num_nodes(), 19);
    assert!(!inputs.node_ids().contains(&7));
    let report = exp.theory().unwrap();
    for (j, i, _) in &report.weights {
        assert_eq!(exp.topology.cluster(*j), exp.topology.cluster(*i));
    }
}

#[test]
fn random_geometric_config_uses_the_large_theory_path() {
    let exp = Experiment::from_config(config("random_geometric.json")).unwrap();
    assert_eq!(exp.topology.num_nodes() * exp.dimension(), 108);
    assert!(exp.topology.is_connected());
    let report = exp.theory().unwrap();
    assert!(report.stable && report.msd_db.unwrap() < -40.0);
    assert_eq!(exp.regressor_variances.len(), 36);
    assert!(exp.regressor_variances.iter().all(|v| (0.8..=1.2).contains(v)));
}

#[test]
fn divergence_before_the_horizon_fills_infinity() {
    let mut cfg = config("step_bound.json");
    cfg.adapt.step_size = resilient_diffusion::harness::PerNode::Shared(32.0);
    cfg.iterations = 10_000;
    cfg.runs = 2;
    let exp = Experiment::from_config(cfg).unwrap();
    let trace = run_experiment(&exp).unwrap();
    assert_eq!(trace.divergent_runs.len(), 2);
    assert_eq!(trace.completed_runs, 0);
    let first = trace.divergent_runs.iter().map(|d| d.iteration).min().unwrap();
    for (n, m) in trace.iterations.iter().zip(&trace.msd_network) {
        assert_eq!(m.is_infinite(), *n >= first, "iteration {n}");
    }
}
