//! Closed-form predictions: the mean-stability step bound and the
//! steady-state mean-square deviation of the normal nodes.
//!
//! With white regressors, the steady-state error covariance `𝒲` of the
//! stacked estimates satisfies `𝒲 = B 𝒲 Bᵀ + 𝒜ᵀℳℱ ℋ ℱℳ𝒜` with
//! `B = 𝒜ᵀ(I - ℳℱ𝒰)`. Vectorized, that is `(I - Φ) vec 𝒲 = rhs` with
//! `Φ = B ⊗ B`. The expected scale `ℱ` and the expected weights `𝒜` are
//! replaced by their plug-in steady-state values.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::combine::removal_set;
use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// Largest `N·M` for which the Kronecker system is assembled.
pub const KRONECKER_LIMIT: usize = 64;
/// Largest `N·M` accepted at all; beyond the Kronecker limit the equivalent
/// Stein equation is solved by doubling.
pub const SIZE_LIMIT: usize = 200;

/// `2 (1 + λσ_η²)² / σ_u²`. Use `λ = 0` for the LMS kernel.
pub fn mean_step_bound(sigma_u2: f64, lambda: f64, sigma_eta2: f64) -> f64 {
    2.0 / (expected_scale(lambda, sigma_eta2) * sigma_u2)
}

/// Plug-in `E{f} ≈ 1 / (1 + λσ_η²)²`.
pub fn expected_scale(lambda: f64, sigma_eta2: f64) -> f64 {
    let s = 1.0 + lambda * sigma_eta2;
    1.0 / (s * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeTheory {
    pub step_size: f64,
    /// Zero for the LMS kernel.
    pub gm_lambda: f64,
    pub sigma_u2: f64,
    pub sigma_eta2: f64,
}

impl NodeTheory {
    fn validate(&self, node: NodeId) -> Result<()> {
        let ok = self.step_size > 0.0
            && self.gm_lambda >= 0.0
            && self.sigma_u2 > 0.0
            && self.sigma_eta2 > 0.0
            && [self.step_size, self.gm_lambda, self.sigma_u2, self.sigma_eta2].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Theory(format!("node {node}: parameters must be positive and finite: {self:?}")))
        }
    }

    /// `E{γ⁻²(∞)} = (1+λσ_η²)⁴ / (μ² M σ_u² σ_η²)`.
    pub fn inverse_gamma_sq(&self, dimension: usize) -> f64 {
        let s = 1.0 + self.gm_lambda * self.sigma_eta2;
        s.powi(4) / (self.step_size * self.step_size * dimension as f64 * self.sigma_u2 * self.sigma_eta2)
    }

    pub fn expected_scale(&self) -> f64 {
        expected_scale(self.gm_lambda, self.sigma_eta2)
    }
}

/// Normal nodes, their steady-state neighborhoods and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInputs {
    dimension: usize,
    ids: Vec<NodeId>,
    nodes: Vec<NodeTheory>,
    // Local indices, ascending, including self.
    neighbors: Vec<Vec<usize>>,
    removal_count: usize,
    cooperative: bool,
}

impl TheoryInputs {
    /// Restricts `topo` to its normal nodes and to edges inside a cluster.
    ///
    /// `per_node` is indexed by node id; entries of Byzantine nodes are ignored.
    pub fn new(
        topo: &Topology,
        dimension: usize,
        per_node: &[NodeTheory],
        removal_count: usize,
        cooperative: bool,
    ) -> Result<Self> {
        if per_node.len() != topo.num_nodes() {
            return Err(Error::input("need one parameter set per node"));
        }
        let ids = topo.normal_nodes();
        if ids.is_empty() {
            return Err(Error::Theory("no normal nodes".into()));
        }
        let n_m = ids.len() * dimension;
        if dimension == 0 || n_m > SIZE_LIMIT {
            return Err(Error::Theory(format!("N·M = {n_m} outside 1..={SIZE_LIMIT}")));
        }
        let mut local = vec![usize::MAX; topo.num_nodes()];
        for (k, &i) in ids.iter().enumerate() {
            local[i] = k;
            per_node[i].validate(i)?;
        }
        let neighbors = ids
            .iter()
            .map(|&i| {
                if !cooperative {
                    return vec![local[i]];
                }
                topo.neighborhood(i)
                    .iter()
                    .filter(|&&j| !topo.is_byzantine(j) && topo.cluster(j) == topo.cluster(i))
                    .map(|&j| local[j])
                    .collect()
            })
            .collect();
        Ok(Self {
            dimension,
            nodes: ids.iter().map(|&i| per_node[i]).collect(),
            ids,
            neighbors,
            removal_count,
            cooperative,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Original node ids, in the order used by all returned matrices.
    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn nodes(&self) -> &[NodeTheory] {
        &self.nodes
    }

    /// Steady-state removal set of local node `k`, as local indices.
    pub fn removal(&self, k: usize) -> BTreeSet<usize> {
        if !self.cooperative {
            return BTreeSet::new();
        }
        let g: Vec<(NodeId, f64)> = self.neighbors[k]
            .iter()
            .map(|&j| (j, self.nodes[j].inverse_gamma_sq(self.dimension)))
            .collect();
        // Expected contribution is E{γ⁻²}² times a node-i constant, so ranking by E{γ⁻²} is equivalent.
        removal_set(&g, self.removal_count)
    }
}

/// Expected steady-state weights: entry `(j, i)` is `E{a_{j,i}(∞)}` over local indices.
pub fn steady_state_weights(inputs: &TheoryInputs) -> Result<DMatrix<f64>> {
    let n = inputs.num_nodes();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let removed = inputs.removal(i);
        let survivors: Vec<usize> = inputs.neighbors[i].iter().copied().filter(|j| !removed.contains(j)).collect();
        if survivors.is_empty() {
            return Err(Error::contract(format!("node {} has no steady-state survivors", inputs.ids[i])));
        }
        let g: Vec<f64> = survivors
            .iter()
            .map(|&j| inputs.nodes[j].inverse_gamma_sq(inputs.dimension))
            .collect();
        let total: f64 = g.iter().sum();
        for (&j, gj) in survivors.iter().zip(&g) {
            a[(j, i)] = gj / total;
        }
    }
    Ok(a)
}

struct Blocks {
    a_big: DMatrix<f64>,
    mf: DMatrix<f64>,
    mfu: DMatrix<f64>,
    h: DMatrix<f64>,
}

fn blocks(inputs: &TheoryInputs) -> Result<Blocks> {
    let m = inputs.dimension;
    let eye = DMatrix::<f64>::identity(m, m);
    let a = steady_state_weights(inputs)?;
    let diag = |f: &dyn Fn(&NodeTheory) -> f64| {
        DMatrix::from_diagonal(&DVector::from_iterator(inputs.num_nodes(), inputs.nodes.iter().map(f))).kronecker(&eye)
    };
    Ok(Blocks {
        a_big: a.kronecker(&eye),
        mf: diag(&|p| p.step_size * p.expected_scale()),
        mfu: diag(&|p| p.step_size * p.expected_scale() * p.sigma_u2),
        h: diag(&|p| p.sigma_eta2 * p.sigma_u2),
    })
}

fn transition(b: &Blocks) -> DMatrix<f64> {
    let nm = b.a_big.nrows();
    b.a_big.transpose() * (DMatrix::identity(nm, nm) - &b.mfu)
}

/// `Φ = B ⊗ B` with `B = 𝒜ᵀ(I - ℳℱ𝒰)`.
pub fn phi_direct(inputs: &TheoryInputs) -> Result<DMatrix<f64>> {
    let b = transition(&blocks(inputs)?);
    Ok(b.kronecker(&b))
}

/// `Φ = (𝒜ᵀ⊗𝒜ᵀ)(I⊗I - I⊗ℳℱ𝒰 - ℳℱ𝒰⊗I + ℳℱ𝒰⊗ℳℱ𝒰)`.
pub fn phi_expanded(inputs: &TheoryInputs) -> Result<DMatrix<f64>> {
    let b = blocks(inputs)?;
    let nm = b.a_big.nrows();
    let eye = DMatrix::<f64>::identity(nm, nm);
    let at = b.a_big.transpose();
    let inner = eye.kronecker(&eye) - eye.kronecker(&b.mfu) - b.mfu.kronecker(&eye) + b.mfu.kronecker(&b.mfu);
    Ok(at.kronecker(&at) * inner)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMsd {
    pub node: NodeId,
    pub msd: f64,
    pub msd_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepBound {
    pub node: NodeId,
    pub step_size: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub stable: bool,
    /// ρ(Φ) = ρ(B)².
    pub spectral_radius: f64,
    pub msd: Option<f64>,
    pub msd_db: Option<f64>,
    pub per_node: Vec<NodeMsd>,
    pub step_bounds: Vec<StepBound>,
    /// `(j, i, E{a_{j,i}})` over original ids, nonzero entries only.
    pub weights: Vec<(NodeId, NodeId, f64)>,
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Steady-state per-node and networked MSD, or an instability report.
pub fn steady_state_msd(inputs: &TheoryInputs) -> Result<TheoryReport> {
    let blk = blocks(inputs)?;
    let b = transition(&blk);
    let rho_b = spectral_radius(&b);
    let spectral_radius = rho_b * rho_b;
    let a = steady_state_weights(inputs)?;
    let ids = &inputs.ids;
    let mut report = TheoryReport {
        stable: spectral_radius < 1.0,
        spectral_radius,
        msd: None,
        msd_db: None,
        per_node: Vec::new(),
        step_bounds: ids
            .iter()
            .zip(&inputs.nodes)
            .map(|(&node, p)| StepBound {
                node,
                step_size: p.step_size,
                bound: mean_step_bound(p.sigma_u2, p.gm_lambda, p.sigma_eta2),
            })
            .collect(),
        weights: a
            .column_iter()
            .enumerate()
            .flat_map(|(i, col)| {
                col.iter()
                    .enumerate()
                    .filter(|(_, &x)| x > 0.0)
                    .map(|(j, &x)| (ids[j], ids[i], x))
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    if !report.stable {
        return Ok(report);
    }
    let nm = b.nrows();
    let w = if nm <= KRONECKER_LIMIT {
        covariance_kronecker(&blk, &b)?
    } else {
        covariance_doubling(&blk, &b)?
    };
    let m = inputs.dimension;
    report.per_node = ids
        .iter()
        .enumerate()
        .map(|(k, &node)| {
            let msd = w.view((k * m, k * m), (m, m)).trace();
            NodeMsd {
                node,
                msd,
                msd_db: to_db(msd),
            }
        })
        .collect();
    let msd = w.trace() / inputs.num_nodes() as f64;
    report.msd = Some(msd);
    report.msd_db = Some(to_db(msd));
    Ok(report)
}

/// Largest eigenvalue modulus; falls back to `‖B^k‖^{1/k}` when the Schur iteration stalls.
fn spectral_radius(b: &DMatrix<f64>) -> f64 {
    if let Some(schur) = nalgebra::linalg::Schur::try_new(b.clone(), f64::EPSILON, 10_000) {
        return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    gelfand_radius(b)
}

fn gelfand_radius(b: &DMatrix<f64>) -> f64 {
    let mut p = b.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..40 {
        let norm = p.norm();
        if norm == 0.0 {
            return 0.0;
        }
        p /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        p = &p * &p;
        power *= 2.0;
    }
    ((log_scale + p.norm().ln()) / power).exp()
}

fn noise_term(blk: &Blocks) -> DMatrix<f64> {
    let g = blk.a_big.transpose() * &blk.mf;
    &g * &blk.h * g.transpose()
}

fn covariance_kronecker(blk: &Blocks, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nm = b.nrows();
    let at = blk.a_big.transpose();
    let vec_h = DVector::from_column_slice(blk.h.as_slice());
    let rhs = at.kronecker(&at) * (blk.mf.kronecker(&blk.mf) * vec_h);
    let lhs = DMatrix::<f64>::identity(nm * nm, nm * nm) - b.kronecker(b);
    let x = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Theory("I - Φ is singular".into()))?;
    Ok(DMatrix::from_column_slice(nm, nm, x.as_slice()))
}

fn covariance_doubling(blk: &Blocks, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut w = noise_term(blk);
    let mut p = b.clone();
    for _ in 0..200 {
        let next = &w + &p * &w * p.transpose();
        let delta = (&next - &w).norm();
        w = next;
        p = &p * &p;
        if delta <= 1e-16 * w.norm() {
            return Ok(w);
        }
    }
    Err(Error::Theory("doubling iteration did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn homogeneous(topo: &Topology, mu: f64, lambda: f64, s_eta: f64) -> Vec<NodeTheory> {
        vec![
            NodeTheory {
                step_size: mu,
                gm_lambda: lambda,
                sigma_u2: 1.0,
                sigma_eta2: s_eta,
            };
            topo.num_nodes()
        ]
    }

    fn ring(n: usize) -> Topology {
        Topology::new(n, (0..n).map(|i| (i, (i + 1) % n)), &vec!["a".to_string(); n], &[]).unwrap()
    }

    #[test]
    fn bound_cases() {
        assert!((mean_step_bound(1.0, 1e-12, 1.0) - 2.0).abs() < 1e-9);
        assert_eq!(mean_step_bound(1.0, 1.0, 1.0), 8.0);
        assert_eq!(mean_step_bound(2.0, 1.0, 1.0), 4.0);
    }

    #[test]
    fn weights_cases() {
        let topo = ring(4);
        let inp = TheoryInputs::new(&topo, 2, &homogeneous(&topo, 0.01, 1.0, 0.01), 0, true).unwrap();
        let a = steady_state_weights(&inp).unwrap();
        for i in 0..4 {
            let col: Vec<f64> = a.column(i).iter().copied().filter(|&x| x > 0.0).collect();
            assert_eq!(col.len(), 3);
            assert!(col.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        }

        let mut params = homogeneous(&topo, 0.01, 1.0, 0.01);
        params[1].step_size = 0.02;
        let inp = TheoryInputs::new(&topo, 2, &params, 0, true).unwrap();
        let a = steady_state_weights(&inp).unwrap();
        assert!((a[(0, 0)] / a[(1, 0)] - 4.0).abs() < 1e-12);

        let lone = Topology::new(1, [], &["a".to_string()], &[]).unwrap();
        let inp = TheoryInputs::new(&lone, 2, &homogeneous(&lone, 0.01, 1.0, 0.01), 1, true).unwrap();
        assert_eq!(steady_state_weights(&inp).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn removal_uses_lowest_id_on_ties() {
        let topo = ring(5);
        let inp = TheoryInputs::new(&topo, 1, &homogeneous(&topo, 0.01, 1.0, 0.01), 1, true).unwrap();
        assert_eq!(inp.removal(2), BTreeSet::from([1]));
        assert_eq!(inp.removal(0), BTreeSet::from([0]));
    }

    #[test]
    fn single_node_closed_form() {
        let lone = Topology::new(1, [], &["a".to_string()], &[]).unwrap();
        for (mu, lambda, s2, su) in [(0.01, 1.0, 0.01, 1.0), (0.1, 0.0, 0.5, 2.0), (0.3, 2.0, 1.0, 0.7)] {
            let p = NodeTheory {
                step_size: mu,
                gm_lambda: lambda,
                sigma_u2: su,
                sigma_eta2: s2,
            };
            let m = 3;
            let r = steady_state_msd(&TheoryInputs::new(&lone, m, &[p], 0, true).unwrap()).unwrap();
            let f = expected_scale(lambda, s2);
            let expect = m as f64 * mu * f * s2 / (2.0 - mu * f * su);
            assert!((r.msd.unwrap() / expect - 1.0).abs() < 1e-10, "{:?} vs {expect}", r.msd);
            assert!((r.spectral_radius - (1.0 - mu * f * su).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn small_step_scaling() {
        let topo = ring(4);
        let msd = |mu| {
            let inp = TheoryInputs::new(&topo, 2, &homogeneous(&topo, mu, 1.0, 0.01), 1, true).unwrap();
            steady_state_msd(&inp).unwrap().msd.unwrap()
        };
        let ratio = msd(1e-2) / msd(1e-3);
        assert!((ratio / 10.0 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn unstable_step_is_reported() {
        let topo = ring(4);
        let inp = TheoryInputs::new(&topo, 2, &homogeneous(&topo, 10.0, 1.0, 0.01), 0, true).unwrap();
        let r = steady_state_msd(&inp).unwrap();
        assert!(!r.stable && r.spectral_radius >= 1.0 && r.msd.is_none());
    }

    #[test]
    fn byzantine_and_cross_cluster_edges_are_dropped() {
        let labels: Vec<String> = ["a", "a", "b", "b", "a"].iter().map(|s| s.to_string()).collect();
        let topo = Topology::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], &labels, &[4]).unwrap();
        let inp = TheoryInputs::new(&topo, 2, &homogeneous(&topo, 0.01, 1.0, 0.01), 0, true).unwrap();
        assert_eq!(inp.node_ids(), &[0, 1, 2, 3]);
        let a = steady_state_weights(&inp).unwrap();
        assert_eq!(a[(2, 1)], 0.0);
        assert_eq!(a[(1, 0)], 0.5);
    }

    #[test]
    fn doubling_matches_kronecker() {
        let topo = ring(6);
        let mut params = homogeneous(&topo, 0.05, 0.5, 0.02);
        params[2].sigma_u2 = 1.7;
        params[4].step_size = 0.01;
        let inp = TheoryInputs::new(&topo, 2, &params, 1, true).unwrap();
        let blk = blocks(&inp).unwrap();
        let b = transition(&blk);
        let k = covariance_kronecker(&blk, &b).unwrap();
        let d = covariance_doubling(&blk, &b).unwrap();
        assert!((&k - &d).norm() <= 1e-10 * k.norm());
    }

    #[test]
    fn size_guard() {
        let topo = ring(101);
        let r = TheoryInputs::new(&topo, 2, &homogeneous(&topo, 0.01, 1.0, 0.01), 1, true);
        assert!(matches!(r, Err(Error::Theory(_))));
    }

    fn random_instance() -> impl Strategy<Value = (Topology, Vec<NodeTheory>, usize)> {
        (2usize..5, proptest::collection::vec(any::<bool>(), 10), 0usize..3).prop_flat_map(|(n, keep, f)| {
            let params = proptest::collection::vec((0.005f64..0.2, 0.0f64..3.0, 0.5f64..2.0, 0.005f64..0.5), n);
            (Just(n), Just(keep), Just(f), params).prop_map(|(n, keep, f, ps)| {
                let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
                let edges: Vec<_> = pairs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| e).collect();
                let topo = Topology::new(n, edges, &vec!["a".to_string(); n], &[]).unwrap();
                let nodes = ps
                    .into_iter()
                    .map(|(mu, l, su, se)| NodeTheory { step_size: mu, gm_lambda: l, sigma_u2: su, sigma_eta2: se })
                    .collect();
                (topo, nodes, f)
            })
        })
    }

    #[test]
    fn gelfand_fallback_matches_schur() {
        let b = DMatrix::from_row_slice(3, 3, &[0.5, 0.3, -0.2, -0.4, 0.6, 0.1, 0.2, 0.0, 0.7]);
        let exact = b.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((gelfand_radius(&b) - exact).abs() < 1e-9);
        assert_eq!(gelfand_radius(&DMatrix::zeros(2, 2)), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn phi_routes_agree((topo, nodes, f) in random_instance()) {
            let inp = TheoryInputs::new(&topo, 2, &nodes, f, true).unwrap();
            let d = phi_direct(&inp).unwrap();
            let e = phi_expanded(&inp).unwrap();
            prop_assert!((&d - &e).norm() < 1e-10);
        }

        #[test]
        fn weights_are_column_stochastic((topo, nodes, f) in random_instance()) {
            let inp = TheoryInputs::new(&topo, 2, &nodes, f, true).unwrap();
            let a = steady_state_weights(&inp).unwrap();
            for i in 0..a.ncols() {
                prop_assert!((a.column(i).sum() - 1.0).abs() < 1e-12);
                prop_assert!(a.column(i).iter().all(|&x| x >= 0.0));
            }
        }

        #[test]
        fn vec_trace_identity((topo, nodes, f) in random_instance()) {
            let inp = TheoryInputs::new(&topo, 2, &nodes, f, true).unwrap();
            let r = steady_state_msd(&inp).unwrap();
            if let Some(msd) = r.msd {
                let by_node: f64 = r.per_node.iter().map(|x| x.msd).sum::<f64>() / r.per_node.len() as f64;
                prop_assert!((msd - by_node).abs() <= 1e-12 * msd.abs().max(1e-300) + 1e-300);
            }
        }

        #[test]
        fn relabeling_invariance((topo, nodes, f) in random_instance(), shift in 1usize..4) {
            prop_assume!(f == 0);
            let n = topo.num_nodes();
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let edges = topo.edges().into_iter().map(|(a, b)| (perm[a], perm[b]));
            let relabeled = Topology::new(n, edges, &vec!["a".to_string(); n], &[]).unwrap();
            let mut moved = nodes.clone();
            for i in 0..n {
                moved[perm[i]] = nodes[i];
            }
            let a = steady_state_msd(&TheoryInputs::new(&topo, 2, &nodes, 0, true).unwrap()).unwrap();
            let b = steady_state_msd(&TheoryInputs::new(&relabeled, 2, &moved, 0, true).unwrap()).unwrap();
            prop_assert!((a.spectral_radius - b.spectral_radius).abs() < 1e-10);
            if let (Some(x), Some(y)) = (a.msd, b.msd) {
                prop_assert!((x - y).abs() <= 1e-9 * x);
                for i in 0..n {
                    prop_assert!((a.per_node[i].msd - b.per_node[perm[i]].msd).abs() <= 1e-9 * a.per_node[i].msd);
                }
            }
        }

        #[test]
        fn below_bound_is_stable(mu_frac in 0.01f64..0.95, lambda in 0.0f64..3.0, s in 0.001f64..1.0, n in 1usize..6) {
            let topo = ring(n.max(3));
            let bound = mean_step_bound(1.0, lambda, s);
            let nodes = homogeneous(&topo, mu_frac * bound, lambda, s);
            let r = steady_state_msd(&TheoryInputs::new(&topo, 2, &nodes, 1, true).unwrap()).unwrap();
            prop_assert!(r.stable, "ρ = {}", r.spectral_radius);
        }
    }
}
