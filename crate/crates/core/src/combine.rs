//! Adaptive combination weights and cost-contribution removal.
//!
//! Each normal node `i` keeps, per neighbor `j ∈ N_i`, an exponential memory
//! `γ²_{j,i}` of the squared distance between the received intermediate
//! estimate and its own current estimate. Weights are proportional to
//! `γ⁻²`. Resilient kinds first drop the `F` neighbors with the largest
//! contribution `γ⁻⁴ Q`, where `Q` is the squared prediction error of the
//! neighbor's estimate on the node's next sample.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::adapt::Kernel;
use crate::error::{Error, Result};
use crate::signal::Sample;
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmKind {
    #[serde(rename = "NC-LMS")]
    NcLms,
    #[serde(rename = "DLMS")]
    Dlms,
    #[serde(rename = "NC-LMG")]
    NcLmg,
    #[serde(rename = "DLMG")]
    Dlmg,
    #[serde(rename = "RDLMS")]
    Rdlms,
    #[serde(rename = "RDLMG")]
    Rdlmg,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 6] = [
        AlgorithmKind::NcLms,
        AlgorithmKind::Dlms,
        AlgorithmKind::NcLmg,
        AlgorithmKind::Dlmg,
        AlgorithmKind::Rdlms,
        AlgorithmKind::Rdlmg,
    ];

    pub fn kernel(self) -> Kernel {
        match self {
            AlgorithmKind::NcLms | AlgorithmKind::Dlms | AlgorithmKind::Rdlms => Kernel::Lms,
            AlgorithmKind::NcLmg | AlgorithmKind::Dlmg | AlgorithmKind::Rdlmg => Kernel::Lmg,
        }
    }

    pub fn is_cooperative(self) -> bool {
        !matches!(self, AlgorithmKind::NcLms | AlgorithmKind::NcLmg)
    }

    pub fn is_resilient(self) -> bool {
        matches!(self, AlgorithmKind::Rdlms | AlgorithmKind::Rdlmg)
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::NcLms => "NC-LMS",
            AlgorithmKind::Dlms => "DLMS",
            AlgorithmKind::NcLmg => "NC-LMG",
            AlgorithmKind::Dlmg => "DLMG",
            AlgorithmKind::Rdlms => "RDLMS",
            AlgorithmKind::Rdlmg => "RDLMG",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_uppercase().replace('_', "-");
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::input(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombineParams {
    /// ν in `γ² ← (1-ν)γ² + ν‖ψ_j - w_i‖²`.
    pub forgetting: f64,
    /// ρ in `Q ← (1-ρ)·e² + ρ·Q`; zero uses the instantaneous squared error.
    pub q_smoothing: f64,
    /// F, the number of contributions discarded per node and iteration.
    pub removal_count: usize,
    pub gamma_init: f64,
    pub gamma_floor: f64,
}

impl Default for CombineParams {
    fn default() -> Self {
        Self {
            forgetting: 0.01,
            q_smoothing: 0.0,
            removal_count: 1,
            gamma_init: 1.0,
            gamma_floor: 1e-12,
        }
    }
}

impl CombineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::input(format!("forgetting factor must be in (0,1], got {}", self.forgetting)));
        }
        if !(0.0..1.0).contains(&self.q_smoothing) {
            return Err(Error::input(format!("q smoothing must be in [0,1), got {}", self.q_smoothing)));
        }
        if !(self.gamma_floor > 0.0 && self.gamma_init >= self.gamma_floor && self.gamma_init.is_finite()) {
            return Err(Error::input("gamma_init must be finite and at least gamma_floor > 0"));
        }
        Ok(())
    }
}

/// Combination memory of one node, indexed by position in `N_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCombine {
    pub node: NodeId,
    pub neighbors: Vec<NodeId>,
    pub gamma_sq: Vec<f64>,
    pub q: Vec<f64>,
    pub weights: Vec<f64>,
    pub removed: Vec<bool>,
}

impl LocalCombine {
    fn new(node: NodeId, neighbors: &[NodeId], gamma_init: f64) -> Self {
        let k = neighbors.len();
        Self {
            node,
            neighbors: neighbors.to_vec(),
            gamma_sq: vec![gamma_init; k],
            q: vec![0.0; k],
            weights: vec![1.0 / k as f64; k],
            removed: vec![false; k],
        }
    }

    fn slot(&self, j: NodeId) -> Result<usize> {
        self.neighbors
            .binary_search(&j)
            .map_err(|_| Error::contract(format!("node {j} is not a neighbor of {}", self.node)))
    }

    /// Survivor ids, ascending.
    pub fn survivors(&self) -> Vec<NodeId> {
        self.neighbors
            .iter()
            .zip(&self.weights)
            .zip(&self.removed)
            .filter(|((_, &a), &r)| !r && a > 0.0)
            .map(|((&j, _), _)| j)
            .collect()
    }

    pub fn removal_set(&self) -> BTreeSet<NodeId> {
        self.neighbors
            .iter()
            .zip(&self.removed)
            .filter(|(_, &r)| r)
            .map(|(&j, _)| j)
            .collect()
    }

    pub fn weight(&self, j: NodeId) -> f64 {
        self.slot(j).map_or(0.0, |s| self.weights[s])
    }

    /// One combination for this node.
    ///
    /// `messages[s]` is the intermediate estimate received from
    /// `neighbors[s]`, or `None` when that neighbor is silent this iteration.
    /// `next` is the node's next observation, used only when `resilient`.
    pub fn step(
        &mut self,
        params: &CombineParams,
        resilient: bool,
        messages: &[Option<&DVector<f64>>],
        w_i: &DVector<f64>,
        next: &[Sample],
        out: &mut DVector<f64>,
    ) -> Result<()> {
        let k = self.neighbors.len();
        debug_assert_eq!(messages.len(), k);
        let mut active: Vec<(usize, f64)> = Vec::with_capacity(k);
        for (s, msg) in messages.iter().enumerate() {
            self.removed[s] = false;
            let Some(psi) = msg else {
                continue;
            };
            let dist2 = squared_distance(psi, w_i);
            self.gamma_sq[s] = gamma_update(self.gamma_sq[s], dist2, params);
            let c = if resilient {
                let sq = mean_squared_error(next, psi);
                self.q[s] = (1.0 - params.q_smoothing) * sq + params.q_smoothing * self.q[s];
                contribution(self.gamma_sq[s], self.q[s])
            } else {
                0.0
            };
            active.push((s, c));
        }
        if active.is_empty() {
            return Err(Error::contract(format!("node {} received no messages", self.node)));
        }
        let f = if resilient { params.removal_count } else { 0 };
        for s in removal_slots(&active, f) {
            self.removed[s] = true;
        }
        let gmin = active
            .iter()
            .filter(|(s, _)| !self.removed[*s])
            .map(|&(s, _)| self.gamma_sq[s])
            .fold(f64::INFINITY, f64::min);
        self.weights.iter_mut().for_each(|a| *a = 0.0);
        let mut total = 0.0;
        for &(s, _) in &active {
            if !self.removed[s] {
                self.weights[s] = gmin / self.gamma_sq[s];
                total += self.weights[s];
            }
        }
        out.fill(0.0);
        for &(s, _) in &active {
            if !self.removed[s] {
                self.weights[s] /= total;
                out.axpy(self.weights[s], messages[s].expect("active slot has a message"), 1.0);
            }
        }
        Ok(())
    }
}

#[inline]
fn gamma_update(gamma_sq: f64, dist2: f64, params: &CombineParams) -> f64 {
    ((1.0 - params.forgetting) * gamma_sq + params.forgetting * dist2).max(params.gamma_floor)
}

#[inline]
fn squared_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn contribution(gamma_sq: f64, q: f64) -> f64 {
    q / (gamma_sq * gamma_sq)
}

/// Mean of `(d - uᵀψ)²` over the samples.
pub fn mean_squared_error(samples: &[Sample], psi: &DVector<f64>) -> f64 {
    let sum: f64 = samples
        .iter()
        .map(|s| {
            let e = s.d - s.u.dot(psi);
            e * e
        })
        .sum();
    sum / samples.len() as f64
}

/// Keys of the `min(F, n-1)` largest contributions; ties go to the lower key.
fn removal_slots(contributions: &[(usize, f64)], f: usize) -> Vec<usize> {
    let count = f.min(contributions.len().saturating_sub(1));
    if count == 0 {
        return Vec::new();
    }
    let mut order: Vec<(usize, f64)> = contributions.to_vec();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order.into_iter().take(count).map(|(s, _)| s).collect()
}

/// The `F` ids with the largest contribution, never emptying the set.
///
/// Ties are broken toward the lowest id. At most `n - 1` of `n` candidates are removed.
pub fn removal_set(contributions: &[(NodeId, f64)], f: usize) -> BTreeSet<NodeId> {
    removal_slots(contributions, f).into_iter().collect()
}

/// Convex combination `Σ a_j ψ_j`.
pub fn combine_step(weights: &[f64], psis: &[&DVector<f64>]) -> Result<DVector<f64>> {
    if weights.len() != psis.len() || psis.is_empty() {
        return Err(Error::input("weights and estimates must be non-empty and of equal count"));
    }
    let m = psis[0].len();
    if psis.iter().any(|p| p.len() != m) {
        return Err(Error::input("intermediate estimates differ in dimension"));
    }
    let mut out = DVector::zeros(m);
    for (a, p) in weights.iter().zip(psis) {
        out.axpy(*a, p, 1.0);
    }
    Ok(out)
}

/// Combination memory for the whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct CombineState {
    pub params: CombineParams,
    locals: Vec<LocalCombine>,
}

impl CombineState {
    pub fn new(topo: &Topology, params: CombineParams) -> Result<Self> {
        params.validate()?;
        let locals = (0..topo.num_nodes())
            .map(|i| LocalCombine::new(i, topo.neighborhood(i), params.gamma_init))
            .collect();
        Ok(Self { params, locals })
    }

    pub fn local(&self, i: NodeId) -> Result<&LocalCombine> {
        self.locals.get(i).ok_or_else(|| Error::input(format!("node {i} out of range")))
    }

    pub(crate) fn local_mut(&mut self, i: NodeId) -> &mut LocalCombine {
        &mut self.locals[i]
    }

    pub fn gamma_sq(&self, j: NodeId, i: NodeId) -> Result<f64> {
        let l = self.local(i)?;
        Ok(l.gamma_sq[l.slot(j)?])
    }

    pub fn set_gamma_sq(&mut self, j: NodeId, i: NodeId, value: f64) -> Result<()> {
        if !(value > 0.0) {
            return Err(Error::input("γ² must be positive"));
        }
        let l = self.locals.get_mut(i).ok_or_else(|| Error::input(format!("node {i} out of range")))?;
        let s = l.slot(j)?;
        l.gamma_sq[s] = value;
        Ok(())
    }

    /// Weight `a_{j,i}`; zero when `j ∉ N_i`.
    pub fn weight(&self, j: NodeId, i: NodeId) -> f64 {
        self.locals.get(i).map_or(0.0, |l| l.weight(j))
    }

    /// `γ²_{j,i} ← (1-ν)γ²_{j,i} + ν‖ψ_j - w_i‖²`, floored.
    pub fn update_gamma(&mut self, i: NodeId, j: NodeId, psi_j: &DVector<f64>, w_i: &DVector<f64>) -> Result<f64> {
        if psi_j.len() != w_i.len() {
            return Err(Error::input("dimension mismatch between ψ_j and w_i"));
        }
        let params = self.params;
        let l = self.locals.get_mut(i).ok_or_else(|| Error::input(format!("node {i} out of range")))?;
        let s = l.slot(j)?;
        l.gamma_sq[s] = gamma_update(l.gamma_sq[s], (psi_j - w_i).norm_squared(), &params);
        Ok(l.gamma_sq[s])
    }

    /// Refreshes the `Q` estimate from `(d_next, u_next)` and returns `γ⁻⁴ Q`.
    pub fn cost_contribution(
        &mut self,
        i: NodeId,
        j: NodeId,
        d_next: f64,
        u_next: &DVector<f64>,
        psi_j: &DVector<f64>,
    ) -> Result<f64> {
        if u_next.len() != psi_j.len() {
            return Err(Error::input("dimension mismatch between u and ψ_j"));
        }
        let rho = self.params.q_smoothing;
        let l = self.locals.get_mut(i).ok_or_else(|| Error::input(format!("node {i} out of range")))?;
        let s = l.slot(j)?;
        let e = d_next - u_next.dot(psi_j);
        l.q[s] = (1.0 - rho) * e * e + rho * l.q[s];
        Ok(contribution(l.gamma_sq[s], l.q[s]))
    }

    /// Weights `∝ γ⁻²` over `survivors`, stored and returned in ascending id order.
    pub fn combination_weights(&mut self, i: NodeId, survivors: &BTreeSet<NodeId>) -> Result<Vec<(NodeId, f64)>> {
        if survivors.is_empty() {
            return Err(Error::contract(format!("node {i} has an empty survivor set")));
        }
        let l = self.locals.get_mut(i).ok_or_else(|| Error::input(format!("node {i} out of range")))?;
        let slots = survivors.iter().map(|&j| l.slot(j)).collect::<Result<Vec<_>>>()?;
        let gmin = slots.iter().map(|&s| l.gamma_sq[s]).fold(f64::INFINITY, f64::min);
        let total: f64 = slots.iter().map(|&s| gmin / l.gamma_sq[s]).sum();
        l.weights.iter_mut().for_each(|a| *a = 0.0);
        for (s, r) in l.removed.iter_mut().enumerate() {
            *r = !slots.contains(&s);
        }
        Ok(slots
            .into_iter()
            .map(|s| {
                l.weights[s] = gmin / l.gamma_sq[s] / total;
                (l.neighbors[s], l.weights[s])
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn path3() -> Topology {
        Topology::new(3, [(0, 1), (1, 2)], &vec!["a".to_string(); 3], &[]).unwrap()
    }

    fn params(nu: f64) -> CombineParams {
        CombineParams {
            forgetting: nu,
            ..Default::default()
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for k in AlgorithmKind::ALL {
            assert_eq!(k.name().parse::<AlgorithmKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(serde_json::from_str::<AlgorithmKind>(&json).unwrap(), k);
        }
        assert_eq!("rdlmg".parse::<AlgorithmKind>().unwrap(), AlgorithmKind::Rdlmg);
        assert_eq!("nc_lms".parse::<AlgorithmKind>().unwrap(), AlgorithmKind::NcLms);
    }

    #[test]
    fn gamma_update_cases() {
        let mut st = CombineState::new(&path3(), params(1.0)).unwrap();
        let w = v(&[0.3, 0.4]);
        assert_eq!(st.update_gamma(1, 0, &w, &w).unwrap(), 1e-12);

        let mut st = CombineState::new(&path3(), params(0.01)).unwrap();
        let g = st.update_gamma(1, 0, &v(&[2.0, 0.0]), &v(&[0.0, 0.0])).unwrap();
        assert!((g - 1.03).abs() < 1e-15);
        assert!(st.update_gamma(0, 2, &w, &w).is_err());

        let mut st = CombineState::new(&path3(), params(0.05)).unwrap();
        let mut g = 0.0;
        for _ in 0..2000 {
            g = st.update_gamma(1, 2, &v(&[0.0, 0.5]), &v(&[0.0, 0.0])).unwrap();
        }
        assert!((g - 0.25).abs() < 1e-12);
    }

    #[test]
    fn contribution_cases() {
        let mut st = CombineState::new(&path3(), CombineParams::default()).unwrap();
        let psi = v(&[0.1, 0.2]);
        let u = v(&[1.0, 2.0]);
        assert_eq!(st.cost_contribution(1, 0, u.dot(&psi), &u, &psi).unwrap(), 0.0);
        assert_eq!(st.cost_contribution(1, 0, u.dot(&psi) + 2.0, &u, &psi).unwrap(), 4.0);
        st.set_gamma_sq(0, 1, 0.5).unwrap();
        assert!((st.cost_contribution(1, 0, u.dot(&psi) + 1.0, &u, &psi).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn smoothed_contribution() {
        let topo = Topology::new(2, [(0, 1)], &vec!["a".to_string(); 2], &[]).unwrap();
        let mut st = CombineState::new(
            &topo,
            CombineParams {
                q_smoothing: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        let psi = v(&[0.0]);
        let u = v(&[1.0]);
        assert_eq!(st.cost_contribution(0, 1, 2.0, &u, &psi).unwrap(), 2.0);
        assert_eq!(st.cost_contribution(0, 1, 0.0, &u, &psi).unwrap(), 1.0);
    }

    #[test]
    fn removal_cases() {
        assert!(removal_set(&[(1, 0.2), (2, 5.0)], 0).is_empty());
        assert_eq!(removal_set(&[(1, 0.2), (2, 5.0), (3, 0.1)], 1), BTreeSet::from([2]));
        assert_eq!(removal_set(&[(2, 5.0), (1, 5.0)], 1), BTreeSet::from([1]));
        assert_eq!(removal_set(&[(4, 1.0)], 3), BTreeSet::new());
        assert_eq!(removal_set(&[(1, 1.0), (2, 3.0), (3, 2.0)], 5), BTreeSet::from([2, 3]));
    }

    #[test]
    fn exhaustive_tie_breaks() {
        // All contributions in {0,1}: the removed ids are the lowest ids among the maxima first.
        for mask in 0u32..(1 << 5) {
            let c: Vec<(NodeId, f64)> = (0..5).map(|j| (j, ((mask >> j) & 1) as f64)).collect();
            for f in 0..6 {
                let got = removal_set(&c, f);
                let mut expect: Vec<NodeId> = (0..5).filter(|j| (mask >> j) & 1 == 1).collect();
                expect.extend((0..5).filter(|j| (mask >> j) & 1 == 0));
                let expect: BTreeSet<_> = expect.into_iter().take(f.min(4)).collect();
                assert_eq!(got, expect, "mask={mask:b} f={f}");
            }
        }
    }

    #[test]
    fn weight_cases() {
        let mut st = CombineState::new(&path3(), CombineParams::default()).unwrap();
        let w = st.combination_weights(1, &BTreeSet::from([0, 1, 2])).unwrap();
        assert!(w.iter().all(|&(_, a)| (a - 1.0 / 3.0).abs() < 1e-15));

        st.set_gamma_sq(0, 1, 1.0).unwrap();
        st.set_gamma_sq(1, 1, 4.0).unwrap();
        let w = st.combination_weights(1, &BTreeSet::from([0, 1])).unwrap();
        assert!((w[0].1 - 0.8).abs() < 1e-15 && (w[1].1 - 0.2).abs() < 1e-15);
        assert_eq!(st.weight(2, 1), 0.0);
        assert_eq!(st.local(1).unwrap().removal_set(), BTreeSet::from([2]));

        assert_eq!(st.combination_weights(1, &BTreeSet::from([2])).unwrap(), vec![(2, 1.0)]);
        assert!(matches!(st.combination_weights(1, &BTreeSet::new()), Err(Error::Contract(_))));
    }

    #[test]
    fn combine_cases() {
        let a = v(&[0.0, 0.0]);
        let b = v(&[1.0, 1.0]);
        assert_eq!(combine_step(&[1.0], &[&b]).unwrap(), b);
        assert_eq!(combine_step(&[0.5, 0.5], &[&a, &b]).unwrap(), v(&[0.5, 0.5]));
        assert!(combine_step(&[0.5, 0.5], &[&a, &v(&[1.0])]).is_err());
    }

    #[test]
    fn local_step_removes_the_outlier() {
        let topo = path3();
        let mut st = CombineState::new(&topo, CombineParams::default()).unwrap();
        let w1 = v(&[0.0]);
        let good = v(&[0.01]);
        let bad = v(&[5.0]);
        let next = vec![Sample { d: 0.0, u: v(&[1.0]) }];
        let mut out = v(&[0.0]);
        let params = st.params;
        st.local_mut(1)
            .step(&params, true, &[Some(&good), Some(&w1), Some(&bad)], &w1, &next, &mut out)
            .unwrap();
        let l = st.local(1).unwrap();
        let sum: f64 = l.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(l.removal_set().len(), 1);
        assert!(l.weights.iter().all(|&a| a >= 0.0));
    }

    proptest! {
        #[test]
        fn combination_is_convex(ws in proptest::collection::vec(0.0f64..1.0, 1..6),
                                 xs in proptest::collection::vec(-10.0f64..10.0, 6)) {
            let total: f64 = ws.iter().sum();
            prop_assume!(total > 1e-6);
            let a: Vec<f64> = ws.iter().map(|w| w / total).collect();
            let psis: Vec<DVector<f64>> = xs.iter().take(a.len()).map(|&x| v(&[x, -x])).collect();
            let refs: Vec<&DVector<f64>> = psis.iter().collect();
            let c = combine_step(&a, &refs).unwrap();
            let lo = xs.iter().take(a.len()).cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().take(a.len()).cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(c[0] >= lo - 1e-12 && c[0] <= hi + 1e-12);
        }

        #[test]
        fn removal_never_empties(cs in proptest::collection::vec(0.0f64..10.0, 1..8), f in 0usize..10) {
            let c: Vec<(NodeId, f64)> = cs.iter().cloned().enumerate().collect();
            let r = removal_set(&c, f);
            prop_assert_eq!(r.len(), f.min(c.len() - 1));
            let kept_max = c.iter().filter(|(j, _)| !r.contains(j)).map(|&(_, x)| x).fold(f64::NEG_INFINITY, f64::max);
            for j in &r {
                prop_assert!(c[*j].1 >= kept_max);
            }
        }

        #[test]
        fn local_weights_stay_on_simplex(
            xs in proptest::collection::vec(-5.0f64..5.0, 3),
            gs in proptest::collection::vec(1e-6f64..10.0, 3),
            resilient in any::<bool>(),
            f in 0usize..4,
        ) {
            let topo = path3();
            let mut st = CombineState::new(&topo, CombineParams { removal_count: f, ..Default::default() }).unwrap();
            for (j, g) in gs.iter().enumerate() {
                st.set_gamma_sq(j, 1, *g).unwrap();
            }
            let psis: Vec<DVector<f64>> = xs.iter().map(|&x| v(&[x])).collect();
            let msgs: Vec<Option<&DVector<f64>>> = psis.iter().map(Some).collect();
            let mut out = v(&[0.0]);
            let params = st.params;
            st.local_mut(1).step(&params, resilient, &msgs, &psis[1], &[Sample { d: 0.3, u: v(&[1.0]) }], &mut out).unwrap();
            let l = st.local(1).unwrap();
            prop_assert!(l.weights.iter().all(|&a| a >= 0.0));
            prop_assert!((l.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let expect_removed = if resilient { f.min(2) } else { 0 };
            prop_assert_eq!(l.removal_set().len(), expect_removed);
        }
    }
}
