//! Gradient-based Byzantine attack.
//!
//! A Byzantine node `k` sends each normal neighbor `i` the message
//! `w_i - μᵃ (w_i - wᵃ_i)`. The message always sits close to the receiver's own
//! estimate, so distance-based weights favor it, while it pulls the receiver
//! toward `wᵃ_i` by a fraction `μᵃ` per iteration.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// Malicious state for one Byzantine node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaliciousState {
    /// The same vector for every target.
    Shared(Vec<f64>),
    /// A constant vector `fill · 𝟙`.
    Fill { fill: f64 },
    /// A vector per targeted node; untargeted neighbors are left alone.
    PerTarget(BTreeMap<NodeId, Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByzantineAttack {
    pub step: f64,
    pub state: MaliciousState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub nodes: BTreeMap<NodeId, ByzantineAttack>,
    #[serde(default)]
    pub start_iteration: usize,
}

impl AttackSpec {
    pub fn shared(nodes: impl IntoIterator<Item = NodeId>, step: f64, state: &[f64]) -> Self {
        Self {
            nodes: nodes
                .into_iter()
                .map(|k| {
                    (
                        k,
                        ByzantineAttack {
                            step,
                            state: MaliciousState::Shared(state.to_vec()),
                        },
                    )
                })
                .collect(),
            start_iteration: 0,
        }
    }

    pub fn validate(&self, topo: &Topology, dimension: usize) -> Result<()> {
        for (&k, atk) in &self.nodes {
            if k >= topo.num_nodes() || !topo.is_byzantine(k) {
                return Err(Error::config(format!("attack.nodes.{k}: not a Byzantine node")));
            }
            if !(atk.step > 0.0 && atk.step <= 1.0) {
                return Err(Error::config(format!("attack.nodes.{k}.step must be in (0,1], got {}", atk.step)));
            }
            let check = |v: &[f64]| {
                if v.len() == dimension {
                    Ok(())
                } else {
                    Err(Error::config(format!(
                        "attack.nodes.{k}.state has length {}, expected {dimension}",
                        v.len()
                    )))
                }
            };
            match &atk.state {
                MaliciousState::Shared(v) => check(v)?,
                MaliciousState::Fill { fill } if !fill.is_finite() => {
                    return Err(Error::config(format!("attack.nodes.{k}.state.fill must be finite")));
                }
                MaliciousState::Fill { .. } => {}
                MaliciousState::PerTarget(map) => {
                    for (&i, v) in map {
                        if !topo.is_neighbor(k, i) || topo.is_byzantine(i) {
                            return Err(Error::config(format!(
                                "attack.nodes.{k}.state.{i}: not a normal neighbor"
                            )));
                        }
                        check(v)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_active(&self, iteration: usize) -> bool {
        iteration >= self.start_iteration
    }

    /// Malicious state aimed at target `i` by node `k`, if `k` targets `i`.
    pub fn target_state(&self, k: NodeId, i: NodeId, dimension: usize) -> Option<DVector<f64>> {
        match &self.nodes.get(&k)?.state {
            MaliciousState::Shared(v) => Some(DVector::from_column_slice(v)),
            MaliciousState::Fill { fill } => Some(DVector::from_element(dimension, *fill)),
            MaliciousState::PerTarget(map) => map.get(&i).map(|v| DVector::from_column_slice(v)),
        }
    }

    pub fn step(&self, k: NodeId) -> Option<f64> {
        self.nodes.get(&k).map(|a| a.step)
    }
}

/// `w_i - μᵃ (w_i - wᵃ_i)` from Byzantine node `k` to its neighbor `i`.
pub fn fabricate_message(
    spec: &AttackSpec,
    topo: &Topology,
    k: NodeId,
    i: NodeId,
    w_i: &DVector<f64>,
) -> Result<DVector<f64>> {
    if i >= topo.num_nodes() || k >= topo.num_nodes() || !topo.is_neighbor(k, i) || k == i || topo.is_byzantine(i) {
        return Err(Error::contract(format!("node {i} is not a normal neighbor of {k}")));
    }
    let step = spec
        .step(k)
        .ok_or_else(|| Error::contract(format!("node {k} has no attack configured")))?;
    let target = spec
        .target_state(k, i, w_i.len())
        .ok_or_else(|| Error::contract(format!("node {k} does not target {i}")))?;
    if target.len() != w_i.len() {
        return Err(Error::input("malicious state and estimate differ in dimension"));
    }
    Ok(step_toward(w_i, &target, step))
}

#[inline]
pub(crate) fn step_toward(w: &DVector<f64>, target: &DVector<f64>, step: f64) -> DVector<f64> {
    if step == 1.0 {
        return target.clone();
    }
    w - (w - target) * step
}

/// Smallest `n` with `(1 - μᵃ)ⁿ ≤ ε`.
pub fn predicted_capture_time(step: f64, epsilon: f64) -> Result<u64> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::input(format!("attack step must be in (0,1], got {step}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::input(format!("epsilon must be positive, got {epsilon}")));
    }
    if epsilon >= 1.0 {
        return Ok(0);
    }
    if step == 1.0 {
        return Ok(1);
    }
    let r = 1.0 - step;
    let mut n = (epsilon.ln() / r.ln()).ceil().max(0.0) as u64;
    while r.powf(n as f64) > epsilon {
        n += 1;
    }
    while n > 0 && r.powf((n - 1) as f64) <= epsilon {
        n -= 1;
    }
    Ok(n)
}
