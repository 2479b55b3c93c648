//! One Monte-Carlo run of adapt-then-combine diffusion.
//!
//! Every iteration is synchronous. All normal nodes adapt on their current
//! observation first, and then every normal node combines the intermediate
//! estimates it receives. Byzantine nodes hold no state; they answer each
//! normal neighbor with a message fabricated from that neighbor's estimate.
//! Each node always keeps one observation of lookahead so the resilient
//! kinds can score neighbors on the next sample without perturbing the
//! random streams of the other kinds.

use nalgebra::DVector;

use crate::adapt::{AdaptParams, NodeEstimate};
use crate::attack::{step_toward, AttackSpec};
use crate::combine::{AlgorithmKind, CombineParams, CombineState};
use crate::error::{Error, Result};
use crate::scenarios::{block_adapt_into, BlockMode};
use crate::signal::{Channel, Observation, RegressorState, RngStream};
use crate::topology::{NodeId, Topology};

/// Random streams and generator state owned by one node within one run.
#[derive(Debug, Clone)]
pub struct NodeGenerator {
    pub regressor: RngStream,
    pub noise: RngStream,
    pub regressor_state: RegressorState,
}

impl NodeGenerator {
    pub fn new(seed: u64, run: u32, node: NodeId) -> Self {
        Self {
            regressor: RngStream::new(seed, run, node, Channel::Regressor),
            noise: RngStream::new(seed, run, node, Channel::Noise),
            regressor_state: RegressorState::default(),
        }
    }
}

/// Produces per-node measurements for the diffusion loop.
pub trait DataSource: Send + Sync {
    fn dimension(&self) -> usize;

    /// The state node `i` should estimate.
    fn ideal_state(&self, i: NodeId) -> &DVector<f64>;

    /// Draws node `i`'s observation for one iteration.
    fn observe(&self, i: NodeId, gen: &mut NodeGenerator) -> Result<Observation>;
}

/// Static description of a run, shared by all runs of an experiment.
#[derive(Clone, Copy)]
pub struct RunSetup<'a> {
    pub topology: &'a Topology,
    pub source: &'a dyn DataSource,
    pub kind: AlgorithmKind,
    /// One entry per node; the kernel is taken from `kind`.
    pub adapt: &'a [AdaptParams],
    pub combine: CombineParams,
    pub block_mode: BlockMode,
    pub attack: Option<&'a AttackSpec>,
    pub initial: &'a DVector<f64>,
    pub divergence_threshold: f64,
}

/// Mutable world for one run.
pub struct Network<'a> {
    setup: RunSetup<'a>,
    combine: CombineState,
    estimates: Vec<NodeEstimate>,
    generators: Vec<NodeGenerator>,
    current: Vec<Observation>,
    next: Vec<Observation>,
    // attack_plan[i][s]: malicious state and step when neighbors[s] of i is a Byzantine node targeting i.
    attack_plan: Vec<Vec<Option<(DVector<f64>, f64)>>>,
    scratch: Vec<DVector<f64>>,
    iteration: usize,
}

impl<'a> Network<'a> {
    pub fn new(setup: RunSetup<'a>, seed: u64, run: u32) -> Result<Self> {
        let topo = setup.topology;
        let n = topo.num_nodes();
        let m = setup.source.dimension();
        if setup.adapt.len() != n {
            return Err(Error::input(format!("{} adaptation parameter sets for {n} nodes", setup.adapt.len())));
        }
        if setup.initial.len() != m {
            return Err(Error::input("initial estimate has the wrong dimension"));
        }
        let mut combine = CombineState::new(topo, setup.combine)?;
        if !setup.kind.is_cooperative() {
            for i in 0..n {
                let local = combine.local_mut(i);
                for (s, &j) in local.neighbors.iter().enumerate() {
                    local.weights[s] = if j == i { 1.0 } else { 0.0 };
                }
            }
        }
        let mut generators: Vec<NodeGenerator> = (0..n).map(|i| NodeGenerator::new(seed, run, i)).collect();
        let mut current = vec![Vec::new(); n];
        let mut next = vec![Vec::new(); n];
        for i in topo.normal_nodes() {
            current[i] = setup.source.observe(i, &mut generators[i])?;
            next[i] = setup.source.observe(i, &mut generators[i])?;
        }
        let attack_plan = (0..n)
            .map(|i| {
                topo.neighborhood(i)
                    .iter()
                    .map(|&j| {
                        let spec = setup.attack?;
                        if topo.is_byzantine(i) || !topo.is_byzantine(j) {
                            return None;
                        }
                        Some((spec.target_state(j, i, m)?, spec.step(j)?))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            combine,
            estimates: vec![NodeEstimate::new(setup.initial.clone()); n],
            generators,
            current,
            next,
            attack_plan,
            scratch: vec![DVector::zeros(m); n],
            iteration: 0,
            setup,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn topology(&self) -> &Topology {
        self.setup.topology
    }

    pub fn estimate(&self, i: NodeId) -> &NodeEstimate {
        &self.estimates[i]
    }

    pub fn estimates(&self) -> &[NodeEstimate] {
        &self.estimates
    }

    pub fn combine_state(&self) -> &CombineState {
        &self.combine
    }

    /// Advances one synchronous iteration.
    pub fn run_iteration(&mut self) -> Result<()> {
        let topo = self.setup.topology;
        let kind = self.setup.kind;
        let n = topo.num_nodes();
        let it = self.iteration;
        let divergence = |node| Error::Divergence { node, iteration: it + 1 };

        for i in 0..n {
            if topo.is_byzantine(i) {
                continue;
            }
            let mut params = self.setup.adapt[i];
            params.kernel = kind.kernel();
            let est = &mut self.estimates[i];
            block_adapt_into(&est.w, &params, &self.current[i], self.setup.block_mode, &mut est.psi)
                .map_err(|e| match e {
                    Error::NonFinite => divergence(i),
                    other => other,
                })?;
        }

        let attacking = self.setup.attack.is_some_and(|a| a.is_active(it));
        for i in 0..n {
            if topo.is_byzantine(i) {
                continue;
            }
            if !kind.is_cooperative() {
                self.scratch[i].copy_from(&self.estimates[i].psi);
                continue;
            }
            let w_i = &self.estimates[i].w;
            let neighbors = topo.neighborhood(i);
            let fabricated: Vec<Option<DVector<f64>>> = self.attack_plan[i]
                .iter()
                .map(|plan| match plan {
                    Some((target, step)) if attacking => Some(step_toward(w_i, target, *step)),
                    _ => None,
                })
                .collect();
            let messages: Vec<Option<&DVector<f64>>> = neighbors
                .iter()
                .zip(&fabricated)
                .map(|(&j, fab)| if topo.is_byzantine(j) { fab.as_ref() } else { Some(&self.estimates[j].psi) })
                .collect();
            let params = self.combine.params;
            self.combine.local_mut(i).step(
                &params,
                kind.is_resilient(),
                &messages,
                w_i,
                &self.next[i],
                &mut self.scratch[i],
            )?;
        }

        for i in 0..n {
            if topo.is_byzantine(i) {
                continue;
            }
            let w = &mut self.estimates[i].w;
            std::mem::swap(w, &mut self.scratch[i]);
            let norm = w.norm();
            if !norm.is_finite() || norm > self.setup.divergence_threshold {
                return Err(divergence(i));
            }
        }

        for i in topo.normal_nodes() {
            std::mem::swap(&mut self.current[i], &mut self.next[i]);
            self.next[i] = self.setup.source.observe(i, &mut self.generators[i])?;
        }
        self.iteration += 1;
        Ok(())
    }
}
