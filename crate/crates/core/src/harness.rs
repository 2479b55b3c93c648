//! Experiment configuration, Monte-Carlo execution, metrics and output files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapt::{AdaptParams, Kernel};
use crate::attack::AttackSpec;
use crate::combine::{AlgorithmKind, CombineParams};
use crate::diffusion::{DataSource, Network, RunSetup};
use crate::error::{Error, Result};
use crate::scenarios::{BlockMode, ChannelModel, GenericLinear, Localization, Sensing};
use crate::signal::{Channel, NoiseModel, RegressorModel, RegressorStyle, RngStream};
use crate::theory::{self, NodeTheory, TheoryInputs, TheoryReport};
use crate::topology::{load_topology, IdealStates, Layout, NodeId, Topology, TopologyDocument};

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    1e6
}

fn default_lambda() -> f64 {
    1.0
}

fn default_spacing() -> f64 {
    1.0
}

fn default_attempts() -> usize {
    1000
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySource,
    pub scenario: ScenarioConfig,
    pub algorithm: AlgorithmKind,
    pub adapt: AdaptConfig,
    #[serde(default)]
    pub combine: CombineParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSpec>,
    /// Common starting estimate `w_i(0)`; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_estimate: Option<Vec<f64>>,
    pub iterations: usize,
    pub runs: usize,
    pub seed: u64,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default = "default_threshold")]
    pub divergence_threshold: f64,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySource {
    File(PathBuf),
    Inline(TopologyDocument),
    Grid(GridSpec),
    RandomGeometric(GeometricSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default)]
    pub origin: [f64; 2],
    /// Connect the eight surrounding cells rather than four.
    #[serde(default)]
    pub diagonal: bool,
    pub clusters: ClusterRule,
    #[serde(default)]
    pub byzantine: Vec<NodeId>,
    #[serde(default)]
    pub ideal_states: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricSpec {
    pub nodes: usize,
    #[serde(default = "default_spacing")]
    pub side: f64,
    pub radius: f64,
    pub seed: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    pub clusters: ClusterRule,
    #[serde(default)]
    pub byzantine: Vec<NodeId>,
    #[serde(default)]
    pub ideal_states: BTreeMap<String, Vec<f64>>,
}

/// How generated layouts are split into clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ClusterRule {
    Explicit(Vec<String>),
    /// `below` when `normal · p < offset`, `above` otherwise.
    HalfPlane {
        normal: [f64; 2],
        offset: f64,
        below: String,
        above: String,
    },
}

impl ClusterRule {
    fn labels(&self, positions: &[[f64; 2]]) -> Result<Vec<String>> {
        match self {
            ClusterRule::Explicit(v) if v.len() == positions.len() => Ok(v.clone()),
            ClusterRule::Explicit(v) => Err(Error::config(format!(
                "topology.clusters lists {} labels for {} nodes",
                v.len(),
                positions.len()
            ))),
            ClusterRule::HalfPlane { normal, offset, below, above } => Ok(positions
                .iter()
                .map(|p| {
                    if normal[0] * p[0] + normal[1] * p[1] < *offset {
                        below.clone()
                    } else {
                        above.clone()
                    }
                })
                .collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    GenericLinear {
        #[serde(default)]
        regressor_variance: VarianceSpec,
        #[serde(default)]
        style: RegressorStyle,
        noise: NoiseSpec,
    },
    Localization {
        /// Overrides the positions of a generated layout; required for file or inline topologies.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        positions: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        regressor_variance: VarianceSpec,
        noise: NoiseSpec,
    },
    Sensing(SensingConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    pub num_basis: usize,
    pub num_freqs: usize,
    /// Cluster label to the indices of its active basis functions.
    pub active_bases: BTreeMap<String, Vec<usize>>,
    pub power: f64,
    pub receiver_noise: f64,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default = "default_true")]
    pub background: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impulses: Option<NoiseModel>,
}

/// Regressor power per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarianceSpec {
    Constant(f64),
    PerNode(Vec<f64>),
    /// Independent uniform draws, fixed by the experiment seed.
    Uniform { uniform: [f64; 2] },
}

impl Default for VarianceSpec {
    fn default() -> Self {
        VarianceSpec::Constant(1.0)
    }
}

impl VarianceSpec {
    fn resolve(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        match self {
            VarianceSpec::Constant(v) => Ok(vec![*v; n]),
            VarianceSpec::PerNode(v) if v.len() == n => Ok(v.clone()),
            VarianceSpec::PerNode(v) => Err(Error::config(format!(
                "scenario.regressor_variance lists {} values for {n} nodes",
                v.len()
            ))),
            VarianceSpec::Uniform { uniform: [lo, hi] } => {
                if !(0.0 < *lo && lo <= hi) {
                    return Err(Error::config("scenario.regressor_variance.uniform needs 0 < lo <= hi"));
                }
                let mut rng = RngStream::new(seed, 0, 0, Channel::Setup);
                Ok((0..n)
                    .map(|_| lo + (hi - lo) * rand::Rng::random::<f64>(&mut rng))
                    .collect())
            }
        }
    }
}

/// Observation noise: one model for all nodes, one per node, or a target SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Model(NoiseModel),
    PerNode(Vec<NoiseModel>),
    Snr(SnrNoise),
}

/// Background variance from a network-wide SNR, optionally with CG impulses.
///
/// The signal power is the mean over normal nodes of `σ_u,i² ‖s_i‖²`, where
/// `s_i` is the ideal state (generic) or the offset from the node to its
/// target (localization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrNoise {
    pub snr_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impulse_probability: Option<f64>,
    /// `σ_g² / σ_v²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impulse_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode<T> {
    Shared(T),
    Nodes(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptConfig {
    pub step_size: PerNode<f64>,
    #[serde(default = "default_lambda")]
    pub gm_lambda: f64,
    #[serde(default)]
    pub block_mode: BlockMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Record metrics every this many iterations (plus iteration 0 and the last).
    pub msd_every: usize,
    /// Weight above which an edge counts as alive for subnetwork partitions.
    pub edge_threshold: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            msd_every: 1,
            edge_threshold: 1e-3,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config; a relative topology file path is taken relative to the config.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let TopologySource::File(p) = &mut cfg.topology {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

/// A validated experiment with every implicit choice made explicit.
pub struct Experiment {
    /// Self-contained config: topology inline, noise and variances per node.
    pub config: ExperimentConfig,
    pub topology: Topology,
    pub source: Box<dyn DataSource>,
    pub adapt: Vec<AdaptParams>,
    pub regressor_variances: Vec<f64>,
    /// Per-node noise models; empty for the sensing scenario.
    pub noise: Vec<NoiseModel>,
    pub initial: DVector<f64>,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment").field("config", &self.config).finish_non_exhaustive()
    }
}

struct Resolved {
    topology: Topology,
    ideal: Option<IdealStates>,
    positions: Option<Vec<[f64; 2]>>,
}

fn resolve_topology(src: &TopologySource) -> Result<Resolved> {
    let from_layout = |layout: Layout, rule: &ClusterRule, byz: &[NodeId], ideal: &BTreeMap<String, Vec<f64>>| {
        let labels = rule.labels(&layout.positions)?;
        let topo = layout.into_topology(&labels, byz)?;
        let mut doc = topo.to_document(None);
        doc.ideal_states = ideal.clone();
        let (topology, ideal) = load_topology(&doc)?;
        Ok::<_, Error>(Resolved {
            topology,
            ideal,
            positions: Some(layout.positions),
        })
    };
    match src {
        TopologySource::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let doc: TopologyDocument = serde_json::from_str(&text)?;
            let (topology, ideal) = load_topology(&doc)?;
            Ok(Resolved {
                topology,
                ideal,
                positions: None,
            })
        }
        TopologySource::Inline(doc) => {
            let (topology, ideal) = load_topology(doc)?;
            Ok(Resolved {
                topology,
                ideal,
                positions: None,
            })
        }
        TopologySource::Grid(g) => from_layout(
            Layout::grid(g.rows, g.cols, g.spacing, g.origin, g.diagonal),
            &g.clusters,
            &g.byzantine,
            &g.ideal_states,
        ),
        TopologySource::RandomGeometric(g) => from_layout(
            Layout::random_geometric(g.nodes, g.side, g.radius, g.seed, g.max_attempts)?,
            &g.clusters,
            &g.byzantine,
            &g.ideal_states,
        ),
    }
}

fn resolve_noise(spec: &NoiseSpec, topo: &Topology, signal: impl Fn(NodeId) -> f64) -> Result<Vec<NoiseModel>> {
    let n = topo.num_nodes();
    let models = match spec {
        NoiseSpec::Model(m) => vec![*m; n],
        NoiseSpec::PerNode(v) if v.len() == n => v.clone(),
        NoiseSpec::PerNode(v) => {
            return Err(Error::config(format!("scenario.noise lists {} models for {n} nodes", v.len())));
        }
        NoiseSpec::Snr(s) => {
            let normal = topo.normal_nodes();
            let power = normal.iter().map(|&i| signal(i)).sum::<f64>() / normal.len() as f64;
            if !(power > 0.0 && power.is_finite()) {
                return Err(Error::config("scenario.noise.snr_db needs a nonzero signal power"));
            }
            let sigma_v2 = power * 10f64.powf(-s.snr_db / 10.0);
            let model = match (s.impulse_probability, s.impulse_ratio) {
                (None, None) => NoiseModel::Gaussian { variance: sigma_v2 },
                (Some(p), Some(r)) => NoiseModel::ContaminatedGaussian {
                    sigma_v2,
                    sigma_g2: r * sigma_v2,
                    p,
                },
                _ => {
                    return Err(Error::config(
                        "scenario.noise needs both impulse_probability and impulse_ratio, or neither",
                    ))
                }
            };
            vec![model; n]
        }
    };
    for (i, m) in models.iter().enumerate() {
        m.validate()
            .map_err(|e| Error::config(format!("scenario.noise for node {i}: {e}")))?;
    }
    Ok(models)
}

impl Experiment {
    pub fn from_config(cfg: ExperimentConfig) -> Result<Self> {
        if cfg.runs == 0 {
            return Err(Error::config("runs must be at least 1"));
        }
        if cfg.trace.msd_every == 0 {
            return Err(Error::config("trace.msd_every must be at least 1"));
        }
        if !(cfg.divergence_threshold > 0.0) {
            return Err(Error::config("divergence_threshold must be positive"));
        }
        cfg.combine.validate().map_err(|e| Error::config(format!("combine: {e}")))?;
        let Resolved {
            topology,
            ideal,
            positions,
        } = resolve_topology(&cfg.topology)?;
        let n = topology.num_nodes();
        let mut resolved = cfg.clone();
        let doc = topology.to_document(ideal.as_ref());

        let (source, dimension, variances, noise): (Box<dyn DataSource>, usize, Vec<f64>, Vec<NoiseModel>) =
            match &cfg.scenario {
                ScenarioConfig::GenericLinear {
                    regressor_variance,
                    style,
                    noise,
                } => {
                    let ideal = ideal.ok_or_else(|| Error::config("topology.ideal_states is required"))?;
                    let per_node = ideal.per_node(&topology)?;
                    let variances = regressor_variance.resolve(n, cfg.seed)?;
                    let noise = resolve_noise(noise, &topology, |i| variances[i] * per_node[i].norm_squared())?;
                    let m = ideal.dimension();
                    let regressor = RegressorModel::new(m, variances.clone(), *style)?;
                    resolved.scenario = ScenarioConfig::GenericLinear {
                        regressor_variance: VarianceSpec::PerNode(variances.clone()),
                        style: *style,
                        noise: NoiseSpec::PerNode(noise.clone()),
                    };
                    (Box::new(GenericLinear::new(per_node, regressor, noise.clone())?), m, variances, noise)
                }
                ScenarioConfig::Localization {
                    positions: explicit,
                    regressor_variance,
                    noise,
                } => {
                    let ideal = ideal.ok_or_else(|| Error::config("topology.ideal_states is required"))?;
                    if ideal.dimension() != 2 {
                        return Err(Error::config("localization targets must be planar"));
                    }
                    let pos = explicit
                        .clone()
                        .or(positions)
                        .ok_or_else(|| Error::config("scenario.positions is required for this topology source"))?;
                    if pos.len() != n {
                        return Err(Error::config(format!("scenario.positions lists {} nodes, expected {n}", pos.len())));
                    }
                    let targets = ideal.per_node(&topology)?;
                    let variances = regressor_variance.resolve(n, cfg.seed)?;
                    let noise = resolve_noise(noise, &topology, |i| {
                        let dx = targets[i][0] - pos[i][0];
                        let dy = targets[i][1] - pos[i][1];
                        variances[i] * (dx * dx + dy * dy)
                    })?;
                    let regressor = RegressorModel::new(2, variances.clone(), RegressorStyle::Iid)?;
                    resolved.scenario = ScenarioConfig::Localization {
                        positions: Some(pos.clone()),
                        regressor_variance: VarianceSpec::PerNode(variances.clone()),
                        noise: NoiseSpec::PerNode(noise.clone()),
                    };
                    (Box::new(Localization::new(pos, targets, regressor, noise.clone())?), 2, variances, noise)
                }
                ScenarioConfig::Sensing(s) => {
                    if ideal.is_some() {
                        return Err(Error::config(
                            "sensing derives ideal states from active_bases; remove topology.ideal_states",
                        ));
                    }
                    let mut states = BTreeMap::new();
                    for (label, bases) in &s.active_bases {
                        let mut w = DVector::zeros(s.num_basis);
                        for &m in bases {
                            if m >= s.num_basis {
                                return Err(Error::config(format!(
                                    "scenario.active_bases.{label}: basis {m} out of range"
                                )));
                            }
                            w[m] = s.power;
                        }
                        states.insert(label.clone(), w);
                    }
                    let ideal = IdealStates::new(states).map_err(|e| Error::config(e.to_string()))?;
                    let per_node = ideal.per_node(&topology)?;
                    let gains = match s.channel {
                        ChannelModel::Flat => Sensing::flat_gains(n, s.num_freqs),
                        ChannelModel::LogNormal { sigma_db } => {
                            let mut rng = RngStream::new(cfg.seed, 0, 0, Channel::Gain);
                            Sensing::log_normal_gains(n, s.num_freqs, sigma_db, &mut rng)
                        }
                    };
                    let src = Sensing::new(
                        s.num_basis,
                        s.num_freqs,
                        per_node,
                        gains,
                        s.receiver_noise,
                        s.background,
                        s.impulses,
                    )?;
                    (Box::new(src), s.num_basis, Vec::new(), Vec::new())
                }
            };
        resolved.topology = TopologySource::Inline(doc);

        let steps = match &cfg.adapt.step_size {
            PerNode::Shared(mu) => vec![*mu; n],
            PerNode::Nodes(v) if v.len() == n => v.clone(),
            PerNode::Nodes(v) => {
                return Err(Error::config(format!("adapt.step_size lists {} values for {n} nodes", v.len())));
            }
        };
        let adapt: Vec<AdaptParams> = steps
            .iter()
            .map(|&mu| AdaptParams {
                step_size: mu,
                gm_lambda: cfg.adapt.gm_lambda,
                kernel: cfg.algorithm.kernel(),
            })
            .collect();
        for (i, p) in adapt.iter().enumerate() {
            p.validate().map_err(|e| Error::config(format!("adapt for node {i}: {e}")))?;
        }
        if let Some(a) = &cfg.attack {
            a.validate(&topology, dimension)?;
        }
        let initial = match &cfg.initial_estimate {
            Some(v) if v.len() == dimension => DVector::from_column_slice(v),
            Some(v) => {
                return Err(Error::config(format!(
                    "initial_estimate has length {}, expected {dimension}",
                    v.len()
                )))
            }
            None => DVector::zeros(dimension),
        };
        Ok(Self {
            config: resolved,
            topology,
            source,
            adapt,
            regressor_variances: variances,
            noise,
            initial,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_config(ExperimentConfig::load(path)?)
    }

    pub fn dimension(&self) -> usize {
        self.source.dimension()
    }

    pub fn ideal_state(&self, i: NodeId) -> &DVector<f64> {
        self.source.ideal_state(i)
    }

    /// Normal nodes targeted by an attacker, each with the state it is pushed toward.
    pub fn attacked_nodes(&self) -> Vec<(NodeId, DVector<f64>)> {
        let Some(spec) = &self.config.attack else {
            return Vec::new();
        };
        let topo = &self.topology;
        topo.normal_nodes()
            .into_iter()
            .filter_map(|i| {
                topo.neighborhood(i)
                    .iter()
                    .filter(|&&k| topo.is_byzantine(k))
                    .find_map(|&k| spec.target_state(k, i, self.dimension()))
                    .map(|t| (i, t))
            })
            .collect()
    }

    /// Per-node step bounds for the configured kernel.
    pub fn step_bounds(&self) -> Result<Vec<theory::StepBound>> {
        let nodes = self.node_theory()?;
        Ok(self
            .topology
            .normal_nodes()
            .into_iter()
            .map(|i| theory::StepBound {
                node: i,
                step_size: nodes[i].step_size,
                bound: theory::mean_step_bound(nodes[i].sigma_u2, nodes[i].gm_lambda, nodes[i].sigma_eta2),
            })
            .collect())
    }

    fn node_theory(&self) -> Result<Vec<NodeTheory>> {
        if self.noise.is_empty() {
            return Err(Error::Theory("the sensing scenario has no scalar noise model".into()));
        }
        (0..self.topology.num_nodes())
            .map(|i| {
                let sigma_eta2 = self.noise[i]
                    .variance()
                    .ok_or_else(|| Error::Theory(format!("node {i}: noise variance is infinite")))?;
                Ok(NodeTheory {
                    step_size: self.adapt[i].step_size,
                    gm_lambda: match self.adapt[i].kernel {
                        Kernel::Lms => 0.0,
                        Kernel::Lmg => self.adapt[i].gm_lambda,
                    },
                    sigma_u2: self.regressor_variances[i],
                    sigma_eta2,
                })
            })
            .collect()
    }

    pub fn theory_inputs(&self) -> Result<TheoryInputs> {
        let kind = self.config.algorithm;
        let f = if kind.is_resilient() {
            self.config.combine.removal_count
        } else {
            0
        };
        TheoryInputs::new(&self.topology, self.dimension(), &self.node_theory()?, f, kind.is_cooperative())
    }

    pub fn theory(&self) -> Result<TheoryReport> {
        theory::steady_state_msd(&self.theory_inputs()?)
    }

    fn setup(&self) -> RunSetup<'_> {
        RunSetup {
            topology: &self.topology,
            source: self.source.as_ref(),
            kind: self.config.algorithm,
            adapt: &self.adapt,
            combine: self.config.combine,
            block_mode: self.config.adapt.block_mode,
            attack: self.config.attack.as_ref(),
            initial: &self.initial,
            divergence_threshold: self.config.divergence_threshold,
        }
    }

    /// A fresh world for run `run`, for callers that drive iterations themselves.
    pub fn network(&self, run: u32) -> Result<Network<'_>> {
        Network::new(self.setup(), self.config.seed, run)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    pub run: usize,
    pub iteration: usize,
    pub node: NodeId,
}

/// Run-averaged metrics. MSD values are linear; use [`to_db`] for decibels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTrace {
    pub algorithm: AlgorithmKind,
    pub iterations: Vec<usize>,
    pub normal_nodes: Vec<NodeId>,
    /// `[row][k]`: mean of `‖w_i - w°_i‖²` for `normal_nodes[k]`.
    pub msd_per_node: Vec<Vec<f64>>,
    pub msd_network: Vec<f64>,
    pub subnetworks: Vec<Vec<NodeId>>,
    /// `[row][ℓ]`: mean per-node MSD over `subnetworks[ℓ]`.
    pub msd_subnetwork: Vec<Vec<f64>>,
    pub attacked_nodes: Vec<NodeId>,
    /// `[row][k]`: mean of `‖w_i - wᵃ_i‖` for `attacked_nodes[k]`.
    pub attacked_distance: Vec<Vec<f64>>,
    /// `(j, i, a_{j,i}(T))` averaged over completed runs, for normal `i` and `j ∈ N_i`.
    pub final_weights: Vec<(NodeId, NodeId, f64)>,
    /// Mean final estimate per node (all nodes; Byzantine entries stay at the initial value).
    pub mean_final_estimates: Vec<Vec<f64>>,
    pub divergent_runs: Vec<DivergenceRecord>,
    pub completed_runs: usize,
}

pub use crate::theory::to_db;

impl MetricsTrace {
    pub fn msd_network_db(&self) -> Vec<f64> {
        self.msd_network.iter().map(|&x| to_db(x)).collect()
    }

    /// Mean networked MSD (linear) over the last `rows` recorded rows.
    pub fn steady_state_msd(&self, rows: usize) -> f64 {
        let k = rows.min(self.msd_network.len()).max(1);
        let tail = &self.msd_network[self.msd_network.len() - k..];
        tail.iter().sum::<f64>() / k as f64
    }

    pub fn final_weight(&self, j: NodeId, i: NodeId) -> f64 {
        self.final_weights
            .iter()
            .find(|&&(a, b, _)| a == j && b == i)
            .map_or(0.0, |t| t.2)
    }

    pub fn final_estimate(&self, i: NodeId) -> DVector<f64> {
        DVector::from_column_slice(&self.mean_final_estimates[i])
    }
}

/// Components of the normal nodes over edges whose weight exceeds
/// `threshold` in at least one direction.
pub fn subnetwork_partition(final_weights: &[(NodeId, NodeId, f64)], topo: &Topology, threshold: f64) -> Vec<Vec<NodeId>> {
    let alive = alive_edges(final_weights, topo, threshold);
    let kept = Topology::new(topo.num_nodes(), alive, &topo.node_labels(), &topo.byzantine_nodes())
        .expect("alive edges are a subset of a valid topology");
    kept.components(|i| !topo.is_byzantine(i))
}

/// Undirected edges between normal nodes with weight above `threshold` in either direction.
pub fn alive_edges(final_weights: &[(NodeId, NodeId, f64)], topo: &Topology, threshold: f64) -> BTreeSet<(NodeId, NodeId)> {
    final_weights
        .iter()
        .filter(|&&(j, i, a)| j != i && a > threshold && !topo.is_byzantine(j) && !topo.is_byzantine(i))
        .map(|&(j, i, _)| (j.min(i), j.max(i)))
        .collect()
}

struct RunRecord {
    msd: Vec<f64>,
    attacked: Vec<f64>,
    final_estimates: Option<Vec<DVector<f64>>>,
    weights: Option<Vec<f64>>,
    divergence: Option<(usize, NodeId)>,
}

fn recorded_iterations(t: usize, every: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..=t).step_by(every).collect();
    if rows.last() != Some(&t) {
        rows.push(t);
    }
    rows
}

fn simulate_run(
    exp: &Experiment,
    run: usize,
    rows: &[usize],
    normal: &[NodeId],
    attacked: &[(NodeId, DVector<f64>)],
    weight_index: &[(NodeId, NodeId)],
) -> Result<RunRecord> {
    let mut net = exp.network(run as u32)?;
    let mut rec = RunRecord {
        msd: Vec::with_capacity(rows.len() * normal.len()),
        attacked: Vec::with_capacity(rows.len() * attacked.len()),
        final_estimates: None,
        weights: None,
        divergence: None,
    };
    let record = |net: &Network, rec: &mut RunRecord| {
        for &i in normal {
            let w = &net.estimate(i).w;
            rec.msd.push(squared_distance(w, exp.ideal_state(i)));
        }
        for (i, target) in attacked {
            rec.attacked.push(squared_distance(&net.estimate(*i).w, target).sqrt());
        }
    };
    let mut next_row = 0;
    if rows[0] == 0 {
        record(&net, &mut rec);
        next_row = 1;
    }
    let t = *rows.last().expect("at least one row");
    for n in 1..=t {
        match net.run_iteration() {
            Ok(()) => {}
            Err(Error::Divergence { node, iteration }) => {
                rec.divergence = Some((iteration, node));
                let remaining = rows.len() - next_row;
                rec.msd.extend(std::iter::repeat_n(f64::INFINITY, remaining * normal.len()));
                rec.attacked.extend(std::iter::repeat_n(f64::INFINITY, remaining * attacked.len()));
                return Ok(rec);
            }
            Err(e) => return Err(e),
        }
        if next_row < rows.len() && rows[next_row] == n {
            record(&net, &mut rec);
            next_row += 1;
        }
    }
    rec.final_estimates = Some(net.estimates().iter().map(|e| e.w.clone()).collect());
    rec.weights = Some(
        weight_index
            .iter()
            .map(|&(j, i)| net.combine_state().weight(j, i))
            .collect(),
    );
    Ok(rec)
}

fn squared_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Executes all runs and averages their metrics.
///
/// Runs are evaluated in chunks (in parallel when enabled) and reduced in run
/// order, so the result does not depend on the execution layout.
pub fn run_experiment(exp: &Experiment) -> Result<MetricsTrace> {
    let cfg = &exp.config;
    let topo = &exp.topology;
    let rows = recorded_iterations(cfg.iterations, cfg.trace.msd_every);
    let normal = topo.normal_nodes();
    let attacked = exp.attacked_nodes();
    let weight_index: Vec<(NodeId, NodeId)> = normal
        .iter()
        .flat_map(|&i| topo.neighborhood(i).iter().map(move |&j| (j, i)))
        .collect();

    let n_rows = rows.len();
    let mut msd_sum = vec![0.0; n_rows * normal.len()];
    let mut att_sum = vec![0.0; n_rows * attacked.len()];
    let mut est_sum = vec![DVector::<f64>::zeros(exp.dimension()); topo.num_nodes()];
    let mut weight_sum = vec![0.0; weight_index.len()];
    let mut divergent_runs = Vec::new();
    let mut completed = 0usize;

    let chunk = if cfg.parallel {
        (rayon::current_num_threads() * 2).max(2)
    } else {
        1
    };
    let mut start = 0;
    while start < cfg.runs {
        let end = (start + chunk).min(cfg.runs);
        let simulate = |run: usize| simulate_run(exp, run, &rows, &normal, &attacked, &weight_index);
        let records: Vec<Result<RunRecord>> = if cfg.parallel {
            (start..end).into_par_iter().map(simulate).collect()
        } else {
            (start..end).map(simulate).collect()
        };
        for (run, rec) in (start..end).zip(records) {
            let rec = rec?;
            for (s, x) in msd_sum.iter_mut().zip(&rec.msd) {
                *s += x;
            }
            for (s, x) in att_sum.iter_mut().zip(&rec.attacked) {
                *s += x;
            }
            if let Some((iteration, node)) = rec.divergence {
                divergent_runs.push(DivergenceRecord { run, iteration, node });
            }
            if let (Some(est), Some(w)) = (rec.final_estimates, rec.weights) {
                completed += 1;
                for (s, e) in est_sum.iter_mut().zip(&est) {
                    *s += e;
                }
                for (s, x) in weight_sum.iter_mut().zip(&w) {
                    *s += x;
                }
            }
        }
        start = end;
    }

    let runs = cfg.runs as f64;
    let rows_of = |flat: Vec<f64>, width: usize| -> Vec<Vec<f64>> {
        if width == 0 {
            return vec![Vec::new(); n_rows];
        }
        flat.chunks(width).map(|r| r.iter().map(|x| x / runs).collect()).collect()
    };
    let msd_per_node = rows_of(msd_sum, normal.len());
    let msd_network = msd_per_node
        .iter()
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        .collect();
    let c = completed as f64;
    let final_weights: Vec<(NodeId, NodeId, f64)> = weight_index
        .iter()
        .zip(&weight_sum)
        .map(|(&(j, i), &s)| (j, i, if completed > 0 { s / c } else { f64::NAN }))
        .collect();
    let mean_final_estimates = (0..topo.num_nodes())
        .map(|i| {
            if topo.is_byzantine(i) {
                exp.initial.iter().copied().collect()
            } else if completed > 0 {
                (&est_sum[i] / c).iter().copied().collect()
            } else {
                vec![f64::NAN; exp.dimension()]
            }
        })
        .collect();
    let subnetworks = subnetwork_partition(&final_weights, topo, cfg.trace.edge_threshold);
    let position: BTreeMap<NodeId, usize> = normal.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let msd_subnetwork = msd_per_node
        .iter()
        .map(|r: &Vec<f64>| {
            subnetworks
                .iter()
                .map(|s| s.iter().map(|i| r[position[i]]).sum::<f64>() / s.len() as f64)
                .collect()
        })
        .collect();
    Ok(MetricsTrace {
        algorithm: cfg.algorithm,
        iterations: rows,
        normal_nodes: normal,
        msd_per_node,
        msd_network,
        subnetworks,
        msd_subnetwork,
        attacked_nodes: attacked.iter().map(|(i, _)| *i).collect(),
        attacked_distance: rows_of(att_sum, attacked.len()),
        final_weights,
        mean_final_estimates,
        divergent_runs,
        completed_runs: completed,
    })
}

/// Resolves and runs a config in one call.
pub fn run_config(cfg: ExperimentConfig) -> Result<(Experiment, MetricsTrace)> {
    let exp = Experiment::from_config(cfg)?;
    let trace = run_experiment(&exp)?;
    Ok((exp, trace))
}

/// Networked MSD as the size-weighted mean of subnetwork MSDs.
pub fn networked_from_subnetworks(trace: &MetricsTrace, row: usize) -> f64 {
    let total: usize = trace.subnetworks.iter().map(Vec::len).sum();
    trace
        .subnetworks
        .iter()
        .zip(&trace.msd_subnetwork[row])
        .map(|(s, m)| m * s.len() as f64)
        .sum::<f64>()
        / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedNoise {
    pub node: NodeId,
    pub model: NoiseModel,
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    /// SHA-256 over `blob <len>\0<resolved config JSON>`.
    pub input_hash: String,
    pub completed_runs: usize,
    pub divergences: Vec<DivergenceRecord>,
    pub subnetworks: Vec<Vec<NodeId>>,
    pub regressor_variances: Vec<f64>,
    pub noise: Vec<ResolvedNoise>,
    pub files: Vec<String>,
}

pub fn input_hash(cfg: &ExperimentConfig) -> Result<String> {
    let body = serde_json::to_vec(cfg)?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(&body);
    Ok(hex::encode(h.finalize()))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

fn table(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Writes the CSV files and `manifest.json` into `dir`, creating it if needed.
pub fn emit_outputs(exp: &Experiment, trace: &MetricsTrace, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let wide = |name: &str, prefix: &str, ids: &[usize], data: &[Vec<f64>]| -> Result<String> {
        let mut header = vec!["iteration".to_string()];
        header.extend(ids.iter().map(|i| format!("{prefix}{i}")));
        let body = table(
            &header,
            trace.iterations.iter().zip(data).map(|(n, r)| {
                std::iter::once(n.to_string())
                    .chain(r.iter().map(|x| x.to_string()))
                    .collect()
            }),
        );
        write_file(&dir.join(name), &body)?;
        Ok(name.to_string())
    };
    let mut files = Vec::new();
    let net = table(
        &["iteration".into(), "msd_db".into()],
        trace
            .iterations
            .iter()
            .zip(&trace.msd_network)
            .map(|(n, x)| vec![n.to_string(), to_db(*x).to_string()]),
    );
    write_file(&dir.join("msd_network.csv"), &net)?;
    files.push("msd_network.csv".to_string());
    files.push(wide("msd_per_node.csv", "node_", &trace.normal_nodes, &trace.msd_per_node)?);
    let subnet_ids: Vec<usize> = (0..trace.subnetworks.len()).collect();
    files.push(wide("msd_subnetwork.csv", "subnet_", &subnet_ids, &trace.msd_subnetwork)?);
    files.push(wide("attacked_distance.csv", "node_", &trace.attacked_nodes, &trace.attacked_distance)?);
    let weights = table(
        &["j".into(), "i".into(), "weight".into()],
        trace
            .final_weights
            .iter()
            .map(|(j, i, a)| vec![j.to_string(), i.to_string(), a.to_string()]),
    );
    write_file(&dir.join("weights_final.csv"), &weights)?;
    files.push("weights_final.csv".to_string());

    let manifest = Manifest {
        generator: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        config: exp.config.clone(),
        seed: exp.config.seed,
        input_hash: input_hash(&exp.config)?,
        completed_runs: trace.completed_runs,
        divergences: trace.divergent_runs.clone(),
        subnetworks: trace.subnetworks.clone(),
        regressor_variances: exp.regressor_variances.clone(),
        noise: exp
            .noise
            .iter()
            .enumerate()
            .map(|(node, m)| ResolvedNoise {
                node,
                model: *m,
                variance: m.variance(),
            })
            .collect(),
        files,
    };
    write_file(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Alive edges and subnetworks after `iterations` iterations (averaged over the configured runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySnapshot {
    pub iteration: usize,
    pub threshold: f64,
    pub alive_edges: Vec<(NodeId, NodeId)>,
    pub cut_edges: Vec<(NodeId, NodeId)>,
    pub subnetworks: Vec<Vec<NodeId>>,
}

pub fn topology_snapshot(cfg: &ExperimentConfig, iterations: usize) -> Result<TopologySnapshot> {
    let mut cfg = cfg.clone();
    cfg.iterations = iterations;
    cfg.trace.msd_every = iterations.max(1);
    let (exp, trace) = run_config(cfg)?;
    let threshold = exp.config.trace.edge_threshold;
    let alive = alive_edges(&trace.final_weights, &exp.topology, threshold);
    let cut: BTreeSet<_> = exp.topology.edges().into_iter().filter(|e| !alive.contains(e)).collect();
    Ok(TopologySnapshot {
        iteration: iterations,
        threshold,
        alive_edges: alive.into_iter().collect(),
        cut_edges: cut.into_iter().collect(),
        subnetworks: trace.subnetworks,
    })
}

/// Ground-truth (and optionally estimated) transmitted PSD per cluster as CSV.
pub fn psd_csv(exp: &Experiment, trace: Option<&MetricsTrace>) -> Result<String> {
    let ScenarioConfig::Sensing(s) = &exp.config.scenario else {
        return Err(Error::config("psd requires the sensing scenario"));
    };
    let topo = &exp.topology;
    let labels = topo.cluster_labels();
    let mut header = vec!["iota".to_string(), "frequency".to_string()];
    for l in labels {
        header.push(format!("true_{l}"));
        if trace.is_some() {
            header.push(format!("estimated_{l}"));
        }
    }
    let basis_of = |iota: usize| iota * s.num_basis / s.num_freqs;
    let members = |c: usize| -> Vec<NodeId> { topo.normal_nodes().into_iter().filter(|&i| topo.cluster(i) == c).collect() };
    let rows = (0..s.num_freqs).map(|iota| {
        let m = basis_of(iota);
        let mut row = vec![iota.to_string(), ((iota as f64 + 0.5) / s.num_freqs as f64).to_string()];
        for c in 0..labels.len() {
            let nodes = members(c);
            let truth = nodes.first().map_or(f64::NAN, |&i| exp.ideal_state(i)[m]);
            row.push(truth.to_string());
            if let Some(t) = trace {
                let est = nodes.iter().map(|&i| t.mean_final_estimates[i][m]).sum::<f64>() / nodes.len() as f64;
                row.push(est.to_string());
            }
        }
        row
    });
    Ok(table(&header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
            "topology": {"grid": {"rows": 2, "cols": 3, "clusters": {"explicit": ["a","a","b","a","b","b"]},
                         "byzantine": [], "ideal_states": {"a": [0.1, 0.2], "b": [0.7, 0.8]}}},
            "scenario": {"kind": "generic_linear", "noise": {"snr_db": 20}},
            "algorithm": "RDLMG",
            "adapt": {"step_size": 0.05, "gm_lambda": 1.0},
            "iterations": 300, "runs": 3, "seed": 11
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn zero_iterations_report_initial_deviation() {
        let mut cfg = small_config();
        cfg.iterations = 0;
        cfg.runs = 1;
        cfg.initial_estimate = Some(vec![1.0, 1.0]);
        let (exp, trace) = run_config(cfg).unwrap();
        assert_eq!(trace.iterations, vec![0]);
        for (k, &i) in trace.normal_nodes.iter().enumerate() {
            let expect = (exp.ideal_state(i) - DVector::from_vec(vec![1.0, 1.0])).norm_squared();
            assert_eq!(trace.msd_per_node[0][k], expect);
        }
    }

    #[test]
    fn same_seed_same_trace_and_layout_independent() {
        let a = run_config(small_config()).unwrap().1;
        let b = run_config(small_config()).unwrap().1;
        assert_eq!(a, b);
        let mut serial = small_config();
        serial.parallel = false;
        assert_eq!(a, run_config(serial).unwrap().1);
    }

    #[test]
    fn resolved_config_reproduces_itself() {
        let exp = Experiment::from_config(small_config()).unwrap();
        let again = Experiment::from_config(exp.config.clone()).unwrap();
        assert_eq!(exp.config, again.config);
        assert_eq!(run_experiment(&exp).unwrap(), run_experiment(&again).unwrap());
    }

    #[test]
    fn snr_sets_noise_from_signal_power() {
        let exp = Experiment::from_config(small_config()).unwrap();
        let power = (3.0 * (0.01 + 0.04) + 3.0 * (0.49 + 0.64)) / 6.0;
        match exp.noise[0] {
            NoiseModel::Gaussian { variance } => assert!((variance - power / 100.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partition_cases() {
        let topo = Topology::new(3, [(0, 1), (1, 2)], &vec!["a".to_string(); 3], &[]).unwrap();
        let full = vec![(0, 1, 0.5), (1, 0, 0.5), (1, 2, 0.5), (2, 1, 0.5)];
        assert_eq!(subnetwork_partition(&full, &topo, 0.0), vec![vec![0, 1, 2]]);
        assert_eq!(subnetwork_partition(&[], &topo, 0.0), vec![vec![0], vec![1], vec![2]]);
        let one_way = vec![(0, 1, 0.5), (1, 0, 0.0), (2, 1, 1e-4), (1, 2, 1e-4)];
        assert_eq!(subnetwork_partition(&one_way, &topo, 1e-3), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn outputs_for_empty_trace() {
        let mut cfg = small_config();
        cfg.iterations = 0;
        cfg.runs = 1;
        let (exp, _) = run_config(cfg).unwrap();
        let empty = MetricsTrace {
            algorithm: AlgorithmKind::Rdlmg,
            iterations: vec![],
            normal_nodes: vec![],
            msd_per_node: vec![],
            msd_network: vec![],
            subnetworks: vec![],
            msd_subnetwork: vec![],
            attacked_nodes: vec![],
            attacked_distance: vec![],
            final_weights: vec![],
            mean_final_estimates: vec![],
            divergent_runs: vec![],
            completed_runs: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let m = emit_outputs(&exp, &empty, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("msd_network.csv")).unwrap(), "iteration,msd_db\n");
        assert_eq!(fs::read_to_string(dir.path().join("weights_final.csv")).unwrap(), "j,i,weight\n");
        assert!(dir.path().join("manifest.json").exists());
        assert_eq!(m.files.len(), 5);
    }

    #[test]
    fn byzantine_node_without_attack_leaves_msd_unchanged() {
        let base = small_config();
        let mut with_byz = small_config();
        if let TopologySource::Grid(g) = &mut with_byz.topology {
            g.rows = 3;
            g.clusters = ClusterRule::Explicit(
                ["a", "a", "b", "a", "b", "b", "x", "x", "x"].iter().map(|s| s.to_string()).collect(),
            );
            g.byzantine = vec![6, 7, 8];
        }
        // Same normal subgraph, but the Byzantine row adds edges; they must stay silent.
        let a = run_config(base).unwrap().1;
        let b = run_config(with_byz).unwrap().1;
        assert_eq!(a.normal_nodes, b.normal_nodes);
        assert_eq!(a.msd_network.len(), b.msd_network.len());
        assert_eq!(a.msd_per_node, b.msd_per_node);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = small_config();
        c.runs = 0;
        assert!(matches!(Experiment::from_config(c), Err(Error::Config(_))));
        let mut c = small_config();
        c.adapt.step_size = PerNode::Nodes(vec![0.1; 2]);
        assert!(Experiment::from_config(c).is_err());
        let mut c = small_config();
        c.attack = Some(AttackSpec::shared([0], 0.1, &[0.0, 0.0]));
        assert!(Experiment::from_config(c).is_err());
        assert!(ExperimentConfig::from_json(r#"{"topology": 3}"#).is_err());
    }
}
