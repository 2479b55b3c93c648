//! Measurement generators: a generic linear model, multi-target localization
//! and multi-task spectrum sensing.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::adapt::{adapt_into, AdaptParams, NodeEstimate};
use crate::diffusion::{DataSource, NodeGenerator};
use crate::error::{Error, Result};
use crate::signal::{desired_signal, NoiseModel, Observation, RegressorModel, RngStream, Sample};
use crate::topology::NodeId;

/// `d = uᵀw°_i + η` with per-node regressor power and noise.
#[derive(Debug, Clone)]
pub struct GenericLinear {
    ideal: Vec<DVector<f64>>,
    regressor: RegressorModel,
    noise: Vec<NoiseModel>,
}

impl GenericLinear {
    pub fn new(ideal: Vec<DVector<f64>>, regressor: RegressorModel, noise: Vec<NoiseModel>) -> Result<Self> {
        check_nodes(ideal.len(), &regressor, &noise)?;
        if ideal.iter().any(|w| w.len() != regressor.dimension) {
            return Err(Error::input("ideal states and regressors differ in dimension"));
        }
        Ok(Self { ideal, regressor, noise })
    }
}

fn check_nodes(n: usize, regressor: &RegressorModel, noise: &[NoiseModel]) -> Result<()> {
    if regressor.variances.len() != n || noise.len() != n {
        return Err(Error::input(format!(
            "expected {n} per-node regressor variances and noise models, got {} and {}",
            regressor.variances.len(),
            noise.len()
        )));
    }
    noise.iter().try_for_each(NoiseModel::validate)
}

impl DataSource for GenericLinear {
    fn dimension(&self) -> usize {
        self.regressor.dimension
    }

    fn ideal_state(&self, i: NodeId) -> &DVector<f64> {
        &self.ideal[i]
    }

    fn observe(&self, i: NodeId, gen: &mut NodeGenerator) -> Result<Observation> {
        let u = self.regressor.sample(i, &mut gen.regressor_state, &mut gen.regressor)?;
        let eta = self.noise[i].sample(&mut gen.noise);
        Ok(vec![Sample {
            d: desired_signal(&u, &self.ideal[i], eta)?,
            u,
        }])
    }
}

/// Nodes at `p_i` estimate the position `w°_i` of their cluster's target.
///
/// A node observes the noisy projected distance `r = uᵀ(w° - p) + η` along a
/// random direction `u` and forms `d = r + uᵀp`, which is linear in `w°`.
#[derive(Debug, Clone)]
pub struct Localization {
    positions: Vec<DVector<f64>>,
    targets: Vec<DVector<f64>>,
    regressor: RegressorModel,
    noise: Vec<NoiseModel>,
}

impl Localization {
    pub fn new(positions: Vec<[f64; 2]>, targets: Vec<DVector<f64>>, regressor: RegressorModel, noise: Vec<NoiseModel>) -> Result<Self> {
        check_nodes(positions.len(), &regressor, &noise)?;
        if regressor.dimension != 2 || targets.len() != positions.len() || targets.iter().any(|t| t.len() != 2) {
            return Err(Error::input("localization needs one planar target and position per node"));
        }
        Ok(Self {
            positions: positions.iter().map(|p| DVector::from_column_slice(p)).collect(),
            targets,
            regressor,
            noise,
        })
    }

    pub fn position(&self, i: NodeId) -> &DVector<f64> {
        &self.positions[i]
    }

    /// One `(d, u)` pair for node `i`.
    pub fn localization_pair(&self, i: NodeId, gen: &mut NodeGenerator) -> Result<(f64, DVector<f64>)> {
        let u = self.regressor.sample(i, &mut gen.regressor_state, &mut gen.regressor)?;
        let eta = self.noise[i].sample(&mut gen.noise);
        let (_, d) = adjusted_signal(&self.positions[i], &self.targets[i], &u, eta);
        Ok((d, u))
    }
}

/// Returns `(r, d)` with `r = uᵀ(target - p) + η` and `d = r + uᵀp`.
pub fn adjusted_signal(p: &DVector<f64>, target: &DVector<f64>, u: &DVector<f64>, eta: f64) -> (f64, f64) {
    let r = u.dot(&(target - p)) + eta;
    (r, r + u.dot(p))
}

impl DataSource for Localization {
    fn dimension(&self) -> usize {
        2
    }

    fn ideal_state(&self, i: NodeId) -> &DVector<f64> {
        &self.targets[i]
    }

    fn observe(&self, i: NodeId, gen: &mut NodeGenerator) -> Result<Observation> {
        let (d, u) = self.localization_pair(i, gen)?;
        Ok(vec![Sample { d, u }])
    }
}

/// Channel power gain `|H_i|²` over frequency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelModel {
    #[default]
    Flat,
    /// Independent log-normal gain per node and frequency sample, with the
    /// given standard deviation in dB.
    LogNormal { sigma_db: f64 },
}

/// Power spectral density estimation over a rectangular basis.
///
/// The frequency axis holds `M_f` samples at the bin midpoints; basis `m`
/// is one on samples `ι` with `⌊ι M / M_f⌋ = m` and zero elsewhere.
#[derive(Debug, Clone)]
pub struct Sensing {
    num_basis: usize,
    num_freqs: usize,
    ideal: Vec<DVector<f64>>,
    gains: Vec<Vec<f64>>,
    receiver_noise: f64,
    background: bool,
    impulses: Option<NoiseModel>,
}

impl Sensing {
    pub fn new(
        num_basis: usize,
        num_freqs: usize,
        ideal: Vec<DVector<f64>>,
        gains: Vec<Vec<f64>>,
        receiver_noise: f64,
        background: bool,
        impulses: Option<NoiseModel>,
    ) -> Result<Self> {
        if num_basis == 0 || num_freqs < num_basis {
            return Err(Error::input("need 0 < num_basis <= num_freqs"));
        }
        if ideal.iter().any(|w| w.len() != num_basis || w.iter().any(|&x| x < 0.0)) {
            return Err(Error::input("sensing weights must be nonnegative with one entry per basis"));
        }
        if gains.len() != ideal.len() || gains.iter().any(|g| g.len() != num_freqs || g.iter().any(|&x| !(x > 0.0))) {
            return Err(Error::input("need a positive gain per node and frequency sample"));
        }
        if !(receiver_noise >= 0.0) {
            return Err(Error::input("receiver noise power must be nonnegative"));
        }
        if let Some(m) = &impulses {
            m.validate()?;
        }
        Ok(Self {
            num_basis,
            num_freqs,
            ideal,
            gains,
            receiver_noise,
            background,
            impulses,
        })
    }

    /// Unit gains for every node and frequency.
    pub fn flat_gains(nodes: usize, num_freqs: usize) -> Vec<Vec<f64>> {
        vec![vec![1.0; num_freqs]; nodes]
    }

    pub fn log_normal_gains(nodes: usize, num_freqs: usize, sigma_db: f64, rng: &mut RngStream) -> Vec<Vec<f64>> {
        (0..nodes)
            .map(|_| {
                (0..num_freqs)
                    .map(|_| 10f64.powf(sigma_db * rng.standard_normal() / 10.0))
                    .collect()
            })
            .collect()
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn num_freqs(&self) -> usize {
        self.num_freqs
    }

    /// Normalized frequency of sample `ι`, in (0, 1).
    pub fn frequency(&self, iota: usize) -> f64 {
        (iota as f64 + 0.5) / self.num_freqs as f64
    }

    /// Index of the basis rectangle containing sample `ι`.
    pub fn basis_of(&self, iota: usize) -> usize {
        iota * self.num_basis / self.num_freqs
    }

    /// Noise-free received PSD after removing the receiver noise: `|H|² bᵀw`.
    pub fn psd(&self, w: &DVector<f64>, node: NodeId, iota: usize) -> f64 {
        self.gains[node][iota] * w[self.basis_of(iota)]
    }

    /// Background noise variance `σ_r²(σ_r² + 2Φ)/10` where Φ is the received PSD including `σ_r²`.
    pub fn background_variance(&self, node: NodeId, iota: usize) -> f64 {
        let s = self.receiver_noise;
        let phi = self.psd(&self.ideal[node], node, iota) + s;
        s * (s + 2.0 * phi) / 10.0
    }

    /// The `M_f` pairs `(d_ι, b_ι)` for node `i`.
    pub fn sensing_pairs(&self, i: NodeId, gen: &mut NodeGenerator) -> Result<Observation> {
        (0..self.num_freqs)
            .map(|iota| {
                let mut b = DVector::zeros(self.num_basis);
                b[self.basis_of(iota)] = self.gains[i][iota];
                let mut eta = 0.0;
                if self.background {
                    eta += self.background_variance(i, iota).sqrt() * gen.noise.standard_normal();
                }
                if let Some(m) = &self.impulses {
                    eta += m.sample(&mut gen.noise);
                }
                Ok(Sample {
                    d: self.psd(&self.ideal[i], i, iota) + eta,
                    u: b,
                })
            })
            .collect()
    }
}

impl DataSource for Sensing {
    fn dimension(&self) -> usize {
        self.num_basis
    }

    fn ideal_state(&self, i: NodeId) -> &DVector<f64> {
        &self.ideal[i]
    }

    fn observe(&self, i: NodeId, gen: &mut NodeGenerator) -> Result<Observation> {
        self.sensing_pairs(i, gen)
    }
}

/// How a block of samples drives one adaptation step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    /// Averaged robust gradient, all errors taken at `w`.
    #[default]
    Average,
    /// One scalar step per sample, each starting where the previous ended.
    Sequential,
}

/// Writes the block-adapted intermediate estimate into `psi`.
pub fn block_adapt_into(
    w: &DVector<f64>,
    params: &AdaptParams,
    pairs: &[Sample],
    mode: BlockMode,
    psi: &mut DVector<f64>,
) -> Result<()> {
    match pairs {
        [] => Err(Error::input("block adaptation needs at least one sample")),
        [single] => adapt_into(w, params, single.d, &single.u, psi).map(|_| ()),
        _ => match mode {
            BlockMode::Average => {
                let mut grad = DVector::zeros(w.len());
                for s in pairs {
                    let e = crate::adapt::error(s.d, &s.u, w)?;
                    grad.axpy(params.scale(e) * e, &s.u, 1.0);
                }
                psi.copy_from(w);
                psi.axpy(params.step_size / pairs.len() as f64, &grad, 1.0);
                if psi.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::NonFinite)
                }
            }
            BlockMode::Sequential => {
                let mut cur = w.clone();
                for s in pairs {
                    adapt_into(&cur, params, s.d, &s.u, psi)?;
                    cur.copy_from(psi);
                }
                Ok(())
            }
        },
    }
}

/// `ψ = w + μ (1/M_f) Σ f(e_ι) e_ι b_ι` (or the sequential variant).
pub fn block_adapt(state: &NodeEstimate, params: &AdaptParams, pairs: &[Sample], mode: BlockMode) -> Result<NodeEstimate> {
    let mut psi = DVector::zeros(state.w.len());
    block_adapt_into(&state.w, params, pairs, mode, &mut psi)?;
    Ok(NodeEstimate {
        w: state.w.clone(),
        psi,
    })
}
