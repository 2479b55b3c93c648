//! Seeded random streams, noise processes and regressor generators.

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::NodeId;

/// Purpose tag of a substream. The numeric value is part of the stream path,
/// so reordering variants changes every draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Channel {
    Regressor = 0,
    Noise = 1,
    Gain = 2,
    Setup = 3,
}

/// Counter-based generator addressed by `(seed, run, node, channel)`.
///
/// The seed selects the ChaCha key and the path selects the 64-bit stream,
/// so substreams never overlap and need no coordination.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, run: u32, node: NodeId, channel: Channel) -> Self {
        debug_assert!(node < 1 << 24, "node ids are packed into 24 bits");
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(((run as u64) << 32) | ((node as u64) << 8) | channel as u64);
        Self { inner }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Additive observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    Gaussian {
        variance: f64,
    },
    /// Background Gaussian `v` plus a Bernoulli(p)-gated Gaussian impulse `g`.
    ContaminatedGaussian {
        sigma_v2: f64,
        sigma_g2: f64,
        p: f64,
    },
    /// Symmetric α-stable with characteristic function exp(-γ^α |t|^α).
    AlphaStable {
        alpha: f64,
        gamma: f64,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::Gaussian { variance } => variance > 0.0 && variance.is_finite(),
            NoiseModel::ContaminatedGaussian { sigma_v2, sigma_g2, p } => {
                sigma_v2 > 0.0 && sigma_g2 >= sigma_v2 && sigma_g2.is_finite() && (0.0..=1.0).contains(&p)
            }
            NoiseModel::AlphaStable { alpha, gamma } => alpha > 0.0 && alpha <= 2.0 && gamma > 0.0 && gamma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("invalid noise model {self:?}")))
        }
    }

    /// Effective variance, or `None` when it is infinite (α-stable with α < 2).
    pub fn variance(&self) -> Option<f64> {
        match *self {
            NoiseModel::Gaussian { variance } => Some(variance),
            NoiseModel::ContaminatedGaussian { sigma_v2, sigma_g2, p } => Some(sigma_v2 + p * sigma_g2),
            NoiseModel::AlphaStable { alpha, gamma } if alpha == 2.0 => Some(2.0 * gamma * gamma),
            NoiseModel::AlphaStable { .. } => None,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            NoiseModel::Gaussian { variance } => variance.sqrt() * rng.standard_normal(),
            NoiseModel::ContaminatedGaussian { sigma_v2, sigma_g2, p } => {
                let v = sigma_v2.sqrt() * rng.standard_normal();
                if rng.random::<f64>() < p {
                    v + sigma_g2.sqrt() * rng.standard_normal()
                } else {
                    v
                }
            }
            NoiseModel::AlphaStable { alpha, gamma } => gamma * standard_symmetric_stable(alpha, rng),
        }
    }
}

/// Chambers–Mallows–Stuck draw with unit dispersion, zero skew and location.
fn standard_symmetric_stable(alpha: f64, rng: &mut RngStream) -> f64 {
    let u = (rng.random::<f64>() - 0.5) * std::f64::consts::PI;
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        return u.tan();
    }
    let head = (alpha * u).sin() / u.cos().powf(1.0 / alpha);
    let tail = ((u - alpha * u).cos() / w).powf((1.0 - alpha) / alpha);
    let x = head * tail;
    // Endpoint draws (u = -π/2 or w = 0) can overflow; keep them huge but finite.
    if x.is_finite() {
        x
    } else if x.is_nan() {
        0.0
    } else {
        x.signum() * f64::MAX.sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorStyle {
    #[default]
    Iid,
    TappedDelay,
}

/// Zero-mean Gaussian regressors with per-node power.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    pub dimension: usize,
    pub variances: Vec<f64>,
    pub style: RegressorStyle,
}

/// Shift register for tapped-delay regressors; unused for the IID style.
#[derive(Debug, Clone, Default)]
pub struct RegressorState {
    taps: Option<DVector<f64>>,
}

impl RegressorModel {
    pub fn new(dimension: usize, variances: Vec<f64>, style: RegressorStyle) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::input("regressor dimension must be positive"));
        }
        if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::input(format!("regressor variance must be positive, got {v}")));
        }
        Ok(Self {
            dimension,
            variances,
            style,
        })
    }

    pub fn variance(&self, node: NodeId) -> Result<f64> {
        self.variances
            .get(node)
            .copied()
            .ok_or_else(|| Error::input(format!("no regressor variance for node {node}")))
    }

    pub fn sample(&self, node: NodeId, state: &mut RegressorState, rng: &mut RngStream) -> Result<DVector<f64>> {
        let sd = self.variance(node)?.sqrt();
        let m = self.dimension;
        Ok(match self.style {
            RegressorStyle::Iid => DVector::from_fn(m, |_, _| sd * rng.standard_normal()),
            RegressorStyle::TappedDelay => {
                let taps = state
                    .taps
                    .get_or_insert_with(|| DVector::from_fn(m, |_, _| sd * rng.standard_normal()));
                for k in (1..m).rev() {
                    taps[k] = taps[k - 1];
                }
                taps[0] = sd * rng.standard_normal();
                taps.clone()
            }
        })
    }
}

/// `uᵀw + noise`.
pub fn desired_signal(u: &DVector<f64>, w_true: &DVector<f64>, noise: f64) -> Result<f64> {
    if u.len() != w_true.len() {
        return Err(Error::input(format!(
            "regressor has length {}, state has length {}",
            u.len(),
            w_true.len()
        )));
    }
    Ok(u.dot(w_true) + noise)
}

/// One scalar measurement `d = uᵀw° + η`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub d: f64,
    pub u: DVector<f64>,
}

/// A node's data for one iteration: a single sample, or a block of them.
pub type Observation = Vec<Sample>;
