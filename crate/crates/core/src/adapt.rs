//! Local adaptation: error, Geman-McClure cost and scale, and the LMS/LMG step.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Lms,
    Lmg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptParams {
    pub step_size: f64,
    pub gm_lambda: f64,
    pub kernel: Kernel,
}

impl AdaptParams {
    pub fn lms(step_size: f64) -> Self {
        Self {
            step_size,
            gm_lambda: 1.0,
            kernel: Kernel::Lms,
        }
    }

    pub fn lmg(step_size: f64, gm_lambda: f64) -> Self {
        Self {
            step_size,
            gm_lambda,
            kernel: Kernel::Lmg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::input(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.kernel == Kernel::Lmg && !(self.gm_lambda > 0.0 && self.gm_lambda.is_finite()) {
            return Err(Error::input(format!("GM lambda must be positive, got {}", self.gm_lambda)));
        }
        Ok(())
    }

    /// Error weighting: `gm_scale` for LMG, 1 for LMS.
    #[inline]
    pub fn scale(&self, e: f64) -> f64 {
        match self.kernel {
            Kernel::Lms => 1.0,
            Kernel::Lmg => gm_scale(e, self.gm_lambda),
        }
    }
}

/// Current estimate `w` and the intermediate estimate `psi` produced by adaptation.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEstimate {
    pub w: DVector<f64>,
    pub psi: DVector<f64>,
}

impl NodeEstimate {
    pub fn new(w: DVector<f64>) -> Self {
        Self { psi: w.clone(), w }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(self.psi.iter()).all(|x| x.is_finite())
    }
}

/// `d - uᵀw`.
pub fn error(d: f64, u: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    if u.len() != w.len() {
        return Err(Error::input(format!(
            "regressor has length {}, estimate has length {}",
            u.len(),
            w.len()
        )));
    }
    Ok(d - u.dot(w))
}

/// Geman-McClure cost `0.5 e² / (1 + λ e²)`, bounded by `0.5 / λ`.
#[inline]
pub fn gm_cost(e: f64, lambda: f64) -> f64 {
    let e2 = e * e;
    if e2.is_infinite() {
        return 0.5 / lambda;
    }
    0.5 * e2 / (1.0 + lambda * e2)
}

/// Geman-McClure scale `1 / (1 + λ e²)²`; the cost derivative is `gm_scale(e) * e`.
#[inline]
pub fn gm_scale(e: f64, lambda: f64) -> f64 {
    let s = 1.0 + lambda * e * e;
    1.0 / (s * s)
}

/// Largest value of `|gm_scale(e, λ) e|` over all `e`, reached at `e² = 1/(3λ)`.
pub fn gm_influence_bound(lambda: f64) -> f64 {
    let e = (1.0 / (3.0 * lambda)).sqrt();
    gm_scale(e, lambda) * e
}

/// Writes `w + μ f(e) e u` into `psi` and returns the error `e`.
pub fn adapt_into(w: &DVector<f64>, params: &AdaptParams, d: f64, u: &DVector<f64>, psi: &mut DVector<f64>) -> Result<f64> {
    let e = error(d, u, w)?;
    let g = params.step_size * params.scale(e) * e;
    psi.copy_from(w);
    psi.axpy(g, u, 1.0);
    if psi.iter().all(|x| x.is_finite()) {
        Ok(e)
    } else {
        Err(Error::NonFinite)
    }
}

/// One adaptation step; `w` is left untouched.
pub fn adapt_step(state: &NodeEstimate, params: &AdaptParams, d: f64, u: &DVector<f64>) -> Result<NodeEstimate> {
    let mut psi = DVector::zeros(state.w.len());
    adapt_into(&state.w, params, d, u, &mut psi)?;
    Ok(NodeEstimate {
        w: state.w.clone(),
        psi,
    })
}
