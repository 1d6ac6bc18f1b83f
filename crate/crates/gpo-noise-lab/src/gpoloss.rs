//! The generalized preference-optimization surrogate family and the linear
//! preference head it trains.
//!
//! All three surrogates are convex, non-increasing scalar functions applied
//! to the scaled reward margin `z = beta * s * w^T x`:
//!
//! ```text
//!     dpo:   f(z) = -log sigmoid(z)        f'(z) = sigmoid(z) - 1    D = 1/4
//!     ipo:   f(z) = (z - 1/2)^2            f'(z) = 2 (z - 1/2)       D = 2
//!     slic:  f(z) = max(0, 1 - z)          f'(z) = -1 for z < 1      D = 1/(2 beta)
//! ```
//!
//! `D` is the curvature bound used by the boundary-time rule: for dpo and
//! ipo it is the supremum of `|f''|`; the hinge has no curvature, and its
//! stand-in `1/(2 beta)` comes from the margin-scale argument that replaces
//! the second-order bound in the stopping-time analysis.
//!
//! The preference head is a linear model with two token outputs; only the
//! difference of its weight rows matters for a fixed token pair, so the
//! model state is the single vector `w` with reward margin
//! `beta * orientation * w^T x`.

use crate::prefdata::PreferenceDataset;
use crate::util::{dot, log1p_exp, sigmoid};
use crate::{LabError, Result};

/// Which member of the surrogate family to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Dpo,
    Ipo,
    Slic,
}

impl LossKind {
    /// Config-file spelling of the kind.
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Dpo => "dpo",
            LossKind::Ipo => "ipo",
            LossKind::Slic => "slic",
        }
    }

    /// Parse the config-file spelling.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dpo" => Ok(LossKind::Dpo),
            "ipo" => Ok(LossKind::Ipo),
            "slic" => Ok(LossKind::Slic),
            other => Err(LabError::Config(format!(
                "unknown loss '{other}' (expected dpo, ipo, or slic)"
            ))),
        }
    }
}

/// A surrogate loss together with its margin scale `beta > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpoLoss {
    kind: LossKind,
    beta: f64,
}

impl GpoLoss {
    pub fn new(kind: LossKind, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(LabError::Config(format!(
                "margin scale beta must be finite and > 0, got {beta}"
            )));
        }
        Ok(Self { kind, beta })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Curvature bound `D` entering the stopping-time rule.
    pub fn curvature_bound(&self) -> f64 {
        match self.kind {
            LossKind::Dpo => 0.25,
            LossKind::Ipo => 2.0,
            LossKind::Slic => 1.0 / (2.0 * self.beta),
        }
    }

    /// Surrogate value `f(z)`.
    pub fn f_value(&self, z: f64) -> f64 {
        match self.kind {
            // -log sigmoid(z) = log(1 + exp(-z)); the softplus form stays
            // finite and accurate for |z| well beyond 30.
            LossKind::Dpo => log1p_exp(-z),
            LossKind::Ipo => (z - 0.5) * (z - 0.5),
            LossKind::Slic => (1.0 - z).max(0.0),
        }
    }

    /// Surrogate derivative `f'(z)`; for the hinge, the subgradient at the
    /// kink `z = 1` is taken to be 0 so trained margins stop at the target
    /// rather than overshooting it.
    pub fn f_prime(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Dpo => sigmoid(z) - 1.0,
            LossKind::Ipo => 2.0 * (z - 0.5),
            LossKind::Slic => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Linear preference head: the row difference `w` of the trained two-output
/// weight offset, scored as `beta * orientation * w^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPreferenceModel {
    w: Vec<f64>,
    beta: f64,
}

impl LinearPreferenceModel {
    /// Fresh head with `w = 0` (no weight offset yet).
    pub fn zeros(d: usize, beta: f64) -> Result<Self> {
        if d == 0 {
            return Err(LabError::Dimension("model dimension must be >= 1".to_string()));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(LabError::Config(format!(
                "margin scale beta must be finite and > 0, got {beta}"
            )));
        }
        Ok(Self {
            w: vec![0.0; d],
            beta,
        })
    }

    /// Head with an explicit weight vector (diagnostics and tests).
    pub fn from_weights(w: Vec<f64>, beta: f64) -> Result<Self> {
        let mut m = Self::zeros(w.len(), beta)?;
        m.w = w;
        Ok(m)
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn w_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn d(&self) -> usize {
        self.w.len()
    }
}

/// Reward margin `beta * orientation * w^T x` of one sample.
pub fn reward_margin(model: &LinearPreferenceModel, x: &[f64], orientation: i8) -> Result<f64> {
    if x.len() != model.d() {
        return Err(LabError::Dimension(format!(
            "sample dimension {} does not match model dimension {}",
            x.len(),
            model.d()
        )));
    }
    Ok(model.beta() * orientation as f64 * dot(model.w(), x))
}

/// Mean surrogate loss and its gradient in `w` over the noisy labels:
///
/// ```text
///     L(w) = (1/N) sum_i f(r_i),        r_i = beta * s~_i * w^T x_i
///     dL/dw = (1/N) sum_i f'(r_i) * beta * s~_i * x_i
/// ```
pub fn batch_loss_and_gradient(
    loss: &GpoLoss,
    model: &LinearPreferenceModel,
    ds: &PreferenceDataset,
) -> Result<(f64, Vec<f64>)> {
    if ds.n() == 0 {
        return Err(LabError::Precondition("empty dataset".to_string()));
    }
    if ds.d() != model.d() {
        return Err(LabError::Dimension(format!(
            "dataset dimension {} does not match model dimension {}",
            ds.d(),
            model.d()
        )));
    }
    let n = ds.n() as f64;
    let beta = model.beta();
    let mut total = 0.0;
    let mut grad = vec![0.0; model.d()];
    for i in 0..ds.n() {
        let s = ds.noisy_orientation()[i] as f64;
        let x = ds.x(i);
        let r = beta * s * dot(model.w(), x);
        total += loss.f_value(r);
        let coeff = loss.f_prime(r) * beta * s / n;
        for (g, v) in grad.iter_mut().zip(x) {
            *g += coeff * v;
        }
    }
    Ok((total / n, grad))
}
