//! Population-risk estimation and the noise-curve diagnostics built on it.
//!
//! The risk of a preference head is the probability that it mis-orders a
//! fresh clean preference pair: a sample counts as an error when its reward
//! margin is `<= 0`, ties included. Counting ties as errors follows the
//! risk definition's `r <= 0` branch literally, with one conspicuous
//! consequence: the untrained head (`w = 0`) has risk exactly 1, not 1/2,
//! because every margin is exactly zero. After a single gradient step the
//! margins are continuous random variables and the tie set has measure
//! zero, so plotted curves behave conventionally.
//!
//! Test sets are always clean — noise corrupts only training data — and
//! risk is estimated on a fresh test draw per trial with binomial error
//! bars.

use crate::prefdata::{apply_mislabel, generate_clean, NoiseMeta, PreferenceDataset, PreferencePairConfig};
use crate::gpoloss::{reward_margin, LinearPreferenceModel};
use crate::trainer::{train, TrainConfig};
use crate::util::{mean_stderr, stream_seed};
use crate::{LabError, Result};

/// Test-set size used throughout the controlled experiments.
pub const DEFAULT_N_TEST: usize = 2000;

/// Stream-purpose tags for curve estimation (kept distinct from the
/// harness's sweep tags by the leading coordinate).
const PURPOSE_TRAIN_DATA: u64 = 1;
const PURPOSE_NOISE: u64 = 2;
const PURPOSE_TEST_DATA: u64 = 3;

/// Monte-Carlo estimate of the zero-one risk of one model.
#[derive(Debug, Clone)]
pub struct RiskEstimate {
    n_errors: usize,
    n_test: usize,
    /// Provenance of the test set the estimate was computed on.
    pub meta: NoiseMeta,
}

impl RiskEstimate {
    /// Fraction of test samples with margin `<= 0`.
    pub fn risk(&self) -> f64 {
        self.n_errors as f64 / self.n_test as f64
    }

    /// `1 - risk`, exactly.
    pub fn accuracy(&self) -> f64 {
        (self.n_test - self.n_errors) as f64 / self.n_test as f64
    }

    /// Raw error count (so `risk * n_test` is an integer by construction).
    pub fn n_errors(&self) -> usize {
        self.n_errors
    }

    pub fn n_test(&self) -> usize {
        self.n_test
    }

    /// Binomial standard error `sqrt(p (1 - p) / n_test)`.
    pub fn stderr(&self) -> f64 {
        let p = self.risk();
        (p * (1.0 - p) / self.n_test as f64).sqrt()
    }
}

/// Count mis-ordered samples: margin `<= 0` is an error (ties included).
///
/// `use_clean_labels` selects which orientation array defines "correct";
/// the risk definition wants the clean one, and the noisy option exists for
/// diagnostics such as the exact label-flip complement check.
pub fn zero_one_risk(
    model: &LinearPreferenceModel,
    test: &PreferenceDataset,
    use_clean_labels: bool,
) -> Result<RiskEstimate> {
    if test.n() == 0 {
        return Err(LabError::Precondition("empty test set".to_string()));
    }
    let labels = if use_clean_labels {
        test.clean_orientation()
    } else {
        test.noisy_orientation()
    };
    let mut n_errors = 0;
    for i in 0..test.n() {
        let margin = reward_margin(model, test.x(i), labels[i])?;
        if margin <= 0.0 {
            n_errors += 1;
        }
    }
    Ok(RiskEstimate {
        n_errors,
        n_test: test.n(),
        meta: test.meta().clone(),
    })
}

/// One point of an accuracy-versus-noise curve.
#[derive(Debug, Clone)]
pub struct CurveCell {
    pub epsilon: f64,
    /// Mean test accuracy over the completed trials.
    pub mean_accuracy: f64,
    /// Standard error of that mean across trials.
    pub stderr: f64,
    /// Trials that finished training and were aggregated.
    pub trials_used: usize,
    /// Trials dropped because the trainer hit its divergence guard.
    pub diverged_trials: usize,
}

/// Estimate mean test accuracy as a function of the mislabel rate.
///
/// For every `epsilon` in the grid and every trial: draw fresh training
/// data, corrupt its labels, train a head from zero, and evaluate on a
/// fresh clean test set of `n_test` samples. Each (cell, trial, purpose)
/// triple gets its own derived stream, so cells are independent and the
/// whole curve is a pure function of `base_seed`. Diverged trials are
/// recorded on their cell and excluded from the aggregate; any other
/// failure aborts the curve.
pub fn expected_risk_curve(
    config: &PreferencePairConfig,
    train_cfg: &TrainConfig,
    eps_grid: &[f64],
    trials: usize,
    n_test: usize,
    base_seed: u64,
) -> Result<Vec<CurveCell>> {
    if trials == 0 {
        return Err(LabError::Config("trial count must be >= 1".to_string()));
    }
    if eps_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(LabError::Config(
            "mislabel grid entries must lie in [0, 1]".to_string(),
        ));
    }
    let test_cfg =
        PreferencePairConfig::new(config.d(), config.gamma(), config.phi(), n_test)?;
    let mut cells = Vec::with_capacity(eps_grid.len());
    for (i, &eps) in eps_grid.iter().enumerate() {
        let mut accuracies = Vec::with_capacity(trials);
        let mut diverged = 0usize;
        for t in 0..trials {
            let i = i as u64;
            let t = t as u64;
            let ds = apply_mislabel(
                generate_clean(config, stream_seed(base_seed, &[PURPOSE_TRAIN_DATA, i, t]))?,
                eps,
                stream_seed(base_seed, &[PURPOSE_NOISE, i, t]),
            )?;
            let model = match train(&ds, train_cfg) {
                Ok((model, _)) => model,
                Err(LabError::Divergence(_)) => {
                    diverged += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let test = generate_clean(
                &test_cfg,
                stream_seed(base_seed, &[PURPOSE_TEST_DATA, i, t]),
            )?;
            accuracies.push(zero_one_risk(&model, &test, true)?.accuracy());
        }
        let (mean, se) = mean_stderr(&accuracies);
        cells.push(CurveCell {
            epsilon: eps,
            mean_accuracy: mean,
            stderr: se,
            trials_used: accuracies.len(),
            diverged_trials: diverged,
        });
    }
    Ok(cells)
}

/// Curvature of the risk curve at the midpoint `epsilon = 1/2`.
#[derive(Debug, Clone, Copy)]
pub struct InflectionDiagnostic {
    /// Central second difference of mean risk at 1/2, divided by the
    /// squared grid step.
    pub second_difference: f64,
    /// Standard error propagated from the three cells' trial noise.
    pub stderr: f64,
    /// Grid step the difference was taken over.
    pub step: f64,
}

/// Estimate `d^2/deps^2` of mean risk at `epsilon = 1/2` by a central
/// second difference over the midpoint's immediate grid neighbors.
///
/// The grid must contain 1/2 and a symmetric pair of neighbors around it.
pub fn inflection_diagnostic(curve: &[CurveCell]) -> Result<InflectionDiagnostic> {
    let mut cells: Vec<&CurveCell> = curve.iter().collect();
    cells.sort_by(|a, b| a.epsilon.partial_cmp(&b.epsilon).expect("finite grid"));
    let mid = cells
        .iter()
        .position(|c| (c.epsilon - 0.5).abs() <= 1e-9)
        .ok_or_else(|| {
            LabError::Precondition("curve grid does not contain epsilon = 1/2".to_string())
        })?;
    if mid == 0 || mid + 1 == cells.len() {
        return Err(LabError::Precondition(
            "epsilon = 1/2 needs neighbors on both sides".to_string(),
        ));
    }
    let (lo, hi) = (cells[mid - 1], cells[mid + 1]);
    let h_lo = 0.5 - lo.epsilon;
    let h_hi = hi.epsilon - 0.5;
    if (h_lo - h_hi).abs() > 1e-9 {
        return Err(LabError::Precondition(format!(
            "grid is not symmetric around 1/2: steps {h_lo} vs {h_hi}"
        )));
    }
    let h = 0.5 * (h_lo + h_hi);
    // Mean risk = 1 - mean accuracy, so the accuracy second difference
    // negates.
    let c0 = cells[mid];
    let dd = -(hi.mean_accuracy - 2.0 * c0.mean_accuracy + lo.mean_accuracy) / (h * h);
    let se = (hi.stderr.powi(2) + 4.0 * c0.stderr.powi(2) + lo.stderr.powi(2)).sqrt() / (h * h);
    Ok(InflectionDiagnostic {
        second_difference: dd,
        stderr: se,
        step: h,
    })
}
