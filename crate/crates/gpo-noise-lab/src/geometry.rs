//! Dataset geometry diagnostic: ingest an embedding matrix with binary
//! class labels, check how hyperspherical-cluster-like it is (norm
//! uniformity, cosine concentration around each class mean), estimate the
//! normalized concentration `gamma_hat` and class half-angle `phi_hat`,
//! and translate those into a predicted noise-robustness verdict via the
//! closed-form threshold.
//!
//! ```text
//!   rows + labels ──> raw-norm stats      (avg_norm, norm_std)
//!              └────> normalize rows ──> class means ──> R̄, mu_hat
//!                        cosines to class mean ──> avg, variance
//!                        R̄ ──> kappa_hat ──> gamma_hat = 2*kappa_hat/d
//!                        mu_hat_+ vs mu_hat_- ──> phi_hat
//!   (gamma_hat, phi_hat, N, d, delta) ──> noise threshold ──> verdict
//! ```
//!
//! The concentration estimator is the classical mean-resultant-length
//! approximation `kappa_hat = R(d - R^2)/(1 - R^2)` (Banerjee et al.,
//! 2005), which is accurate in high dimension and needs no Bessel
//! evaluation. Norm statistics are computed on raw rows (real embedding
//! pipelines report norms before any explicit normalization); directional
//! statistics are computed on rows normalized to unit length.

use crate::bounds::{noise_threshold, BoundInputs, BoundValue};
use crate::util::{dot, norm, scale};
use crate::vmf::EmbeddingMatrix;
use crate::{LabError, Result};

/// Reference measurement of RMSNorm-style final-layer embeddings from a
/// production-scale open chat model on a persona preference corpus:
/// average row norm.
pub const REFERENCE_AVG_NORM: f64 = 139.6;
/// Companion norm-spread statistic from the same reference measurement.
/// The source table labels it a variance while the accompanying prose
/// calls it a standard deviation below 1% of the average; both readings
/// satisfy that prose (0.9635 / 139.6 = 0.69%, sqrt(0.9635) / 139.6 =
/// 0.70%), so the number is shipped under this neutral name and reports
/// print it under both labels.
pub const REFERENCE_NORM_SPREAD: f64 = 0.9635;
/// Reference average cosine between each sample and its class mean.
pub const REFERENCE_AVG_COSINE: f64 = 0.9557;
/// Reference variance of those cosines.
pub const REFERENCE_COSINE_VARIANCE: f64 = 8.963e-5;

/// Summary statistics of a labeled embedding matrix.
///
/// Invariants: `0 <= avg_cosine_to_class_mean <= 1` (each class's mean
/// cosine to its own normalized mean equals the mean resultant length,
/// which lies in `[0, 1]`) and `phi_hat` lies in `[0, pi/2]`.
#[derive(Debug, Clone)]
pub struct GeometryProfile {
    /// Mean raw row norm.
    pub avg_norm: f64,
    /// Sample variance (n - 1 denominator) of the raw row norms.
    pub norm_variance: f64,
    /// Sample standard deviation of the raw row norms.
    pub norm_std: f64,
    /// Mean cosine between each normalized row and its class's normalized
    /// mean direction, pooled over both classes.
    pub avg_cosine_to_class_mean: f64,
    /// Sample variance of those cosines.
    pub cosine_variance: f64,
    /// Estimated concentration, `R(d - R^2)/(1 - R^2)` per class, pooled
    /// by class size. `f64::INFINITY` when a class is perfectly aligned.
    pub kappa_hat: f64,
    /// Normalized concentration estimate `2 * kappa_hat / d`.
    pub gamma_hat: f64,
    /// Half the angle between the two estimated class mean directions.
    pub phi_hat: f64,
    /// Rows labeled +1.
    pub n_pos: usize,
    /// Rows labeled -1.
    pub n_neg: usize,
    /// Embedding dimension.
    pub d: usize,
}

fn kappa_from_resultant(r: f64, d: usize) -> f64 {
    if r >= 1.0 - 1e-12 {
        return f64::INFINITY;
    }
    r * (d as f64 - r * r) / (1.0 - r * r)
}

/// Profile a labeled embedding matrix. Labels are one `+1`/`-1` per row;
/// both classes must be nonempty and no row may have (near-)zero norm.
pub fn profile(embeddings: &EmbeddingMatrix, labels: &[i8]) -> Result<GeometryProfile> {
    let n = embeddings.n_rows();
    let d = embeddings.dim();
    if labels.len() != n {
        return Err(LabError::Dimension(format!(
            "{} labels for {} embedding rows",
            labels.len(),
            n
        )));
    }
    if let Some((i, &bad)) = labels.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
        return Err(LabError::Config(format!(
            "label {i} is {bad}; labels must be +1 or -1"
        )));
    }
    let n_pos = labels.iter().filter(|&&s| s == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(LabError::Precondition(format!(
            "both classes must be nonempty (got {n_pos} positive, {n_neg} negative)"
        )));
    }

    // Raw-norm statistics, then normalized copies for everything
    // directional.
    let mut norms = Vec::with_capacity(n);
    let mut unit = Vec::with_capacity(n * d);
    for (i, row) in embeddings.rows().enumerate() {
        let r = norm(row);
        if r < 1e-12 {
            return Err(LabError::Precondition(format!(
                "row {i} has zero norm and no direction"
            )));
        }
        norms.push(r);
        let mut u = row.to_vec();
        scale(&mut u, 1.0 / r);
        unit.extend_from_slice(&u);
    }
    let (avg_norm, norm_sem) = crate::util::mean_stderr(&norms);
    // mean_stderr returns the standard error of the mean; recover the
    // sample variance from it.
    let norm_variance = norm_sem * norm_sem * n as f64;
    let norm_std = norm_variance.sqrt();

    let mut mean_pos = vec![0.0; d];
    let mut mean_neg = vec![0.0; d];
    for (i, &s) in labels.iter().enumerate() {
        let row = &unit[i * d..(i + 1) * d];
        let target = if s == 1 { &mut mean_pos } else { &mut mean_neg };
        for (t, &x) in target.iter_mut().zip(row) {
            *t += x;
        }
    }
    scale(&mut mean_pos, 1.0 / n_pos as f64);
    scale(&mut mean_neg, 1.0 / n_neg as f64);
    let r_pos = norm(&mean_pos);
    let r_neg = norm(&mean_neg);
    if r_pos < 1e-12 || r_neg < 1e-12 {
        return Err(LabError::Precondition(
            "a class mean has zero norm; no direction can be estimated".to_string(),
        ));
    }
    let mut mu_pos = mean_pos.clone();
    scale(&mut mu_pos, 1.0 / r_pos);
    let mut mu_neg = mean_neg.clone();
    scale(&mut mu_neg, 1.0 / r_neg);

    let cosines: Vec<f64> = labels
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let row = &unit[i * d..(i + 1) * d];
            dot(row, if s == 1 { &mu_pos } else { &mu_neg })
        })
        .collect();
    let (avg_cosine, cos_sem) = crate::util::mean_stderr(&cosines);
    let cosine_variance = cos_sem * cos_sem * n as f64;

    let kappa_pos = kappa_from_resultant(r_pos, d);
    let kappa_neg = kappa_from_resultant(r_neg, d);
    let kappa_hat = (n_pos as f64 * kappa_pos + n_neg as f64 * kappa_neg) / n as f64;
    let gamma_hat = 2.0 * kappa_hat / d as f64;
    let phi_hat = dot(&mu_pos, &mu_neg).clamp(-1.0, 1.0).acos() / 2.0;

    Ok(GeometryProfile {
        avg_norm,
        norm_variance,
        norm_std,
        avg_cosine_to_class_mean: avg_cosine,
        cosine_variance,
        kappa_hat,
        gamma_hat,
        phi_hat,
        n_pos,
        n_neg,
        d,
    })
}

/// Evaluate the noise threshold at the profiled geometry and phrase it as
/// an actionable verdict.
///
/// Returns one of three strings: `robust up to eps_hat = ...` when the
/// threshold is positive, a `preconditions unsatisfied` recommendation
/// when the geometry fails a hard precondition, and a `threshold vacuous`
/// recommendation when the geometry qualifies but the sample count is too
/// small for any positive guarantee. Sample counts below the theory's
/// floor of 25 are an error rather than a verdict.
pub fn robustness_verdict(profile: &GeometryProfile, n: u64, delta: f64) -> Result<String> {
    if n < 25 {
        return Err(LabError::Precondition(format!(
            "the generalization guarantee requires N >= 25, got {n}"
        )));
    }
    let inputs = BoundInputs::new(n, profile.d, profile.gamma_hat, profile.phi_hat, delta, 0.0)?;
    let report = noise_threshold(&inputs);
    Ok(match report.value {
        BoundValue::Value(v) if v > 0.0 => {
            format!("robust up to eps_hat = {v:.4}")
        }
        BoundValue::Value(_) => format!(
            "threshold vacuous at N = {n} — noise-aware optimization recommended"
        ),
        BoundValue::Unsatisfied(reason) => format!(
            "preconditions unsatisfied ({reason}) — noise-aware optimization recommended"
        ),
    })
}
