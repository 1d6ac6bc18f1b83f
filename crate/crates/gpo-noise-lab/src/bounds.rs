//! Evaluable closed-form theory: the directional-concentration bound for
//! noisy class means, the finite-step generalization threshold with its
//! risk ceiling, the uncertain-noise variant, and reports comparing them
//! to Monte-Carlo sweeps.
//!
//! Everything here is a pure function of a handful of scalars, so the
//! theory side of every experiment is exactly reproducible and can be
//! pinned against frozen high-precision oracle values. With
//! `s = sqrt(log N / N)` the central quantities are
//!
//! ```text
//!   gap       = gamma/(5*(gamma+2)) - cos(phi) - 2*sqrt(delta)
//!   threshold = 1/2 - (16/gap^2 + 3/2) * ((2+gamma)/gamma) * s
//!   ceiling   = c * exp(-d*gamma^2 / (5*(2+gamma)))
//!   concen    = 1 - 5/sqrt(N) - 5*s / ((1-2*eps)*(gamma/(2+gamma)) + 2*s)
//! ```
//!
//! A finite-step-trained preference head keeps its population risk below
//! `ceiling` with probability at least `1 - 4/N - 8/(N^2 d^2)` whenever
//! the mislabel rate stays below `threshold` and the preconditions hold;
//! `concen` lower-bounds the cosine between the noisy class-mean
//! difference and the clean one under the same probability floor. Two
//! constants the theory asserts to exist without valuing — the ceiling's
//! multiplier `c` and the `O(1/d)` allowance `C` of the uncertain-noise
//! threshold — are explicit, flagged parameters (default 1), never silent.
//!
//! Vacuous values (negative thresholds, concentration bounds below -1)
//! are returned as-is with a flag, never clamped: where a bound goes
//! vacuous is itself a regime boundary worth plotting.

use crate::prefdata::PreferencePairConfig;
use crate::risk::CurveCell;
use crate::vmf::t_zero;
use crate::{LabError, Result};

/// Advisory angle condition `0 <= tan(phi) <= sqrt(log N)`.
pub const PRE_TAN_PHI: &str = "0 <= tan(phi) <= sqrt(log N)";
/// Positivity of the geometric elbow room in the threshold denominator.
pub const PRE_MARGIN_GAP: &str = "gamma/(5*(gamma+2)) - cos(phi) - 2*sqrt(delta) > 0";
/// Minimum sample count for the concentration machinery.
pub const PRE_MIN_SAMPLES: &str = "N >= 25";
/// Minimum dimension for the radial Laplace approximation.
pub const PRE_MIN_DIMENSION: &str = "d >= 64";
/// The radial mode must sit strictly above the class boundary.
pub const PRE_MODE_GAP: &str = "t_zero(gamma, d) > cos(phi)";

/// Scalar inputs shared by the threshold-style calculators.
///
/// Fields are validated individually here; joint preconditions (sample
/// count, dimension, the elbow-room gap) are checked per operation and
/// reported, not errored, so callers can inspect how close a
/// configuration sits to the valid region.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs {
    n: u64,
    d: usize,
    gamma: f64,
    phi: f64,
    delta: f64,
    epsilon: f64,
}

impl BoundInputs {
    /// Validate and build. `phi` is in radians within `[0, pi/2]`;
    /// `delta` is the sine of the maximum boundary angle, in `(0, 1)`;
    /// `epsilon` is a mislabel rate in `[0, 1]`.
    pub fn new(
        n: u64,
        d: usize,
        gamma: f64,
        phi: f64,
        delta: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(LabError::Config("sample count must be >= 1".to_string()));
        }
        if d == 0 {
            return Err(LabError::Config("dimension must be >= 1".to_string()));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(LabError::Config(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&phi) {
            return Err(LabError::Config(format!(
                "phi must lie in [0, pi/2] radians, got {phi}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(LabError::Config(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(LabError::Config(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        Ok(Self {
            n,
            d,
            gamma,
            phi,
            delta,
            epsilon,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// A bound value, or the name of the first violated hard precondition.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundValue {
    /// The evaluated bound (possibly vacuous; see the report's flag).
    Value(f64),
    /// Evaluation refused; carries the violated precondition verbatim.
    Unsatisfied(String),
}

impl BoundValue {
    /// The numeric value, if the preconditions held.
    pub fn value(&self) -> Option<f64> {
        match self {
            BoundValue::Value(v) => Some(*v),
            BoundValue::Unsatisfied(_) => None,
        }
    }

    /// The violated precondition, if evaluation was refused.
    pub fn unsatisfied_reason(&self) -> Option<&str> {
        match self {
            BoundValue::Value(_) => None,
            BoundValue::Unsatisfied(r) => Some(r),
        }
    }
}

impl std::fmt::Display for BoundValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundValue::Value(v) => write!(f, "{v}"),
            BoundValue::Unsatisfied(r) => write!(f, "unsatisfied: {r}"),
        }
    }
}

/// One named precondition with its slack (positive means satisfied, and
/// by how much).
#[derive(Debug, Clone)]
pub struct Precondition {
    pub name: &'static str,
    pub holds: bool,
    pub margin: f64,
    /// Hard preconditions gate the value; advisory ones are reported
    /// only. The angle condition is advisory because the right-angle
    /// geometry the uncertain-noise experiments run at has an unbounded
    /// tangent, and enforcing the inequality literally would empty
    /// exactly the region those experiments occupy.
    pub hard: bool,
}

/// Threshold evaluation with its precondition audit.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub value: BoundValue,
    pub preconditions: Vec<Precondition>,
    /// The guarantee holds with at least this probability:
    /// `1 - 4/N - 8/(N^2 d^2)`.
    pub probability_floor: f64,
    /// True when the value exists but is `<= 0`, i.e. the guarantee
    /// covers no noise rate at this sample count.
    pub vacuous: bool,
}

/// Which algebraic form of the threshold denominator to evaluate.
///
/// The derivation's intermediate form carries the Laplace exponent
/// `b = d*gamma^2/(5*(gamma+2))` explicitly before it cancels; keeping it
/// evaluable is a diagnostic that the published simplification is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdForm {
    #[default]
    Statement,
    Proof,
}

/// `1 - 4/N - 8/(N^2 d^2)`: the probability with which the threshold's
/// guarantee holds.
pub fn probability_floor(n: u64, d: usize) -> f64 {
    let nf = n as f64;
    let df = d as f64;
    1.0 - 4.0 / nf - 8.0 / (nf * nf * df * df)
}

fn sqrt_log_over_n(n: u64) -> f64 {
    let nf = n as f64;
    (nf.ln().max(0.0) / nf).sqrt()
}

fn threshold_from_gap(n: u64, gamma: f64, gap: f64) -> f64 {
    let s = sqrt_log_over_n(n);
    0.5 - (16.0 / (gap * gap) + 1.5) * ((2.0 + gamma) / gamma) * s
}

/// Largest guaranteed-safe mislabel rate (statement form):
///
/// ```text
///   1/2 - (16/gap^2 + 3/2) * ((2+gamma)/gamma) * sqrt(log N / N)
/// ```
///
/// with `gap = gamma/(5*(gamma+2)) - cos(phi) - 2*sqrt(delta)`. Returns
/// `Unsatisfied` with the first violated hard precondition; a negative
/// value is returned as-is with the `vacuous` flag set.
pub fn noise_threshold(inputs: &BoundInputs) -> BoundReport {
    noise_threshold_with(inputs, ThresholdForm::Statement)
}

/// [`noise_threshold`] with an explicit choice of denominator form.
pub fn noise_threshold_with(inputs: &BoundInputs, form: ThresholdForm) -> BoundReport {
    let nf = inputs.n as f64;
    let df = inputs.d as f64;
    let g = inputs.gamma;
    let sqrt_log_n = nf.ln().max(0.0).sqrt();
    let tan_phi = inputs.phi.tan();
    let cos_phi = inputs.phi.cos();
    let room = 2.0 * inputs.delta.sqrt();
    let gap = match form {
        ThresholdForm::Statement => g / (5.0 * (g + 2.0)) - cos_phi - room,
        ThresholdForm::Proof => {
            let b = df * g * g / (5.0 * (g + 2.0));
            3.0 * g / (5.0 * (g + 2.0)) - 2.0 * b / (df * g) - cos_phi - room
        }
    };
    let preconditions = vec![
        Precondition {
            name: PRE_TAN_PHI,
            holds: (0.0..=sqrt_log_n).contains(&tan_phi),
            margin: sqrt_log_n - tan_phi,
            hard: false,
        },
        Precondition {
            name: PRE_MARGIN_GAP,
            holds: gap > 0.0,
            margin: gap,
            hard: true,
        },
        Precondition {
            name: PRE_MIN_SAMPLES,
            holds: inputs.n >= 25,
            margin: nf - 25.0,
            hard: true,
        },
        Precondition {
            name: PRE_MIN_DIMENSION,
            holds: inputs.d >= 64,
            margin: df - 64.0,
            hard: true,
        },
    ];
    let probability_floor = probability_floor(inputs.n, inputs.d);
    if let Some(broken) = preconditions.iter().find(|p| p.hard && !p.holds) {
        return BoundReport {
            value: BoundValue::Unsatisfied(broken.name.to_string()),
            preconditions,
            probability_floor,
            vacuous: false,
        };
    }
    let value = threshold_from_gap(inputs.n, g, gap);
    BoundReport {
        value: BoundValue::Value(value),
        preconditions,
        probability_floor,
        vacuous: value <= 0.0,
    }
}

/// Risk ceiling `exp(-d*gamma^2 / (5*(2+gamma)))`.
///
/// The multiplicative constant `c` in `c * exp(...)` is asserted to exist
/// without a value; callers display it separately (default 1) rather than
/// baking a guess in here.
pub fn risk_bound(d: usize, gamma: f64) -> Result<f64> {
    if d < 64 {
        return Err(LabError::Precondition(format!(
            "risk ceiling requires d >= 64, got {d}"
        )));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(LabError::Precondition(format!(
            "risk ceiling requires gamma > 0, got {gamma}"
        )));
    }
    Ok((-(d as f64) * gamma * gamma / (5.0 * (2.0 + gamma))).exp())
}

/// Lower bound on the cosine between the noisy class-mean difference and
/// the clean one:
///
/// ```text
///   1 - 5/sqrt(N) - 5*s / ((1-2*eps)*(gamma/(2+gamma)) + 2*s)
/// ```
///
/// with `s = sqrt(log N / N)`; holds with probability at least
/// `1 - 4/N - 8/(N^2 d^2)`. Values at or below -1 are vacuous (every
/// cosine satisfies them); see [`concentration_is_vacuous`].
pub fn concentration_bound(n: u64, gamma: f64, epsilon: f64) -> Result<f64> {
    if n < 25 {
        return Err(LabError::Precondition(format!(
            "concentration bound requires N >= 25, got {n}"
        )));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(LabError::Config(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(LabError::Config(format!(
            "mislabel rate must lie in [0, 0.5] for the concentration bound \
             (rates above 1/2 mirror to 1 - epsilon), got {epsilon}"
        )));
    }
    let nf = n as f64;
    let s = sqrt_log_over_n(n);
    Ok(1.0 - 5.0 / nf.sqrt() - 5.0 * s / ((1.0 - 2.0 * epsilon) * (gamma / (2.0 + gamma)) + 2.0 * s))
}

/// Whether a concentration bound asks for nothing (every cosine is >= -1).
pub fn concentration_is_vacuous(bound: f64) -> bool {
    bound <= -1.0
}

/// Largest mislabel rate the concentration bound's own hypotheses cover:
/// `1/2 - (3*(2+gamma)/(2*gamma)) * sqrt(log N / N)`.
pub fn concentration_epsilon_limit(n: u64, gamma: f64) -> Result<f64> {
    if n < 25 {
        return Err(LabError::Precondition(format!(
            "concentration bound requires N >= 25, got {n}"
        )));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(LabError::Config(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    Ok(0.5 - 1.5 * (2.0 + gamma) / gamma * sqrt_log_over_n(n))
}

/// Threshold for the uncertain-noise rate: the mislabel threshold minus
/// an `O(1/d)` allowance `big_c / d`, with `big_c` a flagged, unspecified
/// constant (default 1).
///
/// Requires the radial mode to clear the class boundary,
/// `t_zero(gamma, d) > cos(phi)`; that failing is an error, not an
/// `Unsatisfied` value, because the uncertain noise model itself is
/// ill-posed there.
pub fn eps_omega_threshold(inputs: &BoundInputs, big_c: f64) -> Result<BoundReport> {
    if !(big_c >= 0.0) || !big_c.is_finite() {
        return Err(LabError::Config(format!(
            "the O(1/d) allowance constant must be finite and >= 0, got {big_c}"
        )));
    }
    let t0 = t_zero(inputs.gamma, inputs.d)?;
    let cos_phi = inputs.phi.cos();
    if t0 <= cos_phi {
        return Err(LabError::Precondition(format!(
            "{PRE_MODE_GAP} fails: t_zero = {t0:.6} vs cos(phi) = {cos_phi:.6}"
        )));
    }
    let mut report = noise_threshold(inputs);
    report.preconditions.insert(
        0,
        Precondition {
            name: PRE_MODE_GAP,
            holds: true,
            margin: t0 - cos_phi,
            hard: true,
        },
    );
    if let BoundValue::Value(v) = report.value {
        let adjusted = v - big_c / inputs.d as f64;
        report.value = BoundValue::Value(adjusted);
        report.vacuous = adjusted <= 0.0;
    }
    Ok(report)
}

/// Smallest sample count at which the (statement-form) threshold turns
/// positive for these `d, gamma, phi, delta`. Errors when no sample
/// count can help (the elbow-room gap or dimension precondition fails).
pub fn minimal_n_for_positive_threshold(inputs: &BoundInputs) -> Result<u64> {
    if inputs.d < 64 {
        return Err(LabError::Precondition(format!(
            "{PRE_MIN_DIMENSION} fails: d = {}",
            inputs.d
        )));
    }
    let g = inputs.gamma;
    let gap = g / (5.0 * (g + 2.0)) - inputs.phi.cos() - 2.0 * inputs.delta.sqrt();
    if gap <= 0.0 {
        return Err(LabError::Precondition(format!(
            "no sample count can make the threshold positive: {PRE_MARGIN_GAP} \
             fails (gap = {gap:.6})"
        )));
    }
    let positive = |n: u64| threshold_from_gap(n, g, gap) > 0.0;
    if positive(25) {
        return Ok(25);
    }
    let mut hi: u64 = 50;
    while !positive(hi) {
        if hi > (1 << 62) {
            return Err(LabError::Calibration(
                "threshold stays nonpositive below 2^62 samples".to_string(),
            ));
        }
        hi *= 2;
    }
    // log(n)/n decreases for n >= 3, so the threshold is monotone
    // increasing over the bisection range and the first positive n is
    // well defined.
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if positive(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One curve cell checked against the risk ceiling.
#[derive(Debug, Clone)]
pub struct TheoryCheck {
    pub epsilon: f64,
    /// `1 - mean_accuracy` from the sweep.
    pub empirical_risk: f64,
    /// Standard error of the sweep's mean.
    pub stderr: f64,
    /// `c * exp(-d*gamma^2/(5*(2+gamma)))`.
    pub risk_ceiling: f64,
    /// `empirical_risk <= risk_ceiling + 3 * stderr`.
    pub passed: bool,
}

/// Theory-versus-experiment comparison over one accuracy curve.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub threshold: BoundValue,
    pub probability_floor: f64,
    /// `c` times the risk ceiling, when evaluable.
    pub risk_ceiling: Option<f64>,
    /// The flagged, theory-unspecified ceiling multiplier used.
    pub c: f64,
    /// One entry per curve cell at or below the threshold.
    pub checks: Vec<TheoryCheck>,
    /// Human-readable disposition, including the explicit zero-checks and
    /// vacuous-threshold cases.
    pub note: String,
    /// When the threshold is vacuous at this `N`: the smallest `N` that
    /// would make it positive.
    pub minimal_positive_n: Option<u64>,
}

/// Check every curve cell below the threshold against the risk ceiling
/// (`empirical risk <= c * ceiling + 3 * stderr`).
///
/// The curve's generator configuration must agree with the bound inputs
/// on `(N, d, gamma, phi)`; anything else is a configuration error.
pub fn compare_theory_experiment(
    config: &PreferencePairConfig,
    curve: &[CurveCell],
    inputs: &BoundInputs,
    c: f64,
) -> Result<ComparisonReport> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(LabError::Config(format!(
            "ceiling multiplier c must be positive and finite, got {c}"
        )));
    }
    let same = config.n() as u64 == inputs.n
        && config.d() == inputs.d
        && (config.gamma() - inputs.gamma).abs() <= 1e-12
        && (config.phi() - inputs.phi).abs() <= 1e-12;
    if !same {
        return Err(LabError::Config(format!(
            "curve configuration (N = {}, d = {}, gamma = {}, phi = {}) does not \
             match bound inputs (N = {}, d = {}, gamma = {}, phi = {})",
            config.n(),
            config.d(),
            config.gamma(),
            config.phi(),
            inputs.n,
            inputs.d,
            inputs.gamma,
            inputs.phi
        )));
    }
    let report = noise_threshold(inputs);
    let risk_ceiling = risk_bound(inputs.d, inputs.gamma).ok().map(|b| c * b);
    let (checks, note, minimal_positive_n) = match &report.value {
        BoundValue::Unsatisfied(reason) => (
            Vec::new(),
            format!("threshold preconditions unsatisfied ({reason}); zero cells checked"),
            None,
        ),
        BoundValue::Value(v) if *v <= 0.0 => {
            let minimal = minimal_n_for_positive_threshold(inputs)?;
            (
                Vec::new(),
                format!(
                    "threshold vacuous at this N; the smallest N with a positive \
                     threshold is {minimal}"
                ),
                Some(minimal),
            )
        }
        BoundValue::Value(v) => {
            let ceiling = risk_ceiling.expect("ceiling evaluable whenever the threshold is");
            let checks: Vec<TheoryCheck> = curve
                .iter()
                .filter(|cell| cell.epsilon <= *v)
                .map(|cell| {
                    let empirical_risk = 1.0 - cell.mean_accuracy;
                    TheoryCheck {
                        epsilon: cell.epsilon,
                        empirical_risk,
                        stderr: cell.stderr,
                        risk_ceiling: ceiling,
                        passed: empirical_risk <= ceiling + 3.0 * cell.stderr,
                    }
                })
                .collect();
            let note = if checks.is_empty() {
                "zero cells fall at or below the threshold; nothing to check".to_string()
            } else {
                format!("{} cell(s) checked against the risk ceiling", checks.len())
            };
            (checks, note, None)
        }
    };
    Ok(ComparisonReport {
        threshold: report.value,
        probability_floor: report.probability_floor,
        risk_ceiling,
        c,
        checks,
        note,
        minimal_positive_n,
    })
}
