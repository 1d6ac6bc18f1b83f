//! Sweep orchestration: experiment-grid configuration (hand-written files
//! or presets), deterministic derived seeding, parallel trial execution,
//! and CSV emission for external plotting.
//!
//! ```text
//!   config/preset ──> SweepConfig ──> cells = loss x gamma x N x eps
//!        │                               │  (uncertain: calibrate omega
//!        │                               │   once per (gamma, eps) cell)
//!        │                               v
//!        │                 per (cell, trial): derived seed
//!        │                    ├─ generate clean pairs
//!        │                    ├─ corrupt (mislabel / uncertain)
//!        │                    ├─ train the linear preference head
//!        │                    └─ clean test set ──> accuracy
//!        v
//!   per_trial.csv  aggregate.csv  plotdata_<loss>.csv  [calibration.csv]
//! ```
//!
//! Seeding is counter-based, not sequential: every (cell, trial) derives
//! its RNG streams as
//! `stream_seed(base, [kind, loss, gamma bits, N, eps bits, trial])`,
//! with separate purpose sub-streams for data generation, noise, and test
//! data. Two consequences the tests pin down: re-running the same config
//! is byte-identical regardless of thread count, and a config holding a
//! subset of another config's cells reproduces exactly the rows of the
//! shared cells (streams depend on parameter values, never on grid
//! position).
//!
//! Trials whose training run diverges are skipped: they contribute no
//! per-trial row, and the aggregate's trial column counts only completed
//! trials. The learning rate actually used — the single most consequential
//! hyperparameter the reproduced setup leaves unstated — is recorded in
//! every row, whether fixed or auto-derived from the stability rule
//! `eta = 0.5 / (beta^2 * D * lambda_hat)`.

use crate::gpoloss::{GpoLoss, LossKind};
use crate::prefdata::{
    apply_mislabel, apply_uncertain, calibrate_omega, generate_clean, PreferencePairConfig,
    DEFAULT_N_PROBE,
};
use crate::risk::{zero_one_risk, DEFAULT_N_TEST};
use crate::trainer::{train, StopRule, TrainConfig};
use crate::util::{axpy, dot, mean_stderr, normalize, scale, stream_seed};
use crate::vmf::{t_zero, EmbeddingMatrix};
use crate::{LabError, Result};
use rayon::prelude::*;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Exact leading header of every per-trial and aggregate CSV. Uncertain
/// sweeps append `,omega` and aggregates append `,stderr`, so files always
/// *begin* with this schema.
pub const CSV_HEADER: &str = "epsilon,gamma,phi,N,d,loss,beta,lr,epochs,trial,test_accuracy,seed";

// Purpose tags for derived RNG sub-streams. Deliberately disjoint from the
// small leading tags used inside the risk module's curve estimator, so a
// harness stream can never collide with one of those.
const PURPOSE_TRAIN_DATA: u64 = 10;
const PURPOSE_NOISE: u64 = 11;
const PURPOSE_TEST_DATA: u64 = 12;
const PURPOSE_CALIBRATION: u64 = 13;
const PURPOSE_LAMBDA_PROBE: u64 = 14;

/// Which corruption process a sweep applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Independent Bernoulli label flips at each grid rate.
    Mislabel,
    /// Labels resampled from the tempered reward model, with the
    /// temperature calibrated to hit each grid rate on average.
    Uncertain,
}

impl SweepKind {
    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Mislabel => "mislabel",
            SweepKind::Uncertain => "uncertain",
        }
    }

    /// Parse the config-file spelling.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mislabel" => Ok(SweepKind::Mislabel),
            "uncertain" => Ok(SweepKind::Uncertain),
            other => Err(LabError::Config(format!(
                "unknown noise kind '{other}' (expected mislabel or uncertain)"
            ))),
        }
    }

    fn tag(&self) -> u64 {
        match self {
            SweepKind::Mislabel => 100,
            SweepKind::Uncertain => 101,
        }
    }
}

fn loss_tag(loss: LossKind) -> u64 {
    match loss {
        LossKind::Dpo => 0,
        LossKind::Ipo => 1,
        LossKind::Slic => 2,
    }
}

/// Step-size policy for the trainer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    /// Derive `eta = 0.5 / (beta^2 * D * lambda_hat)` per (gamma, loss)
    /// from a probe dataset's curvature estimate.
    Auto,
    /// Use exactly this step size everywhere.
    Fixed(f64),
}

/// The default noise grid: 0 to 1/2 in increments of 0.025.
pub fn default_eps_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 40.0).collect()
}

/// One experiment grid: the cross product of losses, concentrations (or
/// sample counts) and noise rates, replicated over trials.
///
/// Exactly one of `gammas` / `ns` may hold more than one value — the
/// reproduced panels vary one quantity at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub d: usize,
    /// Class half-angle in radians.
    pub phi: f64,
    pub gammas: Vec<f64>,
    pub ns: Vec<usize>,
    /// Mislabel rates, or calibration targets for uncertain sweeps.
    pub eps_targets: Vec<f64>,
    pub losses: Vec<LossKind>,
    pub beta: f64,
    pub learning_rate: LearningRate,
    /// Full-batch steps per training run.
    pub epochs: usize,
    pub trials: usize,
    pub n_test: usize,
    /// Probe size for omega calibration.
    pub n_probe: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kind: SweepKind::Mislabel,
            d: 512,
            phi: std::f64::consts::FRAC_PI_3,
            gammas: vec![0.5],
            ns: vec![2000],
            eps_targets: default_eps_grid(),
            losses: vec![LossKind::Dpo],
            beta: 0.1,
            learning_rate: LearningRate::Auto,
            epochs: 10,
            trials: 100,
            n_test: DEFAULT_N_TEST,
            n_probe: DEFAULT_N_PROBE,
            seed: 17,
        }
    }
}

/// Build one of the hard-coded experiment grids:
///
/// * `fig4-gamma` — mislabel noise, gamma over {1/8, 1/4, 1/2, 1, 2},
///   N = 2000, phi = pi/3, all three losses.
/// * `fig4-N` — mislabel noise, N over {200, 600, 2000}, gamma = 1/2,
///   phi = pi/3, all three losses.
/// * `fig5-uncertain` — uncertain noise, gamma over {1/8, 1/4, 1/2, 1, 2},
///   N = 2000, phi = pi/2 (which keeps the radial mode above the class
///   boundary for every gamma), all three losses.
///
/// All presets use d = 512, beta = 0.1, 10 epochs, 100 trials, a
/// 2000-sample test set, the 0..1/2 step-0.025 noise grid, and the
/// auto-derived learning rate.
pub fn preset(name: &str) -> Result<SweepConfig> {
    let all_losses = vec![LossKind::Dpo, LossKind::Ipo, LossKind::Slic];
    let gamma_grid = vec![0.125, 0.25, 0.5, 1.0, 2.0];
    match name.trim().to_ascii_lowercase().as_str() {
        "fig4-gamma" => Ok(SweepConfig {
            gammas: gamma_grid,
            losses: all_losses,
            ..SweepConfig::default()
        }),
        "fig4-n" => Ok(SweepConfig {
            gammas: vec![0.5],
            ns: vec![200, 600, 2000],
            losses: all_losses,
            ..SweepConfig::default()
        }),
        "fig5-uncertain" => Ok(SweepConfig {
            kind: SweepKind::Uncertain,
            phi: std::f64::consts::FRAC_PI_2,
            gammas: gamma_grid,
            losses: all_losses,
            ..SweepConfig::default()
        }),
        other => Err(LabError::Config(format!(
            "unknown preset '{other}'; available presets: fig4-gamma, fig4-N, fig5-uncertain"
        ))),
    }
}

const VALID_KEYS: &str =
    "kind, d, phi, gamma, N, eps, loss, beta, lr, epochs, trials, n_test, n_probe, seed";

fn parse_key_f64(key: &str, value: &str) -> Result<f64> {
    value.trim().parse::<f64>().map_err(|_| {
        LabError::Config(format!("config key '{key}': cannot parse '{value}' as a number"))
    })
}

fn parse_key_usize(key: &str, value: &str) -> Result<usize> {
    value.trim().parse::<usize>().map_err(|_| {
        LabError::Config(format!(
            "config key '{key}': cannot parse '{value}' as a nonnegative integer"
        ))
    })
}

/// Parse an angle literal: `pi`, `pi/<denominator>`, or a plain radian
/// value. Shared by the config-file `phi` key and the CLI's angle flags.
pub fn parse_angle(value: &str) -> Result<f64> {
    let v = value.trim();
    if v.eq_ignore_ascii_case("pi") {
        return Ok(std::f64::consts::PI);
    }
    if let Some(denom) = v.strip_prefix("pi/").or_else(|| v.strip_prefix("PI/")) {
        let d = parse_key_f64("phi", denom)?;
        if d == 0.0 {
            return Err(LabError::Config("config key 'phi': division by zero".to_string()));
        }
        return Ok(std::f64::consts::PI / d);
    }
    parse_key_f64("phi", v)
}

/// Apply `key = value` lines (UTF-8, `#` comments, comma-separated lists)
/// on top of `base`. Later lines override earlier ones; unknown keys fail
/// fast and list the valid keys.
pub fn parse_config(text: &str, base: SweepConfig) -> Result<SweepConfig> {
    let mut cfg = base;
    for (line_no, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(LabError::Config(format!(
                "config line {}: expected 'key = value', got '{line}'",
                line_no + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "kind" => cfg.kind = SweepKind::parse(value)?,
            "d" => cfg.d = parse_key_usize(key, value)?,
            "phi" => cfg.phi = parse_angle(value)?,
            "gamma" => {
                cfg.gammas = value
                    .split(',')
                    .map(|v| parse_key_f64(key, v))
                    .collect::<Result<_>>()?;
            }
            "N" => {
                cfg.ns = value
                    .split(',')
                    .map(|v| parse_key_usize(key, v))
                    .collect::<Result<_>>()?;
            }
            "eps" => {
                cfg.eps_targets = value
                    .split(',')
                    .map(|v| parse_key_f64(key, v))
                    .collect::<Result<_>>()?;
            }
            "loss" | "losses" => {
                cfg.losses = value
                    .split(',')
                    .map(LossKind::parse)
                    .collect::<Result<_>>()?;
            }
            "beta" => cfg.beta = parse_key_f64(key, value)?,
            "lr" => {
                cfg.learning_rate = if value.eq_ignore_ascii_case("auto") {
                    LearningRate::Auto
                } else {
                    LearningRate::Fixed(parse_key_f64(key, value)?)
                };
            }
            "epochs" => cfg.epochs = parse_key_usize(key, value)?,
            "trials" => cfg.trials = parse_key_usize(key, value)?,
            "n_test" => cfg.n_test = parse_key_usize(key, value)?,
            "n_probe" => cfg.n_probe = parse_key_usize(key, value)?,
            "seed" => {
                cfg.seed = value.trim().parse::<u64>().map_err(|_| {
                    LabError::Config(format!(
                        "config key 'seed': cannot parse '{value}' as a 64-bit unsigned integer"
                    ))
                })?;
            }
            other => {
                return Err(LabError::Config(format!(
                    "unknown config key '{other}'; valid keys: {VALID_KEYS}"
                )));
            }
        }
    }
    Ok(cfg)
}

/// Read and parse a config file on top of `base`.
pub fn load_config(path: &Path, base: SweepConfig) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, base)
}

impl SweepConfig {
    /// Check the joint invariants a parsed or hand-built grid must satisfy
    /// before any work starts. Uncertain sweeps additionally require the
    /// radial mode to clear the class boundary (`t_zero(gamma, d) >
    /// cos(phi)`) for every gamma in the grid, so an infeasible geometry
    /// is a startup error rather than a late calibration surprise.
    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(LabError::Config(format!("d must be >= 3, got {}", self.d)));
        }
        if !(self.phi > 0.0 && self.phi <= std::f64::consts::FRAC_PI_2) {
            return Err(LabError::Config(format!(
                "phi must lie in (0, pi/2] radians, got {}",
                self.phi
            )));
        }
        if self.gammas.is_empty() || self.ns.is_empty() {
            return Err(LabError::Config("gamma and N lists must be nonempty".to_string()));
        }
        if self.gammas.len() > 1 && self.ns.len() > 1 {
            return Err(LabError::Config(
                "at most one of the gamma and N lists may hold more than one value \
                 (panels vary one quantity at a time)"
                    .to_string(),
            ));
        }
        for &g in &self.gammas {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(LabError::Config(format!(
                    "gamma values must be finite and >= 0, got {g}"
                )));
            }
        }
        for &n in &self.ns {
            if n < 2 || n % 2 != 0 {
                return Err(LabError::Config(format!(
                    "N values must be even and >= 2, got {n}"
                )));
            }
        }
        if self.eps_targets.is_empty() {
            return Err(LabError::Config("eps list must be nonempty".to_string()));
        }
        let eps_max = match self.kind {
            SweepKind::Mislabel => 1.0,
            SweepKind::Uncertain => 0.5,
        };
        for &e in &self.eps_targets {
            if !(0.0..=eps_max).contains(&e) {
                return Err(LabError::Config(format!(
                    "eps values must lie in [0, {eps_max}] for {} sweeps, got {e}",
                    self.kind.name()
                )));
            }
        }
        if self.losses.is_empty() {
            return Err(LabError::Config("losses list must be nonempty".to_string()));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(LabError::Config(format!(
                "beta must be finite and > 0, got {}",
                self.beta
            )));
        }
        if let LearningRate::Fixed(lr) = self.learning_rate {
            if !(lr > 0.0) || !lr.is_finite() {
                return Err(LabError::Config(format!(
                    "fixed learning rate must be finite and > 0, got {lr}"
                )));
            }
        }
        if self.epochs == 0 {
            return Err(LabError::Config("epochs must be >= 1".to_string()));
        }
        if self.trials == 0 {
            return Err(LabError::Config("trials must be >= 1".to_string()));
        }
        if self.n_test < 2 || self.n_test % 2 != 0 {
            return Err(LabError::Config(format!(
                "n_test must be even and >= 2, got {}",
                self.n_test
            )));
        }
        if self.n_probe < 2 {
            return Err(LabError::Config(format!(
                "n_probe must be >= 2, got {}",
                self.n_probe
            )));
        }
        if self.kind == SweepKind::Uncertain {
            let cos_phi = self.phi.cos();
            for &g in &self.gammas {
                if !(g > 0.0) {
                    return Err(LabError::Config(
                        "uncertain sweeps require gamma > 0".to_string(),
                    ));
                }
                let t0 = t_zero(g, self.d)?;
                if t0 <= cos_phi {
                    return Err(LabError::Precondition(format!(
                        "uncertain sweeps require t_zero(gamma, d) > cos(phi); at gamma = {g}, \
                         d = {}: t_zero = {t0:.6} vs cos(phi) = {cos_phi:.6}",
                        self.d
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Twice the top eigenvalue of the empirical second-moment matrix
/// `(1/n) X^T X`, by power iteration — the curvature scale of the
/// two-output preference head on this data.
pub fn estimate_lambda_hat(x: &EmbeddingMatrix) -> f64 {
    let n = x.n_rows();
    let d = x.dim();
    if n == 0 || d == 0 {
        return 0.0;
    }
    // Deterministic start: the column mean, falling back to e1 when the
    // data is centered.
    let mut v = vec![0.0; d];
    for row in x.rows() {
        axpy(1.0, row, &mut v);
    }
    if normalize(&mut v) < 1e-12 {
        v = vec![0.0; d];
        v[0] = 1.0;
    }
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut w = vec![0.0; d];
        for row in x.rows() {
            let s = dot(row, &v);
            axpy(s, row, &mut w);
        }
        scale(&mut w, 2.0 / n as f64);
        let next = dot(&v, &w);
        if normalize(&mut w) < 1e-300 {
            return 0.0;
        }
        v = w;
        if (next - lambda).abs() <= 1e-12 * next.abs().max(1e-300) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// The stability default `eta = 0.5 / (beta^2 * D * lambda_hat)` — half
/// the largest step size at which full-batch descent on a loss with
/// curvature bound `D` stays contractive on data with curvature scale
/// `lambda_hat`.
pub fn default_learning_rate(beta: f64, curvature_bound: f64, lambda_hat: f64) -> Result<f64> {
    if !(beta > 0.0) || !(curvature_bound > 0.0) || !(lambda_hat > 0.0) {
        return Err(LabError::Precondition(format!(
            "learning-rate rule needs positive beta, curvature bound, and lambda_hat; \
             got {beta}, {curvature_bound}, {lambda_hat}"
        )));
    }
    Ok(0.5 / (beta * beta * curvature_bound * lambda_hat))
}

/// Resolve the step size one (gamma, loss) cell group trains at: the
/// fixed value if the config names one, otherwise the stability default
/// computed from a 2000-row probe drawn at this gamma (probe streams
/// depend only on the base seed and gamma, so the value is identical no
/// matter which other cells share the sweep).
pub fn resolve_learning_rate(cfg: &SweepConfig, gamma: f64, loss: LossKind) -> Result<f64> {
    match cfg.learning_rate {
        LearningRate::Fixed(lr) => Ok(lr),
        LearningRate::Auto => {
            let seed = stream_seed(cfg.seed, &[PURPOSE_LAMBDA_PROBE, gamma.to_bits()]);
            let probe_cfg = PreferencePairConfig::new(cfg.d, gamma, cfg.phi, 2000)?;
            let probe = generate_clean(&probe_cfg, seed)?;
            let lambda_hat = estimate_lambda_hat(probe.embeddings());
            default_learning_rate(
                cfg.beta,
                GpoLoss::new(loss, cfg.beta)?.curvature_bound(),
                lambda_hat,
            )
        }
    }
}

/// One calibration outcome within an uncertain sweep grid.
#[derive(Debug, Clone)]
pub struct CalibrationRow {
    pub gamma: f64,
    pub calibration: crate::prefdata::OmegaCalibration,
}

/// Calibrate the temperature once per (gamma, target) cell of an
/// uncertain sweep, in grid order. Unattainable targets come back
/// non-converged (at omega = 0) rather than failing; only a broken
/// bisection is an error.
pub fn calibrate_grid(cfg: &SweepConfig) -> Result<Vec<CalibrationRow>> {
    cfg.validate()?;
    if cfg.kind != SweepKind::Uncertain {
        return Err(LabError::Config(
            "omega calibration applies to uncertain sweeps only".to_string(),
        ));
    }
    let mut rows = Vec::new();
    for &gamma in &cfg.gammas {
        for &eps in &cfg.eps_targets {
            let seed = stream_seed(
                cfg.seed,
                &[PURPOSE_CALIBRATION, gamma.to_bits(), eps.to_bits()],
            );
            let probe_cfg = PreferencePairConfig::new(cfg.d, gamma, cfg.phi, cfg.ns[0])?;
            let calibration = calibrate_omega(eps, &probe_cfg, None, cfg.n_probe, seed)?;
            rows.push(CalibrationRow { gamma, calibration });
        }
    }
    Ok(rows)
}

/// Render calibration rows as the `calibration.csv` table.
pub fn calibration_csv(rows: &[CalibrationRow]) -> String {
    let mut csv = String::from("gamma,target_eps,omega,achieved_eps,floor,converged\n");
    for row in rows {
        let c = &row.calibration;
        writeln!(
            csv,
            "{},{},{},{:.16e},{:.16e},{}",
            row.gamma, c.target, c.omega, c.achieved, c.floor, c.converged
        )
        .expect("writing to a String cannot fail");
    }
    csv
}

/// One grid cell, fully resolved.
#[derive(Debug, Clone)]
struct Cell {
    loss: LossKind,
    gamma: f64,
    n: usize,
    eps: f64,
    /// Calibrated temperature (uncertain sweeps only).
    omega: Option<f64>,
    lr: f64,
}

/// One completed (or diverged) trial.
#[derive(Debug, Clone)]
struct TrialRow {
    cell: usize,
    trial: usize,
    seed: u64,
    /// `None` when the training run diverged and was discarded.
    accuracy: Option<f64>,
}

/// What `run_sweep` produced.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub cells: usize,
    /// Per-trial rows written (diverged trials excluded).
    pub rows_written: usize,
    pub diverged_trials: usize,
    pub per_trial_path: PathBuf,
    pub aggregate_path: PathBuf,
    pub plotdata_paths: Vec<PathBuf>,
    /// Present for uncertain sweeps.
    pub calibration_path: Option<PathBuf>,
}

fn run_one_trial(cfg: &SweepConfig, cell_idx: usize, cell: &Cell, trial: usize) -> Result<TrialRow> {
    let trial_seed = stream_seed(
        cfg.seed,
        &[
            cfg.kind.tag(),
            loss_tag(cell.loss),
            cell.gamma.to_bits(),
            cell.n as u64,
            cell.eps.to_bits(),
            trial as u64,
        ],
    );
    let data_cfg = PreferencePairConfig::new(cfg.d, cell.gamma, cfg.phi, cell.n)?;
    let clean = generate_clean(&data_cfg, stream_seed(trial_seed, &[PURPOSE_TRAIN_DATA]))?;
    let noise_seed = stream_seed(trial_seed, &[PURPOSE_NOISE]);
    let noisy = match cfg.kind {
        SweepKind::Mislabel => apply_mislabel(clean, cell.eps, noise_seed)?,
        SweepKind::Uncertain => {
            let omega = cell.omega.expect("uncertain cells carry a calibrated omega");
            apply_uncertain(clean, omega, noise_seed)?
        }
    };
    let train_cfg = TrainConfig::new(
        cell.lr,
        GpoLoss::new(cell.loss, cfg.beta)?,
        StopRule::FixedEpochs(cfg.epochs),
    )?;
    let accuracy = match train(&noisy, &train_cfg) {
        Ok((model, _trace)) => {
            let test_cfg = PreferencePairConfig::new(cfg.d, cell.gamma, cfg.phi, cfg.n_test)?;
            let test = generate_clean(&test_cfg, stream_seed(trial_seed, &[PURPOSE_TEST_DATA]))?;
            Some(zero_one_risk(&model, &test, true)?.accuracy())
        }
        Err(LabError::Divergence(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(TrialRow {
        cell: cell_idx,
        trial,
        seed: trial_seed,
        accuracy,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

/// Run the whole grid and write `per_trial.csv`, `aggregate.csv`, one
/// `plotdata_<loss>.csv` per loss, and (for uncertain sweeps)
/// `calibration.csv` into `out_dir`.
///
/// Cells and trials execute in a work pool; rows are emitted in canonical
/// order (cell-major, trial-minor) regardless of completion order, so the
/// files are byte-identical across reruns and thread counts.
pub fn run_sweep(cfg: &SweepConfig, out_dir: &Path) -> Result<SweepSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;

    // Calibrate omega once per (gamma, target) for uncertain sweeps. A
    // target below the geometry's floor comes back non-converged with
    // omega = 0; the cell still runs and the calibration file records the
    // shortfall.
    let mut calibration_path = None;
    let mut omega_table: HashMap<(u64, u64), f64> = HashMap::new();
    if cfg.kind == SweepKind::Uncertain {
        let rows = calibrate_grid(cfg)?;
        for row in &rows {
            omega_table.insert(
                (row.gamma.to_bits(), row.calibration.target.to_bits()),
                row.calibration.omega,
            );
        }
        let path = out_dir.join("calibration.csv");
        write_file(&path, &calibration_csv(&rows))?;
        calibration_path = Some(path);
    }

    // Resolve the learning rate once per (gamma, loss) group.
    let mut lr_table: HashMap<(u64, u64), f64> = HashMap::new();
    for &loss in &cfg.losses {
        for &gamma in &cfg.gammas {
            let lr = resolve_learning_rate(cfg, gamma, loss)?;
            lr_table.insert((gamma.to_bits(), loss_tag(loss)), lr);
        }
    }

    // Materialize the cell grid in canonical order.
    let mut cells = Vec::new();
    for &loss in &cfg.losses {
        for &gamma in &cfg.gammas {
            for &n in &cfg.ns {
                for &eps in &cfg.eps_targets {
                    cells.push(Cell {
                        loss,
                        gamma,
                        n,
                        eps,
                        omega: omega_table.get(&(gamma.to_bits(), eps.to_bits())).copied(),
                        lr: lr_table[&(gamma.to_bits(), loss_tag(loss))],
                    });
                }
            }
        }
    }

    // Every (cell, trial) is an independent task; parallel collect
    // preserves input order, which is already canonical.
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let rows: Vec<TrialRow> = tasks
        .into_par_iter()
        .map(|(c, t)| run_one_trial(cfg, c, &cells[c], t))
        .collect::<Result<_>>()?;

    let uncertain = cfg.kind == SweepKind::Uncertain;
    let mut per_trial = String::from(CSV_HEADER);
    if uncertain {
        per_trial.push_str(",omega");
    }
    per_trial.push('\n');
    let mut rows_written = 0usize;
    let mut diverged = 0usize;
    for row in &rows {
        let cell = &cells[row.cell];
        let Some(acc) = row.accuracy else {
            diverged += 1;
            continue;
        };
        write!(
            per_trial,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            cell.eps,
            cell.gamma,
            cfg.phi,
            cell.n,
            cfg.d,
            cell.loss.name(),
            cfg.beta,
            cell.lr,
            cfg.epochs,
            row.trial,
            acc,
            row.seed
        )
        .expect("writing to a String cannot fail");
        if uncertain {
            write!(per_trial, ",{}", cell.omega.unwrap()).expect("writing to a String cannot fail");
        }
        per_trial.push('\n');
        rows_written += 1;
    }
    let per_trial_path = out_dir.join("per_trial.csv");
    write_file(&per_trial_path, &per_trial)?;

    // Aggregate: mean and standard error over the completed trials of
    // each cell; the trial column holds the completed count and the seed
    // column the sweep's base seed.
    let mut aggregate = String::from(CSV_HEADER);
    if uncertain {
        aggregate.push_str(",omega");
    }
    aggregate.push_str(",stderr\n");
    for (c, cell) in cells.iter().enumerate() {
        let accs: Vec<f64> = rows
            .iter()
            .filter(|r| r.cell == c)
            .filter_map(|r| r.accuracy)
            .collect();
        let (mean, se) = mean_stderr(&accs);
        write!(
            aggregate,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            cell.eps,
            cell.gamma,
            cfg.phi,
            cell.n,
            cfg.d,
            cell.loss.name(),
            cfg.beta,
            cell.lr,
            cfg.epochs,
            accs.len(),
            mean,
            cfg.seed
        )
        .expect("writing to a String cannot fail");
        if uncertain {
            write!(aggregate, ",{}", cell.omega.unwrap())
                .expect("writing to a String cannot fail");
        }
        writeln!(aggregate, ",{se}").expect("writing to a String cannot fail");
    }
    let aggregate_path = out_dir.join("aggregate.csv");
    write_file(&aggregate_path, &aggregate)?;

    let plotdata_paths = emit_plotdata(&aggregate_path, out_dir)?;

    Ok(SweepSummary {
        cells: cells.len(),
        rows_written,
        diverged_trials: diverged,
        per_trial_path,
        aggregate_path,
        plotdata_paths,
        calibration_path,
    })
}

/// Pivot an aggregate CSV into one plot-ready file per loss: the x column
/// is epsilon (ascending), one column per series — gamma values when the
/// sweep varied gamma, N values when it varied N, a single `accuracy`
/// column otherwise — and deterministic 17-significant-digit floats.
pub fn emit_plotdata(aggregate_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(aggregate_csv)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| LabError::Format("aggregate CSV is empty".to_string()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| -> Result<usize> {
        columns.iter().position(|c| *c == name).ok_or_else(|| {
            LabError::Format(format!("aggregate CSV is missing the '{name}' column"))
        })
    };
    let (i_eps, i_gamma, i_n, i_loss, i_acc) = (
        col("epsilon")?,
        col("gamma")?,
        col("N")?,
        col("loss")?,
        col("test_accuracy")?,
    );

    struct Row {
        eps: f64,
        gamma: f64,
        n: usize,
        loss: String,
        acc: f64,
    }
    let mut rows = Vec::new();
    for (line_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let need = i_eps.max(i_gamma).max(i_n).max(i_loss).max(i_acc);
        if fields.len() <= need {
            return Err(LabError::Format(format!(
                "aggregate CSV row {} has {} fields, needs at least {}",
                line_no + 2,
                fields.len(),
                need + 1
            )));
        }
        let parse = |i: usize, what: &str| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|_| {
                LabError::Format(format!(
                    "aggregate CSV row {}: cannot parse {what} '{}'",
                    line_no + 2,
                    fields[i]
                ))
            })
        };
        rows.push(Row {
            eps: parse(i_eps, "epsilon")?,
            gamma: parse(i_gamma, "gamma")?,
            n: parse(i_n, "N")? as usize,
            loss: fields[i_loss].to_string(),
            acc: parse(i_acc, "test_accuracy")?,
        });
    }

    // Series choice mirrors the one-variable-at-a-time invariant.
    let mut gammas: Vec<f64> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    let mut epsilons: Vec<f64> = Vec::new();
    let mut losses: Vec<String> = Vec::new();
    for r in &rows {
        if !gammas.iter().any(|&g| g == r.gamma) {
            gammas.push(r.gamma);
        }
        if !ns.contains(&r.n) {
            ns.push(r.n);
        }
        if !epsilons.iter().any(|&e| e == r.eps) {
            epsilons.push(r.eps);
        }
        if !losses.contains(&r.loss) {
            losses.push(r.loss.clone());
        }
    }
    gammas.sort_by(|a, b| a.total_cmp(b));
    ns.sort_unstable();
    epsilons.sort_by(|a, b| a.total_cmp(b));

    enum Series {
        Gamma(Vec<f64>),
        N(Vec<usize>),
        Single,
    }
    let series = if gammas.len() > 1 {
        Series::Gamma(gammas)
    } else if ns.len() > 1 {
        Series::N(ns)
    } else {
        Series::Single
    };

    let mut paths = Vec::new();
    for loss in &losses {
        let mut csv = String::from("epsilon");
        match &series {
            Series::Gamma(gs) => {
                for g in gs {
                    write!(csv, ",gamma={g}").expect("writing to a String cannot fail");
                }
            }
            Series::N(ns) => {
                for n in ns {
                    write!(csv, ",N={n}").expect("writing to a String cannot fail");
                }
            }
            Series::Single => csv.push_str(",accuracy"),
        }
        csv.push('\n');
        for &eps in &epsilons {
            write!(csv, "{eps:.16e}").expect("writing to a String cannot fail");
            let mut cell = |pick: &dyn Fn(&Row) -> bool| -> Result<()> {
                let acc = rows
                    .iter()
                    .find(|r| r.loss == *loss && r.eps == eps && pick(r))
                    .map(|r| r.acc)
                    .ok_or_else(|| {
                        LabError::Format(format!(
                            "aggregate CSV has no row for loss {loss} at epsilon = {eps}"
                        ))
                    })?;
                write!(csv, ",{acc:.16e}").expect("writing to a String cannot fail");
                Ok(())
            };
            match &series {
                Series::Gamma(gs) => {
                    for &g in gs {
                        cell(&|r: &Row| r.gamma == g)?;
                    }
                }
                Series::N(ns) => {
                    for &n in ns {
                        cell(&|r: &Row| r.n == n)?;
                    }
                }
                Series::Single => cell(&|_: &Row| true)?,
            }
            csv.push('\n');
        }
        let path = out_dir.join(format!("plotdata_{loss}.csv"));
        write_file(&path, &csv)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vmf::{sample_vmf, VmfParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
    use tempfile::tempdir;

    fn tiny_config() -> SweepConfig {
        SweepConfig {
            kind: SweepKind::Mislabel,
            d: 16,
            phi: FRAC_PI_3,
            gammas: vec![1.0],
            ns: vec![40],
            eps_targets: vec![0.0, 0.5],
            losses: vec![LossKind::Dpo],
            beta: 0.1,
            learning_rate: LearningRate::Fixed(0.05),
            epochs: 3,
            trials: 2,
            n_test: 40,
            n_probe: 1000,
            seed: 7,
        }
    }

    #[test]
    fn config_parser_applies_keys_comments_and_lists() {
        let text = "\
# a comment line
kind = mislabel
d = 64          # trailing comment
phi = pi/2
gamma = 0.125, 0.5, 2
N = 200
eps = 0, 0.25, 0.5
losses = dpo, slic
beta = 0.2
lr = 0.01
epochs = 5
trials = 3
n_test = 100
n_probe = 500
seed = 99
";
        let cfg = parse_config(text, SweepConfig::default()).unwrap();
        assert_eq!(cfg.kind, SweepKind::Mislabel);
        assert_eq!(cfg.d, 64);
        assert!((cfg.phi - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(cfg.gammas, vec![0.125, 0.5, 2.0]);
        assert_eq!(cfg.ns, vec![200]);
        assert_eq!(cfg.eps_targets, vec![0.0, 0.25, 0.5]);
        assert_eq!(cfg.losses, vec![LossKind::Dpo, LossKind::Slic]);
        assert_eq!(cfg.beta, 0.2);
        assert_eq!(cfg.learning_rate, LearningRate::Fixed(0.01));
        assert_eq!((cfg.epochs, cfg.trials, cfg.n_test, cfg.n_probe), (5, 3, 100, 500));
        assert_eq!(cfg.seed, 99);
        // Later lines override earlier ones.
        let cfg = parse_config("seed = 1\nseed = 2\n", SweepConfig::default()).unwrap();
        assert_eq!(cfg.seed, 2);
        // lr accepts the auto sentinel.
        let cfg = parse_config("lr = auto\n", SweepConfig::default()).unwrap();
        assert_eq!(cfg.learning_rate, LearningRate::Auto);
    }

    #[test]
    fn config_parser_fails_fast_with_the_valid_key_list() {
        match parse_config("epochz = 10\n", SweepConfig::default()) {
            Err(LabError::Config(msg)) => {
                assert!(msg.contains("unknown config key 'epochz'"), "message: {msg}");
                assert!(msg.contains("n_probe"), "message should list valid keys: {msg}");
            }
            other => panic!("expected a config error, got {other:?}"),
        }
        assert!(parse_config("just words\n", SweepConfig::default()).is_err());
        assert!(parse_config("d = twelve\n", SweepConfig::default()).is_err());
        assert!(parse_config("kind = gaussian\n", SweepConfig::default()).is_err());
    }

    #[test]
    fn presets_encode_the_published_grids() {
        let g = preset("fig4-gamma").unwrap();
        assert_eq!(g.kind, SweepKind::Mislabel);
        assert_eq!(g.gammas, vec![0.125, 0.25, 0.5, 1.0, 2.0]);
        assert_eq!(g.ns, vec![2000]);
        assert!((g.phi - FRAC_PI_3).abs() < 1e-15);
        assert_eq!(g.eps_targets.len(), 21);
        assert_eq!(g.losses.len(), 3);
        assert_eq!((g.d, g.epochs, g.trials, g.n_test), (512, 10, 100, 2000));
        assert_eq!(g.beta, 0.1);
        // 3 losses x 5 gammas x 21 rates x 100 trials.
        assert_eq!(g.losses.len() * g.gammas.len() * g.eps_targets.len() * g.trials, 31_500);

        let n = preset("fig4-N").unwrap();
        assert_eq!(n.gammas, vec![0.5]);
        assert_eq!(n.ns, vec![200, 600, 2000]);

        let u = preset("fig5-uncertain").unwrap();
        assert_eq!(u.kind, SweepKind::Uncertain);
        assert!((u.phi - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(u.gammas.len(), 5);
        u.validate().expect("the uncertain preset must pass its own startup gate");

        match preset("fig6") {
            Err(LabError::Config(msg)) => assert!(msg.contains("fig4-gamma")),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_inconsistent_grids() {
        let mut cfg = tiny_config();
        cfg.gammas = vec![0.5, 1.0];
        cfg.ns = vec![200, 400];
        assert!(cfg.validate().is_err(), "two lists varying at once");

        let mut cfg = tiny_config();
        cfg.ns = vec![41];
        assert!(cfg.validate().is_err(), "odd N");

        let mut cfg = tiny_config();
        cfg.losses.clear();
        assert!(cfg.validate().is_err(), "no losses");

        let mut cfg = tiny_config();
        cfg.kind = SweepKind::Uncertain;
        cfg.eps_targets = vec![0.7];
        assert!(cfg.validate().is_err(), "uncertain target above 1/2");

        let mut cfg = tiny_config();
        cfg.n_test = 41;
        assert!(cfg.validate().is_err(), "odd test count");
    }

    #[test]
    fn uncertain_validation_gates_on_the_mode_boundary_condition() {
        // t_zero(1, 512) = 0.416 < cos(pi/3) = 0.5: infeasible geometry
        // must fail at startup with an actionable message.
        let mut cfg = tiny_config();
        cfg.kind = SweepKind::Uncertain;
        cfg.d = 512;
        cfg.phi = FRAC_PI_3;
        cfg.gammas = vec![1.0];
        match cfg.validate() {
            Err(LabError::Precondition(msg)) => {
                assert!(msg.contains("t_zero"), "message: {msg}");
            }
            other => panic!("expected a precondition error, got {other:?}"),
        }
        // The same gamma clears the boundary at phi = pi/2.
        cfg.phi = FRAC_PI_2;
        cfg.validate().unwrap();
    }

    #[test]
    fn lambda_hat_matches_a_hand_diagonalizable_case() {
        // Rows e1, e1, e2: (1/3) X^T X = diag(2/3, 1/3), so the estimate
        // is exactly 4/3.
        let data = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let x = EmbeddingMatrix::new(3, 2, data).unwrap();
        let lh = estimate_lambda_hat(&x);
        assert!((lh - 4.0 / 3.0).abs() < 1e-9, "lambda_hat = {lh}");
    }

    #[test]
    fn lambda_hat_tracks_concentration_on_the_sphere() {
        // Uniform d = 64: second moment = I/64, so lambda_hat is near
        // 2/64 (finite-sample top eigenvalue runs slightly high).
        let mut mu = vec![0.0; 64];
        mu[0] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = VmfParams::from_gamma(mu.clone(), 0.0).unwrap();
        let uniform = sample_vmf(&params, 4000, &mut rng).unwrap();
        let lh_uniform = estimate_lambda_hat(&uniform);
        assert!(
            lh_uniform > 0.8 * 2.0 / 64.0 && lh_uniform < 1.6 * 2.0 / 64.0,
            "lambda_hat = {lh_uniform}"
        );
        // Strong concentration pushes mass onto one axis: the top
        // eigenvalue grows but can never exceed the unit row norm.
        let params = VmfParams::from_gamma(mu, 2.0).unwrap();
        let concentrated = sample_vmf(&params, 4000, &mut rng).unwrap();
        let lh_conc = estimate_lambda_hat(&concentrated);
        assert!(lh_conc > lh_uniform && lh_conc <= 2.0, "lambda_hat = {lh_conc}");
    }

    #[test]
    fn learning_rate_rule_and_resolution() {
        // 0.5 / (0.1^2 * 0.25 * 2) = 100, up to the rounding of 0.1^2.
        assert!((default_learning_rate(0.1, 0.25, 2.0).unwrap() - 100.0).abs() < 1e-12);
        assert!(default_learning_rate(0.1, 0.25, 0.0).is_err());
        let cfg = tiny_config();
        // Fixed passes through untouched.
        assert_eq!(resolve_learning_rate(&cfg, 1.0, LossKind::Dpo).unwrap(), 0.05);
        // Auto is positive, deterministic, and loss-dependent through the
        // curvature bound: DPO (D = 1/4) trains 8x hotter than IPO (D = 2).
        let mut auto_cfg = cfg;
        auto_cfg.learning_rate = LearningRate::Auto;
        let dpo = resolve_learning_rate(&auto_cfg, 1.0, LossKind::Dpo).unwrap();
        let ipo = resolve_learning_rate(&auto_cfg, 1.0, LossKind::Ipo).unwrap();
        assert!(dpo > 0.0 && ipo > 0.0);
        assert!((dpo / ipo - 8.0).abs() < 1e-9);
        let again = resolve_learning_rate(&auto_cfg, 1.0, LossKind::Dpo).unwrap();
        assert_eq!(dpo, again);
    }

    #[test]
    fn tiny_sweep_writes_the_contracted_files() {
        let dir = tempdir().unwrap();
        let cfg = tiny_config();
        let summary = run_sweep(&cfg, dir.path()).unwrap();
        assert_eq!(summary.cells, 2);
        assert_eq!(summary.rows_written, 4);
        assert_eq!(summary.diverged_trials, 0);

        let per_trial = std::fs::read_to_string(&summary.per_trial_path).unwrap();
        let lines: Vec<&str> = per_trial.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5, "header + 2 cells x 2 trials");

        let aggregate = std::fs::read_to_string(&summary.aggregate_path).unwrap();
        let alines: Vec<&str> = aggregate.lines().collect();
        assert_eq!(alines[0], format!("{CSV_HEADER},stderr"));
        assert_eq!(alines.len(), 3, "header + 2 cells");

        // The aggregate mean is the arithmetic mean of the per-trial
        // accuracies, bit for bit (both are printed round-trip exact).
        for (c, aline) in alines[1..].iter().enumerate() {
            let afields: Vec<&str> = aline.split(',').collect();
            assert_eq!(afields[9], "2", "trial column counts completed trials");
            assert_eq!(afields[11], "7", "seed column holds the base seed");
            let accs: Vec<f64> = lines[1..]
                .iter()
                .map(|l| l.split(',').collect::<Vec<_>>())
                .filter(|f| f[0] == afields[0])
                .map(|f| f[10].parse::<f64>().unwrap())
                .collect();
            assert_eq!(accs.len(), 2);
            let mean: f64 = accs.iter().sum::<f64>() / 2.0;
            assert_eq!(
                afields[10].parse::<f64>().unwrap(),
                mean,
                "aggregate mean mismatch in cell {c}"
            );
        }

        // Single-series sweep: the pivot has exactly two columns.
        assert_eq!(summary.plotdata_paths.len(), 1);
        let plot = std::fs::read_to_string(&summary.plotdata_paths[0]).unwrap();
        let plines: Vec<&str> = plot.lines().collect();
        assert_eq!(plines[0], "epsilon,accuracy");
        assert_eq!(plines.len(), 3, "header + 2 epsilon rows");
    }

    #[test]
    fn rerunning_the_same_config_is_byte_identical() {
        let cfg = tiny_config();
        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        run_sweep(&cfg, dir_a.path()).unwrap();
        run_sweep(&cfg, dir_b.path()).unwrap();
        for name in ["per_trial.csv", "aggregate.csv", "plotdata_dpo.csv"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn cells_are_independent_of_the_surrounding_grid() {
        // Running only the eps = 0.5 cell reproduces exactly the rows that
        // cell had inside the larger sweep: streams derive from parameter
        // values, not grid positions.
        let full = tiny_config();
        let mut solo = tiny_config();
        solo.eps_targets = vec![0.5];
        let dir_full = tempdir().unwrap();
        let dir_solo = tempdir().unwrap();
        run_sweep(&full, dir_full.path()).unwrap();
        run_sweep(&solo, dir_solo.path()).unwrap();
        let full_rows = std::fs::read_to_string(dir_full.path().join("per_trial.csv")).unwrap();
        let solo_rows = std::fs::read_to_string(dir_solo.path().join("per_trial.csv")).unwrap();
        let from_full: Vec<&str> = full_rows
            .lines()
            .skip(1)
            .filter(|l| l.starts_with("0.5,"))
            .collect();
        let from_solo: Vec<&str> = solo_rows.lines().skip(1).collect();
        assert_eq!(from_full, from_solo);
    }

    #[test]
    fn uncertain_sweep_calibrates_and_records_omega() {
        let dir = tempdir().unwrap();
        let mut cfg = tiny_config();
        cfg.kind = SweepKind::Uncertain;
        cfg.d = 64;
        cfg.phi = FRAC_PI_2;
        cfg.gammas = vec![2.0];
        cfg.eps_targets = vec![0.0, 0.5];
        cfg.trials = 1;
        cfg.n_probe = 2000;
        let summary = run_sweep(&cfg, dir.path()).unwrap();

        let cal = std::fs::read_to_string(summary.calibration_path.as_ref().unwrap()).unwrap();
        let clines: Vec<&str> = cal.lines().collect();
        assert_eq!(clines[0], "gamma,target_eps,omega,achieved_eps,floor,converged");
        assert_eq!(clines.len(), 3);
        // Target 0 calibrates to the zero-temperature limit; target 1/2 to
        // the fair-coin sentinel.
        let row0: Vec<&str> = clines[1].split(',').collect();
        assert_eq!((row0[1], row0[2], row0[5]), ("0", "0", "true"));
        let row1: Vec<&str> = clines[2].split(',').collect();
        assert_eq!((row1[1], row1[2], row1[5]), ("0.5", "inf", "true"));

        let per_trial = std::fs::read_to_string(&summary.per_trial_path).unwrap();
        let lines: Vec<&str> = per_trial.lines().collect();
        assert_eq!(lines[0], format!("{CSV_HEADER},omega"));
        assert!(lines[1].ends_with(",0"), "omega column: {}", lines[1]);
        assert!(lines[2].ends_with(",inf"), "omega column: {}", lines[2]);
    }

    #[test]
    fn plotdata_pivots_and_unpivots_losslessly() {
        let dir = tempdir().unwrap();
        let mut cfg = tiny_config();
        cfg.gammas = vec![2.0, 0.5]; // deliberately unsorted
        cfg.eps_targets = vec![0.0, 0.2];
        cfg.trials = 1;
        let summary = run_sweep(&cfg, dir.path()).unwrap();

        let plot = std::fs::read_to_string(&summary.plotdata_paths[0]).unwrap();
        let plines: Vec<&str> = plot.lines().collect();
        assert_eq!(plines[0], "epsilon,gamma=0.5,gamma=2", "series sorted ascending");
        assert_eq!(plines.len(), 3);

        // Un-pivot and compare against the aggregate rows.
        let aggregate = std::fs::read_to_string(&summary.aggregate_path).unwrap();
        let mut expected: Vec<(f64, f64, f64)> = aggregate
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (
                    f[0].parse().unwrap(),
                    f[1].parse().unwrap(),
                    f[10].parse().unwrap(),
                )
            })
            .collect();
        let mut unpivoted = Vec::new();
        for line in &plines[1..] {
            let f: Vec<&str> = line.split(',').collect();
            let eps: f64 = f[0].parse().unwrap();
            unpivoted.push((eps, 0.5, f[1].parse::<f64>().unwrap()));
            unpivoted.push((eps, 2.0, f[2].parse::<f64>().unwrap()));
        }
        let key = |t: &(f64, f64, f64)| (t.0.to_bits(), t.1.to_bits());
        expected.sort_by_key(key);
        unpivoted.sort_by_key(key);
        assert_eq!(expected.len(), unpivoted.len());
        for (e, u) in expected.iter().zip(&unpivoted) {
            assert_eq!(key(e), key(u));
            assert_eq!(e.2, u.2, "accuracy must survive the pivot round trip exactly");
        }

        // A file with the schema stripped is rejected for the missing
        // columns, not silently mis-pivoted.
        let broken = dir.path().join("broken.csv");
        std::fs::write(&broken, "a,b,c\n1,2,3\n").unwrap();
        match emit_plotdata(&broken, dir.path()) {
            Err(LabError::Format(msg)) => assert!(msg.contains("missing")),
            other => panic!("expected a format error, got {other:?}"),
        }
    }
}
