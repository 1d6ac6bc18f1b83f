//! Finite-step gradient descent for the linear preference head, the
//! reward-margin dynamics oracle, and the boundary-budget stopping rule.
//!
//! Descent runs on the two-output weight matrix `W` (one row per response
//! token). For a fixed token pair the loss depends on `W` only through the
//! row difference `w`, and because the one-hot token difference has squared
//! norm 2, a `W`-space step of size `eta` moves the row difference by twice
//! the `w`-gradient:
//!
//! ```text
//!     w  <-  w - 2 eta * (1/N) sum_i f'(r_i) beta s~_i x_i
//! ```
//!
//! The same factor shows up in the margin dynamics (the `2 s~_j s~_i` term
//! of [`margin_dynamics_step`]) and in the stability rule, which bounds the
//! safe learning rate by `1/(beta^2 D lambda)` with `lambda` the largest
//! eigenvalue of the sample second-moment matrix *scaled by 2*.
//!
//! Continuous "flow time" is identified with `steps * eta * tau`, so the
//! boundary budget `delta * tau / (4 beta^2 D)` translates to
//! `floor(delta / (4 eta beta^2 D))` steps independently of `tau`.

use crate::gpoloss::{batch_loss_and_gradient, reward_margin, GpoLoss, LinearPreferenceModel};
use crate::prefdata::PreferenceDataset;
use crate::util::{axpy, dot, norm};
use crate::{LabError, Result};

/// Gradient evaluation granularity. Only full-batch descent is offered: the
/// theory is stated for gradient flow, and full-batch descent is its natural
/// discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchMode {
    #[default]
    FullBatch,
}

/// When to stop training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run exactly this many full-batch steps (one step per epoch).
    FixedEpochs(usize),
    /// Run until the elapsed flow time reaches `delta * tau / (4 beta^2 D)`,
    /// the budget under which the decision boundary tilts by at most
    /// `arcsin(delta)` from its initial direction.
    BoundaryBudget { delta: f64 },
}

/// Everything needed to run one training job.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    learning_rate: f64,
    batch_mode: BatchMode,
    loss: GpoLoss,
    stop_rule: StopRule,
    probe_indices: Vec<usize>,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, loss: GpoLoss, stop_rule: StopRule) -> Result<Self> {
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(LabError::Config(format!(
                "learning rate must be finite and >= 0, got {learning_rate}"
            )));
        }
        match stop_rule {
            StopRule::FixedEpochs(e) if e == 0 => {
                return Err(LabError::Config("epoch count must be >= 1".to_string()))
            }
            StopRule::BoundaryBudget { delta } if !(delta > 0.0 && delta < 1.0) => {
                return Err(LabError::Config(format!(
                    "boundary budget delta must lie in (0, 1), got {delta}"
                )))
            }
            StopRule::BoundaryBudget { .. } if learning_rate == 0.0 => {
                return Err(LabError::Config(
                    "boundary budget needs a positive learning rate".to_string(),
                ))
            }
            _ => {}
        }
        Ok(Self {
            learning_rate,
            batch_mode: BatchMode::FullBatch,
            loss,
            stop_rule,
            probe_indices: Vec::new(),
        })
    }

    /// Record per-step reward margins of these dataset rows in the trace.
    pub fn with_probe(mut self, indices: Vec<usize>) -> Self {
        self.probe_indices = indices;
        self
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn batch_mode(&self) -> BatchMode {
        self.batch_mode
    }

    pub fn loss(&self) -> &GpoLoss {
        &self.loss
    }

    pub fn stop_rule(&self) -> StopRule {
        self.stop_rule
    }

    /// Number of full-batch steps the stop rule allows.
    pub fn steps(&self) -> Result<usize> {
        match self.stop_rule {
            StopRule::FixedEpochs(e) => Ok(e),
            StopRule::BoundaryBudget { delta } => {
                let loss = &self.loss;
                let raw = delta
                    / (4.0 * self.learning_rate * loss.beta() * loss.beta()
                        * loss.curvature_bound());
                if !raw.is_finite() || raw > 1e7 {
                    return Err(LabError::Config(format!(
                        "boundary budget asks for {raw:.3e} steps; raise the learning rate \
                         or lower delta"
                    )));
                }
                // The nudge absorbs floating-point slop when the budget lands
                // exactly on a step boundary (e.g. 199.99999999999997 must
                // count as 200 steps, not 199).
                Ok((raw + 1e-9).floor() as usize)
            }
        }
    }
}

/// Step-by-step record of one training run.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    /// Full-batch loss at each visited weight vector (length steps + 1).
    pub losses: Vec<f64>,
    /// Reward margins of the probe rows at each visited weight vector
    /// (length steps + 1; inner length = probe size).
    pub probe_margins: Vec<Vec<f64>>,
}

impl TrainTrace {
    /// Number of gradient steps the run actually took.
    pub fn steps(&self) -> usize {
        self.losses.len() - 1
    }

    /// Export as CSV with columns `step,loss,probe_margin` (one row per
    /// step per probe entry; runs without a probe write an empty margin).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,loss,probe_margin")?;
        for (step, loss) in self.losses.iter().enumerate() {
            if self.probe_margins[step].is_empty() {
                writeln!(w, "{step},{loss},")?;
            } else {
                for m in &self.probe_margins[step] {
                    writeln!(w, "{step},{loss},{m}")?;
                }
            }
        }
        Ok(())
    }
}

/// Train a fresh zero-initialized head on the dataset's noisy labels.
///
/// Returns the final model and the per-step trace. Aborts with a divergence
/// error if the full-batch loss ever exceeds 10x its initial value (the
/// stability rule above keeps well-configured runs far from this guard).
pub fn train(ds: &PreferenceDataset, cfg: &TrainConfig) -> Result<(LinearPreferenceModel, TrainTrace)> {
    if ds.n() == 0 {
        return Err(LabError::Precondition("empty dataset".to_string()));
    }
    if let Some(&bad) = cfg.probe_indices.iter().find(|&&i| i >= ds.n()) {
        return Err(LabError::Dimension(format!(
            "probe index {bad} out of range for {} rows",
            ds.n()
        )));
    }
    let steps = cfg.steps()?;
    let eta = cfg.learning_rate();
    let mut model = LinearPreferenceModel::zeros(ds.d(), cfg.loss().beta())?;
    let mut losses = Vec::with_capacity(steps + 1);
    let mut probe_margins = Vec::with_capacity(steps + 1);
    let mut initial_loss = f64::INFINITY;
    for step in 0..=steps {
        let (loss, grad) = batch_loss_and_gradient(cfg.loss(), &model, ds)?;
        if step == 0 {
            initial_loss = loss;
        } else if loss > 10.0 * initial_loss {
            return Err(LabError::Divergence(format!(
                "loss {loss:.6e} exceeded 10x the initial loss {initial_loss:.6e} at step \
                 {step}; the learning rate is above the stability limit"
            )));
        }
        losses.push(loss);
        probe_margins.push(
            cfg.probe_indices
                .iter()
                .map(|&i| {
                    reward_margin(&model, ds.x(i), ds.noisy_orientation()[i])
                        .expect("probe indices validated above")
                })
                .collect(),
        );
        if step < steps {
            // W-space descent moves the row difference by twice the
            // w-gradient; see the module docs.
            axpy(-2.0 * eta, &grad, model.w_mut());
        }
    }
    Ok((
        model,
        TrainTrace {
            losses,
            probe_margins,
        },
    ))
}

/// Instantaneous reward-margin velocity (in flow-time units, i.e. already
/// multiplied by `tau`) of a probe sample under the current model:
///
/// ```text
///     -(1/N) sum_i beta^2 f'(r_i) * 2 s~_j s~_i * (x_j^T x_i)
/// ```
///
/// One discrete training step changes the probe margin by exactly
/// `eta * margin_dynamics_step` (the margin is linear in `w`), which is what
/// ties the trained trajectory to the gradient-flow analysis.
pub fn margin_dynamics_step(
    ds: &PreferenceDataset,
    model: &LinearPreferenceModel,
    loss: &GpoLoss,
    probe_x: &[f64],
    probe_orientation: i8,
) -> Result<f64> {
    if ds.n() == 0 {
        return Err(LabError::Precondition("empty dataset".to_string()));
    }
    if probe_x.len() != model.d() || ds.d() != model.d() {
        return Err(LabError::Dimension(format!(
            "probe dimension {} / dataset dimension {} vs model dimension {}",
            probe_x.len(),
            ds.d(),
            model.d()
        )));
    }
    let beta = model.beta();
    let s_j = probe_orientation as f64;
    let n = ds.n() as f64;
    let mut v = 0.0;
    for i in 0..ds.n() {
        let s_i = ds.noisy_orientation()[i] as f64;
        let x_i = ds.x(i);
        let r_i = beta * s_i * dot(model.w(), x_i);
        v -= beta * beta * loss.f_prime(r_i) * 2.0 * s_j * s_i * dot(probe_x, x_i);
    }
    Ok(v / n)
}

/// Flow-time budget `delta * tau / (4 beta^2 D)` under which the decision
/// boundary stays within `arcsin(delta)` of its initial direction.
pub fn boundary_time(delta: f64, tau: f64, beta: f64, curvature_bound: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::Precondition(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(tau > 0.0) || !(beta > 0.0) || !(curvature_bound > 0.0) {
        return Err(LabError::Precondition(format!(
            "tau, beta, and the curvature bound must be positive (got {tau}, {beta}, \
             {curvature_bound})"
        )));
    }
    Ok(delta * tau / (4.0 * beta * beta * curvature_bound))
}

/// Angle in radians between the weight directions of two models.
pub fn boundary_angle(a: &LinearPreferenceModel, b: &LinearPreferenceModel) -> Result<f64> {
    let (na, nb) = (norm(a.w()), norm(b.w()));
    if na == 0.0 || nb == 0.0 {
        return Err(LabError::Precondition(
            "boundary angle is undefined for a zero weight vector".to_string(),
        ));
    }
    let c = dot(a.w(), b.w()) / (na * nb);
    Ok(c.clamp(-1.0, 1.0).acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpoloss::LossKind;
    use crate::prefdata::{
        apply_mislabel, generate_clean, NoiseKind, NoiseMeta, PreferenceDataset,
        PreferencePairConfig,
    };
    use crate::vmf::EmbeddingMatrix;

    fn small_ds(seed: u64) -> PreferenceDataset {
        let c = PreferencePairConfig::new(16, 1.0, 1.0, 40).unwrap();
        apply_mislabel(generate_clean(&c, seed).unwrap(), 0.2, seed + 1).unwrap()
    }

    fn dpo(beta: f64) -> GpoLoss {
        GpoLoss::new(LossKind::Dpo, beta).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::new(-0.1, dpo(1.0), StopRule::FixedEpochs(1)).is_err());
        assert!(TrainConfig::new(0.1, dpo(1.0), StopRule::FixedEpochs(0)).is_err());
        assert!(TrainConfig::new(0.1, dpo(1.0), StopRule::BoundaryBudget { delta: 0.0 }).is_err());
        assert!(TrainConfig::new(0.1, dpo(1.0), StopRule::BoundaryBudget { delta: 1.0 }).is_err());
        assert!(TrainConfig::new(0.0, dpo(1.0), StopRule::BoundaryBudget { delta: 0.5 }).is_err());
        assert!(TrainConfig::new(0.0, dpo(1.0), StopRule::FixedEpochs(3)).is_ok());
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let ds = small_ds(1);
        let cfg = TrainConfig::new(0.0, dpo(0.5), StopRule::FixedEpochs(5)).unwrap();
        let (model, trace) = train(&ds, &cfg).unwrap();
        assert!(model.w().iter().all(|&v| v == 0.0));
        assert_eq!(trace.losses.len(), 6);
        for l in &trace.losses {
            assert_eq!(*l, trace.losses[0]);
        }
    }

    #[test]
    fn first_step_matches_the_closed_form() {
        // From w = 0 every margin is 0, so one W-space step moves the row
        // difference by exactly -2 eta beta f'(0) mean(s~ x).
        let ds = small_ds(3);
        let eta = 0.07;
        for kind in [LossKind::Dpo, LossKind::Ipo, LossKind::Slic] {
            let loss = GpoLoss::new(kind, 0.3).unwrap();
            let cfg = TrainConfig::new(eta, loss, StopRule::FixedEpochs(1)).unwrap();
            let (model, _) = train(&ds, &cfg).unwrap();
            let n = ds.n() as f64;
            let mut mean_sx = vec![0.0; ds.d()];
            for i in 0..ds.n() {
                let s = ds.noisy_orientation()[i] as f64;
                for (m, v) in mean_sx.iter_mut().zip(ds.x(i)) {
                    *m += s * v / n;
                }
            }
            let coeff = -2.0 * eta * 0.3 * loss.f_prime(0.0);
            for (got, m) in model.w().iter().zip(&mean_sx) {
                assert!(
                    (got - coeff * m).abs() < 1e-15,
                    "{kind:?}: {got} vs {}",
                    coeff * m
                );
            }
        }
    }

    #[test]
    fn loss_decreases_strictly_on_clean_separable_data() {
        let c = PreferencePairConfig::new(64, 2.0, 1.0, 200).unwrap();
        let ds = generate_clean(&c, 5).unwrap();
        let cfg = TrainConfig::new(1.0, dpo(0.1), StopRule::FixedEpochs(10)).unwrap();
        let (_, trace) = train(&ds, &cfg).unwrap();
        for k in 1..trace.losses.len() {
            assert!(
                trace.losses[k] < trace.losses[k - 1],
                "loss did not decrease at step {k}: {} -> {}",
                trace.losses[k - 1],
                trace.losses[k]
            );
        }
    }

    #[test]
    fn loss_is_non_increasing_below_the_stability_limit() {
        // Unit-norm rows bound the doubled second-moment eigenvalue by 2,
        // so eta < 1/(2 beta^2 D) is always safe.
        let ds = small_ds(7);
        for kind in [LossKind::Dpo, LossKind::Ipo, LossKind::Slic] {
            let loss = GpoLoss::new(kind, 0.2).unwrap();
            let eta = 0.9 / (2.0 * 0.04 * loss.curvature_bound());
            let cfg = TrainConfig::new(eta, loss, StopRule::FixedEpochs(30)).unwrap();
            let (_, trace) = train(&ds, &cfg).unwrap();
            for k in 1..trace.losses.len() {
                assert!(
                    trace.losses[k] <= trace.losses[k - 1] + 1e-12,
                    "{kind:?} increased at step {k}"
                );
            }
        }
    }

    #[test]
    fn divergence_guard_trips_on_oversized_steps() {
        let ds = small_ds(9);
        let ipo = GpoLoss::new(LossKind::Ipo, 1.0).unwrap();
        let cfg = TrainConfig::new(1e4, ipo, StopRule::FixedEpochs(200)).unwrap();
        match train(&ds, &cfg) {
            Err(LabError::Divergence(_)) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn boundary_budget_step_count() {
        // delta / (4 eta beta^2 D) = 0.1 / (4 * 0.05 * 0.01 * 0.25) = 200.
        let cfg = TrainConfig::new(
            0.05,
            dpo(0.1),
            StopRule::BoundaryBudget { delta: 0.1 },
        )
        .unwrap();
        assert_eq!(cfg.steps().unwrap(), 200);
        let ds = small_ds(11);
        let (_, trace) = train(&ds, &cfg).unwrap();
        assert_eq!(trace.steps(), 200);
        assert_eq!(trace.losses.len(), 201);
    }

    #[test]
    fn boundary_time_formula() {
        let t = boundary_time(0.1, 1.0, 0.1, 0.25).unwrap();
        assert!((t - 10.0).abs() < 1e-12);
        // Linear in delta and tau.
        assert!((boundary_time(0.2, 1.0, 0.1, 0.25).unwrap() - 2.0 * t).abs() < 1e-12);
        assert!((boundary_time(0.1, 2.0, 0.1, 0.25).unwrap() - 2.0 * t).abs() < 1e-12);
        // Hinge: D = 1/(2 beta) collapses the budget to delta tau / (2 beta).
        let beta = 0.3;
        let slic = GpoLoss::new(LossKind::Slic, beta).unwrap();
        let got = boundary_time(0.4, 5.0, beta, slic.curvature_bound()).unwrap();
        assert!((got - 0.4 * 5.0 / (2.0 * beta)).abs() < 1e-12);
        assert!(boundary_time(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(boundary_time(0.5, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn boundary_angle_reference_values() {
        let a = LinearPreferenceModel::from_weights(vec![1.0, 0.0], 1.0).unwrap();
        let b = LinearPreferenceModel::from_weights(vec![2.0, 0.0], 1.0).unwrap();
        assert_eq!(boundary_angle(&a, &b).unwrap(), 0.0);
        let c = LinearPreferenceModel::from_weights(vec![-3.0, 0.0], 1.0).unwrap();
        assert!((boundary_angle(&a, &c).unwrap() - std::f64::consts::PI).abs() < 1e-12);
        let z = LinearPreferenceModel::zeros(2, 1.0).unwrap();
        assert!(boundary_angle(&a, &z).is_err());
    }

    #[test]
    fn single_cluster_velocity_is_minus_two_beta_squared_f_prime() {
        // Every sample identical to the probe with orientation +1 at w = 0.
        let d = 8;
        let mut x = vec![0.0; d];
        x[0] = 1.0;
        let n = 5;
        let mut data = Vec::new();
        for _ in 0..n {
            data.extend_from_slice(&x);
        }
        let ds = PreferenceDataset::from_parts(
            EmbeddingMatrix::new(n, d, data).unwrap(),
            vec![1; n],
            vec![1; n],
            NoiseMeta {
                kind: NoiseKind::Clean,
                noise_seed: None,
                gen_seed: None,
                generator: None,
            },
        )
        .unwrap();
        for kind in [LossKind::Dpo, LossKind::Ipo, LossKind::Slic] {
            let beta = 0.4;
            let loss = GpoLoss::new(kind, beta).unwrap();
            let model = LinearPreferenceModel::zeros(d, beta).unwrap();
            let v = margin_dynamics_step(&ds, &model, &loss, &x, 1).unwrap();
            let want = -2.0 * beta * beta * loss.f_prime(0.0);
            assert!((v - want).abs() < 1e-14, "{kind:?}: {v} vs {want}");
            assert!(v > 0.0, "margins must initially grow");
        }
    }

    #[test]
    fn velocity_is_invariant_under_global_orientation_flip() {
        // At w = 0 every margin is 0, so flipping the probe together with
        // all dataset orientations leaves the s~_j s~_i products (and hence
        // the velocity) exactly unchanged.
        let ds = small_ds(13);
        let flipped = apply_mislabel(ds.clone(), 1.0, 99).unwrap();
        let loss = dpo(0.6);
        let model = LinearPreferenceModel::zeros(16, 0.6).unwrap();
        let x = ds.x(3).to_vec();
        let s = ds.noisy_orientation()[3];
        let v1 = margin_dynamics_step(&ds, &model, &loss, &x, s).unwrap();
        let v2 = margin_dynamics_step(&flipped, &model, &loss, &x, -s).unwrap();
        assert!((v1 - v2).abs() < 1e-14, "{v1} vs {v2}");
    }

    #[test]
    fn one_discrete_step_moves_margins_by_eta_times_velocity() {
        // The margin is linear in w, so the identity is exact, not O(eta).
        let ds = small_ds(15);
        let loss = dpo(0.5);
        let eta = 1e-3;
        let cfg = TrainConfig::new(eta, loss, StopRule::FixedEpochs(1))
            .unwrap()
            .with_probe(vec![0, 7, 21]);
        let (_, trace) = train(&ds, &cfg).unwrap();
        let model0 = LinearPreferenceModel::zeros(16, 0.5).unwrap();
        for (k, &idx) in [0usize, 7, 21].iter().enumerate() {
            let v = margin_dynamics_step(
                &ds,
                &model0,
                &loss,
                ds.x(idx),
                ds.noisy_orientation()[idx],
            )
            .unwrap();
            let dr = trace.probe_margins[1][k] - trace.probe_margins[0][k];
            assert!(
                (dr / eta - v).abs() < 1e-12,
                "probe {idx}: dr/eta {} vs velocity {v}",
                dr / eta
            );
        }
    }

    #[test]
    fn trained_trajectory_tracks_the_gradient_flow() {
        // Integrate dw/ds = -2 g(w) with classical RK4 as an independent
        // oracle for the flow, and compare the probe margin after flow time
        // T with the Euler-trained one. Also check the exact per-step
        // identity sum(eta * velocity) = total margin change.
        let ds = small_ds(17);
        let loss = dpo(1.0);
        let eta = 1e-4;
        let steps = 200;
        let probe = 4usize;
        let cfg = TrainConfig::new(eta, loss, StopRule::FixedEpochs(steps))
            .unwrap()
            .with_probe(vec![probe]);
        let (_, trace) = train(&ds, &cfg).unwrap();

        // Exact discrete identity along the realized trajectory.
        let mut cumulative = 0.0;
        let mut w = vec![0.0; ds.d()];
        for _ in 0..steps {
            let model = LinearPreferenceModel::from_weights(w.clone(), 1.0).unwrap();
            let v = margin_dynamics_step(&ds, &model, &loss, ds.x(probe), ds.noisy_orientation()[probe])
                .unwrap();
            cumulative += eta * v;
            let (_, grad) = batch_loss_and_gradient(&loss, &model, &ds).unwrap();
            axpy(-2.0 * eta, &grad, &mut w);
        }
        let total = trace.probe_margins[steps][0] - trace.probe_margins[0][0];
        assert!(
            (cumulative - total).abs() < 1e-12,
            "discrete identity broke: {cumulative} vs {total}"
        );

        // Independent RK4 flow oracle.
        let deriv = |w: &[f64]| -> Vec<f64> {
            let model = LinearPreferenceModel::from_weights(w.to_vec(), 1.0).unwrap();
            let (_, g) = batch_loss_and_gradient(&loss, &model, &ds).unwrap();
            g.iter().map(|v| -2.0 * v).collect()
        };
        let mut wf = vec![0.0; ds.d()];
        let h = eta; // one RK4 stage per trained step
        for _ in 0..steps {
            let k1 = deriv(&wf);
            let mut tmp: Vec<f64> = wf.iter().zip(&k1).map(|(w, k)| w + 0.5 * h * k).collect();
            let k2 = deriv(&tmp);
            tmp = wf.iter().zip(&k2).map(|(w, k)| w + 0.5 * h * k).collect();
            let k3 = deriv(&tmp);
            tmp = wf.iter().zip(&k3).map(|(w, k)| w + h * k).collect();
            let k4 = deriv(&tmp);
            for i in 0..wf.len() {
                wf[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let flow_model = LinearPreferenceModel::from_weights(wf, 1.0).unwrap();
        let flow_margin =
            reward_margin(&flow_model, ds.x(probe), ds.noisy_orientation()[probe]).unwrap();
        let rel = ((total - flow_margin) / flow_margin).abs();
        assert!(
            rel <= 0.01,
            "Euler margin {total} vs flow margin {flow_margin} (rel {rel})"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let ds = small_ds(19);
        let cfg = TrainConfig::new(0.3, dpo(0.2), StopRule::FixedEpochs(10)).unwrap();
        let (a, _) = train(&ds, &cfg).unwrap();
        let (b, _) = train(&ds, &cfg).unwrap();
        assert_eq!(a.w(), b.w(), "same inputs must give bit-identical weights");
    }

    #[test]
    fn probe_indices_are_validated() {
        let ds = small_ds(21);
        let cfg = TrainConfig::new(0.1, dpo(1.0), StopRule::FixedEpochs(1))
            .unwrap()
            .with_probe(vec![40]);
        assert!(train(&ds, &cfg).is_err());
    }

    #[test]
    fn trace_csv_has_the_documented_header() {
        let ds = small_ds(23);
        let cfg = TrainConfig::new(0.1, dpo(1.0), StopRule::FixedEpochs(2))
            .unwrap()
            .with_probe(vec![0]);
        let (_, trace) = train(&ds, &cfg).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,loss,probe_margin\n"));
        assert_eq!(text.lines().count(), 4, "header + 3 snapshots");
    }
}
