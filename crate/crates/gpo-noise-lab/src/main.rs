//! Laboratory command line.
//!
//! One binary drives the whole pipeline:
//!
//! ```text
//!   sample           draw von Mises-Fisher embeddings around e1
//!   gen-data         generate + corrupt one preference dataset, save it
//!   train            fit the linear preference head on a saved dataset
//!   sweep            full risk-curve grids (presets for the figure panels)
//!   bound            evaluate the closed-form robustness bounds
//!   calibrate-omega  map target flip rates to uncertainty temperatures
//!   profile          geometry diagnostics + robustness verdict for
//!                    ingested embedding matrices
//! ```
//!
//! Global flags: `--config FILE` (lines of `key = value`, `#` comments,
//! comma-separated lists), `--out DIR`, `--seed U64`, `--preset NAME`,
//! `--threads N`. The environment variable `GPO_NOISE_LAB_THREADS`
//! overrides `--threads`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 violated precondition /
//! failed calibration / diverged training, 4 I/O or file-format error.

use std::fmt::Write as _;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gpo_noise_lab::bounds::{
    concentration_bound, concentration_epsilon_limit, eps_omega_threshold,
    minimal_n_for_positive_threshold, noise_threshold_with, risk_bound, BoundInputs, BoundReport,
    ThresholdForm,
};
use gpo_noise_lab::geometry::{
    profile, robustness_verdict, REFERENCE_AVG_COSINE, REFERENCE_AVG_NORM,
    REFERENCE_COSINE_VARIANCE, REFERENCE_NORM_SPREAD,
};
use gpo_noise_lab::gpoloss::{GpoLoss, LossKind};
use gpo_noise_lab::harness::{
    calibrate_grid, calibration_csv, default_learning_rate, estimate_lambda_hat, load_config,
    parse_angle, preset, run_sweep, LearningRate, SweepConfig, SweepKind,
};
use gpo_noise_lab::prefdata::{
    apply_mislabel, apply_uncertain, calibrate_omega, generate_clean, PreferenceDataset,
    PreferencePairConfig,
};
use gpo_noise_lab::trainer::{train, StopRule, TrainConfig};
use gpo_noise_lab::util::stream_seed;
use gpo_noise_lab::vmf::{sample_vmf, EmbeddingMatrix, VmfParams};
use gpo_noise_lab::{LabError, Result};

/// Preference-optimization noise laboratory.
#[derive(Parser)]
#[command(
    name = "gpo-noise-lab",
    version,
    about = "Simulation laboratory for preference optimization under noisy labels"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct Common {
    /// Config file: UTF-8 lines of `key = value`, `#` comments, lists as
    /// comma-separated values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Base seed override (applied after preset and config).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Named grid preset: fig4-gamma, fig4-N, or fig5-uncertain.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Worker threads; GPO_NOISE_LAB_THREADS overrides this flag.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw von Mises-Fisher samples around e1; writes samples.emb1 and
    /// samples.csv (config keys used: d, gamma, N, seed).
    Sample,
    /// Generate one preference dataset, corrupt it, and save it as
    /// dataset.{emb1,lbl1,meta} (config keys used: kind, d, phi, gamma,
    /// N, eps, n_probe, seed).
    GenData,
    /// Train the linear preference head on a saved dataset; writes
    /// trace.csv and model.csv.
    Train(TrainArgs),
    /// Run a sweep over (loss, gamma, N, eps) cells and emit per-trial,
    /// aggregate, and plot-ready CSVs.
    Sweep(SweepArgs),
    /// Evaluate the closed-form noise threshold, risk ceiling, and
    /// concentration bound at a point or along one-parameter grids.
    Bound(BoundArgs),
    /// Calibrate the uncertainty temperature omega for each configured
    /// (gamma, target flip rate) cell.
    CalibrateOmega,
    /// Profile an ingested embedding matrix and judge its robustness to
    /// label noise.
    Profile(ProfileArgs),
}

/// Arguments specific to `train`.
#[derive(Args)]
struct TrainArgs {
    /// Dataset base path; expects <BASE>.emb1, <BASE>.lbl1, <BASE>.meta.
    #[arg(long, value_name = "BASE")]
    data: PathBuf,

    /// Stop rule override: `fixed` (epochs full-batch steps) or
    /// `boundary` (run out the boundary-shift time budget).
    #[arg(long, value_name = "RULE")]
    stop_rule: Option<String>,

    /// Boundary-budget angle sine override (used with --stop-rule boundary).
    #[arg(long, value_name = "DELTA")]
    delta: Option<f64>,
}

/// Arguments specific to `sweep`.
#[derive(Args)]
struct SweepArgs {
    /// Trials-per-cell override (applied after preset and config).
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
}

/// Arguments specific to `bound`.
///
/// `--N`, `--gamma`, `--phi`, and `--epsilon` each accept a comma list,
/// but at most one of them may list more than one value; a single point
/// prints a key=value report, a grid prints CSV (also written to
/// `<out>/bound.csv`).
#[derive(Args)]
struct BoundArgs {
    /// Sample count N (comma list allowed).
    #[arg(long = "N", value_name = "LIST")]
    n: String,

    /// Embedding dimension d.
    #[arg(long, value_name = "D")]
    d: usize,

    /// Signal strength gamma = 2*kappa/d (comma list allowed).
    #[arg(long, value_name = "LIST")]
    gamma: String,

    /// Class half-angle phi in radians; `pi` and `pi/K` forms accepted
    /// (comma list allowed).
    #[arg(long, value_name = "LIST")]
    phi: String,

    /// Boundary-shift angle sine delta.
    #[arg(long, value_name = "DELTA", default_value_t = 1e-4)]
    delta: f64,

    /// Mislabel rate epsilon (comma list allowed).
    #[arg(long, value_name = "LIST", default_value = "0")]
    epsilon: String,

    /// Threshold form: `statement` (published constants) or `proof`
    /// (intermediate constants, algebraically identical).
    #[arg(long, value_name = "FORM", default_value = "statement")]
    form: String,

    /// Values for the constants the theory leaves unspecified, e.g.
    /// `c=1,C=1` (c scales the risk ceiling, C the uncertain-noise
    /// threshold's dimension correction).
    #[arg(long, value_name = "LIST", default_value = "")]
    constants: String,
}

/// Arguments specific to `profile`.
#[derive(Args)]
struct ProfileArgs {
    /// Embedding file: EMB1 binary or headerless CSV of raw components.
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,

    /// Label file: LBL1 binary (the noisy section is used) or text with
    /// one `+1`/`-1` per line.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,

    /// Deployment sample count for the robustness verdict (default: the
    /// number of embedding rows).
    #[arg(long = "N", value_name = "U64")]
    n: Option<u64>,

    /// Boundary-shift angle sine for the robustness verdict.
    #[arg(long, value_name = "DELTA", default_value_t = 1e-4)]
    delta: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code().clamp(1, 255) as u8)
        }
    }
}

/// Dispatch after thread-pool initialization.
fn run(cli: Cli) -> Result<()> {
    init_threads(cli.common.threads)?;
    match &cli.command {
        Command::Sample => cmd_sample(&cli.common),
        Command::GenData => cmd_gen_data(&cli.common),
        Command::Train(args) => cmd_train(&cli.common, args),
        Command::Sweep(args) => cmd_sweep(&cli.common, args),
        Command::Bound(args) => cmd_bound(&cli.common, args),
        Command::CalibrateOmega => cmd_calibrate_omega(&cli.common),
        Command::Profile(args) => cmd_profile(&cli.common, args),
    }
}

/// Size the global worker pool. The environment variable takes priority
/// over the flag; with neither set, the pool defaults to the machine's
/// core count.
fn init_threads(cli_threads: Option<usize>) -> Result<()> {
    let n = match std::env::var("GPO_NOISE_LAB_THREADS") {
        Ok(raw) => Some(raw.trim().parse::<usize>().map_err(|_| {
            LabError::Config(format!(
                "GPO_NOISE_LAB_THREADS must be a positive integer, got '{raw}'"
            ))
        })?),
        Err(_) => cli_threads,
    };
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(LabError::Config(
            "thread count must be >= 1".to_string(),
        ));
    }
    // A failure here means a pool already exists (only possible if this
    // runs twice in one process), which is fine for our purposes.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Preset, then config file, then the --seed override.
fn resolve_sweep_config(common: &Common) -> Result<SweepConfig> {
    let mut cfg = match &common.preset {
        Some(name) => preset(name)?,
        None => SweepConfig::default(),
    };
    if let Some(path) = &common.config {
        cfg = load_config(path, cfg)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// `sample`: unit-norm vMF draws around e1 at the configured gamma.
fn cmd_sample(common: &Common) -> Result<()> {
    let cfg = resolve_sweep_config(common)?;
    let d = cfg.d;
    let gamma = cfg.gammas[0];
    let n = cfg.ns[0];
    if d < 3 {
        return Err(LabError::Config(format!(
            "sampling requires dimension >= 3, got {d}"
        )));
    }
    let mut mu = vec![0.0; d];
    mu[0] = 1.0;
    let params = VmfParams::from_gamma(mu, gamma)?;
    // The sample subcommand consumes the base seed directly; derived
    // streams only matter once several consumers share one seed.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples = sample_vmf(&params, n, &mut rng)?;
    std::fs::create_dir_all(&common.out)?;
    let emb_path = common.out.join("samples.emb1");
    let csv_path = common.out.join("samples.csv");
    samples.write_emb1(&emb_path)?;
    samples.write_csv(&csv_path)?;
    println!("samples = {n}");
    println!("d = {d}");
    println!("gamma = {gamma}");
    println!("seed = {}", cfg.seed);
    println!("emb1 = {}", emb_path.display());
    println!("csv = {}", csv_path.display());
    Ok(())
}

/// `gen-data`: one dataset at the first configured (gamma, N, eps) cell.
fn cmd_gen_data(common: &Common) -> Result<()> {
    let cfg = resolve_sweep_config(common)?;
    cfg.validate()?;
    let gamma = cfg.gammas[0];
    let n = cfg.ns[0];
    let eps = cfg.eps_targets[0];
    let pair_cfg = PreferencePairConfig::new(cfg.d, gamma, cfg.phi, n)?;
    // Distinct derived streams for generation, corruption, and
    // calibration, so each stage is reproducible in isolation.
    let data_seed = stream_seed(cfg.seed, &[10]);
    let noise_seed = stream_seed(cfg.seed, &[11]);
    let clean = generate_clean(&pair_cfg, data_seed)?;
    let ds = match cfg.kind {
        SweepKind::Mislabel => apply_mislabel(clean, eps, noise_seed)?,
        SweepKind::Uncertain => {
            let cal_seed = stream_seed(cfg.seed, &[13, gamma.to_bits(), eps.to_bits()]);
            let cal = calibrate_omega(eps, &pair_cfg, None, cfg.n_probe, cal_seed)?;
            println!(
                "calibration: target = {}, omega = {}, achieved = {:.6}, floor = {:.6}, converged = {}",
                cal.target, cal.omega, cal.achieved, cal.floor, cal.converged
            );
            apply_uncertain(clean, cal.omega, noise_seed)?
        }
    };
    std::fs::create_dir_all(&common.out)?;
    let base = common.out.join("dataset");
    ds.save(&base)?;
    println!("kind = {}", cfg.kind.name());
    println!("N = {n}");
    println!("d = {}", cfg.d);
    println!("gamma = {gamma}");
    println!("phi = {}", cfg.phi);
    println!("eps = {eps}");
    println!("seed = {}", cfg.seed);
    println!("flips = {}", ds.flip_count());
    println!("dataset = {}", base.display());
    Ok(())
}

/// Settings for one training run, defaulting to the published recipe
/// (DPO, beta 0.1, stability-rule learning rate, 10 full-batch epochs).
struct TrainSettings {
    loss: LossKind,
    beta: f64,
    lr: LearningRate,
    epochs: usize,
    boundary: bool,
    delta: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            loss: LossKind::Dpo,
            beta: 0.1,
            lr: LearningRate::Auto,
            epochs: 10,
            boundary: false,
            delta: 0.1,
        }
    }
}

const TRAIN_KEYS: &str = "loss, beta, lr, epochs, stop_rule, delta";

/// Parse the `train` config dialect: keys `loss`, `beta`, `lr`,
/// `epochs`, `stop_rule = fixed|boundary`, `delta`.
fn parse_train_config(text: &str, mut settings: TrainSettings) -> Result<TrainSettings> {
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(LabError::Config(format!(
                "line {}: expected `key = value`, got '{line}'",
                idx + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "loss" => settings.loss = LossKind::parse(value)?,
            "beta" => settings.beta = parse_float("beta", value)?,
            "lr" => {
                settings.lr = if value.eq_ignore_ascii_case("auto") {
                    LearningRate::Auto
                } else {
                    LearningRate::Fixed(parse_float("lr", value)?)
                }
            }
            "epochs" => {
                settings.epochs = value.parse().map_err(|_| {
                    LabError::Config(format!("epochs must be a positive integer, got '{value}'"))
                })?
            }
            "stop_rule" => settings.boundary = parse_stop_rule(value)?,
            "delta" => settings.delta = parse_float("delta", value)?,
            other => {
                return Err(LabError::Config(format!(
                    "unknown config key '{other}'; valid keys: {TRAIN_KEYS}"
                )));
            }
        }
    }
    Ok(settings)
}

/// `fixed` -> false, `boundary` -> true.
fn parse_stop_rule(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "fixed" => Ok(false),
        "boundary" => Ok(true),
        other => Err(LabError::Config(format!(
            "stop_rule must be 'fixed' or 'boundary', got '{other}'"
        ))),
    }
}

/// Parse one finite float CLI/config value.
fn parse_float(label: &str, value: &str) -> Result<f64> {
    let v: f64 = value.trim().parse().map_err(|_| {
        LabError::Config(format!("{label} must be a real number, got '{value}'"))
    })?;
    if !v.is_finite() {
        return Err(LabError::Config(format!(
            "{label} must be finite, got {v}"
        )));
    }
    Ok(v)
}

/// `train`: load, fit, and export the trace and the weight vector.
fn cmd_train(common: &Common, args: &TrainArgs) -> Result<()> {
    let mut settings = TrainSettings::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)?;
        settings = parse_train_config(&text, settings)?;
    }
    if let Some(rule) = &args.stop_rule {
        settings.boundary = parse_stop_rule(rule)?;
    }
    if let Some(delta) = args.delta {
        settings.delta = delta;
    }

    let ds = PreferenceDataset::load(&args.data)?;
    let loss = GpoLoss::new(settings.loss, settings.beta)?;
    let lr = match settings.lr {
        LearningRate::Fixed(v) => v,
        LearningRate::Auto => {
            let lambda_hat = estimate_lambda_hat(ds.embeddings());
            default_learning_rate(settings.beta, loss.curvature_bound(), lambda_hat)?
        }
    };
    let stop = if settings.boundary {
        StopRule::BoundaryBudget {
            delta: settings.delta,
        }
    } else {
        StopRule::FixedEpochs(settings.epochs)
    };
    let cfg = TrainConfig::new(lr, loss, stop)?;
    let (model, trace) = train(&ds, &cfg)?;

    std::fs::create_dir_all(&common.out)?;
    let trace_path = common.out.join("trace.csv");
    let mut trace_file = std::fs::File::create(&trace_path)?;
    trace.write_csv(&mut trace_file)?;
    let model_path = common.out.join("model.csv");
    let mut weights = String::new();
    for w in model.w() {
        writeln!(weights, "{w}").expect("writing to a String cannot fail");
    }
    std::fs::write(&model_path, weights)?;

    println!("loss = {}", settings.loss.name());
    println!("beta = {}", settings.beta);
    println!("lr = {lr}");
    println!("steps = {}", trace.steps());
    println!(
        "final_loss = {}",
        trace.losses.last().expect("trace always holds step 0")
    );
    println!("trace = {}", trace_path.display());
    println!("model = {}", model_path.display());
    Ok(())
}

/// `sweep`: run the configured grid and report what was written.
fn cmd_sweep(common: &Common, args: &SweepArgs) -> Result<()> {
    let mut cfg = resolve_sweep_config(common)?;
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    let summary = run_sweep(&cfg, &common.out)?;
    println!("cells = {}", summary.cells);
    println!("rows = {}", summary.rows_written);
    println!("diverged = {}", summary.diverged_trials);
    println!("per_trial = {}", summary.per_trial_path.display());
    println!("aggregate = {}", summary.aggregate_path.display());
    for path in &summary.plotdata_paths {
        println!("plotdata = {}", path.display());
    }
    if let Some(path) = &summary.calibration_path {
        println!("calibration = {}", path.display());
    }
    Ok(())
}

/// Theory constants left unspecified by the analysis; both default to 1.
struct BoundConstants {
    /// Multiplies the risk ceiling exp(-d gamma^2 / (5 (2 + gamma))).
    c: f64,
    /// Scales the uncertain-noise threshold's C/d dimension correction.
    big_c: f64,
}

/// Parse `c=..,C=..` (either, both, or empty).
fn parse_constants(raw: &str) -> Result<BoundConstants> {
    let mut constants = BoundConstants { c: 1.0, big_c: 1.0 };
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let Some((key, value)) = part.split_once('=') else {
            return Err(LabError::Config(format!(
                "constants must be `name=value` pairs, got '{part}'"
            )));
        };
        match key.trim() {
            "c" => constants.c = parse_float("constant c", value)?,
            "C" => constants.big_c = parse_float("constant C", value)?,
            other => {
                return Err(LabError::Config(format!(
                    "unknown constant '{other}'; valid constants: c, C"
                )));
            }
        }
    }
    if !(constants.c > 0.0) {
        return Err(LabError::Config(format!(
            "constant c must be > 0, got {}",
            constants.c
        )));
    }
    if !(constants.big_c >= 0.0) {
        return Err(LabError::Config(format!(
            "constant C must be >= 0, got {}",
            constants.big_c
        )));
    }
    Ok(constants)
}

/// Split a comma list and parse each element with `parse`.
fn parse_list<T>(
    label: &str,
    raw: &str,
    parse: impl Fn(&str) -> Result<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(LabError::Config(format!(
                "--{label} has an empty list element in '{raw}'"
            )));
        }
        out.push(parse(part)?);
    }
    Ok(out)
}

/// `bound`: single-point key=value report, or CSV along one grid axis.
fn cmd_bound(common: &Common, args: &BoundArgs) -> Result<()> {
    let ns = parse_list("N", &args.n, |s| {
        s.parse::<u64>().map_err(|_| {
            LabError::Config(format!("N must be a positive integer, got '{s}'"))
        })
    })?;
    let gammas = parse_list("gamma", &args.gamma, |s| parse_float("gamma", s))?;
    let phis = parse_list("phi", &args.phi, parse_angle)?;
    let epsilons = parse_list("epsilon", &args.epsilon, |s| parse_float("epsilon", s))?;
    let form = match args.form.to_ascii_lowercase().as_str() {
        "statement" => ThresholdForm::Statement,
        "proof" => ThresholdForm::Proof,
        other => {
            return Err(LabError::Config(format!(
                "form must be 'statement' or 'proof', got '{other}'"
            )));
        }
    };
    let constants = parse_constants(&args.constants)?;

    let listy = [ns.len(), gammas.len(), phis.len(), epsilons.len()];
    if listy.iter().filter(|&&len| len > 1).count() > 1 {
        return Err(LabError::Config(
            "at most one of --N, --gamma, --phi, --epsilon may list more than one value"
                .to_string(),
        ));
    }

    if listy.iter().all(|&len| len == 1) {
        return bound_point_report(
            ns[0], args.d, gammas[0], phis[0], args.delta, epsilons[0], form, &constants,
        );
    }

    // Grid mode: CSV on stdout plus <out>/bound.csv; rows that violate a
    // hard precondition carry the reason in the status column instead of
    // failing the whole run.
    let mut csv = String::from(
        "N,d,gamma,phi,delta,epsilon,threshold,probability_floor,risk_ceiling,concentration_bound,status\n",
    );
    for &n in &ns {
        for &gamma in &gammas {
            for &phi in &phis {
                for &epsilon in &epsilons {
                    let row = bound_grid_row(
                        n, args.d, gamma, phi, args.delta, epsilon, form, &constants,
                    )?;
                    csv.push_str(&row);
                    csv.push('\n');
                }
            }
        }
    }
    print!("{csv}");
    std::fs::create_dir_all(&common.out)?;
    let path = common.out.join("bound.csv");
    std::fs::write(&path, &csv)?;
    Ok(())
}

/// One CSV row for the bound grid. Unavailable quantities render as
/// empty fields; the status column explains unsatisfied or vacuous rows.
#[allow(clippy::too_many_arguments)]
fn bound_grid_row(
    n: u64,
    d: usize,
    gamma: f64,
    phi: f64,
    delta: f64,
    epsilon: f64,
    form: ThresholdForm,
    constants: &BoundConstants,
) -> Result<String> {
    let inputs = BoundInputs::new(n, d, gamma, phi, delta, epsilon)?;
    let report = noise_threshold_with(&inputs, form);
    let (threshold, status) = match report.value.value() {
        Some(v) if report.vacuous => (format!("{v:.16e}"), "vacuous".to_string()),
        Some(v) => (format!("{v:.16e}"), "ok".to_string()),
        None => {
            let reason = report
                .value
                .unsatisfied_reason()
                .unwrap_or("unsatisfied")
                .replace(',', ";");
            (String::new(), format!("unsatisfied: {reason}"))
        }
    };
    let risk_ceiling = match risk_bound(d, gamma) {
        Ok(v) => format!("{:.16e}", constants.c * v),
        Err(_) => String::new(),
    };
    let concentration = match concentration_bound(n, gamma, epsilon) {
        Ok(v) => format!("{v:.16e}"),
        Err(_) => String::new(),
    };
    Ok(format!(
        "{n},{d},{gamma},{phi},{delta},{epsilon},{threshold},{:.16e},{risk_ceiling},{concentration},{status}",
        report.probability_floor
    ))
}

/// Key=value report for a single bound evaluation. An unsatisfied hard
/// precondition is still reported in full, then surfaces as exit code 3.
#[allow(clippy::too_many_arguments)]
fn bound_point_report(
    n: u64,
    d: usize,
    gamma: f64,
    phi: f64,
    delta: f64,
    epsilon: f64,
    form: ThresholdForm,
    constants: &BoundConstants,
) -> Result<()> {
    let inputs = BoundInputs::new(n, d, gamma, phi, delta, epsilon)?;
    let report = noise_threshold_with(&inputs, form);
    println!("N = {n}");
    println!("d = {d}");
    println!("gamma = {gamma}");
    println!("phi = {phi}");
    println!("delta = {delta}");
    println!("epsilon = {epsilon}");
    println!(
        "form = {}",
        match form {
            ThresholdForm::Statement => "statement",
            ThresholdForm::Proof => "proof",
        }
    );
    match report.value.value() {
        Some(v) => println!("threshold = {v}"),
        None => println!(
            "threshold = unsatisfied ({})",
            report.value.unsatisfied_reason().unwrap_or("unknown")
        ),
    }
    println!("vacuous = {}", report.vacuous);
    println!("probability_floor = {}", report.probability_floor);
    match risk_bound(d, gamma) {
        Ok(v) => println!("risk_ceiling = {}", constants.c * v),
        Err(e) => println!("risk_ceiling = unavailable ({e})"),
    }
    match eps_omega_threshold(&inputs, constants.big_c) {
        Ok(r) => match r.value.value() {
            Some(v) => println!("eps_omega_threshold = {v}"),
            None => println!(
                "eps_omega_threshold = unsatisfied ({})",
                r.value.unsatisfied_reason().unwrap_or("unknown")
            ),
        },
        Err(e) => println!("eps_omega_threshold = unavailable ({e})"),
    }
    match concentration_bound(n, gamma, epsilon) {
        Ok(v) => println!("concentration_bound = {v}"),
        Err(e) => println!("concentration_bound = unavailable ({e})"),
    }
    match concentration_epsilon_limit(n, gamma) {
        Ok(v) => println!("concentration_epsilon_limit = {v}"),
        Err(e) => println!("concentration_epsilon_limit = unavailable ({e})"),
    }
    if report.vacuous {
        match minimal_n_for_positive_threshold(&inputs) {
            Ok(m) => println!("minimal_positive_n = {m}"),
            Err(e) => println!("minimal_positive_n = unavailable ({e})"),
        }
    }
    print_preconditions(&report);
    if let Some(reason) = report.value.unsatisfied_reason() {
        return Err(LabError::Precondition(reason.to_string()));
    }
    Ok(())
}

/// One line per audited precondition.
fn print_preconditions(report: &BoundReport) {
    for p in &report.preconditions {
        println!(
            "precondition \"{}\": holds = {}, margin = {:.6}, {}",
            p.name,
            p.holds,
            p.margin,
            if p.hard { "hard" } else { "advisory" }
        );
    }
}

/// `calibrate-omega`: print and save the calibration table; any target
/// below the geometry's flip floor fails the run after reporting.
fn cmd_calibrate_omega(common: &Common) -> Result<()> {
    let mut cfg = match &common.preset {
        Some(name) => preset(name)?,
        None => {
            let mut base = SweepConfig::default();
            base.kind = SweepKind::Uncertain;
            // The uncertain experiments run at a right angle; the
            // mislabel default pi/3 would violate the mode-gap condition
            // for small gamma.
            base.phi = std::f64::consts::FRAC_PI_2;
            base
        }
    };
    if let Some(path) = &common.config {
        cfg = load_config(path, cfg)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if cfg.kind != SweepKind::Uncertain {
        return Err(LabError::Config(
            "calibrate-omega requires kind = uncertain".to_string(),
        ));
    }
    let rows = calibrate_grid(&cfg)?;
    let csv = calibration_csv(&rows);
    print!("{csv}");
    std::fs::create_dir_all(&common.out)?;
    let path = common.out.join("calibration.csv");
    std::fs::write(&path, &csv)?;
    let missed = rows.iter().filter(|r| !r.calibration.converged).count();
    if missed > 0 {
        return Err(LabError::Calibration(format!(
            "{missed} of {} target(s) sit below the geometry's flip-probability floor",
            rows.len()
        )));
    }
    Ok(())
}

/// Load an embedding matrix, dispatching on the EMB1 magic bytes.
fn read_embeddings_any(path: &Path) -> Result<EmbeddingMatrix> {
    let mut magic = [0u8; 4];
    let mut file = std::fs::File::open(path)?;
    let is_emb1 = file.read_exact(&mut magic).is_ok() && &magic == b"EMB1";
    drop(file);
    if is_emb1 {
        EmbeddingMatrix::read_emb1(path)
    } else {
        EmbeddingMatrix::read_csv(path)
    }
}

/// Load labels, dispatching on the LBL1 magic bytes; text files carry
/// one `+1`/`-1` per line.
///
/// LBL1 layout: magic, u32-LE row count, one i8 per row of clean
/// orientations, then one i8 per row of noisy orientations. Profiling
/// consumes the noisy section — the labels an annotator actually
/// produced.
fn read_labels_any(path: &Path) -> Result<Vec<i8>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() >= 4 && &bytes[0..4] == b"LBL1" {
        if bytes.len() < 8 {
            return Err(LabError::Format(
                "label file ends before the LBL1 row count".to_string(),
            ));
        }
        let count = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
        let need = 8 + 2 * count;
        if bytes.len() < need {
            return Err(LabError::Format(format!(
                "LBL1 file declares {count} rows but holds {} of {need} bytes",
                bytes.len()
            )));
        }
        return Ok(bytes[8 + count..8 + 2 * count]
            .iter()
            .map(|&b| b as i8)
            .collect());
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| {
        LabError::Format("label file is neither LBL1 binary nor UTF-8 text".to_string())
    })?;
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let value = match t {
            "+1" | "1" => 1,
            "-1" => -1,
            other => {
                return Err(LabError::Format(format!(
                    "line {}: labels must be +1 or -1, got '{other}'",
                    idx + 1
                )));
            }
        };
        labels.push(value);
    }
    Ok(labels)
}

/// `profile`: geometry diagnostics plus the robustness verdict.
fn cmd_profile(common: &Common, args: &ProfileArgs) -> Result<()> {
    let _ = common; // profile writes no files; the report goes to stdout
    let embeddings = read_embeddings_any(&args.embeddings)?;
    let labels = read_labels_any(&args.labels)?;
    let prof = profile(&embeddings, &labels)?;
    println!("rows = {}", embeddings.n_rows());
    println!("d = {}", prof.d);
    println!("n_pos = {}", prof.n_pos);
    println!("n_neg = {}", prof.n_neg);
    println!("avg_norm = {}", prof.avg_norm);
    println!("norm_variance = {}", prof.norm_variance);
    println!("norm_std = {}", prof.norm_std);
    println!(
        "avg_cosine_to_class_mean = {}",
        prof.avg_cosine_to_class_mean
    );
    println!("cosine_variance = {}", prof.cosine_variance);
    println!("kappa_hat = {}", prof.kappa_hat);
    println!("gamma_hat = {}", prof.gamma_hat);
    println!("phi_hat = {}", prof.phi_hat);
    println!("reference_avg_norm = {REFERENCE_AVG_NORM}");
    println!("reference_norm_spread = {REFERENCE_NORM_SPREAD}");
    println!("reference_avg_cosine = {REFERENCE_AVG_COSINE}");
    println!("reference_cosine_variance = {REFERENCE_COSINE_VARIANCE}");
    let n = args.n.unwrap_or(embeddings.n_rows() as u64);
    let verdict = robustness_verdict(&prof, n, args.delta)?;
    println!("verdict = {verdict}");
    Ok(())
}
