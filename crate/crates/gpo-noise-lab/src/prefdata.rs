//! Synthetic preference datasets from two vMF clusters, plus the two noise
//! processes that corrupt them.
//!
//! A dataset holds `n` unit embeddings drawn half from `vMF(mu_plus, kappa)`
//! and half from `vMF(mu_minus, kappa)`, where the class means subtend an
//! angle of exactly `2 phi`:
//!
//! ```text
//!     mu_plus  = e1 cos(phi) + e2 sin(phi)
//!     mu_minus = e1 cos(phi) - e2 sin(phi)
//! ```
//!
//! With a fixed pair of response tokens, a preference is fully described by
//! an orientation sign: `+1` means the positive token is preferred for this
//! prompt embedding. Every row carries its clean orientation (`+1` for
//! positive-cluster rows) and a noisy orientation produced by one of two
//! processes:
//!
//! * **mislabel(epsilon)** — flip each current label independently with
//!   probability `epsilon` (Bernoulli label noise);
//! * **uncertain(omega)** — resample each label from the tempered true
//!   reward model, `P(s = +1) = sigmoid((kappa/omega)(mu_plus - mu_minus)^T x)`,
//!   so `omega = 0` gives deterministic labels and `omega = inf` a fair coin.
//!
//! The closed-form rate [`eps_omega`] approximates the label-flip
//! probability of the uncertain process, and [`calibrate_omega`] inverts the
//! realized flip rate so uncertain sweeps can be indexed by an equivalent
//! mislabel fraction.
//!
//! All randomness comes from explicit `u64` stream seeds (each operation
//! builds its own ChaCha8 stream), which is what makes the provenance
//! sidecars exact and reruns byte-identical.

use crate::util::{dot, sigmoid};
use crate::vmf::{sample_vmf, t_zero, EmbeddingMatrix, VmfParams};
use crate::{LabError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Geometry of one synthetic preference problem.
///
/// The implied true-reward concentration is `kappa = gamma * d / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreferencePairConfig {
    d: usize,
    gamma: f64,
    phi: f64,
    n: usize,
}

impl PreferencePairConfig {
    /// Validate and freeze a problem geometry.
    ///
    /// Requirements: `d >= 3`, `gamma >= 0` finite, `phi` in `(0, pi/2]`,
    /// `n` even and `>= 2`.
    pub fn new(d: usize, gamma: f64, phi: f64, n: usize) -> Result<Self> {
        if d < 3 {
            return Err(LabError::Config(format!("dimension must be >= 3, got {d}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(LabError::Config(format!(
                "normalized concentration must be finite and >= 0, got {gamma}"
            )));
        }
        if !(phi > 0.0 && phi <= std::f64::consts::FRAC_PI_2) {
            return Err(LabError::Config(format!(
                "half-angle must lie in (0, pi/2], got {phi}"
            )));
        }
        if n < 2 || n % 2 != 0 {
            return Err(LabError::Config(format!(
                "sample count must be even and >= 2, got {n}"
            )));
        }
        Ok(Self { d, gamma, phi, n })
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

    pub fn n(&self) -> usize {
        self.n
    }

    /// True-reward concentration `kappa = gamma * d / 2`.
    pub fn kappa(&self) -> f64 {
        self.gamma * self.d as f64 / 2.0
    }

    /// Positive-class mean `e1 cos(phi) + e2 sin(phi)`.
    pub fn mu_plus(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        v[0] = self.phi.cos();
        v[1] = self.phi.sin();
        v
    }

    /// Negative-class mean `e1 cos(phi) - e2 sin(phi)`.
    pub fn mu_minus(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        v[0] = self.phi.cos();
        v[1] = -self.phi.sin();
        v
    }

    /// Reward-difference direction `kappa * (mu_plus - mu_minus)`.
    pub fn reward_difference(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        v[1] = self.kappa() * 2.0 * self.phi.sin();
        v
    }

    fn vmf(&self, mu: Vec<f64>) -> Result<VmfParams> {
        VmfParams::from_gamma(mu, self.gamma)
    }
}

/// Which noise process produced a dataset's noisy orientations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// No corruption applied; noisy orientations equal clean ones.
    Clean,
    /// Bernoulli label flips with the recorded probability.
    Mislabel { epsilon: f64 },
    /// Labels resampled from the tempered reward model; `f64::INFINITY`
    /// encodes the fair-coin limit.
    Uncertain { omega: f64 },
}

/// Sign convention for the closed-form uncertain-noise rate [`eps_omega`].
///
/// The two published forms of the rate differ in the sign of the
/// `sin(2 phi) sqrt(1 - t0^2)` term inside the sigmoid argument. They
/// coincide at `phi = pi/2`, where the term vanishes. `AppendixC` is the
/// derived bound and the default everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    #[default]
    AppendixC,
    MainText,
}

/// Provenance record carried by every dataset and serialized as the
/// key=value sidecar next to the embedding and label files.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMeta {
    /// Last noise process applied (Clean for freshly generated data).
    pub kind: NoiseKind,
    /// Stream seed of the last noise application, if any.
    pub noise_seed: Option<u64>,
    /// Stream seed used to generate the embeddings, if generated here.
    pub gen_seed: Option<u64>,
    /// Generating geometry; `None` for ingested datasets, which therefore
    /// cannot use the uncertain noise model without an explicit reward.
    pub generator: Option<PreferencePairConfig>,
}

/// A preference dataset: embeddings plus clean and noisy orientations.
#[derive(Debug, Clone)]
pub struct PreferenceDataset {
    embeddings: EmbeddingMatrix,
    clean: Vec<i8>,
    noisy: Vec<i8>,
    meta: NoiseMeta,
}

impl PreferenceDataset {
    /// Assemble a dataset from raw parts (the ingestion path).
    pub fn from_parts(
        embeddings: EmbeddingMatrix,
        clean: Vec<i8>,
        noisy: Vec<i8>,
        meta: NoiseMeta,
    ) -> Result<Self> {
        if clean.len() != embeddings.n_rows() || noisy.len() != embeddings.n_rows() {
            return Err(LabError::Dimension(format!(
                "label arrays ({}, {}) must match row count {}",
                clean.len(),
                noisy.len(),
                embeddings.n_rows()
            )));
        }
        if clean.iter().chain(noisy.iter()).any(|&s| s != 1 && s != -1) {
            return Err(LabError::Format(
                "orientations must be +1 or -1".to_string(),
            ));
        }
        Ok(Self {
            embeddings,
            clean,
            noisy,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.clean.len()
    }

    pub fn d(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    /// Embedding row `i`.
    pub fn x(&self, i: usize) -> &[f64] {
        self.embeddings.row(i)
    }

    pub fn clean_orientation(&self) -> &[i8] {
        &self.clean
    }

    pub fn noisy_orientation(&self) -> &[i8] {
        &self.noisy
    }

    pub fn meta(&self) -> &NoiseMeta {
        &self.meta
    }

    /// Per-row flip indicators `z_i = (noisy_i != clean_i)`.
    pub fn flips(&self) -> Vec<bool> {
        self.clean
            .iter()
            .zip(&self.noisy)
            .map(|(a, b)| a != b)
            .collect()
    }

    /// Number of rows whose noisy orientation differs from the clean one.
    pub fn flip_count(&self) -> usize {
        self.flips().iter().filter(|&&z| z).count()
    }

    /// Serialize as `<base>.emb1` + `<base>.lbl1` + `<base>.meta`.
    pub fn save(&self, base: &Path) -> Result<()> {
        self.embeddings.write_emb1(&with_ext(base, "emb1"))?;
        write_lbl1(&with_ext(base, "lbl1"), &self.clean, &self.noisy)?;
        write_meta(&with_ext(base, "meta"), &self.meta)?;
        Ok(())
    }

    /// Load a dataset saved by [`PreferenceDataset::save`].
    pub fn load(base: &Path) -> Result<Self> {
        let embeddings = EmbeddingMatrix::read_emb1(&with_ext(base, "emb1"))?;
        let (clean, noisy) = read_lbl1(&with_ext(base, "lbl1"))?;
        let meta = read_meta(&with_ext(base, "meta"))?;
        Self::from_parts(embeddings, clean, noisy, meta)
    }
}

fn with_ext(base: &Path, ext: &str) -> std::path::PathBuf {
    let mut p = base.as_os_str().to_owned();
    p.push(".");
    p.push(ext);
    std::path::PathBuf::from(p)
}

/// Draw a clean dataset: `n/2` positive-cluster rows (orientation `+1`)
/// followed by `n/2` negative-cluster rows (orientation `-1`). Noisy
/// orientations start equal to the clean ones.
pub fn generate_clean(config: &PreferencePairConfig, seed: u64) -> Result<PreferenceDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = config.n() / 2;
    let d = config.d();
    let pos = sample_vmf(&config.vmf(config.mu_plus())?, half, &mut rng)?;
    let neg = sample_vmf(&config.vmf(config.mu_minus())?, half, &mut rng)?;
    let mut data = Vec::with_capacity(config.n() * d);
    data.extend(pos.rows().flatten());
    data.extend(neg.rows().flatten());
    let mut embeddings = EmbeddingMatrix::new(config.n(), d, data)?;
    embeddings.check_unit_norm();
    let mut clean = vec![1i8; half];
    clean.extend(std::iter::repeat(-1i8).take(half));
    let noisy = clean.clone();
    PreferenceDataset::from_parts(
        embeddings,
        clean,
        noisy,
        NoiseMeta {
            kind: NoiseKind::Clean,
            noise_seed: None,
            gen_seed: Some(seed),
            generator: Some(*config),
        },
    )
}

/// Flip each current noisy orientation independently with probability
/// `epsilon`.
///
/// The flip criterion is arranged so that runs at `epsilon` and
/// `1 - epsilon` on the same stream produce exactly complementary flip
/// patterns: a flip fires on `u < epsilon` when `epsilon <= 1/2` and on
/// `u >= 1 - epsilon` otherwise, and both branches read one uniform per row.
pub fn apply_mislabel(
    mut ds: PreferenceDataset,
    epsilon: f64,
    seed: u64,
) -> Result<PreferenceDataset> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(LabError::Config(format!(
            "flip probability must lie in [0, 1], got {epsilon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in ds.noisy.iter_mut() {
        let u: f64 = rng.random();
        let flip = if epsilon <= 0.5 {
            u < epsilon
        } else {
            u >= 1.0 - epsilon
        };
        if flip {
            *s = -*s;
        }
    }
    ds.meta.kind = NoiseKind::Mislabel { epsilon };
    ds.meta.noise_seed = Some(seed);
    Ok(ds)
}

/// Resample every noisy orientation from the tempered reward model:
/// `P(s = +1) = sigmoid((kappa/omega) (mu_plus - mu_minus)^T x)`.
///
/// `omega = 0` is the deterministic sign limit (a zero reward difference
/// still resolves by fair coin, matching `sigmoid(0) = 1/2`); the
/// `f64::INFINITY` sentinel yields a fair coin on every row. Requires the
/// dataset to carry its generating geometry.
pub fn apply_uncertain(
    mut ds: PreferenceDataset,
    omega: f64,
    seed: u64,
) -> Result<PreferenceDataset> {
    if !(omega >= 0.0) {
        return Err(LabError::Config(format!(
            "uncertainty temperature must be >= 0, got {omega}"
        )));
    }
    let config = ds.meta.generator.ok_or_else(|| {
        LabError::Precondition(
            "uncertain noise needs the generating reward model; this dataset was \
             ingested without one"
                .to_string(),
        )
    })?;
    let reward = config.reward_difference();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..ds.n() {
        let r = dot(&reward, ds.x(i));
        let p = plus_probability(r, omega);
        let u: f64 = rng.random();
        ds.noisy[i] = if u < p { 1 } else { -1 };
    }
    ds.meta.kind = NoiseKind::Uncertain { omega };
    ds.meta.noise_seed = Some(seed);
    Ok(ds)
}

/// `P(s = +1)` for reward difference `r = kappa * (mu_plus - mu_minus)^T x`
/// at temperature `omega`, with the deterministic and fair-coin limits
/// handled explicitly.
fn plus_probability(r: f64, omega: f64) -> f64 {
    if omega == 0.0 {
        // Sign limit of sigmoid(r/omega); exactly-zero rewards keep the
        // tempered model's sigmoid(0) = 1/2.
        if r > 0.0 {
            1.0
        } else if r < 0.0 {
            0.0
        } else {
            0.5
        }
    } else {
        // r / inf == 0 gives the fair coin without a special case.
        sigmoid(r / omega)
    }
}

/// Closed-form approximate flip rate of the uncertain process:
///
/// ```text
///     eps_omega = sigmoid( -(kappa/omega) [ t0 (1 - cos 2phi) +/- sin(2phi) sqrt(1 - t0^2) ] )
/// ```
///
/// with `t0 = t_zero(gamma, d)` and the `+/-` chosen by `convention`
/// (`AppendixC` uses `+`). Defined when `t0 > cos(phi)`, which makes the
/// bracket positive under either convention, so the rate lies in `(0, 1/2)`
/// and increases monotonically in `omega` toward the fair-coin limit `1/2`.
pub fn eps_omega(
    omega: f64,
    params: &VmfParams,
    phi: f64,
    convention: SignConvention,
) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(LabError::Precondition(format!(
            "closed-form rate needs omega > 0, got {omega}"
        )));
    }
    let t0 = t_zero(params.gamma(), params.d())?;
    if t0 <= phi.cos() {
        return Err(LabError::Precondition(format!(
            "closed-form rate needs t_zero > cos(phi); got t_zero = {t0:.6} vs cos(phi) = {:.6}",
            phi.cos()
        )));
    }
    let cross = (2.0 * phi).sin() * (1.0 - t0 * t0).sqrt();
    let bracket = match convention {
        SignConvention::AppendixC => t0 * (1.0 - (2.0 * phi).cos()) + cross,
        SignConvention::MainText => t0 * (1.0 - (2.0 * phi).cos()) - cross,
    };
    Ok(sigmoid(-(params.kappa() / omega) * bracket))
}

/// Outcome of [`calibrate_omega`].
#[derive(Debug, Clone, Copy)]
pub struct OmegaCalibration {
    /// Calibrated temperature (0 and `f64::INFINITY` are legitimate values).
    pub omega: f64,
    /// Requested mean flip probability.
    pub target: f64,
    /// Mean flip probability realized on the probe at `omega`.
    pub achieved: f64,
    /// Whether `|achieved - target| <= 0.001`.
    pub converged: bool,
    /// Mean flip probability in the `omega -> 0` limit — the smallest rate
    /// the uncertain process can realize on this geometry. Targets below
    /// `floor - 0.001` are unattainable and come back with
    /// `converged = false` and `omega = 0`.
    pub floor: f64,
}

/// Probe size giving the 0.001 calibration tolerance ~10x headroom over
/// its own Monte-Carlo noise.
pub const DEFAULT_N_PROBE: usize = 100_000;

/// Find `omega` such that the mean per-row flip probability over a freshly
/// generated probe dataset is within 0.001 of `target_eps`.
///
/// The mean flip probability at temperature `omega` is computed exactly on
/// the probe (no label sampling), so the search is deterministic given the
/// probe seed. `reward` optionally overrides the reward-difference vector
/// `kappa * (mu_plus - mu_minus)` implied by `config`. Targets `0` and
/// `0.5` map to the exact endpoints `omega = 0` and `omega = inf`; targets
/// below the geometry's floor cannot converge and are flagged, not errored,
/// so sweeps can record the floor and continue.
pub fn calibrate_omega(
    target_eps: f64,
    config: &PreferencePairConfig,
    reward: Option<&[f64]>,
    n_probe: usize,
    seed: u64,
) -> Result<OmegaCalibration> {
    if !(0.0..=0.5).contains(&target_eps) {
        return Err(LabError::Config(format!(
            "calibration target must lie in [0, 0.5], got {target_eps}"
        )));
    }
    if n_probe < 2 {
        return Err(LabError::Config(format!(
            "probe size must be >= 2, got {n_probe}"
        )));
    }
    // Probe with an even row count per generate_clean's contract.
    let probe_cfg = PreferencePairConfig::new(
        config.d(),
        config.gamma(),
        config.phi(),
        n_probe + n_probe % 2,
    )?;
    let probe = generate_clean(&probe_cfg, seed)?;
    let default_reward = config.reward_difference();
    let reward = reward.unwrap_or(&default_reward);
    if reward.len() != config.d() {
        return Err(LabError::Dimension(format!(
            "reward vector has dimension {}, expected {}",
            reward.len(),
            config.d()
        )));
    }
    // Signed reward margins a_i = s_i * reward^T x_i; the flip probability
    // of row i at temperature omega is sigmoid(-a_i / omega).
    let a: Vec<f64> = (0..probe.n())
        .map(|i| probe.clean_orientation()[i] as f64 * dot(reward, probe.x(i)))
        .collect();
    let mean_flip = |omega: f64| -> f64 {
        if omega == 0.0 {
            let s: f64 = a
                .iter()
                .map(|&ai| {
                    if ai < 0.0 {
                        1.0
                    } else if ai == 0.0 {
                        0.5
                    } else {
                        0.0
                    }
                })
                .sum();
            s / a.len() as f64
        } else {
            a.iter().map(|&ai| sigmoid(-ai / omega)).sum::<f64>() / a.len() as f64
        }
    };
    let floor = mean_flip(0.0);
    let done = |omega: f64, achieved: f64| OmegaCalibration {
        omega,
        target: target_eps,
        achieved,
        converged: (achieved - target_eps).abs() <= 0.001,
        floor,
    };

    if target_eps == 0.0 {
        return Ok(done(0.0, floor));
    }
    if target_eps == 0.5 {
        return Ok(done(f64::INFINITY, 0.5));
    }
    if target_eps < floor - 0.001 {
        // Unattainable: even deterministic labels flip more often than
        // requested on this geometry. Report the floor.
        return Ok(done(0.0, floor));
    }

    // Bracket: mean_flip is continuous and strictly increasing in omega,
    // from `floor` toward 1/2.
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut m_hi = mean_flip(hi);
    while m_hi < target_eps && hi < 1e15 {
        hi *= 2.0;
        m_hi = mean_flip(hi);
    }
    if m_hi < target_eps {
        return Err(LabError::Calibration(format!(
            "no temperature below 1e15 reaches flip rate {target_eps} \
             (best {m_hi:.6} at omega = {hi:.3e})"
        )));
    }
    // Bisect well inside the 0.001 contract before giving up.
    const INNER_TOL: f64 = 1e-5;
    let mut m_lo = floor;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = mean_flip(mid);
        if (m - target_eps).abs() <= INNER_TOL {
            return Ok(done(mid, m));
        }
        if m < target_eps {
            lo = mid;
            m_lo = m;
        } else {
            hi = mid;
            m_hi = m;
        }
    }
    Err(LabError::Calibration(format!(
        "bisection failed to reach {target_eps} after 200 iterations; bracket \
         [{lo:.6e}, {hi:.6e}] with flip rates [{m_lo:.6}, {m_hi:.6}]"
    )))
}

/// Difference between the mean embedding of `+1`-oriented rows and the mean
/// of `-1`-oriented rows, under the clean or noisy labeling.
pub fn class_mean_difference(ds: &PreferenceDataset, use_noisy: bool) -> Result<Vec<f64>> {
    let labels = if use_noisy {
        ds.noisy_orientation()
    } else {
        ds.clean_orientation()
    };
    let d = ds.d();
    let mut sum_pos = vec![0.0; d];
    let mut sum_neg = vec![0.0; d];
    let (mut n_pos, mut n_neg) = (0usize, 0usize);
    for i in 0..ds.n() {
        let (sum, count) = if labels[i] == 1 {
            (&mut sum_pos, &mut n_pos)
        } else {
            (&mut sum_neg, &mut n_neg)
        };
        for (acc, v) in sum.iter_mut().zip(ds.x(i)) {
            *acc += v;
        }
        *count += 1;
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(LabError::Precondition(format!(
            "class mean difference needs both orientations present ({n_pos} positive, \
             {n_neg} negative)"
        )));
    }
    Ok(sum_pos
        .iter()
        .zip(&sum_neg)
        .map(|(p, m)| p / n_pos as f64 - m / n_neg as f64)
        .collect())
}

// ---------------------------------------------------------------------------
// Serialization: LBL1 label file and the key=value meta sidecar.
// ---------------------------------------------------------------------------

/// Write the label file: magic `LBL1`, u32-LE row count, then one i8 per
/// row of clean orientation followed by one i8 per row of noisy orientation.
fn write_lbl1(path: &Path, clean: &[i8], noisy: &[i8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"LBL1")?;
    w.write_all(&(clean.len() as u32).to_le_bytes())?;
    w.write_all(&clean.iter().map(|&s| s as u8).collect::<Vec<u8>>())?;
    w.write_all(&noisy.iter().map(|&s| s as u8).collect::<Vec<u8>>())?;
    w.flush()?;
    Ok(())
}

fn read_lbl1(path: &Path) -> Result<(Vec<i8>, Vec<i8>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"LBL1" {
        return Err(LabError::Format(format!(
            "{} is not an LBL1 file (bad magic {:?})",
            path.display(),
            magic
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let n = u32::from_le_bytes(u32buf) as usize;
    let mut buf = vec![0u8; 2 * n];
    r.read_exact(&mut buf).map_err(|e| {
        LabError::Format(format!("{}: truncated LBL1 payload ({e})", path.display()))
    })?;
    let clean: Vec<i8> = buf[..n].iter().map(|&b| b as i8).collect();
    let noisy: Vec<i8> = buf[n..].iter().map(|&b| b as i8).collect();
    Ok((clean, noisy))
}

fn write_meta(path: &Path, meta: &NoiseMeta) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match meta.kind {
        NoiseKind::Clean => writeln!(w, "kind = clean")?,
        NoiseKind::Mislabel { epsilon } => {
            writeln!(w, "kind = mislabel")?;
            writeln!(w, "epsilon = {epsilon}")?;
        }
        NoiseKind::Uncertain { omega } => {
            writeln!(w, "kind = uncertain")?;
            writeln!(w, "omega = {omega}")?;
        }
    }
    if let Some(s) = meta.noise_seed {
        writeln!(w, "noise_seed = {s}")?;
    }
    if let Some(s) = meta.gen_seed {
        writeln!(w, "gen_seed = {s}")?;
    }
    if let Some(g) = &meta.generator {
        writeln!(w, "d = {}", g.d())?;
        writeln!(w, "gamma = {}", g.gamma())?;
        writeln!(w, "phi = {}", g.phi())?;
        writeln!(w, "n = {}", g.n())?;
    }
    w.flush()?;
    Ok(())
}

fn read_meta(path: &Path) -> Result<NoiseMeta> {
    let r = BufReader::new(File::open(path)?);
    let mut kv = std::collections::BTreeMap::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            LabError::Format(format!("{}: expected key = value, got '{line}'", path.display()))
        })?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let parse_f64 = |key: &str| -> Result<f64> {
        kv.get(key)
            .ok_or_else(|| LabError::Format(format!("{}: missing key '{key}'", path.display())))?
            .parse::<f64>()
            .map_err(|e| LabError::Format(format!("{}: bad value for '{key}' ({e})", path.display())))
    };
    let kind = match kv.get("kind").map(String::as_str) {
        Some("clean") => NoiseKind::Clean,
        Some("mislabel") => NoiseKind::Mislabel {
            epsilon: parse_f64("epsilon")?,
        },
        Some("uncertain") => NoiseKind::Uncertain {
            omega: parse_f64("omega")?,
        },
        other => {
            return Err(LabError::Format(format!(
                "{}: unknown noise kind {other:?}",
                path.display()
            )))
        }
    };
    let parse_u64 = |key: &str| -> Result<Option<u64>> {
        kv.get(key)
            .map(|v| {
                v.parse::<u64>().map_err(|e| {
                    LabError::Format(format!("{}: bad value for '{key}' ({e})", path.display()))
                })
            })
            .transpose()
    };
    let generator = if kv.contains_key("d") {
        Some(PreferencePairConfig::new(
            parse_f64("d")? as usize,
            parse_f64("gamma")?,
            parse_f64("phi")?,
            parse_f64("n")? as usize,
        )?)
    } else {
        None
    };
    Ok(NoiseMeta {
        kind,
        noise_seed: parse_u64("noise_seed")?,
        gen_seed: parse_u64("gen_seed")?,
        generator,
    })
}
