//! High-dimensional von Mises-Fisher distribution.
//!
//! The vMF distribution on the unit sphere in `R^d` has density proportional
//! to `exp(kappa * mu^T x)` for a unit mean direction `mu` and concentration
//! `kappa >= 0`. Throughout the crate the concentration is parameterized by
//! its dimension-normalized form
//!
//! ```text
//!     gamma = 2 * kappa / d
//! ```
//!
//! which keeps the "effective separation strength" comparable across
//! dimensions. Two closed-form radial quantities recur in the theoretical
//! bounds and are exposed here:
//!
//! ```text
//!     t_gamma = (sqrt(1 + gamma^2) - 1) / gamma        (lower bound on E[mu^T x])
//!     t_0     = (sqrt(gamma^2 + a^2) - a) / gamma,     a = 1 - 3/d
//! ```
//!
//! `t_0` is the mode of the radial density `exp(kappa t) (1 - t^2)^((d-3)/2)`,
//! i.e. the unique stationary point of its logarithm. `t_gamma` is the
//! Laforgia-Natalini lower bound on the mean resultant length, which `t_0`
//! converges to as `d -> infinity`.
//!
//! Sampling uses rejection on the radial component with the Ulrich/Wood
//! beta-envelope (exact for every `kappa >= 0`, including `kappa = 0`, where
//! it degenerates to the uniform sphere and accepts every proposal) plus a
//! uniformly distributed tangent direction.
//!
//! References:
//! - Ulrich, G. (1984). Computer generation of distributions on the m-sphere.
//! - Wood, A. T. A. (1994). Simulation of the von Mises Fisher distribution.
//! - Laforgia, A., Natalini, P. (2010). Some inequalities for modified Bessel
//!   functions.

pub mod quadrature;

use crate::util::{axpy, dot, normalize};
use crate::{LabError, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Unit-norm tolerance enforced on mean directions.
const MU_NORM_TOL: f64 = 1e-12;

/// Parameters of one von Mises-Fisher distribution.
///
/// `kappa` and `gamma` are kept consistent by construction (`gamma = 2
/// kappa / d`); the fields are private so they can never drift apart.
#[derive(Debug, Clone)]
pub struct VmfParams {
    mu: Vec<f64>,
    kappa: f64,
    gamma: f64,
}

impl VmfParams {
    /// Build from a mean direction and concentration `kappa >= 0`.
    pub fn from_kappa(mu: Vec<f64>, kappa: f64) -> Result<Self> {
        Self::validate_mu(&mu)?;
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(LabError::Precondition(format!(
                "vMF concentration must be finite and >= 0, got {kappa}"
            )));
        }
        let gamma = 2.0 * kappa / mu.len() as f64;
        Ok(Self { mu, kappa, gamma })
    }

    /// Build from a mean direction and normalized concentration
    /// `gamma = 2 kappa / d >= 0`.
    pub fn from_gamma(mu: Vec<f64>, gamma: f64) -> Result<Self> {
        Self::validate_mu(&mu)?;
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(LabError::Precondition(format!(
                "normalized concentration must be finite and >= 0, got {gamma}"
            )));
        }
        let kappa = gamma * mu.len() as f64 / 2.0;
        Ok(Self { mu, kappa, gamma })
    }

    fn validate_mu(mu: &[f64]) -> Result<()> {
        if mu.len() < 3 {
            return Err(LabError::Precondition(format!(
                "vMF dimension must be >= 3, got {}",
                mu.len()
            )));
        }
        let n = dot(mu, mu).sqrt();
        if (n - 1.0).abs() > MU_NORM_TOL {
            return Err(LabError::Precondition(format!(
                "mean direction must be unit norm (|norm - 1| <= {MU_NORM_TOL}), got norm {n}"
            )));
        }
        Ok(())
    }

    /// Mean direction (unit norm).
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Concentration parameter `kappa`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Normalized concentration `gamma = 2 kappa / d`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Ambient dimension `d`.
    pub fn d(&self) -> usize {
        self.mu.len()
    }
}

/// Dense row-major matrix of embeddings (one row per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_rows: usize,
    dim: usize,
    data: Vec<f64>,
    unit_norm: bool,
}

impl EmbeddingMatrix {
    /// Wrap a row-major buffer; `data.len()` must equal `n_rows * dim`.
    pub fn new(n_rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * dim {
            return Err(LabError::Dimension(format!(
                "embedding buffer has {} values, expected {} ({} rows x {} dims)",
                data.len(),
                n_rows * dim,
                n_rows,
                dim
            )));
        }
        Ok(Self {
            n_rows,
            dim,
            data,
            unit_norm: false,
        })
    }

    /// Number of rows (samples).
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Row dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Borrow row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterate over rows in order.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Whether every row was verified (or constructed) to have unit norm
    /// within 1e-9.
    pub fn is_unit_norm(&self) -> bool {
        self.unit_norm
    }

    /// Measure all row norms and set the unit-norm flag accordingly.
    pub fn check_unit_norm(&mut self) -> bool {
        let ok = self
            .rows()
            .all(|r| (dot(r, r).sqrt() - 1.0).abs() <= 1e-9);
        self.unit_norm = ok;
        ok
    }

    fn from_unit_rows(n_rows: usize, dim: usize, data: Vec<f64>) -> Self {
        Self {
            n_rows,
            dim,
            data,
            unit_norm: true,
        }
    }

    /// Write in the `EMB1` binary format: magic `EMB1`, u32-LE row count,
    /// u32-LE dimension, then row-major IEEE-754 f32-LE values.
    pub fn write_emb1(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(b"EMB1")?;
        w.write_all(&(self.n_rows as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for &v in &self.data {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read the `EMB1` binary format written by [`EmbeddingMatrix::write_emb1`].
    ///
    /// Values are widened to f64; the unit-norm flag is re-measured rather
    /// than assumed, since the f32 round trip perturbs norms by ~1e-7.
    pub fn read_emb1(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"EMB1" {
            return Err(LabError::Format(format!(
                "{} is not an EMB1 file (bad magic {:?})",
                path.display(),
                magic
            )));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let n_rows = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        let mut data = Vec::with_capacity(n_rows * dim);
        let mut f32buf = [0u8; 4];
        for _ in 0..n_rows * dim {
            r.read_exact(&mut f32buf).map_err(|e| {
                LabError::Format(format!(
                    "{}: truncated EMB1 payload ({e})",
                    path.display()
                ))
            })?;
            data.push(f32::from_le_bytes(f32buf) as f64);
        }
        let mut m = Self::new(n_rows, dim, data)?;
        m.check_unit_norm();
        Ok(m)
    }

    /// Write as plain CSV: one row per line, raw components, no header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read the CSV alternative format (one row per line, no header).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        let mut data = Vec::new();
        let mut dim = None;
        let mut n_rows = 0;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        LabError::Format(format!(
                            "{}:{}: bad component ({e})",
                            path.display(),
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(LabError::Format(format!(
                        "{}:{}: row has {} components, expected {}",
                        path.display(),
                        lineno + 1,
                        row.len(),
                        d
                    )))
                }
                _ => {}
            }
            data.extend_from_slice(&row);
            n_rows += 1;
        }
        let dim = dim.ok_or_else(|| {
            LabError::Format(format!("{}: no rows found", path.display()))
        })?;
        let mut m = Self::new(n_rows, dim, data)?;
        m.check_unit_norm();
        Ok(m)
    }
}

/// Laforgia-Natalini lower bound `t_gamma = (sqrt(1 + gamma^2) - 1) / gamma`
/// on the expected radial component.
///
/// Evaluated in the conjugate form `gamma / (sqrt(1 + gamma^2) + 1)`, which
/// is algebraically identical but free of subtractive cancellation, so the
/// small-gamma limit `gamma / 2` is reached smoothly to machine precision.
pub fn t_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(LabError::Precondition(format!(
            "t_gamma requires gamma > 0, got {gamma}"
        )));
    }
    Ok(gamma / ((1.0 + gamma * gamma).sqrt() + 1.0))
}

/// Mode `t_0` of the radial density in dimension `d`:
///
/// ```text
///     t_0 = (sqrt(gamma^2 + a^2) - a) / gamma,    a = 1 - 3/d
/// ```
///
/// This is the unique stationary point of `radial_log_density`, i.e. the
/// solution of `gamma/2 - a * t / (1 - t^2) = 0` in (0, 1). Like
/// [`t_gamma`], it is evaluated in the cancellation-free conjugate form
/// `gamma / (sqrt(gamma^2 + a^2) + a)`. As `d -> infinity`, `a -> 1` and
/// `t_0 -> t_gamma`.
pub fn t_zero(gamma: f64, d: usize) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(LabError::Precondition(format!(
            "t_zero requires gamma > 0, got {gamma}"
        )));
    }
    if d < 3 {
        return Err(LabError::Precondition(format!(
            "t_zero requires d >= 3, got {d}"
        )));
    }
    let a = 1.0 - 3.0 / d as f64;
    Ok(gamma / ((gamma * gamma + a * a).sqrt() + a))
}

/// Unnormalized log density of the radial component `t = mu^T x`:
///
/// ```text
///     h(t) = kappa * t + ((d - 3) / 2) * ln(1 - t^2)
/// ```
///
/// Returns `-inf` at `t = +/-1` when `d > 3`; for `d = 3` the second term
/// vanishes identically and `h(t) = kappa * t`.
pub fn radial_log_density(t: f64, params: &VmfParams) -> f64 {
    debug_assert!((-1.0..=1.0).contains(&t), "radial component out of range");
    let c = (params.d() as f64 - 3.0) / 2.0;
    if c == 0.0 {
        params.kappa() * t
    } else {
        params.kappa() * t + c * (1.0 - t * t).ln()
    }
}

/// Draw `n` i.i.d. vMF samples as rows of an [`EmbeddingMatrix`].
///
/// Radial component by Ulrich/Wood beta-envelope rejection; tangential
/// component as a normalized Gaussian projected orthogonal to `mu`. Every
/// returned row is renormalized to unit norm.
pub fn sample_vmf<R: Rng + ?Sized>(
    params: &VmfParams,
    n: usize,
    rng: &mut R,
) -> Result<EmbeddingMatrix> {
    if n == 0 {
        return Err(LabError::Precondition(
            "sample count must be >= 1".to_string(),
        ));
    }
    let d = params.d();
    let radial = RadialSampler::new(params.kappa(), d);
    let mut data = Vec::with_capacity(n * d);
    let mut tangent = vec![0.0; d];
    for _ in 0..n {
        let t = radial.sample(rng);
        sample_unit_tangent(params.mu(), &mut tangent, rng);
        let start = data.len();
        data.extend_from_slice(params.mu());
        let row = &mut data[start..];
        let s = (1.0 - t * t).max(0.0).sqrt();
        for i in 0..d {
            row[i] = t * row[i] + s * tangent[i];
        }
        normalize(row);
    }
    Ok(EmbeddingMatrix::from_unit_rows(n, d, data))
}

/// Rejection sampler for the vMF radial component.
///
/// Proposals `w = (1 - (1+b)Z) / (1 - (1-b)Z)` with `Z ~ Beta(m, m)`,
/// `m = (d-1)/2`, are accepted when
///
/// ```text
///     kappa*w + (d-1) ln(1 - x0 w) - c >= ln U
/// ```
///
/// where `b` is evaluated in the cancellation-free conjugate form
/// `(d-1) / (2 kappa + sqrt(4 kappa^2 + (d-1)^2))`, `x0 = (1-b)/(1+b)`, and
/// `c = kappa x0 + (d-1) ln(1 - x0^2)`. At `kappa = 0` this gives `b = 1`,
/// `x0 = 0`, `c = 0`, so every proposal is accepted and `w = 1 - 2Z` has
/// exactly the uniform-sphere radial law.
struct RadialSampler {
    kappa: f64,
    dm1: f64,
    b: f64,
    x0: f64,
    c: f64,
    beta: Beta<f64>,
}

impl RadialSampler {
    fn new(kappa: f64, d: usize) -> Self {
        let dm1 = (d - 1) as f64;
        let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
        let m = dm1 / 2.0;
        let beta = Beta::new(m, m).expect("Beta(m, m) with m >= 1 is always valid");
        Self {
            kappa,
            dm1,
            b,
            x0,
            c,
            beta,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let z: f64 = self.beta.sample(rng);
            let w = (1.0 - (1.0 + self.b) * z) / (1.0 - (1.0 - self.b) * z);
            let u: f64 = rng.random();
            if self.kappa * w + self.dm1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                return w.clamp(-1.0, 1.0);
            }
        }
    }
}

/// Fill `out` with a uniform unit vector orthogonal to `mu`.
fn sample_unit_tangent<R: Rng + ?Sized>(mu: &[f64], out: &mut [f64], rng: &mut R) {
    loop {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let along = dot(mu, out);
        axpy(-along, mu, out);
        if normalize(out) > 1e-12 {
            return;
        }
        // A Gaussian landing numerically parallel to mu has probability ~0;
        // resampling keeps the output exactly distributed either way.
    }
}
