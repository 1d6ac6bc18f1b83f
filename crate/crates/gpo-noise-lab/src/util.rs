//! Small dense-vector helpers shared across the crate.
//!
//! The laboratory works with plain `&[f64]` slices rather than a matrix
//! library: every hot loop is a dot product or an axpy over a few hundred
//! components, and keeping the representation flat makes the file formats
//! and the determinism story trivial.

/// Dot product of two equal-length slices.
///
/// Panics in debug builds if the lengths differ; callers validate dimensions
/// at their API boundary.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// `y += alpha * x`, in place.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}

/// Euclidean norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scale a vector in place.
#[inline]
pub fn scale(a: &mut [f64], alpha: f64) {
    for v in a.iter_mut() {
        *v *= alpha;
    }
}

/// Normalize to unit Euclidean norm, returning the original norm.
///
/// Leaves the vector untouched (and returns 0) when the norm is exactly zero,
/// so callers can detect the degenerate case.
#[inline]
pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n);
    }
    n
}

/// Numerically stable logistic function `1 / (1 + exp(-z))`.
///
/// Evaluates through the exponential of the negative magnitude only, so it
/// never overflows; `sigmoid(-inf) = 0`, `sigmoid(inf) = 1`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `log(1 + exp(z))` (the softplus function).
///
/// For large `|z|` the naive form overflows or loses all precision; the
/// branched form is exact to working precision over the whole line.
#[inline]
pub fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean and (population) standard error of the mean for a sample.
///
/// Returns `(mean, stderr)` where `stderr = sample_std / sqrt(n)` using the
/// unbiased (n-1) variance estimate; `stderr` is 0 for n < 2.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// SplitMix64 finalizer: a cheap bijective mixer with full avalanche.
#[inline]
fn mix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent substream seed from a base seed and a tag path.
///
/// Every (purpose, cell, trial, ...) coordinate in a sweep gets its own tag
/// path, so concurrent work items draw from decorrelated ChaCha streams
/// while the whole experiment stays a pure function of one base seed.
pub fn stream_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = mix64(base);
    for &t in tags {
        s = mix64(s ^ mix64(t));
    }
    s
}
