//! # gpo-noise-lab
//!
//! A desk-scale simulation laboratory for studying how preference-optimization
//! losses (DPO, IPO, SLiC) generalize when the preference labels are noisy.
//!
//! The laboratory is organized as a pipeline:
//!
//! ```text
//!   vmf        -- von Mises-Fisher sampling on the (d-1)-sphere and the
//!                 closed-form radial quantities t_gamma and t_0
//!   prefdata   -- two-cluster preference datasets, epsilon-mislabel and
//!                 omega-uncertain corruption, omega calibration
//!   gpoloss    -- the convex surrogate family f (logistic / squared / hinge)
//!                 and the linear preference head with reward margins
//!   trainer    -- finite-step full-batch gradient descent, reward-margin
//!                 dynamics, and the boundary-shift time budget
//!   risk       -- Monte-Carlo 0-1 risk, accuracy curves over noise rates
//!   bounds     -- evaluable closed-form noise thresholds and risk bounds
//!                 with explicit precondition reports
//!   geometry   -- diagnostics for ingested embedding matrices (norm
//!                 uniformity, concentration and separation estimates)
//!   harness    -- configuration, deterministic seeding, sweep orchestration
//!                 and CSV emission
//! ```
//!
//! Everything downstream of an explicit RNG stream is deterministic: sweeps
//! derive one counter-based stream per (cell, trial), so any cell can be
//! reproduced in isolation and full reruns are byte-identical.

pub mod bounds;
pub mod geometry;
pub mod gpoloss;
pub mod harness;
pub mod prefdata;
pub mod risk;
pub mod trainer;
pub mod util;
pub mod vmf;

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: configuration problems exit with 2,
/// violated mathematical preconditions and failed calibrations with 3, and
/// I/O problems with 4.
#[derive(Debug, Error)]
pub enum LabError {
    /// Malformed configuration file, unknown key, or invalid CLI argument.
    #[error("config error: {0}")]
    Config(String),
    /// Vector/matrix dimensions that cannot be combined.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A mathematical precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Bisection calibration could not reach the requested tolerance.
    #[error("calibration failed: {0}")]
    Calibration(String),
    /// Full-batch training loss exceeded the divergence guard.
    #[error("training diverged: {0}")]
    Divergence(String),
    /// Underlying file-system or format error.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// A data file did not match its declared format.
    #[error("format error: {0}")]
    Format(String),
}

impl LabError {
    /// Process exit code associated with this error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Dimension(_) => 2,
            LabError::Precondition(_) | LabError::Calibration(_) | LabError::Divergence(_) => 3,
            LabError::Io(_) | LabError::Format(_) => 4,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, LabError>;
