//! Floating-point verification layer: Monte Carlo and adaptive-quadrature
//! estimates of the singular integrals the exact layer reasons about,
//! envelope-bound checks, power-law and homogeneity fits, and divergence
//! diagnostics realizing the witness constructions.
//!
//! Estimates are deterministic: a fixed `(seed, n_samples, method, input)`
//! reproduces the same bits regardless of thread count, because samples are
//! drawn in fixed-size batches keyed by `(seed, batch index)` and merged in
//! batch order.

mod homogeneity;
mod lambda;
mod quad;
mod riesz;
mod sampling;
mod selberg;

pub use homogeneity::{homogeneity_ratio_test, HomogeneityPoint, HomogeneityReport};
pub use lambda::{lambda_estimate, lambda_estimate_truncated, FunctionDescriptor, LambdaReport};
pub use quad::{
    interval_power_product, interval_power_product_with, line_power_product,
    lower_tail_power_product, upper_tail_power_product, Quad,
};
pub use riesz::{ball_composition, envelope_l, riesz_composition};
pub use sampling::vol_ball;
pub use selberg::{
    divergence_diagnostic, mc_selberg_ball, mc_selberg_ball_radius, DivergenceReport,
    DivergenceVerdict, GrowthFit, GrowthKind,
};

use crate::kernel::KernelError;

/// Relative distance below which two sampled points count as coincident and
/// the draw is repeated (the event has probability zero; this guards the
/// floating-point overflow, not the measure theory). Equal to `2^{-40}`.
pub const COINCIDENCE_FACTOR: f64 = 9.094947017729282e-13;

/// How far the heavy-tail witnesses are truncated by default when they are
/// fed to the sampling estimator (their defining integrals only converge
/// against the norm, not pointwise).
pub const LOG_TAIL_DEFAULT_TRUNCATION: f64 = 65536.0;

/// Inner radius of the log-tail witness; part of its definition.
pub const LOG_TAIL_INNER_RADIUS: f64 = 2.0;

/// How a floating-point estimate was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McMethod {
    /// Plain uniform sampling over a bounded product domain.
    Uniform,
    /// Importance sampling from a mixture adapted to the integrand's
    /// singularities and tails.
    Importance,
    /// Deterministic one-dimensional adaptive quadrature.
    Quadrature1d,
}

impl std::fmt::Display for McMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            McMethod::Uniform => "uniform",
            McMethod::Importance => "importance",
            McMethod::Quadrature1d => "quadrature1d",
        })
    }
}

/// One reproducible numerical estimate.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub mean: f64,
    /// Standard error of the mean (for quadrature: the accumulated local
    /// error estimate).
    pub stderr: f64,
    /// Samples drawn (for quadrature: integrand evaluations).
    pub n_samples: u64,
    pub seed: u64,
    pub method: McMethod,
}

impl McEstimate {
    /// Whether two estimates agree within `k` combined standard errors.
    pub fn agrees_with(&self, other: &McEstimate, k: f64) -> bool {
        let combined = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        (self.mean - other.mean).abs() <= k * combined
    }
}

/// Errors from the floating-point layer.
#[derive(Debug, thiserror::Error)]
pub enum NumericError {
    /// A precondition guaranteeing convergence fails, or a quadrature
    /// domain contains a non-integrable singularity.
    #[error("integral diverges: {0}")]
    Divergent(String),
    /// The adaptive rule could not produce a trustworthy value.
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    /// Coincidence-guard resampling exceeded one percent of draws.
    #[error("coincidence resample rate {resampled}/{total} exceeds 1%")]
    CoincidenceRate { resampled: u64, total: u64 },
    /// A descriptor/exponent pairing with an infinite norm.
    #[error("descriptor {index} has infinite norm: {detail}")]
    InfiniteNorm { index: usize, detail: String },
    /// The requested estimation method does not apply to this operation.
    #[error("method {method} unavailable: {detail}")]
    UnsupportedMethod { method: McMethod, detail: String },
    /// Malformed numeric input (dimensions, signs, ranges).
    #[error("invalid numeric input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
