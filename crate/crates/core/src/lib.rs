//! Monte Carlo toolkit for bi-directional grid constrained (BGC) diffusions.
//!
//! * [`psi`]: constraint surfaces `Ψ(x, t)`, their grids and convexity.
//! * [`sde`]: unconstrained, drift-constrained, diffusion-constrained and
//!   pointwise-transform path generation with per-path random streams.
//! * [`oup`]: the Ornstein-Uhlenbeck reference process.
//! * [`barrier`]: quantile envelopes, hidden-barrier fits and band detection.
//! * [`ensemble_io`]: run directories, digests and summaries.

pub mod barrier;
pub mod ensemble;
pub mod ensemble_io;
pub mod error;
pub mod oup;
pub mod psi;
pub mod rng;
pub mod sde;

#[cfg(test)]
pub(crate) mod testutil;

pub use ensemble::{EnsembleConfig, Path, PathEnsemble};
pub use error::{Error, ErrorCategory, Result};

/// Decimal rendering with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
