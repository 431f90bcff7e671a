//! Hidden-barrier analysis of path ensembles.
//!
//! The emergent barriers are made measurable in three steps: per-time
//! quantile [`Envelope`]s across paths, a least-squares fit of
//! `B(t) = ±A(1 − e^{−θt}) + C` to those envelopes, and a containment check of
//! every path value against the fitted band. [`detect_bands`] quantifies the
//! horizontal banding of constrained ensembles.

mod bands;
mod envelope;
mod fit;

pub use bands::{default_smoothing_window, detect_bands, BandReport, Peak, PEAK_PROMINENCE_FRACTION};
pub use envelope::{empirical_envelope, quantile_sorted, Envelope, DEFAULT_QUANTILE};
pub use fit::{
    barrier_curve, check_barrier_bound, fit_barrier, fit_ensemble_barrier, BarrierFit, BarrierSide, ContainmentReport,
    FitCandidate, THETA_SEARCH_RANGE,
};
