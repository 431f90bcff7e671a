use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::fmt_f64;

/// Envelope quantile used when none is given; pure min/max is dominated by a
/// handful of extreme paths at realistic ensemble sizes.
pub const DEFAULT_QUANTILE: f64 = 0.995;

/// Per-time cross-path quantile band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub times: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub quantile: f64,
}

/// Linearly interpolated quantile of sorted data (Hyndman-Fan type 7, the
/// default of R and NumPy). `q = 0` and `q = 1` give min and max.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Lower `(1 − q)` and upper `q` quantile of the non-diverged path values at
/// every step.
pub fn empirical_envelope(ensemble: &PathEnsemble, quantile: f64) -> Result<Envelope> {
    if !(quantile > 0.5 && quantile <= 1.0) {
        return Err(Error::Precondition(format!(
            "envelope quantile must lie in (0.5, 1], got {quantile}"
        )));
    }
    let paths: Vec<&[f64]> = ensemble.finite_paths().map(|p| p.values.as_slice()).collect();
    if paths.is_empty() {
        return Err(Error::EmptyInput(
            "no non-diverged paths to build an envelope from".into(),
        ));
    }
    let steps = ensemble.steps();
    let mut lower = Vec::with_capacity(steps);
    let mut upper = Vec::with_capacity(steps);
    let mut column = Vec::with_capacity(paths.len());
    for j in 0..steps {
        column.clear();
        column.extend(paths.iter().map(|p| p[j]));
        column.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&column, 1.0 - quantile));
        upper.push(quantile_sorted(&column, quantile));
    }
    Ok(Envelope {
        times: ensemble.times(),
        lower,
        upper,
        quantile,
    })
}

impl Envelope {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,lower,upper`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "lower", "upper"])?;
        for j in 0..self.len() {
            w.write_record([fmt_f64(self.times[j]), fmt_f64(self.lower[j]), fmt_f64(self.upper[j])])?;
        }
        w.flush()?;
        Ok(())
    }
}
