use serde::{Deserialize, Serialize};

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};

/// Peaks below this fraction of the histogram maximum are ignored.
pub const PEAK_PROMINENCE_FRACTION: f64 = 0.05;

const MIN_BINS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub location: f64,
    /// In smoothed-count units.
    pub prominence: f64,
}

/// Occupancy histogram of all path values with its significant peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub bin_centers: Vec<f64>,
    pub counts: Vec<u64>,
    pub peaks: Vec<Peak>,
    /// Sum of peak prominences relative to the smoothed maximum; a single
    /// isolated mode scores about 1.
    #[serde(rename = "score")]
    pub multimodality_score: f64,
}

pub fn default_smoothing_window(n_bins: usize) -> usize {
    (n_bins / 64).max(1)
}

/// Pools every value of every non-diverged path into `n_bins` bins, smooths
/// with a centred moving average and reports prominent local maxima.
///
/// The moving average spans `2·⌊w/2⌋ + 1` bins so it stays centred. The value
/// range is padded by 5% on each side, keeping a mode at the extreme of the
/// data away from the histogram edge.
pub fn detect_bands(ensemble: &PathEnsemble, n_bins: usize, smoothing_window: usize) -> Result<BandReport> {
    if n_bins < MIN_BINS {
        return Err(Error::Precondition(format!(
            "band detection needs at least {MIN_BINS} bins, got {n_bins}"
        )));
    }
    if smoothing_window == 0 {
        return Err(Error::Precondition("smoothing window must be at least 1".into()));
    }
    let values = || ensemble.finite_paths().flat_map(|p| p.values.iter().copied());
    let (min, max) = values().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if min > max {
        return Err(Error::EmptyInput("no non-diverged path values to bin".into()));
    }

    let (lo, width) = if max > min {
        let pad = 0.05 * (max - min);
        (min - pad, (max - min + 2.0 * pad) / n_bins as f64)
    } else {
        // Degenerate range: centre the single value in the middle bin.
        let width = 1e-3 * min.abs().max(1.0);
        (min - (n_bins / 2) as f64 * width - 0.5 * width, width)
    };
    let mut counts = vec![0u64; n_bins];
    for v in values() {
        let k = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let bin_centers: Vec<f64> = (0..n_bins).map(|k| lo + (k as f64 + 0.5) * width).collect();

    let half = smoothing_window / 2;
    let smoothed: Vec<f64> = (0..n_bins)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half).min(n_bins - 1);
            counts[a..=b].iter().sum::<u64>() as f64 / (b - a + 1) as f64
        })
        .collect();

    let global = smoothed.iter().copied().fold(0.0, f64::max);
    let threshold = PEAK_PROMINENCE_FRACTION * global;
    let peaks: Vec<Peak> = local_maxima(&smoothed)
        .into_iter()
        .filter_map(|(left, right)| {
            let prominence = prominence(&smoothed, left, right);
            (prominence > threshold).then(|| Peak {
                location: 0.5 * (bin_centers[left] + bin_centers[right]),
                prominence,
            })
        })
        .collect();
    let multimodality_score = if global > 0.0 {
        peaks.iter().map(|p| p.prominence / global).sum()
    } else {
        0.0
    };

    Ok(BandReport {
        bin_centers,
        counts,
        peaks,
        multimodality_score,
    })
}

/// Plateau extents `(first, last)` of strict local maxima. A plateau touching
/// either end of the signal still counts when its other side descends.
fn local_maxima(x: &[f64]) -> Vec<(usize, usize)> {
    let n = x.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        let rises = i == 0 || x[i - 1] < x[i];
        let falls = j == n - 1 || x[j + 1] < x[j];
        let interior = i > 0 || j < n - 1;
        if rises && falls && interior && x[i] > 0.0 {
            out.push((i, j));
        }
        i = j + 1;
    }
    out
}

/// Topographic prominence: height above the higher of the two lowest points
/// reached before climbing higher ground (or the edge) on each side.
fn prominence(x: &[f64], left: usize, right: usize) -> f64 {
    let h = x[left];
    let mut left_min = h;
    for k in (0..left).rev() {
        if x[k] > h {
            break;
        }
        left_min = left_min.min(x[k]);
    }
    let mut right_min = h;
    for &v in &x[right + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    // At an edge plateau the edge side contributes nothing.
    let left_base = if left == 0 { right_min } else { left_min };
    let right_base = if right == x.len() - 1 { left_min } else { right_min };
    h - left_base.max(right_base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::ensemble_from;

    #[test]
    fn constant_zero_has_one_peak_at_zero() {
        let ens = ensemble_from(vec![vec![0.0; 50]; 4]);
        for window in [1, 2, 4, 5] {
            let r = detect_bands(&ens, 64, window).unwrap();
            assert_eq!(r.peaks.len(), 1, "window {window}");
            assert!(r.peaks[0].location.abs() < 1e-12, "window {window}: {:?}", r.peaks);
            assert_eq!(r.counts.iter().sum::<u64>(), 200);
        }
    }

    #[test]
    fn two_clusters_score_higher_than_one() {
        let one = ensemble_from(vec![vec![1.0; 200]]);
        let two = ensemble_from(vec![(0..200).map(|i| if i % 3 == 0 { 10.0 } else { 1.0 }).collect()]);
        let a = detect_bands(&one, 64, 1).unwrap();
        let b = detect_bands(&two, 64, 1).unwrap();
        assert!(b.peaks.len() >= 2);
        assert!(b.multimodality_score > a.multimodality_score);
        assert!(b.peaks.windows(2).all(|w| w[0].location < w[1].location));
    }

    #[test]
    fn bin_count_precondition() {
        let ens = ensemble_from(vec![vec![0.0; 5]]);
        assert!(matches!(detect_bands(&ens, 31, 1), Err(Error::Precondition(_))));
        assert!(matches!(detect_bands(&ens, 32, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn prominence_of_nested_peaks() {
        //            0    1    2    3    4    5    6
        let x = [0.0, 5.0, 1.0, 3.0, 2.0, 4.0, 0.0];
        let peaks = local_maxima(&x);
        assert_eq!(peaks, vec![(1, 1), (3, 3), (5, 5)]);
        assert_eq!(prominence(&x, 1, 1), 5.0);
        assert_eq!(prominence(&x, 3, 3), 1.0);
        assert_eq!(prominence(&x, 5, 5), 3.0);
    }
}
