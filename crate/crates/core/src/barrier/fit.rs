use serde::{Deserialize, Serialize};

use super::envelope::{empirical_envelope, Envelope};
use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};

/// θ search domain. The time unit is that of the ensemble's time grid.
pub const THETA_SEARCH_RANGE: (f64, f64) = (1e-4, 1.0);

const THETA_GRID_POINTS: usize = 400;
const MAX_ITERATIONS: usize = 500;
const MIN_TIME_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierSide {
    Lower,
    Upper,
    /// Both envelope sides with shared `(A, θ)` and `C = 0`.
    SymmetricJoint,
}

/// Fitted barrier `B_U(t) = A(1 − e^{−θt}) + C`, `B_L(t) = −A(1 − e^{−θt}) + C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierFit {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub theta: f64,
    #[serde(rename = "C")]
    pub offset: f64,
    pub rmse: f64,
    /// Fraction of values inside `[B_L, B_U]`. After [`fit_barrier`] alone this
    /// counts envelope points; [`fit_ensemble_barrier`] replaces it with the
    /// fraction of all (path, step) values.
    pub containment: f64,
    pub side: BarrierSide,
}

impl BarrierFit {
    pub fn upper(&self, t: f64) -> f64 {
        barrier_curve(self.amplitude, self.theta, t) + self.offset
    }

    pub fn lower(&self, t: f64) -> f64 {
        -barrier_curve(self.amplitude, self.theta, t) + self.offset
    }

    fn slack(&self) -> f64 {
        1e-9 * self.amplitude.max(self.offset.abs()).max(1.0)
    }

    fn contains(&self, t: f64, v: f64) -> bool {
        let s = self.slack();
        v >= self.lower(t) - s && v <= self.upper(t) + s
    }
}

/// Parameter triple examined by the fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitCandidate {
    pub amplitude: f64,
    pub theta: f64,
    pub offset: f64,
    pub sse: f64,
}

/// `A(1 − e^{−θt})`.
pub fn barrier_curve(amplitude: f64, theta: f64, t: f64) -> f64 {
    amplitude * -(-theta * t).exp_m1()
}

struct Observations {
    t: Vec<f64>,
    y: Vec<f64>,
    /// +1 for upper-envelope points, −1 for lower.
    sign: Vec<f64>,
}

impl Observations {
    fn new(envelope: &Envelope, side: BarrierSide) -> Self {
        let mut obs = Observations {
            t: Vec::new(),
            y: Vec::new(),
            sign: Vec::new(),
        };
        let mut push = |ys: &[f64], s: f64| {
            obs.t.extend_from_slice(&envelope.times);
            obs.y.extend_from_slice(ys);
            obs.sign.extend(std::iter::repeat_n(s, ys.len()));
        };
        match side {
            BarrierSide::Upper => push(&envelope.upper, 1.0),
            BarrierSide::Lower => push(&envelope.lower, -1.0),
            BarrierSide::SymmetricJoint => {
                push(&envelope.upper, 1.0);
                push(&envelope.lower, -1.0);
            }
        }
        obs
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn sse(&self, amplitude: f64, theta: f64, offset: f64) -> f64 {
        (0..self.len())
            .map(|i| {
                let r = self.y[i] - self.sign[i] * barrier_curve(amplitude, theta, self.t[i]) - offset;
                r * r
            })
            .sum()
    }

    /// Best non-negative A (and C when free) for a fixed θ; the model is
    /// linear in both.
    fn profile(&self, theta: f64, free_offset: bool) -> FitCandidate {
        let n = self.len() as f64;
        let (mut sgg, mut sg, mut sgy, mut sy) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..self.len() {
            let g = self.sign[i] * barrier_curve(1.0, theta, self.t[i]);
            sgg += g * g;
            sg += g;
            sgy += g * self.y[i];
            sy += self.y[i];
        }
        let mean = sy / n;
        let (amplitude, offset) = if free_offset {
            let det = n * sgg - sg * sg;
            if det > 1e-12 * n * sgg.max(f64::MIN_POSITIVE) {
                let a = (n * sgy - sg * sy) / det;
                let c = (sgg * sy - sg * sgy) / det;
                if a >= 0.0 {
                    (a, c)
                } else {
                    (0.0, mean)
                }
            } else {
                (0.0, mean)
            }
        } else if sgg > 0.0 {
            ((sgy / sgg).max(0.0), 0.0)
        } else {
            (0.0, 0.0)
        };
        FitCandidate {
            amplitude,
            theta,
            offset,
            sse: self.sse(amplitude, theta, offset),
        }
    }
}

/// Least-squares fit of the saturating barrier model to one or both envelope
/// sides.
///
/// A deterministic log-spaced scan over θ (with A and C solved exactly at each
/// θ) seeds a damped Gauss-Newton (Levenberg-Marquardt) refinement of all
/// parameters. `fix_c_zero` pins the offset; it is always pinned for
/// [`BarrierSide::SymmetricJoint`].
pub fn fit_barrier(envelope: &Envelope, side: BarrierSide, fix_c_zero: bool) -> Result<BarrierFit> {
    let n = envelope.len();
    if n < MIN_TIME_POINTS {
        return Err(Error::Precondition(format!(
            "barrier fit needs at least {MIN_TIME_POINTS} time points, got {n}"
        )));
    }
    if envelope.lower.len() != n || envelope.upper.len() != n {
        return Err(Error::Precondition("envelope arrays differ in length".into()));
    }
    if envelope
        .times
        .iter()
        .chain(&envelope.lower)
        .chain(&envelope.upper)
        .any(|v| !v.is_finite())
    {
        return Err(Error::Domain("envelope contains non-finite values".into()));
    }
    let flat = |ys: &[f64]| ys.iter().all(|&v| v == 0.0);
    let degenerate = match side {
        BarrierSide::Upper | BarrierSide::SymmetricJoint => flat(&envelope.upper),
        BarrierSide::Lower => flat(&envelope.lower),
    };
    if degenerate {
        return Err(Error::UnidentifiableTheta(
            "envelope is identically zero, so A = 0 and theta is meaningless".into(),
        ));
    }

    let free_offset = !fix_c_zero && side != BarrierSide::SymmetricJoint;
    let obs = Observations::new(envelope, side);

    let (lo, hi) = THETA_SEARCH_RANGE;
    let best = (0..THETA_GRID_POINTS)
        .map(|k| {
            let theta = lo * (hi / lo).powf(k as f64 / (THETA_GRID_POINTS - 1) as f64);
            obs.profile(theta, free_offset)
        })
        .min_by(|a, b| a.sse.total_cmp(&b.sse))
        .expect("theta grid is non-empty");

    let scale = obs.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if best.amplitude <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::UnidentifiableTheta(
            "best fit has A = 0; the envelope shows no growth away from its offset".into(),
        ));
    }

    let refined = refine(&obs, best, free_offset).map_err(|reason| Error::NonConvergent { reason, best })?;
    let rmse = (refined.sse / obs.len() as f64).sqrt();
    let mut fit = BarrierFit {
        amplitude: refined.amplitude,
        theta: refined.theta,
        offset: refined.offset,
        rmse,
        containment: 0.0,
        side,
    };
    let inside = (0..n)
        .map(|j| {
            let t = envelope.times[j];
            usize::from(fit.contains(t, envelope.lower[j])) + usize::from(fit.contains(t, envelope.upper[j]))
        })
        .sum::<usize>();
    fit.containment = inside as f64 / (2 * n) as f64;
    Ok(fit)
}

#[allow(clippy::needless_range_loop)]
fn solve(mut a: [[f64; 3]; 3], mut b: [f64; 3], n: usize) -> Option<[f64; 3]> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Levenberg-Marquardt over `(A, θ[, C])` with Marquardt diagonal scaling.
/// Stops when the step is negligible or no damping level yields descent.
fn refine(obs: &Observations, start: FitCandidate, free_offset: bool) -> std::result::Result<FitCandidate, String> {
    let np = if free_offset { 3 } else { 2 };
    let (theta_lo, theta_hi) = THETA_SEARCH_RANGE;
    let mut p = [start.amplitude, start.theta, start.offset];
    let mut sse = start.sse;
    let mut lambda = 1e-3;

    for _ in 0..MAX_ITERATIONS {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for i in 0..obs.len() {
            let (t, s) = (obs.t[i], obs.sign[i]);
            let decay = (-p[1] * t).exp();
            let r = obs.y[i] - s * barrier_curve(p[0], p[1], t) - p[2];
            let jac = [s * -(-p[1] * t).exp_m1(), s * p[0] * t * decay, 1.0];
            for a in 0..np {
                jtr[a] += jac[a] * r;
                for b in 0..np {
                    jtj[a][b] += jac[a] * jac[b];
                }
            }
        }
        let max_diag = (0..np).map(|k| jtj[k][k]).fold(0.0_f64, f64::max);
        if max_diag.is_nan() || max_diag <= 0.0 || max_diag.is_infinite() {
            return Err("jacobian vanished".into());
        }

        let step = loop {
            let mut damped = jtj;
            for k in 0..np {
                damped[k][k] += lambda * jtj[k][k].max(1e-15 * max_diag);
            }
            if let Some(delta) = solve(damped, jtr, np) {
                let mut cand = p;
                for k in 0..np {
                    cand[k] += delta[k];
                }
                cand[0] = cand[0].max(0.0);
                cand[1] = cand[1].clamp(theta_lo, theta_hi);
                let cand_sse = obs.sse(cand[0], cand[1], cand[2]);
                if cand_sse.is_finite() && cand_sse <= sse {
                    lambda = (lambda * 0.1).max(1e-12);
                    break Some((cand, cand_sse));
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break None;
            }
        };

        let Some((next, next_sse)) = step else {
            // No damping level descends: p is a minimum to working precision.
            return Ok(FitCandidate {
                amplitude: p[0],
                theta: p[1],
                offset: p[2],
                sse,
            });
        };
        let small = (0..np).all(|k| (next[k] - p[k]).abs() <= 1e-14 * p[k].abs().max(1e-10));
        p = next;
        sse = next_sse;
        if small || sse == 0.0 {
            return Ok(FitCandidate {
                amplitude: p[0],
                theta: p[1],
                offset: p[2],
                sse,
            });
        }
    }
    Err(format!("no convergence after {MAX_ITERATIONS} iterations"))
}

/// Containment of ensemble values in a fitted band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    /// Fraction of non-diverged paths inside the band at each step.
    pub per_step: Vec<f64>,
    pub overall: f64,
    /// `2q − 1` for envelope quantile `q`.
    pub required_minimum: f64,
    pub meets_quantile_bound: bool,
}

/// Measures how much of `ensemble` lies inside `fit`'s band. `envelope` must be
/// the one the fit was made from; its time grid has to match the ensemble's.
pub fn check_barrier_bound(
    ensemble: &PathEnsemble,
    envelope: &Envelope,
    fit: &BarrierFit,
) -> Result<ContainmentReport> {
    let times = ensemble.times();
    let matches = times.len() == envelope.times.len()
        && times
            .iter()
            .zip(&envelope.times)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
    if !matches {
        return Err(Error::Precondition("ensemble and envelope time grids differ".into()));
    }
    let paths: Vec<&[f64]> = ensemble.finite_paths().map(|p| p.values.as_slice()).collect();
    if paths.is_empty() {
        return Err(Error::EmptyInput("no non-diverged paths to check".into()));
    }
    let mut inside_total = 0usize;
    let per_step = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let inside = paths.iter().filter(|p| fit.contains(t, p[j])).count();
            inside_total += inside;
            inside as f64 / paths.len() as f64
        })
        .collect();
    let overall = inside_total as f64 / (paths.len() * times.len()) as f64;
    let required_minimum = 2.0 * envelope.quantile - 1.0;
    Ok(ContainmentReport {
        per_step,
        overall,
        required_minimum,
        meets_quantile_bound: overall >= required_minimum,
    })
}

/// Envelope, fit and containment in one pass; the returned fit's
/// `containment` is the ensemble-wide fraction.
pub fn fit_ensemble_barrier(
    ensemble: &PathEnsemble,
    quantile: f64,
    side: BarrierSide,
    fix_c_zero: bool,
) -> Result<(Envelope, BarrierFit, ContainmentReport)> {
    let envelope = empirical_envelope(ensemble, quantile)?;
    let mut fit = fit_barrier(&envelope, side, fix_c_zero)?;
    let report = check_barrier_bound(ensemble, &envelope, &fit)?;
    fit.containment = report.overall;
    Ok((envelope, fit, report))
}
