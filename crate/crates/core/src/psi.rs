//! Constraint surfaces `Ψ(x, t)`.
//!
//! A [`PsiSpec`] selects one of the built-in surfaces (or a tabulated one) and
//! its scale constants. Besides point evaluation the module samples surfaces
//! onto grids, derives the restoring-force field `−sgn(x)·Ψ(x, t)` and
//! classifies convexity from discrete second differences.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::sde::sgn;

/// Tolerance used by [`classify_convexity`] when callers have no opinion.
pub const DEFAULT_CONVEXITY_TOLERANCE: f64 = 1e-9;

/// Default x-domain for sampled surfaces; wide enough to cover the barrier
/// range of the ω values used in practice.
pub const DEFAULT_X_RANGE: (f64, f64) = (-50.0, 50.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    /// `|x|`
    Wedge,
    /// `x² / ω`
    ParabolicCylinder { omega: f64 },
    /// `(eˣ + e⁻ˣ) / ω`
    DoubleExpCylinder { omega: f64 },
    /// `x²·t / ω`
    RampedParabola { omega: f64 },
    /// `|x|ⁿ / ω₁ + ω₂` when `splice` is set, otherwise the signed `xⁿ / ω₁ + ω₂`.
    SplicedPolynomial {
        omega1: f64,
        omega2: f64,
        exponent: u32,
        splice: bool,
    },
    /// Piecewise-linear in x through `(xs[i], ys[i])`, constant in t, linearly
    /// extrapolated past the end points.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
    /// Constraint disabled.
    Zero,
}

impl PsiSpec {
    pub fn parabolic(omega: f64) -> Self {
        PsiSpec::ParabolicCylinder { omega }
    }

    pub fn double_exp(omega: f64) -> Self {
        PsiSpec::DoubleExpCylinder { omega }
    }

    pub fn ramped(omega: f64) -> Self {
        PsiSpec::RampedParabola { omega }
    }

    pub fn spliced(omega1: f64, omega2: f64) -> Self {
        PsiSpec::SplicedPolynomial {
            omega1,
            omega2,
            exponent: 3,
            splice: true,
        }
    }

    /// The signed cubic `x³/ω₁ + ω₂`, i.e. the polynomial before splicing.
    pub fn unspliced_cubic(omega1: f64, omega2: f64) -> Self {
        PsiSpec::SplicedPolynomial {
            omega1,
            omega2,
            exponent: 3,
            splice: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        match self {
            PsiSpec::Wedge | PsiSpec::Zero => Ok(()),
            PsiSpec::ParabolicCylinder { omega }
            | PsiSpec::DoubleExpCylinder { omega }
            | PsiSpec::RampedParabola { omega } => positive("omega", *omega),
            PsiSpec::SplicedPolynomial {
                omega1,
                omega2,
                exponent,
                ..
            } => {
                positive("omega1", *omega1)?;
                if !omega2.is_finite() {
                    return Err(Error::InvalidConfig(format!("omega2 must be finite, got {omega2}")));
                }
                if *exponent == 0 {
                    return Err(Error::InvalidConfig("exponent must be a positive integer".into()));
                }
                Ok(())
            }
            PsiSpec::Tabulated { xs, ys } => {
                if xs.len() < 2 || xs.len() != ys.len() {
                    return Err(Error::InvalidConfig(
                        "tabulated psi needs at least two (x, y) pairs of equal length".into(),
                    ));
                }
                if xs.iter().chain(ys).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig("tabulated psi values must be finite".into()));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidConfig(
                        "tabulated psi abscissae must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Unchecked evaluation. Overflow (e.g. `eˣ` for large x) yields `+∞`.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        match self {
            PsiSpec::Wedge => x.abs(),
            PsiSpec::ParabolicCylinder { omega } => x * x / omega,
            PsiSpec::DoubleExpCylinder { omega } => (x.exp() + (-x).exp()) / omega,
            PsiSpec::RampedParabola { omega } => x * x * t / omega,
            PsiSpec::SplicedPolynomial {
                omega1,
                omega2,
                exponent,
                splice,
            } => {
                let base = if *splice { x.abs() } else { x };
                base.powi(*exponent as i32) / omega1 + omega2
            }
            PsiSpec::Tabulated { xs, ys } => interpolate(xs, ys, x),
            PsiSpec::Zero => 0.0,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, PsiSpec::RampedParabola { .. })
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    // Segment index, clamped so the end segments extrapolate.
    let i = match xs.partition_point(|&v| v <= x) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    let (x0, x1, y0, y1) = (xs[i], xs[i + 1], ys[i], ys[i + 1]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Checked evaluation of `Ψ(x, t)`.
pub fn eval_psi(spec: &PsiSpec, x: f64, t: f64) -> Result<f64> {
    if !x.is_finite() || !t.is_finite() {
        return Err(Error::Domain(format!("psi evaluated at non-finite point ({x}, {t})")));
    }
    Ok(spec.value(x, t))
}

impl fmt::Display for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Wedge => write!(f, "wedge"),
            PsiSpec::ParabolicCylinder { omega } => write!(f, "parabolic:omega={omega}"),
            PsiSpec::DoubleExpCylinder { omega } => write!(f, "doubleexp:omega={omega}"),
            PsiSpec::RampedParabola { omega } => write!(f, "ramped:omega={omega}"),
            PsiSpec::SplicedPolynomial {
                omega1,
                omega2,
                exponent,
                splice,
            } => write!(
                f,
                "spliced:omega1={omega1},omega2={omega2},n={exponent},splice={splice}"
            ),
            PsiSpec::Tabulated { xs, ys } => {
                let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join("|");
                write!(f, "table:x={},y={}", join(xs), join(ys))
            }
            PsiSpec::Zero => write!(f, "zero"),
        }
    }
}

/// Parses the `kind:key=value,...` grammar, e.g. `parabolic:omega=100` or
/// `spliced:omega1=200,omega2=5`. Unknown kinds and keys are rejected.
impl FromStr for PsiSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (s.trim(), ""),
        };
        let mut pairs = Vec::new();
        if !rest.is_empty() {
            for item in rest.split(',') {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidConfig(format!("psi parameter `{item}` is not key=value")))?;
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
        let allowed: &[&str] = match kind {
            "wedge" | "zero" => &[],
            "parabolic" | "doubleexp" | "ramped" => &["omega"],
            "spliced" => &["omega1", "omega2", "n", "splice"],
            "table" => &["x", "y"],
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown psi kind `{other}` (expected wedge, parabolic, doubleexp, ramped, spliced, table or zero)"
                )))
            }
        };
        for (k, _) in &pairs {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "unknown psi parameter `{k}` for kind `{kind}`"
                )));
            }
        }
        let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let num = |key: &str, default: f64| -> Result<f64> {
            match get(key) {
                None => Ok(default),
                Some(v) => v
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("psi parameter `{key}` is not a number: `{v}`"))),
            }
        };
        let list = |key: &str| -> Result<Vec<f64>> {
            let raw = get(key).ok_or_else(|| Error::InvalidConfig(format!("table psi requires `{key}`")))?;
            raw.split('|')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidConfig(format!("bad number `{v}` in psi parameter `{key}`")))
                })
                .collect()
        };

        let spec = match kind {
            "wedge" => PsiSpec::Wedge,
            "zero" => PsiSpec::Zero,
            "parabolic" => PsiSpec::ParabolicCylinder {
                omega: num("omega", 100.0)?,
            },
            "doubleexp" => PsiSpec::DoubleExpCylinder {
                omega: num("omega", 2000.0)?,
            },
            "ramped" => PsiSpec::RampedParabola {
                omega: num("omega", 200.0)?,
            },
            "spliced" => {
                let exponent = match get("n") {
                    None => 3,
                    Some(v) => v.parse::<u32>().map_err(|_| {
                        Error::InvalidConfig(format!("psi parameter `n` is not a positive integer: `{v}`"))
                    })?,
                };
                let splice = match get("splice") {
                    None => true,
                    Some(v) => v.parse::<bool>().map_err(|_| {
                        Error::InvalidConfig(format!("psi parameter `splice` must be true or false: `{v}`"))
                    })?,
                };
                PsiSpec::SplicedPolynomial {
                    omega1: num("omega1", 200.0)?,
                    omega2: num("omega2", 5.0)?,
                    exponent,
                    splice,
                }
            }
            "table" => PsiSpec::Tabulated {
                xs: list("x")?,
                ys: list("y")?,
            },
            _ => unreachable!(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Describes the grid a convexity verdict was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub t: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub is_convex: bool,
    pub is_strictly_convex: bool,
    /// Smallest discrete second derivative, present only when strictly convex.
    pub strong_convexity_m: Option<f64>,
    /// `Ψ(x) = Ψ(−x)` on every grid point.
    pub is_bidirectional: bool,
    pub is_bidirectionally_convex: bool,
    pub grid_used: GridDescriptor,
}

/// Classifies `Ψ(·, 1)`; see [`classify_convexity_at`].
pub fn classify_convexity(spec: &PsiSpec, x_grid: &[f64], tolerance: f64) -> Result<ConvexityReport> {
    classify_convexity_at(spec, x_grid, tolerance, 1.0)
}

/// Classifies the x-section of `Ψ` at time `t` from second differences on
/// `x_grid`, which must be strictly increasing, symmetric about zero and hold
/// at least five points.
pub fn classify_convexity_at(spec: &PsiSpec, x_grid: &[f64], tolerance: f64, t: f64) -> Result<ConvexityReport> {
    spec.validate()?;
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    if x_grid.len() < 5 {
        return Err(Error::Precondition(format!(
            "convexity grid needs at least 5 points, got {}",
            x_grid.len()
        )));
    }
    if x_grid.iter().any(|x| !x.is_finite()) || !t.is_finite() {
        return Err(Error::Domain("convexity grid contains non-finite values".into()));
    }
    if x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("convexity grid must be strictly increasing".into()));
    }
    let n = x_grid.len();
    let scale = x_grid[0].abs().max(x_grid[n - 1].abs());
    let asymmetric = (0..n / 2 + 1).any(|i| (x_grid[i] + x_grid[n - 1 - i]).abs() > 1e-12 * scale);
    if asymmetric {
        return Err(Error::Precondition("convexity grid must be symmetric about 0".into()));
    }

    let values: Vec<f64> = x_grid.iter().map(|&x| spec.value(x, t)).collect();
    let second: Vec<f64> = (1..n - 1)
        .map(|i| {
            let (hl, hr) = (x_grid[i] - x_grid[i - 1], x_grid[i + 1] - x_grid[i]);
            let slope_r = (values[i + 1] - values[i]) / hr;
            let slope_l = (values[i] - values[i - 1]) / hl;
            2.0 * (slope_r - slope_l) / (hl + hr)
        })
        .collect();

    let is_convex = second.iter().all(|&d| d >= -tolerance);
    let is_strictly_convex = second.iter().all(|&d| d > tolerance);
    let strong_convexity_m = is_strictly_convex.then(|| second.iter().copied().fold(f64::INFINITY, f64::min));
    let asymmetry = (0..n)
        .map(|i| (values[i] - values[n - 1 - i]).abs())
        .fold(0.0_f64, f64::max);
    let is_bidirectional = asymmetry <= tolerance;

    Ok(ConvexityReport {
        is_convex,
        is_strictly_convex,
        strong_convexity_m,
        is_bidirectional,
        is_bidirectionally_convex: is_strictly_convex && is_bidirectional,
        grid_used: GridDescriptor {
            n_points: n,
            x_min: x_grid[0],
            x_max: x_grid[n - 1],
            t,
            tolerance,
        },
    })
}

/// `n` evenly spaced points from `start` to `stop` inclusive. The upper half
/// is measured back from `stop`, so a range symmetric about 0 yields exact
/// negatives.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let span = stop - start;
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| {
            if 2 * i < n - 1 {
                start + span * i as f64 / last
            } else if 2 * i == n - 1 {
                0.5 * (start + stop)
            } else {
                stop - span * (n - 1 - i) as f64 / last
            }
        })
        .collect()
}

/// Ψ sampled on a rectangular (t, x) grid. Row `j` holds time `t_values[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub spec: PsiSpec,
    pub x_values: Vec<f64>,
    pub t_values: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Restoring-force component `−sgn(x)·Ψ(x, t)`, same shape as `values`.
    pub gradient: Option<Vec<Vec<f64>>>,
}

pub fn sample_surface(
    spec: &PsiSpec,
    x_range: (f64, f64),
    t_range: (f64, f64),
    nx: usize,
    nt: usize,
) -> Result<FieldGrid> {
    spec.validate()?;
    if nx < 2 || nt < 2 {
        return Err(Error::Precondition(format!(
            "surface grid needs nx, nt >= 2 (got {nx}, {nt})"
        )));
    }
    for (name, (lo, hi)) in [("x", x_range), ("t", t_range)] {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("{name} range must be finite")));
        }
        if hi <= lo {
            return Err(Error::Precondition(format!("{name} range [{lo}, {hi}] has no width")));
        }
    }
    let x_values = linspace(x_range.0, x_range.1, nx);
    let t_values = linspace(t_range.0, t_range.1, nt);
    let values = t_values
        .iter()
        .map(|&t| x_values.iter().map(|&x| spec.value(x, t)).collect())
        .collect();
    Ok(FieldGrid {
        spec: spec.clone(),
        x_values,
        t_values,
        values,
        gradient: None,
    })
}

/// Adds the induced vector field to a sampled grid.
pub fn export_vector_field(grid: &FieldGrid) -> Result<FieldGrid> {
    if grid.values.len() != grid.t_values.len() || grid.values.iter().any(|row| row.len() != grid.x_values.len()) {
        return Err(Error::Precondition("field grid values do not match its axes".into()));
    }
    let gradient = grid
        .values
        .iter()
        .map(|row| {
            row.iter()
                .zip(&grid.x_values)
                .map(|(&psi, &x)| {
                    let s = sgn(x);
                    if s == 0 {
                        0.0
                    } else {
                        -f64::from(s) * psi
                    }
                })
                .collect()
        })
        .collect();
    Ok(FieldGrid {
        gradient: Some(gradient),
        ..grid.clone()
    })
}

impl FieldGrid {
    /// Long-format CSV, `t,x,psi[,force]`, one row per node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.gradient.is_some() {
            w.write_record(["t", "x", "psi", "force"])?;
        } else {
            w.write_record(["t", "x", "psi"])?;
        }
        for (j, &t) in self.t_values.iter().enumerate() {
            for (i, &x) in self.x_values.iter().enumerate() {
                let mut row = vec![fmt_f64(t), fmt_f64(x), fmt_f64(self.values[j][i])];
                if let Some(g) = &self.gradient {
                    row.push(fmt_f64(g[j][i]));
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar describing the surface parameters and grid shape.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "psi": self.spec,
            "psi_grammar": self.spec.to_string(),
            "nx": self.x_values.len(),
            "nt": self.t_values.len(),
            "x_range": [self.x_values.first(), self.x_values.last()],
            "t_range": [self.t_values.first(), self.t_values.last()],
            "has_force": self.gradient.is_some(),
        })
    }
}
