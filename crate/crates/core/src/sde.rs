//! Path generation for unconstrained and BGC-constrained diffusions.
//!
//! Four modes share one noise contract: every step of every path consumes
//! exactly one standard normal draw from the path's own stream, so ensembles
//! in different modes built from the same seed are driven by identical noise.
//!
//! * [`Mode::Unconstrained`]: `X' = X + μ·dt + σ·ΔW`.
//! * [`Mode::BgcDrift`]: Euler step of `dX = (μ − sgn(X)·Ψ(X,t))dt + σ dW`.
//! * [`Mode::BgcDiffusion`]: Euler step of `dX = μ dt + (σ − sgn(X)·Ψ(X,t))dW`.
//! * [`Mode::Transform`]: the running unconstrained sum `CX` is mapped pointwise
//!   through `cx ↦ cx − sgn(cx)·cx²/ω`; the constrained value is never fed back.
//!
//! Under [`DtRule::PaperZero`] the time step is zero, so every `dt` term
//! (including the BGC drift) vanishes and each noise increment is one raw unit
//! normal. [`DtRule::Uniform`] is the textbook Euler-Maruyama step with
//! `dt = T/(steps−1)` and `ΔW = √dt·z`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleConfig, Path, PathEnsemble};
use crate::error::{Error, Result};
use crate::psi::PsiSpec;
use crate::rng::{path_seed, NormalStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtRule {
    PaperZero,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Unconstrained,
    BgcDrift,
    BgcDiffusion,
    Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub mu: f64,
    pub sigma: f64,
    /// Number of grid points including `t = 0`.
    pub steps: usize,
    pub horizon: f64,
    pub dt_rule: DtRule,
    pub mode: Mode,
    pub psi: PsiSpec,
    pub x0: f64,
    pub master_seed: u64,
    pub n_paths: usize,
    /// Lets transform mode use a surface other than the parabolic cylinder.
    #[serde(default)]
    pub allow_any_transform_psi: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            mu: 0.0,
            sigma: 1.0,
            steps: 1001,
            horizon: 1000.0,
            dt_rule: DtRule::PaperZero,
            mode: Mode::Transform,
            psi: PsiSpec::parabolic(100.0),
            x0: 0.0,
            master_seed: 0,
            n_paths: 1000,
            allow_any_transform_psi: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.steps < 2 {
            return bad(format!("steps must be at least 2, got {}", self.steps));
        }
        if self.n_paths < 1 {
            return bad("n_paths must be at least 1".into());
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if !self.mu.is_finite() {
            return bad(format!("mu must be finite, got {}", self.mu));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !self.x0.is_finite() {
            return bad(format!("x0 must be finite, got {}", self.x0));
        }
        if self.mode != Mode::Unconstrained && self.x0 != 0.0 {
            return bad(format!(
                "constrained processes start at the origin; x0 = {} is only allowed in unconstrained mode",
                self.x0
            ));
        }
        if self.mode == Mode::Transform
            && !self.allow_any_transform_psi
            && !matches!(self.psi, PsiSpec::ParabolicCylinder { .. })
        {
            return bad(format!(
                "transform mode expects a parabolic psi, got `{}` (set allow_any_transform_psi to override)",
                self.psi
            ));
        }
        self.psi.validate()
    }

    /// Time step and the factor multiplying each unit normal draw.
    pub fn step_sizes(&self) -> (f64, f64) {
        match self.dt_rule {
            DtRule::PaperZero => (0.0, 1.0),
            DtRule::Uniform => {
                let dt = self.horizon / (self.steps - 1) as f64;
                (dt, dt.sqrt())
            }
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..self.clone() }
    }
}

/// Sign function with `sgn(0) = 0` and no dead-zone around zero.
pub fn sgn(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// One application of the pointwise constraint map `cx ↦ cx − sgn(cx)·cx²/ω`,
/// written with the same branch structure as the reference pseudocode
/// (`cx = 0` takes the second branch and maps to 0).
pub fn transform_step(cx: f64, omega: f64) -> f64 {
    if cx > 0.0 {
        cx - cx * cx / omega
    } else {
        cx + cx * cx / omega
    }
}

fn constrain_pointwise(psi: &PsiSpec, cx: f64, t: f64) -> f64 {
    match psi {
        PsiSpec::ParabolicCylinder { omega } => transform_step(cx, *omega),
        other => match sgn(cx) {
            0 => cx,
            s => cx - f64::from(s) * other.value(cx, t),
        },
    }
}

/// Simulates one path drawing noise from the path's derived stream.
pub fn simulate_path(config: &SimulationConfig, path_id: u64) -> Result<Path> {
    config.validate()?;
    let mut stream = NormalStream::for_path(config.master_seed, path_id);
    Ok(run_path(config, path_id, || stream.next_normal()))
}

/// Simulates one path with caller-supplied standard normal draws; `noise` is
/// called exactly once per step.
pub fn simulate_path_with_noise(config: &SimulationConfig, path_id: u64, noise: impl FnMut() -> f64) -> Result<Path> {
    config.validate()?;
    Ok(run_path(config, path_id, noise))
}

fn run_path(config: &SimulationConfig, path_id: u64, mut noise: impl FnMut() -> f64) -> Path {
    let steps = config.steps;
    let (dt, noise_scale) = config.step_sizes();
    let t_of = |j: usize| config.horizon * j as f64 / (steps - 1) as f64;
    let (mu, sigma, psi) = (config.mu, config.sigma, &config.psi);

    let mut values = Vec::with_capacity(steps);
    let mut raw = (config.mode == Mode::Transform).then(|| Vec::with_capacity(steps));
    let mut diverged_at = None;

    let mut x = config.x0;
    values.push(match config.mode {
        Mode::Transform => constrain_pointwise(psi, x, 0.0),
        _ => x,
    });
    if let Some(r) = raw.as_mut() {
        r.push(x);
    }

    for j in 1..steps {
        let t = t_of(j - 1);
        let dw = noise_scale * noise();
        // With dt = 0 the drift is skipped outright so an infinite Ψ cannot
        // turn into 0·∞ = NaN.
        let drift = |rate: f64| if dt == 0.0 { 0.0 } else { rate * dt };
        let (next, shown) = match config.mode {
            Mode::Unconstrained => {
                let n = x + drift(mu) + sigma * dw;
                (n, n)
            }
            Mode::BgcDrift => {
                let pull = if dt == 0.0 {
                    0.0
                } else {
                    f64::from(sgn(x)) * psi.value(x, t)
                };
                let n = x + drift(mu - pull) + sigma * dw;
                (n, n)
            }
            Mode::BgcDiffusion => {
                let pull = f64::from(sgn(x)) * psi.value(x, t);
                let n = x + drift(mu) + (sigma - pull) * dw;
                (n, n)
            }
            Mode::Transform => {
                let n = x + (drift(mu) + sigma * dw);
                (n, constrain_pointwise(psi, n, t_of(j)))
            }
        };
        if !next.is_finite() || !shown.is_finite() {
            diverged_at = Some(j);
            break;
        }
        x = next;
        values.push(shown);
        if let Some(r) = raw.as_mut() {
            r.push(next);
        }
    }
    Path::new(path_id, values, raw, diverged_at)
}

/// Simulates `n_paths` paths on rayon's global pool.
pub fn simulate_ensemble(config: &SimulationConfig) -> Result<PathEnsemble> {
    config.validate()?;
    let paths: Vec<Path> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut stream = NormalStream::for_path(config.master_seed, id);
            run_path(config, id, || stream.next_normal())
        })
        .collect();
    Ok(PathEnsemble {
        config: EnsembleConfig::Bgc(config.clone()),
        per_path_seeds: (0..config.n_paths as u64)
            .map(|id| path_seed(config.master_seed, id))
            .collect(),
        paths,
    })
}

/// As [`simulate_ensemble`] on a dedicated pool of `threads` workers. The
/// result does not depend on `threads`.
pub fn simulate_ensemble_with_threads(config: &SimulationConfig, threads: usize) -> Result<PathEnsemble> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("cannot build worker pool: {e}")))?;
    pool.install(|| simulate_ensemble(config))
}
