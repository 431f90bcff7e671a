//! Ornstein-Uhlenbeck reference process `dX = κ(α − X)dt + σ dW`.
//!
//! Its mean `X₀e^{−κT} + α(1 − e^{−κT})` has the same saturating shape as the
//! hidden barrier curve, which makes it the natural yardstick for barrier
//! fits. Ensembles use the same per-path seed derivation as the BGC engine.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleConfig, Path, PathEnsemble};
use crate::error::{Error, Result};
use crate::rng::{path_seed, NormalStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OupParams {
    /// Speed of mean reversion.
    pub kappa: f64,
    /// Long-term mean.
    pub alpha: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl OupParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if !self.alpha.is_finite() || !self.x0.is_finite() {
            return Err(Error::InvalidConfig("alpha and x0 must be finite".into()));
        }
        Ok(())
    }

    /// Mean and variance of `X_{t+dt}` given `X_t = x`.
    pub fn transition_moments(&self, x: f64, dt: f64) -> (f64, f64) {
        // 1 − e^{−κdt} via expm1 keeps full precision for small κdt.
        let decay = -(-self.kappa * dt).exp_m1();
        let mean = x + (self.alpha - x) * decay;
        let var = self.sigma * self.sigma * -(-2.0 * self.kappa * dt).exp_m1() / (2.0 * self.kappa);
        (mean, var)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OupScheme {
    Euler,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OupConfig {
    pub params: OupParams,
    pub steps: usize,
    pub horizon: f64,
    pub scheme: OupScheme,
    pub master_seed: u64,
    pub n_paths: usize,
}

impl OupConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "steps must be at least 2, got {}",
                self.steps
            )));
        }
        if self.n_paths < 1 {
            return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// `E[X_T] = X₀e^{−κT} + α(1 − e^{−κT})`.
pub fn oup_mean(params: &OupParams, t: f64) -> f64 {
    let decay = (-params.kappa * t).exp();
    params.x0 * decay + params.alpha * (1.0 - decay)
}

fn run_path(config: &OupConfig, path_id: u64, mut noise: impl FnMut() -> f64) -> Path {
    let p = &config.params;
    let dt = config.horizon / (config.steps - 1) as f64;
    let sqrt_dt = dt.sqrt();
    let (_, var) = p.transition_moments(0.0, dt);
    let exact_sd = var.sqrt();

    let mut values = Vec::with_capacity(config.steps);
    let mut x = p.x0;
    values.push(x);
    let mut diverged_at = None;
    for j in 1..config.steps {
        let z = noise();
        let next = match config.scheme {
            OupScheme::Euler => x + p.kappa * (p.alpha - x) * dt + p.sigma * sqrt_dt * z,
            OupScheme::Exact => p.transition_moments(x, dt).0 + exact_sd * z,
        };
        if !next.is_finite() {
            diverged_at = Some(j);
            break;
        }
        x = next;
        values.push(x);
    }
    Path::new(path_id, values, None, diverged_at)
}

pub fn simulate_oup_path_with_noise(config: &OupConfig, path_id: u64, noise: impl FnMut() -> f64) -> Result<Path> {
    config.validate()?;
    Ok(run_path(config, path_id, noise))
}

pub fn simulate_oup(config: &OupConfig) -> Result<PathEnsemble> {
    config.validate()?;
    let paths = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut stream = NormalStream::for_path(config.master_seed, id);
            run_path(config, id, || stream.next_normal())
        })
        .collect();
    Ok(PathEnsemble {
        config: EnsembleConfig::Oup(config.clone()),
        paths,
        per_path_seeds: (0..config.n_paths as u64)
            .map(|id| path_seed(config.master_seed, id))
            .collect(),
    })
}

/// [`simulate_oup`] on a dedicated pool of `threads` workers.
pub fn simulate_oup_with_threads(config: &OupConfig, threads: usize) -> Result<PathEnsemble> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("cannot build worker pool: {e}")))?;
    pool.install(|| simulate_oup(config))
}
