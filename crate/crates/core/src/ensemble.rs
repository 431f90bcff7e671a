//! Path and ensemble containers shared by the BGC engine and the OU reference
//! process.

use serde::{Deserialize, Serialize};

use crate::oup::OupConfig;
use crate::psi::linspace;
use crate::sde::SimulationConfig;

/// Generating configuration of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum EnsembleConfig {
    Bgc(SimulationConfig),
    Oup(OupConfig),
}

impl EnsembleConfig {
    pub fn steps(&self) -> usize {
        match self {
            EnsembleConfig::Bgc(c) => c.steps,
            EnsembleConfig::Oup(c) => c.steps,
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            EnsembleConfig::Bgc(c) => c.horizon,
            EnsembleConfig::Oup(c) => c.horizon,
        }
    }

    pub fn n_paths(&self) -> usize {
        match self {
            EnsembleConfig::Bgc(c) => c.n_paths,
            EnsembleConfig::Oup(c) => c.n_paths,
        }
    }

    pub fn master_seed(&self) -> u64 {
        match self {
            EnsembleConfig::Bgc(c) => c.master_seed,
            EnsembleConfig::Oup(c) => c.master_seed,
        }
    }

    /// Whether paths carry the unconstrained running sum alongside their values.
    pub fn has_raw_values(&self) -> bool {
        matches!(self, EnsembleConfig::Bgc(c) if c.mode == crate::sde::Mode::Transform)
    }

    /// Reporting time of every step: `t_j = j·T/(steps−1)`.
    pub fn times(&self) -> Vec<f64> {
        linspace(0.0, self.horizon(), self.steps())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub path_id: u64,
    /// State at each step. For a diverged path this stops just before the
    /// first non-finite step.
    pub values: Vec<f64>,
    /// Transform mode only: the unconstrained running sum the values derive from.
    pub raw_values: Option<Vec<f64>>,
    /// Sum of `values`.
    pub path_integral: f64,
    /// First step whose state was not finite.
    pub diverged_at: Option<usize>,
}

impl Path {
    pub fn new(path_id: u64, values: Vec<f64>, raw_values: Option<Vec<f64>>, diverged_at: Option<usize>) -> Self {
        let path_integral = values.iter().sum();
        Self {
            path_id,
            values,
            raw_values,
            path_integral,
            diverged_at,
        }
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Largest `|X|` over the path; infinite for diverged paths.
    pub fn max_abs(&self) -> f64 {
        if self.is_diverged() {
            return f64::INFINITY;
        }
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub config: EnsembleConfig,
    pub paths: Vec<Path>,
    pub per_path_seeds: Vec<u64>,
}

impl PathEnsemble {
    pub fn steps(&self) -> usize {
        self.config.steps()
    }

    pub fn times(&self) -> Vec<f64> {
        self.config.times()
    }

    /// Paths that completed every step.
    pub fn finite_paths(&self) -> impl Iterator<Item = &Path> {
        self.paths.iter().filter(|p| !p.is_diverged())
    }

    pub fn diverged_count(&self) -> usize {
        self.paths.iter().filter(|p| p.is_diverged()).count()
    }

    pub fn max_abs(&self) -> f64 {
        self.paths.iter().map(Path::max_abs).fold(0.0, f64::max)
    }
}
