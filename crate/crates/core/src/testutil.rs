use crate::ensemble::{EnsembleConfig, Path, PathEnsemble};
use crate::sde::{Mode, SimulationConfig};

/// Unconstrained-tagged ensemble with the given value rows and `t_j = j`.
pub(crate) fn ensemble_from(rows: Vec<Vec<f64>>) -> PathEnsemble {
    let steps = rows[0].len();
    let config = SimulationConfig {
        steps,
        horizon: (steps - 1) as f64,
        n_paths: rows.len(),
        mode: Mode::Unconstrained,
        ..Default::default()
    };
    PathEnsemble {
        per_path_seeds: vec![0; rows.len()],
        paths: rows
            .into_iter()
            .enumerate()
            .map(|(i, v)| Path::new(i as u64, v, None, None))
            .collect(),
        config: EnsembleConfig::Bgc(config),
    }
}
