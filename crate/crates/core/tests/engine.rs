mod common;

use bgc_core::psi::PsiSpec;
use bgc_core::rng::NormalStream;
use bgc_core::sde::{
    simulate_ensemble, simulate_ensemble_with_threads, simulate_path, simulate_path_with_noise, transform_step, DtRule,
    Mode, SimulationConfig,
};
use common::reference_config;
use proptest::prelude::*;

fn small(mode: Mode, seed: u64) -> SimulationConfig {
    SimulationConfig {
        steps: 301,
        horizon: 300.0,
        n_paths: 16,
        ..reference_config(mode, 100.0, seed)
    }
}

#[test]
fn unconstrained_terminal_mean_is_zero() {
    let ens = simulate_ensemble(&reference_config(Mode::Unconstrained, 100.0, 5)).unwrap();
    let terminal: Vec<f64> = ens.paths.iter().map(|p| *p.values.last().unwrap()).collect();
    let n = terminal.len() as f64;
    let mean = terminal.iter().sum::<f64>() / n;
    let sd = (terminal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "mean {mean}, sd {sd}");
}

#[test]
fn transform_values_respect_vertex_bound() {
    let ens = simulate_ensemble(&reference_config(Mode::Transform, 100.0, 9)).unwrap();
    let mut checked = 0;
    for p in &ens.paths {
        let raw = p.raw_values.as_ref().unwrap();
        if raw.iter().all(|r| r.abs() <= 100.0) {
            assert!(p.values.iter().all(|v| (-25.0..=25.0).contains(v)));
            checked += 1;
        }
    }
    assert!(checked > 1000, "only {checked} paths stayed inside");
}

#[test]
fn path_matches_its_ensemble_entry() {
    let c = small(Mode::BgcDrift, 3);
    let ens = simulate_ensemble(&c).unwrap();
    for id in [0u64, 7, 15] {
        assert_eq!(simulate_path(&c, id).unwrap(), ens.paths[id as usize]);
    }
}

#[test]
fn ensemble_is_independent_of_scheduling() {
    let c = SimulationConfig {
        n_paths: 200,
        ..small(Mode::Transform, 77)
    };
    let a = simulate_ensemble_with_threads(&c, 1).unwrap();
    let b = simulate_ensemble_with_threads(&c, 3).unwrap();
    let g = simulate_ensemble(&c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, g);
}

#[test]
fn uniform_dt_wiener_variance() {
    // Uniform rule with T = 100, steps = 401: X_T ~ N(0, T).
    let c = SimulationConfig {
        dt_rule: DtRule::Uniform,
        steps: 401,
        horizon: 100.0,
        n_paths: 4000,
        ..reference_config(Mode::Unconstrained, 100.0, 21)
    };
    let ens = simulate_ensemble(&c).unwrap();
    let xs: Vec<f64> = ens.paths.iter().map(|p| *p.values.last().unwrap()).collect();
    let n = xs.len() as f64;
    let var = xs.iter().map(|v| v * v).sum::<f64>() / n;
    // Var of the sample variance of N(0, 100) is 2·100²/n.
    let tol = 4.0 * (2.0 * 100.0 * 100.0 / n).sqrt();
    assert!((var - 100.0).abs() < tol, "var {var}");
}

#[test]
fn bgc_drift_under_uniform_dt_stays_bounded() {
    // Feedback with the parabolic cylinder keeps |X| well inside the
    // unconstrained spread.
    let c = SimulationConfig {
        dt_rule: DtRule::Uniform,
        n_paths: 500,
        ..reference_config(Mode::BgcDrift, 100.0, 4)
    };
    let bgc = simulate_ensemble(&c).unwrap();
    let free = simulate_ensemble(&c.with_mode(Mode::Unconstrained)).unwrap();
    assert_eq!(bgc.diverged_count(), 0);
    assert!(bgc.max_abs() < free.max_abs());
    assert!(bgc.max_abs() < 30.0, "max |X| = {}", bgc.max_abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn draw_alignment_links_transform_and_unconstrained(seed in any::<u64>(), omega in 10.0f64..500.0, id in 0u64..1000) {
        let base = SimulationConfig { psi: PsiSpec::parabolic(omega), ..small(Mode::Transform, seed) };
        let t = simulate_path(&base, id).unwrap();
        let u = simulate_path(&base.with_mode(Mode::Unconstrained), id).unwrap();
        prop_assert_eq!(t.raw_values.as_ref().unwrap(), &u.values);
        for (v, cx) in t.values.iter().zip(&u.values) {
            prop_assert_eq!(*v, transform_step(*cx, omega));
        }
    }

    #[test]
    fn vertex_bound_holds_exactly(seed in any::<u64>(), omega in 1.0f64..400.0) {
        let c = SimulationConfig { psi: PsiSpec::parabolic(omega), ..small(Mode::Transform, seed) };
        for p in simulate_ensemble(&c).unwrap().paths {
            for (v, cx) in p.values.iter().zip(p.raw_values.as_ref().unwrap()) {
                if cx.abs() <= omega {
                    prop_assert!(v.abs() <= omega / 4.0 * (1.0 + 1e-15));
                }
            }
        }
    }

    #[test]
    fn flipping_noise_flips_paths(seed in any::<u64>(), rule in prop_oneof![Just(DtRule::PaperZero), Just(DtRule::Uniform)]) {
        // The drift and pointwise constraint terms are odd in X when μ = 0.
        // BgcDiffusion is excluded: its coefficient σ − sgn(X)Ψ(X) is not odd
        // unless σ = 0.
        for mode in [Mode::Unconstrained, Mode::BgcDrift, Mode::Transform] {
            let c = SimulationConfig { dt_rule: rule, ..small(mode, seed) };
            let mut s1 = NormalStream::for_path(seed, 0);
            let mut s2 = NormalStream::for_path(seed, 0);
            let a = simulate_path_with_noise(&c, 0, || s1.next_normal()).unwrap();
            let b = simulate_path_with_noise(&c, 0, || -s2.next_normal()).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert_eq!(*x, -*y);
            }
        }
    }

    #[test]
    fn path_integral_is_sum_of_values(seed in any::<u64>()) {
        for mode in [Mode::Unconstrained, Mode::BgcDrift, Mode::BgcDiffusion, Mode::Transform] {
            let p = simulate_path(&small(mode, seed), 1).unwrap();
            let sum: f64 = p.values.iter().sum();
            prop_assert!((p.path_integral - sum).abs() <= 1e-12 * sum.abs().max(1.0));
            prop_assert_eq!(p.values[0], 0.0);
            // BgcDiffusion can blow up; a diverged path stops at its last finite step.
            prop_assert_eq!(p.values.len(), p.diverged_at.unwrap_or(301));
        }
    }
}
