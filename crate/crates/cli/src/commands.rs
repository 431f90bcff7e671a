use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use bgc_core::barrier::{
    check_barrier_bound, default_smoothing_window, detect_bands, empirical_envelope, fit_barrier, BarrierSide,
    ContainmentReport, Envelope,
};
use bgc_core::ensemble_io::{
    read_ensemble, summarize, write_atomic, write_ensemble, RunConfig, RunManifest, MANIFEST_FILE,
};
use bgc_core::oup::{simulate_oup, simulate_oup_with_threads, OupConfig, OupParams};
use bgc_core::psi::{classify_convexity_at, export_vector_field, linspace, sample_surface};
use bgc_core::sde::{simulate_ensemble, simulate_ensemble_with_threads, Mode, SimulationConfig};
use bgc_core::PathEnsemble;
use serde_json::{json, Value};

use crate::args::{
    ClassifyPsiArgs, CompareArgs, DetectBandsArgs, EngineArgs, ExportFieldArgs, FitBarrierArgs, GridRange, OutArgs,
    SimulateArgs, SimulateOupArgs,
};
use crate::CliError;

type CliResult<T> = Result<T, CliError>;

const DEFAULT_OUT: &str = "bgc-out";

fn out_dir(out: &OutArgs, fallback: impl FnOnce() -> PathBuf) -> CliResult<PathBuf> {
    let dir = out.out.clone().unwrap_or_else(fallback);
    fs::create_dir_all(&dir).map_err(|e| CliError::core(e.into(), &format!("--out {}", dir.display())))?;
    Ok(dir)
}

/// Analysis output must not land in (and overwrite the manifest of) its input.
fn analysis_out_dir(out: &OutArgs, input: &FsPath, subcommand: &str) -> CliResult<PathBuf> {
    let dir = out_dir(out, || input.join(subcommand))?;
    let same = match (fs::canonicalize(&dir), fs::canonicalize(input)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        return Err(CliError::Precondition(format!(
            "--out {} is the input run directory; choose another directory",
            dir.display()
        )));
    }
    Ok(dir)
}

fn write_json(path: &FsPath, value: &impl serde::Serialize) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::core(e.into(), "json"))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes).map_err(|e| CliError::core(e.into(), &path.display().to_string()))?;
    Ok(bytes)
}

fn write_envelope(path: &FsPath, env: &Envelope) -> CliResult<()> {
    let mut bytes = Vec::new();
    env.write_csv(&mut bytes).map_err(|e| CliError::core(e, "envelope"))?;
    write_atomic(path, &bytes).map_err(|e| CliError::core(e.into(), &path.display().to_string()))
}

/// Manifest for a run whose primary artifact is `content_file`.
fn write_analysis_manifest(
    dir: &FsPath,
    subcommand: &str,
    parameters: BTreeMap<String, String>,
    content_file: &str,
    content: &[u8],
) -> CliResult<()> {
    let manifest = RunManifest::new(
        RunConfig::Analysis {
            subcommand: subcommand.to_string(),
            parameters,
        },
        content_file,
        content,
    );
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(())
}

fn params<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Result summary on stdout. A closed pipe is not an error: the artifacts are
/// already on disk.
fn print(value: &Value) {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn engine_config(e: &EngineArgs) -> CliResult<SimulationConfig> {
    let config = SimulationConfig {
        mu: e.mu,
        sigma: e.sigma,
        steps: e.steps,
        horizon: e.horizon.unwrap_or(e.steps.saturating_sub(1) as f64),
        dt_rule: e.dt_rule.into(),
        mode: e.mode.into(),
        psi: e.psi.clone(),
        x0: e.x0,
        master_seed: e.seed,
        n_paths: e.paths,
        allow_any_transform_psi: e.allow_any_psi,
    };
    config
        .validate()
        .map_err(|err| CliError::core(err, "simulation parameters"))?;
    Ok(config)
}

fn run_engine(config: &SimulationConfig, threads: Option<usize>) -> CliResult<PathEnsemble> {
    match threads {
        Some(n) => simulate_ensemble_with_threads(config, n),
        None => simulate_ensemble(config),
    }
    .map_err(|e| CliError::core(e, "simulate"))
}

fn run_oup(config: &OupConfig, threads: Option<usize>) -> CliResult<PathEnsemble> {
    match threads {
        Some(n) => simulate_oup_with_threads(config, n),
        None => simulate_oup(config),
    }
    .map_err(|e| CliError::core(e, "simulate-oup"))
}

fn check_threads(threads: Option<usize>) -> CliResult<()> {
    if threads == Some(0) {
        return Err(CliError::Precondition("--threads must be at least 1".into()));
    }
    Ok(())
}

/// Writes the run directory plus `summary.json` and reports the manifest.
fn persist_run(ens: &PathEnsemble, dir: &FsPath, bins: usize) -> CliResult<Value> {
    let manifest = write_ensemble(ens, dir).map_err(|e| CliError::core(e, &dir.display().to_string()))?;
    let summary = summarize(ens, bins).map_err(|e| CliError::core(e, "summary"))?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(json!({
        "out": dir,
        "content_digest": manifest.content_digest,
        "paths": ens.paths.len(),
        "steps": ens.steps(),
        "diverged": manifest.diverged.len(),
    }))
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    check_threads(a.engine.threads)?;
    if a.bins == 0 {
        return Err(CliError::Precondition("--bins must be at least 1".into()));
    }
    let config = engine_config(&a.engine)?;
    let dir = out_dir(&a.out, || DEFAULT_OUT.into())?;
    let ens = run_engine(&config, a.engine.threads)?;
    print(&persist_run(&ens, &dir, a.bins)?);
    Ok(())
}

pub fn simulate_oup_cmd(a: &SimulateOupArgs) -> CliResult<()> {
    check_threads(a.threads)?;
    if a.bins == 0 {
        return Err(CliError::Precondition("--bins must be at least 1".into()));
    }
    let config = OupConfig {
        params: OupParams {
            kappa: a.kappa,
            alpha: a.alpha,
            sigma: a.sigma,
            x0: a.x0,
        },
        steps: a.steps,
        horizon: a.horizon.unwrap_or(a.steps.saturating_sub(1) as f64),
        scheme: a.scheme.into(),
        master_seed: a.seed,
        n_paths: a.paths,
    };
    config.validate().map_err(|e| CliError::core(e, "OU parameters"))?;
    let dir = out_dir(&a.out, || DEFAULT_OUT.into())?;
    let ens = run_oup(&config, a.threads)?;
    print(&persist_run(&ens, &dir, a.bins)?);
    Ok(())
}

fn check_quantile(q: f64) -> CliResult<()> {
    if !(q > 0.5 && q <= 1.0) {
        return Err(CliError::Precondition(format!(
            "--quantile must lie in (0.5, 1], got {q}"
        )));
    }
    Ok(())
}

fn containment_json(r: &ContainmentReport) -> Value {
    json!({
        "overall": r.overall,
        "required_minimum": r.required_minimum,
        "meets_quantile_bound": r.meets_quantile_bound,
    })
}

pub fn fit_barrier_cmd(a: &FitBarrierArgs) -> CliResult<()> {
    check_quantile(a.quantile)?;
    let ens = read_ensemble(&a.input, !a.no_verify).map_err(|e| CliError::core(e, "--in"))?;
    let dir = analysis_out_dir(&a.out, &a.input, "fit-barrier")?;
    let envelope = empirical_envelope(&ens, a.quantile).map_err(|e| CliError::core(e, "envelope"))?;
    let side: BarrierSide = a.side.into();
    let mut fit = fit_barrier(&envelope, side, !a.free_c).map_err(|e| CliError::core(e, "fit"))?;
    let report = check_barrier_bound(&ens, &envelope, &fit).map_err(|e| CliError::core(e, "containment"))?;
    fit.containment = report.overall;

    write_envelope(&dir.join("envelope.csv"), &envelope)?;
    let result = json!({ "fit": fit, "containment": report });
    let bytes = write_json(&dir.join("barrier_fit.json"), &result)?;
    write_analysis_manifest(
        &dir,
        "fit-barrier",
        params([
            ("in", a.input.display().to_string()),
            ("quantile", a.quantile.to_string()),
            ("side", format!("{:?}", a.side).to_lowercase()),
            ("free_c", a.free_c.to_string()),
        ]),
        "barrier_fit.json",
        &bytes,
    )?;
    print(&json!({ "out": dir, "fit": fit, "containment": containment_json(&report) }));
    Ok(())
}

pub fn detect_bands_cmd(a: &DetectBandsArgs) -> CliResult<()> {
    let ens = read_ensemble(&a.input, !a.no_verify).map_err(|e| CliError::core(e, "--in"))?;
    let dir = analysis_out_dir(&a.out, &a.input, "detect-bands")?;
    let window = a.window.unwrap_or_else(|| default_smoothing_window(a.bins));
    let report = detect_bands(&ens, a.bins, window).map_err(|e| CliError::core(e, "--bins/--window"))?;
    let bytes = write_json(&dir.join("bands.json"), &report)?;
    write_analysis_manifest(
        &dir,
        "detect-bands",
        params([
            ("in", a.input.display().to_string()),
            ("bins", a.bins.to_string()),
            ("window", window.to_string()),
        ]),
        "bands.json",
        &bytes,
    )?;
    let peaks: Vec<f64> = report.peaks.iter().map(|p| p.location).collect();
    print(&json!({ "out": dir, "score": report.multimodality_score, "peaks": peaks }));
    Ok(())
}

pub fn compare(a: &CompareArgs) -> CliResult<()> {
    check_threads(a.engine.threads)?;
    check_quantile(a.quantile)?;
    let config = engine_config(&a.engine)?;
    let dir = out_dir(&a.out, || DEFAULT_OUT.into())?;

    let bgc = run_engine(&config, a.engine.threads)?;
    let twin = run_engine(&config.with_mode(Mode::Unconstrained), a.engine.threads)?;
    // Same derived seeds: the twin's values are the Transform run's raw sums.
    let raw_values_match = (config.mode == Mode::Transform).then(|| {
        bgc.paths
            .iter()
            .zip(&twin.paths)
            .all(|(b, t)| b.raw_values.as_deref() == Some(t.values.as_slice()))
    });

    let bgc_env = empirical_envelope(&bgc, a.quantile).map_err(|e| CliError::core(e, "BGC envelope"))?;
    let mut fit = fit_barrier(&bgc_env, BarrierSide::SymmetricJoint, true).map_err(|e| CliError::core(e, "BGC fit"))?;
    let bgc_report = check_barrier_bound(&bgc, &bgc_env, &fit).map_err(|e| CliError::core(e, "BGC containment"))?;
    fit.containment = bgc_report.overall;

    let twin_env = empirical_envelope(&twin, a.quantile).map_err(|e| CliError::core(e, "twin envelope"))?;
    let twin_report = check_barrier_bound(&twin, &twin_env, &fit).map_err(|e| CliError::core(e, "twin containment"))?;

    let oup_config = OupConfig {
        params: OupParams {
            kappa: fit.theta,
            alpha: fit.amplitude,
            sigma: a.oup_sigma.unwrap_or(config.sigma),
            x0: 0.0,
        },
        steps: config.steps,
        horizon: config.horizon,
        scheme: a.oup_scheme.into(),
        master_seed: config.master_seed,
        n_paths: config.n_paths,
    };
    oup_config.validate().map_err(|e| CliError::core(e, "--oup-sigma"))?;
    let oup = run_oup(&oup_config, a.engine.threads)?;
    let oup_env = empirical_envelope(&oup, a.quantile).map_err(|e| CliError::core(e, "OU envelope"))?;
    let oup_report = check_barrier_bound(&oup, &oup_env, &fit).map_err(|e| CliError::core(e, "OU containment"))?;

    write_envelope(&dir.join("bgc_envelope.csv"), &bgc_env)?;
    write_envelope(&dir.join("twin_envelope.csv"), &twin_env)?;
    write_envelope(&dir.join("oup_envelope.csv"), &oup_env)?;
    if !a.no_paths {
        for (name, ens) in [("bgc", &bgc), ("twin", &twin), ("oup", &oup)] {
            let sub = dir.join(name);
            write_ensemble(ens, &sub).map_err(|e| CliError::core(e, &sub.display().to_string()))?;
        }
    }

    let report = json!({
        "quantile": a.quantile,
        "bgc": {
            "config": config,
            "fit": fit,
            "containment": bgc_report,
            "max_abs": bgc.max_abs(),
            "diverged": bgc.diverged_count(),
        },
        "twin": {
            "containment": twin_report,
            "max_abs": twin.max_abs(),
            "raw_values_match": raw_values_match,
        },
        "oup": {
            "config": oup_config,
            "containment": oup_report,
            "max_abs": oup.max_abs(),
            "diverged": oup.diverged_count(),
        },
    });
    let bytes = write_json(&dir.join("compare.json"), &report)?;
    write_analysis_manifest(
        &dir,
        "compare",
        params([
            ("mode", format!("{:?}", a.engine.mode)),
            ("psi", a.engine.psi.to_string()),
            ("mu", config.mu.to_string()),
            ("sigma", config.sigma.to_string()),
            ("steps", config.steps.to_string()),
            ("horizon", config.horizon.to_string()),
            ("paths", config.n_paths.to_string()),
            ("dt_rule", format!("{:?}", a.engine.dt_rule)),
            ("seed", config.master_seed.to_string()),
            ("quantile", a.quantile.to_string()),
            ("oup_sigma", oup_config.params.sigma.to_string()),
            ("oup_scheme", format!("{:?}", a.oup_scheme)),
        ]),
        "compare.json",
        &bytes,
    )?;
    print(&json!({
        "out": dir,
        "A": fit.amplitude,
        "theta": fit.theta,
        "containment": {
            "bgc": bgc_report.overall,
            "twin": twin_report.overall,
            "oup": oup_report.overall,
        },
        "raw_values_match": raw_values_match,
    }));
    Ok(())
}

fn check_grid(name: &str, r: &GridRange) -> CliResult<()> {
    if r.count < 2 || r.stop <= r.start {
        return Err(CliError::Precondition(format!(
            "--{name} {r}: need stop > start and at least 2 points"
        )));
    }
    Ok(())
}

pub fn export_field(a: &ExportFieldArgs) -> CliResult<()> {
    check_grid("x", &a.x)?;
    check_grid("t", &a.t)?;
    let mut grid = sample_surface(
        &a.psi,
        (a.x.start, a.x.stop),
        (a.t.start, a.t.stop),
        a.x.count,
        a.t.count,
    )
    .map_err(|e| CliError::core(e, "--psi/--x/--t"))?;
    if a.force {
        grid = export_vector_field(&grid).map_err(|e| CliError::core(e, "--force"))?;
    }
    let dir = out_dir(&a.out, || DEFAULT_OUT.into())?;
    let mut bytes = Vec::new();
    grid.write_csv(&mut bytes).map_err(|e| CliError::core(e, "field"))?;
    let csv_path = dir.join("field.csv");
    write_atomic(&csv_path, &bytes).map_err(|e| CliError::core(e.into(), &csv_path.display().to_string()))?;
    write_json(&dir.join("field.json"), &grid.sidecar())?;
    write_analysis_manifest(
        &dir,
        "export-field",
        params([
            ("psi", a.psi.to_string()),
            ("x", a.x.to_string()),
            ("t", a.t.to_string()),
            ("force", a.force.to_string()),
        ]),
        "field.csv",
        &bytes,
    )?;
    let (min, max) = grid
        .values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    print(&json!({ "out": dir, "nx": a.x.count, "nt": a.t.count, "min": min, "max": max }));
    Ok(())
}

pub fn classify_psi(a: &ClassifyPsiArgs) -> CliResult<()> {
    let grid = linspace(a.x.start, a.x.stop, a.x.count);
    let report = classify_convexity_at(&a.psi, &grid, a.tolerance, a.t).map_err(|e| CliError::core(e, "--psi/--x"))?;
    let dir = out_dir(&a.out, || DEFAULT_OUT.into())?;
    let result = json!({ "psi": a.psi, "psi_grammar": a.psi.to_string(), "report": report });
    let bytes = write_json(&dir.join("convexity.json"), &result)?;
    write_analysis_manifest(
        &dir,
        "classify-psi",
        params([
            ("psi", a.psi.to_string()),
            ("x", a.x.to_string()),
            ("t", a.t.to_string()),
            ("tolerance", a.tolerance.to_string()),
        ]),
        "convexity.json",
        &bytes,
    )?;
    print(&json!({ "out": dir, "report": report }));
    Ok(())
}
