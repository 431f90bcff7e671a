//! On-disk run directories and ensemble summaries.
//!
//! A run directory holds `paths.csv` (long format, `path_id,step,t,x[,raw_x]`)
//! and `manifest.json`. The manifest records the generating configuration and
//! the SHA-256 of the exact CSV bytes, so a run can be verified anywhere.
//! Values are written with 17 significant digits and read back bit-exactly.
//! Diverged paths stop at their last finite step; the manifest lists where.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{EnsembleConfig, Path, PathEnsemble};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::rng::{path_seed, SEED_ALGORITHM_ID};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const PATHS_FILE: &str = "paths.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergedPath {
    pub path_id: u64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunConfig {
    Ensemble(EnsembleConfig),
    /// Runs that analyse existing data rather than generate paths.
    Analysis {
        subcommand: String,
        parameters: BTreeMap<String, String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub tool_version: String,
    pub seed_algorithm_id: String,
    /// RFC 3339, UTC.
    pub created_at: String,
    /// File the digest covers, relative to the manifest.
    pub content_file: String,
    /// `sha256:<hex>` of `content_file`.
    pub content_digest: String,
    #[serde(default)]
    pub diverged: Vec<DivergedPath>,
}

impl RunManifest {
    pub fn new(config: RunConfig, content_file: &str, content: &[u8]) -> Self {
        Self {
            config,
            tool_version: TOOL_VERSION.to_string(),
            seed_algorithm_id: SEED_ALGORITHM_ID.to_string(),
            created_at: chrono::Utc::now().to_rfc3339(),
            content_file: content_file.to_string(),
            content_digest: digest(content),
            diverged: Vec::new(),
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &FsPath, bytes: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(FsPath::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Canonical CSV bytes of an ensemble.
///
/// Every field is numeric, so rows are formatted directly rather than through
/// a quoting CSV writer. Paths render in parallel and are joined in id order.
pub fn render_paths_csv(ensemble: &PathEnsemble) -> Result<Vec<u8>> {
    let times = ensemble.times();
    let with_raw = ensemble.config.has_raw_values();
    let header: &[u8] = if with_raw {
        b"path_id,step,t,x,raw_x\n"
    } else {
        b"path_id,step,t,x\n"
    };
    let times_text: Vec<String> = times.iter().map(|&t| fmt_f64(t)).collect();
    let chunks: Vec<Vec<u8>> = ensemble
        .paths
        .par_iter()
        .map(|p| {
            let mut buf = Vec::with_capacity(p.values.len() * if with_raw { 80 } else { 56 });
            for (j, &x) in p.values.iter().enumerate() {
                // Writing into a Vec cannot fail.
                let _ = write!(buf, "{},{},{},{x:.16e}", p.path_id, j, times_text[j]);
                if with_raw {
                    let raw = p.raw_values.as_ref().map_or(f64::NAN, |r| r[j]);
                    let _ = write!(buf, ",{raw:.16e}");
                }
                buf.push(b'\n');
            }
            buf
        })
        .collect();
    let mut out = Vec::with_capacity(header.len() + chunks.iter().map(Vec::len).sum::<usize>());
    out.extend_from_slice(header);
    for c in chunks {
        out.extend_from_slice(&c);
    }
    Ok(out)
}

/// Writes `paths.csv` and `manifest.json` into `dir` (created if missing).
pub fn write_ensemble(ensemble: &PathEnsemble, dir: &FsPath) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let csv = render_paths_csv(ensemble)?;
    let mut manifest = RunManifest::new(RunConfig::Ensemble(ensemble.config.clone()), PATHS_FILE, &csv);
    manifest.diverged = ensemble
        .paths
        .iter()
        .filter_map(|p| {
            p.diverged_at.map(|step| DivergedPath {
                path_id: p.path_id,
                step,
            })
        })
        .collect();
    write_atomic(&dir.join(PATHS_FILE), &csv)?;
    write_atomic(&dir.join(MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &FsPath) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(Error::MissingManifest(path)),
        Err(e) => return Err(e.into()),
    };
    Ok(serde_json::from_slice(&bytes)?)
}

/// Reads a run directory written by [`write_ensemble`]. With `verify` the
/// CSV must hash to the manifest's digest.
pub fn read_ensemble(dir: &FsPath, verify: bool) -> Result<PathEnsemble> {
    let manifest = read_manifest(dir)?;
    let config = match manifest.config {
        RunConfig::Ensemble(c) => c,
        RunConfig::Analysis { subcommand, .. } => {
            return Err(Error::Precondition(format!(
                "{} describes a `{subcommand}` analysis run, not an ensemble",
                dir.display()
            )))
        }
    };
    let csv_path: PathBuf = dir.join(&manifest.content_file);
    let bytes = fs::read(&csv_path)?;
    if verify {
        let actual = digest(&bytes);
        if actual != manifest.content_digest {
            return Err(Error::DigestMismatch {
                file: csv_path,
                expected: manifest.content_digest,
                actual,
            });
        }
    }

    let n_paths = config.n_paths();
    let steps = config.steps();
    let with_raw = config.has_raw_values();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n_paths];
    let mut raws: Vec<Vec<f64>> = vec![Vec::new(); if with_raw { n_paths } else { 0 }];

    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(bytes.as_slice());
    let expected_header: &[&str] = if with_raw {
        &["path_id", "step", "t", "x", "raw_x"]
    } else {
        &["path_id", "step", "t", "x"]
    };
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != expected_header {
        return Err(Error::MalformedRow {
            row: 1,
            reason: format!("expected header `{}`", expected_header.join(",")),
        });
    }
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        let bad = |reason: String| Error::MalformedRow { row, reason };
        if record.len() != expected_header.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                expected_header.len(),
                record.len()
            )));
        }
        let id: usize = record[0]
            .parse()
            .map_err(|_| bad(format!("bad path_id `{}`", &record[0])))?;
        let step: usize = record[1]
            .parse()
            .map_err(|_| bad(format!("bad step `{}`", &record[1])))?;
        let x: f64 = record[3].parse().map_err(|_| bad(format!("bad x `{}`", &record[3])))?;
        if id >= n_paths {
            return Err(bad(format!("path_id {id} out of range for {n_paths} paths")));
        }
        if step != values[id].len() || step >= steps {
            return Err(bad(format!("path {id}: step {step} out of sequence")));
        }
        values[id].push(x);
        if with_raw {
            let raw: f64 = record[4]
                .parse()
                .map_err(|_| bad(format!("bad raw_x `{}`", &record[4])))?;
            raws[id].push(raw);
        }
    }

    let diverged: BTreeMap<u64, usize> = manifest.diverged.iter().map(|d| (d.path_id, d.step)).collect();
    let mut raws = raws.into_iter();
    let paths = values
        .into_iter()
        .enumerate()
        .map(|(id, vals)| {
            let id = id as u64;
            let diverged_at = diverged.get(&id).copied();
            let expected_len = diverged_at.unwrap_or(steps);
            if vals.len() != expected_len {
                return Err(Error::Precondition(format!(
                    "path {id} has {} steps in the CSV but the manifest implies {expected_len}",
                    vals.len()
                )));
            }
            Ok(Path::new(id, vals, raws.next(), diverged_at))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PathEnsemble {
        per_path_seeds: (0..n_paths as u64)
            .map(|id| path_seed(config.master_seed(), id))
            .collect(),
        config,
        paths,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_centers: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins spanning the data; a single repeated value lands in
    /// the middle bin.
    pub fn build(data: &[f64], n_bins: usize) -> Self {
        let n_bins = n_bins.max(1);
        let (min, max) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let mut counts = vec![0u64; n_bins];
        if data.is_empty() {
            return Self {
                bin_centers: (0..n_bins).map(|k| k as f64).collect(),
                counts,
            };
        }
        let (lo, width) = if max > min {
            (min, (max - min) / n_bins as f64)
        } else {
            let width = 1e-3 * min.abs().max(1.0);
            (min - (n_bins / 2) as f64 * width - 0.5 * width, width)
        };
        for &v in data {
            let k = (((v - lo) / width) as usize).min(n_bins - 1);
            counts[k] += 1;
        }
        Self {
            bin_centers: (0..n_bins).map(|k| lo + (k as f64 + 0.5) * width).collect(),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub mean_path: Vec<f64>,
    /// Sample standard deviation (divisor n − 1; 0 for a single path).
    pub std_path: Vec<f64>,
    pub terminal_histogram: Histogram,
    #[serde(rename = "path_integral")]
    pub path_integral_stats: IntegralStats,
    pub diverged_count: usize,
}

/// Mean and sample standard deviation (n − 1).
pub fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Per-step moments, terminal histogram and path-integral statistics over the
/// non-diverged paths.
pub fn summarize(ensemble: &PathEnsemble, n_bins: usize) -> Result<EnsembleSummary> {
    let paths: Vec<&Path> = ensemble.finite_paths().collect();
    if paths.is_empty() {
        return Err(Error::EmptyInput("every path diverged; nothing to summarize".into()));
    }
    let steps = ensemble.steps();
    let (mean_path, std_path) = (0..steps)
        .map(|j| mean_std(paths.iter().map(move |p| p.values[j])))
        .unzip();
    let terminal: Vec<f64> = paths.iter().map(|p| p.values[steps - 1]).collect();
    let (mean, std) = mean_std(paths.iter().map(|p| p.path_integral));
    let (min, max) = paths.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.path_integral), hi.max(p.path_integral))
    });
    Ok(EnsembleSummary {
        mean_path,
        std_path,
        terminal_histogram: Histogram::build(&terminal, n_bins),
        path_integral_stats: IntegralStats { mean, std, min, max },
        diverged_count: ensemble.diverged_count(),
    })
}
