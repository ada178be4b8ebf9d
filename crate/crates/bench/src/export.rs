//! Curve CSVs, the JSON manifest and the saved trace.
//!
//! Nothing time-dependent is written, so a fixed config reproduces every
//! byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Solver};
use crate::error::{BenchError, Result};
use crate::experiment::{CertificateReport, CurveRecord, ExperimentResult};

pub const MANIFEST: &str = "manifest.json";
pub const TRACE: &str = "trace.json";
/// Env var that overrides the output directory of the CLI.
pub const OUT_DIR_ENV: &str = "DEVOPT_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FstarEntry {
    pub seed: u64,
    pub value: f64,
    pub reference: f64,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub solver: Solver,
    pub file: String,
    pub finished: usize,
    pub diverged_seeds: Vec<u64>,
    pub initial_gap: Option<f64>,
    pub final_mean_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub noise_reference: String,
    pub fstar_rule: String,
    pub fstar: Vec<FstarEntry>,
    pub certificate: CertificateReport,
    pub curves: Vec<CurveSummary>,
}

pub fn csv_name(solver: Solver) -> String {
    format!("{}.csv", solver.name())
}

/// `n,mean_gap,min_gap,max_gap` with one row per iteration.
pub fn curve_csv(curve: &CurveRecord) -> String {
    let mut out = String::from("n,mean_gap,min_gap,max_gap\n");
    for r in &curve.rows {
        writeln!(out, "{},{:e},{:e},{:e}", r.n, r.mean_gap, r.min_gap, r.max_gap).expect("string write");
    }
    out
}

pub fn manifest(result: &ExperimentResult, curves: &[CurveRecord]) -> Manifest {
    Manifest {
        config: result.config.clone(),
        seeds: result.problems.iter().map(|p| p.seed).collect(),
        noise_reference: "white Gaussian noise scaled to the given fraction of |A truth|".into(),
        fstar_rule: "minimum over a long accelerated reference run and every recorded objective".into(),
        fstar: result
            .problems
            .iter()
            .map(|p| FstarEntry {
                seed: p.seed,
                value: p.fstar,
                reference: p.reference,
                source: p.fstar_source.clone(),
            })
            .collect(),
        certificate: result.report(),
        curves: curves
            .iter()
            .map(|c| CurveSummary {
                solver: c.solver,
                file: csv_name(c.solver),
                finished: c.finished,
                diverged_seeds: c.diverged_seeds.clone(),
                initial_gap: c.initial_gap,
                final_mean_gap: c.rows.last().map(|r| r.mean_gap),
            })
            .collect(),
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| {
        BenchError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Writes one CSV per solver and the manifest into `dir`; returns the paths.
pub fn export_curves(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let curves = result.curves();
    if curves.is_empty() || result.problems.is_empty() {
        return Err(BenchError::Invalid("nothing to export".into()));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for c in &curves {
        let path = dir.join(csv_name(c.solver));
        write(&path, &curve_csv(c))?;
        written.push(path);
    }
    let path = dir.join(MANIFEST);
    write(&path, &(serde_json::to_string_pretty(&manifest(result, &curves))? + "\n"))?;
    written.push(path);
    Ok(written)
}

/// Full per-run objectives, enough for [`export_curves`] to be rerun later.
pub fn save_trace(result: &ExperimentResult, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(TRACE);
    write(&path, &(serde_json::to_string(result)? + "\n"))?;
    Ok(path)
}

pub fn load_trace(path: &Path) -> Result<ExperimentResult> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
