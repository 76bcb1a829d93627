//! Parallel sweep execution and the run manifest.
//!
//! Each run writes, into the output directory:
//!
//! - `<name>.csv`: trajectory, `t,x1,...,xn`
//! - `<name>.invariant.csv`: `t,H`
//! - `<name>.json`: sidecar with termination metadata and the config digest
//! - one file per analysis request (see [`RunPlan::output_files`])
//!
//! The sidecar is written last and only after every other file is in place,
//! so a sidecar with a matching digest marks a finished run. With resume
//! enabled such runs are skipped.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{AnalysisRequest, RunPlan};
use super::preset::ExperimentPreset;
use crate::dynamics::{l2_norm, simulate, Termination, Trajectory, TrajectorySidecar};
use crate::error::{Error, Result};
use crate::invariants::{classify_skew, invariant_trace, DEFAULT_AXIS_TOL};
use crate::spectral::{amplitude_spectrum, stft};
use crate::table::{self, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Skip runs whose files are already complete.
    pub resume: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            workers: 0,
            resume: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    /// SHA-256 of the run plan's JSON form.
    pub config_digest: String,
    /// File names relative to the output directory.
    pub files: Vec<String>,
    /// `"completed"` or `"diverged"`; absent when the run failed.
    pub termination: Option<String>,
    pub step: Option<usize>,
    pub invariant_rel_drift: Option<f64>,
    /// `‖x_final‖ / ‖x0‖ - 1` over the recorded samples.
    pub norm_growth: Option<f64>,
    pub wall_time_s: f64,
    pub labels: BTreeMap<String, String>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_diverged(&self) -> bool {
        self.termination.as_deref() == Some("diverged")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub preset: String,
    pub tool_version: String,
    pub global_seed: u64,
    pub runs: Vec<RunRecord>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn failed(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.error.is_some())
    }
}

/// Sidecar JSON of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSidecar {
    #[serde(flatten)]
    pub trajectory: TrajectorySidecar,
    #[serde(default)]
    pub invariant_rel_drift: Option<f64>,
    #[serde(default)]
    pub norm_growth: Option<f64>,
}

pub fn plan_digest(plan: &RunPlan) -> String {
    let bytes = serde_json::to_vec(plan).expect("run plans always serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// `‖last‖ / ‖first‖ - 1` over the recorded states, `None` from the origin.
pub fn relative_norm_growth(traj: &Trajectory) -> Option<f64> {
    let first = l2_norm(traj.states.first()?);
    let last = l2_norm(traj.final_state());
    (first > 0.0).then(|| last / first - 1.0)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn write_file(dir: &Path, name: &str, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    write_atomic(&dir.join(name), write)
}

fn write_analysis(dir: &Path, plan: &RunPlan, traj: &Trajectory, req: &AnalysisRequest, file: &str) -> Result<()> {
    let cfg = &plan.config;
    let spacing = cfg.tau * cfg.record_stride as f64;
    let rate = 1.0 / spacing;
    match req {
        AnalysisRequest::Spectrum { component } => {
            let mut report = amplitude_spectrum(&traj.uniform_component(*component, spacing)?, rate)?;
            report.source_component = *component;
            write_file(dir, file, |w| report.write_csv(w))
        }
        AnalysisRequest::Stft {
            component,
            window_len,
            hop,
        } => {
            let report = stft(&traj.uniform_component(*component, spacing)?, rate, *window_len, *hop)?;
            write_file(dir, file, |w| report.write_csv(w))
        }
        AnalysisRequest::Component { component } => {
            let column = format!("x{}", component + 1);
            write_file(dir, file, |w| {
                table::write_header(w, &["t", &column])?;
                for (t, x) in traj.times.iter().zip(&traj.states) {
                    table::write_row(w, [*t, x[*component]])?;
                }
                Ok(())
            })
        }
        AnalysisRequest::Stability => {
            let report = classify_skew(&cfg.matrix, DEFAULT_AXIS_TOL)?;
            write_file(dir, file, |w| {
                serde_json::to_writer_pretty(&mut *w, &report)?;
                writeln!(w)
            })
        }
    }
}

fn read_sidecar(path: &Path) -> Option<RunSidecar> {
    let file = fs::File::open(path).ok()?;
    serde_json::from_reader(BufReader::new(file)).ok()
}

fn record_from_sidecar(plan: &RunPlan, digest: String, files: Vec<String>, sidecar: &RunSidecar, wall: f64) -> RunRecord {
    RunRecord {
        name: plan.name.clone(),
        config_digest: digest,
        files,
        termination: Some(sidecar.trajectory.termination.clone()),
        step: Some(sidecar.trajectory.step),
        invariant_rel_drift: sidecar.invariant_rel_drift,
        norm_growth: sidecar.norm_growth,
        wall_time_s: wall,
        labels: plan.labels.clone(),
        error: None,
    }
}

fn execute(plan: &RunPlan, dir: &Path, resume: bool) -> RunRecord {
    let start = Instant::now();
    let digest = plan_digest(plan);
    let files = plan.output_files();
    let sidecar_path = dir.join(plan.sidecar_file());

    if resume {
        if let Some(existing) = read_sidecar(&sidecar_path) {
            let complete = existing.trajectory.config_digest.as_deref() == Some(digest.as_str())
                && files.iter().all(|f| dir.join(f).is_file());
            if complete {
                return record_from_sidecar(plan, digest, files, &existing, 0.0);
            }
        }
    }

    let failed = |error: Error, termination: Option<&Termination>, step: Option<usize>| RunRecord {
        name: plan.name.clone(),
        config_digest: digest.clone(),
        files: files.iter().filter(|f| dir.join(f).is_file()).cloned().collect(),
        termination: termination.map(|t| match t {
            Termination::Completed => "completed".to_string(),
            Termination::Diverged { .. } => "diverged".to_string(),
        }),
        step,
        invariant_rel_drift: None,
        norm_growth: None,
        wall_time_s: start.elapsed().as_secs_f64(),
        labels: plan.labels.clone(),
        error: Some(error.to_string()),
    };

    let traj = match simulate(&plan.config) {
        Ok(t) => t,
        Err(e) => return failed(e, None, None),
    };
    let mut sidecar = RunSidecar {
        trajectory: traj.sidecar(&plan.config),
        invariant_rel_drift: None,
        norm_growth: finite_opt(relative_norm_growth(&traj)),
    };
    sidecar.trajectory.config_digest = Some(digest.clone());
    let step = Some(sidecar.trajectory.step);

    let result = (|| -> Result<()> {
        write_file(dir, &plan.trajectory_file(), |w| traj.write_csv(w))?;
        let trace = invariant_trace(&plan.invariant, &traj)?;
        sidecar.invariant_rel_drift = finite(trace.rel_drift);
        write_file(dir, &plan.invariant_file(), |w| trace.write_csv(w))?;
        for (req, file) in plan.analysis.iter().zip(plan.analysis_files()) {
            write_analysis(dir, plan, &traj, req, &file)?;
        }
        write_file(dir, &plan.sidecar_file(), |w| {
            serde_json::to_writer_pretty(&mut *w, &sidecar)?;
            writeln!(w)
        })
    })();

    match result {
        Ok(()) => record_from_sidecar(plan, digest, files, &sidecar, start.elapsed().as_secs_f64()),
        Err(e) => failed(e, Some(&traj.termination), step),
    }
}

fn finite_opt(v: Option<f64>) -> Option<f64> {
    v.and_then(finite)
}

/// Runs every plan of `preset` and writes the manifest. Failures of single
/// runs are recorded in the manifest; only problems with the output directory
/// or the manifest itself are returned as errors.
pub fn run_experiment(preset: &ExperimentPreset, opts: &RunOptions) -> Result<RunManifest> {
    preset.validate()?;
    let dir = opts.out_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| preset.runs.par_iter().map(|p| execute(p, dir, opts.resume)).collect());

    let manifest = RunManifest {
        preset: preset.name.to_string(),
        tool_version: crate::TOOL_VERSION.to_string(),
        global_seed: preset.global_seed,
        runs,
    };
    write_file(dir, MANIFEST_FILE, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)
    })?;
    Ok(manifest)
}
