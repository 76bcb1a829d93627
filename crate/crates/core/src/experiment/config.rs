//! TOML run files.
//!
//! A run file is a list of `[[run]]` tables whose keys mirror
//! [`SimulationConfig`] field names. Matrix and initial state are given as
//! sources that are resolved to concrete values before anything runs:
//!
//! ```toml
//! seed = 7                     # optional global seed
//!
//! [[run]]
//! name = "tanh-rotation"
//! activation = "tanh"
//! tau = 0.001                  # optional, default 0.001
//! steps = 20000                # optional, default 100000
//! integrator = "rk4"           # optional, default "euler"
//! divergence_threshold = 100   # optional
//! record_stride = 1            # optional
//! matrix = { kind = "block_diagonal", freqs = [1.0] }
//! x0 = { kind = "explicit", values = [2.0, 0.0] }
//! analysis = [{ kind = "spectrum" }, { kind = "stft", window_len = 1024, hop = 256 }]
//! ```
//!
//! Random sources without an explicit `seed` take
//! `derive_seed(global_seed, position of the run in the file)`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::dynamics::{default_record_stride, Integrator, SimulationConfig, DEFAULT_DIVERGENCE_THRESHOLD, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::invariants::InvariantSpec;
use crate::matrix::SkewMatrix;
use crate::rng::gaussian_state;
use crate::spectral::{DEFAULT_STFT_HOP, DEFAULT_STFT_WINDOW};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSource {
    RandomGaussian {
        dim: usize,
        std: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    RandomUniformScaled {
        dim: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    BlockDiagonal {
        freqs: Vec<f64>,
    },
    Explicit {
        rows: Vec<Vec<f64>>,
    },
}

impl MatrixSource {
    pub fn resolve(&self, default_seed: u64) -> Result<SkewMatrix> {
        match self {
            MatrixSource::RandomGaussian { dim, std, seed } => {
                SkewMatrix::random_gaussian(*dim, *std, seed.unwrap_or(default_seed))
            }
            MatrixSource::RandomUniformScaled { dim, seed } => {
                SkewMatrix::random_uniform_scaled(*dim, seed.unwrap_or(default_seed))
            }
            MatrixSource::BlockDiagonal { freqs } => SkewMatrix::block_diagonal(freqs),
            MatrixSource::Explicit { rows } => SkewMatrix::from_rows(rows),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSource {
    Explicit {
        values: Vec<f64>,
    },
    /// i.i.d. `Normal(0, std²)` components, dimension taken from the matrix.
    Gaussian {
        std: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl StateSource {
    pub fn resolve(&self, dim: usize, default_seed: u64) -> Result<Vec<f64>> {
        match self {
            StateSource::Explicit { values } => Ok(values.clone()),
            StateSource::Gaussian { std, seed } => gaussian_state(dim, *std, seed.unwrap_or(default_seed)),
        }
    }
}

/// Extra data products computed from a finished trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisRequest {
    /// Amplitude spectrum of one state component (0-based).
    Spectrum {
        #[serde(default)]
        component: usize,
    },
    Stft {
        #[serde(default)]
        component: usize,
        #[serde(default = "default_window")]
        window_len: usize,
        #[serde(default = "default_hop")]
        hop: usize,
    },
    /// Time series `t,x<k>` of one component.
    Component {
        #[serde(default)]
        component: usize,
    },
    /// Stability class of the linearization `ẋ = Ax`.
    Stability,
}

fn default_window() -> usize {
    DEFAULT_STFT_WINDOW
}

fn default_hop() -> usize {
    DEFAULT_STFT_HOP
}

impl AnalysisRequest {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            AnalysisRequest::Spectrum { component } | AnalysisRequest::Component { component } => {
                check_component(*component, dim)
            }
            AnalysisRequest::Stft {
                component,
                window_len,
                hop,
            } => {
                check_component(*component, dim)?;
                if *window_len < 2 || *hop == 0 || hop > window_len {
                    return Err(Error::Config(format!(
                        "stft needs window_len >= 2 and 1 <= hop <= window_len, got {window_len}/{hop}"
                    )));
                }
                Ok(())
            }
            AnalysisRequest::Stability => Ok(()),
        }
    }
}

fn check_component(component: usize, dim: usize) -> Result<()> {
    if component >= dim {
        return Err(Error::Config(format!(
            "component {component} out of range for dimension {dim}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: String,
    pub activation: ActivationKind,
    pub matrix: MatrixSource,
    pub x0: StateSource,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub divergence_threshold: Option<f64>,
    #[serde(default)]
    pub integrator: Option<Integrator>,
    #[serde(default)]
    pub record_stride: Option<usize>,
    /// Conserved quantity to track; defaults to the one that applies to the
    /// system, or the quadratic norm when none is known.
    #[serde(default)]
    pub invariant: Option<InvariantSpec>,
    #[serde(default)]
    pub analysis: Vec<AnalysisRequest>,
    /// Free-form annotations copied into the manifest.
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, rename = "run")]
    pub runs: Vec<RunSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// A fully resolved run: concrete config plus what to compute from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub name: String,
    pub config: SimulationConfig,
    pub invariant: InvariantSpec,
    pub analysis: Vec<AnalysisRequest>,
    pub labels: BTreeMap<String, String>,
}

impl RunPlan {
    pub fn new(name: impl Into<String>, config: SimulationConfig) -> Self {
        let invariant =
            InvariantSpec::for_system(&config.matrix, config.activation).unwrap_or(InvariantSpec::QuadraticNorm);
        RunPlan {
            name: name.into(),
            config,
            invariant,
            analysis: Vec::new(),
            labels: BTreeMap::new(),
        }
    }

    pub fn with_analysis(mut self, request: AnalysisRequest) -> Self {
        self.analysis.push(request);
        self
    }

    pub fn with_label(mut self, key: &str, value: impl ToString) -> Self {
        self.labels.insert(key.to_string(), value.to_string());
        self
    }

    pub fn trajectory_file(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn invariant_file(&self) -> String {
        format!("{}.invariant.csv", self.name)
    }

    pub fn sidecar_file(&self) -> String {
        format!("{}.json", self.name)
    }

    /// One file per analysis request, in request order.
    pub fn analysis_files(&self) -> Vec<String> {
        self.analysis
            .iter()
            .map(|a| match a {
                AnalysisRequest::Spectrum { component } => format!("{}.spectrum_x{}.csv", self.name, component + 1),
                AnalysisRequest::Stft { component, .. } => format!("{}.stft_x{}.csv", self.name, component + 1),
                AnalysisRequest::Component { component } => format!("{}.x{}.csv", self.name, component + 1),
                AnalysisRequest::Stability => format!("{}.stability.json", self.name),
            })
            .collect()
    }

    /// Every file the run writes, sidecar last.
    pub fn output_files(&self) -> Vec<String> {
        let mut files = vec![self.trajectory_file(), self.invariant_file()];
        files.extend(self.analysis_files());
        files.push(self.sidecar_file());
        files
    }

    pub fn validate(&self) -> Result<()> {
        validate_name(&self.name)?;
        let in_run = |e: Error| Error::Config(format!("run `{}`: {e}", self.name));
        self.config.validate().map_err(in_run)?;
        self.invariant.validate().map_err(in_run)?;
        if let Some(d) = self.invariant.dim() {
            if d != self.config.dim() {
                return Err(in_run(Error::DimensionMismatch {
                    expected: self.config.dim(),
                    got: d,
                }));
            }
        }
        for a in &self.analysis {
            a.validate(self.config.dim()).map_err(in_run)?;
        }
        Ok(())
    }
}

/// Run names become file stems, so they are restricted to `[A-Za-z0-9._-]`.
pub fn validate_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "run name `{name}` must be non-empty, not start with '.', and use only [A-Za-z0-9._-]"
        )))
    }
}

impl RunSpec {
    pub fn resolve(&self, default_seed: u64) -> Result<RunPlan> {
        let in_run = |e: Error| Error::Config(format!("run `{}`: {e}", self.name));
        let matrix = self.matrix.resolve(default_seed).map_err(in_run)?;
        let x0 = self.x0.resolve(matrix.dim(), default_seed).map_err(in_run)?;
        let steps = self.steps.unwrap_or(crate::dynamics::DEFAULT_STEPS);
        let mut config = SimulationConfig::new(matrix, self.activation, x0)
            .with_tau(self.tau.unwrap_or(DEFAULT_TAU))
            .with_steps(steps)
            .with_threshold(self.divergence_threshold.unwrap_or(DEFAULT_DIVERGENCE_THRESHOLD))
            .with_integrator(self.integrator.unwrap_or(Integrator::ForwardEuler));
        config.record_stride = self.record_stride.unwrap_or_else(|| default_record_stride(steps));

        let mut plan = RunPlan::new(self.name.clone(), config);
        if let Some(spec) = &self.invariant {
            plan.invariant = spec.clone();
        }
        plan.analysis = self.analysis.clone();
        plan.labels = self.labels.clone();
        plan.validate()?;
        Ok(plan)
    }
}
