//! Vector field `ẋ = σ(Ax)` and its time integration.
//!
//! Forward Euler is the scheme used for the experiments; classical RK4 is the
//! high-accuracy reference used to check conserved quantities. Both run in
//! plain `f64` with a fixed operation order, so a given config always yields a
//! bit-identical trajectory.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::matrix::SkewMatrix;
use crate::table;

pub const DEFAULT_TAU: f64 = 0.001;
pub const DEFAULT_STEPS: usize = 100_000;
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 100.0;

/// Keep every sample up to 10⁵ steps, every 10th above.
pub fn default_record_stride(steps: usize) -> usize {
    if steps <= 100_000 {
        1
    } else {
        10
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[serde(rename = "euler")]
    ForwardEuler,
    Rk4,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::ForwardEuler),
            "rk4" => Ok(Integrator::Rk4),
            _ => Err(Error::invalid(format!("unknown integrator `{s}` (expected euler or rk4)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub matrix: SkewMatrix,
    pub activation: ActivationKind,
    pub x0: Vec<f64>,
    /// Time step in seconds.
    pub tau: f64,
    pub steps: usize,
    /// Stop once `‖x‖₂ >= divergence_threshold`.
    pub divergence_threshold: f64,
    pub integrator: Integrator,
    pub record_stride: usize,
}

impl SimulationConfig {
    /// Config with the experiment defaults: `τ = 0.001`, 10⁵ forward Euler
    /// steps, divergence threshold 100.
    pub fn new(matrix: SkewMatrix, activation: ActivationKind, x0: Vec<f64>) -> Self {
        SimulationConfig {
            matrix,
            activation,
            x0,
            tau: DEFAULT_TAU,
            steps: DEFAULT_STEPS,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            integrator: Integrator::ForwardEuler,
            record_stride: default_record_stride(DEFAULT_STEPS),
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Also resets `record_stride` to the default for the new step count.
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self.record_stride = default_record_stride(steps);
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.divergence_threshold = threshold;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.matrix.check_dim(self.x0.len())?;
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial state"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(format!("tau must be finite and > 0, got {}", self.tau)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be at least 1"));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::invalid(format!(
                "divergence_threshold must be > 0, got {}",
                self.divergence_threshold
            )));
        }
        let norm = l2_norm(&self.x0);
        if norm >= self.divergence_threshold {
            return Err(Error::invalid(format!(
                "initial state norm {norm} is already at or above the divergence threshold {}",
                self.divergence_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// `step` is the step whose result met the threshold; `last_state` is the
    /// state one step earlier, the last one below the threshold, and is also
    /// the final recorded sample. `exceeded_norm` is the norm that tripped the
    /// check (possibly infinite or NaN).
    Diverged {
        step: usize,
        last_state: Vec<f64>,
        exceeded_norm: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self.termination, Termination::Diverged { .. })
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// Time series of state component `index` (0-based).
    pub fn component(&self, index: usize) -> Result<Vec<f64>> {
        if index >= self.dim() {
            return Err(Error::invalid(format!(
                "component {index} out of range for dimension {}",
                self.dim()
            )));
        }
        Ok(self.states.iter().map(|s| s[index]).collect())
    }

    /// Component `index` on the uniform grid of the given sample spacing. A
    /// trailing sample recorded off the grid (the pre-threshold state of a
    /// diverged run, or a final step that is not a stride multiple) is dropped.
    pub fn uniform_component(&self, index: usize, spacing: f64) -> Result<Vec<f64>> {
        let mut series = self.component(index)?;
        if let [.., a, b] = self.times.as_slice() {
            if ((b - a) - spacing).abs() > 1e-9 * spacing {
                series.pop();
            }
        }
        Ok(series)
    }

    /// Sample rate implied by the spacing of the first two samples.
    pub fn sample_rate_hz(&self) -> Option<f64> {
        match self.times.as_slice() {
            [t0, t1, ..] if t1 > t0 => Some(1.0 / (t1 - t0)),
            _ => None,
        }
    }

    /// CSV with header `t,x1,...,xn`, one row per sample.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        let mut columns = vec!["t".to_string()];
        columns.extend((1..=self.dim()).map(|i| format!("x{i}")));
        let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        table::write_header(w, &refs)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            table::write_row(w, std::iter::once(*t).chain(s.iter().copied()))?;
        }
        Ok(())
    }

    /// Reads a trajectory CSV. The file carries no termination metadata, so
    /// the result is marked [`Termination::Completed`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Trajectory> {
        let (columns, rows) = table::read_table(r)?;
        if columns.len() < 2 || columns[0] != "t" {
            return Err(Error::Parse("trajectory header must be `t,x1,...,xn`".into()));
        }
        let (times, states) = rows.into_iter().map(|row| (row[0], row[1..].to_vec())).unzip();
        Ok(Trajectory {
            times,
            states,
            termination: Termination::Completed,
        })
    }

    /// Termination metadata written next to the CSV.
    pub fn sidecar(&self, cfg: &SimulationConfig) -> TrajectorySidecar {
        let (termination, step, last_state, exceeded_norm) = match &self.termination {
            Termination::Completed => ("completed", cfg.steps, None, None),
            Termination::Diverged {
                step,
                last_state,
                exceeded_norm,
            } => (
                "diverged",
                *step,
                Some(last_state.clone()),
                exceeded_norm.is_finite().then_some(*exceeded_norm),
            ),
        };
        TrajectorySidecar {
            termination: termination.to_string(),
            step,
            threshold: cfg.divergence_threshold,
            last_state,
            exceeded_norm,
            config_digest: None,
        }
    }
}

/// JSON sidecar of a trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    /// `"completed"` or `"diverged"`.
    pub termination: String,
    /// Steps executed when completed; the step that met the threshold when diverged.
    pub step: usize,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_state: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exceeded_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

pub fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Reusable scratch space for one field/step evaluation.
struct Stepper<'a> {
    matrix: &'a SkewMatrix,
    activation: ActivationKind,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(matrix: &'a SkewMatrix, activation: ActivationKind) -> Self {
        let n = matrix.dim();
        Stepper {
            matrix,
            activation,
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn field(matrix: &SkewMatrix, activation: ActivationKind, x: &[f64], out: &mut [f64]) {
        matrix.mul_vec_into(x, out);
        activation.eval_in_place(out);
    }

    fn euler(&mut self, x: &[f64], tau: f64, out: &mut [f64]) {
        Self::field(self.matrix, self.activation, x, &mut self.k1);
        for ((o, xi), k) in out.iter_mut().zip(x).zip(&self.k1) {
            *o = xi + tau * k;
        }
    }

    fn rk4(&mut self, x: &[f64], tau: f64, out: &mut [f64]) {
        let half = 0.5 * tau;
        let (m, act) = (self.matrix, self.activation);

        Self::field(m, act, x, &mut self.k1);
        for ((t, xi), k) in self.tmp.iter_mut().zip(x).zip(&self.k1) {
            *t = xi + half * k;
        }
        Self::field(m, act, &self.tmp, &mut self.k2);
        for ((t, xi), k) in self.tmp.iter_mut().zip(x).zip(&self.k2) {
            *t = xi + half * k;
        }
        Self::field(m, act, &self.tmp, &mut self.k3);
        for ((t, xi), k) in self.tmp.iter_mut().zip(x).zip(&self.k3) {
            *t = xi + tau * k;
        }
        Self::field(m, act, &self.tmp, &mut self.k4);

        let sixth = tau / 6.0;
        for i in 0..x.len() {
            out[i] = x[i] + sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    fn step(&mut self, integrator: Integrator, x: &[f64], tau: f64, out: &mut [f64]) {
        match integrator {
            Integrator::ForwardEuler => self.euler(x, tau, out),
            Integrator::Rk4 => self.rk4(x, tau, out),
        }
    }
}

/// `σ(Ax)`.
pub fn vector_field(matrix: &SkewMatrix, activation: ActivationKind, x: &[f64]) -> Result<Vec<f64>> {
    matrix.check_dim(x.len())?;
    let mut out = vec![0.0; x.len()];
    Stepper::field(matrix, activation, x, &mut out);
    Ok(out)
}

/// One forward Euler step `x + τ·σ(Ax)`.
pub fn step_euler(matrix: &SkewMatrix, activation: ActivationKind, x: &[f64], tau: f64) -> Result<Vec<f64>> {
    matrix.check_dim(x.len())?;
    let mut out = vec![0.0; x.len()];
    Stepper::new(matrix, activation).euler(x, tau, &mut out);
    Ok(out)
}

/// One classical fourth-order Runge–Kutta step.
pub fn step_rk4(matrix: &SkewMatrix, activation: ActivationKind, x: &[f64], tau: f64) -> Result<Vec<f64>> {
    matrix.check_dim(x.len())?;
    let mut out = vec![0.0; x.len()];
    Stepper::new(matrix, activation).rk4(x, tau, &mut out);
    Ok(out)
}

/// Integrates `cfg.steps` steps from `cfg.x0`.
///
/// After every step the new state's norm is compared against the divergence
/// threshold (`>=`, and any non-finite norm counts as met). On divergence the
/// run stops and the last state below the threshold becomes the final sample.
/// Samples are kept at step indices that are multiples of `record_stride`,
/// plus the final step.
pub fn simulate(cfg: &SimulationConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.dim();
    let stride = cfg.record_stride;
    let capacity = cfg.steps / stride + 2;
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);

    let mut stepper = Stepper::new(&cfg.matrix, cfg.activation);
    let mut x = cfg.x0.clone();
    let mut next = vec![0.0; n];
    times.push(0.0);
    states.push(x.clone());
    let mut last_recorded = 0usize;
    let mut termination = Termination::Completed;

    for k in 1..=cfg.steps {
        stepper.step(cfg.integrator, &x, cfg.tau, &mut next);
        let norm = l2_norm(&next);
        if !(norm < cfg.divergence_threshold) {
            if last_recorded != k - 1 {
                times.push((k - 1) as f64 * cfg.tau);
                states.push(x.clone());
            }
            termination = Termination::Diverged {
                step: k,
                last_state: x,
                exceeded_norm: norm,
            };
            break;
        }
        std::mem::swap(&mut x, &mut next);
        if k % stride == 0 || k == cfg.steps {
            times.push(k as f64 * cfg.tau);
            states.push(x.clone());
            last_recorded = k;
        }
    }

    Ok(Trajectory {
        times,
        states,
        termination,
    })
}
