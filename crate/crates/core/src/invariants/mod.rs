//! Conserved quantities of the free dynamics, their drift along simulated
//! trajectories, level sets, and linear stability classification.
//!
//! Two families of invariants are covered:
//!
//! * `H(x) = ½‖x‖²` for the linear system `ẋ = Ax` with any skew `A`.
//! * `H(x) = Σᵢ (1/ωᵢ)·log(cosh(ωᵢ x₂ᵢ₋₁)·cosh(ωᵢ x₂ᵢ))` for `ẋ = tanh(Ax)` with `A`
//!   block-diagonal with blocks `[[0, -ωᵢ], [ωᵢ, 0]]`. Its gradient is
//!   `tanh(ωᵢ xⱼ)` componentwise, which is orthogonal to the tanh field.
//!
//! No invariant is known for tanh dynamics with a general skew matrix; for
//! those runs only the empirical drift of `½‖x‖²` is reported.

mod level_set;
mod stability;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::matrix::{MatrixOrigin, SkewMatrix};
use crate::table;

pub use level_set::{
    first_return, return_search_window, trace_level_set, write_level_set_csv, LevelSetPoint, ReturnEvent,
};
pub use stability::{classify_skew, classify_stability, StabilityClass, StabilityReport, DEFAULT_AXIS_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvariantSpec {
    QuadraticNorm,
    #[serde(rename = "tanh_log_2d")]
    TanhLog2D { omega: f64 },
    TanhLogBlockDiag { freqs: Vec<f64> },
}

/// `log(cosh(a))` without overflow or cancellation.
///
/// Small arguments use `log1p(2·sinh²(a/2))`, large ones
/// `|a| + log1p(e^{-2|a|}) - log 2`, which stays exact where `cosh` overflows.
pub fn log_cosh(a: f64) -> f64 {
    let b = a.abs();
    if b < 1.0 {
        let s = (0.5 * b).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        b + (-2.0 * b).exp().ln_1p() - std::f64::consts::LN_2
    }
}

impl InvariantSpec {
    /// The conserved quantity that applies to `ẋ = σ(Ax)`, if one is known.
    pub fn for_system(matrix: &SkewMatrix, activation: ActivationKind) -> Option<InvariantSpec> {
        match (activation, matrix.origin()) {
            (ActivationKind::Identity, _) => Some(InvariantSpec::QuadraticNorm),
            (ActivationKind::Tanh, MatrixOrigin::BlockDiagonal { freqs })
                if freqs.iter().all(|w| *w != 0.0) =>
            {
                Some(match freqs.as_slice() {
                    [omega] => InvariantSpec::TanhLog2D { omega: *omega },
                    _ => InvariantSpec::TanhLogBlockDiag { freqs: freqs.clone() },
                })
            }
            // every 2×2 skew matrix is a single rotation block
            (ActivationKind::Tanh, _) if matrix.dim() == 2 && matrix.get(1, 0) != 0.0 => {
                Some(InvariantSpec::TanhLog2D {
                    omega: matrix.get(1, 0),
                })
            }
            _ => None,
        }
    }

    /// Required state dimension, `None` for any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            InvariantSpec::QuadraticNorm => None,
            InvariantSpec::TanhLog2D { .. } => Some(2),
            InvariantSpec::TanhLogBlockDiag { freqs } => Some(2 * freqs.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let freqs: &[f64] = match self {
            InvariantSpec::QuadraticNorm => &[],
            InvariantSpec::TanhLog2D { omega } => std::slice::from_ref(omega),
            InvariantSpec::TanhLogBlockDiag { freqs } => {
                if freqs.is_empty() {
                    return Err(Error::EmptyFrequencies);
                }
                freqs
            }
        };
        if freqs.iter().any(|w| !w.is_finite() || *w == 0.0) {
            return Err(Error::invalid("invariant frequencies must be finite and non-zero"));
        }
        Ok(())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        self.validate()?;
        match self.dim() {
            Some(d) if d != x.len() => Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }

    fn blocks(&self) -> &[f64] {
        match self {
            InvariantSpec::QuadraticNorm => &[],
            InvariantSpec::TanhLog2D { omega } => std::slice::from_ref(omega),
            InvariantSpec::TanhLogBlockDiag { freqs } => freqs,
        }
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            InvariantSpec::QuadraticNorm => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            _ => self
                .blocks()
                .iter()
                .zip(x.chunks_exact(2))
                .map(|(w, p)| (log_cosh(w * p[0]) + log_cosh(w * p[1])) / w)
                .sum(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// `∇H(x)`: `x` itself for the quadratic norm, `tanh(ωᵢ xⱼ)` per block otherwise.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(match self {
            InvariantSpec::QuadraticNorm => x.to_vec(),
            _ => self
                .blocks()
                .iter()
                .zip(x.chunks_exact(2))
                .flat_map(|(w, p)| [(w * p[0]).tanh(), (w * p[1]).tanh()])
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `max_k |H_k - H_0|`.
    pub abs_drift: f64,
    /// `abs_drift / max(|H_0|, 1e-300)`.
    pub rel_drift: f64,
}

impl InvariantTrace {
    /// CSV with header `t,H`.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        table::write_header(w, &["t", "H"])?;
        for (t, h) in self.times.iter().zip(&self.values) {
            table::write_row(w, [*t, *h])?;
        }
        Ok(())
    }
}

/// Evaluates `spec` at every recorded sample of `traj`.
pub fn invariant_trace(spec: &InvariantSpec, traj: &Trajectory) -> Result<InvariantTrace> {
    let first = traj
        .states
        .first()
        .ok_or_else(|| Error::invalid("trajectory has no samples"))?;
    spec.check(first)?;
    if let Some(bad) = traj.states.iter().find(|s| s.len() != first.len()) {
        return Err(Error::DimensionMismatch {
            expected: first.len(),
            got: bad.len(),
        });
    }
    let values: Vec<f64> = traj.states.iter().map(|s| spec.eval_unchecked(s)).collect();
    let h0 = values[0];
    let abs_drift = values.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max);
    Ok(InvariantTrace {
        times: traj.times.clone(),
        values,
        abs_drift,
        rel_drift: abs_drift / h0.abs().max(1e-300),
    })
}
