//! Stability of the linear system `ẋ = Ax` from the spectrum of `A`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Eigenvalue, SkewMatrix};

/// Real parts within this distance of zero count as on the imaginary axis.
pub const DEFAULT_AXIS_TOL: f64 = 1e-9;

const NORMALITY_NOTE: &str = "assumes a normal matrix (e.g. skew-symmetric): eigenvalues on the \
imaginary axis are taken to be non-defective, so algebraic and geometric multiplicities agree; \
Jordan structure is not examined";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    AsymptoticallyStable,
    MarginallyStable,
    Unstable,
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityClass::AsymptoticallyStable => "asymptotically_stable",
            StabilityClass::MarginallyStable => "marginally_stable",
            StabilityClass::Unstable => "unstable",
        })
    }
}

/// Serializes as `{class, eigenvalues: [{re, im}], notes}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub class: StabilityClass,
    pub eigenvalues: Vec<Eigenvalue>,
    pub notes: String,
}

/// Classifies from the spectrum:
///
/// * any `re > tol`: unstable;
/// * all `re < -tol`: asymptotically stable;
/// * otherwise marginally stable, with `|re| <= tol` read as on the axis.
///
/// Only valid for normal matrices, where eigenvalues on the axis cannot be
/// defective; the report's notes say so.
pub fn classify_stability(eigs: &[Eigenvalue], tol: f64) -> Result<StabilityReport> {
    if eigs.is_empty() {
        return Err(Error::invalid("eigenvalue list is empty"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be finite and > 0, got {tol}")));
    }
    if eigs.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    let class = if eigs.iter().any(|e| e.re > tol) {
        StabilityClass::Unstable
    } else if eigs.iter().all(|e| e.re < -tol) {
        StabilityClass::AsymptoticallyStable
    } else {
        StabilityClass::MarginallyStable
    };
    let on_axis = eigs.iter().filter(|e| e.re.abs() <= tol).count();
    Ok(StabilityReport {
        class,
        eigenvalues: eigs.to_vec(),
        notes: format!("{NORMALITY_NOTE}; {on_axis} eigenvalue(s) within {tol:e} of the imaginary axis"),
    })
}

/// Classifies a skew-symmetric matrix through its rotation frequencies.
pub fn classify_skew(matrix: &SkewMatrix, tol: f64) -> Result<StabilityReport> {
    classify_stability(&matrix.eigen_frequencies().eigenvalues(), tol)
}
