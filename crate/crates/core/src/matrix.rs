//! Skew-symmetric state matrices.
//!
//! A [`SkewMatrix`] can only be built through constructors that write each
//! strictly-lower entry once and mirror it negated, so `A + Aᵀ == 0` holds
//! bit-for-bit. Explicit user matrices are checked for exact skewness and
//! rejected otherwise; nothing is symmetrized behind the caller's back.

use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, MATRIX_STREAM};

/// How a matrix was produced. Serialized alongside the entries so that data
/// files are self-describing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixOrigin {
    RandomGaussian { std: f64, seed: u64 },
    /// Entries drawn from `Uniform(-bound, bound)` with `bound = 1/dim`.
    RandomUniformScaled { seed: u64, bound: f64 },
    BlockDiagonal { freqs: Vec<f64> },
    Explicit,
}

/// Real `n × n` matrix with `A = -Aᵀ`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSkewMatrix")]
pub struct SkewMatrix {
    dim: usize,
    entries: Vec<f64>,
    origin: MatrixOrigin,
}

#[derive(Deserialize)]
struct RawSkewMatrix {
    dim: usize,
    entries: Vec<f64>,
    #[serde(default = "explicit_origin")]
    origin: MatrixOrigin,
}

fn explicit_origin() -> MatrixOrigin {
    MatrixOrigin::Explicit
}

impl TryFrom<RawSkewMatrix> for SkewMatrix {
    type Error = Error;

    fn try_from(raw: RawSkewMatrix) -> Result<Self> {
        let m = SkewMatrix::from_entries(raw.dim, raw.entries)?;
        match raw.origin {
            MatrixOrigin::BlockDiagonal { freqs } => {
                let expected = SkewMatrix::block_diagonal(&freqs)?;
                if expected.entries != m.entries {
                    return Err(Error::invalid(
                        "entries do not match the block-diagonal layout of `freqs`",
                    ));
                }
                Ok(expected)
            }
            origin => Ok(SkewMatrix { origin, ..m }),
        }
    }
}

impl SkewMatrix {
    fn from_lower(dim: usize, origin: MatrixOrigin, mut lower: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 1..dim {
            for j in 0..i {
                let v = lower(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = 0.0 - v;
            }
        }
        SkewMatrix { dim, entries, origin }
    }

    /// Strictly-lower entries i.i.d. `Normal(0, std²)` from the matrix stream of
    /// `seed`, filled row by row; the upper triangle is the negated mirror.
    pub fn random_gaussian(dim: usize, std: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if !(std.is_finite() && std > 0.0) {
            return Err(Error::invalid(format!("std must be finite and > 0, got {std}")));
        }
        let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = rng::stream(seed, MATRIX_STREAM);
        Ok(Self::from_lower(dim, MatrixOrigin::RandomGaussian { std, seed }, |_, _| {
            normal.sample(&mut rng)
        }))
    }

    /// Strictly-lower entries i.i.d. `Uniform(-1/dim, 1/dim)`.
    pub fn random_uniform_scaled(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let bound = 1.0 / dim as f64;
        let uniform = Uniform::new(-bound, bound).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = rng::stream(seed, MATRIX_STREAM);
        Ok(Self::from_lower(
            dim,
            MatrixOrigin::RandomUniformScaled { seed, bound },
            |_, _| uniform.sample(&mut rng),
        ))
    }

    /// `2d × 2d` matrix with blocks `[[0, -ω_i], [ω_i, 0]]` on the diagonal.
    pub fn block_diagonal(freqs: &[f64]) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::EmptyFrequencies);
        }
        if freqs.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("block frequencies"));
        }
        let dim = 2 * freqs.len();
        Ok(Self::from_lower(
            dim,
            MatrixOrigin::BlockDiagonal { freqs: freqs.to_vec() },
            |i, j| if i % 2 == 1 && j == i - 1 { freqs[i / 2] } else { 0.0 },
        ))
    }

    /// Wraps row-major `entries`, which must already be exactly skew-symmetric.
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        for i in 0..dim {
            for j in 0..=i {
                if entries[i * dim + j] != -entries[j * dim + i] {
                    return Err(Error::NotSkewSymmetric { row: i, col: j });
                }
            }
        }
        Ok(SkewMatrix {
            dim,
            entries,
            origin: MatrixOrigin::Explicit,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Self::from_entries(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn origin(&self) -> &MatrixOrigin {
        &self.origin
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                got: len,
            })
        }
    }

    /// `out = A x` with no dimension checks.
    pub(crate) fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        linalg::mat_vec(&self.entries, x, out);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        Ok(out)
    }

    /// Rotation frequencies of the purely imaginary spectrum.
    ///
    /// Uses the symmetric positive-semidefinite matrix `-A² = AᵀA`, whose
    /// eigenvalues are `ω_i²`, each twice. Sorted eigenvalues are paired off
    /// from the bottom after setting aside one unpaired zero when `dim` is odd.
    pub fn eigen_frequencies(&self) -> EigenFrequencies {
        let n = self.dim;
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| self.get(k, i) * self.get(k, j)).sum();
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        let mut squares = linalg::symmetric_eigenvalues(gram, n);
        squares.iter_mut().for_each(|v| *v = v.max(0.0));
        squares.sort_by(f64::total_cmp);

        let zero_modes = n % 2;
        let largest = squares.last().copied().unwrap_or(0.0);
        let omegas = squares[zero_modes..]
            .chunks_exact(2)
            .map(|pair| {
                debug_assert!(
                    (pair[1] - pair[0]).abs() <= PAIRING_RTOL * largest.max(f64::MIN_POSITIVE),
                    "unpaired ω² cluster {pair:?}"
                );
                (0.5 * (pair[0] + pair[1])).sqrt()
            })
            .collect();
        EigenFrequencies { omegas, zero_modes }
    }

    /// `e^{tA}` as a row-major matrix.
    pub fn expm(&self, t: f64) -> Vec<f64> {
        let n = self.dim;
        if let MatrixOrigin::BlockDiagonal { freqs } = &self.origin {
            let mut out = vec![0.0; n * n];
            for (b, w) in freqs.iter().enumerate() {
                let (s, c) = (w * t).sin_cos();
                let i = 2 * b;
                out[i * n + i] = c;
                out[i * n + i + 1] = -s;
                out[(i + 1) * n + i] = s;
                out[(i + 1) * n + i + 1] = c;
            }
            return out;
        }
        let scaled: Vec<f64> = self.entries.iter().map(|v| v * t).collect();
        linalg::expm(&scaled, n)
    }

    /// `e^{tA} x0`, the exact solution of the linear system `ẋ = Ax`.
    pub fn expm_apply(&self, t: f64, x0: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x0.len())?;
        if !t.is_finite() {
            return Err(Error::NonFinite("time"));
        }
        if t == 0.0 {
            return Ok(x0.to_vec());
        }
        let e = self.expm(t);
        let mut out = vec![0.0; self.dim];
        linalg::mat_vec(&e, x0, &mut out);
        Ok(out)
    }
}

/// Relative tolerance used when pairing the doubled `ω²` eigenvalues.
pub const PAIRING_RTOL: f64 = 1e-8;

/// One eigenvalue `re + i·im`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

/// Spectrum of a skew-symmetric matrix: `{±iω}` plus unpaired zeros.
///
/// A pair of zero eigenvalues shows up as `ω = 0`; `zero_modes` only counts the
/// zero left over when the dimension is odd.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenFrequencies {
    pub omegas: Vec<f64>,
    pub zero_modes: usize,
}

impl EigenFrequencies {
    pub fn dim(&self) -> usize {
        2 * self.omegas.len() + self.zero_modes
    }

    pub fn eigenvalues(&self) -> Vec<Eigenvalue> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend((0..self.zero_modes).map(|_| Eigenvalue { re: 0.0, im: 0.0 }));
        for &w in &self.omegas {
            out.push(Eigenvalue { re: 0.0, im: w });
            out.push(Eigenvalue { re: 0.0, im: -w });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rot() -> SkewMatrix {
        SkewMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn is_exactly_skew(m: &SkewMatrix) -> bool {
        let n = m.dim();
        (0..n).all(|i| (0..n).all(|j| m.get(i, j) + m.get(j, i) == 0.0))
    }

    #[test]
    fn random_2x2_has_forced_form() {
        let m = SkewMatrix::random_gaussian(2, 1.0, 3).unwrap();
        let g = m.get(1, 0);
        assert_ne!(g, 0.0);
        assert_eq!(m.entries(), &[0.0, -g, g, 0.0]);
    }

    #[test]
    fn random_1x1_is_zero() {
        let m = SkewMatrix::random_gaussian(1, 1.0, 3).unwrap();
        assert_eq!(m.entries(), &[0.0]);
        assert!(matches!(SkewMatrix::random_gaussian(0, 1.0, 3), Err(Error::ZeroDimension)));
        assert!(matches!(SkewMatrix::random_uniform_scaled(0, 3), Err(Error::ZeroDimension)));
    }

    #[test]
    fn random_is_bit_reproducible() {
        let a = SkewMatrix::random_gaussian(7, 0.3, 11).unwrap();
        let b = SkewMatrix::random_gaussian(7, 0.3, 11).unwrap();
        let c = SkewMatrix::random_gaussian(7, 0.3, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.entries(), c.entries());
    }

    #[test]
    fn uniform_scaled_respects_bound() {
        let m = SkewMatrix::random_uniform_scaled(2, 5).unwrap();
        assert!(m.get(1, 0).abs() < 0.5);
        let m = SkewMatrix::random_uniform_scaled(40, 5).unwrap();
        assert!(m.entries().iter().all(|v| v.abs() < 0.025));
        assert_eq!(m.origin(), &MatrixOrigin::RandomUniformScaled { seed: 5, bound: 0.025 });
    }

    #[test]
    fn block_diagonal_layout() {
        assert_eq!(SkewMatrix::block_diagonal(&[1.0]).unwrap(), {
            let mut m = rot();
            m.origin = MatrixOrigin::BlockDiagonal { freqs: vec![1.0] };
            m
        });
        let m = SkewMatrix::block_diagonal(&[5.0, 10.0]).unwrap();
        #[rustfmt::skip]
        let expected = [
            0.0, -5.0, 0.0, 0.0,
            5.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, -10.0,
            0.0, 0.0, 10.0, 0.0,
        ];
        assert_eq!(m.entries(), &expected);
        assert_eq!(m.entries().iter().filter(|v| **v == 0.0).count(), 12);
        assert!(SkewMatrix::block_diagonal(&[0.0]).unwrap().entries().iter().all(|v| *v == 0.0));
        assert!(matches!(SkewMatrix::block_diagonal(&[]), Err(Error::EmptyFrequencies)));
    }

    #[test]
    fn explicit_matrix_must_be_exactly_skew() {
        let err = SkewMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0 + 1e-15, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NotSkewSymmetric { row: 1, col: 0 }));
        let err = SkewMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NotSkewSymmetric { row: 0, col: 0 }));
        assert!(SkewMatrix::from_entries(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let m = SkewMatrix::random_gaussian(3, 1.0, 1).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"dim\":3"));
        assert_eq!(serde_json::from_str::<SkewMatrix>(&json).unwrap(), m);

        let bad = r#"{"dim":2,"entries":[0,1,1,0],"origin":{"kind":"explicit"}}"#;
        assert!(serde_json::from_str::<SkewMatrix>(bad).is_err());
        let wrong_layout = r#"{"dim":2,"entries":[0,-2,2,0],"origin":{"kind":"block_diagonal","freqs":[1.0]}}"#;
        assert!(serde_json::from_str::<SkewMatrix>(wrong_layout).is_err());
        let no_origin = r#"{"dim":2,"entries":[0,-2,2,0]}"#;
        assert_eq!(
            serde_json::from_str::<SkewMatrix>(no_origin).unwrap().origin(),
            &MatrixOrigin::Explicit
        );
    }

    #[test]
    fn frequencies_of_small_matrices() {
        let f = rot().eigen_frequencies();
        assert_eq!(f.zero_modes, 0);
        assert!((f.omegas[0] - 1.0).abs() < 1e-15);

        let f = SkewMatrix::block_diagonal(&[10.0, 5.0]).unwrap().eigen_frequencies();
        assert_eq!(f.omegas, vec![5.0, 10.0]);

        let f = SkewMatrix::random_gaussian(1, 1.0, 0).unwrap().eigen_frequencies();
        assert!(f.omegas.is_empty());
        assert_eq!(f.zero_modes, 1);
        assert_eq!(f.eigenvalues(), vec![Eigenvalue { re: 0.0, im: 0.0 }]);
    }

    #[test]
    fn odd_dimension_has_one_zero_mode() {
        let m = SkewMatrix::random_gaussian(5, 1.0, 2).unwrap();
        let f = m.eigen_frequencies();
        assert_eq!(f.zero_modes, 1);
        assert_eq!(f.omegas.len(), 2);
        assert_eq!(f.dim(), 5);
    }

    #[test]
    fn expm_examples() {
        let y = rot().expm_apply(PI / 2.0, &[1.0, 0.0]).unwrap();
        assert!((y[0] - 0.0).abs() < 1e-10 && (y[1] - 1.0).abs() < 1e-10);

        let x0 = [0.3, 0.7];
        let y = rot().expm_apply(2.0 * PI, &x0).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-9 && (y[1] - 0.7).abs() < 1e-9);

        let m = SkewMatrix::random_gaussian(6, 2.0, 4).unwrap();
        let x = [1.0, -2.0, 3.0, 0.5, 0.25, -1.0];
        assert_eq!(m.expm_apply(0.0, &x).unwrap(), x.to_vec());
        assert!(m.expm_apply(1.0, &x[..3]).is_err());
    }

    #[test]
    fn block_shortcut_matches_series() {
        let freqs = [0.7, 3.0, 11.0];
        let block = SkewMatrix::block_diagonal(&freqs).unwrap();
        let explicit = SkewMatrix::from_entries(6, block.entries().to_vec()).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6];
        for t in [0.01, 0.5, 2.0, 9.0] {
            let a = block.expm_apply(t, &x).unwrap();
            let b = explicit.expm_apply(t, &x).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-11, "t={t}: {p} vs {q}");
            }
        }
    }

    fn arb_skew() -> impl Strategy<Value = SkewMatrix> {
        (1usize..9, 0.05f64..5.0, any::<u64>())
            .prop_map(|(dim, std, seed)| SkewMatrix::random_gaussian(dim, std, seed).unwrap())
    }

    proptest! {
        #[test]
        fn constructed_matrices_are_exactly_skew(m in arb_skew(), seed in any::<u64>(), dim in 1usize..12) {
            prop_assert!(is_exactly_skew(&m));
            prop_assert!(is_exactly_skew(&SkewMatrix::random_uniform_scaled(dim, seed).unwrap()));
        }

        #[test]
        fn exponential_preserves_norm(m in arb_skew(), t in -5.0f64..5.0, seed in any::<u64>()) {
            let x = rng::gaussian_state(m.dim(), 1.0, seed).unwrap();
            let y = m.expm_apply(t, &x).unwrap();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((nx - ny).abs() <= 1e-10 * nx.max(1.0));
        }

        #[test]
        fn exponential_semigroup(m in arb_skew(), s in -2.0f64..2.0, t in -2.0f64..2.0, seed in any::<u64>()) {
            let x = rng::gaussian_state(m.dim(), 1.0, seed).unwrap();
            let direct = m.expm_apply(s + t, &x).unwrap();
            let composed = m.expm_apply(s, &m.expm_apply(t, &x).unwrap()).unwrap();
            for (a, b) in direct.iter().zip(&composed) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn block_frequencies_recovered(freqs in prop::collection::vec(-50.0f64..50.0, 1..6)) {
            let f = SkewMatrix::block_diagonal(&freqs).unwrap().eigen_frequencies();
            let mut expected: Vec<f64> = freqs.iter().map(|w| w.abs()).collect();
            expected.sort_by(f64::total_cmp);
            prop_assert_eq!(f.zero_modes, 0);
            for (a, b) in f.omegas.iter().zip(&expected) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}
