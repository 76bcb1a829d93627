//! Dense row-major helpers: cyclic Jacobi for symmetric spectra and the
//! scaling-and-squaring matrix exponential.

/// Eigenvalues of the symmetric `n × n` matrix `a` (row-major), unsorted.
///
/// Cyclic Jacobi: sweep over every off-diagonal pair and annihilate it with a
/// plane rotation. Off-diagonal mass shrinks quadratically once the diagonal
/// is well separated. Entries that can no longer change the diagonal are
/// zeroed outright after the first few sweeps.
pub(crate) fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    const MAX_SWEEPS: usize = 100;
    debug_assert_eq!(a.len(), n * n);

    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off == 0.0 || off.sqrt() <= 1e-18 * scale {
            break;
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }

                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
            }
        }
    }

    (0..n).map(|i| a[i * n + i]).collect()
}

pub(crate) fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub(crate) fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * n..(i + 1) * n];
        *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
    }
}

fn norm1(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(m)` for a general `n × n` matrix by scaling and squaring.
///
/// `m` is scaled by `2^-s` until its 1-norm is at most 1/2, the Taylor series
/// is summed until the next term vanishes at double precision, then the result
/// is squared `s` times.
pub(crate) fn expm(m: &[f64], n: usize) -> Vec<f64> {
    let norm = norm1(m, n);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = 2f64.powi(-squarings);
    let b: Vec<f64> = m.iter().map(|v| v * scale).collect();

    let mut result = vec![0.0; n * n];
    for i in 0..n {
        result[i * n + i] = 1.0;
    }
    let mut term = result.clone();
    for k in 1..64 {
        term = mat_mul(&term, &b, n);
        let inv_k = 1.0 / k as f64;
        term.iter_mut().for_each(|v| *v *= inv_k);
        let term_max = term.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        result.iter_mut().zip(&term).for_each(|(r, t)| *r += t);
        if term_max <= f64::EPSILON * 1e-3 {
            break;
        }
    }

    for _ in 0..squarings {
        result = mat_mul(&result, &result, n);
    }
    result
}
