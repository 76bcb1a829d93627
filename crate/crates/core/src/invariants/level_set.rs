//! Level sets of the 2-D tanh invariant and orbit closure checks.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::InvariantSpec;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::table;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetPoint {
    pub theta: f64,
    pub x1: f64,
    pub x2: f64,
}

/// `num_points` points on `{H = level}` for `H(x) = (1/ω)·log(cosh(ωx₁)·cosh(ωx₂))`,
/// at uniformly spaced angles `θ_k = 2πk/num_points`.
///
/// `H` strictly increases along every ray from the origin, so the radius at
/// each angle is found by bracketing and bisecting to floating-point
/// resolution.
pub fn trace_level_set(omega: f64, level: f64, num_points: usize) -> Result<Vec<LevelSetPoint>> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::invalid(format!("omega must be finite and > 0, got {omega}")));
    }
    if !(level.is_finite() && level > 0.0) {
        return Err(Error::invalid(format!(
            "level must be finite and > 0 (H = 0 only at the origin), got {level}"
        )));
    }
    if num_points == 0 {
        return Err(Error::invalid("num_points must be at least 1"));
    }
    let spec = InvariantSpec::TanhLog2D { omega };
    Ok((0..num_points)
        .map(|k| {
            let theta = TAU * k as f64 / num_points as f64;
            let (s, c) = theta.sin_cos();
            let h = |r: f64| spec.eval_unchecked(&[r * c, r * s]);
            let r = bisect_radius(h, level);
            LevelSetPoint {
                theta,
                x1: r * c,
                x2: r * s,
            }
        })
        .collect())
}

fn bisect_radius(h: impl Fn(f64) -> f64, level: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while h(hi) < level {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (h(lo) - level).abs() < (h(hi) - level).abs() {
        lo
    } else {
        hi
    }
}

/// CSV with header `theta,x1,x2`.
pub fn write_level_set_csv<W: Write + ?Sized>(points: &[LevelSetPoint], w: &mut W) -> io::Result<()> {
    table::write_header(w, &["theta", "x1", "x2"])?;
    for p in points {
        table::write_row(w, [p.theta, p.x1, p.x2])?;
    }
    Ok(())
}

/// Closest approach of a trajectory to its starting point after leaving it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnEvent {
    pub index: usize,
    pub time: f64,
    pub distance: f64,
}

/// First return of `traj` to within `eps` of its initial state, searching
/// samples with `time <= window`.
///
/// The trajectory must first get farther than `2·eps` from the start; the
/// reported sample is the local minimum of the distance inside the first
/// subsequent visit to the `eps` ball.
pub fn first_return(traj: &Trajectory, eps: f64, window: f64) -> Option<ReturnEvent> {
    let x0 = traj.states.first()?;
    let dist = |s: &[f64]| {
        s.iter()
            .zip(x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let mut left = false;
    let mut best: Option<ReturnEvent> = None;
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        if *t > window {
            break;
        }
        let d = dist(s);
        if !left {
            left = d > 2.0 * eps;
            continue;
        }
        match best {
            None if d < eps => best = Some(ReturnEvent { index: i, time: *t, distance: d }),
            Some(b) if d < b.distance => best = Some(ReturnEvent { index: i, time: *t, distance: d }),
            Some(_) => break,
            None => {}
        }
    }
    best
}

/// Search horizon for [`first_return`]: ten linear periods `2π/|ω|`, widened
/// tenfold when `|ω|·‖x0‖∞ > 1` puts the orbit in the saturated regime,
/// where tanh slows the rotation.
pub fn return_search_window(omega: f64, x0: &[f64]) -> f64 {
    let period = 2.0 * PI / omega.abs();
    let amplitude = x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if omega.abs() * amplitude > 1.0 {
        100.0 * period
    } else {
        10.0 * period
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::dynamics::{simulate, Integrator, SimulationConfig};
    use crate::matrix::SkewMatrix;

    #[test]
    fn level_through_unit_axis_point() {
        let level = super::super::log_cosh(1.0);
        let pts = trace_level_set(1.0, level, 8).unwrap();
        assert_eq!(pts[0].theta, 0.0);
        assert!((pts[0].x1 - 1.0).abs() < 1e-12 && pts[0].x2 == 0.0);
        // symmetric under quarter turns
        assert!((pts[2].x2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn points_lie_on_the_level() {
        let spec = InvariantSpec::TanhLog2D { omega: 2.5 };
        for level in [1e-6, 0.2, 1.5, 3.0, 40.0] {
            for p in trace_level_set(2.5, level, 64).unwrap() {
                let h = spec.eval(&[p.x1, p.x2]).unwrap();
                assert!((h - level).abs() <= 1e-10 * level.max(1.0), "level {level}: {h}");
            }
        }
    }

    #[test]
    fn tiny_levels_shrink_to_origin() {
        let max_r = |level: f64| {
            trace_level_set(1.0, level, 32)
                .unwrap()
                .iter()
                .map(|p| p.x1.hypot(p.x2))
                .fold(0.0, f64::max)
        };
        assert!(max_r(1e-10) < 1e-4);
        assert!(max_r(1e-10) < max_r(1e-6));
    }

    #[test]
    fn higher_levels_are_squarer() {
        // max/min radius over the curve: 1 for a circle, √2 for the diamond
        // |x1| + |x2| = c that log cosh approaches at large levels. The extreme
        // radii sit on the axes (max) and the diagonals (min).
        let spread = |level: f64| {
            let radii: Vec<f64> = trace_level_set(1.0, level, 360)
                .unwrap()
                .iter()
                .map(|p| p.x1.hypot(p.x2))
                .collect();
            let max = radii.iter().copied().fold(0.0, f64::max);
            let min = radii.iter().copied().fold(f64::INFINITY, f64::min);
            (
                max / min,
                (radii[0] - max).abs() <= 1e-12 * max,
                (radii[45] - min).abs() <= 1e-12 * min,
            )
        };
        let (s02, _, _) = spread(0.2);
        let (s15, _, _) = spread(1.5);
        let (s3, axis_max, diag_min) = spread(3.0);
        assert!(s02 > 1.0 && s15 > s02 && s3 > s15, "{s02} {s15} {s3}");
        assert!(s3 < std::f64::consts::SQRT_2);
        assert!(axis_max && diag_min);
    }

    #[test]
    fn invalid_arguments() {
        assert!(trace_level_set(1.0, 0.0, 10).is_err());
        assert!(trace_level_set(1.0, -1.0, 10).is_err());
        assert!(trace_level_set(0.0, 1.0, 10).is_err());
        assert!(trace_level_set(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_level_set_csv(&trace_level_set(1.0, 0.5, 4).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta,x1,x2\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn tanh_orbit_closes() {
        let m = SkewMatrix::block_diagonal(&[1.0]).unwrap();
        for x0 in [vec![0.2, 0.0], vec![1.5, 0.0], vec![-3.0, 2.0]] {
            let window = return_search_window(1.0, &x0);
            let cfg = SimulationConfig::new(m.clone(), ActivationKind::Tanh, x0.clone())
                .with_integrator(Integrator::Rk4)
                .with_steps((window / 0.001) as usize);
            let traj = simulate(&cfg).unwrap();
            let eps = 1e-3 * crate::dynamics::l2_norm(&x0);
            let ret = first_return(&traj, eps, window).expect("orbit should close");
            assert!(ret.time > 1.0);
        }
    }

    #[test]
    fn window_widens_when_saturated() {
        assert_eq!(return_search_window(1.0, &[0.5, 0.0]), 20.0 * PI);
        assert_eq!(return_search_window(2.0, &[1.0, 0.0]), 100.0 * PI);
    }
}
