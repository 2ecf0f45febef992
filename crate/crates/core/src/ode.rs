//! Explicit Runge–Kutta integrators for the deterministic moment equations.
//!
//! States are flat vectors; matrix-valued flows reshape on the caller side.
//! Both integrators emit one sample per point of a caller-supplied grid, and both
//! call a projection hook after every accepted step (the Riccati flow uses
//! it to re-symmetrize).

use crate::error::{Error, Result};
use crate::linalg::RVec;

/// Above this norm the flow is treated as numerically divergent.
pub const BLOWUP_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Dormand–Prince 5(4) with error control between grid points.
    Adaptive { rtol: f64, atol: f64 },
    /// Classical RK4 with step equal to the sampling interval.
    FixedRk4,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Adaptive {
            rtol: 1e-11,
            atol: 1e-13,
        }
    }
}

/// Uniform sampled solution.
#[derive(Debug, Clone)]
pub struct Samples {
    pub times: Vec<f64>,
    pub states: Vec<RVec>,
}

/// Grid `0, dt, 2dt, …` ending exactly at `t_final`; a trailing partial
/// interval shorter than `dt` becomes the last step.
pub fn uniform_grid(t_final: f64, dt: f64) -> Vec<f64> {
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
    grid.push(t_final);
    grid
}

fn check(t: f64, y: &RVec) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepSizeTooLarge { t, norm: f64::INFINITY });
    }
    let norm = y.norm();
    if norm > BLOWUP_NORM {
        return Err(Error::StepSizeTooLarge { t, norm });
    }
    Ok(())
}

/// Integrates `y' = f(t, y)` through the increasing time grid `grid`,
/// returning one sample per grid point (the first is `y0`).
pub fn integrate<F, P>(
    f: F,
    mut project: P,
    y0: &RVec,
    grid: &[f64],
    method: Integrator,
) -> Result<Samples>
where
    F: Fn(f64, &RVec) -> RVec,
    P: FnMut(&mut RVec),
{
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty time grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::InvalidConfig("time grid must be strictly increasing".into()));
    }
    let mut times = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    let mut y = y0.clone();
    let mut t = grid[0];
    times.push(t);
    states.push(y.clone());
    let mut h_guess = grid.get(1).map_or(1.0, |t1| t1 - t);
    for &t_next in &grid[1..] {
        match method {
            Integrator::FixedRk4 => {
                y = rk4_step(&f, t, &y, t_next - t);
                project(&mut y);
            }
            Integrator::Adaptive { rtol, atol } => {
                h_guess = dopri_span(&f, &mut project, t, &mut y, t_next, h_guess, rtol, atol)?;
            }
        }
        t = t_next;
        check(t, &y)?;
        times.push(t);
        states.push(y.clone());
    }
    Ok(Samples { times, states })
}

fn rk4_step<F: Fn(f64, &RVec) -> RVec>(f: &F, t: f64, y: &RVec, h: f64) -> RVec {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MIN_STEP: f64 = 1e-14;
const MAX_REJECTS: usize = 10_000;

/// Advances `y` from `t` to exactly `t_end`; returns the suggested next step.
#[allow(clippy::too_many_arguments)]
fn dopri_span<F, P>(
    f: &F,
    project: &mut P,
    mut t: f64,
    y: &mut RVec,
    t_end: f64,
    h_guess: f64,
    rtol: f64,
    atol: f64,
) -> Result<f64>
where
    F: Fn(f64, &RVec) -> RVec,
    P: FnMut(&mut RVec),
{
    let mut h = h_guess.min(t_end - t);
    let mut rejects = 0;
    let mut suggested = h_guess;
    while t < t_end {
        let last = t + h >= t_end - 1e-15 * t_end.abs().max(1.0);
        if last {
            h = t_end - t;
        }
        let k1 = f(t, y);
        let k2 = f(t + C2 * h, &(&*y + &k1 * (A21 * h)));
        let k3 = f(t + C3 * h, &(&*y + (&k1 * A31 + &k2 * A32) * h));
        let k4 = f(t + C4 * h, &(&*y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h));
        let k5 = f(
            t + C5 * h,
            &(&*y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h),
        );
        let k6 = f(
            t + h,
            &(&*y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h),
        );
        let y_new = &*y + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = f(t + h, &y_new);
        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;

        let mut err = 0.0;
        for i in 0..y.len() {
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            err += (err_vec[i] / sc).powi(2);
        }
        let err = if y.is_empty() { 0.0 } else { (err / y.len() as f64).sqrt() };
        if !err.is_finite() {
            return Err(Error::StepSizeTooLarge { t, norm: f64::INFINITY });
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            *y = y_new;
            project(y);
            check(t, y)?;
            if !last {
                suggested = h * factor;
            }
            h *= factor;
            if !last {
                h = h.min(t_end - t);
            }
        } else {
            rejects += 1;
            h *= factor;
            if h < MIN_STEP || rejects > MAX_REJECTS {
                return Err(Error::StepSizeTooLarge { t, norm: y.norm() });
            }
        }
    }
    Ok(suggested)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_adaptive() {
        let y0 = RVec::from_vec(vec![1.0, 2.0]);
        let grid = uniform_grid(5.0, 0.5);
        let s = integrate(|_, y| -y, |_| {}, &y0, &grid, Integrator::default()).unwrap();
        assert_eq!(s.states.len(), 11);
        let exact = (-5.0f64).exp();
        assert!((s.states[10][0] - exact).abs() < 1e-10);
        assert!((s.states[10][1] - 2.0 * exact).abs() < 1e-10);
        assert!((s.times[10] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let y0 = RVec::from_vec(vec![1.0]);
        let err = |dt: f64| {
            let grid = uniform_grid(1.0, dt);
            let s = integrate(|t, y| y * t.cos(), |_| {}, &y0, &grid, Integrator::FixedRk4)
                .unwrap();
            (s.states.last().unwrap()[0] - 1f64.sin().exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn fixed_step_blowup_is_reported() {
        let y0 = RVec::from_vec(vec![1.0]);
        let grid = uniform_grid(100.0, 1.0);
        let r = integrate(|_, y| y * -50.0, |_| {}, &y0, &grid, Integrator::FixedRk4);
        assert!(matches!(r, Err(Error::StepSizeTooLarge { .. })));
    }

    #[test]
    fn grid_ends_on_horizon() {
        assert_eq!(uniform_grid(10.0, 1e-3).len(), 10_001);
        let g = uniform_grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(uniform_grid(0.1, 1.0), vec![0.0, 0.1]);
    }
}
