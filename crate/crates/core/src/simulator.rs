//! Time-domain simulation of the moment equations.
//!
//! Conditional means follow the innovation form
//! `dX̄ = (AX̄ + Bu)dt + √η(V_tCᵀ + M)dw`, with `w` a standard Wiener process
//! and `V_t` precomputed once by the deterministic Riccati flow. Each
//! trajectory draws from its own ChaCha stream keyed by its index, so the
//! ensemble does not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, RMat, RVec};
use crate::ode::{self, Integrator};
use crate::riccati::{self, CovarianceSeries};
use crate::system::{DerivedMatrices, SystemSpec};

/// Markovian feedback `u dt = F dy` with `dy = √η CX̄ dt + dw`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Feedback {
    #[default]
    None,
    /// Fixed input matrix `B` (2m×k) and gain `F` (k×m).
    Markovian { b: RMat, f: RMat },
    /// `B_t = V_tCᵀ + M` and `F = −I`, following the covariance flow.
    MarkovianTimeVarying,
}

impl Feedback {
    pub fn label(&self) -> &'static str {
        match self {
            Feedback::None => "none",
            Feedback::Markovian { .. } => "markovian-fixed",
            Feedback::MarkovianTimeVarying => "markovian-time-varying",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub feedback: Feedback,
    /// Overrides the efficiency stored in the spec.
    pub eta: Option<f64>,
    /// Initial mean; zero when absent.
    pub x0: Option<RVec>,
    /// Initial covariance; vacuum `½I` when absent.
    pub v0: Option<RMat>,
    /// Number of equal intervals at whose ends ensemble statistics are taken.
    pub samples: usize,
    /// Keep every trajectory at the sample times.
    pub keep_trajectories: bool,
}

impl SimConfig {
    pub fn new(dt: f64, t_final: f64, n_traj: usize, seed: u64) -> Self {
        Self {
            dt,
            t_final,
            n_traj,
            seed,
            feedback: Feedback::None,
            eta: None,
            x0: None,
            v0: None,
            samples: 10,
            keep_trajectories: false,
        }
    }

    pub fn with_feedback(mut self, feedback: Feedback) -> Self {
        self.feedback = feedback;
        self
    }

    pub fn with_x0(mut self, x0: RVec) -> Self {
        self.x0 = Some(x0);
        self
    }

    fn validate(&self, n: usize, m: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "need 0 < dt <= T, got dt = {}, T = {}",
                self.dt, self.t_final
            )));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidConfig("n_traj must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidEfficiency(eta));
            }
        }
        if self.x0.as_ref().is_some_and(|x| x.len() != n) {
            return Err(Error::DimensionMismatch(format!("x0 must have length {n}")));
        }
        if self.v0.as_ref().is_some_and(|v| v.shape() != (n, n)) {
            return Err(Error::DimensionMismatch(format!("v0 must be {n}x{n}")));
        }
        if let Feedback::Markovian { b, f } = &self.feedback {
            if b.nrows() != n || f.ncols() != m || b.ncols() != f.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "feedback needs B: {n}xk and F: kx{m}, got B {:?}, F {:?}",
                    b.shape(),
                    f.shape()
                )));
            }
        }
        Ok(())
    }
}

/// One conditional-mean path at the sample times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub means: Vec<RVec>,
}

#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub t: f64,
    pub n_traj: usize,
    /// `E[X̄]` over trajectories.
    pub mean_of_means: RVec,
    /// Standard error of each entry of `mean_of_means`.
    pub mean_se: RVec,
    /// Sample covariance of the conditional means (`n − 1` denominator).
    pub sigma: RMat,
    /// Gaussian standard error of each entry of `sigma`.
    pub sigma_se: RMat,
    /// Conditional covariance from the Riccati flow.
    pub vc: RMat,
    /// Open-loop unconditional covariance from the Lyapunov flow.
    pub vunc: RMat,
}

impl EnsembleStats {
    /// `‖Vc + Σ − Vunc‖_F / ‖Vunc‖_F`.
    pub fn identity_residual(&self) -> f64 {
        (&self.vc + &self.sigma - &self.vunc).norm() / self.vunc.norm().max(f64::MIN_POSITIVE)
    }

    /// Largest `|a − b| / √(se_a² + se_b²)` over the means and `Σ` entries.
    pub fn max_z_score(&self, other: &EnsembleStats) -> f64 {
        let mut worst: f64 = 0.0;
        let mut push = |d: f64, s1: f64, s2: f64| {
            let se = (s1 * s1 + s2 * s2).sqrt();
            let z = if se > 0.0 {
                d.abs() / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        };
        for i in 0..self.mean_of_means.len() {
            push(
                self.mean_of_means[i] - other.mean_of_means[i],
                self.mean_se[i],
                other.mean_se[i],
            );
        }
        let n = self.sigma.nrows();
        for i in 0..n {
            for k in i..n {
                push(
                    self.sigma[(i, k)] - other.sigma[(i, k)],
                    self.sigma_se[(i, k)],
                    other.sigma_se[(i, k)],
                );
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct ConditionalRun {
    pub eta: f64,
    pub feedback: &'static str,
    pub sample_times: Vec<f64>,
    /// One entry per sample time, including `t = 0`.
    pub stats: Vec<EnsembleStats>,
    /// Empty unless `keep_trajectories` was set.
    pub trajectories: Vec<Trajectory>,
}

impl ConditionalRun {
    pub fn final_stats(&self) -> &EnsembleStats {
        self.stats.last().expect("at least one sample time")
    }
}

/// Dense row-major copy for the inner loop.
fn flat(m: &RMat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for k in 0..m.ncols() {
            out.push(m[(i, k)]);
        }
    }
    out
}

/// Raises `StepSizeTooLarge` when a Hurwitz drift would be made unstable by
/// the explicit Euler step.
fn check_em_stability(drift: &RMat, dt: f64) -> Result<()> {
    let eigs = linalg::eigenvalues(drift)?;
    if linalg::max_real_part(&eigs) < 0.0 {
        let growth = eigs
            .iter()
            .map(|l| (l * dt + 1.0).norm())
            .fold(0.0, f64::max);
        if growth >= 1.0 {
            return Err(Error::StepSizeTooLarge {
                t: 0.0,
                norm: growth,
            });
        }
    }
    Ok(())
}

fn sample_indices(steps: usize, samples: usize) -> Vec<usize> {
    let samples = samples.min(steps);
    let mut idx: Vec<usize> = (0..=samples)
        .map(|k| ((k as f64) * steps as f64 / samples as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

/// Per-step drift and noise-gain matrices.
struct Coefficients {
    /// Row-major `n×n`, either one shared matrix or one per step.
    drift: Vec<Vec<f64>>,
    /// Row-major `n×m`, one per step.
    gain: Vec<Vec<f64>>,
}

fn coefficients(
    d: &DerivedMatrices,
    eta: f64,
    covs: &[RMat],
    feedback: &Feedback,
    dt: f64,
) -> Result<Coefficients> {
    let se = eta.sqrt();
    let steps = covs.len() - 1;
    let innovation = |v: &RMat| (v * d.c.transpose() + &d.m) * se;
    match feedback {
        Feedback::None => {
            check_em_stability(&d.a, dt)?;
            Ok(Coefficients {
                drift: vec![flat(&d.a)],
                gain: covs[..steps].iter().map(|v| flat(&innovation(v))).collect(),
            })
        }
        Feedback::Markovian { b, f } => {
            let bf = b * f;
            let drift = &d.a + &bf * &d.c * se;
            check_em_stability(&drift, dt)?;
            Ok(Coefficients {
                drift: vec![flat(&drift)],
                gain: covs[..steps].iter().map(|v| flat(&(&bf + innovation(v)))).collect(),
            })
        }
        Feedback::MarkovianTimeVarying => {
            let mut drift = Vec::with_capacity(steps);
            let mut gain = Vec::with_capacity(steps);
            for (k, v) in covs[..steps].iter().enumerate() {
                let b_t = v * d.c.transpose() + &d.m;
                let dk = &d.a - &b_t * &d.c * se;
                if k == 0 || k + 1 == steps {
                    check_em_stability(&dk, dt)?;
                }
                drift.push(flat(&dk));
                gain.push(flat(&(innovation(v) - &b_t)));
            }
            Ok(Coefficients { drift, gain })
        }
    }
}

/// Euler–Maruyama over the grid; returns the state at each sample index.
fn run_path(
    coef: &Coefficients,
    grid: &[f64],
    x0: &[f64],
    m: usize,
    sample_idx: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut dw = vec![0.0; m];
    let mut out = Vec::with_capacity(sample_idx.len());
    let mut cursor = 0;
    if sample_idx.first() == Some(&0) {
        out.push(x.clone());
        cursor = 1;
    }
    for k in 0..grid.len() - 1 {
        let h = grid[k + 1] - grid[k];
        let sq = h.sqrt();
        for w in dw.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *w = z * sq;
        }
        let drift = &coef.drift[if coef.drift.len() == 1 { 0 } else { k }];
        let gain = &coef.gain[k];
        for i in 0..n {
            let mut acc = 0.0;
            for (a, xj) in drift[i * n..(i + 1) * n].iter().zip(&x) {
                acc += a * xj;
            }
            let mut noise = 0.0;
            for (g, wl) in gain[i * m..(i + 1) * m].iter().zip(&dw) {
                noise += g * wl;
            }
            next[i] = x[i] + h * acc + noise;
        }
        std::mem::swap(&mut x, &mut next);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: grid[k + 1] });
        }
        if cursor < sample_idx.len() && sample_idx[cursor] == k + 1 {
            out.push(x.clone());
            cursor += 1;
        }
    }
    Ok(out)
}

fn ensemble_stats(t: f64, states: &[&[f64]], vc: RMat, vunc: RMat) -> EnsembleStats {
    let n_traj = states.len();
    let n = vc.nrows();
    let mut mean = RVec::zeros(n);
    for s in states {
        for i in 0..n {
            mean[i] += s[i];
        }
    }
    mean /= n_traj as f64;
    let mut sigma = RMat::zeros(n, n);
    if n_traj > 1 {
        for s in states {
            for i in 0..n {
                let di = s[i] - mean[i];
                for k in 0..n {
                    sigma[(i, k)] += di * (s[k] - mean[k]);
                }
            }
        }
        sigma /= (n_traj - 1) as f64;
    }
    let sigma = linalg::symmetrize(&sigma);
    let nf = n_traj as f64;
    let mean_se = RVec::from_fn(n, |i, _| (sigma[(i, i)] / nf).sqrt());
    let dof = (n_traj.max(2) - 1) as f64;
    let sigma_se = RMat::from_fn(n, n, |i, k| {
        ((sigma[(i, i)] * sigma[(k, k)] + sigma[(i, k)].powi(2)) / dof).sqrt()
    });
    EnsembleStats {
        t,
        n_traj,
        mean_of_means: mean,
        mean_se,
        sigma,
        sigma_se,
        vc,
        vunc,
    }
}

/// Monte Carlo ensemble of conditional means plus the deterministic
/// conditional and unconditional covariance flows at the same sample times.
pub fn simulate_conditional(spec: &SystemSpec, config: &SimConfig) -> Result<ConditionalRun> {
    let d = spec.derive()?;
    let n = spec.dim();
    let m = spec.modes();
    config.validate(n, m)?;
    let eta = config.eta.unwrap_or(spec.eta());
    let x0 = config.x0.clone().unwrap_or_else(|| RVec::zeros(n));
    let v0 = config.v0.clone().unwrap_or_else(|| linalg::identity(n) * 0.5);

    let grid = ode::uniform_grid(config.t_final, config.dt);
    let steps = grid.len() - 1;
    let vc = riccati::integrate_riccati_on(&d, eta, &v0, &grid, Integrator::default())?;
    let sample_idx = sample_indices(steps, config.samples);
    let sample_times: Vec<f64> = sample_idx.iter().map(|&k| grid[k]).collect();
    let vunc = riccati::integrate_lyapunov_on(&d, &v0, &sample_times, Integrator::default())?;
    let coef = coefficients(&d, eta, &vc.covs, &config.feedback, config.dt)?;

    let x0s = x0.as_slice().to_vec();
    let paths: Vec<Vec<Vec<f64>>> = (0..config.n_traj)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(idx as u64);
            run_path(&coef, &grid, &x0s, m, &sample_idx, &mut rng)
        })
        .collect::<Result<_>>()?;

    let stats = sample_idx
        .iter()
        .enumerate()
        .map(|(s, &k)| {
            let states: Vec<&[f64]> = paths.iter().map(|p| p[s].as_slice()).collect();
            ensemble_stats(grid[k], &states, vc.covs[k].clone(), vunc.covs[s].clone())
        })
        .collect();
    let trajectories = if config.keep_trajectories {
        paths
            .iter()
            .map(|p| Trajectory {
                times: sample_times.clone(),
                means: p.iter().map(|x| RVec::from_column_slice(x)).collect(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ConditionalRun {
        eta,
        feedback: config.feedback.label(),
        sample_times,
        stats,
        trajectories,
    })
}

/// Deterministic ensemble-averaged moments.
#[derive(Debug, Clone)]
pub struct UnconditionalRun {
    pub times: Vec<f64>,
    pub means: Vec<RVec>,
    pub covs: Vec<RMat>,
}

/// Mean `dX̄/dt = AX̄ + Bu` (with the averaged feedback drift when active)
/// and covariance `dV/dt = AV + VAᵀ + N`, on the grid `0, dt, …, T`.
pub fn simulate_unconditional(spec: &SystemSpec, config: &SimConfig) -> Result<UnconditionalRun> {
    let d = spec.derive()?;
    let n = spec.dim();
    config.validate(n, spec.modes())?;
    let eta = config.eta.unwrap_or(spec.eta());
    let x0 = config.x0.clone().unwrap_or_else(|| RVec::zeros(n));
    let v0 = config.v0.clone().unwrap_or_else(|| linalg::identity(n) * 0.5);
    let grid = ode::uniform_grid(config.t_final, config.dt);
    let covs = riccati::integrate_lyapunov_on(&d, &v0, &grid, Integrator::default())?;

    let se = eta.sqrt();
    let means = match &config.feedback {
        Feedback::MarkovianTimeVarying => {
            let f = |v: &RMat, x: &RVec| (&d.a - (v * d.c.transpose() + &d.m) * &d.c * se) * x;
            // The gain changes only through V_t, so integrate mean and V together.
            let y0 = {
                let mut y = RVec::zeros(n + n * n);
                y.rows_mut(0, n).copy_from(&x0);
                y.rows_mut(n, n * n).copy_from_slice(v0.as_slice());
                y
            };
            let s = ode::integrate(
                |_, y| {
                    let x = y.rows(0, n).into_owned();
                    let v = RMat::from_column_slice(n, n, &y.as_slice()[n..]);
                    let mut out = RVec::zeros(n + n * n);
                    out.rows_mut(0, n).copy_from(&f(&v, &x));
                    out.rows_mut(n, n * n)
                        .copy_from_slice(riccati::riccati_rhs(&d, eta, &v).as_slice());
                    out
                },
                |_| {},
                &y0,
                &grid,
                Integrator::default(),
            )?;
            s.states.iter().map(|y| y.rows(0, n).into_owned()).collect()
        }
        fb => {
            let drift = match fb {
                Feedback::Markovian { b, f } => &d.a + b * f * &d.c * se,
                _ => d.a.clone(),
            };
            ode::integrate(|_, x| &drift * x, |_| {}, &x0, &grid, Integrator::default())?.states
        }
    };
    Ok(UnconditionalRun {
        times: grid,
        means,
        covs: covs.covs,
    })
}

/// Closed-loop mean `X̄(t) = exp((A − MC − VCᵀC)t)X̄₀`, evaluated exactly.
pub fn simulate_closed_loop_mean(
    spec: &SystemSpec,
    v_steady: &RMat,
    x0: &RVec,
    times: &[f64],
) -> Result<Trajectory> {
    let d = spec.derive()?;
    let n = spec.dim();
    if v_steady.shape() != (n, n) || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "closed-loop mean needs a {n}x{n} covariance and length-{n} start"
        )));
    }
    let closed = closed_loop_matrix(&d, v_steady);
    let means = times.iter().map(|&t| (&closed * t).exp() * x0).collect();
    Ok(Trajectory {
        times: times.to_vec(),
        means,
    })
}

/// `A − MC − VCᵀC`.
pub fn closed_loop_matrix(d: &DerivedMatrices, v: &RMat) -> RMat {
    d.a_minus_mc() - v * d.c.transpose() * &d.c
}

/// Conditional covariance flow on `0, dt, …, T`.
pub fn covariance_series(spec: &SystemSpec, config: &SimConfig) -> Result<CovarianceSeries> {
    let d = spec.derive()?;
    let n = spec.dim();
    config.validate(n, spec.modes())?;
    let eta = config.eta.unwrap_or(spec.eta());
    let v0 = config.v0.clone().unwrap_or_else(|| linalg::identity(n) * 0.5);
    let grid = ode::uniform_grid(config.t_final, config.dt);
    riccati::integrate_riccati_on(&d, eta, &v0, &grid, Integrator::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMat};

    fn example1() -> SystemSpec {
        let g = RMat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let lam = CMat::from_row_slice(1, 2, &[c(1.0, -1.0), c(0.0, 1.0)]);
        SystemSpec::new(1, g, lam, None, 1.0).unwrap()
    }

    #[test]
    fn no_coupling_is_deterministic_flow() {
        let g = RMat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let spec = SystemSpec::new(1, g, CMat::zeros(1, 2), None, 1.0).unwrap();
        let x0 = RVec::from_vec(vec![1.0, -0.5]);
        let cfg = SimConfig::new(1e-3, 1.0, 3, 1).with_x0(x0.clone());
        let run = simulate_conditional(&spec, &cfg).unwrap();
        let a = spec.derive().unwrap().a;
        let exact = (&a * 1.0).exp() * &x0;
        let s = run.final_stats();
        // Euler on a nilpotent drift is exact up to an O(dt) term.
        assert!((&s.mean_of_means - exact).norm() < 2e-3);
        assert!(s.sigma.norm() == 0.0);
    }

    #[test]
    fn seeds_are_reproducible() {
        let cfg = SimConfig::new(1e-2, 1.0, 64, 42);
        let a = simulate_conditional(&example1(), &cfg).unwrap();
        let b = simulate_conditional(&example1(), &cfg).unwrap();
        assert_eq!(a.final_stats().sigma, b.final_stats().sigma);
        assert_eq!(a.final_stats().mean_of_means, b.final_stats().mean_of_means);
        let c = simulate_conditional(&example1(), &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.final_stats().sigma, c.final_stats().sigma);
    }

    #[test]
    fn single_trajectory_has_zero_sigma() {
        let run = simulate_conditional(&example1(), &SimConfig::new(1e-2, 1.0, 1, 3)).unwrap();
        assert_eq!(run.final_stats().sigma, RMat::zeros(2, 2));
        assert_eq!(run.stats.len(), 11);
        assert_eq!(run.sample_times[0], 0.0);
        assert_eq!(*run.sample_times.last().unwrap(), 1.0);
    }

    #[test]
    fn large_step_is_rejected() {
        let cfg = SimConfig::new(2.5, 10.0, 4, 0);
        assert!(matches!(
            simulate_conditional(&example1(), &cfg),
            Err(Error::StepSizeTooLarge { .. })
        ));
    }

    #[test]
    fn unconditional_matches_lyapunov() {
        let spec = example1();
        let d = spec.derive().unwrap();
        let run = simulate_unconditional(&spec, &SimConfig::new(0.1, 30.0, 1, 0)).unwrap();
        let steady = riccati::solve_lyapunov(&d.a, &d.n).unwrap();
        assert!((run.covs.last().unwrap() - steady).norm() < 1e-6);
    }

    #[test]
    fn unconditional_without_noise_stays_zero() {
        let spec = SystemSpec::new(1, linalg::identity(2), CMat::zeros(1, 2), None, 1.0).unwrap();
        let cfg = SimConfig {
            v0: Some(RMat::zeros(2, 2)),
            ..SimConfig::new(0.1, 5.0, 1, 0)
        };
        let run = simulate_unconditional(&spec, &cfg).unwrap();
        assert!(run.covs.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn conditioning_reduces_covariance() {
        let spec = example1();
        let cfg = SimConfig::new(0.05, 20.0, 1, 0);
        let unc = simulate_unconditional(&spec, &cfg).unwrap();
        let vc = covariance_series(&spec, &cfg).unwrap();
        let gap = unc.covs.last().unwrap() - vc.last();
        assert!(linalg::symmetric_min_eig(&gap) >= -1e-6);
    }

    #[test]
    fn example1_closed_loop_decays() {
        let spec = example1();
        let v = linalg::identity(2) * 0.5;
        let d = spec.derive().unwrap();
        assert!((closed_loop_matrix(&d, &v) + linalg::identity(2)).norm() < 1e-14);
        let x0 = RVec::from_vec(vec![1.0, 2.0]);
        let tr = simulate_closed_loop_mean(&spec, &v, &x0, &[0.0, 1.0, 3.0]).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.means) {
            assert!((x - &x0 * (-t).exp()).norm() < 1e-12);
        }
        let zero = simulate_closed_loop_mean(&spec, &v, &RVec::zeros(2), &[0.0, 5.0]).unwrap();
        assert!(zero.means.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn time_varying_feedback_at_unit_efficiency_is_noiseless() {
        let x0 = RVec::from_vec(vec![1.0, 0.0]);
        let cfg = SimConfig::new(1e-3, 5.0, 8, 9)
            .with_feedback(Feedback::MarkovianTimeVarying)
            .with_x0(x0);
        let run = simulate_conditional(&example1(), &cfg).unwrap();
        let s = run.final_stats();
        assert!(s.sigma.norm() < 1e-20);
        assert!(s.mean_of_means.norm() < 1e-2);
    }

    #[test]
    fn sample_indices_cover_ends() {
        assert_eq!(sample_indices(100, 4), vec![0, 25, 50, 75, 100]);
        assert_eq!(sample_indices(3, 10), vec![0, 1, 2, 3]);
    }
}
