//! The acceptance suite, shared by the integration test target and the
//! `verify` command.
//!
//! Each criterion returns an [`Outcome`] with a pass flag, the measured
//! margins and its wall time. Runtime budgets count towards the verdict.

use std::fmt;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis;
use crate::designer::{self, DesignRequest};
use crate::error::Result;
use crate::linalg::{self, c, CMat, RMat};
use crate::ode::Integrator;
use crate::riccati::{self, RiccatiProblem};
use crate::sampling;
use crate::simulator::{self, ConditionalRun, SimConfig};
use crate::system::{symplectic_form, DerivedMatrices, SystemSpec};

/// Deliberate corruptions used to check that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fixture {
    #[default]
    Clean,
    /// Negates `M` after deriving the system matrices.
    FlippedM,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2}: {} ({:.2}s of {:.0}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs_f64(),
            self.detail
        )
    }
}

fn finish(
    id: u8,
    name: &'static str,
    budget_s: u64,
    start: Instant,
    result: Result<(bool, String)>,
) -> Outcome {
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_s);
    let (ok, mut detail) = match result {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if elapsed > budget {
        detail.push_str("; over time budget");
    }
    Outcome {
        id,
        name,
        passed: ok && elapsed <= budget,
        detail,
        elapsed,
        budget,
    }
}

/// The worked single-mode example with coupling scale `kappa`:
/// `G = [[2κ, 0], [0, 0]]`, `Λ = √κ(1 − i, i)`.
pub fn example1_spec(kappa: f64, eta: f64) -> Result<SystemSpec> {
    let g = RMat::from_row_slice(2, 2, &[2.0 * kappa, 0.0, 0.0, 0.0]);
    let s = kappa.sqrt();
    let lam = CMat::from_row_slice(1, 2, &[c(s, -s), c(0.0, s)]);
    SystemSpec::new(1, g, lam, None, eta)
}

fn derive_with(spec: &SystemSpec, fixture: Fixture) -> Result<DerivedMatrices> {
    let mut d = spec.derive()?;
    if fixture == Fixture::FlippedM {
        d.m = -d.m;
    }
    Ok(d)
}

fn max_dev<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(*v))
}

pub fn criterion_1(fixture: Fixture) -> Outcome {
    let start = Instant::now();
    let r = (|| {
        let d = derive_with(&example1_spec(1.0, 1.0)?, fixture)?;
        let c_err = (&d.c - RMat::from_row_slice(1, 2, &[2.0, 0.0])).norm();
        let amc_err = (d.a_minus_mc() - RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).norm();
        let prob = RiccatiProblem::conditional(&d, 1.0)?;
        let sol = riccati::solve_are(&prob)?;
        let v = sol.real_x()?;
        let v_err = (&v - linalg::identity(2) * 0.5).norm();
        let closed = d.a_minus_mc() - &v * d.c.transpose() * &d.c;
        let eig_err = max_dev(
            &linalg::eigenvalues(&closed)?
                .iter()
                .map(|l| (l + 1.0).norm())
                .collect::<Vec<_>>(),
        );
        let purity_err = (crate::system::purity_of(&v)? - 1.0).abs();
        let ok = c_err <= 1e-12 && amc_err <= 1e-12 && v_err <= 1e-8 && eig_err <= 1e-8 && purity_err <= 1e-10;
        Ok((
            ok,
            format!(
                "|C-(2,0)|={c_err:.1e} |A-MC-diag(1,-1)|={amc_err:.1e} |V-I/2|={v_err:.1e} \
                 max|eig+1|={eig_err:.1e} |purity-1|={purity_err:.1e}"
            ),
        ))
    })();
    finish(1, "worked example golden values", 1, start, r)
}

pub fn criterion_2() -> Outcome {
    let start = Instant::now();
    let r = (|| {
        let spec = example1_spec(1.0, 1.0)?;
        let f = analysis::unconditional_feasibility(spec.g())?;
        let w = f.dual_witness.clone();
        let witness_ok = w.as_ref().is_some_and(|w| {
            linalg::symmetric_min_eig(w) >= -1e-12 && w.norm() > 0.5 && f.dual_residual <= 1e-10
        });
        Ok((
            !f.pd_feasible && witness_ok,
            format!(
                "null space dim {}, best min-eig {:.1e}, dual residual {:.1e}",
                f.basis.len(),
                f.best_min_eig,
                f.dual_residual
            ),
        ))
    })();
    finish(2, "unconditional pure state infeasible for the example", 1, start, r)
}

pub fn criterion_3() -> Outcome {
    let start = Instant::now();
    let r = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
        let (mut worst_res, mut worst_herm, mut worst_re, mut worst_psd, mut worst_nk) =
            (0.0f64, 0.0f64, f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
        let mut failures = Vec::new();
        for draw in 0..500 {
            let n = 1 + draw % 6;
            let prob = sampling::random_riccati_problem(&mut rng, n)?;
            let sol = match riccati::solve_are(&prob) {
                Ok(s) => s,
                Err(e) => {
                    failures.push(format!("draw {draw}: {e}"));
                    continue;
                }
            };
            worst_res = worst_res.max(prob.relative_residual(&sol.x));
            worst_herm = worst_herm.max(sol.raw_asymmetry);
            worst_re = worst_re.max(linalg::max_real_part(&sol.closed_loop_spectrum));
            worst_psd = worst_psd.min(linalg::hermitian_eigenvalues(&sol.x)[0]);
            if n <= 3 {
                let x0 = riccati::stabilizing_start(&prob).ok_or_else(|| {
                    crate::error::Error::InvalidConfig(format!("draw {draw}: no stabilizing start"))
                })?;
                let (xnk, _) = riccati::newton_kleinman(&prob, &x0, 1e-13, 200)?;
                worst_nk = worst_nk.max((&xnk - &sol.x).norm() / sol.x.norm().max(1.0));
            }
        }
        let ok = failures.is_empty()
            && worst_res <= 1e-8
            && worst_herm <= 1e-10
            && worst_re < 0.0
            && worst_psd >= -1e-8
            && worst_nk <= 1e-7;
        let mut detail = format!(
            "500 draws: max rel residual {worst_res:.1e}, max asymmetry {worst_herm:.1e}, \
             max Re(closed loop) {worst_re:.2e}, min eig X {worst_psd:.1e}, max |X-X_nk| {worst_nk:.1e}"
        );
        if !failures.is_empty() {
            detail.push_str(&format!("; {} solver failures, first: {}", failures.len(), failures[0]));
        }
        Ok((ok, detail))
    })();
    finish(3, "random Riccati property suite", 30, start, r)
}

pub fn criterion_4() -> Outcome {
    let start = Instant::now();
    let r = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);
        let (mut worst_heis, mut worst_pure) = (f64::INFINITY, 0.0f64);
        for m in 1..=3 {
            let j = symplectic_form(m);
            for _ in 0..100 {
                let spec = sampling::random_detectable_spec(&mut rng, m, 1.0)?;
                let rep = analysis::steady_state_verdict(&spec)?;
                let v = &rep.covariance;
                worst_heis = worst_heis.min(rep.heisenberg.margin);
                let res = (&j * v * &j * v + linalg::identity(2 * m) * 0.25).norm()
                    / v.norm().powi(2).max(1.0);
                worst_pure = worst_pure.max(res);
            }
        }
        Ok((
            worst_heis >= -1e-8 && worst_pure <= 1e-6,
            format!(
                "300 specs: min eig(V + iJ/2) {worst_heis:.1e}, max scaled |JVJV + I/4| {worst_pure:.1e}"
            ),
        ))
    })();
    finish(4, "steady states of detectable systems are pure", 60, start, r)
}

pub fn criterion_5() -> Outcome {
    let start = Instant::now();
    let r = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
        let (mut worst_err, mut worst_sub, mut min_margin) = (0.0f64, 0.0f64, f64::INFINITY);
        for m in 1..=3 {
            for _ in 0..100 {
                let v_s = sampling::random_pure_covariance(&mut rng, m);
                let im = sampling::random_matrix(&mut rng, m, 2 * m);
                let res = designer::synthesize(&DesignRequest::new(v_s).with_im(im))?;
                worst_err = worst_err.max(res.relative_error);
                worst_sub = worst_sub.max(res.substitution_residual);
                min_margin = min_margin.min(res.rank_margin);
            }
        }
        Ok((
            worst_err <= 1e-6 && worst_sub <= 1e-9,
            format!(
                "300 targets: max relative error {worst_err:.1e}, max substitution residual \
                 {worst_sub:.1e}, min rank margin {min_margin:.2e}"
            ),
        ))
    })();
    finish(5, "design round trip recovers the target", 60, start, r)
}

/// Seed of the Monte Carlo criterion.
pub const MC_SEED: u64 = 20_240_611;

pub fn monte_carlo_config(seed: u64) -> SimConfig {
    SimConfig::new(1e-3, 10.0, 10_000, seed)
}

pub fn monte_carlo_run(seed: u64) -> Result<ConditionalRun> {
    simulator::simulate_conditional(&example1_spec(1.0, 1.0)?, &monte_carlo_config(seed))
}

/// Runs criterion 6 and hands back its ensemble for criterion 10.
pub fn criterion_6_run() -> (Outcome, Option<ConditionalRun>) {
    let start = Instant::now();
    let mut kept = None;
    let r = monte_carlo_run(MC_SEED).map(|run| {
        let s = run.final_stats();
        let res = s.identity_residual();
        let worst_t = run
            .stats
            .iter()
            .skip(1)
            .map(|s| s.identity_residual())
            .fold(0.0, f64::max);
        let detail = format!(
            "n_traj {}, |Vc+Sigma-Vunc|/|Vunc| at T = {res:.2e} (worst over sample times {worst_t:.2e})",
            s.n_traj
        );
        kept = Some(run);
        (res <= 0.05, detail)
    });
    (finish(6, "Monte Carlo covariance decomposition", 120, start, r), kept)
}

pub fn criterion_6() -> Outcome {
    criterion_6_run().0
}

pub fn criterion_7() -> Outcome {
    let start = Instant::now();
    let r = (|| {
        let mut ok = true;
        let mut parts = Vec::new();
        for eta in [0.25, 0.5, 0.75, 1.0] {
            let rep = analysis::steady_state_verdict(&example1_spec(1.0, eta)?)?;
            let p = rep.purity();
            let gap = rep
                .unconditional
                .as_ref()
                .map_or(f64::NEG_INFINITY, |u| u.min_eig_gap);
            let pure_ok = if eta == 1.0 { (p - 1.0).abs() <= 1e-6 } else { true };
            let this = rep.closed_loop_stable
                && rep.heisenberg.verdict
                && pure_ok
                && p <= 1.0 + 1e-8
                && gap >= -1e-8;
            ok &= this;
            parts.push(format!("eta={eta}: purity {p:.6}, min eig(Vunc-V) {gap:.3e}"));
        }
        Ok((ok, parts.join("; ")))
    })();
    finish(7, "efficiency sweep", 10, start, r)
}

pub fn criterion_8() -> Outcome {
    let start = Instant::now();
    let r = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD00D);
        let (mut agree, mut both_false) = (0, 0);
        let mut first_bad = None;
        for draw in 0..200 {
            let m = 1 + draw % 3;
            let spec = sampling::random_mixed_spec(&mut rng, m)?;
            let chk = analysis::axis_mode_equivalence_check(&spec.derive()?);
            if chk.agrees() {
                agree += 1;
                if !chk.lhs {
                    both_false += 1;
                }
            } else if first_bad.is_none() {
                first_bad = Some(format!("draw {draw}: {chk:?}"));
            }
        }
        let mut detail = format!("{agree}/200 agree ({both_false} with axis modes)");
        if let Some(b) = first_bad {
            detail.push_str(&format!("; first disagreement {b}"));
        }
        Ok((agree == 200, detail))
    })();
    finish(8, "imaginary-axis equivalence", 20, start, r)
}

pub fn criterion_9() -> Outcome {
    let start = Instant::now();
    let r = (|| {
        let kappa = 1.0;
        let spec = example1_spec(kappa, 1.0)?;
        let d = spec.derive()?;
        let target = linalg::identity(2) * 0.5;
        let t_final = 20.0 / kappa;
        let starts = [
            linalg::identity(2) * 5.0,
            target.clone(),
            RMat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.3]),
        ];
        let mut worst_conv: f64 = 0.0;
        let mut drift_rate: f64 = 0.0;
        for (i, v0) in starts.iter().enumerate() {
            let series =
                riccati::integrate_riccati_ode(&d, 1.0, v0, t_final, 0.1, Integrator::default())?;
            worst_conv = worst_conv.max((series.last() - &target).norm());
            if i == 1 {
                for (t, v) in series.times.iter().zip(&series.covs).skip(1) {
                    drift_rate = drift_rate.max((v - v0).norm() / t);
                }
            }
        }
        Ok((
            worst_conv <= 1e-6 && drift_rate <= 1e-9,
            format!("max |V(T)-I/2| {worst_conv:.1e}, stationary drift {drift_rate:.1e} per unit time"),
        ))
    })();
    finish(9, "covariance flow converges to the steady state", 5, start, r)
}

/// `baseline` reuses an ensemble already produced with [`MC_SEED`].
pub fn criterion_10(baseline: Option<&ConditionalRun>) -> Outcome {
    let start = Instant::now();
    let r = (|| {
        let owned;
        let a = match baseline {
            Some(run) => run,
            None => {
                owned = monte_carlo_run(MC_SEED)?;
                &owned
            }
        };
        let b = monte_carlo_run(MC_SEED)?;
        let other = monte_carlo_run(MC_SEED + 1)?;
        let identical = a.stats.len() == b.stats.len()
            && a.stats.iter().zip(&b.stats).all(|(x, y)| {
                x.mean_of_means == y.mean_of_means && x.sigma == y.sigma && x.vc == y.vc
            });
        let z = a.final_stats().max_z_score(other.final_stats());
        Ok((
            identical && z <= 3.0,
            format!("same seed bit-identical: {identical}; other seed max z-score {z:.2}"),
        ))
    })();
    // Budget covers the two fresh ensembles.
    finish(10, "seeded determinism", 240, start, r)
}

/// Runs every criterion in order.
pub fn run_all(fixture: Fixture) -> Vec<Outcome> {
    let mut out = vec![criterion_1(fixture), criterion_2(), criterion_3(), criterion_4(), criterion_5()];
    let (c6, run) = criterion_6_run();
    out.push(c6);
    out.push(criterion_7());
    out.push(criterion_8());
    out.push(criterion_9());
    out.push(criterion_10(run.as_ref()));
    out
}
