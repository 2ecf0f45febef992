//! Complex algebraic Riccati equations `F†X + XF + XPX + K = 0`.
//!
//! The stabilizing solution is read off the stable invariant subspace of
//! the Hamiltonian `H = [[F, P], [−K, −F†]]`: an ordered complex Schur
//! factorization moves the `n` left-half-plane eigenvalues to the leading
//! block, whose Schur vectors `[X1; X2]` give `X = X2 X1⁻¹`.
//!
//! Also here: the dense Lyapunov solver used for unconditional steady
//! states, a Newton–Kleinman iteration kept as an independent oracle, and
//! the time-domain Riccati flow of the conditional covariance.

use num_complex::Complex64;

use crate::analysis::{self, Certificate};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, RMat, RVec, ToComplex};
use crate::ode::{self, Integrator};
use crate::system::DerivedMatrices;

/// Relative Hermiticity tolerance for `P` and `K`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Semidefiniteness tolerance for classifying `P`.
pub const SEMIDEFINITE_TOL: f64 = 1e-10;
/// `|Re λ| ≤ AXIS_TOL·‖H‖` counts as an imaginary-axis eigenvalue.
pub const AXIS_TOL: f64 = 1e-8;
/// `cond(X1)` above this fails complementarity.
pub const COND_MAX: f64 = 1e10;
/// Closed-loop eigenvalues must satisfy `Re λ < −STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-10;
/// Residual bound, relative to `max(1, ‖F‖² + ‖K‖)`.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    PositiveSemidefinite,
    NegativeSemidefinite,
}

/// `F†X + XF + XPX + K = 0` with Hermitian, sign-semidefinite `P` and
/// Hermitian `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiProblem {
    f: CMat,
    p: CMat,
    k: CMat,
    p_sign: Definiteness,
}

impl RiccatiProblem {
    pub fn new<A: ToComplex, B: ToComplex, C: ToComplex>(f: &A, p: &B, k: &C) -> Result<Self> {
        let (f, p, k) = (f.to_complex(), p.to_complex(), k.to_complex());
        let n = f.nrows();
        if f.ncols() != n || p.shape() != (n, n) || k.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "Riccati blocks must all be {n}x{n}: F {:?}, P {:?}, K {:?}",
                f.shape(),
                p.shape(),
                k.shape()
            )));
        }
        for (what, mat) in [("P", &p), ("K", &k)] {
            let asym = linalg::non_hermiticity(mat);
            if asym > HERMITIAN_TOL {
                return Err(Error::NotHermitian {
                    what,
                    asymmetry: asym,
                });
            }
        }
        let p = linalg::hermitian_part(&p);
        let k = linalg::hermitian_part(&k);
        let eig = linalg::hermitian_eigenvalues(&p);
        let (lo, hi) = match (eig.first(), eig.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => (0.0, 0.0),
        };
        let tol = SEMIDEFINITE_TOL * p.norm().max(1.0);
        let p_sign = if lo >= -tol {
            Definiteness::PositiveSemidefinite
        } else if hi <= tol {
            Definiteness::NegativeSemidefinite
        } else {
            return Err(Error::IndefiniteP {
                min_eig: lo,
                max_eig: hi,
            });
        };
        Ok(Self { f, p, k, p_sign })
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn f(&self) -> &CMat {
        &self.f
    }

    pub fn p(&self) -> &CMat {
        &self.p
    }

    pub fn k(&self) -> &CMat {
        &self.k
    }

    pub fn p_sign(&self) -> Definiteness {
        self.p_sign
    }

    /// `‖F†X + XF + XPX + K‖_F`.
    pub fn residual(&self, x: &CMat) -> f64 {
        self.residual_matrix(x).norm()
    }

    pub fn residual_matrix(&self, x: &CMat) -> CMat {
        self.f.adjoint() * x + x * &self.f + x * &self.p * x + &self.k
    }

    /// Size of the individual terms at `x`, `‖K‖ + 2‖F‖‖X‖ + ‖P‖‖X‖²`,
    /// floored at 1; residuals are judged relative to it.
    pub fn residual_scale(&self, x: &CMat) -> f64 {
        let xn = x.norm();
        (self.k.norm() + 2.0 * self.f.norm() * xn + self.p.norm() * xn * xn).max(1.0)
    }

    /// `residual(x) / residual_scale(x)`.
    pub fn relative_residual(&self, x: &CMat) -> f64 {
        self.residual(x) / self.residual_scale(x)
    }

    /// Conditional-covariance problem for efficiency `eta`:
    /// `(A − ηMC)V + V(A − ηMC)ᵀ − ηVCᵀCV + N − ηMMᵀ = 0`.
    /// At `eta = 1` the constant term is `¼JCᵀCJᵀ`.
    pub fn conditional(d: &DerivedMatrices, eta: f64) -> Result<Self> {
        let f = d.a_minus_eta_mc(eta).transpose();
        let p = -(d.c.transpose() * &d.c) * eta;
        let k = if eta == 1.0 {
            d.quarter_jctcjt()
        } else {
            linalg::symmetrize(&(&d.n - &d.m * d.m.transpose() * eta))
        };
        Self::new(&f, &p, &k)
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub x: CMat,
    /// Eigenvalues of `F + PX`.
    pub closed_loop_spectrum: Vec<Complex64>,
    pub residual: f64,
    pub hamiltonian_spectrum: Vec<Complex64>,
    /// `cond(X1)`.
    pub subspace_condition: f64,
    /// Set when `cond(X1) ≥ COND_MAX` and the solve ran in lenient mode.
    pub ill_conditioned: bool,
    /// Relative non-Hermiticity of `X2 X1⁻¹` before it was symmetrized.
    pub raw_asymmetry: f64,
}

impl RiccatiSolution {
    /// Real part of `X`, provided its imaginary residue is negligible.
    pub fn real_x(&self) -> Result<RMat> {
        let x = linalg::checked_real(&self.x, 1e-9, "Riccati solution")?;
        Ok(linalg::symmetrize(&x))
    }

    pub fn closed_loop_stable(&self) -> bool {
        linalg::is_hurwitz(&self.closed_loop_spectrum, STABILITY_MARGIN)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Reject ill-conditioned stable subspaces instead of flagging them.
    pub strict: bool,
}

pub fn build_hamiltonian(prob: &RiccatiProblem) -> CMat {
    let n = prob.dim();
    let mut h = CMat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&prob.f);
    h.view_mut((0, n), (n, n)).copy_from(&prob.p);
    h.view_mut((n, 0), (n, n)).copy_from(&(-&prob.k));
    h.view_mut((n, n), (n, n)).copy_from(&(-prob.f.adjoint()));
    h
}

/// Symplectic form of the Hamiltonian's block structure (size `2n`).
pub fn hamiltonian_j(n: usize) -> CMat {
    crate::system::symplectic_form(n).to_complex()
}

/// Membership of `H` in `dom(Ric)`.
#[derive(Debug, Clone)]
pub struct DomRicReport {
    pub imaginary_axis_free: bool,
    pub complementary: bool,
    pub detectable_p_fdag: bool,
    /// `min |Re λ(H)|`.
    pub axis_margin: f64,
    pub subspace_condition: f64,
    pub detectability: Certificate,
}

impl DomRicReport {
    pub fn in_domain(&self) -> bool {
        self.imaginary_axis_free && self.complementary && self.detectable_p_fdag
    }
}

struct StableSubspace {
    x1: CMat,
    x2: CMat,
    spectrum: Vec<Complex64>,
    axis_margin: f64,
    stable_count: usize,
}

fn stable_subspace(prob: &RiccatiProblem) -> Result<StableSubspace> {
    let n = prob.dim();
    let h = build_hamiltonian(prob);
    let (mut q, mut t) = linalg::schur(&h)?;
    let spectrum: Vec<Complex64> = (0..2 * n).map(|i| t[(i, i)]).collect();
    let axis_margin = spectrum
        .iter()
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min);
    let stable_count = linalg::reorder_schur(&mut q, &mut t, |z| z.re < 0.0);
    let basis = q.columns(0, n).into_owned();
    Ok(StableSubspace {
        x1: basis.rows(0, n).into_owned(),
        x2: basis.rows(n, n).into_owned(),
        spectrum,
        axis_margin,
        stable_count,
    })
}

pub fn dom_ric_check(prob: &RiccatiProblem) -> Result<DomRicReport> {
    let n = prob.dim();
    let h_norm = build_hamiltonian(prob).norm();
    let sub = stable_subspace(prob)?;
    let imaginary_axis_free = sub.axis_margin > AXIS_TOL * h_norm && sub.stable_count == n;
    let subspace_condition = linalg::condition_number(&sub.x1);
    let complementary = imaginary_axis_free && subspace_condition < COND_MAX;
    let detectability = analysis::is_detectable(&prob.p, &prob.f.adjoint());
    Ok(DomRicReport {
        imaginary_axis_free,
        complementary,
        detectable_p_fdag: detectability.verdict,
        axis_margin: sub.axis_margin,
        subspace_condition,
        detectability,
    })
}

/// Stabilizing solution of the Riccati equation.
pub fn solve_are(prob: &RiccatiProblem) -> Result<RiccatiSolution> {
    solve_are_with(prob, SolveOptions::default())
}

pub fn solve_are_with(prob: &RiccatiProblem, opts: SolveOptions) -> Result<RiccatiSolution> {
    let n = prob.dim();
    let h_norm = build_hamiltonian(prob).norm();
    let sub = stable_subspace(prob)?;
    let imaginary_axis_free = sub.axis_margin > AXIS_TOL * h_norm && sub.stable_count == n;
    let cond = linalg::condition_number(&sub.x1);
    let detectable = analysis::is_detectable(&prob.p, &prob.f.adjoint()).verdict;
    let invertible = cond.is_finite() && cond < 1.0 / f64::EPSILON;
    if !imaginary_axis_free || !detectable || !invertible {
        return Err(Error::NotInDomRic {
            imaginary_axis_free,
            complementary: imaginary_axis_free && cond < COND_MAX,
            detectable,
        });
    }
    let ill_conditioned = cond >= COND_MAX;
    if ill_conditioned && opts.strict {
        return Err(Error::IllConditionedSubspace { cond });
    }

    // X X1 = X2  ⇔  X1ᵀ Xᵀ = X2ᵀ
    let lu = sub.x1.transpose().lu();
    let xt = lu
        .solve(&sub.x2.transpose())
        .ok_or(Error::NotInDomRic {
            imaginary_axis_free,
            complementary: false,
            detectable,
        })?;
    let raw = xt.transpose();
    let raw_asymmetry = linalg::non_hermiticity(&raw);
    let x = linalg::hermitian_part(&raw);

    let closed = &prob.f + &prob.p * &x;
    let closed_loop_spectrum = linalg::eigenvalues(&closed)?;
    let residual = prob.residual(&x);
    Ok(RiccatiSolution {
        x,
        closed_loop_spectrum,
        residual,
        hamiltonian_spectrum: sub.spectrum,
        subspace_condition: cond,
        ill_conditioned,
        raw_asymmetry,
    })
}

/// Solves `A V + V Aᵀ + Q = 0` for Hurwitz `A`.
pub fn solve_lyapunov(a: &RMat, q: &RMat) -> Result<RMat> {
    let eigs = linalg::eigenvalues(a)?;
    let max_re = linalg::max_real_part(&eigs);
    if max_re >= -1e-12 {
        return Err(Error::UnstableDrift { max_re });
    }
    let x = linalg::lyapunov_complex(&a.to_complex(), &q.to_complex())?;
    Ok(linalg::symmetrize(&linalg::real_part(&x)))
}

/// Newton–Kleinman iteration for `F†X + XF + XPX + K = 0` with `P ⪯ 0`.
///
/// Each step solves the Lyapunov equation
/// `(F + PXₖ)†Xₖ₊₁ + Xₖ₊₁(F + PXₖ) − XₖPXₖ + K = 0`. Needs a stabilizing
/// start `X₀` (`F + PX₀` Hurwitz).
pub fn newton_kleinman(
    prob: &RiccatiProblem,
    x0: &CMat,
    tol: f64,
    max_iter: usize,
) -> Result<(CMat, usize)> {
    if prob.p_sign != Definiteness::NegativeSemidefinite {
        return Err(Error::InvalidConfig(
            "Newton–Kleinman iteration needs a negative semidefinite P".into(),
        ));
    }
    let mut x = x0.clone();
    for it in 1..=max_iter {
        let closed = &prob.f + &prob.p * &x;
        let eigs = linalg::eigenvalues(&closed)?;
        let max_re = linalg::max_real_part(&eigs);
        if max_re >= 0.0 {
            return Err(Error::UnstableDrift { max_re });
        }
        let q = &prob.k - &x * &prob.p * &x;
        // closed† X + X closed + q = 0, i.e. lyapunov with a = closed†
        let next = linalg::hermitian_part(&linalg::lyapunov_complex(&closed.adjoint(), &q)?);
        let step = (&next - &x).norm();
        x = next;
        if step <= tol * x.norm().max(1.0) {
            return Ok((x, it));
        }
    }
    Ok((x, max_iter))
}

/// Stabilizing start for [`newton_kleinman`] by Bass's construction.
///
/// With `P = −OO†` and `β` large enough that `−(F + βI)` is Hurwitz, the
/// Gramian-like `Z` solving `(F + βI)Z + Z(F + βI)† = −2P` is positive
/// semidefinite with range equal to the controllable subspace. `X₀ = Z⁺`
/// moves every controllable eigenvalue of `F + PX₀` to real part `≤ −β`;
/// uncontrollable modes stay put, so the start exists exactly when they are
/// already stable.
pub fn stabilizing_start(prob: &RiccatiProblem) -> Option<CMat> {
    let n = prob.dim();
    let eigs = linalg::eigenvalues(&prob.f).ok()?;
    if linalg::max_real_part(&eigs) < -STABILITY_MARGIN {
        return Some(CMat::zeros(n, n));
    }
    let min_re = eigs.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
    let beta = (-min_re).max(0.0) + 1.0;
    let shifted = -(&prob.f + CMat::identity(n, n) * c(beta, 0.0));
    let z = linalg::hermitian_part(&linalg::lyapunov_complex(&shifted, &(&prob.p * c(-2.0, 0.0))).ok()?);
    let x0 = linalg::hermitian_part(&z.clone().pseudo_inverse(1e-10 * z.norm()).ok()?);
    let closed = &prob.f + &prob.p * &x0;
    let stable = linalg::max_real_part(&linalg::eigenvalues(&closed).ok()?) < -STABILITY_MARGIN;
    stable.then_some(x0)
}

/// Sampled covariance flow.
#[derive(Debug, Clone)]
pub struct CovarianceSeries {
    pub times: Vec<f64>,
    pub covs: Vec<RMat>,
}

impl CovarianceSeries {
    pub fn last(&self) -> &RMat {
        self.covs.last().expect("series holds at least the initial value")
    }
}

fn to_vec(m: &RMat) -> RVec {
    RVec::from_column_slice(m.as_slice())
}

fn to_mat(v: &RVec, n: usize) -> RMat {
    RMat::from_column_slice(n, n, v.as_slice())
}

/// Right-hand side of the conditional covariance flow:
/// `AV + VAᵀ + N − η(VCᵀ + M)(VCᵀ + M)ᵀ`.
pub fn riccati_rhs(d: &DerivedMatrices, eta: f64, v: &RMat) -> RMat {
    let g = v * d.c.transpose() + &d.m;
    &d.a * v + v * d.a.transpose() + &d.n - &g * g.transpose() * eta
}

/// Integrates the conditional covariance flow on the grid `0, dt, …, t_final`.
pub fn integrate_riccati_ode(
    d: &DerivedMatrices,
    eta: f64,
    v0: &RMat,
    t_final: f64,
    dt: f64,
    method: Integrator,
) -> Result<CovarianceSeries> {
    if !(dt > 0.0) || t_final < dt {
        return Err(Error::InvalidConfig(format!(
            "need dt > 0 and T >= dt, got dt = {dt}, T = {t_final}"
        )));
    }
    let grid = ode::uniform_grid(t_final, dt);
    integrate_riccati_on(d, eta, v0, &grid, method)
}

/// As [`integrate_riccati_ode`] but on an arbitrary increasing grid.
pub fn integrate_riccati_on(
    d: &DerivedMatrices,
    eta: f64,
    v0: &RMat,
    grid: &[f64],
    method: Integrator,
) -> Result<CovarianceSeries> {
    let n = d.a.nrows();
    if v0.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "initial covariance must be {n}x{n}"
        )));
    }
    let asym = linalg::asymmetry(v0);
    if asym > crate::system::COV_SYMMETRY_TOL {
        return Err(Error::NonSymmetric {
            what: "initial covariance",
            asymmetry: asym,
        });
    }
    let y0 = to_vec(&linalg::symmetrize(v0));
    let samples = ode::integrate(
        |_, y| to_vec(&riccati_rhs(d, eta, &to_mat(y, n))),
        |y| *y = to_vec(&linalg::symmetrize(&to_mat(y, n))),
        &y0,
        grid,
        method,
    )?;
    Ok(CovarianceSeries {
        times: samples.times,
        covs: samples.states.iter().map(|y| to_mat(y, n)).collect(),
    })
}

/// Integrates the unconditional covariance flow `AV + VAᵀ + N`.
pub fn integrate_lyapunov_on(
    d: &DerivedMatrices,
    v0: &RMat,
    grid: &[f64],
    method: Integrator,
) -> Result<CovarianceSeries> {
    let n = d.a.nrows();
    let y0 = to_vec(&linalg::symmetrize(v0));
    let samples = ode::integrate(
        |_, y| {
            let v = to_mat(y, n);
            to_vec(&(&d.a * &v + &v * d.a.transpose() + &d.n))
        },
        |y| *y = to_vec(&linalg::symmetrize(&to_mat(y, n))),
        &y0,
        grid,
        method,
    )?;
    Ok(CovarianceSeries {
        times: samples.times,
        covs: samples.states.iter().map(|y| to_mat(y, n)).collect(),
    })
}
