//! Certificates: detectability (PBH), imaginary-axis modes, uncertainty
//! principle, purity, the unconditional pure-state equations, and the
//! steady-state verdict that ties them to the Riccati solve.
//!
//! Every certificate carries a numerical margin, and a violating
//! eigenpair when it fails, so callers can see how close a verdict was.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, RMat, ToComplex};
use crate::riccati::{self, RiccatiProblem, RiccatiSolution, SolveOptions};
use crate::system::{self, DerivedMatrices, SystemSpec, HEISENBERG_TOL};

/// `|Re λ| ≤ AXIS_TOL·max(1, ‖A‖)` counts as on the imaginary axis.
pub const AXIS_TOL: f64 = 1e-8;
/// PBH rank tolerance, relative to `max(1, ‖[A; C]‖)`.
pub const RANK_TOL: f64 = 1e-8;
/// `‖JVJV + I/4‖ ≤ PURE_TOL·max(1, ‖V‖²)`.
pub const PURE_TOL: f64 = 1e-8;

/// A violating eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub eigenvalue: Complex64,
    pub vector: CVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub verdict: bool,
    pub witness: Option<Witness>,
    /// Smallest test quantity seen; `+∞` when nothing needed testing.
    pub margin: f64,
}

impl Certificate {
    fn pass(margin: f64) -> Self {
        Self {
            verdict: true,
            witness: None,
            margin,
        }
    }
}

struct PbhScan {
    margin: f64,
    worst: Option<(f64, Witness)>,
}

/// Runs the PBH rank test at every eigenvalue of `a` admitted by `filter`.
fn pbh_scan(c: &CMat, a: &CMat, filter: impl Fn(Complex64, f64) -> bool) -> PbhScan {
    let n = a.nrows();
    let p = c.nrows();
    let eigs = linalg::eigenvalues(a).unwrap_or_default();
    let tol_axis = AXIS_TOL * a.norm().max(1.0);
    let mut pencil = CMat::zeros(n + p, n);
    pencil.view_mut((n, 0), (p, n)).copy_from(c);
    let tol_rank = RANK_TOL * pencil.norm().max(a.norm()).max(1.0);
    let mut margin = f64::INFINITY;
    let mut worst: Option<(f64, Witness)> = None;
    for lam in eigs {
        if !filter(lam, tol_axis) {
            continue;
        }
        let mut top = a.clone();
        for i in 0..n {
            top[(i, i)] -= lam;
        }
        pencil.view_mut((0, 0), (n, n)).copy_from(&top);
        let (sigma, v) = linalg::min_singular_pair(&pencil);
        margin = margin.min(sigma);
        if sigma <= tol_rank && worst.as_ref().is_none_or(|(s, _)| sigma < *s) {
            worst = Some((
                sigma,
                Witness {
                    eigenvalue: lam,
                    vector: v,
                },
            ));
        }
    }
    PbhScan { margin, worst }
}

/// Detectability of `[C, A]`: every eigenvalue with `Re λ ≥ −tol` must
/// keep `[A − λI; C]` at full column rank.
pub fn is_detectable<C: ToComplex, A: ToComplex>(c: &C, a: &A) -> Certificate {
    let (c, a) = (c.to_complex(), a.to_complex());
    let scan = pbh_scan(&c, &a, |lam, tol| lam.re >= -tol);
    match scan.worst {
        Some((_, w)) => Certificate {
            verdict: false,
            witness: Some(w),
            margin: scan.margin,
        },
        None => Certificate::pass(scan.margin),
    }
}

/// `verdict = true` iff some eigenvalue on the imaginary axis is
/// unobservable through `C`.
pub fn has_imaginary_unobservable_modes<C: ToComplex, A: ToComplex>(c: &C, a: &A) -> Certificate {
    let (c, a) = (c.to_complex(), a.to_complex());
    let scan = pbh_scan(&c, &a, |lam, tol| lam.re.abs() <= tol);
    match scan.worst {
        Some((_, w)) => Certificate {
            verdict: true,
            witness: Some(w),
            margin: scan.margin,
        },
        None => Certificate {
            verdict: false,
            witness: None,
            margin: scan.margin,
        },
    }
}

/// Output injection `L` with `A + LC` Hurwitz, found from the dual
/// Riccati equation `AV + VAᵀ − VCᵀCV + I = 0` as `L = −VCᵀ`.
pub fn stabilizing_injection(c: &RMat, a: &RMat) -> Option<RMat> {
    let n = a.nrows();
    let prob = RiccatiProblem::new(&a.transpose(), &-(c.transpose() * c), &linalg::identity(n)).ok()?;
    let sol = riccati::solve_are(&prob).ok()?;
    let v = sol.real_x().ok()?;
    let l = -(v * c.transpose());
    let eigs = linalg::eigenvalues(&(a + &l * c)).ok()?;
    linalg::is_hurwitz(&eigs, 0.0).then_some(l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisModeCheck {
    /// `[CJᵀ, (A − MC)ᵀ]` has no unobservable imaginary-axis modes.
    pub lhs: bool,
    /// `A − MC − (i/2)JCᵀC` has no imaginary-axis eigenvalues.
    pub rhs: bool,
    /// `min |Re λ(A − MC − (i/2)JCᵀC)|`.
    pub axis_margin: f64,
}

impl AxisModeCheck {
    pub fn agrees(&self) -> bool {
        self.lhs == self.rhs
    }
}

pub fn axis_mode_equivalence_check(d: &DerivedMatrices) -> AxisModeCheck {
    let amc = d.a_minus_mc();
    let cjt = &d.c * d.j.transpose();
    let lhs = !has_imaginary_unobservable_modes(&cjt, &amc.transpose()).verdict;
    let shifted = amc.to_complex()
        - (&d.j * d.c.transpose() * &d.c).to_complex() * Complex64::new(0.0, 0.5);
    let eigs = linalg::eigenvalues(&shifted).unwrap_or_default();
    let axis_margin = eigs.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let rhs = axis_margin > AXIS_TOL * amc.norm().max(1.0);
    AxisModeCheck {
        lhs,
        rhs,
        axis_margin,
    }
}

/// `V + (i/2)J ⪰ 0`; for real symmetric `V` this also covers the minus sign.
pub fn heisenberg_certificate(v: &RMat, j: &RMat) -> Certificate {
    let h = v.to_complex() + j.to_complex() * Complex64::new(0.0, 0.5);
    let (min_eig, vec) = linalg::hermitian_min_eig(&h);
    if min_eig >= -HEISENBERG_TOL {
        Certificate::pass(min_eig)
    } else {
        Certificate {
            verdict: false,
            witness: Some(Witness {
                eigenvalue: Complex64::new(min_eig, 0.0),
                vector: vec,
            }),
            margin: min_eig,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityReport {
    pub verdict: bool,
    /// `‖JVJV + I/4‖_F`.
    pub residual: f64,
    /// `1 / (2^m √det V)`.
    pub purity: f64,
}

pub fn is_pure(v: &RMat, j: &RMat) -> Result<PurityReport> {
    let n = v.nrows();
    let purity = system::purity_of(v)?;
    let residual = (j * v * j * v + linalg::identity(n) * 0.25).norm();
    let verdict = residual <= PURE_TOL * v.norm().powi(2).max(1.0);
    Ok(PurityReport {
        verdict,
        residual,
        purity,
    })
}

/// Residuals of the unconditional pure-steady-state equations
/// `(V + (i/2)J)Λᵀ = 0` and `JGV + VGJᵀ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnconditionalPureResiduals {
    pub coupling: f64,
    pub hamiltonian: f64,
}

pub fn unconditional_pure_conditions(v: &RMat, d: &DerivedMatrices, g: &RMat) -> UnconditionalPureResiduals {
    let lam = CMat::from_fn(d.r.nrows(), d.r.ncols(), |i, k| {
        Complex64::new(d.r[(i, k)], d.im[(i, k)])
    });
    let shifted = v.to_complex() + d.j.to_complex() * Complex64::new(0.0, 0.5);
    let coupling = (shifted * lam.transpose()).norm();
    let hamiltonian = (&d.j * g * v + v * g * d.j.transpose()).norm();
    UnconditionalPureResiduals {
        coupling,
        hamiltonian,
    }
}

/// Outcome of asking whether `JGV + VGJᵀ = 0` admits a positive definite `V`.
#[derive(Debug, Clone)]
pub struct UnconditionalFeasibility {
    /// Orthonormal (Frobenius) basis of the symmetric solutions.
    pub basis: Vec<RMat>,
    pub pd_feasible: bool,
    /// Best `λmin(Σ cₖBₖ)` over `‖c‖ ≤ 1`.
    pub best_min_eig: f64,
    /// Maximizer achieving `best_min_eig`.
    pub best_element: RMat,
    /// `W ⪰ 0`, `W ≠ 0`, orthogonal to every basis element when infeasible.
    pub dual_witness: Option<RMat>,
    /// `max |⟨W, Bₖ⟩|`.
    pub dual_residual: f64,
}

fn symmetric_basis(n: usize) -> Vec<RMat> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for k in i..n {
            let mut e = RMat::zeros(n, n);
            if i == k {
                e[(i, i)] = 1.0;
            } else {
                e[(i, k)] = s;
                e[(k, i)] = s;
            }
            out.push(e);
        }
    }
    out
}

const FEASIBILITY_TOL: f64 = 1e-9;

/// Exact linear algebra on the second unconditional pure-state equation:
/// null space of `V ↦ JGV + VGJᵀ` over symmetric `V`, then the question of
/// whether that subspace meets the positive definite cone.
///
/// One-dimensional null spaces are decided exactly (`±B ≻ 0`). Larger ones
/// maximize the concave function `λmin(Σ cₖBₖ)` over the unit ball by
/// projected supergradient ascent.
pub fn unconditional_feasibility(g: &RMat) -> Result<UnconditionalFeasibility> {
    let n = g.nrows();
    if g.ncols() != n || !n.is_multiple_of(2) {
        return Err(Error::DimensionMismatch("G must be 2m x 2m".into()));
    }
    let j = system::symplectic_form(n / 2);
    let sym = symmetric_basis(n);
    let mut map = RMat::zeros(n * n, sym.len());
    for (col, e) in sym.iter().enumerate() {
        let img = &j * g * e + e * g * j.transpose();
        map.column_mut(col).copy_from_slice(img.as_slice());
    }
    let ns = linalg::null_space(&map, 1e-10);
    let basis: Vec<RMat> = ns
        .column_iter()
        .map(|coef| {
            let mut b = RMat::zeros(n, n);
            for (k, e) in sym.iter().enumerate() {
                b += e * coef[k];
            }
            b
        })
        .collect();

    let combine = |c: &[f64]| -> RMat {
        let mut s = RMat::zeros(n, n);
        for (b, ck) in basis.iter().zip(c) {
            s += b * *ck;
        }
        s
    };
    let min_eig_pair = |m: &RMat| -> (f64, nalgebra::DVector<f64>) {
        let e = nalgebra::SymmetricEigen::new(linalg::symmetrize(m));
        let (idx, val) = e
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, v)| (i, *v))
            .expect("non-empty");
        (val, e.eigenvectors.column(idx).into_owned())
    };

    let (best_c, best) = match basis.len() {
        0 => (Vec::new(), 0.0),
        1 => {
            let lo = linalg::symmetric_min_eig(&basis[0]);
            let hi = -linalg::symmetric_min_eig(&(-&basis[0]));
            if lo >= -hi {
                (vec![1.0], lo.max(0.0).min(lo))
            } else {
                (vec![-1.0], -hi)
            }
        }
        dim => {
            let mut best = (vec![0.0; dim], 0.0);
            let mut starts: Vec<Vec<f64>> = Vec::new();
            for k in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut c = vec![0.0; dim];
                    c[k] = sign;
                    starts.push(c);
                }
            }
            // Trace direction: the identity's projection onto the subspace.
            let tr: Vec<f64> = basis.iter().map(|b| b.trace()).collect();
            let tn = tr.iter().map(|x| x * x).sum::<f64>().sqrt();
            if tn > 0.0 {
                starts.push(tr.iter().map(|x| x / tn).collect());
            }
            for start in starts {
                let mut c = start;
                for it in 1..=2000 {
                    let (val, v) = min_eig_pair(&combine(&c));
                    if val > best.1 {
                        best = (c.clone(), val);
                    }
                    let step = 0.5 / (it as f64).sqrt();
                    for (ck, b) in c.iter_mut().zip(&basis) {
                        *ck += step * (v.transpose() * b * &v)[(0, 0)];
                    }
                    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1.0 {
                        c.iter_mut().for_each(|x| *x /= norm);
                    }
                }
            }
            best
        }
    };

    let best_element = if best_c.is_empty() {
        RMat::zeros(n, n)
    } else {
        combine(&best_c)
    };
    let pd_feasible = best > FEASIBILITY_TOL;
    let (dual_witness, dual_residual) = if pd_feasible {
        (None, f64::NAN)
    } else if basis.is_empty() {
        (Some(linalg::identity(n)), 0.0)
    } else {
        let (_, v) = min_eig_pair(&best_element);
        let w = &v * v.transpose();
        let res = basis
            .iter()
            .map(|b| w.component_mul(b).sum().abs())
            .fold(0.0, f64::max);
        (Some(w), res)
    };
    Ok(UnconditionalFeasibility {
        basis,
        pd_feasible,
        best_min_eig: best,
        best_element,
        dual_witness,
        dual_residual,
    })
}

/// Check of the complex form `Y = V − (i/2)J`: the stabilizing solution of
/// `F_Y Y + Y F_Y† − ηYCᵀCY + K_Y = 0` with `F_Y = A − ηMC − (i/2)ηJCᵀC`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexFormCheck {
    /// `‖Y − (V − (i/2)J)‖_F`.
    pub deviation: f64,
    /// `λmin(Y)`; nonnegative exactly when `V ⪰ (i/2)J`.
    pub min_eig: f64,
    pub residual: f64,
}

pub fn complex_form_problem(d: &DerivedMatrices, eta: f64) -> Result<RiccatiProblem> {
    let ih = Complex64::new(0.0, 0.5);
    let f = d.a_minus_eta_mc(eta);
    let jctc = &d.j * d.c.transpose() * &d.c;
    let f_y = f.to_complex() - jctc.to_complex() * (ih * eta);
    let real_part = &d.n - &d.m * d.m.transpose() * eta - d.quarter_jctcjt() * eta;
    let k_y = linalg::symmetrize(&real_part).to_complex()
        + (&f * &d.j + &d.j * f.transpose()).to_complex() * ih;
    let p = -(d.c.transpose() * &d.c) * eta;
    RiccatiProblem::new(&f_y.adjoint(), &p, &k_y)
}

pub fn complex_form_check(d: &DerivedMatrices, eta: f64, v: &RMat) -> Result<ComplexFormCheck> {
    let prob = complex_form_problem(d, eta)?;
    let sol = riccati::solve_are(&prob)?;
    let expect = v.to_complex() - d.j.to_complex() * Complex64::new(0.0, 0.5);
    Ok(ComplexFormCheck {
        deviation: (&sol.x - expect).norm(),
        min_eig: linalg::hermitian_eigenvalues(&sol.x)
            .first()
            .copied()
            .unwrap_or(0.0),
        residual: sol.residual,
    })
}

/// Ordering of the conditional steady state below the unconditional one.
#[derive(Debug, Clone)]
pub struct UnconditionalComparison {
    pub v_unc: RMat,
    /// `λmin(V_unc − V)`.
    pub min_eig_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SteadyStateReport {
    pub eta: f64,
    /// `[C, A]`.
    pub detectable: Certificate,
    /// `[C, A − MC]`.
    pub detectable_injected: Certificate,
    pub covariance: RMat,
    pub solution: RiccatiSolution,
    pub heisenberg: Certificate,
    pub pure: PurityReport,
    /// Eigenvalues of `A − ηMC − ηVCᵀC`.
    pub closed_loop_eigs: Vec<Complex64>,
    pub closed_loop_stable: bool,
    /// Eigenvalues of `A − MC − VCᵀC`, the Markovian-feedback mean drift.
    pub feedback_eigs: Vec<Complex64>,
    pub feedback_stable: bool,
    pub unconditional_pure: UnconditionalPureResiduals,
    /// Present when `A` is Hurwitz.
    pub unconditional: Option<UnconditionalComparison>,
    pub complex_form: Option<ComplexFormCheck>,
}

impl SteadyStateReport {
    pub fn purity(&self) -> f64 {
        self.pure.purity
    }
}

pub fn steady_state_verdict(spec: &SystemSpec) -> Result<SteadyStateReport> {
    steady_state_verdict_with(spec, SolveOptions::default())
}

pub fn steady_state_verdict_with(spec: &SystemSpec, opts: SolveOptions) -> Result<SteadyStateReport> {
    let d = spec.derive()?;
    let eta = spec.eta();
    let detectable = is_detectable(&d.c, &d.a);
    let detectable_injected = is_detectable(&d.c, &d.a_minus_mc());
    if !detectable_injected.verdict {
        let w = detectable_injected
            .witness
            .clone()
            .expect("failed certificate carries a witness");
        return Err(Error::NotDetectable {
            eigenvalue: w.eigenvalue,
            vector: w.vector.iter().copied().collect(),
            margin: detectable_injected.margin,
        });
    }
    let prob = RiccatiProblem::conditional(&d, eta)?;
    let solution = riccati::solve_are_with(&prob, opts)?;
    let v = solution.real_x()?;
    let heisenberg = heisenberg_certificate(&v, &d.j);
    let pure = is_pure(&v, &d.j)?;
    let ctc = d.c.transpose() * &d.c;
    let closed = d.a_minus_eta_mc(eta) - &v * &ctc * eta;
    let closed_loop_eigs = linalg::eigenvalues(&closed)?;
    let feedback = d.a_minus_mc() - &v * &ctc;
    let feedback_eigs = linalg::eigenvalues(&feedback)?;
    let unconditional_pure = unconditional_pure_conditions(&v, &d, spec.g());

    let a_eigs = linalg::eigenvalues(&d.a)?;
    let unconditional = if linalg::max_real_part(&a_eigs) < -1e-12 {
        let v_unc = riccati::solve_lyapunov(&d.a, &d.n)?;
        let min_eig_gap = linalg::symmetric_min_eig(&(&v_unc - &v));
        Some(UnconditionalComparison { v_unc, min_eig_gap })
    } else {
        None
    };
    let complex_form = complex_form_check(&d, eta, &v).ok();

    Ok(SteadyStateReport {
        eta,
        detectable,
        detectable_injected,
        covariance: v,
        closed_loop_stable: linalg::is_hurwitz(&closed_loop_eigs, riccati::STABILITY_MARGIN),
        closed_loop_eigs,
        feedback_stable: linalg::is_hurwitz(&feedback_eigs, riccati::STABILITY_MARGIN),
        feedback_eigs,
        solution,
        heisenberg,
        pure,
        unconditional_pure,
        unconditional,
        complex_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::system::symplectic_form;

    fn diag(v: &[f64]) -> RMat {
        RMat::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    fn example1(eta: f64) -> SystemSpec {
        let g = RMat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let lam = CMat::from_row_slice(1, 2, &[c(1.0, -1.0), c(0.0, 1.0)]);
        SystemSpec::new(1, g, lam, None, eta).unwrap()
    }

    #[test]
    fn detectability_examples() {
        let a = diag(&[1.0, -1.0]);
        assert!(is_detectable(&RMat::from_row_slice(1, 2, &[2.0, 0.0]), &a).verdict);

        let cert = is_detectable(&RMat::zeros(1, 2), &a);
        assert!(!cert.verdict);
        let w = cert.witness.unwrap();
        assert!((w.eigenvalue - c(1.0, 0.0)).norm() < 1e-12);
        let ac = a.to_complex();
        assert!((&ac * &w.vector - &w.vector * w.eigenvalue).norm() < 1e-8);

        assert!(is_detectable(&RMat::zeros(1, 2), &-linalg::identity(2)).verdict);
    }

    #[test]
    fn imaginary_mode_examples() {
        let rot = RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(has_imaginary_unobservable_modes(&RMat::zeros(1, 2), &rot).verdict);
        assert!(!has_imaginary_unobservable_modes(&linalg::identity(2), &rot).verdict);

        let d = example1(1.0).derive().unwrap();
        let cjt = &d.c * d.j.transpose();
        assert!(!has_imaginary_unobservable_modes(&cjt, &d.a_minus_mc().transpose()).verdict);
    }

    #[test]
    fn axis_mode_examples() {
        let d = example1(1.0).derive().unwrap();
        let r = axis_mode_equivalence_check(&d);
        assert!(r.lhs && r.rhs);

        let zero = SystemSpec::new(1, RMat::zeros(2, 2), CMat::zeros(1, 2), None, 1.0)
            .unwrap()
            .derive()
            .unwrap();
        let r = axis_mode_equivalence_check(&zero);
        assert!(!r.lhs && !r.rhs);
    }

    #[test]
    fn heisenberg_examples() {
        let j = symplectic_form(1);
        let vac = heisenberg_certificate(&(linalg::identity(2) * 0.5), &j);
        assert!(vac.verdict && vac.margin.abs() < 1e-14);
        assert!(!heisenberg_certificate(&(linalg::identity(2) * 0.25), &j).verdict);
        // V + (i/2)J with V = diag(1, 1/4) has eigenvalues 5/8 ± 3/8.
        let sq = heisenberg_certificate(&diag(&[1.0, 0.25]), &j);
        assert!(sq.verdict);
        assert!(sq.margin.abs() < 1e-14);
    }

    #[test]
    fn purity_examples() {
        let j = symplectic_form(1);
        let p = is_pure(&(linalg::identity(2) * 0.5), &j).unwrap();
        assert!(p.verdict && (p.purity - 1.0).abs() < 1e-15);
        let p = is_pure(&linalg::identity(2), &j).unwrap();
        assert!(!p.verdict && (p.purity - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unconditional_pure_trivial_and_example1() {
        let zero = SystemSpec::new(1, RMat::zeros(2, 2), CMat::zeros(1, 2), None, 1.0).unwrap();
        let d = zero.derive().unwrap();
        let r = unconditional_pure_conditions(&(linalg::identity(2) * 0.5), &d, zero.g());
        assert_eq!(r.coupling, 0.0);
        assert_eq!(r.hamiltonian, 0.0);

        let f = unconditional_feasibility(example1(1.0).g()).unwrap();
        assert_eq!(f.basis.len(), 1);
        assert!(!f.pd_feasible);
        assert!(f.dual_residual < 1e-12);
        let b = &f.basis[0];
        assert!((b[(0, 0)]).abs() < 1e-12 && (b[(0, 1)]).abs() < 1e-12);
    }

    #[test]
    fn unconditional_pure_feasible_for_oscillator() {
        // G = I: JGV + VGJᵀ = JV − VJ vanishes for every V commuting with J,
        // including V = I/2.
        let f = unconditional_feasibility(&linalg::identity(2)).unwrap();
        assert!(f.pd_feasible);
        assert!(linalg::symmetric_min_eig(&f.best_element) > 0.0);
        let f = unconditional_feasibility(&linalg::identity(4)).unwrap();
        assert!(f.pd_feasible);
    }

    #[test]
    fn verdict_example1() {
        let r = steady_state_verdict(&example1(1.0)).unwrap();
        assert!((&r.covariance - linalg::identity(2) * 0.5).norm() < 1e-10);
        assert!((r.purity() - 1.0).abs() < 1e-10);
        for e in &r.feedback_eigs {
            assert!((e - c(-1.0, 0.0)).norm() < 1e-8);
        }
        assert!(r.heisenberg.verdict && r.pure.verdict && r.closed_loop_stable);
        let cf = r.complex_form.unwrap();
        assert!(cf.deviation < 1e-8 && cf.min_eig > -1e-8);
    }

    #[test]
    fn verdict_example1_half_efficiency() {
        let r = steady_state_verdict(&example1(0.5)).unwrap();
        assert!(r.heisenberg.verdict);
        assert!(r.purity() < 1.0 - 1e-3);
        // Riccati with η = ½ on Example 1 has V = diag(½, ¾).
        assert!((&r.covariance - diag(&[0.5, 0.75])).norm() < 1e-9);
        let cf = r.complex_form.unwrap();
        assert!(cf.deviation < 1e-8 && cf.min_eig > -1e-8);
        let unc = r.unconditional.unwrap();
        assert!(unc.min_eig_gap > -1e-8);
    }

    #[test]
    fn verdict_without_measurement() {
        let spec = SystemSpec::new(1, RMat::zeros(2, 2), CMat::zeros(1, 2), None, 1.0).unwrap();
        assert!(matches!(
            steady_state_verdict(&spec),
            Err(Error::NotDetectable { .. })
        ));
        let osc = SystemSpec::new(1, linalg::identity(2), CMat::zeros(1, 2), None, 1.0).unwrap();
        assert!(matches!(
            steady_state_verdict(&osc),
            Err(Error::NotDetectable { .. })
        ));
    }

    #[test]
    fn injection_matches_detectability() {
        let a = diag(&[1.0, -1.0]);
        let c = RMat::from_row_slice(1, 2, &[2.0, 0.0]);
        assert!(stabilizing_injection(&c, &a).is_some());
        assert!(stabilizing_injection(&RMat::zeros(1, 2), &a).is_none());
    }
}
