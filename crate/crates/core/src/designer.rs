//! Inverse problem: given a pure target covariance, build a coupling and
//! Hamiltonian whose conditional steady state is that target, plus the
//! Markovian feedback that drives the conditional mean to zero.

use num_complex::Complex64;

use crate::analysis::{self, SteadyStateReport};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat, ToComplex};
use crate::riccati::RiccatiProblem;
use crate::system::{symplectic_form, DerivedMatrices, SystemSpec, COV_SYMMETRY_TOL};

/// Minimum `σmin([R V_s J; R])`.
pub const RANK_TOL: f64 = 1e-8;
/// Relative asymmetry allowed in the synthesized `G`.
pub const G_FORMULA_TOL: f64 = 1e-10;
/// Relative Frobenius error allowed between the recovered and target covariance.
pub const ROUND_TRIP_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DesignRequest {
    pub v_s: RMat,
    /// Real part of the coupling; `[I 0]` when absent.
    pub r: Option<RMat>,
    /// Imaginary part of the coupling; zero when absent.
    pub im: Option<RMat>,
}

impl DesignRequest {
    pub fn new(v_s: RMat) -> Self {
        Self { v_s, r: None, im: None }
    }

    pub fn with_r(mut self, r: RMat) -> Self {
        self.r = Some(r);
        self
    }

    pub fn with_im(mut self, im: RMat) -> Self {
        self.im = Some(im);
        self
    }
}

#[derive(Debug, Clone)]
pub struct FeedbackGain {
    /// Input matrix `B = VCᵀ + M`.
    pub b: RMat,
    /// Gain `F = −I`.
    pub f: RMat,
    /// Real drive with `J(K + K*) = B`.
    pub k: RMat,
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub spec: SystemSpec,
    pub feedback: FeedbackGain,
    pub rank_margin: f64,
    /// `‖V − V_s‖_F / ‖V_s‖_F` for the recovered steady state.
    pub relative_error: f64,
    /// Residual of the steady-state equation evaluated at `V_s`, relative
    /// to the size of its terms.
    pub substitution_residual: f64,
    pub verification: SteadyStateReport,
}

/// `[I 0]`.
pub fn default_r(m: usize) -> RMat {
    let mut r = RMat::zeros(m, 2 * m);
    for i in 0..m {
        r[(i, i)] = 1.0;
    }
    r
}

/// `σmin` of the stacked `[R V_s J; R]`.
pub fn rank_margin(r: &RMat, v_s: &RMat) -> f64 {
    let m = r.nrows();
    let j = symplectic_form(m);
    let mut stacked = RMat::zeros(2 * m, 2 * m);
    stacked.view_mut((0, 0), (m, 2 * m)).copy_from(&(r * v_s * &j));
    stacked.view_mut((m, 0), (m, 2 * m)).copy_from(r);
    linalg::singular_values(&stacked).last().copied().unwrap_or(0.0)
}

/// Canonical Markovian feedback for a steady covariance `v`.
pub fn feedback_gain(v: &RMat, d: &DerivedMatrices) -> FeedbackGain {
    let m = d.modes();
    let b = v * d.c.transpose() + &d.m;
    let k = d.j.transpose() * &b * 0.5;
    FeedbackGain {
        b,
        f: -linalg::identity(m),
        k,
    }
}

/// `G = −RᵀIm − ImᵀR + 2JᵀV_sRᵀR + 2RᵀRV_sJ`.
pub fn hamiltonian_for(v_s: &RMat, r: &RMat, im: &RMat) -> RMat {
    let j = symplectic_form(r.nrows());
    let rtr = r.transpose() * r;
    -(r.transpose() * im) - im.transpose() * r
        + j.transpose() * v_s * &rtr * 2.0
        + &rtr * v_s * &j * 2.0
}

pub fn synthesize(req: &DesignRequest) -> Result<DesignResult> {
    let n = req.v_s.nrows();
    if req.v_s.ncols() != n || n == 0 || !n.is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!(
            "target covariance must be 2m x 2m, got {}x{}",
            req.v_s.nrows(),
            req.v_s.ncols()
        )));
    }
    let m = n / 2;
    let asym = linalg::asymmetry(&req.v_s);
    if asym > COV_SYMMETRY_TOL {
        return Err(Error::NonSymmetric {
            what: "target covariance",
            asymmetry: asym,
        });
    }
    let v_s = linalg::symmetrize(&req.v_s);
    if linalg::symmetric_min_eig(&v_s) <= 0.0 {
        return Err(Error::SingularCovariance);
    }
    let j = symplectic_form(m);
    let pure = analysis::is_pure(&v_s, &j)?;
    if !pure.verdict {
        return Err(Error::NotPure {
            residual: pure.residual,
        });
    }

    let r = req.r.clone().unwrap_or_else(|| default_r(m));
    let im = req.im.clone().unwrap_or_else(|| RMat::zeros(m, n));
    for (what, mat) in [("R", &r), ("Im", &im)] {
        if mat.shape() != (m, n) {
            return Err(Error::DimensionMismatch(format!(
                "{what} must be {m}x{n}, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
    }
    let margin = rank_margin(&r, &v_s);
    if !(margin > RANK_TOL) {
        return Err(Error::RankDeficient { margin });
    }

    let g = hamiltonian_for(&v_s, &r, &im);
    let g_asym = linalg::asymmetry(&g);
    if g_asym > G_FORMULA_TOL {
        return Err(Error::NonSymmetricG { asymmetry: g_asym });
    }
    let g = linalg::symmetrize(&g);
    let lambda = CMat::from_fn(m, n, |i, k| Complex64::new(r[(i, k)], im[(i, k)]));

    let bare = SystemSpec::new(m, g.clone(), lambda.clone(), None, 1.0)?;
    let d = bare.derive()?;
    let feedback = feedback_gain(&v_s, &d);
    let spec = SystemSpec::new(m, g, lambda, Some(feedback.k.to_complex()), 1.0)?;

    let prob = RiccatiProblem::conditional(&d, 1.0)?;
    let substitution_residual = prob.relative_residual(&v_s.to_complex());

    let verification = analysis::steady_state_verdict(&spec)?;
    let relative_error = (&verification.covariance - &v_s).norm() / v_s.norm();
    if !(relative_error <= ROUND_TRIP_TOL) {
        return Err(Error::VerificationFailed {
            relative_error,
            detail: format!(
                "solver residual {:.3e}, substitution residual {:.3e}, subspace condition {:.3e}",
                verification.solution.residual,
                substitution_residual,
                verification.solution.subspace_condition
            ),
        });
    }
    Ok(DesignResult {
        spec,
        feedback,
        rank_margin: margin,
        relative_error,
        substitution_residual,
        verification,
    })
}
