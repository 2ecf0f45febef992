use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the model, solver, design and simulation layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Hamiltonian matrix G is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NonSymmetricG { asymmetry: f64 },

    #[error("{what} is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NonSymmetric { what: &'static str, asymmetry: f64 },

    #[error("{what} is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { what: &'static str, asymmetry: f64 },

    #[error("detection efficiency must lie in (0, 1], got {0}")]
    InvalidEfficiency(f64),

    #[error("{what} has imaginary residue {residue:.3e} beyond tolerance")]
    ImaginaryResidue { what: &'static str, residue: f64 },

    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,

    #[error("quadratic term P is indefinite (eigenvalues span [{min_eig:.3e}, {max_eig:.3e}])")]
    IndefiniteP { min_eig: f64, max_eig: f64 },

    #[error(
        "Hamiltonian not in dom(Ric): imaginary_axis_free={imaginary_axis_free}, \
         complementary={complementary}, detectable={detectable}"
    )]
    NotInDomRic {
        imaginary_axis_free: bool,
        complementary: bool,
        detectable: bool,
    },

    #[error("stable invariant subspace is ill conditioned (cond(X1) = {cond:.3e})")]
    IllConditionedSubspace { cond: f64 },

    #[error("drift matrix is not Hurwitz (max real eigenvalue part {max_re:.3e})")]
    UnstableDrift { max_re: f64 },

    #[error("integration blew up at t = {t} (norm {norm:.3e}); reduce the step size")]
    StepSizeTooLarge { t: f64, norm: f64 },

    #[error("[C, A] is not detectable: unobserved mode at eigenvalue {eigenvalue}")]
    NotDetectable {
        eigenvalue: Complex64,
        vector: Vec<Complex64>,
        margin: f64,
    },

    #[error("target covariance is not pure (||JVJV + I/4|| = {residual:.3e})")]
    NotPure { residual: f64 },

    #[error("rank condition fails for the chosen R (margin {margin:.3e}); try the default R = [I 0]")]
    RankDeficient { margin: f64 },

    #[error("design verification failed: relative error {relative_error:.3e} ({detail})")]
    VerificationFailed { relative_error: f64, detail: String },

    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenSolverFailed,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
