//! Physical parameterization of an m-mode linear-quadratic Gaussian system
//! and the real moment-equation matrices derived from it.
//!
//! Quadratures are ordered `(q1..qm, p1..pm)` with `q = (a + a†)/2` and
//! `p = i(a† − a)/2`, so the vacuum covariance is `I/2`.

use std::f64::consts::PI;

use nalgebra::Cholesky;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, checked_real, CMat, RMat, RVec, ToComplex};

/// Relative asymmetry accepted (and removed) on ingestion of `G`.
pub const G_SYMMETRY_TOL: f64 = 1e-12;
/// Relative asymmetry accepted on ingestion of a covariance.
pub const COV_SYMMETRY_TOL: f64 = 1e-10;
/// Relative imaginary residue tolerated when extracting real matrices.
pub const IMAG_RESIDUE_TOL: f64 = 1e-12;
/// Eigenvalue tolerance of the uncertainty-principle check.
pub const HEISENBERG_TOL: f64 = 1e-8;

/// Raw physical parameters of the measured system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    m: usize,
    g: RMat,
    lambda: CMat,
    k: CMat,
    eta: f64,
}

impl SystemSpec {
    /// Validates and symmetrizes the inputs. `k` may be `None` for an
    /// undriven system.
    pub fn new(m: usize, g: RMat, lambda: CMat, k: Option<CMat>, eta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::DimensionMismatch("mode count must be at least 1".into()));
        }
        let n = 2 * m;
        if g.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "G must be {n}x{n}, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        if lambda.shape() != (m, n) {
            return Err(Error::DimensionMismatch(format!(
                "Lambda must be {m}x{n}, got {}x{}",
                lambda.nrows(),
                lambda.ncols()
            )));
        }
        let k = k.unwrap_or_else(|| CMat::zeros(n, m));
        if k.shape() != (n, m) {
            return Err(Error::DimensionMismatch(format!(
                "K must be {n}x{m}, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidEfficiency(eta));
        }
        let asym = linalg::asymmetry(&g);
        if asym > G_SYMMETRY_TOL {
            return Err(Error::NonSymmetricG { asymmetry: asym });
        }
        Ok(Self {
            m,
            g: linalg::symmetrize(&g),
            lambda,
            k,
            eta,
        })
    }

    /// Builds `Λ = R + i·Im` from its real and imaginary parts.
    pub fn from_parts(
        m: usize,
        g: RMat,
        lambda_re: &RMat,
        lambda_im: &RMat,
        k: Option<(RMat, RMat)>,
        eta: f64,
    ) -> Result<Self> {
        if lambda_re.shape() != lambda_im.shape() {
            return Err(Error::DimensionMismatch(
                "Lambda real and imaginary parts differ in shape".into(),
            ));
        }
        let lambda = CMat::from_fn(lambda_re.nrows(), lambda_re.ncols(), |i, j| {
            Complex64::new(lambda_re[(i, j)], lambda_im[(i, j)])
        });
        let k = match k {
            Some((re, im)) => {
                if re.shape() != im.shape() {
                    return Err(Error::DimensionMismatch(
                        "K real and imaginary parts differ in shape".into(),
                    ));
                }
                Some(CMat::from_fn(re.nrows(), re.ncols(), |i, j| {
                    Complex64::new(re[(i, j)], im[(i, j)])
                }))
            }
            None => None,
        };
        Self::new(m, g, lambda, k, eta)
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        2 * self.m
    }

    pub fn g(&self) -> &RMat {
        &self.g
    }

    pub fn lambda(&self) -> &CMat {
        &self.lambda
    }

    pub fn drive(&self) -> &CMat {
        &self.k
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidEfficiency(eta));
        }
        Ok(Self { eta, ..self.clone() })
    }

    pub fn derive(&self) -> Result<DerivedMatrices> {
        derive_matrices(self)
    }
}

/// Real matrices of the moment equations.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedMatrices {
    pub j: RMat,
    pub a: RMat,
    pub b: RMat,
    pub c: RMat,
    pub m: RMat,
    pub n: RMat,
    /// Real part of Λ.
    pub r: RMat,
    /// Imaginary part of Λ.
    pub im: RMat,
}

impl DerivedMatrices {
    pub fn modes(&self) -> usize {
        self.c.nrows()
    }

    /// `A − MC`, the drift that appears in the conditional Riccati equation.
    pub fn a_minus_mc(&self) -> RMat {
        &self.a - &self.m * &self.c
    }

    /// `A − ηMC`.
    pub fn a_minus_eta_mc(&self, eta: f64) -> RMat {
        &self.a - &self.m * &self.c * eta
    }

    /// Constant term `¼ J Cᵀ C Jᵀ`.
    pub fn quarter_jctcjt(&self) -> RMat {
        &self.j * self.c.transpose() * &self.c * self.j.transpose() * 0.25
    }
}

/// Symplectic form `[[0, I], [−I, 0]]` of size `2m`.
pub fn symplectic_form(m: usize) -> RMat {
    let n = 2 * m;
    let mut j = RMat::zeros(n, n);
    for i in 0..m {
        j[(i, m + i)] = 1.0;
        j[(m + i, i)] = -1.0;
    }
    j
}

pub fn derive_matrices(spec: &SystemSpec) -> Result<DerivedMatrices> {
    let m = spec.m;
    let j = symplectic_form(m);
    let jc = j.to_complex();
    let lam = &spec.lambda;
    let lam_dag = lam.adjoint();
    let lam_t = lam.transpose();
    let lam_conj = lam.conjugate();
    let half = Complex64::new(0.5, 0.0);
    let i_half = Complex64::new(0.0, 0.5);
    // 1/(2i) = −i/2
    let inv_2i = Complex64::new(0.0, -0.5);

    let a_c = &jc * (spec.g.to_complex() + (&lam_dag * lam - &lam_t * &lam_conj) * inv_2i);
    let b_c = &jc * (&spec.k + spec.k.conjugate());
    let c_c = lam + &lam_conj;
    let m_c = &jc * (&lam_t - &lam_dag) * i_half;
    let n_c = &jc * (&lam_dag * lam + &lam_t * &lam_conj) * jc.transpose() * half;

    let n = linalg::symmetrize(&checked_real(&n_c, IMAG_RESIDUE_TOL, "N")?);
    Ok(DerivedMatrices {
        a: checked_real(&a_c, IMAG_RESIDUE_TOL, "A")?,
        b: checked_real(&b_c, IMAG_RESIDUE_TOL, "B")?,
        c: checked_real(&c_c, IMAG_RESIDUE_TOL, "C")?,
        m: checked_real(&m_c, IMAG_RESIDUE_TOL, "M")?,
        n,
        r: linalg::real_part(lam),
        im: linalg::imag_part(lam),
        j,
    })
}

/// Mean and covariance of a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    mean: RVec,
    cov: RMat,
}

impl GaussianMoments {
    pub fn new(mean: RVec, cov: RMat) -> Result<Self> {
        let n = mean.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "mean must have even positive length, got {n}"
            )));
        }
        if cov.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be {n}x{n}, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let asym = linalg::asymmetry(&cov);
        if asym > COV_SYMMETRY_TOL {
            return Err(Error::NonSymmetric {
                what: "covariance",
                asymmetry: asym,
            });
        }
        Ok(Self {
            mean,
            cov: linalg::symmetrize(&cov),
        })
    }

    /// Zero-mean state with the given covariance.
    pub fn centered(cov: RMat) -> Result<Self> {
        let n = cov.nrows();
        Self::new(RVec::zeros(n), cov)
    }

    pub fn vacuum(m: usize) -> Self {
        Self {
            mean: RVec::zeros(2 * m),
            cov: linalg::identity(2 * m) * 0.5,
        }
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &RVec {
        &self.mean
    }

    pub fn cov(&self) -> &RMat {
        &self.cov
    }

    /// Whether `V ± (i/2)J ⪰ −1e-8`.
    pub fn is_physical(&self) -> bool {
        let j = symplectic_form(self.modes());
        let v = self.cov.to_complex();
        let ij = j.to_complex() * Complex64::new(0.0, 0.5);
        linalg::hermitian_eigenvalues(&(&v + &ij))[0] >= -HEISENBERG_TOL
            && linalg::hermitian_eigenvalues(&(&v - &ij))[0] >= -HEISENBERG_TOL
    }
}

fn pd_determinant(v: &RMat) -> Result<f64> {
    let chol = Cholesky::new(v.clone()).ok_or(Error::SingularCovariance)?;
    let det = chol.l().diagonal().iter().map(|d| d * d).product::<f64>();
    if !(det > 1e-300) {
        return Err(Error::SingularCovariance);
    }
    Ok(det)
}

/// Gaussian Wigner function evaluated at phase-space point `x`.
pub fn wigner_density(state: &GaussianMoments, x: &RVec) -> Result<f64> {
    let n = state.mean.len();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "point has length {}, state has {n}",
            x.len()
        )));
    }
    let chol = Cholesky::new(state.cov.clone()).ok_or(Error::SingularCovariance)?;
    let det = pd_determinant(&state.cov)?;
    let d = x - &state.mean;
    let quad = d.dot(&chol.solve(&d));
    let m = state.modes() as i32;
    Ok((-0.5 * quad).exp() / ((2.0 * PI).powi(m) * det.sqrt()))
}

/// `Tr ρ² = 1 / (2^m √det V)`.
pub fn purity(state: &GaussianMoments) -> Result<f64> {
    purity_of(&state.cov)
}

pub fn purity_of(cov: &RMat) -> Result<f64> {
    let det = pd_determinant(cov)?;
    let m = (cov.nrows() / 2) as i32;
    Ok(1.0 / (2f64.powi(m) * det.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn example1(kappa: f64) -> SystemSpec {
        let s = kappa.sqrt();
        let g = RMat::from_row_slice(2, 2, &[2.0 * kappa, 0.0, 0.0, 0.0]);
        let lam = CMat::from_row_slice(1, 2, &[c(s, -s), c(0.0, s)]);
        SystemSpec::new(1, g, lam, None, 1.0).unwrap()
    }

    #[test]
    fn symplectic_form_blocks() {
        assert_eq!(symplectic_form(1), RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        for m in 1..5 {
            let j = symplectic_form(m);
            let n = 2 * m;
            assert_eq!(&j * &j, -linalg::identity(n));
            assert_eq!(&j * j.transpose(), linalg::identity(n));
            assert_eq!(j.transpose(), -&j);
        }
    }

    #[test]
    fn example1_matrices() {
        let d = example1(1.0).derive().unwrap();
        assert_eq!(d.c, RMat::from_row_slice(1, 2, &[2.0, 0.0]));
        let amc = d.a_minus_mc();
        assert!((amc - RMat::from_diagonal(&RVec::from_vec(vec![1.0, -1.0]))).norm() < 1e-12);
    }

    #[test]
    fn example1_scales_with_kappa() {
        let kappa = 2.5;
        let d = example1(kappa).derive().unwrap();
        assert!((d.c[(0, 0)] - 2.0 * kappa.sqrt()).abs() < 1e-12);
        let amc = d.a_minus_mc();
        assert!((amc[(0, 0)] - kappa).abs() < 1e-12);
        assert!((amc[(1, 1)] + kappa).abs() < 1e-12);
    }

    #[test]
    fn zero_system_derives_zero() {
        let spec = SystemSpec::new(1, RMat::zeros(2, 2), CMat::zeros(1, 2), None, 1.0).unwrap();
        let d = spec.derive().unwrap();
        for mat in [&d.a, &d.b, &d.c, &d.m, &d.n] {
            assert_eq!(mat.norm(), 0.0);
        }
    }

    /// Hand expansion of the defining formulas for Λ = (1−i, i), G = diag(2, 0):
    /// Λ†Λ = [[2, −1+i], [−1−i, 1]] and ΛᵀΛ* = [[2, −1−i], [−1+i, 1]], so
    /// (Λ†Λ − ΛᵀΛ*)/(2i) = [[0, 1], [−1, 0]] and A = J [[2, 1], [−1, 0]].
    /// The sum Λ†Λ + ΛᵀΛ* = [[4, −2], [−2, 2]] gives N = [[1, 1], [1, 2]].
    #[test]
    fn example1_against_hand_expansion() {
        let d = example1(1.0).derive().unwrap();
        let j = symplectic_form(1);
        let inner = RMat::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 0.0]);
        let a_hand = &j * inner;
        assert!((&d.a - &a_hand).norm() < 1e-14);
        assert!((&d.a - RMat::from_row_slice(2, 2, &[-1.0, 0.0, -2.0, -1.0])).norm() < 1e-14);
        assert!((&d.m - RMat::from_row_slice(2, 1, &[-1.0, -1.0])).norm() < 1e-14);
        assert!((&d.n - RMat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0])).norm() < 1e-14);
        assert_eq!(d.b.norm(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = RMat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            SystemSpec::new(1, g, CMat::zeros(1, 2), None, 1.0),
            Err(Error::NonSymmetricG { .. })
        ));
        assert!(matches!(
            SystemSpec::new(1, RMat::zeros(2, 2), CMat::zeros(1, 2), None, 0.0),
            Err(Error::InvalidEfficiency(_))
        ));
        assert!(matches!(
            SystemSpec::new(1, RMat::zeros(2, 2), CMat::zeros(2, 2), None, 1.0),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            SystemSpec::new(0, RMat::zeros(0, 0), CMat::zeros(0, 0), None, 1.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn tiny_asymmetry_is_removed() {
        let g = RMat::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-14, 1.0]);
        let spec = SystemSpec::new(1, g, CMat::zeros(1, 2), None, 1.0).unwrap();
        assert_eq!(spec.g(), &spec.g().transpose());
    }

    #[test]
    fn wigner_values() {
        let vac = GaussianMoments::vacuum(1);
        let w = wigner_density(&vac, &RVec::zeros(2)).unwrap();
        assert!((w - 1.0 / PI).abs() < 1e-15);

        let st = GaussianMoments::new(
            RVec::from_vec(vec![0.3, -1.0, 0.2, 0.0]),
            RMat::from_row_slice(4, 4, &[
                1.0, 0.1, 0.0, 0.2, 0.1, 0.8, 0.0, 0.0, 0.0, 0.0, 0.6, 0.1, 0.2, 0.0, 0.1, 0.9,
            ]),
        )
        .unwrap();
        let peak = wigner_density(&st, st.mean()).unwrap();
        let det = st.cov().determinant();
        assert!((peak - 1.0 / ((2.0 * PI).powi(2) * det.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn wigner_integrates_to_one() {
        // Tensor Simpson rule on [−6, 6]².
        let vac = GaussianMoments::vacuum(1);
        let n = 600;
        let h = 12.0 / n as f64;
        let weight = |i: usize| -> f64 {
            if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let mut total = 0.0;
        for i in 0..=n {
            for k in 0..=n {
                let x = RVec::from_vec(vec![-6.0 + i as f64 * h, -6.0 + k as f64 * h]);
                total += weight(i) * weight(k) * wigner_density(&vac, &x).unwrap();
            }
        }
        total *= h * h / 9.0;
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
    }

    #[test]
    fn purity_values() {
        let p = |v: RMat| purity(&GaussianMoments::centered(v).unwrap()).unwrap();
        assert!((p(linalg::identity(2) * 0.5) - 1.0).abs() < 1e-15);
        assert!((p(linalg::identity(2)) - 0.5).abs() < 1e-15);
        assert!((p(linalg::identity(4) * 0.5) - 1.0).abs() < 1e-15);
        assert!(matches!(
            purity(&GaussianMoments::centered(RMat::zeros(2, 2)).unwrap()),
            Err(Error::SingularCovariance)
        ));
    }

    #[test]
    fn physical_flag() {
        assert!(GaussianMoments::vacuum(2).is_physical());
        assert!(!GaussianMoments::centered(linalg::identity(2) * 0.25)
            .unwrap()
            .is_physical());
    }
}
