//! Random instance generators shared by property tests, the acceptance
//! suite and the benches.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::analysis;
use crate::error::Result;
use crate::linalg::{self, CMat, RMat};
use crate::riccati::RiccatiProblem;
use crate::system::{symplectic_form, SystemSpec};

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> RMat {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
    })
}

/// Symmetric matrix with entries uniform in `[−1, 1]`.
pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RMat {
    let mut y = RMat::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            let v = rng.random_range(-1.0..=1.0);
            y[(i, k)] = v;
            y[(k, i)] = v;
        }
    }
    y
}

/// `S = exp(J·Y)` with `Y` random symmetric, hence `SJSᵀ = J`.
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, m: usize) -> RMat {
    let j = symplectic_form(m);
    (&j * random_symmetric(rng, 2 * m)).exp()
}

/// `½SSᵀ` for a random symplectic `S`: a pure Gaussian covariance.
pub fn random_pure_covariance<R: Rng + ?Sized>(rng: &mut R, m: usize) -> RMat {
    let s = random_symplectic(rng, m);
    linalg::symmetrize(&(&s * s.transpose() * 0.5))
}

/// Random `G`, `Λ` and drive with entries in `[−1, 1]`.
pub fn random_spec<R: Rng + ?Sized>(rng: &mut R, m: usize, eta: f64) -> Result<SystemSpec> {
    let g = random_symmetric(rng, 2 * m);
    let lambda = random_complex(rng, m, 2 * m);
    let k = random_complex(rng, 2 * m, m);
    SystemSpec::new(m, g, lambda, Some(k), eta)
}

/// Redraws [`random_spec`] until `[C, A − MC]` is detectable.
pub fn random_detectable_spec<R: Rng + ?Sized>(rng: &mut R, m: usize, eta: f64) -> Result<SystemSpec> {
    loop {
        let spec = random_spec(rng, m, eta)?;
        let d = spec.derive()?;
        if analysis::is_detectable(&d.c, &d.a_minus_mc()).verdict {
            return Ok(spec);
        }
    }
}

/// Mixture that exercises both outcomes of the imaginary-axis test:
/// generic couplings, no coupling at all, and a measured mode next to an
/// uncoupled oscillator.
pub fn random_mixed_spec<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Result<SystemSpec> {
    let n = 2 * m;
    match rng.random_range(0..4u8) {
        0 => SystemSpec::new(m, random_symmetric(rng, n), CMat::zeros(m, n), None, 1.0),
        1 if m >= 2 => {
            // Mode 0 is measured; the remaining modes see only their own
            // positive definite Hamiltonian, so they oscillate on the axis.
            let mut g = RMat::zeros(n, n);
            let inner = random_matrix(rng, n, n);
            let pd = &inner * inner.transpose() + linalg::identity(n) * 0.1;
            for a in 1..m {
                for b in 1..m {
                    for (oa, ob) in [(0, 0), (0, m), (m, 0), (m, m)] {
                        g[(a + oa, b + ob)] = pd[(a + oa, b + ob)];
                    }
                }
            }
            g[(0, 0)] = rng.random_range(-1.0..=1.0);
            g[(m, m)] = rng.random_range(-1.0..=1.0);
            let mut lambda = CMat::zeros(m, n);
            lambda[(0, 0)] = Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            lambda[(0, m)] = Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            SystemSpec::new(m, linalg::symmetrize(&g), lambda, None, 1.0)
        }
        _ => random_spec(rng, m, 1.0),
    }
}

/// `F†X + XF + XPX + K = 0` with `P = −OO†`, `K = Z†Z`. Half the draws shift
/// `F` to be Hurwitz; the rest leave it arbitrary and rely on `(F, O)`
/// being generically stabilizable.
pub fn random_riccati_problem<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<RiccatiProblem> {
    let mut f = random_complex(rng, n, n);
    if rng.random_bool(0.5) {
        let max_re = linalg::max_real_part(&linalg::eigenvalues(&f)?);
        for i in 0..n {
            f[(i, i)] -= Complex64::new(max_re + 0.5, 0.0);
        }
    }
    let (inputs, outputs) = (rng.random_range(1..=n), rng.random_range(1..=n));
    let o = random_complex(rng, n, inputs);
    let z = random_complex(rng, outputs, n);
    RiccatiProblem::new(&f, &-(&o * o.adjoint()), &(z.adjoint() * &z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symplectic_and_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 1..=3 {
            let s = random_symplectic(&mut rng, m);
            let j = symplectic_form(m);
            assert!((&s * &j * s.transpose() - &j).norm() < 1e-10);
            let v = random_pure_covariance(&mut rng, m);
            assert!(analysis::is_pure(&v, &j).unwrap().verdict);
        }
    }

    #[test]
    fn detectable_specs_are_detectable() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = random_detectable_spec(&mut rng, 2, 1.0).unwrap();
        let d = spec.derive().unwrap();
        assert!(analysis::is_detectable(&d.c, &d.a).verdict);
    }
}
