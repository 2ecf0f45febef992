//! Dense helpers shared by the solver and certificate layers.
//!
//! Everything here works on complex matrices; real inputs are promoted
//! through [`ToComplex`]. The ordered Schur routine follows the usual
//! adjacent-swap scheme for upper triangular factors (one Givens rotation
//! per swap), which keeps the factorization unitary throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type RVec = DVector<f64>;
pub type CVec = DVector<Complex64>;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// Promotion to a complex matrix.
pub trait ToComplex {
    fn to_complex(&self) -> CMat;
}

impl ToComplex for RMat {
    fn to_complex(&self) -> CMat {
        self.map(|x| Complex64::new(x, 0.0))
    }
}

impl ToComplex for CMat {
    fn to_complex(&self) -> CMat {
        self.clone()
    }
}

pub fn real_part(a: &CMat) -> RMat {
    a.map(|z| z.re)
}

pub fn imag_part(a: &CMat) -> RMat {
    a.map(|z| z.im)
}

/// Real part of `a`, provided the imaginary part is below `rel_tol` relative
/// to the magnitude of `a`.
pub fn checked_real(a: &CMat, rel_tol: f64, what: &'static str) -> Result<RMat> {
    let scale = a.norm().max(1.0);
    let residue = imag_part(a).norm();
    if residue > rel_tol * scale {
        return Err(Error::ImaginaryResidue { what, residue });
    }
    Ok(real_part(a))
}

pub fn identity(n: usize) -> RMat {
    RMat::identity(n, n)
}

pub fn symmetrize(a: &RMat) -> RMat {
    (a + a.transpose()) * 0.5
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// ‖A − Aᵀ‖ / max(‖A‖, tiny).
pub fn asymmetry(a: &RMat) -> f64 {
    let n = a.norm();
    if n == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).norm() / n
}

pub fn non_hermiticity(a: &CMat) -> f64 {
    let n = a.norm();
    if n == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / n
}

/// Complex Schur factorization `a = q t q†` with `t` upper triangular.
///
/// Real input keeps a single-shift QR sweep real and can stall it on a
/// conjugate pair. When the plain sweep fails, the factorization is
/// retried on `a + i·s·I` and the shift removed from the diagonal, which
/// leaves `q` valid for `a` itself.
pub fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((a.clone(), a.clone()));
    }
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let shifts = [0.0, 0.137, -0.291, 0.618];
    for &frac in &shifts {
        let shift = Complex64::new(0.0, frac * scale);
        let shifted = if frac == 0.0 {
            a.clone()
        } else {
            a + CMat::identity(n, n) * shift
        };
        let Some(s) = nalgebra::linalg::Schur::try_new(shifted, SCHUR_EPS, SCHUR_MAX_ITER) else {
            continue;
        };
        let (q, mut t) = s.unpack();
        // Clear round-off below the diagonal so later swaps see an exact triangle.
        for j in 0..n {
            t[(j, j)] -= shift;
            for i in (j + 1)..n {
                t[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        return Ok((q, t));
    }
    Err(Error::EigenSolverFailed)
}

pub fn eigenvalues<M: ToComplex>(a: &M) -> Result<Vec<Complex64>> {
    let (_, t) = schur(&a.to_complex())?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn max_real_part(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(eigs: &[Complex64], margin: f64) -> bool {
    eigs.iter().all(|z| z.re < -margin)
}

/// Givens pair `(c, s)` with real `c` such that
/// `[c s; -conj(s) c] [f; g] = [r; 0]`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    let fn_ = f.norm();
    if fn_ == 0.0 {
        return (0.0, g.conj() / gn);
    }
    let norm = fn_.hypot(gn);
    (fn_ / norm, (f / fn_) * g.conj() / norm)
}

/// Swap the adjacent diagonal entries `k` and `k + 1` of the triangular
/// factor, updating the unitary factor to match.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    let sc = s.conj();
    for j in (k + 2)..n {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = x * c + s * y;
        t[(k + 1, j)] = y * c - sc * x;
    }
    for i in 0..k {
        let x = t[(i, k)];
        let y = t[(i, k + 1)];
        t[(i, k)] = x * c + sc * y;
        t[(i, k + 1)] = y * c - s * x;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    for i in 0..q.nrows() {
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * c + sc * y;
        q[(i, k + 1)] = y * c - s * x;
    }
}

/// Reorder a complex Schur factorization so that every diagonal entry
/// accepted by `select` moves to the leading block. Returns the size of
/// that block. The first `k` columns of `q` then span the invariant
/// subspace of the selected eigenvalues.
pub fn reorder_schur(q: &mut CMat, t: &mut CMat, select: impl Fn(Complex64) -> bool) -> usize {
    let n = t.nrows();
    let mut head = 0;
    for k in 0..n {
        if select(t[(k, k)]) {
            for j in (head..k).rev() {
                swap_adjacent(q, t, j);
            }
            head += 1;
        }
    }
    head
}

/// Eigenvalues (ascending) of the Hermitian part of `a`.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let e = SymmetricEigen::new(hermitian_part(a));
    let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Smallest eigenvalue of a Hermitian matrix with its eigenvector.
pub fn hermitian_min_eig(a: &CMat) -> (f64, CVec) {
    let e = SymmetricEigen::new(hermitian_part(a));
    let (idx, val) = e
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, v)| (i, *v))
        .expect("non-empty matrix");
    (val, e.eigenvectors.column(idx).into_owned())
}

pub fn symmetric_min_eig(a: &RMat) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn singular_values<M: ToComplex>(a: &M) -> Vec<f64> {
    let a = a.to_complex();
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(a, false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Smallest singular value of a tall (or square) matrix with the matching
/// right singular vector. Wide inputs are padded with zero rows so the
/// returned vector always spans the numerical null direction.
pub fn min_singular_pair(a: &CMat) -> (f64, CVec) {
    let (r, c) = a.shape();
    let padded = if r < c {
        let mut p = CMat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("requested V");
    let (idx, val) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, v)| (i, *v))
        .expect("non-empty matrix");
    let v = v_t.row(idx).adjoint();
    (val, v)
}

pub fn condition_number(a: &CMat) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis (columns) of the numerical null space of a real
/// matrix, using a relative singular-value cutoff.
pub fn null_space(a: &RMat, rel_tol: f64) -> RMat {
    let (r, c) = a.shape();
    let padded = if r < c {
        let mut p = RMat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    let cols: Vec<RVec> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= cut)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        RMat::zeros(c, 0)
    } else {
        RMat::from_columns(&cols)
    }
}

/// Solves the complex Lyapunov equation `a x + x a† + q = 0` by
/// Bartels–Stewart on the complex Schur form of `a`.
///
/// Requires `λi(a) + conj(λj(a)) ≠ 0` for all pairs, which holds whenever
/// `a` is Hurwitz.
pub fn lyapunov_complex(a: &CMat, q: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov: A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let (u, t) = schur(a)?;
    let qt = u.adjoint() * q * &u;
    let mut y = CMat::zeros(n, n);
    for j in (0..n).rev() {
        let mut rhs: CVec = -qt.column(j);
        for k in (j + 1)..n {
            let coef = t[(j, k)].conj();
            rhs -= y.column(k) * coef;
        }
        let shift = t[(j, j)].conj();
        // Back substitution with (T + shift I).
        let mut col = CVec::zeros(n);
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for l in (i + 1)..n {
                acc -= t[(i, l)] * col[l];
            }
            let d = t[(i, i)] + shift;
            if d.norm() == 0.0 {
                return Err(Error::UnstableDrift { max_re: 0.0 });
            }
            col[i] = acc / d;
        }
        y.set_column(j, &col);
    }
    Ok(&u * y * u.adjoint())
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        CMat::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            c(a, b)
        })
    }

    #[test]
    fn reordered_schur_stays_a_factorization() {
        let a = sample(7, 3);
        let (mut q, mut t) = schur(&a).unwrap();
        let k = reorder_schur(&mut q, &mut t, |z| z.re < 0.0);
        assert!((&q * &t * q.adjoint() - &a).norm() < 1e-12);
        assert!((q.adjoint() * &q - CMat::identity(7, 7)).norm() < 1e-12);
        for i in 0..7 {
            for j in 0..i {
                assert!(t[(i, j)].norm() < 1e-14);
            }
            assert_eq!(t[(i, i)].re < 0.0, i < k);
        }
    }

    #[test]
    fn lyapunov_residual() {
        let mut a = sample(5, 11);
        for i in 0..5 {
            a[(i, i)] -= c(3.0, 0.0);
        }
        let q = sample(5, 5);
        let q = &q * q.adjoint();
        let x = lyapunov_complex(&a, &q).unwrap();
        let r = &a * &x + &x * a.adjoint() + &q;
        assert!(r.norm() < 1e-12 * q.norm());
    }

    #[test]
    fn min_singular_pair_finds_null_direction() {
        let a = RMat::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0]).to_complex();
        let (s, v) = min_singular_pair(&a);
        assert!(s < 1e-14);
        assert!((&a * v).norm() < 1e-14);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = RMat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&a, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-14);
    }

    #[test]
    fn real_input_that_stalls_plain_qr() {
        // Column-major Hamiltonian of a two-mode measured system on which a
        // single-shift sweep without the imaginary retry fails to converge.
        let data = [
            -0.733792296753927, -0.07533057049978942, -0.4899001597352307, 0.23281950112361594,
            -0.15928543734005196, -0.08762067357196364, -0.0016369751926456795, -0.2918441849844628,
            0.05927401717317746, 0.5101966524038594, 0.23281950112361594, -0.7324032192997022,
            -0.08762067357196364, -0.05081919713606212, 0.013461836536258093, -0.1496531050693185,
            -0.08954284519365208, 0.6433710632133145, 0.733792296753927, -0.05927401717317743,
            -0.0016369751926456795, 0.013461836536258093, -0.07873913095739256, -0.06266877924332352,
            0.6433710632133146, -0.40834229749691353, 0.07533057049978942, -0.5101966524038594,
            -0.2918441849844628, -0.1496531050693185, -0.06266877924332352, -0.5799474493243012,
            -0.31495652382957023, -0.2506751169732941, 0.006547900770582718, -0.05384734614503237,
            0.733792296753927, -0.05927401717317746, 0.08954284519365208, -0.6433710632133146,
            -0.2506751169732941, -2.319789797297205, 1.1673767399378512, 0.598612420277274,
            0.07533057049978942, -0.5101966524038594, -0.6433710632133145, 0.40834229749691353,
            0.006547900770582718, 1.1673767399378512, -0.6371417493602078, -0.35048269428785456,
            0.4899001597352307, -0.23281950112361594, -0.733792296753927, -0.07533057049978942,
            -0.05384734614503237, 0.598612420277274, -0.35048269428785456, -0.2032767885442485,
            -0.23281950112361594, 0.7324032192997022, 0.05927401717317743, 0.5101966524038594,
        ];
        let h = RMat::from_column_slice(8, 8, &data).to_complex();
        let (q, t) = schur(&h).unwrap();
        assert!((&q * &t * q.adjoint() - &h).norm() < 1e-12 * h.norm());
        assert!((q.adjoint() * &q - CMat::identity(8, 8)).norm() < 1e-12);
    }
}
