//! Dense complex linear algebra used by every other module.
//!
//! Operators are small dense matrices. Hermitian and unitary operators are
//! newtypes that can only be built through validation, so downstream code can
//! rely on the property without re-checking it.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative hermiticity tolerance: `‖M − M*‖ ≤ HERMITIAN_RTOL · ‖M‖`.
pub const HERMITIAN_RTOL: f64 = 1e-12;
/// Absolute unitarity tolerance: `‖M*M − I‖ ≤ UNITARY_TOL`.
pub const UNITARY_TOL: f64 = 1e-10;

const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Hermitian,
    Unitary,
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(n, n)
}

/// Builds a matrix from real entries, row-major.
pub fn real_matrix(n: usize, entries: &[f64]) -> ComplexMatrix {
    assert_eq!(entries.len(), n * n, "expected {} entries", n * n);
    ComplexMatrix::from_fn(n, n, |i, j| Complex64::new(entries[i * n + j], 0.0))
}

pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Pauli matrices `(σx, σy, σz)`.
pub fn pauli() -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    (
        ComplexMatrix::from_row_slice(2, 2, &[o, one, one, o]),
        ComplexMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        ComplexMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
    )
}

fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension("matrix dimension must be at least 1".into()));
    }
    Ok(m.nrows())
}

fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Invalid("matrix has non-finite entries".into()))
    }
}

fn ensure_same_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Spectral norm (largest singular value).
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    operator_norm(&(m - m.adjoint()))
}

pub fn unitary_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    operator_norm(&(m.adjoint() * m - identity(n)))
}

/// Checks whether `m` is Hermitian or unitary within `tol` (absolute, on the defect norm).
pub fn validate(m: &ComplexMatrix, kind: OperatorKind, tol: f64) -> Result<bool> {
    ensure_square(m)?;
    ensure_finite(m)?;
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let defect = match kind {
        OperatorKind::Hermitian => hermitian_defect(m),
        OperatorKind::Unitary => unitary_defect(m),
    };
    Ok(defect <= tol)
}

/// `AB − BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_same_dim(a, b)?;
    Ok(a * b - b * a)
}

/// Norm of `[a, b]` relative to `max(1, ‖a‖‖b‖)`.
pub fn relative_commutator_norm(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let c = commutator(a, b)?;
    let scale = (operator_norm(a) * operator_norm(b)).max(1.0);
    Ok(operator_norm(&c) / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(ComplexMatrix);

impl HermitianOperator {
    /// Validates with the default relative tolerance.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let tol = HERMITIAN_RTOL * operator_norm(&m).max(f64::MIN_POSITIVE);
        Self::with_tol(m, tol)
    }

    /// Validates with an absolute tolerance on `‖M − M*‖`, then symmetrizes.
    pub fn with_tol(m: ComplexMatrix, tol: f64) -> Result<Self> {
        ensure_square(&m)?;
        ensure_finite(&m)?;
        let defect = hermitian_defect(&m);
        if defect > tol {
            return Err(Error::NotHermitian { defect, tol });
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: ComplexMatrix) -> Self {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        HermitianOperator(h)
    }

    pub fn from_real_diag(values: &[f64]) -> Self {
        HermitianOperator(diag_real(values))
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_real_diag(&[value])
    }

    pub fn zero(n: usize) -> Self {
        HermitianOperator(zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        HermitianOperator(&self.0 * Complex64::new(s, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(ComplexMatrix);

impl UnitaryOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tol(m, UNITARY_TOL)
    }

    pub fn with_tol(m: ComplexMatrix, tol: f64) -> Result<Self> {
        ensure_square(&m)?;
        ensure_finite(&m)?;
        let defect = unitary_defect(&m);
        if defect > tol {
            return Err(Error::NotUnitary { defect, tol });
        }
        Ok(UnitaryOperator(m))
    }

    pub fn identity(n: usize) -> Self {
        UnitaryOperator(identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// Inverse, which for a unitary is the adjoint.
    pub fn inverse(&self) -> Self {
        UnitaryOperator(self.0.adjoint())
    }

    pub fn compose(&self, other: &UnitaryOperator) -> Self {
        UnitaryOperator(&self.0 * &other.0)
    }

    pub fn defect(&self) -> f64 {
        unitary_defect(&self.0)
    }
}

fn eigh(h: &ComplexMatrix) -> Result<SymmetricEigen<Complex64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(h.clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::Numerical(format!(
            "hermitian eigendecomposition of a {}x{} matrix did not converge (norm {:.3e}, hermitian defect {:.3e})",
            h.nrows(),
            h.ncols(),
            operator_norm(h),
            hermitian_defect(h)
        ))
    })
}

/// `exp(i s H)` through the eigendecomposition of `H`.
pub fn matexp_skew(h: &HermitianOperator, s: f64) -> Result<UnitaryOperator> {
    let n = h.dim();
    if s == 0.0 || h.is_zero() {
        return Ok(UnitaryOperator::identity(n));
    }
    if n == 1 {
        let lambda = h.0[(0, 0)].re;
        return Ok(UnitaryOperator(ComplexMatrix::from_element(
            1,
            1,
            Complex64::cis(s * lambda),
        )));
    }
    let eig = eigh(&h.0)?;
    let phases = eig.eigenvalues.map(|lambda| Complex64::cis(s * lambda));
    let q = &eig.eigenvectors;
    let scaled = ComplexMatrix::from_fn(n, n, |i, j| q[(i, j)] * phases[j]);
    Ok(UnitaryOperator(scaled * q.adjoint()))
}

/// Exponential of a general square matrix.
///
/// Skew-Hermitian arguments go through [`matexp_skew`] so the result is
/// unitary to rounding; anything else uses Padé scaling and squaring.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a)?;
    ensure_finite(a)?;
    let scale = operator_norm(a);
    if scale == 0.0 {
        return Ok(identity(a.nrows()));
    }
    let skew_defect = operator_norm(&(a + a.adjoint()));
    if skew_defect <= 1e-14 * scale {
        // a = i H with H = -i a
        let h = HermitianOperator::symmetrized(a * Complex64::new(0.0, -1.0));
        return matexp_skew(&h, 1.0).map(UnitaryOperator::into_matrix);
    }
    Ok(a.exp())
}

/// Random Hermitian matrix with entries drawn uniformly, rescaled to spectral norm `norm`.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, norm: f64, rng: &mut R) -> HermitianOperator {
    let raw = ComplexMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let h = HermitianOperator::symmetrized(raw);
    let current = h.norm();
    if current == 0.0 {
        return h;
    }
    h.scaled(norm / current)
}

/// Random unitary `exp(iH)` with `‖H‖ = spread`.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, spread: f64, rng: &mut R) -> UnitaryOperator {
    let h = random_hermitian(n, spread, rng);
    matexp_skew(&h, 1.0).expect("eigendecomposition of a random hermitian matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Taylor series with scaling and squaring; independent of the eigen path.
    fn expm_taylor(a: &ComplexMatrix) -> ComplexMatrix {
        let n = a.nrows();
        let norm = a.norm();
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let scaled = a * c(0.5f64.powi(squarings as i32), 0.0);
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..=30 {
            term = &term * &scaled * c(1.0 / k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&identity(3), OperatorKind::Unitary, 1e-12).unwrap());
        let d = diag_real(&[1.0, 2.0]);
        assert!(validate(&d, OperatorKind::Hermitian, 1e-12).unwrap());
        assert!(!validate(&d, OperatorKind::Unitary, 1e-12).unwrap());
        assert!((unitary_defect(&d) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn validate_rejects_bad_input() {
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(
            validate(&rect, OperatorKind::Hermitian, 1e-12),
            Err(Error::Dimension(_))
        ));
        let mut m = identity(2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(
            validate(&m, OperatorKind::Hermitian, 1e-12),
            Err(Error::Invalid(_))
        ));
        assert!(validate(&identity(2), OperatorKind::Hermitian, 0.0).is_err());
    }

    #[test]
    fn hermitian_operator_rejects_non_hermitian() {
        let m = real_matrix(2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn matexp_examples() {
        let zero = HermitianOperator::zero(3);
        assert_eq!(matexp_skew(&zero, 1.3).unwrap().matrix(), &identity(3));

        let one = HermitianOperator::scalar(1.0);
        let u = matexp_skew(&one, PI).unwrap();
        assert!((u.matrix()[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matexp_matches_scaling_and_squaring() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = random_hermitian(4, 2.0, &mut rng);
            let eig = matexp_skew(&h, 0.7).unwrap();
            let oracle = expm_taylor(&(h.matrix() * c(0.0, 0.7)));
            assert!((eig.matrix() - &oracle).norm() <= 1e-12);
        }
    }

    #[test]
    fn expm_general_matches_taylor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = ComplexMatrix::from_fn(3, 3, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let diff = (expm(&a).unwrap() - expm_taylor(&a)).norm();
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn norm_examples() {
        assert!((operator_norm(&identity(3)) - 1.0).abs() < 1e-14);
        assert!((operator_norm(&diag_real(&[3.0, -4.0])) - 4.0).abs() < 1e-14);
        let nil = real_matrix(2, &[0.0, 2.0, 0.0, 0.0]);
        assert!((operator_norm(&nil) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn commutator_examples() {
        let (sx, sy, sz) = pauli();
        let b = diag_real(&[5.0, -1.0]);
        assert_eq!(commutator(&identity(2), &b).unwrap(), zeros(2));
        let d = commutator(&diag_real(&[1.0, 2.0]), &diag_real(&[3.0, 4.0])).unwrap();
        assert_eq!(d, zeros(2));
        let xy = commutator(&sx, &sy).unwrap();
        assert!((xy - sz * c(0.0, 2.0)).norm() < 1e-15);
        assert!(commutator(&identity(2), &identity(3)).is_err());
    }
}
