//! Dense complex Hermitian matrices and the spectral functions built on them.
//!
//! Every matrix function here (exponential, inverse square root, Gibbs
//! normalisation) goes through a Hermitian eigendecomposition, so outputs are
//! Hermitian by construction and positive-definite whenever the scalar
//! function is positive.

use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;

const EIGEN_EPS: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Tolerance below which negative eigenvalues of a density matrix are
/// treated as roundoff and clamped to zero.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

/// Square complex matrix equal to its own conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

/// Eigendecomposition `A = U diag(values) U†` with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    /// Rebuilds `U diag(f(λ)) U†`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let w = f(self.values[j]);
            scaled.column_mut(j).scale_mut(w);
        }
        HermitianMatrix::symmetrized(&scaled * self.vectors.adjoint())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Cyclic Jacobi eigensolver for a Hermitian matrix; eigenvalues unsorted.
fn jacobi_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = CMatrix::identity(n, n);
    let frob2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let target = (EIGEN_EPS * EIGEN_EPS) * frob2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a[(p, q)].norm_sqr();
            }
        }
        if off <= target || off == 0.0 {
            let values = (0..n).map(|i| a[(i, i)].re).collect();
            return Ok((values, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]].
                let g00 = C64::new(c, 0.0);
                let g01 = C64::new(s, 0.0);
                let g10 = -phase.conj() * s;
                let g11 = phase.conj() * c;
                for k in 0..n {
                    let (x, y) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = x * g00 + y * g10;
                    a[(k, q)] = x * g01 + y * g11;
                }
                for k in 0..n {
                    let (x, y) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = g00.conj() * x + g10.conj() * y;
                    a[(q, k)] = g01.conj() * x + g11.conj() * y;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let (x, y) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = x * g00 + y * g10;
                    v[(k, q)] = x * g01 + y * g11;
                }
            }
        }
    }
    Err(Error::InvalidInput("eigendecomposition did not converge".into()))
}

impl HermitianMatrix {
    /// Builds a Hermitian matrix from `m`, replacing it by `(m + m†)/2`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            out[(i, i)] = C64::new(out[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let a = out[(i, j)];
                let b = out[(j, i)].conj();
                let avg = (a + b) * 0.5;
                out[(i, j)] = avg;
                out[(j, i)] = avg.conj();
            }
        }
        HermitianMatrix(out)
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(CMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        HermitianMatrix(m)
    }

    /// `B B†` for an arbitrary (possibly rectangular) `B`.
    pub fn gram(b: &CMatrix) -> Self {
        Self::symmetrized(b * b.adjoint())
    }

    /// `B A B†`, the congruence of `self` by `B`.
    pub fn congruence(&self, b: &CMatrix) -> Self {
        Self::symmetrized(b * &self.0 * b.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Real inner product `Re tr(A B)`; exact for Hermitian arguments.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(other.0.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(self.0.map(|z| z * s))
    }

    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        (&self.0 - &other.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn eigh(&self) -> Result<Eigh> {
        let n = self.dim();
        if n == 0 {
            return Ok(Eigh {
                values: DVector::zeros(0),
                vectors: CMatrix::zeros(0, 0),
            });
        }
        if !self.is_finite() {
            return Err(Error::InvalidInput(
                "eigendecomposition of a non-finite matrix".into(),
            ));
        }
        if n == 1 {
            return Ok(Eigh {
                values: DVector::from_element(1, self.0[(0, 0)].re),
                vectors: CMatrix::identity(1, 1),
            });
        }
        let (vals, vecs) = jacobi_eigen(&self.0)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| vals[i]));
        let mut vectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &vecs.column(src));
        }
        Ok(Eigh { values, vectors })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.values.iter().copied().collect())
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> Result<f64> {
        let e = self.eigh()?;
        Ok(e.values.iter().map(|v| v.abs()).fold(0.0, f64::max))
    }

    /// Sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.eigh()?.values.iter().map(|v| v.abs()).sum())
    }

    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(self.eigh()?.reconstruct(f))
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

impl AddAssign<&HermitianMatrix> for HermitianMatrix {
    fn add_assign(&mut self, rhs: &HermitianMatrix) {
        self.0 += &rhs.0;
    }
}

/// Unit-trace positive-semidefinite matrix (an element of the spectrahedron).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    /// Validates trace and spectrum. Eigenvalues in `[-1e-10, 0)` are clamped
    /// to zero and the result renormalised.
    pub fn new(base: HermitianMatrix) -> Result<Self> {
        let tr = base.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "density matrix must have unit trace, got {tr}"
            )));
        }
        let eig = base.eigh()?;
        let min = eig.min();
        if min < -PSD_CLAMP_TOL {
            return Err(Error::InvalidInput(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        if min < 0.0 {
            let clamped: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
            return Ok(DensityMatrix(eig.reconstruct(|v| v.max(0.0) / clamped)));
        }
        Ok(DensityMatrix(base))
    }

    /// `I/m`, the maximally mixed state.
    pub fn maximally_mixed(m: usize) -> Self {
        DensityMatrix(HermitianMatrix::identity(m).scale(1.0 / m as f64))
    }

    /// Normalises a nonzero PSD matrix to unit trace.
    pub fn normalized(psd: &HermitianMatrix) -> Result<Self> {
        let tr = psd.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidInput(format!(
                "cannot normalise matrix with trace {tr}"
            )));
        }
        let scaled = psd.scale(1.0 / tr);
        let eig = scaled.eigh()?;
        let min = eig.min();
        if min < -PSD_CLAMP_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not positive-semidefinite (eigenvalue {min:e})"
            )));
        }
        Ok(DensityMatrix(scaled))
    }

    pub(crate) fn from_trusted(base: HermitianMatrix) -> Self {
        DensityMatrix(base)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &CMatrix {
        self.0.as_matrix()
    }
}

/// Matrix exponential of a Hermitian matrix.
pub fn expm(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    a.map_spectrum(f64::exp)
}

/// Inverse square root of a positive-definite matrix.
pub fn inv_sqrtm(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = a.eigh()?;
    let (min, max) = (eig.min(), eig.max());
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::Singular {
            min_eigenvalue: min,
        });
    }
    Ok(eig.reconstruct(|v| 1.0 / v.sqrt()))
}

/// Orthonormal basis of the orthogonal complement of `range(u)`.
///
/// `u` is `n × r` with full column rank and `r < n`; an empty `u` (`r = 0`)
/// yields the identity. The basis is read off the unit eigenspace of the
/// projector `I − U (U†U)⁻¹ U†`.
pub fn nullspace_basis(u: &CMatrix) -> Result<CMatrix> {
    let (n, r) = u.shape();
    if r == 0 {
        return Ok(CMatrix::identity(n, n));
    }
    if r >= n {
        return Err(Error::InvalidConstraint(format!(
            "null-shaping matrix is {n}x{r}; it must leave at least one open dimension"
        )));
    }
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidConstraint(
            "null-shaping matrix has non-finite entries".into(),
        ));
    }
    let gram = HermitianMatrix::gram(&u.adjoint());
    let geig = gram.eigh()?;
    if !(geig.max() > 0.0) || geig.min() <= 1e-10 * geig.max() {
        return Err(Error::InvalidConstraint(
            "null-shaping matrix is rank deficient".into(),
        ));
    }
    // Orthonormal basis of range(U) from the Gram eigendecomposition.
    let mut range = u * &geig.vectors;
    for j in 0..r {
        let s = 1.0 / geig.values[j].sqrt();
        range.column_mut(j).scale_mut(s);
    }
    let projector = HermitianMatrix::symmetrized(CMatrix::identity(n, n) - &range * range.adjoint());
    let peig = projector.eigh()?;
    // Eigenvalues are ~0 (r of them) then ~1 (n - r of them).
    let mut basis = CMatrix::zeros(n, n - r);
    for j in 0..(n - r) {
        basis.set_column(j, &peig.vectors.column(r + j));
    }
    Ok(basis)
}
