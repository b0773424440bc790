//! Dense complex linear algebra helpers: Hermitian operators, Kronecker
//! products, and sorted eigendecompositions.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative Frobenius tolerance for the hermiticity invariant.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Kronecker product of two complex matrices.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Identity matrix of dimension `n`.
pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Dense Hermitian operator with dimension metadata. Entries are in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    mat: CMatrix,
}

impl HermitianOperator {
    /// Wraps a matrix, enforcing squareness and hermiticity within
    /// [`HERMITICITY_TOL`] (relative Frobenius norm).
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidArgument("operator matrix must be square".into()));
        }
        let norm = mat.norm();
        let dev = (&mat - mat.adjoint()).norm();
        let rel = if norm > 0.0 { dev / norm } else { dev };
        if rel > HERMITICITY_TOL {
            return Err(Error::NonHermitian { deviation: rel });
        }
        Ok(HermitianOperator { dim: mat.nrows(), mat })
    }

    /// Wraps a matrix known to be Hermitian by construction, symmetrizing
    /// away floating-point remainders.
    pub fn from_parts(mat: CMatrix) -> Self {
        let sym = (&mat + mat.adjoint()).scale(0.5);
        HermitianOperator { dim: sym.nrows(), mat: sym }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Eigenvalues (ascending) and matching eigenvector columns.
    pub fn eigh(&self) -> (DVector<f64>, CMatrix) {
        eigh_sorted(&self.mat)
    }
}

impl core::ops::Add for HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim, rhs.dim, "operator dimensions must match");
        HermitianOperator { dim: self.dim, mat: self.mat + rhs.mat }
    }
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted
/// ascending and eigenvectors as matching columns.
pub fn eigh_sorted(mat: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = mat.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Propagator exp(-i 2π H t) from a precomputed eigendecomposition of H
/// (H in MHz, t in µs).
pub fn propagator(evals: &DVector<f64>, evecs: &CMatrix, t_us: f64) -> CMatrix {
    use num_traits::Float;
    let n = evals.len();
    // V diag(e^{-i 2π λ t}) V†
    let mut scaled = evecs.clone();
    for k in 0..n {
        let ph = -core::f64::consts::TAU * evals[k] * t_us;
        let p = C64::new(ph.cos(), ph.sin());
        for i in 0..n {
            scaled[(i, k)] *= p;
        }
    }
    &scaled * evecs.adjoint()
}

/// Squared overlap |<a|b>|² of two state vectors.
pub fn overlap2(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm_sqr()
}

/// Kronecker product of two state vectors.
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let (na, nb) = (a.len(), b.len());
    let mut out = CVector::zeros(na * nb);
    for i in 0..na {
        for j in 0..nb {
            out[i * nb + j] = a[i] * b[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let re = ((i * 7 + j * 13) % 17) as f64 / 17.0;
                let im = if i == j { 0.0 } else { ((i * 3 + j * 5) % 11) as f64 / 11.0 };
                m[(i, j)] = C64::new(re, im);
                m[(j, i)] = C64::new(re, -im);
            }
        }
        m
    }

    #[test]
    fn hermitian_check_rejects_asymmetric() {
        let mut m = test_matrix(4);
        m[(0, 1)] += C64::new(1e-3, 0.0);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn eigh_sorted_ascending_and_reconstructs() {
        let m = test_matrix(12);
        let (vals, vecs) = eigh_sorted(&m);
        for k in 1..vals.len() {
            assert!(vals[k] >= vals[k - 1]);
        }
        let d = CMatrix::from_diagonal(&vals.map(|x| C64::new(x, 0.0)));
        let rec = &vecs * d * vecs.adjoint();
        assert!((rec - m).norm() < 1e-10);
    }

    #[test]
    fn propagator_is_unitary() {
        let m = test_matrix(8);
        let (vals, vecs) = eigh_sorted(&m);
        let u = propagator(&vals, &vecs, 0.37);
        let id = &u * u.adjoint();
        assert!((id - eye(8)).norm() < 1e-12);
    }

    #[test]
    fn kron_dimensions() {
        let a = test_matrix(3);
        let b = test_matrix(4);
        assert_eq!(kron(&a, &b).nrows(), 12);
    }
}
