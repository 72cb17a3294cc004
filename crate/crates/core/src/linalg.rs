//! Dense complex linear algebra shared by every other module.
//!
//! Matrices are `nalgebra` dynamic matrices of `Complex64`. Multi-qubit
//! operators use the convention that qubit 0 is the most significant bit of
//! a basis-state index (the leftmost label of a ket string).

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type Mat2 = Matrix2<C64>;

pub const UNITARY_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Kronecker product `a ⊗ b`; `a` acts on the more significant qubits.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Max-abs entry deviation of `m† m` from the identity.
pub fn unitarity_error(m: &CMat) -> f64 {
    let n = m.nrows();
    let prod = m.adjoint() * m;
    max_abs(&(prod - CMat::identity(n, n)))
}

/// `1 - |Tr(a† b)| / dim`, zero iff `a` and `b` agree up to a global phase.
pub fn phase_distance(a: &CMat, b: &CMat) -> f64 {
    let dim = a.nrows() as f64;
    let tr = (a.adjoint() * b).trace();
    (1.0 - tr.norm() / dim).max(0.0)
}

/// Max-abs entry difference between `a` and `b` after removing the global
/// phase that best aligns them.
pub fn aligned_max_diff(a: &CMat, b: &CMat) -> f64 {
    let tr = (b.adjoint() * a).trace();
    let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { C64::new(1.0, 0.0) };
    max_abs(&(a - b * phase))
}

pub fn aligned_max_diff2(a: &Mat2, b: &Mat2) -> f64 {
    let tr = (b.adjoint() * a).trace();
    let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { C64::new(1.0, 0.0) };
    (a - b * phase).iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn to_dyn(m: &Mat2) -> CMat {
    CMat::from_fn(2, 2, |i, j| m[(i, j)])
}

pub fn to_mat2(m: &CMat) -> Mat2 {
    Mat2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(m.nrows(), idx.len(), |r, k| eig.eigenvectors[(r, idx[k])]);
    (vals, vecs)
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn hermitian_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let n = m.nrows();
    let mut d = CMat::zeros(n, n);
    for (i, v) in vals.iter().enumerate() {
        d[(i, i)] = C64::new(v.max(0.0).sqrt(), 0.0);
    }
    &vecs * d * vecs.adjoint()
}

/// A square unitary matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unitary(CMat);

impl Unitary {
    /// Checks unitarity to within `1e-12` (max-abs entry norm).
    pub fn new(m: CMat) -> Result<Self> {
        Self::with_tolerance(m, UNITARY_TOL)
    }

    pub fn with_tolerance(m: CMat, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let err = unitarity_error(&m);
        if err > tol {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix known to be unitary by construction.
    pub fn from_matrix_unchecked(m: CMat) -> Self {
        Self(m)
    }

    pub fn from_mat2(m: &Mat2) -> Self {
        Self(to_dyn(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMat::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        let d = self.dim();
        d.is_power_of_two().then(|| d.trailing_zeros() as usize)
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn to_mat2(&self) -> Option<Mat2> {
        (self.dim() == 2).then(|| to_mat2(&self.0))
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Matrix product `self · rhs` (rhs acts first).
    pub fn compose(&self, rhs: &Unitary) -> Self {
        Self(&self.0 * &rhs.0)
    }

    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(&self.0)
    }

    pub fn phase_distance(&self, other: &Unitary) -> f64 {
        phase_distance(&self.0, &other.0)
    }

    pub fn aligned_max_diff(&self, other: &Unitary) -> f64 {
        aligned_max_diff(&self.0, &other.0)
    }
}

/// Single-qubit operator `op` acting on qubit `k` of `n`, identity elsewhere.
pub fn embed(op: &CMat, k: usize, n: usize) -> CMat {
    let left = CMat::identity(1 << k, 1 << k);
    let right = CMat::identity(1 << (n - 1 - k), 1 << (n - 1 - k));
    kron(&kron(&left, op), &right)
}

/// `a ⊗ b` for unitaries.
pub fn tensor(a: &Unitary, b: &Unitary) -> Unitary {
    Unitary(kron(a.matrix(), b.matrix()))
}

/// Tensor product of a list of unitaries, first element most significant.
pub fn tensor_all<'a, I: IntoIterator<Item = &'a Unitary>>(ops: I) -> Unitary {
    ops.into_iter().fold(Unitary::identity(1), |acc, u| tensor(&acc, u))
}
