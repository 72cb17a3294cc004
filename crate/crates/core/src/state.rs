//! Pure and mixed states over a few qubits, optionally tensored with one
//! truncated bosonic mode.
//!
//! Basis index layout: `idx = qubit_bits * fock_dim + n`, so the bosonic mode
//! is the least significant factor and qubit 0 is the most significant bit of
//! `qubit_bits`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, max_abs, CMat, Unitary, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Repr {
    Pure(DVector<C64>),
    Density(CMat),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumState {
    n_qubits: usize,
    fock_dim: usize,
    repr: Repr,
}

impl QuantumState {
    /// Computational basis state `|bits⟩`, bit 0 is qubit 0.
    pub fn basis(bits: &[u8]) -> Self {
        let n = bits.len();
        let idx = bits_to_index(bits);
        let mut v = DVector::zeros(1 << n);
        v[idx] = c(1.0, 0.0);
        Self { n_qubits: n, fock_dim: 1, repr: Repr::Pure(v) }
    }

    pub fn zeros(n_qubits: usize) -> Self {
        Self::basis(&vec![0; n_qubits])
    }

    /// `|bits⟩ ⊗ |fock_n⟩` with the mode truncated at `n_max`.
    pub fn with_fock(bits: &[u8], n_max: usize, fock_n: usize) -> Self {
        let n = bits.len();
        let fd = n_max + 1;
        let mut v = DVector::zeros((1 << n) * fd);
        v[bits_to_index(bits) * fd + fock_n.min(n_max)] = c(1.0, 0.0);
        Self { n_qubits: n, fock_dim: fd, repr: Repr::Pure(v) }
    }

    pub fn from_vector(n_qubits: usize, v: DVector<C64>) -> Result<Self> {
        if v.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch { expected: 1 << n_qubits, got: v.len() });
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("state vector norm {norm} is not 1")));
        }
        Ok(Self { n_qubits, fock_dim: 1, repr: Repr::Pure(v) })
    }

    /// Density operator over qubits only; checked Hermitian, unit trace and PSD to 1e-10.
    pub fn from_density(n_qubits: usize, rho: CMat) -> Result<Self> {
        let d = 1 << n_qubits;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: rho.nrows() });
        }
        if max_abs(&(&rho - rho.adjoint())) > 1e-10 {
            return Err(Error::Config("density operator is not Hermitian".into()));
        }
        if (rho.trace().re - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("density operator trace {}", rho.trace().re)));
        }
        let (vals, _) = hermitian_eigen(&rho);
        if vals[0] < -1e-10 {
            return Err(Error::Config(format!("density operator has eigenvalue {}", vals[0])));
        }
        Ok(Self { n_qubits, fock_dim: 1, repr: Repr::Density(rho) })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn dim(&self) -> usize {
        (1 << self.n_qubits) * self.fock_dim
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Density(_) => None,
        }
    }

    pub fn density(&self) -> CMat {
        match &self.repr {
            Repr::Pure(v) => v * v.adjoint(),
            Repr::Density(r) => r.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        Self { n_qubits: self.n_qubits, fock_dim: self.fock_dim, repr: Repr::Density(self.density()) }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared(),
            Repr::Density(r) => r.trace().re,
        }
    }

    /// Applies `u` to the listed qubits; `targets[0]` is the most significant
    /// qubit of `u`.
    pub fn apply(&self, u: &Unitary, targets: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_mut(u.matrix(), targets)?;
        Ok(out)
    }

    pub fn apply_mut(&mut self, u: &CMat, targets: &[usize]) -> Result<()> {
        validate_targets(targets, self.n_qubits)?;
        let k = targets.len();
        if u.nrows() != 1 << k || u.ncols() != 1 << k {
            return Err(Error::DimensionMismatch { expected: 1 << k, got: u.nrows() });
        }
        let (n, fd) = (self.n_qubits, self.fock_dim);
        match &mut self.repr {
            Repr::Pure(v) => apply_to_slice(v.as_mut_slice(), n, fd, u, targets),
            Repr::Density(r) => {
                let dim = r.nrows();
                for col in 0..dim {
                    let mut colv = r.column(col).clone_owned();
                    apply_to_slice(colv.as_mut_slice(), n, fd, u, targets);
                    r.set_column(col, &colv);
                }
                let mut a = r.adjoint();
                for col in 0..dim {
                    let mut colv = a.column(col).clone_owned();
                    apply_to_slice(colv.as_mut_slice(), n, fd, u, targets);
                    a.set_column(col, &colv);
                }
                *r = a.adjoint();
            }
        }
        Ok(())
    }

    /// Applies an operator on the full space (qubits ⊗ mode).
    pub fn apply_full(&mut self, u: &CMat) -> Result<()> {
        if u.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.nrows() });
        }
        match &mut self.repr {
            Repr::Pure(v) => *v = u * &*v,
            Repr::Density(r) => *r = u * &*r * u.adjoint(),
        }
        Ok(())
    }

    /// Probabilities of each computational qubit basis state, mode traced out.
    pub fn probabilities(&self) -> Vec<f64> {
        let nb = 1 << self.n_qubits;
        let fd = self.fock_dim;
        let mut p = vec![0.0; nb];
        match &self.repr {
            Repr::Pure(v) => {
                for (i, a) in v.iter().enumerate() {
                    p[i / fd] += a.norm_sqr();
                }
            }
            Repr::Density(r) => {
                for i in 0..r.nrows() {
                    p[i / fd] += r[(i, i)].re;
                }
            }
        }
        p
    }

    /// Probability that qubit `q` reads 1.
    pub fn excitation(&self, q: usize) -> f64 {
        let n = self.n_qubits;
        self.probabilities().iter().enumerate().filter(|(i, _)| (i >> (n - 1 - q)) & 1 == 1).map(|(_, p)| p).sum()
    }

    /// Reduced density operator of the mode alone.
    pub fn mode_density(&self) -> CMat {
        let fd = self.fock_dim;
        let nb = 1 << self.n_qubits;
        let rho = self.density();
        CMat::from_fn(fd, fd, |a, b| (0..nb).map(|q| rho[(q * fd + a, q * fd + b)]).sum())
    }

    /// Reduced density operator of the kept qubits (sorted ascending); any
    /// bosonic mode is traced out.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<CMat> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        validate_targets(keep, self.n_qubits)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let n = self.n_qubits;
        let fd = self.fock_dim;
        let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let kd = 1 << keep.len();
        let rd = (1 << rest.len()) * fd;
        let full_index = |ki: usize, ri: usize| -> usize {
            let mut bits = 0usize;
            for (pos, &q) in keep.iter().enumerate() {
                let b = (ki >> (keep.len() - 1 - pos)) & 1;
                bits |= b << (n - 1 - q);
            }
            let (rq, m) = (ri / fd, ri % fd);
            for (pos, &q) in rest.iter().enumerate() {
                let b = (rq >> (rest.len() - 1 - pos)) & 1;
                bits |= b << (n - 1 - q);
            }
            bits * fd + m
        };
        let mut out = CMat::zeros(kd, kd);
        match &self.repr {
            Repr::Pure(v) => {
                for r in 0..rd {
                    for a in 0..kd {
                        let va = v[full_index(a, r)];
                        if va == c(0.0, 0.0) {
                            continue;
                        }
                        for b in 0..kd {
                            out[(a, b)] += va * v[full_index(b, r)].conj();
                        }
                    }
                }
            }
            Repr::Density(rho) => {
                for r in 0..rd {
                    for a in 0..kd {
                        for b in 0..kd {
                            out[(a, b)] += rho[(full_index(a, r), full_index(b, r))];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `⟨ψ|ρ|ψ⟩` against a pure qubit-only reference.
    pub fn fidelity_pure(&self, psi: &DVector<C64>) -> f64 {
        match &self.repr {
            Repr::Pure(v) => psi.dotc(v).norm_sqr(),
            Repr::Density(r) => (psi.adjoint() * r * psi)[(0, 0)].re,
        }
    }
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

pub fn index_to_bits(idx: usize, n: usize) -> Vec<u8> {
    (0..n).map(|q| ((idx >> (n - 1 - q)) & 1) as u8).collect()
}

/// Ket label such as `"0110"`.
pub fn basis_label(idx: usize, n: usize) -> String {
    index_to_bits(idx, n).iter().map(|b| char::from(b'0' + b)).collect()
}

fn validate_targets(targets: &[usize], n: usize) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::QubitOutOfRange { index: t, n_qubits: n });
        }
        if targets[..i].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    Ok(())
}

fn apply_to_slice(v: &mut [C64], n: usize, fd: usize, u: &CMat, targets: &[usize]) {
    let k = targets.len();
    let sub = 1 << k;
    // Stride of each target bit in the full index.
    let strides: Vec<usize> = targets.iter().map(|&q| (1usize << (n - 1 - q)) * fd).collect();
    let offsets: Vec<usize> =
        (0..sub).map(|s| (0..k).filter(|&j| (s >> (k - 1 - j)) & 1 == 1).map(|j| strides[j]).sum()).collect();
    let mask: usize = strides.iter().sum();
    let mut buf = vec![c(0.0, 0.0); sub];
    for base in 0..v.len() {
        if base & mask != 0 {
            continue;
        }
        for s in 0..sub {
            buf[s] = v[base + offsets[s]];
        }
        for r in 0..sub {
            let mut acc = c(0.0, 0.0);
            for s in 0..sub {
                acc += u[(r, s)] * buf[s];
            }
            v[base + offsets[r]] = acc;
        }
    }
}
