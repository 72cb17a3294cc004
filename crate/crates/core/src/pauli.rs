//! Pauli strings and expansion of small operators in the Pauli basis.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates;
use crate::linalg::{c, kron, to_dyn, CMat, Unitary, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMat {
        to_dyn(&match self {
            Pauli::I => gates::identity(),
            Pauli::X => gates::x(),
            Pauli::Y => gates::y(),
            Pauli::Z => gates::z(),
        })
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    /// Parses labels like `"ZX"`; the first character acts on qubit 0.
    pub fn parse(label: &str) -> Option<Self> {
        label
            .chars()
            .map(|ch| match ch {
                'I' => Some(Pauli::I),
                'X' => Some(Pauli::X),
                'Y' => Some(Pauli::Y),
                'Z' => Some(Pauli::Z),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(PauliString)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn matrix(&self) -> CMat {
        self.0.iter().fold(CMat::identity(1, 1), |acc, p| kron(&acc, &p.matrix()))
    }

    /// Position in the lexicographic ordering I < X < Y < Z, qubit 0 most significant.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, p| acc * 4 + *p as usize)
    }

    pub fn from_index(mut idx: usize, n: usize) -> Self {
        let mut v = vec![Pauli::I; n];
        for slot in v.iter_mut().rev() {
            *slot = Pauli::ALL[idx % 4];
            idx /= 4;
        }
        PauliString(v)
    }

    pub fn all(n: usize) -> Vec<PauliString> {
        (0..4usize.pow(n as u32)).map(|i| Self::from_index(i, n)).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

/// Coefficients `a_P = Tr(P† U)/dim` for every Pauli string, in `PauliString::all` order.
pub fn pauli_expand(u: &Unitary) -> Result<Vec<(PauliString, C64)>> {
    pauli_expand_matrix(u.matrix())
}

pub fn pauli_expand_matrix(m: &CMat) -> Result<Vec<(PauliString, C64)>> {
    let dim = m.nrows();
    let n = match dim {
        2 => 1,
        4 => 2,
        d => return Err(Error::UnsupportedDimension(d)),
    };
    Ok(PauliString::all(n)
        .into_iter()
        .map(|p| {
            let a = (p.matrix().adjoint() * m).trace() / c(dim as f64, 0.0);
            (p, a)
        })
        .collect())
}

/// `Σ a_P P`.
pub fn reconstruct(coeffs: &[(PauliString, C64)]) -> CMat {
    let n = coeffs.first().map_or(0, |(p, _)| p.len());
    let d = 1 << n;
    coeffs.iter().fold(CMat::zeros(d, d), |acc, (p, a)| acc + p.matrix() * *a)
}
