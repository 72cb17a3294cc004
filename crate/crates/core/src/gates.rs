//! Standard single- and two-qubit gate matrices.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::linalg::{c, CMat, Mat2, Unitary, C64};

pub fn identity() -> Mat2 {
    Mat2::identity()
}

pub fn x() -> Mat2 {
    Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn y() -> Mat2 {
    Mat2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn z() -> Mat2 {
    Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

pub fn h() -> Mat2 {
    let s = FRAC_1_SQRT_2;
    Mat2::new(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0))
}

pub fn s() -> Mat2 {
    Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0))
}

pub fn t() -> Mat2 {
    Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, std::f64::consts::FRAC_PI_4))
}

/// Equatorial rotation `exp(-i θ/2 (X cos φ + Y sin φ))`.
pub fn r_phi(theta: f64, phi: f64) -> Mat2 {
    let (sn, cs) = (theta / 2.0).sin_cos();
    let off = c(0.0, -sn);
    Mat2::new(c(cs, 0.0), off * C64::from_polar(1.0, -phi), off * C64::from_polar(1.0, phi), c(cs, 0.0))
}

/// `exp(-i α/2 Z)`.
pub fn rz(alpha: f64) -> Mat2 {
    Mat2::new(C64::from_polar(1.0, -alpha / 2.0), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, alpha / 2.0))
}

pub fn rx(theta: f64) -> Mat2 {
    r_phi(theta, 0.0)
}

pub fn ry(theta: f64) -> Mat2 {
    r_phi(theta, std::f64::consts::FRAC_PI_2)
}

/// Rotation by `angle` about the Bloch unit vector `axis`.
pub fn rotation(axis: [f64; 3], angle: f64) -> Mat2 {
    let (sn, cs) = (angle / 2.0).sin_cos();
    let [nx, ny, nz] = axis;
    Mat2::new(c(cs, -sn * nz), c(-sn * ny, -sn * nx), c(sn * ny, -sn * nx), c(cs, sn * nz))
}

/// CNOT on two qubits with the given control (0 = most significant).
pub fn cnot(control: usize, target: usize) -> Unitary {
    assert!(control < 2 && target < 2 && control != target);
    let mut m = CMat::zeros(4, 4);
    for idx in 0..4usize {
        let cbit = (idx >> (1 - control)) & 1;
        let out = if cbit == 1 { idx ^ (1 << (1 - target)) } else { idx };
        m[(out, idx)] = c(1.0, 0.0);
    }
    Unitary::from_matrix_unchecked(m)
}
