//! Equatorial rotations and composite pulse sequences.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::r_phi;
use crate::linalg::Mat2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquatorialPulse {
    pub theta: f64,
    pub phi: f64,
}

impl EquatorialPulse {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn matrix(&self) -> Mat2 {
        r_phi(self.theta, self.phi)
    }

    /// Matrix when the delivered area is scaled by `scale` and the optical
    /// phase is offset by `dphi`.
    pub fn matrix_with(&self, scale: f64, dphi: f64) -> Mat2 {
        r_phi(self.theta * scale, self.phi + dphi)
    }

    /// Number of calibrated π/2 units needed to realise this pulse.
    pub fn quarter_turns(&self) -> usize {
        (self.theta.abs() / FRAC_PI_2).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Bare,
    #[default]
    Pb1,
}

/// Sequence of equatorial pulses in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePulse {
    pub pulses: Vec<EquatorialPulse>,
    pub theta: f64,
    pub phi: f64,
    pub scheme: Scheme,
}

impl CompositePulse {
    pub fn bare(theta: f64, phi: f64) -> Self {
        Self { pulses: vec![EquatorialPulse::new(theta, phi)], theta, phi, scheme: Scheme::Bare }
    }

    pub fn new(scheme: Scheme, theta: f64, phi: f64) -> Result<Self> {
        match scheme {
            Scheme::Bare => Ok(Self::bare(theta, phi)),
            Scheme::Pb1 => pb1(theta, phi),
        }
    }

    /// Net unitary with every component area scaled by `scale` and phase offset `dphi`.
    pub fn unitary_with(&self, scale: f64, dphi: f64) -> Mat2 {
        self.pulses.iter().fold(Mat2::identity(), |acc, p| p.matrix_with(scale, dphi) * acc)
    }

    pub fn unitary(&self) -> Mat2 {
        self.unitary_with(1.0, 0.0)
    }

    pub fn quarter_turns(&self) -> usize {
        self.pulses.iter().map(EquatorialPulse::quarter_turns).sum()
    }

    /// Same sequence with all phases shifted by `dphi`.
    pub fn shifted(&self, dphi: f64) -> Self {
        Self {
            pulses: self.pulses.iter().map(|p| EquatorialPulse::new(p.theta, p.phi + dphi)).collect(),
            theta: self.theta,
            phi: self.phi + dphi,
            scheme: self.scheme,
        }
    }
}

/// Passband sequence `R(2π, φ+φ_P) R(4π, φ−φ_P) R(2π, φ+φ_P)` followed by
/// the target rotation, with `cos φ_P = −θ/(8π)`.
pub fn pb1(theta: f64, phi: f64) -> Result<CompositePulse> {
    if !(theta > 0.0 && theta < 2.0 * PI) {
        return Err(Error::AngleOutOfRange(theta));
    }
    let phi_p = (-theta / (8.0 * PI)).acos();
    let pulses = vec![
        EquatorialPulse::new(2.0 * PI, phi + phi_p),
        EquatorialPulse::new(4.0 * PI, phi - phi_p),
        EquatorialPulse::new(2.0 * PI, phi + phi_p),
        EquatorialPulse::new(theta, phi),
    ];
    Ok(CompositePulse { pulses, theta, phi, scheme: Scheme::Pb1 })
}

/// Rotation angle of a 2×2 unitary, ignoring global phase.
pub fn rotation_angle(u: &Mat2) -> f64 {
    let det = u.determinant();
    let tr = u.trace() / det.sqrt();
    2.0 * (tr.norm() / 2.0).min(1.0).acos()
}

/// `1 − |Tr(a† b)|²/4`.
pub fn trace_infidelity(a: &Mat2, b: &Mat2) -> f64 {
    let t = (a.adjoint() * b).trace().norm() / 2.0;
    1.0 - t * t
}
