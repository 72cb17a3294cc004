//! Linear ion crystal geometry, radial normal modes and per-ion beam couplings.
//!
//! Positions are reported in micrometres. Internally the equilibrium is solved
//! in units of `ℓ = (q² / (4πε₀ m ω_z²))^(1/3)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;
pub const YB171_MASS: f64 = 170.936_325_8 * ATOMIC_MASS;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WellMode {
    Cooling,
    #[default]
    SingleQubit,
    TwoQubit,
    Detection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapConfig {
    pub n_ions: usize,
    /// Axial angular frequency of the cooling well (rad/s).
    pub axial_freq: f64,
    /// Radial angular frequencies in the cooling well (rad/s); the lower one is addressed.
    pub radial_freqs: [f64; 2],
    pub mass: f64,
    pub single_qubit_scale: f64,
    pub two_qubit_scale: f64,
    pub detection_scale: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            n_ions: 2,
            axial_freq: TWO_PI * 0.5e6,
            radial_freqs: [TWO_PI * 1.8e6, TWO_PI * 2.1e6],
            mass: YB171_MASS,
            single_qubit_scale: std::f64::consts::FRAC_1_SQRT_2,
            two_qubit_scale: 1.5f64.sqrt(),
            detection_scale: 1.0,
        }
    }
}

impl TrapConfig {
    pub fn with_ions(n_ions: usize) -> Self {
        Self { n_ions, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::Config("n_ions must be at least 1".into()));
        }
        let all = [
            self.axial_freq,
            self.radial_freqs[0],
            self.radial_freqs[1],
            self.mass,
            self.single_qubit_scale,
            self.two_qubit_scale,
            self.detection_scale,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("trap frequencies, mass and well scales must be positive".into()));
        }
        Ok(())
    }

    pub fn scale(&self, mode: WellMode) -> f64 {
        match mode {
            WellMode::Cooling => 1.0,
            WellMode::SingleQubit => self.single_qubit_scale,
            WellMode::TwoQubit => self.two_qubit_scale,
            WellMode::Detection => self.detection_scale,
        }
    }

    pub fn axial_in(&self, mode: WellMode) -> f64 {
        self.axial_freq * self.scale(mode)
    }

    /// Addressed (lower) radial frequency. Radial confinement is taken as
    /// independent of the axial well strength.
    pub fn radial_addressed(&self) -> f64 {
        self.radial_freqs[0].min(self.radial_freqs[1])
    }

    /// Characteristic length in micrometres.
    pub fn length_scale(&self, mode: WellMode) -> f64 {
        let w = self.axial_in(mode);
        let l3 = ELEMENTARY_CHARGE.powi(2) / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * self.mass * w * w);
        l3.cbrt() * 1e6
    }
}

fn coulomb_gradient(u: &[f64]) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |i, _| {
        let mut g = u[i];
        for j in 0..n {
            if j != i {
                let d = u[i] - u[j];
                g -= d.signum() / (d * d);
            }
        }
        g
    })
}

fn coulomb_hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 1.0;
        for j in 0..n {
            if j != i {
                let k = 2.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, i)] += k;
                h[(i, j)] = -k;
            }
        }
    }
    h
}

/// Dimensionless equilibrium positions, ascending.
pub fn equilibrium_scaled(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("n_ions must be at least 1".into()));
    }
    let spacing = 2.0 * (n as f64).powf(-0.56);
    let mut u: Vec<f64> = (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing).collect();
    let max_iter = 200;
    for _ in 0..max_iter {
        let g = coulomb_gradient(&u);
        let gnorm = g.amax();
        if gnorm < 1e-12 {
            return Ok(u);
        }
        let h = coulomb_hessian(&u);
        let step = h.lu().solve(&g).ok_or(Error::EquilibriumNotConverged { iterations: 0, gradient: gnorm })?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered && coulomb_gradient(&trial).amax() < gnorm * (1.0 - 1e-4 * t) || t < 1e-6 {
                if ordered {
                    u = trial;
                }
                break;
            }
            t *= 0.5;
        }
    }
    let gnorm = coulomb_gradient(&u).amax();
    if gnorm < 1e-12 {
        Ok(u)
    } else {
        Err(Error::EquilibriumNotConverged { iterations: max_iter, gradient: gnorm })
    }
}

/// Equilibrium positions in micrometres for the given well.
pub fn equilibrium_positions(cfg: &TrapConfig, mode: WellMode) -> Result<Vec<f64>> {
    cfg.validate()?;
    let l = cfg.length_scale(mode);
    Ok(equilibrium_scaled(cfg.n_ions)?.into_iter().map(|u| u * l).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialModes {
    /// Angular frequencies, descending.
    pub freqs: Vec<f64>,
    /// Column `m` holds the normalized participation vector of mode `m`.
    pub vectors: DMatrix<f64>,
}

/// Scaled radial Hessian `K`; mode frequencies are `ω_z √λ`.
pub fn radial_hessian(u: &[f64], ratio: f64) -> DMatrix<f64> {
    let n = u.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = ratio * ratio;
        for j in 0..n {
            if j != i {
                let inv = 1.0 / (u[i] - u[j]).abs().powi(3);
                k[(i, i)] -= inv;
                k[(i, j)] = inv;
            }
        }
    }
    k
}

/// Modes of the addressed radial direction in the given well.
pub fn radial_modes(cfg: &TrapConfig, mode: WellMode) -> Result<RadialModes> {
    cfg.validate()?;
    let u = equilibrium_scaled(cfg.n_ions)?;
    let wz = cfg.axial_in(mode);
    let ratio = cfg.radial_addressed() / wz;
    let eig = SymmetricEigen::new(radial_hessian(&u, ratio));
    let n = u.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut freqs = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (m, &k) in order.iter().enumerate() {
        let lam = eig.eigenvalues[k];
        if lam <= 0.0 {
            return Err(Error::ChainBuckling { mode: m, eigenvalue: lam });
        }
        freqs.push(wz * lam.sqrt());
        let mut v = eig.eigenvectors.column(k).clone_owned();
        // sign convention: largest-magnitude component positive
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        vectors.set_column(m, &v);
    }
    Ok(RadialModes { freqs, vectors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamProfile {
    /// 1/e² intensity half-widths of the two Raman beams (μm).
    pub waist_a: f64,
    pub waist_b: f64,
    /// Cubic asymmetry of the Rabi-rate profile; positive values favour the high-index side.
    pub coma: f64,
    /// Optical phase curvature (rad/μm²).
    pub curvature: f64,
    /// Optical phase tilt (rad/μm).
    pub tilt: f64,
    /// Peak Rabi rate (rad/s).
    pub rabi: f64,
}

impl Default for BeamProfile {
    fn default() -> Self {
        Self {
            waist_a: 7.0,
            waist_b: 13.5,
            coma: 0.2,
            curvature: 0.0,
            tilt: 0.0,
            // π/2 in 4 μs
            rabi: std::f64::consts::PI / (2.0 * 4e-6),
        }
    }
}

impl BeamProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.waist_a > 0.0 && self.waist_b > 0.0 && self.rabi > 0.0) {
            return Err(Error::Config("beam waists and Rabi rate must be positive".into()));
        }
        if !(self.coma.is_finite() && self.curvature.is_finite() && self.tilt.is_finite()) {
            return Err(Error::Config("beam shape coefficients must be finite".into()));
        }
        Ok(())
    }

    /// 1/e half-width of the Rabi-rate profile (μm).
    pub fn effective_waist(&self) -> f64 {
        (1.0 / self.waist_a.powi(2) + 1.0 / self.waist_b.powi(2)).powf(-0.5)
    }

    /// Rabi rate relative to the peak at displacement `dx` (μm) from the beam centre.
    pub fn relative_rabi(&self, dx: f64) -> f64 {
        let u = dx / self.effective_waist();
        (-u * u).exp() * (1.0 + self.coma * u.powi(3)).max(0.0)
    }

    pub fn phase(&self, dx: f64) -> f64 {
        self.tilt * dx + self.curvature * dx * dx
    }

    /// Beam centre between `xa < xb` at which both points see the same Rabi rate.
    pub fn balanced_center(&self, xa: f64, xb: f64) -> f64 {
        let f = |x0: f64| self.relative_rabi(xa - x0) - self.relative_rabi(xb - x0);
        let (mut lo, mut hi) = (xa, xb);
        let (flo, fhi) = (f(lo), f(hi));
        if flo.signum() == fhi.signum() {
            return 0.5 * (xa + xb);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 || hi - lo < 1e-14 {
                return mid;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub well: WellMode,
    /// Ion positions (μm), ascending.
    pub positions: Vec<f64>,
    /// Beam centre in the chain frame (μm).
    pub beam_center: f64,
    pub mode_freqs: Vec<f64>,
    pub mode_vectors: DMatrix<f64>,
    pub mode_index: usize,
    /// Per-ion Rabi rate (rad/s).
    pub rabi: Vec<f64>,
    /// Per-ion optical phase (rad).
    pub phase: Vec<f64>,
    /// Per-ion Lamb-Dicke factor relative to the largest one in the chain.
    pub eta_ratio: Vec<f64>,
    /// Weights `(Ω_i/Ω)(η_i/η)/2`.
    pub c: Vec<f64>,
}

impl ChainModel {
    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    /// Rabi rate relative to the brightest ion.
    pub fn relative_rabi(&self) -> Vec<f64> {
        let max = self.rabi.iter().cloned().fold(0.0, f64::max);
        self.rabi.iter().map(|r| if max > 0.0 { r / max } else { 0.0 }).collect()
    }
}

/// Evaluates the beam on a chain in the given well with the beam centred at
/// `beam_center` (μm, chain frame), using radial mode `mode_index` (0 = highest).
pub fn couplings(
    beam: &BeamProfile,
    beam_center: f64,
    cfg: &TrapConfig,
    well: WellMode,
    mode_index: usize,
) -> Result<ChainModel> {
    beam.validate()?;
    let positions = equilibrium_positions(cfg, well)?;
    let modes = radial_modes(cfg, well)?;
    if mode_index >= positions.len() {
        return Err(Error::Config(format!("mode index {mode_index} out of range for {} ions", positions.len())));
    }
    Ok(couplings_at(beam, beam_center, positions, modes, well, mode_index))
}

pub fn couplings_at(
    beam: &BeamProfile,
    beam_center: f64,
    positions: Vec<f64>,
    modes: RadialModes,
    well: WellMode,
    mode_index: usize,
) -> ChainModel {
    let rabi: Vec<f64> = positions.iter().map(|x| beam.rabi * beam.relative_rabi(x - beam_center)).collect();
    let phase = positions.iter().map(|x| beam.phase(x - beam_center)).collect();
    let b: Vec<f64> = modes.vectors.column(mode_index).iter().map(|v| v.abs()).collect();
    let bmax = b.iter().cloned().fold(0.0, f64::max);
    let eta_ratio: Vec<f64> = b.iter().map(|v| v / bmax).collect();
    let rmax = rabi.iter().cloned().fold(0.0, f64::max);
    let c = rabi.iter().zip(&eta_ratio).map(|(r, e)| if rmax > 0.0 { 0.5 * (r / rmax) * e } else { 0.0 }).collect();
    ChainModel {
        well,
        positions,
        beam_center,
        mode_freqs: modes.freqs,
        mode_vectors: modes.vectors,
        mode_index,
        rabi,
        phase,
        eta_ratio,
        c,
    }
}
