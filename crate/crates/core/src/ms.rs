//! Mølmer–Sørensen interaction with per-ion weights, and echo sequences that
//! decouple chosen ions from it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates;
use crate::linalg::{c, embed, CMat, Unitary, C64};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsParams {
    /// Coupling weights `c_i`.
    pub c: Vec<f64>,
    /// Geometric area `A` of the full gate.
    pub area: f64,
    pub loops: u32,
    /// Signed gap `ν − δ` (rad/s).
    pub gap: f64,
    /// Peak Rabi rate and Lamb–Dicke factor, used by the oscillator model.
    pub rabi: f64,
    pub eta: f64,
    /// Per-ion spin phase of the interaction axis (`X cos φ + Y sin φ`).
    pub phases: Vec<f64>,
}

impl MsParams {
    pub fn new(c: Vec<f64>, area: f64) -> Self {
        let n = c.len();
        Self { c, area, loops: 2, gap: -TWO_PI * 11.834e3, rabi: 0.0, eta: 0.1, phases: vec![0.0; n] }
    }

    pub fn n_qubits(&self) -> usize {
        self.c.len()
    }

    /// `2πn / |ν − δ|`.
    pub fn closure_time(&self) -> f64 {
        TWO_PI * self.loops as f64 / self.gap.abs()
    }

    /// Area predicted by the second-order Magnus expansion, `(Ωη)² · 2πn / (ν−δ)²`.
    pub fn magnus_area(&self) -> f64 {
        let g = self.rabi * self.eta;
        g * g * TWO_PI * self.loops as f64 / (self.gap * self.gap)
    }

    /// Peak Rabi rate that produces `self.area` at closure.
    pub fn rabi_for_area(&self) -> f64 {
        (self.area * self.gap * self.gap / (TWO_PI * self.loops as f64)).sqrt() / self.eta
    }
}

/// Area that realises `exp(−iθ X_a X_b)` on the weighted pair.
pub fn area_for_pair(c: &[f64], a: usize, b: usize, theta: f64) -> f64 {
    theta / (2.0 * c[a] * c[b])
}

fn hadamard_sign(a: usize, s: usize) -> f64 {
    if (a & s).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Weighted spin eigenvalue `Σ c_i x_i` of the X-basis state `s` (bit set ⇒ x = −1).
pub fn jx_eigenvalue(c: &[f64], s: usize) -> f64 {
    let n = c.len();
    (0..n).map(|i| if (s >> (n - 1 - i)) & 1 == 1 { -c[i] } else { c[i] }).sum()
}

/// Builds `H^⊗n diag(d) H^⊗n`.
pub fn x_diagonal_operator(n: usize, diag: &[C64]) -> CMat {
    let dim = 1 << n;
    let norm = 1.0 / dim as f64;
    CMat::from_fn(dim, dim, |a, b| {
        let mut acc = c(0.0, 0.0);
        for (s, d) in diag.iter().enumerate() {
            acc += *d * (hadamard_sign(a, s) * hadamard_sign(s, b));
        }
        acc * norm
    })
}

/// `⊗ R_z(φ_i)`.
pub fn z_frame(phases: &[f64]) -> CMat {
    let n = phases.len();
    let dim = 1 << n;
    let mut m = CMat::zeros(dim, dim);
    for idx in 0..dim {
        let mut ph = 0.0;
        for (i, p) in phases.iter().enumerate() {
            let bit = (idx >> (n - 1 - i)) & 1;
            ph += if bit == 0 { -p / 2.0 } else { p / 2.0 };
        }
        m[(idx, idx)] = C64::from_polar(1.0, ph);
    }
    m
}

/// `exp(−2iA Σ_{i<j} c_i c_j X_i X_j)` with area `area`, rotated into the
/// per-ion spin frames `phases`.
pub fn weighted_xx(c: &[f64], area: f64, phases: &[f64]) -> CMat {
    let n = c.len();
    let diag: Vec<C64> = (0..1usize << n)
        .map(|s| {
            let mut e = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    let xi = if (s >> (n - 1 - i)) & 1 == 1 { -1.0 } else { 1.0 };
                    let xj = if (s >> (n - 1 - j)) & 1 == 1 { -1.0 } else { 1.0 };
                    e += c[i] * c[j] * xi * xj;
                }
            }
            C64::from_polar(1.0, -2.0 * area * e)
        })
        .collect();
    let u = x_diagonal_operator(n, &diag);
    if phases.iter().all(|p| *p == 0.0) {
        u
    } else {
        let z = z_frame(phases);
        &z * u * z.adjoint()
    }
}

pub fn ms_propagator(params: &MsParams) -> Unitary {
    Unitary::from_matrix_unchecked(weighted_xx(&params.c, params.area, &params.phases))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EchoStyle {
    /// Flip the decoupled ions.
    #[default]
    FlipDecoupled,
    /// Flip the entangled ions instead; only equivalent when one ion is decoupled.
    FlipTargets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoSequence {
    pub n_qubits: usize,
    pub targets: Vec<usize>,
    pub decoupled: Vec<usize>,
    /// Sign pattern of each segment, as the subset of decoupled ions whose
    /// X operator is inverted during that segment.
    pub segments: Vec<Vec<usize>>,
    /// Ions flipped after each segment (the last entry restores the frame).
    pub flips: Vec<Vec<usize>>,
    pub style: EchoStyle,
}

impl EchoSequence {
    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }
}

/// Gray-code ordered echo sequence that keeps `targets` interacting and
/// decouples every other ion.
pub fn echo_sequence(n_qubits: usize, targets: &[usize], style: EchoStyle) -> Result<EchoSequence> {
    if targets.is_empty() {
        return Err(Error::NoTargets);
    }
    for &t in targets {
        if t >= n_qubits {
            return Err(Error::QubitOutOfRange { index: t, n_qubits });
        }
    }
    let mut targets = targets.to_vec();
    targets.sort_unstable();
    targets.dedup();
    let decoupled: Vec<usize> = (0..n_qubits).filter(|q| !targets.contains(q)).collect();
    let d = decoupled.len();
    if style == EchoStyle::FlipTargets && d != 1 {
        return Err(Error::Config("flipping targeted ions is only equivalent for one decoupled ion".into()));
    }
    let subset =
        |code: usize| -> Vec<usize> { (0..d).filter(|b| (code >> b) & 1 == 1).map(|b| decoupled[b]).collect() };
    let n_seg = 1usize << d;
    let gray: Vec<usize> = (0..n_seg).map(|s| s ^ (s >> 1)).collect();
    let segments = gray.iter().map(|&g| subset(g)).collect();
    let mut flips = Vec::with_capacity(n_seg);
    for s in 0..n_seg {
        let next = if s + 1 < n_seg { gray[s + 1] } else { 0 };
        let changed = subset(gray[s] ^ next);
        let f = match style {
            EchoStyle::FlipDecoupled => changed,
            EchoStyle::FlipTargets if changed.is_empty() => changed,
            EchoStyle::FlipTargets => targets.clone(),
        };
        flips.push(f);
    }
    if d == 0 {
        flips = vec![Vec::new()];
    }
    Ok(EchoSequence { n_qubits, targets, decoupled, segments, flips, style })
}

/// Echo flip `−iY` in the spin frame of phase `phi`, i.e. a π rotation about `φ + π/2`.
pub fn echo_flip(phi: f64) -> CMat {
    crate::linalg::to_dyn(&gates::r_phi(PI, phi + PI / 2.0))
}

/// Net unitary of the segmented gate with flips.
pub fn echoed_propagator(params: &MsParams, seq: &EchoSequence) -> Result<Unitary> {
    let n = params.n_qubits();
    if seq.n_qubits != n {
        return Err(Error::DimensionMismatch { expected: n, got: seq.n_qubits });
    }
    let seg_area = params.area / seq.n_segments() as f64;
    let seg = weighted_xx(&params.c, seg_area, &params.phases);
    let mut u = CMat::identity(1 << n, 1 << n);
    for flips in &seq.flips {
        u = &seg * u;
        for &k in flips {
            u = embed(&echo_flip(params.phases[k]), k, n) * u;
        }
    }
    Ok(Unitary::from_matrix_unchecked(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, phase_distance, tensor};
    use crate::state::QuantumState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn expm_hermitian(h: &CMat, t: f64) -> CMat {
        let (vals, vecs) = crate::linalg::hermitian_eigen(h);
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            vals.len(),
            vals.iter().map(|v| C64::from_polar(1.0, -v * t)),
        ));
        &vecs * d * vecs.adjoint()
    }

    fn xx_on(n: usize, i: usize, j: usize) -> CMat {
        let x = crate::linalg::to_dyn(&gates::x());
        let id = CMat::identity(2, 2);
        (0..n).fold(CMat::identity(1, 1), |acc, q| kron(&acc, if q == i || q == j { &x } else { &id }))
    }

    #[test]
    fn uniform_pair_makes_bell_state() {
        let p = MsParams::new(vec![0.5, 0.5], area_for_pair(&[0.5, 0.5], 0, 1, PI / 4.0));
        let u = ms_propagator(&p);
        let s = QuantumState::zeros(2).apply(&u, &[0, 1]).unwrap();
        let a = s.amplitudes().unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a[0] - c(h, 0.0)).norm() < 1e-12);
        assert!((a[3] - c(0.0, -h)).norm() < 1e-12);
    }

    #[test]
    fn zero_weight_ion_is_unentangled() {
        let p = MsParams::new(vec![0.5, 0.0, 0.4], 1.3);
        let u = ms_propagator(&p);
        let s = QuantumState::zeros(3).apply(&u, &[0, 1, 2]).unwrap();
        let r = s.partial_trace(&[1]).unwrap();
        assert!((r[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_product_of_pair_exponentials() {
        let cs = [0.5, 0.4, 0.2];
        let area = 0.9;
        let u = ms_propagator(&MsParams::new(cs.to_vec(), area));
        let mut expect = CMat::identity(8, 8);
        let mut joint = CMat::zeros(8, 8);
        for i in 0..3 {
            for j in i + 1..3 {
                let g = xx_on(3, i, j) * c(2.0 * area * cs[i] * cs[j], 0.0);
                expect = expm_hermitian(&g, 1.0) * expect;
                joint += g;
            }
        }
        assert!(crate::linalg::max_abs(&(u.matrix() - &expect)) < 1e-12);
        assert!(crate::linalg::max_abs(&(u.matrix() - expm_hermitian(&joint, 1.0))) < 1e-12);
        assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn spin_phase_rotates_axis() {
        let p = MsParams { phases: vec![0.3, -0.7], ..MsParams::new(vec![0.5, 0.5], 1.0) };
        let u = ms_propagator(&p);
        let xp = |phi: f64| crate::linalg::to_dyn(&(gates::x() * c(phi.cos(), 0.0) + gates::y() * c(phi.sin(), 0.0)));
        let g = kron(&xp(0.3), &xp(-0.7)) * c(2.0 * 0.25, 0.0);
        assert!(crate::linalg::max_abs(&(u.matrix() - expm_hermitian(&g, 1.0))) < 1e-12);
    }

    #[test]
    fn sequence_shapes() {
        let s = echo_sequence(3, &[1, 2], EchoStyle::FlipDecoupled).unwrap();
        assert_eq!(s.n_segments(), 2);
        assert_eq!(s.flips, vec![vec![0], vec![0]]);
        let s = echo_sequence(4, &[0, 1], EchoStyle::FlipDecoupled).unwrap();
        assert_eq!(s.n_segments(), 4);
        assert!(s.flips.iter().all(|f| f.len() == 1));
        let s = echo_sequence(2, &[0, 1], EchoStyle::FlipDecoupled).unwrap();
        assert_eq!(s.n_segments(), 1);
        assert!(s.flips[0].is_empty());
        assert!(matches!(echo_sequence(2, &[], EchoStyle::FlipDecoupled), Err(Error::NoTargets)));
        assert!(echo_sequence(4, &[0, 1], EchoStyle::FlipTargets).is_err());
    }

    #[test]
    fn decouple_one_of_three() {
        let cs = vec![0.3, 0.5, 0.45];
        let p = MsParams::new(cs.clone(), 1.1);
        for style in [EchoStyle::FlipDecoupled, EchoStyle::FlipTargets] {
            let seq = echo_sequence(3, &[1, 2], style).unwrap();
            let u = echoed_propagator(&p, &seq).unwrap();
            let pair = Unitary::from_matrix_unchecked(weighted_xx(&cs[1..], 1.1, &[0.0, 0.0]));
            let expect = tensor(&Unitary::identity(2), &pair);
            assert!(phase_distance(u.matrix(), expect.matrix()) < 1e-12, "{style:?}");
        }
    }

    #[test]
    fn decouple_everything_and_pairs_of_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cs: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..0.5)).collect();
        let p =
            MsParams { phases: (0..4).map(|_| rng.random_range(-PI..PI)).collect(), ..MsParams::new(cs.clone(), 0.8) };
        let seq = echo_sequence(4, &[0, 1], EchoStyle::FlipDecoupled).unwrap();
        let u = echoed_propagator(&p, &seq).unwrap();
        let pair = weighted_xx(&cs[..2], 0.8, &p.phases[..2]);
        let expect = kron(&pair, &CMat::identity(4, 4));
        assert!(phase_distance(u.matrix(), &expect) < 1e-10);
        let seq = echo_sequence(4, &[2], EchoStyle::FlipDecoupled).unwrap();
        let u = echoed_propagator(&p, &seq).unwrap();
        assert!(phase_distance(u.matrix(), &CMat::identity(16, 16)) < 1e-10);
    }
}
