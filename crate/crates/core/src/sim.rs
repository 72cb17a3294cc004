//! Executes pulse programs as virtual experiments.
//!
//! Each shot draws its own noise realization from a ChaCha stream keyed by
//! `(seed, shot index)`, so results do not depend on how shots are batched.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates;
use crate::linalg::{c, CMat, Mat2, Unitary, C64};
use crate::ms::{echo_flip, weighted_xx};
use crate::program::{Op, PulseProgram};
use crate::readout::{channel_probabilities, sample_channels};
use crate::state::QuantumState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Static relative Rabi amplitude error.
    pub amplitude_offset: f64,
    /// Standard deviation of the per-shot relative amplitude error.
    pub amplitude_sigma: f64,
    /// Phase diffusion rate (rad²/s) of each ion's z random walk, accrued
    /// during transports and well changes.
    pub dephasing_rate: f64,
    /// Phase diffusion rate (rad²/s) while single-qubit pulses play.
    pub pulse_dephasing_rate: f64,
    /// Standard deviation of the per-shot relative MS area error.
    pub ms_area_sigma: f64,
    /// Probability that an ion's own channel reports its state correctly.
    pub detection_fidelity: f64,
    /// Probability that a bright ion lights each adjacent channel.
    pub pmt_crosstalk: f64,
    /// Probability that an ion is prepared in |1⟩ instead of |0⟩.
    pub spam_flip: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::paper()
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self {
            amplitude_offset: 0.0,
            amplitude_sigma: 0.0,
            dephasing_rate: 0.0,
            pulse_dephasing_rate: 0.0,
            ms_area_sigma: 0.0,
            detection_fidelity: 1.0,
            pmt_crosstalk: 0.0,
            spam_flip: 0.0,
        }
    }

    /// Calibrated against the benchmark anchors (single-qubit RB fidelity
    /// ≈ 0.97, Bell fidelity ≈ 0.93, SPAM ≈ 0.025, CNOT |11⟩ ≈ 0.85, process
    /// fidelity ≈ 0.78) on the default two-ion configuration.
    pub fn paper() -> Self {
        Self {
            amplitude_offset: 0.0,
            amplitude_sigma: 0.06,
            dephasing_rate: 0.0,
            pulse_dephasing_rate: 580.0,
            ms_area_sigma: 0.03,
            detection_fidelity: 0.975,
            pmt_crosstalk: 0.05,
            spam_flip: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("detection_fidelity", self.detection_fidelity),
            ("pmt_crosstalk", self.pmt_crosstalk),
            ("spam_flip", self.spam_flip),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        if self.amplitude_sigma < 0.0
            || self.dephasing_rate < 0.0
            || self.pulse_dephasing_rate < 0.0
            || self.ms_area_sigma < 0.0
        {
            return Err(Error::Config("noise widths and rates must be non-negative".into()));
        }
        if !self.amplitude_offset.is_finite() {
            return Err(Error::Config("amplitude offset must be finite".into()));
        }
        Ok(())
    }

    /// True when the coherent part of the evolution is noiseless.
    pub fn is_coherent_ideal(&self) -> bool {
        self.amplitude_offset == 0.0
            && self.amplitude_sigma == 0.0
            && self.dephasing_rate == 0.0
            && self.pulse_dephasing_rate == 0.0
            && self.ms_area_sigma == 0.0
            && self.spam_flip == 0.0
    }

    pub fn with_detection(mut self, fidelity: f64, crosstalk: f64) -> Self {
        self.detection_fidelity = fidelity;
        self.pmt_crosstalk = crosstalk;
        self
    }
}

/// Joint channel outcomes of a batch of shots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub n_ions: usize,
    pub shots: u64,
    pub seed: u64,
    /// Counts per joint bright/dark pattern; index bit for ion 0 is the most
    /// significant, bright = 1.
    pub counts: Vec<u64>,
}

impl ShotRecord {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&k| k as f64 / self.shots.max(1) as f64).collect()
    }

    /// Fraction of shots in which ion `q`'s channel was bright.
    pub fn bright_fraction(&self, q: usize) -> f64 {
        let n = self.n_ions;
        let bright: u64 =
            self.counts.iter().enumerate().filter(|(idx, _)| (idx >> (n - 1 - q)) & 1 == 1).map(|(_, k)| k).sum();
        bright as f64 / self.shots.max(1) as f64
    }
}

fn apply_1q(psi: &mut [C64], n: usize, k: usize, m: &Mat2) {
    let stride = 1usize << (n - 1 - k);
    let dim = psi.len();
    let mut base = 0;
    while base < dim {
        for off in 0..stride {
            let i0 = base + off;
            let i1 = i0 + stride;
            let (a, b) = (psi[i0], psi[i1]);
            psi[i0] = m[(0, 0)] * a + m[(0, 1)] * b;
            psi[i1] = m[(1, 0)] * a + m[(1, 1)] * b;
        }
        base += 2 * stride;
    }
}

fn apply_dense(psi: &mut [C64], m: &CMat) {
    let v = DVector::from_column_slice(psi);
    let out = m * v;
    psi.copy_from_slice(out.as_slice());
}

/// Per-shot noise draw plus the stream used for time-dependent noise.
struct ShotNoise<'a> {
    noise: &'a NoiseModel,
    scale: f64,
    ms_scale: f64,
    rng: ChaCha8Rng,
}

impl<'a> ShotNoise<'a> {
    fn new(noise: &'a NoiseModel, seed: u64, shot: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot);
        let mut scale = 1.0 + noise.amplitude_offset;
        if noise.amplitude_sigma > 0.0 {
            scale += Normal::new(0.0, noise.amplitude_sigma).expect("finite sigma").sample(&mut rng);
        }
        let mut ms_scale = 1.0;
        if noise.ms_area_sigma > 0.0 {
            ms_scale += Normal::new(0.0, noise.ms_area_sigma).expect("finite sigma").sample(&mut rng);
        }
        Self { noise, scale, ms_scale, rng }
    }

    fn ideal(noise: &'a NoiseModel) -> Self {
        Self { noise, scale: 1.0, ms_scale: 1.0, rng: ChaCha8Rng::seed_from_u64(0) }
    }
}

/// Runs the program on a state vector. Gate ops after the first `truncate`
/// are suppressed; transports and well changes still take their time.
fn evolve(program: &PulseProgram, psi: &mut [C64], sn: &mut ShotNoise, truncate: Option<usize>) {
    let n = program.n_ions;
    let mut gates_done = 0usize;
    for op in &program.ops {
        let active = if op.is_gate() {
            gates_done += 1;
            truncate.is_none_or(|k| gates_done <= k)
        } else {
            true
        };
        if active {
            match op {
                Op::Pulse(p) => {
                    for j in 0..n {
                        let r = p.rabi[j] * sn.scale;
                        if r.abs() < 1e-15 {
                            continue;
                        }
                        let u = p.composite.unitary_with(r, p.phase[j]);
                        apply_1q(psi, n, j, &u);
                    }
                }
                Op::MsSegment(m) => {
                    // area scales with the square of the Rabi amplitude
                    let area = m.area * sn.scale * sn.scale * sn.ms_scale;
                    let u = weighted_xx(&m.c, area, &m.phases);
                    apply_dense(psi, &u);
                }
                Op::EchoFlip { ion, phase } => {
                    let f = crate::linalg::to_mat2(&echo_flip(*phase));
                    apply_1q(psi, n, *ion, &f);
                }
                Op::WellChange { .. } | Op::Transport { .. } | Op::Measure => {}
            }
        }
        let rate = match op {
            Op::Transport { .. } | Op::WellChange { .. } => sn.noise.dephasing_rate,
            Op::Pulse(_) if active => sn.noise.pulse_dephasing_rate,
            _ => 0.0,
        };
        if rate > 0.0 {
            let dt = program.op_duration(op);
            if dt > 0.0 {
                let normal = Normal::new(0.0, (rate * dt).sqrt()).expect("finite width");
                for j in 0..n {
                    let d = normal.sample(&mut sn.rng);
                    apply_1q(psi, n, j, &gates::rz(d));
                }
            }
        }
    }
}

fn initial_state(n: usize, noise: &NoiseModel, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut idx = 0usize;
    if noise.spam_flip > 0.0 {
        for q in 0..n {
            if rng.random::<f64>() < noise.spam_flip {
                idx |= 1 << (n - 1 - q);
            }
        }
    }
    let mut psi = vec![c(0.0, 0.0); 1 << n];
    psi[idx] = c(1.0, 0.0);
    psi
}

fn check_truncate(program: &PulseProgram, truncate: Option<usize>) -> Result<()> {
    if let Some(k) = truncate {
        let len = program.gate_steps().len();
        if k > len {
            return Err(Error::ScanOutOfRange { k, len });
        }
    }
    Ok(())
}

/// Noiseless final state from |0…0⟩.
pub fn ideal_state(program: &PulseProgram, truncate: Option<usize>) -> Result<QuantumState> {
    program.validate()?;
    check_truncate(program, truncate)?;
    let ideal = NoiseModel::ideal();
    let mut sn = ShotNoise::ideal(&ideal);
    let n = program.n_ions;
    let mut psi = vec![c(0.0, 0.0); 1 << n];
    psi[0] = c(1.0, 0.0);
    evolve(program, &mut psi, &mut sn, truncate);
    QuantumState::from_vector(n, DVector::from_vec(psi))
}

/// Noiseless unitary of the physical ops on the whole chain.
pub fn physical_unitary(program: &PulseProgram) -> Result<Unitary> {
    program.validate()?;
    let n = program.n_ions;
    let dim = 1 << n;
    let ideal = NoiseModel::ideal();
    let mut u = CMat::zeros(dim, dim);
    for col in 0..dim {
        let mut psi = vec![c(0.0, 0.0); dim];
        psi[col] = c(1.0, 0.0);
        let mut sn = ShotNoise::ideal(&ideal);
        evolve(program, &mut psi, &mut sn, None);
        for (r, v) in psi.iter().enumerate() {
            u[(r, col)] = *v;
        }
    }
    Ok(Unitary::from_matrix_unchecked(u))
}

/// Physical unitary followed by the recorded deferred z-rotations, i.e. the
/// logical operation the program implements.
pub fn logical_unitary(program: &PulseProgram) -> Result<Unitary> {
    let u = physical_unitary(program)?;
    let n = program.n_ions;
    let mut m = u.into_matrix();
    for (k, f) in program.frames.iter().enumerate() {
        m = crate::linalg::embed(&crate::linalg::to_dyn(&gates::rz(*f)), k, n) * m;
    }
    Ok(Unitary::from_matrix_unchecked(m))
}

/// Noiseless final state with the recorded deferred z-rotations applied.
pub fn logical_state(program: &PulseProgram) -> Result<QuantumState> {
    let mut st = ideal_state(program, None)?;
    for (k, f) in program.frames.iter().enumerate() {
        st.apply_mut(&crate::linalg::to_dyn(&gates::rz(*f)), &[k])?;
    }
    Ok(st)
}

/// Basis-state probabilities averaged over `trajectories` noise draws, before
/// detection errors.
pub fn expected_probabilities(
    program: &PulseProgram,
    noise: &NoiseModel,
    trajectories: u64,
    seed: u64,
    truncate: Option<usize>,
) -> Result<Vec<f64>> {
    program.validate()?;
    noise.validate()?;
    check_truncate(program, truncate)?;
    let n = program.n_ions;
    let mut acc = vec![0.0; 1 << n];
    let runs = if noise.is_coherent_ideal() { 1 } else { trajectories.max(1) };
    for shot in 0..runs {
        let mut sn = ShotNoise::new(noise, seed, shot);
        let mut psi = initial_state(n, noise, &mut sn.rng);
        evolve(program, &mut psi, &mut sn, truncate);
        for (a, v) in acc.iter_mut().zip(&psi) {
            *a += v.norm_sqr();
        }
    }
    Ok(acc.into_iter().map(|a| a / runs as f64).collect())
}

fn sample_index(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Shot-by-shot execution with per-shot noise and detection errors.
pub fn run_program(program: &PulseProgram, noise: &NoiseModel, shots: u64, seed: u64) -> Result<ShotRecord> {
    run_truncated(program, noise, shots, seed, None)
}

/// Gate-beam override after `k` gate ops.
pub fn gate_scan(program: &PulseProgram, k: usize, noise: &NoiseModel, shots: u64, seed: u64) -> Result<ShotRecord> {
    run_truncated(program, noise, shots, seed, Some(k))
}

fn run_truncated(
    program: &PulseProgram,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
    truncate: Option<usize>,
) -> Result<ShotRecord> {
    program.validate()?;
    noise.validate()?;
    check_truncate(program, truncate)?;
    let n = program.n_ions;
    let mut counts = vec![0u64; 1 << n];
    // without coherent noise every shot shares one state
    let shared = if noise.is_coherent_ideal() {
        let ideal = NoiseModel::ideal();
        let mut sn = ShotNoise::ideal(&ideal);
        let mut psi = vec![c(0.0, 0.0); 1 << n];
        psi[0] = c(1.0, 0.0);
        evolve(program, &mut psi, &mut sn, truncate);
        Some(psi.iter().map(|v| v.norm_sqr()).collect::<Vec<f64>>())
    } else {
        None
    };
    for shot in 0..shots {
        let mut sn = ShotNoise::new(noise, seed, shot);
        let probs = match &shared {
            Some(p) => p.clone(),
            None => {
                let mut psi = initial_state(n, noise, &mut sn.rng);
                evolve(program, &mut psi, &mut sn, truncate);
                psi.iter().map(|v| v.norm_sqr()).collect()
            }
        };
        let s = sample_index(&probs, &mut sn.rng);
        let m = sample_channels(s, n, noise.detection_fidelity, noise.pmt_crosstalk, &mut sn.rng);
        counts[m] += 1;
    }
    Ok(ShotRecord { n_ions: n, shots, seed, counts })
}

/// Expected channel-pattern distribution for given state probabilities.
pub fn detected_distribution(probs: &[f64], n: usize, noise: &NoiseModel) -> Vec<f64> {
    let mut out = vec![0.0; 1 << n];
    for (s, p) in probs.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        for (m, q) in channel_probabilities(s, n, noise.detection_fidelity, noise.pmt_crosstalk).iter().enumerate() {
            out[m] += p * q;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{Compiler, CompilerConfig};
    use crate::linalg::kron;

    fn x_program(n: usize) -> PulseProgram {
        let mut c = Compiler::new(CompilerConfig::with_ions(n)).unwrap();
        c.queue(0, &gates::x()).unwrap();
        c.finish(true).unwrap()
    }

    #[test]
    fn apply_1q_matches_kron() {
        let h = gates::h();
        let mut psi: Vec<C64> = (0..8).map(|k| c(k as f64, 0.5 * k as f64)).collect();
        let v = DVector::from_vec(psi.clone());
        apply_1q(&mut psi, 3, 1, &h);
        let i2 = CMat::identity(2, 2);
        let full = kron(&kron(&i2, &crate::linalg::to_dyn(&h)), &i2);
        let expect = full * v;
        for k in 0..8 {
            assert!((psi[k] - expect[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn noiseless_x_is_always_bright() {
        let p = x_program(2);
        let rec = run_program(&p, &NoiseModel::ideal(), 1000, 7).unwrap();
        assert_eq!(rec.counts[0b10], 1000);
        assert_eq!(rec.bright_fraction(0), 1.0);
        assert_eq!(rec.bright_fraction(1), 0.0);
    }

    #[test]
    fn detection_fidelity_only() {
        let p = x_program(1);
        let noise = NoiseModel::ideal().with_detection(0.98, 0.0);
        let shots = 20_000;
        let rec = run_program(&p, &noise, shots, 3).unwrap();
        let f = rec.bright_fraction(0);
        let sigma = (0.98 * 0.02 / shots as f64).sqrt();
        assert!((f - 0.98).abs() < 3.0 * sigma, "{f}");
    }

    #[test]
    fn seeded_determinism() {
        let p = x_program(2);
        let noise = NoiseModel::paper();
        let a = run_program(&p, &noise, 300, 11).unwrap();
        let b = run_program(&p, &noise, 300, 11).unwrap();
        assert_eq!(a, b);
        let c2 = run_program(&p, &noise, 300, 12).unwrap();
        assert_ne!(a.counts, c2.counts);
    }

    #[test]
    fn scan_endpoints() {
        let p = x_program(2);
        let len = p.gate_steps().len();
        let start = expected_probabilities(&p, &NoiseModel::ideal(), 1, 0, Some(0)).unwrap();
        assert!((start[0] - 1.0).abs() < 1e-12);
        let end = expected_probabilities(&p, &NoiseModel::ideal(), 1, 0, Some(len)).unwrap();
        let full = ideal_state(&p, None).unwrap().probabilities();
        for (a, b) in end.iter().zip(&full) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(gate_scan(&p, len + 1, &NoiseModel::ideal(), 10, 0), Err(Error::ScanOutOfRange { .. })));
    }

    #[test]
    fn zero_noise_matches_ideal() {
        let p = x_program(2);
        let a = expected_probabilities(&p, &NoiseModel::ideal(), 5, 1, None).unwrap();
        let b = ideal_state(&p, None).unwrap().probabilities();
        assert_eq!(a, b);
    }
}
