//! Single-qubit randomized benchmarking: sequence generation, simulation
//! either under an abstract depolarizing channel or through the compiler and
//! simulator, and the survival fit F = ½ + ½(1 − 2ε_m)(1 − 2ε_g)^L.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordTable, GROUP_ORDER};
use crate::compiler::{compile_circuit, CompilerConfig};
use crate::error::{Error, Result};
use crate::fit::levenberg_marquardt;
use crate::gates;
use crate::ir::{Circuit, Gate, SingleGate};
use crate::linalg::{c, Mat2, C64};
use crate::sim::{run_program, NoiseModel};

/// Mean survival after `length` Cliffords.
pub fn rb_survival(eps_g: f64, eps_m: f64, length: f64) -> f64 {
    0.5 + 0.5 * (1.0 - 2.0 * eps_m) * (1.0 - 2.0 * eps_g).powf(length)
}

/// Per-ion Clifford indices plus the final gate that takes every ion to |1⟩.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbSequence {
    /// `cliffords[ion][step]`.
    pub cliffords: Vec<Vec<usize>>,
    pub inverse: Vec<usize>,
}

impl RbSequence {
    pub fn random<R: Rng>(n_ions: usize, length: usize, rng: &mut R) -> Self {
        let table = CliffordTable::get();
        let x = table.index_of(&gates::x()).expect("X is a Clifford");
        let mut cliffords = Vec::with_capacity(n_ions);
        let mut inverse = Vec::with_capacity(n_ions);
        for _ in 0..n_ions {
            let seq: Vec<usize> = (0..length).map(|_| rng.random_range(0..GROUP_ORDER)).collect();
            let net = seq.iter().fold(0, |acc, &k| table.compose(k, acc));
            inverse.push(table.compose(x, table.inverse(net)));
            cliffords.push(seq);
        }
        Self { cliffords, inverse }
    }

    pub fn length(&self) -> usize {
        self.cliffords.first().map_or(0, Vec::len)
    }

    /// One cascade per step, separated by barriers so that every Clifford is
    /// executed rather than merged with its neighbours.
    pub fn circuit(&self) -> Circuit {
        let n = self.cliffords.len();
        let mut gates = vec![Gate::Prep];
        for step in 0..=self.length() {
            for ion in 0..n {
                let k = if step < self.length() { self.cliffords[ion][step] } else { self.inverse[ion] };
                gates.push(Gate::Single { ion, gate: SingleGate::Clifford(k) });
            }
            gates.push(Gate::Barrier);
        }
        gates.push(Gate::Measure);
        Circuit::new(gates)
    }
}

/// How the sequences are executed.
#[derive(Debug, Clone, PartialEq)]
pub enum RbMode {
    /// Ideal Cliffords each followed by a depolarizing channel with average
    /// gate error `error`, and a readout flip with probability `spam`.
    Depolarizing { error: f64, spam: f64, noisy_inverse: bool },
    /// Compiled to pulse programs and run shot by shot.
    Compiled { config: Box<CompilerConfig>, noise: NoiseModel },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RbFitKind {
    /// Offset fixed at ½.
    #[default]
    TwoParameter,
    /// Free offset.
    ThreeParameter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbSettings {
    pub lengths: Vec<usize>,
    pub sequences: usize,
    pub shots: u64,
    pub seed: u64,
    pub fit: RbFitKind,
}

impl Default for RbSettings {
    fn default() -> Self {
        Self { lengths: vec![1, 2, 4, 8, 16, 32, 64], sequences: 50, shots: 100, seed: 1, fit: RbFitKind::TwoParameter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbFit {
    pub eps_g: f64,
    pub eps_g_err: f64,
    pub eps_m: f64,
    pub eps_m_err: f64,
    /// Fitted offset for the three-parameter form.
    pub offset: Option<f64>,
    pub reduced_chi2: f64,
}

impl RbFit {
    pub fn fidelity(&self) -> f64 {
        1.0 - self.eps_g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbExperiment {
    pub lengths: Vec<usize>,
    pub sequences: Vec<Vec<RbSequence>>,
    /// `survival[ion][length index][sequence]`.
    pub survival: Vec<Vec<Vec<f64>>>,
    pub fits: Vec<RbFit>,
}

impl RbExperiment {
    /// Mean and standard error of the mean per length for one ion.
    pub fn averages(&self, ion: usize) -> Vec<(f64, f64)> {
        self.survival[ion].iter().map(|s| mean_sem(s)).collect()
    }
}

fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Fits survival means to the decay model. Uncertainties below `1e-4` are
/// floored so noiseless data can still be weighted.
pub fn fit_rb(lengths: &[usize], means: &[f64], sems: &[f64], kind: RbFitKind) -> Result<RbFit> {
    if lengths.is_empty() || lengths.len() != means.len() || means.len() != sems.len() {
        return Err(Error::FitFailed("lengths, means and errors must be non-empty and equal in size".into()));
    }
    let sig: Vec<f64> = sems.iter().map(|s| s.max(1e-4)).collect();
    let ls: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    // start from a log-linear estimate of the decay
    let decay = {
        let (l0, l1) = (ls[0], ls[ls.len() - 1]);
        let (a0, a1) = ((2.0 * means[0] - 1.0).max(1e-3), (2.0 * means[means.len() - 1] - 1.0).max(1e-3));
        if l1 > l0 {
            ((a1 / a0).ln() / (l1 - l0)).exp().clamp(0.5, 1.0)
        } else {
            0.99
        }
    };
    let eg0 = (1.0 - decay) / 2.0;
    let em0 = ((1.0 - (2.0 * means[0] - 1.0).max(1e-3) / decay.powf(ls[0])) / 2.0).clamp(0.0, 0.4);
    let fit = match kind {
        RbFitKind::TwoParameter => levenberg_marquardt(
            |p| (0..ls.len()).map(|k| (rb_survival(p[0], p[1], ls[k]) - means[k]) / sig[k]).collect(),
            &[eg0, em0],
        )?,
        RbFitKind::ThreeParameter => levenberg_marquardt(
            |p| (0..ls.len()).map(|k| (p[2] - 0.5 + rb_survival(p[0], p[1], ls[k]) - means[k]) / sig[k]).collect(),
            &[eg0, em0, 0.5],
        )?,
    };
    if fit.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailed("non-finite parameters".into()));
    }
    Ok(RbFit {
        eps_g: fit.params[0],
        eps_g_err: fit.errors[0],
        eps_m: fit.params[1],
        eps_m_err: fit.errors[1],
        offset: fit.params.get(2).copied(),
        reduced_chi2: fit.reduced_chi2(),
    })
}

fn apply(psi: &mut [C64; 2], u: &Mat2) {
    let a = u[(0, 0)] * psi[0] + u[(0, 1)] * psi[1];
    let b = u[(1, 0)] * psi[0] + u[(1, 1)] * psi[1];
    *psi = [a, b];
}

/// Survival of one ion under the depolarizing model, sampled shot by shot.
fn depolarizing_survival<R: Rng>(
    seq: &[usize],
    inverse: usize,
    error: f64,
    spam: f64,
    noisy_inverse: bool,
    shots: u64,
    rng: &mut R,
) -> f64 {
    let table = CliffordTable::get();
    let paulis = [gates::x(), gates::y(), gates::z()];
    // ρ → (1 − p)ρ + p·I/2 has average error p/2; a uniformly random
    // Pauli (identity included) with probability p realizes it
    let p = 2.0 * error;
    let mut good = 0u64;
    for _ in 0..shots {
        let mut psi = [c(1.0, 0.0), c(0.0, 0.0)];
        let steps = seq.iter().map(|&k| (k, true)).chain(std::iter::once((inverse, noisy_inverse)));
        for (k, noisy) in steps {
            apply(&mut psi, &table.matrix(k));
            if noisy && rng.random::<f64>() < p {
                let r = rng.random_range(0..4);
                if r > 0 {
                    apply(&mut psi, &paulis[r - 1]);
                }
            }
        }
        let mut bright = rng.random::<f64>() < psi[1].norm_sqr();
        if rng.random::<f64>() < spam {
            bright = !bright;
        }
        good += bright as u64;
    }
    good as f64 / shots as f64
}

/// Generates, runs and fits an RB experiment on every ion of the chain.
pub fn rb_run(n_ions: usize, settings: &RbSettings, mode: &RbMode) -> Result<RbExperiment> {
    if settings.lengths.is_empty() {
        return Err(Error::Config("RB needs at least one sequence length".into()));
    }
    if settings.sequences == 0 || settings.shots == 0 {
        return Err(Error::Config("RB needs at least one sequence and one shot".into()));
    }
    match mode {
        RbMode::Depolarizing { error, spam, .. } => {
            for (name, v) in [("error", *error), ("spam", *spam)] {
                if !(0.0..=0.5).contains(&v) {
                    return Err(Error::OutOfRange { name, value: v });
                }
            }
        }
        RbMode::Compiled { config, noise } => {
            noise.validate()?;
            if config.trap.n_ions != n_ions {
                return Err(Error::Config(format!(
                    "compiler configured for {} ions, not {n_ions}",
                    config.trap.n_ions
                )));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut sequences = Vec::with_capacity(settings.lengths.len());
    let mut survival = vec![vec![Vec::with_capacity(settings.sequences); settings.lengths.len()]; n_ions];
    for (li, &len) in settings.lengths.iter().enumerate() {
        let mut at_len = Vec::with_capacity(settings.sequences);
        for _ in 0..settings.sequences {
            let seq = RbSequence::random(n_ions, len, &mut rng);
            let run_seed: u64 = rng.random();
            match mode {
                RbMode::Depolarizing { error, spam, noisy_inverse } => {
                    let mut shot_rng = ChaCha8Rng::seed_from_u64(run_seed);
                    for ion in 0..n_ions {
                        let s = depolarizing_survival(
                            &seq.cliffords[ion],
                            seq.inverse[ion],
                            *error,
                            *spam,
                            *noisy_inverse,
                            settings.shots,
                            &mut shot_rng,
                        );
                        survival[ion][li].push(s);
                    }
                }
                RbMode::Compiled { config, noise } => {
                    let program = compile_circuit(&seq.circuit(), config)?;
                    let rec = run_program(&program, noise, settings.shots, run_seed)?;
                    for (ion, s) in survival.iter_mut().enumerate() {
                        s[li].push(rec.bright_fraction(ion));
                    }
                }
            }
            at_len.push(seq);
        }
        sequences.push(at_len);
    }
    let fits = survival
        .iter()
        .map(|per_len| {
            let (means, sems): (Vec<f64>, Vec<f64>) = per_len.iter().map(|s| mean_sem(s)).unzip();
            fit_rb(&settings.lengths, &means, &sems, settings.fit)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RbExperiment { lengths: settings.lengths.clone(), sequences, survival, fits })
}
