//! Bell-state fidelity from populations and parity flopping.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compiler::{compile_circuit, CompilerConfig};
use crate::error::{Error, Result};
use crate::fit::linear_least_squares;
use crate::ir::{Circuit, Gate, SingleGate};
use crate::readout::infer_populations;
use crate::sim::{run_program, NoiseModel};

/// F = (P₀₀ + P₁₁)/2 + amplitude/2.
pub fn bell_fidelity(p00: f64, p11: f64, amplitude: f64) -> Result<f64> {
    for (name, v) in [("p00", p00), ("p11", p11), ("amplitude", amplitude)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange { name, value: v });
        }
    }
    if p00 + p11 > 1.0 + 1e-12 {
        return Err(Error::OutOfRange { name: "p00 + p11", value: p00 + p11 });
    }
    Ok((p00 + p11) / 2.0 + amplitude / 2.0)
}

/// Rounds to `digits` decimals with ties (within float noise) going to the
/// even digit, as tabulated fidelities are reported.
pub fn round_half_even(x: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    let y = x * scale;
    let floor = y.floor();
    let frac = y - floor;
    let r = if (frac - 0.5).abs() < 1e-9 {
        if floor.rem_euclid(2.0) == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        y.round()
    };
    r / scale
}

/// Least-squares fit of `a cos 2φ + b sin 2φ + c`; returns amplitude, phase
/// of the oscillation and the constant.
pub fn fit_parity(phases: &[f64], parity: &[f64]) -> Result<(f64, f64, f64)> {
    if phases.len() != parity.len() || phases.len() < 3 {
        return Err(Error::FitFailed("parity scan needs at least three phases".into()));
    }
    let a = DMatrix::from_fn(phases.len(), 3, |i, j| match j {
        0 => (2.0 * phases[i]).cos(),
        1 => (2.0 * phases[i]).sin(),
        _ => 1.0,
    });
    let x = linear_least_squares(&a, &DVector::from_column_slice(parity))
        .map_err(|_| Error::FitFailed("parity scan phases do not resolve a 2φ oscillation".into()))?;
    Ok((x[0].hypot(x[1]), x[1].atan2(x[0]), x[2]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BellSettings {
    pub pair: (usize, usize),
    pub theta: f64,
    /// `None` follows the compiler's echo setting.
    pub echo: Option<bool>,
    pub phases: Vec<f64>,
    pub shots: u64,
    pub seed: u64,
}

impl Default for BellSettings {
    fn default() -> Self {
        Self {
            pair: (0, 1),
            theta: FRAC_PI_4,
            echo: None,
            phases: (0..24).map(|k| k as f64 * PI / 24.0).collect(),
            shots: 500,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityScan {
    pub phases: Vec<f64>,
    pub parity: Vec<f64>,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub p00: f64,
    pub p11: f64,
    pub fidelity: f64,
    /// Excitation of the unaddressed ions (three or more ions only).
    pub spectator_p1: Option<f64>,
}

/// Pair populations `[P00, P01, P10, P11]`, post-selected on all other ions
/// dark, plus the probability that some other ion is bright.
fn pair_populations(pops: &[f64], n: usize, (a, b): (usize, usize)) -> ([f64; 4], f64) {
    let bit = |s: usize, q: usize| (s >> (n - 1 - q)) & 1;
    let mut pair = [0.0; 4];
    let mut leaked = 0.0;
    for (s, p) in pops.iter().enumerate() {
        let others = (0..n).filter(|&q| q != a && q != b).any(|q| bit(s, q) == 1);
        if others {
            leaked += p;
        } else {
            pair[2 * bit(s, a) + bit(s, b)] += p;
        }
    }
    let kept: f64 = pair.iter().sum();
    if kept > 0.0 {
        pair.iter_mut().for_each(|v| *v /= kept);
    }
    (pair, leaked)
}

fn parity_of(p: &[f64; 4]) -> f64 {
    p[0] + p[3] - p[1] - p[2]
}

fn bell_circuit(settings: &BellSettings, analysis: Option<f64>) -> Circuit {
    let (a, b) = settings.pair;
    let mut gates = vec![Gate::Prep, Gate::Ms { a, b, theta: settings.theta, echo: settings.echo }];
    if let Some(phi) = analysis {
        for ion in [a, b] {
            gates.push(Gate::Single { ion, gate: SingleGate::R { theta: FRAC_PI_2, phi } });
        }
    }
    gates.push(Gate::Measure);
    Circuit::new(gates)
}

/// Runs the MS gate, then measures populations directly and parity after
/// an analysis π/2 pulse at each phase. Counts are corrected for channel
/// crosstalk before analysis.
pub fn parity_scan(cfg: &CompilerConfig, noise: &NoiseModel, settings: &BellSettings) -> Result<ParityScan> {
    let n = cfg.trap.n_ions;
    let (a, b) = settings.pair;
    if a.max(b) >= n || a == b {
        return Err(Error::Config(format!("pair ({a}, {b}) not in a {n}-ion chain")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut measure = |analysis: Option<f64>| -> Result<([f64; 4], f64)> {
        let program = compile_circuit(&bell_circuit(settings, analysis), cfg)?;
        let rec = run_program(&program, noise, settings.shots, rng.random())?;
        let pops = infer_populations(&rec.counts, n, noise.pmt_crosstalk)?;
        Ok(pair_populations(&pops, n, settings.pair))
    };
    let (direct, leaked) = measure(None)?;
    let mut parity = Vec::with_capacity(settings.phases.len());
    for &phi in &settings.phases {
        parity.push(parity_of(&measure(Some(phi))?.0));
    }
    let (amplitude, phase, offset) = fit_parity(&settings.phases, &parity)?;
    let amplitude = amplitude.min(1.0);
    let fidelity = bell_fidelity(direct[0], direct[3], amplitude)?;
    Ok(ParityScan {
        phases: settings.phases.clone(),
        parity,
        amplitude,
        phase,
        offset,
        p00: direct[0],
        p11: direct[3],
        fidelity,
        spectator_p1: (n > 2).then_some(leaked),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let f = bell_fidelity(0.47, 0.41, 0.81).unwrap();
        assert_eq!(round_half_even(f, 2), 0.84);
        let f = bell_fidelity(0.32, 0.45, 0.66).unwrap();
        assert_eq!(round_half_even(f, 2), 0.72);
        assert_eq!(bell_fidelity(0.5, 0.5, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn rounding_ties() {
        assert_eq!(round_half_even(0.845, 2), 0.84);
        assert_eq!(round_half_even(0.715, 2), 0.72);
        assert_eq!(round_half_even(0.8449, 2), 0.84);
        assert_eq!(round_half_even(0.8451, 2), 0.85);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(bell_fidelity(1.2, 0.0, 0.5).is_err());
        assert!(bell_fidelity(0.5, 0.5, -0.1).is_err());
        assert!(bell_fidelity(0.7, 0.7, 0.1).is_err());
    }

    #[test]
    fn sinusoid_recovered() {
        let phases: Vec<f64> = (0..10).map(|k| k as f64 * 0.3).collect();
        let parity: Vec<f64> = phases.iter().map(|p| 0.8 * (2.0 * p - 0.4).cos() + 0.05).collect();
        let (amp, ph, off) = fit_parity(&phases, &parity).unwrap();
        assert!((amp - 0.8).abs() < 1e-12 && (ph - 0.4).abs() < 1e-12 && (off - 0.05).abs() < 1e-12);
    }

    #[test]
    fn degenerate_scan() {
        assert!(fit_parity(&[0.0, PI, 2.0 * PI], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_parity(&[0.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn post_selection() {
        // ions (0, 2) addressed, ion 1 spectator; states 000 and 101 kept
        let mut pops = vec![0.0; 8];
        pops[0b000] = 0.45;
        pops[0b101] = 0.45;
        pops[0b010] = 0.1;
        let (pair, leaked) = pair_populations(&pops, 3, (0, 2));
        assert!((pair[0] - 0.5).abs() < 1e-12 && (pair[3] - 0.5).abs() < 1e-12);
        assert!((leaked - 0.1).abs() < 1e-12);
    }
}
