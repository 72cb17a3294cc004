//! Two-qubit process tomography: each ion prepared and analysed in
//! {|0⟩, |1⟩, |+⟩, |−⟩_y}, the |00⟩ probability of every setting inverted to a
//! χ matrix in the Pauli basis constrained to physical processes, and a
//! parametric bootstrap of the fidelity.
//!
//! χ is defined by `E(ρ) = Σ_ab χ_ab P_a ρ P_b` with unnormalized two-qubit
//! Pauli strings in `PauliString::all(2)` order, so a trace-preserving map
//! has `Tr χ = 1`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::compiler::{compile_circuit, CompilerConfig};
use crate::error::{Error, Result};
use crate::ir::{Circuit, Gate, SingleGate};
use crate::linalg::{c, hermitian_eigen, CMat, Unitary, C64};
use crate::pauli::{pauli_expand, PauliString};
use crate::readout::{confusion_matrix, infer_with};
use crate::sim::{run_program, NoiseModel};

pub const N_PAULI: usize = 16;
pub const N_SETTINGS: usize = 256;
const ML_MAX_ITER: usize = 20_000;
const ML_TOL: f64 = 1e-9;
const DOMAIN_TOL: f64 = 1e-9;
const CPTP_MAX_ITER: usize = 10_000;
const CPTP_TOL: f64 = 1e-11;
pub const STATE_LABELS: [&str; 4] = ["0", "1", "+", "-y"];

/// Gate taking |0⟩ to the k-th tomography state.
fn prep_gate(k: usize) -> Option<SingleGate> {
    match k {
        0 => None,
        1 => Some(SingleGate::R { theta: PI, phi: 0.0 }),
        2 => Some(SingleGate::R { theta: FRAC_PI_2, phi: FRAC_PI_2 }),
        3 => Some(SingleGate::R { theta: FRAC_PI_2, phi: 0.0 }),
        _ => unreachable!("four tomography states"),
    }
}

/// Gate taking the k-th tomography state to |0⟩.
fn analysis_gate(k: usize) -> Option<SingleGate> {
    match k {
        0 => None,
        1 => Some(SingleGate::R { theta: PI, phi: 0.0 }),
        2 => Some(SingleGate::R { theta: FRAC_PI_2, phi: -FRAC_PI_2 }),
        3 => Some(SingleGate::R { theta: FRAC_PI_2, phi: PI }),
        _ => unreachable!("four tomography states"),
    }
}

fn state(k: usize) -> DVector<C64> {
    let g = prep_gate(k).map_or(crate::gates::identity(), |g| g.matrix());
    DVector::from_vec(vec![g[(0, 0)], g[(1, 0)]])
}

fn two_ion_state(k: usize) -> DVector<C64> {
    let (a, b) = (state(k / 4), state(k % 4));
    DVector::from_fn(4, |i, _| a[i / 2] * b[i % 2])
}

/// Setting `s = 16·prep + analysis`, each two-ion index `4·ion0 + ion1`.
pub fn setting_labels(s: usize) -> (String, String) {
    let label = |k: usize| format!("{}{}", STATE_LABELS[k / 4], STATE_LABELS[k % 4]);
    (label(s / 16), label(s % 16))
}

/// The 256 tomography circuits around `body`. Preparation and analysis are
/// kept in their own cascades by barriers.
pub fn qpt_circuits(body: &Circuit) -> Vec<Circuit> {
    let inner: Vec<Gate> = body.gates.iter().filter(|g| !matches!(g, Gate::Prep | Gate::Measure)).cloned().collect();
    (0..N_SETTINGS)
        .map(|s| {
            let (prep, analysis) = (s / 16, s % 16);
            let mut gates = vec![Gate::Prep];
            for (ion, k) in [(0, prep / 4), (1, prep % 4)] {
                if let Some(gate) = prep_gate(k) {
                    gates.push(Gate::Single { ion, gate });
                }
            }
            gates.push(Gate::Barrier);
            gates.extend(inner.iter().cloned());
            gates.push(Gate::Barrier);
            for (ion, k) in [(0, analysis / 4), (1, analysis % 4)] {
                if let Some(gate) = analysis_gate(k) {
                    gates.push(Gate::Single { ion, gate });
                }
            }
            gates.push(Gate::Measure);
            Circuit::new(gates)
        })
        .collect()
}

/// χ of a unitary process: `χ_ab = u_a u_b*` with `U = Σ u_a P_a`.
pub fn chi_from_unitary(u: &Unitary) -> Result<CMat> {
    if u.dim() != 4 {
        return Err(Error::Tomography(format!("expected a two-qubit process, got dimension {}", u.dim())));
    }
    let coeffs: Vec<C64> = pauli_expand(u)?.into_iter().map(|(_, a)| a).collect();
    Ok(CMat::from_fn(N_PAULI, N_PAULI, |a, b| coeffs[a] * coeffs[b].conj()))
}

/// `Re Tr(χ_ideal χ)`.
pub fn process_fidelity(ideal: &CMat, chi: &CMat) -> f64 {
    (ideal * chi).trace().re
}

/// How a linear-inversion χ is mapped onto positive unit-trace matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    /// Negative eigenvalues set to zero, then renormalized.
    Clip,
    /// Closest positive unit-trace matrix in Frobenius norm. For unit-trace
    /// input the negative mass is taken evenly from the smallest remaining
    /// eigenvalues, the maximum-likelihood estimate under Gaussian noise.
    #[default]
    Redistribute,
}

/// How χ is estimated from the measured probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Linear inversion, then eigenvalue clipping.
    LinearClip,
    /// Linear inversion, then the closest positive unit-trace matrix.
    LinearProjected,
    /// Linear inversion, then the closest completely positive,
    /// trace-preserving map.
    LinearCptp,
    /// Binomial likelihood maximized over completely positive,
    /// trace-preserving χ, started from the projected linear estimate.
    #[default]
    MaximumLikelihood,
}

/// Hermitian part projected to a positive matrix of unit trace.
pub fn project_physical(chi: &CMat, method: Projection) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigen(chi);
    let fixed: Vec<f64> = match method {
        Projection::Clip => vals.iter().map(|v| v.max(0.0)).collect(),
        Projection::Redistribute => {
            // Euclidean projection of the spectrum onto the unit simplex
            let mut desc = vals.clone();
            desc.reverse();
            let mut cum = 0.0;
            let mut tau = 0.0;
            for (j, u) in desc.iter().enumerate() {
                cum += u;
                let cand = (cum - 1.0) / (j + 1) as f64;
                if u - cand > 0.0 {
                    tau = cand;
                }
            }
            vals.iter().map(|v| (v - tau).max(0.0)).collect()
        }
    };
    let total: f64 = fixed.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::Tomography("no positive part left after projection".into()));
    }
    let d = CMat::from_diagonal(&DVector::from_iterator(fixed.len(), fixed.iter().map(|v| c(v.max(0.0) / total, 0.0))));
    Ok(&vecs * d * vecs.adjoint())
}

/// `χ ↦ Σ_ab χ_ab P_b P_a`, equal to the identity for trace-preserving maps,
/// as a 16×256 matrix on row-major χ, with the pseudo-inverse needed to
/// project onto that affine set.
struct TraceCondition {
    a: CMat,
    pinv: CMat,
}

fn trace_condition() -> &'static TraceCondition {
    static TC: OnceLock<TraceCondition> = OnceLock::new();
    TC.get_or_init(|| {
        let paulis: Vec<CMat> = PauliString::all(2).iter().map(PauliString::matrix).collect();
        let mut a = CMat::zeros(16, N_PAULI * N_PAULI);
        for i in 0..N_PAULI {
            for j in 0..N_PAULI {
                let prod = &paulis[j] * &paulis[i];
                for r in 0..16 {
                    a[(r, i * N_PAULI + j)] = prod[(r / 4, r % 4)];
                }
            }
        }
        let gram = &a * a.adjoint();
        let inv = gram.try_inverse().expect("trace condition has full rank");
        let pinv = a.adjoint() * inv;
        TraceCondition { a, pinv }
    })
}

fn project_trace_preserving(chi: &CMat) -> CMat {
    let tc = trace_condition();
    let v = DVector::from_iterator(N_PAULI * N_PAULI, chi.transpose().iter().copied());
    let target = DVector::from_fn(16, |r, _| if r / 4 == r % 4 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let out = &v - &tc.pinv * (&tc.a * &v - target);
    let m = CMat::from_row_slice(N_PAULI, N_PAULI, out.as_slice());
    (&m + m.adjoint()) * c(0.5, 0.0)
}

fn project_positive(chi: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(chi);
    let d = CMat::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|v| c(v.max(0.0), 0.0))));
    &vecs * d * vecs.adjoint()
}

/// Closest completely positive, trace-preserving χ in Frobenius norm, by
/// Dykstra's alternating projections.
pub fn project_cptp(chi: &CMat) -> Result<CMat> {
    let mut x = (chi + chi.adjoint()) * c(0.5, 0.0);
    let mut p = CMat::zeros(N_PAULI, N_PAULI);
    let mut q = CMat::zeros(N_PAULI, N_PAULI);
    for _ in 0..CPTP_MAX_ITER {
        let y = project_positive(&(&x + &p));
        p = &x + &p - &y;
        let xn = project_trace_preserving(&(&y + &q));
        q = &y + &q - &xn;
        let gap = (&y - &xn).norm();
        x = xn;
        if gap < CPTP_TOL {
            let y = project_positive(&x);
            let tr = y.trace().re;
            return Ok(y * c(1.0 / tr, 0.0));
        }
    }
    Err(Error::Tomography("CPTP projection did not converge".into()))
}

/// Linear map between the 256 real parameters of a Hermitian χ and the 256
/// |00⟩ probabilities, with its inverse.
#[derive(Debug, Clone)]
pub struct Tomography {
    forward: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

/// Index pairs of the Hermitian parametrization: diagonal entries, then the
/// real and imaginary parts of each upper-triangle entry.
fn parameter_layout() -> Vec<(usize, usize, bool)> {
    let mut out: Vec<(usize, usize, bool)> = (0..N_PAULI).map(|a| (a, a, false)).collect();
    for a in 0..N_PAULI {
        for b in a + 1..N_PAULI {
            out.push((a, b, false));
            out.push((a, b, true));
        }
    }
    out
}

impl Tomography {
    pub fn new() -> Result<Self> {
        let paulis: Vec<CMat> = PauliString::all(2).iter().map(PauliString::matrix).collect();
        let layout = parameter_layout();
        let mut forward = DMatrix::zeros(N_SETTINGS, N_SETTINGS);
        for s in 0..N_SETTINGS {
            let phi = two_ion_state(s / 16);
            let psi = two_ion_state(s % 16);
            // x_a = ⟨ψ|P_a|φ⟩, and p = Σ χ_ab x_a x_b*
            let x: Vec<C64> = paulis.iter().map(|p| (psi.adjoint() * p * &phi)[(0, 0)]).collect();
            for (j, &(a, b, imag)) in layout.iter().enumerate() {
                let bab = x[a] * x[b].conj();
                forward[(s, j)] = if a == b {
                    bab.re
                } else if imag {
                    -2.0 * bab.im
                } else {
                    2.0 * bab.re
                };
            }
        }
        let inverse = forward
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Tomography("settings are not informationally complete".into()))?;
        Ok(Self { forward, inverse })
    }

    fn to_params(chi: &CMat) -> DVector<f64> {
        let layout = parameter_layout();
        DVector::from_iterator(
            layout.len(),
            layout.iter().map(|&(a, b, imag)| if imag { chi[(a, b)].im } else { chi[(a, b)].re }),
        )
    }

    fn from_params(t: &DVector<f64>) -> CMat {
        let mut chi = CMat::zeros(N_PAULI, N_PAULI);
        for (j, &(a, b, imag)) in parameter_layout().iter().enumerate() {
            if a == b {
                chi[(a, a)] = c(t[j], 0.0);
            } else if imag {
                chi[(a, b)].im = t[j];
                chi[(b, a)].im = -t[j];
            } else {
                chi[(a, b)].re = t[j];
                chi[(b, a)].re = t[j];
            }
        }
        chi
    }

    /// |00⟩ probabilities predicted by χ for every setting.
    pub fn predict(&self, chi: &CMat) -> Vec<f64> {
        (&self.forward * Self::to_params(chi)).iter().copied().collect()
    }

    /// Linear-inversion estimate, not yet projected.
    pub fn linear_chi(&self, p00: &[f64]) -> Result<CMat> {
        if p00.len() != N_SETTINGS {
            return Err(Error::Tomography(format!("{} settings measured, {N_SETTINGS} needed", p00.len())));
        }
        Ok(Self::from_params(&(&self.inverse * DVector::from_column_slice(p00))))
    }

    /// Linear inversion followed by projection.
    pub fn reconstruct(&self, p00: &[f64], method: Projection) -> Result<CMat> {
        project_physical(&self.linear_chi(p00)?, method)
    }

    /// Estimate from |00⟩ frequencies measured with `shots` repetitions.
    /// `start` seeds the likelihood search.
    pub fn estimate(&self, p00: &[f64], shots: u64, estimator: Estimator, start: Option<&CMat>) -> Result<CMat> {
        match estimator {
            Estimator::LinearClip => self.reconstruct(p00, Projection::Clip),
            Estimator::LinearProjected => self.reconstruct(p00, Projection::Redistribute),
            Estimator::LinearCptp => project_cptp(&self.linear_chi(p00)?),
            Estimator::MaximumLikelihood => {
                let start = match start {
                    Some(c) => c.clone(),
                    None => self.reconstruct(p00, Projection::Redistribute)?,
                };
                self.maximum_likelihood(p00, shots as f64, &start)
            }
        }
    }

    /// Mean binomial log-likelihood per shot and its gradient with respect
    /// to the parameters; `None` outside the domain.
    fn likelihood(&self, t: &DVector<f64>, freq: &[f64], shots: f64) -> Option<(f64, DVector<f64>)> {
        let p = &self.forward * t;
        let mut ll = 0.0;
        let mut w = DVector::zeros(N_SETTINGS);
        for s in 0..N_SETTINGS {
            let n = (freq[s] * shots).round().clamp(0.0, shots);
            let m = shots - n;
            // a non-trace-preserving χ can predict p outside [0, 1]
            let ps = p[s];
            if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&ps) {
                return None;
            }
            let ps = ps.clamp(0.0, 1.0);
            if n > 0.0 {
                if ps <= 0.0 {
                    return None;
                }
                ll += n * ps.ln();
                w[s] += n / ps;
            }
            if m > 0.0 {
                if ps >= 1.0 {
                    return None;
                }
                ll += m * (1.0 - ps).ln();
                w[s] -= m / (1.0 - ps);
            }
        }
        let norm = shots * N_SETTINGS as f64;
        Some((ll / norm, self.forward.transpose() * w / norm))
    }

    /// Gradient in parameter space as a Hermitian matrix under the trace
    /// inner product.
    fn gradient_matrix(g: &DVector<f64>) -> CMat {
        let mut m = CMat::zeros(N_PAULI, N_PAULI);
        for (j, &(a, b, imag)) in parameter_layout().iter().enumerate() {
            if a == b {
                m[(a, a)] = c(g[j], 0.0);
            } else if imag {
                m[(a, b)].im = g[j] / 2.0;
                m[(b, a)].im = -g[j] / 2.0;
            } else {
                m[(a, b)].re = g[j] / 2.0;
                m[(b, a)].re = g[j] / 2.0;
            }
        }
        m
    }

    /// Accelerated projected gradient ascent of the likelihood.
    pub fn maximum_likelihood(&self, freq: &[f64], shots: f64, start: &CMat) -> Result<CMat> {
        if freq.len() != N_SETTINGS {
            return Err(Error::Tomography(format!("{} settings measured, {N_SETTINGS} needed", freq.len())));
        }
        let eval = |chi: &CMat| self.likelihood(&Self::to_params(chi), freq, shots);
        // a start on the boundary of the domain is pulled slightly inside
        let mut x = project_cptp(start)?;
        if eval(&x).is_none() {
            let mixed = CMat::identity(N_PAULI, N_PAULI) * c(1.0 / N_PAULI as f64, 0.0);
            let mut mix = 1e-6;
            loop {
                let trial = &x * c(1.0 - mix, 0.0) + &mixed * c(mix, 0.0);
                if eval(&trial).is_some() {
                    x = trial;
                    break;
                }
                mix *= 10.0;
                if mix > 1.0 {
                    return Err(Error::Tomography("no feasible start for the likelihood".into()));
                }
            }
        }
        let mut fx = eval(&x).expect("feasible start").0;
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut lip = 1.0f64;
        let mut fresh = true;
        for _ in 0..ML_MAX_ITER {
            let Some((fy, gy)) = eval(&y) else {
                y = x.clone();
                t = 1.0;
                fresh = true;
                continue;
            };
            let g = Self::gradient_matrix(&gy);
            let mut accepted = None;
            while lip < 1e14 {
                let z = project_cptp(&(&y + &g * c(1.0 / lip, 0.0)))?;
                if let Some((fz, _)) = eval(&z) {
                    let d = &z - &y;
                    let lin = (g.adjoint() * &d).trace().re;
                    if fz >= fy + lin - 0.5 * lip * d.norm_squared() {
                        accepted = Some((z, fz));
                        break;
                    }
                }
                lip *= 2.0;
            }
            let Some((z, fz)) = accepted else { break };
            if fz < fx {
                if fresh {
                    break;
                }
                // momentum overshoot: restart from the last iterate
                y = x.clone();
                t = 1.0;
                fresh = true;
                continue;
            }
            fresh = false;
            let step = (&z - &x).norm();
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = &z + (&z - &x) * c((t - 1.0) / t_next, 0.0);
            t = t_next;
            let gain = fz - fx;
            x = z;
            fx = fz;
            lip *= 0.9;
            if step < ML_TOL || gain.abs() < 1e-14 {
                break;
            }
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QptSettings {
    pub shots: u64,
    pub seed: u64,
    pub bootstrap: usize,
    pub estimator: Estimator,
    /// Estimator applied to each bootstrap resample.
    pub bootstrap_estimator: Estimator,
}

impl Default for QptSettings {
    fn default() -> Self {
        Self {
            shots: 160,
            seed: 1,
            bootstrap: 10_000,
            estimator: Estimator::MaximumLikelihood,
            bootstrap_estimator: Estimator::LinearCptp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessMatrix {
    pub chi: CMat,
    pub ideal: CMat,
    pub fidelity: f64,
    /// |00⟩ probability per setting.
    pub p00: Vec<f64>,
    pub shots: u64,
    /// Mean and spread of the fidelity over resamples, each reconstructed
    /// with the bootstrap estimator.
    pub bootstrap_mean: f64,
    pub bootstrap_std: f64,
    /// Mean over χ entries of the bootstrap spread of the real part.
    pub element_std: f64,
}

/// Reconstruction and bootstrap from already measured |00⟩ probabilities.
pub fn qpt_from_p00(p00: &[f64], shots: u64, ideal: &CMat, settings: &QptSettings) -> Result<ProcessMatrix> {
    let (bootstrap, estimator) = (settings.bootstrap, settings.bootstrap_estimator);
    let tomo = Tomography::new()?;
    let chi = tomo.estimate(p00, shots, settings.estimator, None)?;
    let fidelity = process_fidelity(ideal, &chi);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut fids = Vec::with_capacity(bootstrap);
    let mut sum = DMatrix::<f64>::zeros(N_PAULI, N_PAULI);
    let mut sum_sq = DMatrix::<f64>::zeros(N_PAULI, N_PAULI);
    let mut resample = vec![0.0; N_SETTINGS];
    for _ in 0..bootstrap {
        for (r, p) in resample.iter_mut().zip(p00) {
            let dist = Binomial::new(shots, p.clamp(0.0, 1.0)).map_err(|e| Error::Tomography(e.to_string()))?;
            *r = dist.sample(&mut rng) as f64 / shots as f64;
        }
        let chi_b = tomo.estimate(&resample, shots, estimator, Some(&chi))?;
        fids.push(process_fidelity(ideal, &chi_b));
        let re = chi_b.map(|v| v.re);
        sum_sq += re.component_mul(&re);
        sum += re;
    }
    let (bootstrap_mean, bootstrap_std, element_std) = if bootstrap > 1 {
        let n = bootstrap as f64;
        let mean = fids.iter().sum::<f64>() / n;
        let var = fids.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let elem = sum_sq.zip_map(&sum, |s2, s| ((s2 - s * s / n) / (n - 1.0)).max(0.0).sqrt()).mean();
        (mean, var.sqrt(), elem)
    } else {
        (fidelity, 0.0, 0.0)
    };
    Ok(ProcessMatrix {
        chi,
        ideal: ideal.clone(),
        fidelity,
        p00: p00.to_vec(),
        shots,
        bootstrap_mean,
        bootstrap_std,
        element_std,
    })
}

/// Compiles and runs all settings around `body` on a two-ion chain. The
/// |00⟩ probability of each setting is the maximum-likelihood estimate
/// under the detection model.
pub fn qpt_run(
    body: &Circuit,
    cfg: &CompilerConfig,
    noise: &NoiseModel,
    settings: &QptSettings,
) -> Result<ProcessMatrix> {
    if cfg.trap.n_ions != 2 {
        return Err(Error::Tomography(format!("needs a two-ion chain, got {}", cfg.trap.n_ions)));
    }
    if settings.shots == 0 {
        return Err(Error::Tomography("no shots per setting".into()));
    }
    let ideal = chi_from_unitary(&body.ideal_unitary(2)?)?;
    let confusion = confusion_matrix(2, noise.detection_fidelity, noise.pmt_crosstalk)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut p00 = Vec::with_capacity(N_SETTINGS);
    for circuit in qpt_circuits(body) {
        let program = compile_circuit(&circuit, cfg)?;
        let rec = run_program(&program, noise, settings.shots, rng.random())?;
        p00.push(infer_with(&rec.counts, &confusion)?[0]);
    }
    qpt_from_p00(&p00, settings.shots, &ideal, settings)
}

/// Exact |00⟩ probabilities of a unitary process, for checks.
pub fn ideal_p00(u: &Unitary) -> Vec<f64> {
    (0..N_SETTINGS)
        .map(|s| {
            let out = u.matrix() * two_ion_state(s / 16);
            (two_ion_state(s % 16).adjoint() * out)[(0, 0)].norm_sqr()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::haar_unitary;
    use crate::gates;
    use crate::linalg::tensor;

    #[test]
    fn states_and_analysis_are_inverse() {
        for k in 0..4 {
            let v = state(k);
            let a = analysis_gate(k).map_or(gates::identity(), |g| g.matrix());
            let back = a * nalgebra::Vector2::new(v[0], v[1]);
            assert!((back[0].norm() - 1.0).abs() < 1e-12);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let my = state(3);
        assert!((my[0] - c(s, 0.0)).norm() < 1e-12 && (my[1] - c(0.0, -s)).norm() < 1e-12);
    }

    #[test]
    fn identity_process() {
        let ideal = chi_from_unitary(&Unitary::identity(4)).unwrap();
        let pm = qpt_from_p00(
            &ideal_p00(&Unitary::identity(4)),
            1000,
            &ideal,
            &QptSettings { bootstrap: 0, ..Default::default() },
        )
        .unwrap();
        assert!((pm.chi[(0, 0)].re - 1.0).abs() < 1e-9);
        let others: f64 = pm.chi.iter().map(|v| v.norm()).sum::<f64>() - pm.chi[(0, 0)].norm();
        assert!(others < 1e-9);
        assert!((pm.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cnot_chi_has_sixteen_quarter_entries() {
        let chi = chi_from_unitary(&gates::cnot(0, 1)).unwrap();
        let nonzero: Vec<C64> = chi.iter().copied().filter(|v| v.norm() > 1e-12).collect();
        assert_eq!(nonzero.len(), 16);
        for v in nonzero {
            assert!(v.im.abs() < 1e-12 && (v.re.abs() - 0.25).abs() < 1e-12);
        }
        assert!((chi.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_unitaries_reconstruct() {
        let tomo = Tomography::new().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let a = Unitary::from_mat2(&haar_unitary(&mut rng));
            let b = Unitary::from_mat2(&haar_unitary(&mut rng));
            let u = gates::cnot(0, 1).compose(&tensor(&a, &b));
            let ideal = chi_from_unitary(&u).unwrap();
            let chi = tomo.reconstruct(&ideal_p00(&u), Projection::Redistribute).unwrap();
            assert!((process_fidelity(&ideal, &chi) - 1.0).abs() < 1e-6);
            let chi = tomo.linear_chi(&ideal_p00(&u)).unwrap();
            assert!((&chi - &chi.adjoint()).iter().all(|v| v.norm() < 1e-10));
            let back = tomo.predict(&chi);
            for (x, y) in back.iter().zip(ideal_p00(&u)) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn product_ordering() {
        let x = Unitary::from_mat2(&gates::x());
        let chi = chi_from_unitary(&tensor(&x, &Unitary::identity(2))).unwrap();
        let xi = PauliString::parse("XI").unwrap().index();
        assert!((chi[(xi, xi)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_is_physical() {
        let mut chi = chi_from_unitary(&gates::cnot(0, 1)).unwrap();
        chi[(1, 1)] -= c(0.05, 0.0);
        chi[(2, 2)] += c(0.05, 0.0);
        chi[(2, 3)] += c(0.02, 0.01);
        chi[(3, 2)] += c(0.02, -0.01);
        for method in [Projection::Clip, Projection::Redistribute] {
            let p = project_physical(&chi, method).unwrap();
            let (vals, _) = hermitian_eigen(&p);
            assert!(vals.iter().all(|v| *v >= -1e-12));
            assert!((p.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn redistribution_matches_closest_positive_matrix() {
        // eigenvalues (0.7, 0.4, -0.1): the negative mass is shared by the
        // two others, giving (0.65, 0.35, 0)
        let d = CMat::from_diagonal(&DVector::from_vec(vec![c(0.7, 0.0), c(0.4, 0.0), c(-0.1, 0.0)]));
        let p = project_physical(&d, Projection::Redistribute).unwrap();
        let (vals, _) = hermitian_eigen(&p);
        for (a, b) in vals.iter().zip([0.0, 0.35, 0.65]) {
            assert!((a - b).abs() < 1e-12, "{vals:?}");
        }
        // (0.8, 0.15, 0.08, 0.02, -0.05): 0.02 − 0.05/4 stays positive
        let d = CMat::from_diagonal(&DVector::from_vec(
            [0.8, 0.15, 0.08, 0.02, -0.05].iter().map(|v| c(*v, 0.0)).collect(),
        ));
        let p = project_physical(&d, Projection::Redistribute).unwrap();
        let (vals, _) = hermitian_eigen(&p);
        for (a, b) in vals.iter().zip([0.0, 0.0075, 0.0675, 0.1375, 0.7875]) {
            assert!((a - b).abs() < 1e-12, "{vals:?}");
        }
    }

    fn trace_map(chi: &CMat) -> CMat {
        let paulis: Vec<CMat> = PauliString::all(2).iter().map(PauliString::matrix).collect();
        let mut out = CMat::zeros(4, 4);
        for a in 0..N_PAULI {
            for b in 0..N_PAULI {
                out += &paulis[b] * &paulis[a] * chi[(a, b)];
            }
        }
        out
    }

    #[test]
    fn cptp_projection() {
        let cnot = chi_from_unitary(&gates::cnot(0, 1)).unwrap();
        let mixed = CMat::identity(N_PAULI, N_PAULI) * c(1.0 / 16.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut chi = &cnot * c(0.9, 0.0);
        for v in chi.iter_mut() {
            *v += c(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02));
        }
        let chi = (&chi + chi.adjoint()) * c(0.5, 0.0);
        let z = project_cptp(&chi).unwrap();
        assert!((trace_map(&z) - CMat::identity(4, 4)).norm() < 1e-8);
        assert!(hermitian_eigen(&z).0.iter().all(|v| *v >= -1e-12));
        // closest point: ⟨x − z, w − z⟩ ≤ 0 for every physical w
        let mut others = vec![cnot.clone(), mixed.clone()];
        for _ in 0..4 {
            let a = Unitary::from_mat2(&haar_unitary(&mut rng));
            let b = Unitary::from_mat2(&haar_unitary(&mut rng));
            let w = chi_from_unitary(&tensor(&a, &b)).unwrap();
            others.push((&w + &cnot) * c(0.5, 0.0));
            others.push(w);
        }
        for w in others {
            let inner = ((&chi - &z).adjoint() * (&w - &z)).trace().re;
            assert!(inner <= 1e-8, "{inner}");
        }
        let p = (&cnot * c(0.7, 0.0)) + (&mixed * c(0.3, 0.0));
        assert!((project_cptp(&p).unwrap() - &p).norm() < 1e-9);
    }

    #[test]
    fn likelihood_beats_projection_on_pure_process() {
        let u = gates::cnot(0, 1);
        let ideal = chi_from_unitary(&u).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shots = 10_000;
        let p: Vec<f64> = ideal_p00(&u)
            .iter()
            .map(|&q| Binomial::new(shots, q.clamp(0.0, 1.0)).unwrap().sample(&mut rng) as f64 / shots as f64)
            .collect();
        let tomo = Tomography::new().unwrap();
        let ml = tomo.estimate(&p, shots, Estimator::MaximumLikelihood, None).unwrap();
        let lin = tomo.estimate(&p, shots, Estimator::LinearCptp, None).unwrap();
        assert!((trace_map(&ml) - CMat::identity(4, 4)).norm() < 1e-8);
        assert!(process_fidelity(&ideal, &ml) > 0.999);
        assert!(process_fidelity(&ideal, &ml) > process_fidelity(&ideal, &lin));
    }

    #[test]
    fn wrong_setting_count() {
        assert!(Tomography::new().unwrap().linear_chi(&[0.0; 10]).is_err());
    }
}
