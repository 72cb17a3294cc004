//! Spin–oscillator model of the MS interaction in a truncated Fock space.
//!
//! `H = Ωη J̃x (a e^{−iΔt} + a† e^{iΔt})` with `Δ = ν − δ`. `J̃x` is diagonal
//! in the X basis, so each X-basis spin state drives an independent forced
//! oscillator; those mode propagators are integrated numerically and
//! reassembled on spins ⊗ mode.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{c, max_abs, phase_distance, CMat, Unitary, C64};
use crate::ms::{jx_eigenvalue, weighted_xx, z_frame, MsParams};

/// Ratio between the closure-time area and the Magnus prediction,
/// `A = κ (Ωη)² 2πn / (ν−δ)²`. Fitted against the oscillator model
/// (see `fit_kappa`) and frozen.
pub const AREA_KAPPA: f64 = 1.0;

pub const DEFAULT_N_MAX: usize = 20;

/// Dormand–Prince 5(4) with step-size control on the max-abs local error.
pub struct Rk45 {
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for Rk45 {
    fn default() -> Self {
        Self { tol: 1e-10, max_steps: 1_000_000 }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// `y + h Σ a_i k_i`.
fn combo(y: &CMat, h: f64, terms: &[(f64, &CMat)]) -> CMat {
    let mut out = y.clone();
    for (a, k) in terms {
        out += *k * c(h * a, 0.0);
    }
    out
}

impl Rk45 {
    /// Integrates `dy/dt = f(t, y)` from `t0` and returns `y` at each of the
    /// ascending `times`.
    pub fn integrate<F>(&self, f: F, t0: f64, y0: CMat, times: &[f64]) -> Result<Vec<CMat>>
    where
        F: Fn(f64, &CMat) -> CMat,
    {
        let mut out = Vec::with_capacity(times.len());
        let mut t = t0;
        let mut y = y0;
        let mut h = times.last().map_or(1.0, |tf| (tf - t0).abs().max(1e-12) * 1e-3);
        let mut steps = 0;
        let mut k1 = f(t, &y);
        for &target in times {
            while t < target {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::FitFailed("integrator step limit reached".into()));
                }
                let last = t + h >= target;
                let hs = if last { target - t } else { h };
                let k2 = f(t + hs / 5.0, &combo(&y, hs, &[(A21, &k1)]));
                let k3 = f(t + 3.0 * hs / 10.0, &combo(&y, hs, &[(A31, &k1), (A32, &k2)]));
                let k4 = f(t + 4.0 * hs / 5.0, &combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
                let k5 = f(t + 8.0 * hs / 9.0, &combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
                let k6 = f(t + hs, &combo(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
                let y5 = combo(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
                let k7 = f(t + hs, &y5);
                let zero = CMat::zeros(y.nrows(), y.ncols());
                let err_m = combo(&zero, hs, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
                let err = max_abs(&err_m);
                if err <= self.tol {
                    t = if last { target } else { t + hs };
                    y = y5;
                    k1 = k7;
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * (self.tol / err).powf(0.2)).clamp(0.2, 5.0) };
                if !(last && err <= self.tol) {
                    h = hs * factor;
                }
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}

fn lowering(dim: usize) -> CMat {
    let mut a = CMat::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

/// Mode propagators at `times` for a forced oscillator with coupling `g` (rad/s).
pub fn sector_propagators(g: f64, gap: f64, times: &[f64], n_max: usize) -> Result<Vec<CMat>> {
    let dim = n_max + 1;
    let a = lowering(dim);
    let ad = a.adjoint();
    // time in units of 1/|gap|
    let scale = gap.abs();
    let sign = gap.signum();
    let gs = g / scale;
    let f = |tau: f64, u: &CMat| -> CMat {
        let ph = C64::from_polar(1.0, -sign * tau);
        let h = (&a * ph + &ad * ph.conj()) * c(gs, 0.0);
        (h * u) * c(0.0, -1.0)
    };
    let taus: Vec<f64> = times.iter().map(|t| t * scale).collect();
    Rk45::default().integrate(f, 0.0, CMat::identity(dim, dim), &taus)
}

/// Full spins ⊗ mode propagator at time `t`. Raises `TruncationNotConverged`
/// if the vacuum-input column shifts by more than 1e-6 when the truncation
/// is raised by five.
pub fn fock_oracle(params: &MsParams, t: f64, n_max: usize) -> Result<Unitary> {
    if n_max < 10 {
        return Err(Error::Config("Fock truncation must be at least 10".into()));
    }
    let n = params.n_qubits();
    let dim_s = 1usize << n;
    let d = n_max + 1;
    let g = params.rabi * params.eta;
    let mut sectors = Vec::with_capacity(dim_s);
    let mut shift = 0.0f64;
    for s in 0..dim_s {
        let j = jx_eigenvalue(&params.c, s);
        let u = sector_propagators(g * j, params.gap, &[t], n_max)?.remove(0);
        let wider = sector_propagators(g * j, params.gap, &[t], n_max + 5)?.remove(0);
        for m in 0..d {
            shift = shift.max((u[(m, 0)] - wider[(m, 0)]).norm());
        }
        sectors.push(u);
    }
    if shift > 1e-6 {
        return Err(Error::TruncationNotConverged { shift, n_max: n_max + 5 });
    }
    let norm = 1.0 / dim_s as f64;
    let sign = |a: usize, b: usize| if (a & b).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut full = CMat::zeros(dim_s * d, dim_s * d);
    for a in 0..dim_s {
        for b in 0..dim_s {
            for (s, us) in sectors.iter().enumerate() {
                let w = sign(a, s) * sign(s, b) * norm;
                for m in 0..d {
                    for k in 0..d {
                        full[(a * d + m, b * d + k)] += us[(m, k)] * w;
                    }
                }
            }
        }
    }
    if params.phases.iter().any(|p| *p != 0.0) {
        let z = crate::linalg::kron(&z_frame(&params.phases), &CMat::identity(d, d));
        full = &z * full * z.adjoint();
    }
    Ok(Unitary::from_matrix_unchecked(full))
}

/// Spin block `⟨0|U|0⟩` of a spins ⊗ mode operator.
pub fn vacuum_block(u: &CMat, n_qubits: usize) -> CMat {
    let dim_s = 1 << n_qubits;
    let d = u.nrows() / dim_s;
    CMat::from_fn(dim_s, dim_s, |a, b| u[(a * d, b * d)])
}

/// Effective area read off the oscillator model at closure from the phase
/// difference between the extreme `J̃x` sectors.
pub fn oscillator_area(params: &MsParams, n_max: usize) -> Result<f64> {
    let n = params.n_qubits();
    let t = params.closure_time();
    let g = params.rabi * params.eta;
    let j_hi = jx_eigenvalue(&params.c, 0);
    // sector with the smallest |J| differs most in J²
    let (s_lo, j_lo) = (0..1usize << n)
        .map(|s| (s, jx_eigenvalue(&params.c, s)))
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("at least one sector");
    let _ = s_lo;
    let u_hi = sector_propagators(g * j_hi, params.gap, &[t], n_max)?.remove(0);
    let u_lo = sector_propagators(g * j_lo, params.gap, &[t], n_max)?.remove(0);
    let dphi = (u_hi[(0, 0)] / u_lo[(0, 0)]).arg();
    Ok(-dphi / (j_hi * j_hi - j_lo * j_lo))
}

/// `κ` such that the oscillator area equals `κ` times the Magnus area.
pub fn fit_kappa(params: &MsParams, n_max: usize) -> Result<f64> {
    Ok(oscillator_area(params, n_max)? / params.magnus_area())
}

/// `exp(−iA J̃x²)` with `A = κ · magnus_area`, including the global phase.
pub fn effective_spin_propagator(params: &MsParams) -> CMat {
    let area = AREA_KAPPA * params.magnus_area();
    let sum_c2: f64 = params.c.iter().map(|x| x * x).sum();
    weighted_xx(&params.c, area, &params.phases) * C64::from_polar(1.0, -area * sum_c2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    /// Phase-invariant distance between the oracle vacuum block and `exp(−iA J̃x²)`.
    pub spin_distance: f64,
    /// `1 − P(n = 0)` of the mode after the gate from `|0…0⟩ ⊗ |0⟩`.
    pub motional_residual: f64,
}

pub fn compare_with_effective(params: &MsParams, n_max: usize) -> Result<OracleComparison> {
    let n = params.n_qubits();
    let u = fock_oracle(params, params.closure_time(), n_max)?;
    let block = vacuum_block(u.matrix(), n);
    let spin_distance = phase_distance(&block, &effective_spin_propagator(params));
    let d = n_max + 1;
    let mut p0 = 0.0;
    for a in 0..1usize << n {
        p0 += u.matrix()[(a * d, 0)].norm_sqr();
    }
    Ok(OracleComparison { spin_distance, motional_residual: 1.0 - p0 })
}

/// Spin basis-state populations at each time, starting from `|0…0⟩ ⊗ |0⟩`.
pub fn ms_population_trace(params: &MsParams, times: &[f64], n_max: usize) -> Result<Vec<Vec<f64>>> {
    let n = params.n_qubits();
    let dim_s = 1usize << n;
    let d = n_max + 1;
    let g = params.rabi * params.eta;
    // |0…0⟩ has equal weight 1/√dim on every X-basis state
    let w = 1.0 / (dim_s as f64).sqrt();
    let mut vac_cols: Vec<Vec<DVector<C64>>> = Vec::with_capacity(dim_s);
    for s in 0..dim_s {
        let us = sector_propagators(g * jx_eigenvalue(&params.c, s), params.gap, times, n_max)?;
        vac_cols.push(us.iter().map(|u| u.column(0).clone_owned()).collect());
    }
    let sign = |a: usize, b: usize| if (a & b).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        let mut pops = vec![0.0; dim_s];
        for (a, pa) in pops.iter_mut().enumerate() {
            for m in 0..d {
                let mut amp = c(0.0, 0.0);
                for (s, cols) in vac_cols.iter().enumerate() {
                    amp += cols[ti][m] * (w * sign(a, s) / (dim_s as f64).sqrt());
                }
                *pa += amp.norm_sqr();
            }
        }
        out.push(pops);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn maximal(c: Vec<f64>) -> MsParams {
        let mut p = MsParams::new(c, PI / 2.0);
        p.rabi = p.rabi_for_area();
        p
    }

    #[test]
    fn integrator_matches_exponential() {
        // dy/dt = -i w y
        let w = 3.0;
        let f = |_t: f64, y: &CMat| y * c(0.0, -w);
        let ys = Rk45::default().integrate(f, 0.0, CMat::identity(1, 1), &[0.5, 2.0]).unwrap();
        assert!((ys[1][(0, 0)] - C64::from_polar(1.0, -w * 2.0)).norm() < 1e-9);
        assert!((ys[0][(0, 0)] - C64::from_polar(1.0, -w * 0.5)).norm() < 1e-9);
    }

    #[test]
    fn identity_at_time_zero() {
        let p = maximal(vec![0.5, 0.5]);
        let u = fock_oracle(&p, 0.0, 12).unwrap();
        assert!(max_abs(&(u.matrix() - CMat::identity(u.dim(), u.dim()))) < 1e-14);
    }

    #[test]
    fn kappa_is_one() {
        let p = maximal(vec![0.5, 0.45]);
        let k = fit_kappa(&p, DEFAULT_N_MAX).unwrap();
        assert!((k - AREA_KAPPA).abs() < 1e-6, "{k}");
    }

    #[test]
    fn maximal_gate_closes_and_matches() {
        let p = maximal(vec![0.5, 0.5]);
        let cmp = compare_with_effective(&p, DEFAULT_N_MAX).unwrap();
        assert!(cmp.spin_distance < 1e-8, "{cmp:?}");
        assert!(cmp.motional_residual < 1e-8);
        let tr = ms_population_trace(&p, &[p.closure_time() / 4.0, p.closure_time()], DEFAULT_N_MAX).unwrap();
        let end = &tr[1];
        assert!((end[0] - 0.5).abs() < 1e-6 && (end[3] - 0.5).abs() < 1e-6);
        assert!(end[1] < 1e-6 && end[2] < 1e-6);
        assert!(tr[0][1] + tr[0][2] > 1e-2);
        assert!((tr[0][1] - tr[0][2]).abs() < 1e-9);
    }

    #[test]
    fn no_drive_no_dynamics() {
        let mut p = MsParams::new(vec![0.5, 0.5], 0.0);
        p.rabi = 0.0;
        let tr = ms_population_trace(&p, &[1e-5, p.closure_time()], DEFAULT_N_MAX).unwrap();
        assert!(tr.iter().all(|pp| (pp[0] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn far_detuned_barely_entangles() {
        let mut p = MsParams::new(vec![0.5, 0.5], 0.0);
        p.gap *= 50.0;
        p.rabi = 0.1 * p.gap.abs() / 50.0;
        let tr = ms_population_trace(&p, &[p.closure_time() * 0.37, p.closure_time()], DEFAULT_N_MAX).unwrap();
        assert!(tr.iter().all(|pp| pp[0] > 0.999));
    }
}
