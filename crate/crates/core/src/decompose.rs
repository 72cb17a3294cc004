//! Numerical decomposition of single-qubit unitaries into calibrated π/2
//! equatorial rotations.
//!
//! The pulse product is `R(π/2, φ_k) ··· R(π/2, φ_1)` with `φ_1` applied first.
//! Targets are products of fixed matrices and rotations with a free angle about
//! a fixed axis; free angles are solved jointly with the pulse phases, which is
//! how "up to a z-rotation" searches are expressed.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{r_phi, rotation};
use crate::linalg::{aligned_max_diff2, Mat2, C64};

pub const Z_AXIS: [f64; 3] = [0.0, 0.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Fixed(Mat2),
    /// Rotation about the axis by an angle left to the search.
    Free([f64; 3]),
}

/// Target `F_1 · F_2 ··· F_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub factors: Vec<Factor>,
}

impl Target {
    pub fn exact(u: Mat2) -> Self {
        Self { factors: vec![Factor::Fixed(u)] }
    }

    /// `R_z(α)·U` with `α` free, i.e. `U` up to a trailing z-rotation.
    pub fn up_to_rz(u: Mat2) -> Self {
        Self { factors: vec![Factor::Free(Z_AXIS), Factor::Fixed(u)] }
    }

    pub fn n_free(&self) -> usize {
        self.factors.iter().filter(|f| matches!(f, Factor::Free(_))).count()
    }

    pub fn matrix(&self, free: &[f64]) -> Mat2 {
        let mut k = 0;
        self.factors.iter().fold(Mat2::identity(), |acc, f| match f {
            Factor::Fixed(m) => acc * m,
            Factor::Free(axis) => {
                let a = free[k];
                k += 1;
                acc * rotation(*axis, a)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    /// Axis phases of the π/2 pulses in time order.
    pub phases: Vec<f64>,
    /// Solved free angles, in factor order.
    pub free_angles: Vec<f64>,
    /// Max-abs entry deviation after global phase alignment.
    pub residual: f64,
}

impl DecompositionResult {
    pub fn n_pulses(&self) -> usize {
        self.phases.len()
    }

    /// For `Target::up_to_rz`: angle `α` with `target = R_z(α) · pulses`.
    pub fn deferred_rz(&self) -> Option<f64> {
        self.free_angles.first().map(|a| -a)
    }
}

pub fn pulse_product(phases: &[f64]) -> Mat2 {
    phases.iter().fold(Mat2::identity(), |acc, &p| r_phi(FRAC_PI_2, p) * acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Decomposer {
    pub max_pulses: usize,
    pub restarts: usize,
    /// Accepted aligned max-abs deviation.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for Decomposer {
    fn default() -> Self {
        Self { max_pulses: 4, restarts: 32, tolerance: 1e-9, seed: 0x5eed }
    }
}

fn residual_vec(target: &Target, x: &[f64], k: usize) -> (DVector<f64>, Mat2, Mat2) {
    let p = pulse_product(&x[..k]);
    let t = target.matrix(&x[k..]);
    let tr = (t.adjoint() * p).trace();
    let ph = if tr.norm() > 0.0 { tr / tr.norm() } else { C64::new(1.0, 0.0) };
    let d = p - t * ph;
    let r = DVector::from_iterator(8, d.iter().flat_map(|z| [z.re, z.im]));
    (r, p, t)
}

/// Levenberg–Marquardt on the phase-aligned residual.
fn refine(target: &Target, mut x: Vec<f64>, k: usize) -> (Vec<f64>, f64) {
    let n = x.len();
    let (mut r, _, _) = residual_vec(target, &x, k);
    let mut cost = r.norm_squared();
    if n == 0 {
        return (x, cost);
    }
    let mut lambda = 1e-3;
    let h = 1e-7;
    for _ in 0..200 {
        if cost < 1e-28 {
            break;
        }
        let mut jac = DMatrix::zeros(8, n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let d = (residual_vec(target, &xp, k).0 - residual_vec(target, &xm, k).0) / (2.0 * h);
            jac.set_column(j, &d);
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
            let (rn, _, _) = residual_vec(target, &xn, k);
            let cn = rn.norm_squared();
            if cn < cost {
                let small = step.amax() < 1e-15;
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x, cost)
}

fn wrap(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

impl Decomposer {
    /// Fewest-pulse solution for the target.
    pub fn solve(&self, target: &Target) -> Result<DecompositionResult> {
        let n_free = target.n_free();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut best = f64::INFINITY;
        let mut total_restarts = 0;
        for k in 0..=self.max_pulses {
            let n = k + n_free;
            // Too few parameters to reach a generic SU(2) element; still try a
            // handful of starts for special targets.
            let restarts = if n == 0 {
                1
            } else if n < 3 {
                self.restarts.min(6)
            } else {
                self.restarts
            };
            for _ in 0..restarts {
                total_restarts += 1;
                let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
                let (x, _) = refine(target, x0, k);
                let (_, p, t) = residual_vec(target, &x, k);
                let res = aligned_max_diff2(&p, &t);
                best = best.min(res);
                if res < self.tolerance {
                    return Ok(DecompositionResult {
                        phases: x[..k].iter().map(|&a| wrap(a)).collect(),
                        free_angles: x[k..].iter().map(|&a| wrap(a)).collect(),
                        residual: res,
                    });
                }
            }
        }
        Err(Error::DecompositionFailed { restarts: total_restarts, best })
    }

    pub fn decompose(&self, u: &Mat2, up_to_rz: bool) -> Result<DecompositionResult> {
        let target = if up_to_rz { Target::up_to_rz(*u) } else { Target::exact(*u) };
        self.solve(&target)
    }
}

pub fn decompose(u: &Mat2, up_to_rz: bool) -> Result<DecompositionResult> {
    Decomposer::default().decompose(u, up_to_rz)
}

/// Haar-random single-qubit unitary.
pub fn haar_unitary<R: Rng>(rng: &mut R) -> Mat2 {
    use rand_distr::{Distribution, StandardNormal};
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    let a = C64::new(g(), g());
    let b = C64::new(g(), g());
    let c = C64::new(g(), g());
    let d = C64::new(g(), g());
    // Gram-Schmidt on the columns of a complex Ginibre matrix.
    let n1 = (a.norm_sqr() + c.norm_sqr()).sqrt();
    let (a, c) = (a / n1, c / n1);
    let proj = a.conj() * b + c.conj() * d;
    let (b, d) = (b - a * proj, d - c * proj);
    let n2 = (b.norm_sqr() + d.norm_sqr()).sqrt();
    Mat2::new(a, b / n2, c, d / n2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates;
    use proptest::prelude::*;

    #[test]
    fn identity_up_to_rz_is_empty() {
        let r = decompose(&Mat2::identity(), true).unwrap();
        assert_eq!(r.n_pulses(), 0);
        let r = decompose(&gates::rz(0.8), true).unwrap();
        assert_eq!(r.n_pulses(), 0);
        assert!((r.deferred_rz().unwrap() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn hadamard_needs_three() {
        let r = decompose(&gates::h(), false).unwrap();
        assert_eq!(r.n_pulses(), 3);
        assert!(aligned_max_diff2(&pulse_product(&r.phases), &gates::h()) < 1e-8);
    }

    #[test]
    fn x_needs_two() {
        let r = decompose(&gates::x(), false).unwrap();
        assert_eq!(r.n_pulses(), 2);
    }

    #[test]
    fn up_to_rz_reconstructs() {
        let u = gates::r_phi(1.1, 0.4) * gates::rz(0.3);
        let r = decompose(&u, true).unwrap();
        let recon = gates::rz(r.deferred_rz().unwrap()) * pulse_product(&r.phases);
        assert!(aligned_max_diff2(&recon, &u) < 1e-8);
        assert!(r.n_pulses() <= 2);
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let u = haar_unitary(&mut rng);
            assert!(((u.adjoint() * u) - Mat2::identity()).iter().all(|z| z.norm() < 1e-12));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn redecompose_is_idempotent(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = haar_unitary(&mut rng);
            let r = decompose(&u, false).unwrap();
            prop_assert!(r.residual < 1e-8);
            let recon = pulse_product(&r.phases);
            let r2 = decompose(&recon, false).unwrap();
            prop_assert!(aligned_max_diff2(&pulse_product(&r2.phases), &recon) < 1e-8);
            prop_assert!(r2.n_pulses() <= r.n_pulses());
        }
    }
}
