//! Detection model: imperfect state discrimination per ion plus fluorescence
//! leaking into adjacent photomultiplier channels, and its likelihood
//! inversion.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

const EM_MAX_ITER: usize = 20_000;
const EM_TOL: f64 = 1e-13;

/// Distribution of channel patterns for true basis state `s` (bright = 1).
pub fn channel_probabilities(s: usize, n: usize, fidelity: f64, crosstalk: f64) -> Vec<f64> {
    let bright_p: Vec<f64> = (0..n).map(|k| channel_bright(s, n, k, fidelity, crosstalk)).collect();
    (0..1usize << n)
        .map(|m| (0..n).map(|k| if (m >> (n - 1 - k)) & 1 == 1 { bright_p[k] } else { 1.0 - bright_p[k] }).product())
        .collect()
}

fn channel_bright(s: usize, n: usize, k: usize, fidelity: f64, crosstalk: f64) -> f64 {
    let bit = |q: usize| (s >> (n - 1 - q)) & 1 == 1;
    let own = if bit(k) { fidelity } else { 1.0 - fidelity };
    let lit_neighbours =
        [k.checked_sub(1), (k + 1 < n).then_some(k + 1)].into_iter().flatten().filter(|&q| bit(q)).count();
    1.0 - (1.0 - own) * (1.0 - crosstalk).powi(lit_neighbours as i32)
}

/// Draws a channel pattern for true state `s`.
pub fn sample_channels<R: Rng>(s: usize, n: usize, fidelity: f64, crosstalk: f64, rng: &mut R) -> usize {
    let mut m = 0;
    for k in 0..n {
        if rng.random::<f64>() < channel_bright(s, n, k, fidelity, crosstalk) {
            m |= 1 << (n - 1 - k);
        }
    }
    m
}

/// Column-stochastic confusion matrix `C[m][s] = P(pattern m | state s)`.
pub fn confusion_matrix(n: usize, fidelity: f64, crosstalk: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..0.5).contains(&crosstalk) {
        return Err(Error::SingularConfusion(crosstalk));
    }
    if !(0.5..=1.0).contains(&fidelity) || fidelity == 0.5 {
        return Err(Error::OutOfRange { name: "detection_fidelity", value: fidelity });
    }
    let dim = 1usize << n;
    let mut c = vec![vec![0.0; dim]; dim];
    for s in 0..dim {
        for (m, p) in channel_probabilities(s, n, fidelity, crosstalk).into_iter().enumerate() {
            c[m][s] = p;
        }
    }
    Ok(c)
}

/// Maximum-likelihood state populations from pattern counts under a
/// confusion matrix, by expectation maximization on the simplex.
pub fn infer_with(counts: &[u64], confusion: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = confusion.len();
    if counts.len() != dim {
        return Err(Error::InconsistentCounts(format!("{} counts for {} patterns", counts.len(), dim)));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InconsistentCounts("no shots".into()));
    }
    let f: Vec<f64> = counts.iter().map(|&k| k as f64 / total as f64).collect();
    // an interior linear inverse already maximizes the likelihood
    let cm = DMatrix::from_fn(dim, dim, |m, s| confusion[m][s]);
    if let Some(x) = cm.lu().solve(&DVector::from_column_slice(&f)) {
        if x.iter().all(|v| *v >= -1e-12) {
            let x: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
            let norm: f64 = x.iter().sum();
            return Ok(x.into_iter().map(|v| v / norm).collect());
        }
    }
    let mut p = vec![1.0 / dim as f64; dim];
    for _ in 0..EM_MAX_ITER {
        let q: Vec<f64> = (0..dim).map(|m| (0..dim).map(|s| confusion[m][s] * p[s]).sum()).collect();
        let mut next = vec![0.0; dim];
        for (s, ns) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for m in 0..dim {
                if f[m] > 0.0 && q[m] > 0.0 {
                    acc += confusion[m][s] * f[m] / q[m];
                }
            }
            *ns = p[s] * acc;
        }
        let norm: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= norm);
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if change < EM_TOL {
            break;
        }
    }
    Ok(p)
}

/// Corrects joint pattern counts for channel crosstalk only.
pub fn infer_populations(counts: &[u64], n: usize, crosstalk: f64) -> Result<Vec<f64>> {
    let c = confusion_matrix(n, 1.0, crosstalk)?;
    infer_with(counts, &c)
}
