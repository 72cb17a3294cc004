//! Small weighted nonlinear least squares (Levenberg–Marquardt with a
//! forward-difference Jacobian) and ordinary linear least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Standard errors from the covariance `s² (JᵀJ)⁻¹`, with `s²` the
    /// reduced χ² when it exceeds one.
    pub errors: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
}

impl FitResult {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(model: &F, x: &[f64], r0: &[f64]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(r0.len(), x.len());
    for k in 0..x.len() {
        let h = 1e-7 * x[k].abs().max(1e-3);
        let mut xp = x.to_vec();
        xp[k] += h;
        let rp = model(&xp);
        for i in 0..r0.len() {
            j[(i, k)] = (rp[i] - r0[i]) / h;
        }
    }
    j
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimizes `Σ rᵢ(x)²` where `residuals` already divides by the data
/// uncertainties.
pub fn levenberg_marquardt<F>(residuals: F, x0: &[f64]) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = x0.to_vec();
    let mut r = residuals(&x);
    let m = r.len();
    let p = x.len();
    if m < p {
        return Err(Error::FitFailed(format!("{m} data points for {p} parameters")));
    }
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::FitFailed("non-finite residuals at the start point".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let j = jacobian(&residuals, &x, &r);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * DVector::from_column_slice(&r);
        if g.amax() < 1e-14 {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for i in 0..p {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rn = residuals(&xn);
            let cn = sum_sq(&rn);
            if cn.is_finite() && cn <= cost {
                let rel = (cost - cn) / cost.max(1e-300);
                let small = step.amax() <= 1e-12 * (1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs())));
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                if rel < 1e-15 || small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailed(format!("no convergence after {MAX_ITER} iterations")));
    }
    let j = jacobian(&residuals, &x, &r);
    let jtj = j.transpose() * &j;
    let Some(inv) = jtj.try_inverse() else {
        return Err(Error::FitFailed("singular normal matrix".into()));
    };
    let dof = m - p;
    let s2 = if dof > 0 { (cost / dof as f64).max(1.0) } else { 1.0 };
    let covariance = inv * s2;
    let errors = (0..p).map(|k| covariance[(k, k)].max(0.0).sqrt()).collect();
    Ok(FitResult { params: x, errors, covariance, chi2: cost, dof })
}

/// Solves `min ‖A x − y‖` through the SVD; fails when `A` is rank deficient.
pub fn linear_least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin / smax < 1e-10 {
        return Err(Error::FitFailed("design matrix is rank deficient".into()));
    }
    svd.solve(y, 0.0).map_err(|e| Error::FitFailed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_recovered_exactly() {
        let xs: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 + 0.6 * 0.9f64.powf(*x)).collect();
        let fit = levenberg_marquardt(
            |p| xs.iter().zip(&ys).map(|(x, y)| p[0] + p[1] * p[2].powf(*x) - y).collect(),
            &[0.5, 0.5, 0.5],
        )
        .unwrap();
        for (a, b) in fit.params.iter().zip([0.3, 0.6, 0.9]) {
            assert!((a - b).abs() < 1e-10, "{:?}", fit.params);
        }
    }

    #[test]
    fn line_fit_errors_match_closed_form() {
        // y = a + b x with unit errors: var(b) = 1 / Σ(x − x̄)²
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.1, 1.2, 1.9, 3.1, 4.0];
        let fit = levenberg_marquardt(|p| xs.iter().zip(&ys).map(|(x, y)| p[0] + p[1] * x - y).collect(), &[0.0, 0.0])
            .unwrap();
        let sxx: f64 = xs.iter().map(|x| (x - 2.0) * (x - 2.0)).sum();
        let s2 = (fit.chi2 / 3.0).max(1.0);
        assert!((fit.errors[1] - (s2 / sxx).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn underdetermined_rejected() {
        assert!(levenberg_marquardt(|p| vec![p[0] + p[1]], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn rank_deficient_linear() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(linear_least_squares(&a, &DVector::from_vec(vec![1.0, 2.0, 3.0])).is_err());
    }
}
