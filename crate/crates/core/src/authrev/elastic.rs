use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_LAMBDA_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const DEFAULT_ALPHA_MIX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            tolerance: 1e-7,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetFit<T> {
    pub intercept: T,
    pub coefficients: Vec<T>,
    pub lambda: T,
    pub alpha_mix: T,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each sweep.
    pub objective_history: Vec<T>,
}

impl<T: Scalar> ElasticNetFit<T> {
    pub fn predict(&self, row: &[T]) -> T {
        self.intercept + row.iter().zip(&self.coefficients).fold(T::zero(), |a, (&x, &b)| a + x * b)
    }
}

fn soft_threshold<T: Scalar>(z: T, gamma: T) -> T {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        T::zero()
    }
}

/// Neumaier-compensated sum.
fn compensated_sum<T: Scalar>(values: impl Iterator<Item = T>) -> T {
    let (mut sum, mut comp) = (T::zero(), T::zero());
    for v in values {
        let t = sum + v;
        comp = comp + if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// `½ Σ (y - β₀ - xβ)² + λ [½ (1 - α) ‖β‖² + α ‖β‖₁]`, summed with
/// compensation.
pub fn objective<T: Scalar>(x: &[Vec<T>], y: &[T], intercept: T, beta: &[T], lambda: T, alpha_mix: T) -> T {
    let half = T::lit(0.5);
    let rss = compensated_sum(x.iter().zip(y).map(|(row, &yi)| {
        let r = compensated_sum(std::iter::once(yi - intercept).chain(row.iter().zip(beta).map(|(&xv, &b)| -(xv * b))));
        r * r
    }));
    let l2 = compensated_sum(beta.iter().map(|&b| b * b));
    let l1 = compensated_sum(beta.iter().map(|b| b.abs()));
    half * rss + lambda * (half * (T::one() - alpha_mix) * l2 + alpha_mix * l1)
}

fn validate<T: Scalar>(x: &[Vec<T>], y: &[T]) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::Dimension { expected: d, got: row.len() });
        }
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elastic-net input"));
    }
    Ok(d)
}

pub fn elastic_net_fit<T: Scalar>(x: &[Vec<T>], y: &[T], lambda: T, alpha_mix: T) -> Result<ElasticNetFit<T>> {
    elastic_net_fit_with(x, y, lambda, alpha_mix, &CdOptions::default())
}

/// Cyclic coordinate descent with soft-thresholding. The intercept is
/// unpenalized and refit at the start of each sweep.
pub fn elastic_net_fit_with<T: Scalar>(
    x: &[Vec<T>],
    y: &[T],
    lambda: T,
    alpha_mix: T,
    opts: &CdOptions,
) -> Result<ElasticNetFit<T>> {
    let d = validate(x, y)?;
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be finite and >= 0".into()));
    }
    if !(alpha_mix >= T::zero() && alpha_mix <= T::one()) {
        return Err(Error::InvalidArgument("alpha_mix must lie in [0, 1]".into()));
    }
    let n = x.len();
    let col_sq: Vec<T> = (0..d).map(|j| x.iter().fold(T::zero(), |a, r| a + r[j] * r[j])).collect();
    let l1 = lambda * alpha_mix;
    let l2 = lambda * (T::one() - alpha_mix);
    let tol = T::lit(opts.tolerance);

    let mut beta = vec![T::zero(); d];
    let mut intercept = T::zero();
    let mut resid: Vec<T> = y.to_vec();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let shift = resid.iter().fold(T::zero(), |a, &r| a + r) / T::from_count(n);
        intercept = intercept + shift;
        for r in resid.iter_mut() {
            *r = *r - shift;
        }
        let mut max_change = shift.abs();
        for j in 0..d {
            let denom = col_sq[j] + l2;
            let old = beta[j];
            let new = if denom > T::zero() {
                let rho = x.iter().zip(&resid).fold(T::zero(), |a, (row, &r)| a + row[j] * (r + row[j] * old));
                soft_threshold(rho, l1) / denom
            } else {
                T::zero()
            };
            let delta = new - old;
            if delta != T::zero() {
                for (r, row) in resid.iter_mut().zip(x) {
                    *r = *r - row[j] * delta;
                }
                beta[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        history.push(objective(x, y, intercept, &beta, lambda, alpha_mix));
        if max_change < tol {
            converged = true;
            break;
        }
    }
    Ok(ElasticNetFit {
        intercept,
        coefficients: beta,
        lambda,
        alpha_mix,
        iterations,
        converged,
        objective_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub grid: Vec<f64>,
    pub validation_mse: Vec<f64>,
    pub chosen: f64,
}

/// Picks lambda from `grid` by mean squared error on a holdout of every
/// fourth row (rows 3, 7, 11, ...). Ties go to the smaller lambda.
pub fn select_lambda<T: Scalar>(x: &[Vec<T>], y: &[T], grid: &[f64], alpha_mix: T) -> Result<LambdaSelection> {
    validate(x, y)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    if x.len() < 8 {
        return Err(Error::Insufficient("lambda selection needs at least 8 rows".into()));
    }
    let is_val = |i: usize| i % 4 == 3;
    let split = |keep: bool| -> (Vec<Vec<T>>, Vec<T>) {
        x.iter()
            .zip(y)
            .enumerate()
            .filter(|(i, _)| is_val(*i) == keep)
            .map(|(_, (r, &v))| (r.clone(), v))
            .unzip()
    };
    let (tx, ty) = split(false);
    let (vx, vy) = split(true);
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut mse = Vec::with_capacity(sorted.len());
    for &l in &sorted {
        let fit = elastic_net_fit(&tx, &ty, T::lit(l), alpha_mix)?;
        let err = vx
            .iter()
            .zip(&vy)
            .map(|(r, &v)| {
                let e = (v - fit.predict(r)).to_f64_lossy();
                e * e
            })
            .sum::<f64>()
            / vx.len() as f64;
        mse.push(err);
    }
    let best = (0..sorted.len()).fold(0, |b, i| if mse[i] < mse[b] { i } else { b });
    Ok(LambdaSelection {
        chosen: sorted[best],
        grid: sorted,
        validation_mse: mse,
    })
}
