//! Z-score standardization and principal component analysis.
//!
//! Components maximize `w · Cov(x) · wᵀ` subject to `‖w‖₂ = 1`; stationary
//! points of the Lagrangian are the eigenvectors of the covariance matrix, so
//! the fit is an eigendecomposition (cyclic Jacobi) of the population
//! covariance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Per-column affine map `z = (x - mean) / stdev` using the population
/// standard deviation. Zero-variance columns map to 0 and are flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub means: Vec<T>,
    pub stdevs: Vec<T>,
    pub degenerate: Vec<bool>,
}

fn check_rows<T: Scalar>(rows: &[Vec<T>]) -> Result<usize> {
    let dim = rows.first().map(Vec::len).unwrap_or(0);
    for r in rows {
        if r.len() != dim {
            return Err(Error::Dimension { expected: dim, got: r.len() });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature rows"));
        }
    }
    Ok(dim)
}

impl<T: Scalar> Standardizer<T> {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            means: vec![T::zero(); dim],
            stdevs: vec![T::one(); dim],
            degenerate: vec![false; dim],
        }
    }

    pub fn fit(rows: &[Vec<T>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Insufficient("standardization needs at least 2 rows".into()));
        }
        let dim = check_rows(rows)?;
        let m = T::from_count(rows.len());
        let mut means = vec![T::zero(); dim];
        for r in rows {
            for (acc, &v) in means.iter_mut().zip(r) {
                *acc = *acc + v;
            }
        }
        means.iter_mut().for_each(|x| *x = *x / m);
        let mut var = vec![T::zero(); dim];
        for r in rows {
            for ((acc, &v), &mu) in var.iter_mut().zip(r).zip(&means) {
                *acc = *acc + (v - mu) * (v - mu);
            }
        }
        let stdevs: Vec<T> = var.iter().map(|&s| (s / m).sqrt()).collect();
        let degenerate = stdevs.iter().map(|&s| s <= T::zero()).collect();
        Ok(Standardizer { means, stdevs, degenerate })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, row: &[T]) -> Result<Vec<T>> {
        if row.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: row.len() });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                if self.degenerate[j] {
                    T::zero()
                } else {
                    (x - self.means[j]) / self.stdevs[j]
                }
            })
            .collect())
    }

    pub fn invert(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: z.len() });
        }
        Ok(z.iter()
            .enumerate()
            .map(|(j, &v)| v * self.stdevs[j] + self.means[j])
            .collect())
    }
}

/// Standardizes every row, returning the standardized rows and the fitted map.
pub fn standardize<T: Scalar>(rows: &[Vec<T>]) -> Result<(Vec<Vec<T>>, Standardizer<T>)> {
    let s = Standardizer::fit(rows)?;
    let z = rows.iter().map(|r| s.apply(r)).collect::<Result<_>>()?;
    Ok((z, s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel<T> {
    /// Standardization applied to raw rows before projection.
    pub means: Vec<T>,
    pub stdevs: Vec<T>,
    /// Loading vectors, one per component, each of unit norm.
    pub components: Vec<Vec<T>>,
    /// Eigenvalues of the retained components, nonincreasing.
    pub explained_variance: Vec<T>,
    /// Trace of the covariance matrix (sum of all eigenvalues).
    pub total_variance: T,
}

/// Fits `k` components to already-standardized vectors.
pub fn fit_pca<T: Scalar>(vectors: &[Vec<T>], k: usize) -> Result<PcaModel<T>> {
    let dim = check_rows(vectors)?;
    if vectors.is_empty() {
        return Err(Error::Insufficient("PCA needs data".into()));
    }
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!("component count {k} not in 1..={dim}")));
    }
    if vectors.len() < k + 1 {
        return Err(Error::Insufficient(format!(
            "PCA with {k} components needs at least {} vectors",
            k + 1
        )));
    }
    let cov = covariance(vectors, dim);
    let total_variance = (0..dim).map(|i| cov[i][i]).fold(T::zero(), |a, b| a + b);
    let (values, vectors) = symmetric_eigen(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut w: Vec<T> = (0..dim).map(|r| vectors[r][c]).collect();
        orient(&mut w);
        components.push(w);
        explained_variance.push(values[c].max(T::zero()));
    }
    let id = Standardizer::identity(dim);
    Ok(PcaModel {
        means: id.means,
        stdevs: id.stdevs,
        components,
        explained_variance,
        total_variance,
    })
}

impl<T: Scalar> PcaModel<T> {
    /// Standardizes raw rows, then fits. Returns the model (carrying the
    /// standardization) and the standardized rows.
    pub fn fit_raw(rows: &[Vec<T>], k: usize) -> Result<(Self, Vec<Vec<T>>, Standardizer<T>)> {
        let (z, s) = standardize(rows)?;
        let mut model = fit_pca(&z, k)?;
        model.means = s.means.clone();
        model.stdevs = s.stdevs.clone();
        Ok((model, z, s))
    }

    pub fn dim(&self) -> usize {
        self.components.first().map(Vec::len).unwrap_or(0)
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Reduced coordinates `z_c = v · w_c` of a standardized vector.
    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: v.len() });
        }
        Ok(self.components.iter().map(|w| dot(v, w)).collect())
    }

    /// Standardizes a raw row with the stored parameters, then projects it.
    pub fn transform_raw(&self, raw: &[T]) -> Result<Vec<T>> {
        if raw.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: raw.len() });
        }
        let z: Vec<T> = raw
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                if self.stdevs[j] > T::zero() {
                    (x - self.means[j]) / self.stdevs[j]
                } else {
                    T::zero()
                }
            })
            .collect();
        self.project(&z)
    }
}

/// Population covariance (divides by m) of column-centered rows.
fn covariance<T: Scalar>(rows: &[Vec<T>], dim: usize) -> Vec<Vec<T>> {
    let m = T::from_count(rows.len());
    let mut mean = vec![T::zero(); dim];
    for r in rows {
        for (acc, &v) in mean.iter_mut().zip(r) {
            *acc = *acc + v;
        }
    }
    mean.iter_mut().for_each(|x| *x = *x / m);
    let mut cov = vec![vec![T::zero(); dim]; dim];
    for r in rows {
        let c: Vec<T> = r.iter().zip(&mean).map(|(&v, &mu)| v - mu).collect();
        for i in 0..dim {
            for j in i..dim {
                cov[i][j] = cov[i][j] + c[i] * c[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i][j] / m;
            cov[i][j] = v;
            cov[j][i] = v;
        }
    }
    cov
}

/// Largest-magnitude entry positive (first such entry on ties).
fn orient<T: Scalar>(w: &mut [T]) {
    let mut best = 0;
    for (i, v) in w.iter().enumerate() {
        if v.abs() > w[best].abs() {
            best = i;
        }
    }
    if w[best] < T::zero() {
        w.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and a matrix whose columns are the matching unit eigenvectors.
pub fn symmetric_eigen<T: Scalar>(mut a: Vec<Vec<T>>) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.len();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let scale = a.iter().flatten().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    let tol = T::epsilon() * T::epsilon() * scale * scale;

    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + a[i][j] * a[i][j]);
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    (values, v)
}
