//! Vector similarity: triangle-area (TS), sector-area (SS) and their product
//! TSS, plus the uniqueness statistic used to compare metrics.
//!
//! TSS is a dissimilarity: 0 for identical vectors, larger for less similar
//! ones. Angles are handled in degrees throughout; the angle between the two
//! vectors is widened by 10° so that parallel vectors still span a triangle.

mod pca;

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use pca::{fit_pca, standardize, symmetric_eigen, PcaModel, Standardizer};

use crate::error::{Error, Result};
use crate::scalar::{dot, euclidean, norm, Scalar};

/// Default number of retained principal components.
pub const DEFAULT_COMPONENTS: usize = 9;

/// Widening applied to the vector angle, in degrees.
pub const THETA_OFFSET_DEG: f64 = 10.0;

/// Decimal places kept when counting distinct metric values.
pub const UNIQUENESS_DECIMALS: i32 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub source_id: u64,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult<T> {
    pub ts: T,
    pub ss: T,
    pub tss: T,
    /// Widened angle in degrees, within [10, 190].
    pub theta_prime: T,
}

fn check_pair<T: Scalar>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("similarity input"));
    }
    Ok(())
}

struct PairGeometry<T> {
    norm_product: T,
    magnitude_gap: T,
    distance: T,
    theta_prime: T,
}

fn geometry<T: Scalar>(a: &[T], b: &[T]) -> PairGeometry<T> {
    let na = norm(a);
    let nb = norm(b);
    let norm_product = na * nb;
    let offset = T::lit(THETA_OFFSET_DEG);
    let theta_prime = if norm_product > T::zero() {
        let cos = (dot(a, b) / norm_product).max(-T::one()).min(T::one());
        cos.acos().to_degrees() + offset
    } else {
        offset
    };
    PairGeometry {
        norm_product,
        magnitude_gap: (na - nb).abs(),
        distance: euclidean(a, b),
        theta_prime,
    }
}

fn triangle<T: Scalar>(p: &PairGeometry<T>) -> T {
    p.norm_product * p.theta_prime.to_radians().sin() / T::lit(2.0)
}

fn sector<T: Scalar>(p: &PairGeometry<T>) -> T {
    let r = p.distance + p.magnitude_gap;
    T::PI() * r * r * (p.theta_prime / T::lit(360.0))
}

/// Triangle area `|a||b| sin(θ') / 2`, returned with θ' in degrees.
pub fn ts<T: Scalar>(a: &[T], b: &[T]) -> Result<(T, T)> {
    check_pair(a, b)?;
    let p = geometry(a, b);
    Ok((triangle(&p), p.theta_prime))
}

/// Sector area `π (ED + MD)² θ'/360`.
pub fn ss<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    check_pair(a, b)?;
    Ok(sector(&geometry(a, b)))
}

pub fn tss<T: Scalar>(a: &[T], b: &[T]) -> Result<SimilarityResult<T>> {
    check_pair(a, b)?;
    let p = geometry(a, b);
    let ts = triangle(&p);
    let ss = sector(&p);
    Ok(SimilarityResult {
        ts,
        ss,
        tss: ts * ss,
        theta_prime: p.theta_prime,
    })
}

/// TSS value only, for callers that have already validated their inputs.
pub fn tss_value<T: Scalar>(a: &[T], b: &[T]) -> T {
    let p = geometry(a, b);
    triangle(&p) * sector(&p)
}

pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> T {
    let d = norm(a) * norm(b);
    if d > T::zero() {
        dot(a, b) / d
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Cosine,
    Tss,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Cosine, Metric::Tss];

    pub fn eval<T: Scalar>(self, a: &[T], b: &[T]) -> T {
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::Cosine => cosine_similarity(a, b),
            Metric::Tss => tss_value(a, b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
            Metric::Tss => "tss",
        }
    }
}

fn rounded_key(v: f64) -> i64 {
    (v * 10f64.powi(UNIQUENESS_DECIMALS)).round() as i64
}

/// Percentage of distinct values among all unordered pairwise metric values,
/// after rounding each to seven decimal places.
pub fn uniqueness<T: Scalar>(vectors: &[Vec<T>], metric: Metric) -> Result<f64> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::Insufficient("uniqueness needs at least 2 vectors".into()));
    }
    for v in vectors {
        check_pair(&vectors[0], v)?;
    }
    let distinct: HashSet<i64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            ((i + 1)..n).map(move |j| rounded_key(metric.eval(&vectors[i], &vectors[j]).to_f64_lossy()))
        })
        .collect();
    let pairs = n * (n - 1) / 2;
    Ok(100.0 * distinct.len() as f64 / pairs as f64)
}

/// All other profiles ranked by ascending TSS to `query`, ties by ascending id.
pub fn most_similar<T: Scalar>(query: u64, profiles: &BTreeMap<u64, Vec<T>>) -> Result<Vec<(u64, T)>> {
    let q = profiles.get(&query).ok_or(Error::UnknownNode(query))?;
    let mut ranked = profiles
        .iter()
        .filter(|(&id, _)| id != query)
        .map(|(&id, v)| Ok((id, tss(q, v)?.tss)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Square TSS matrix with ids as header row and first column.
pub fn write_similarity_matrix<T: Scalar, W: Write>(w: W, profiles: &BTreeMap<u64, Vec<T>>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let ids: Vec<u64> = profiles.keys().copied().collect();
    let mut header = vec![String::from("id")];
    header.extend(ids.iter().map(u64::to_string));
    let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
    wtr.write_record(&header).map_err(io)?;
    for (id, a) in profiles {
        let mut row = vec![id.to_string()];
        for b in profiles.values() {
            row.push(tss(a, b)?.tss.to_string());
        }
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<matrix writer>", e))
}
