use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::InfluenceGraph;
use crate::scalar::{pop_stdev, Scalar};
use crate::simvec::tss;

pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdMode {
    /// Mean of |x_m - x_n| over unordered pairs.
    #[default]
    Mean,
    /// Pair sum scaled by 2 / (n (n - 2)); needs n >= 3.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthenticityScore<T> {
    pub node_id: u64,
    pub in_similarities: Vec<T>,
    pub ad: T,
    pub extreme: bool,
    pub stdev: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthenticitySummary {
    pub alpha: f64,
    pub mode: AdMode,
    pub eligible: usize,
    pub extreme: usize,
    pub extreme_fraction: f64,
    /// Nodes with fewer than the required number of profiled influencers.
    pub excluded: usize,
    /// Nodes without a feature profile of their own.
    pub missing_profile: usize,
    pub stdevs: Vec<f64>,
}

/// Min-max maps values onto [0, 1]; a constant list maps to all zeros.
pub fn minmax_map<T: Scalar>(values: &[T]) -> Vec<T> {
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    let span = hi - lo;
    if !(span > T::zero()) {
        return vec![T::zero(); values.len()];
    }
    values.iter().map(|&v| (v - lo) / span).collect()
}

pub fn average_distance<T: Scalar>(values: &[T], mode: AdMode) -> Result<T> {
    let n = values.len();
    let min_n = match mode {
        AdMode::Mean => 2,
        AdMode::Strict => 3,
    };
    if n < min_n {
        return Err(Error::Insufficient(format!("average distance needs at least {min_n} values, got {n}")));
    }
    let mut sum = T::zero();
    for m in 0..n {
        for k in (m + 1)..n {
            sum = sum + (values[m] - values[k]).abs();
        }
    }
    let denom = match mode {
        AdMode::Mean => n * (n - 1),
        AdMode::Strict => n * (n - 2),
    };
    Ok(T::lit(2.0) * sum / T::from_count(denom))
}

/// Scores one follower from the raw TSS values to its influencers.
pub fn score_similarities<T: Scalar>(node_id: u64, raw: &[T], alpha: T, mode: AdMode) -> Result<AuthenticityScore<T>> {
    let in_similarities = minmax_map(raw);
    let ad = average_distance(&in_similarities, mode)?;
    let stdev = pop_stdev(&in_similarities).unwrap_or_else(T::zero);
    Ok(AuthenticityScore {
        node_id,
        extreme: ad >= alpha,
        ad,
        stdev,
        in_similarities,
    })
}

/// Scores every follower with enough profiled influencers. Influencers are
/// taken in ascending id order.
pub fn authenticity<T: Scalar>(
    g: &InfluenceGraph,
    profiles: &BTreeMap<u64, Vec<T>>,
    alpha: T,
    mode: AdMode,
) -> Result<(Vec<AuthenticityScore<T>>, AuthenticitySummary)> {
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidArgument("authenticity alpha must lie in [0, 1]".into()));
    }
    let min_in = if mode == AdMode::Strict { 3 } else { 2 };
    enum Outcome<T> {
        Scored(AuthenticityScore<T>),
        Excluded,
        NoProfile,
    }
    let outcomes: Vec<Outcome<T>> = (0..g.node_count())
        .into_par_iter()
        .map(|i| -> Result<Outcome<T>> {
            let id = g.id_at(i);
            let Some(follower) = profiles.get(&id) else {
                return Ok(Outcome::NoProfile);
            };
            let mut influencers: Vec<u64> = g.in_neighbors(i).iter().map(|&j| g.id_at(j)).collect();
            influencers.sort_unstable();
            let raw = influencers
                .iter()
                .filter_map(|inf| profiles.get(inf))
                .map(|p| Ok(tss(follower, p)?.tss))
                .collect::<Result<Vec<T>>>()?;
            if raw.len() < min_in {
                return Ok(Outcome::Excluded);
            }
            Ok(Outcome::Scored(score_similarities(id, &raw, alpha, mode)?))
        })
        .collect::<Result<_>>()?;
    let mut scores = Vec::new();
    let (mut excluded, mut missing_profile) = (0, 0);
    for o in outcomes {
        match o {
            Outcome::Scored(s) => scores.push(s),
            Outcome::Excluded => excluded += 1,
            Outcome::NoProfile => missing_profile += 1,
        }
    }
    let extreme = scores.iter().filter(|s| s.extreme).count();
    let summary = AuthenticitySummary {
        alpha: alpha.to_f64_lossy(),
        mode,
        eligible: scores.len(),
        extreme,
        extreme_fraction: if scores.is_empty() { 0.0 } else { extreme as f64 / scores.len() as f64 },
        excluded,
        missing_profile,
        stdevs: scores.iter().map(|s| s.stdev.to_f64_lossy()).collect(),
    };
    Ok((scores, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(average_distance(&[0.0f64, 1.0], AdMode::Mean).unwrap(), 1.0);
        assert_eq!(average_distance(&[0.3f64, 0.3, 0.3], AdMode::Mean).unwrap(), 0.0);
        assert_eq!(average_distance(&[0.0f64, 0.0, 1.0], AdMode::Mean).unwrap(), 2.0 / 3.0);
        assert_eq!(average_distance(&[0.0f64, 0.0, 1.0], AdMode::Strict).unwrap(), 4.0 / 3.0);
        assert!(average_distance(&[0.0f64, 1.0], AdMode::Strict).is_err());
        assert!(average_distance(&[1.0f64], AdMode::Mean).is_err());
    }

    #[test]
    fn mapping_is_per_list() {
        assert_eq!(minmax_map(&[2.0f64, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(minmax_map(&[7.0f64, 7.0]), vec![0.0, 0.0]);
        let s = score_similarities(1, &[5.0f64, 9.0], 0.8, AdMode::Mean).unwrap();
        assert!(s.extreme);
        assert_eq!(s.stdev, 0.5);
    }

    #[test]
    fn excludes_single_influencer_nodes() {
        // 1 -> 3, 2 -> 3, 1 -> 4
        let g = InfluenceGraph::from_pairs([1, 2, 3, 4], &[(1, 3), (2, 3), (1, 4)]).unwrap();
        let profiles: BTreeMap<u64, Vec<f64>> = [
            (1, vec![1.0, 0.0]),
            (2, vec![0.0, 1.0]),
            (3, vec![1.0, 0.1]),
            (4, vec![0.5, 0.5]),
        ]
        .into_iter()
        .collect();
        let (scores, summary) = authenticity(&g, &profiles, 0.8, AdMode::Mean).unwrap();
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0].node_id, 3);
        assert_eq!(scores[0].in_similarities, vec![0.0, 1.0]);
        assert_eq!(summary.excluded, 3);
        assert_eq!(summary.extreme_fraction, 1.0);
    }
}
