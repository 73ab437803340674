//! Authenticity of influence, regression of influence on musical features,
//! and revolutionary detection (labeling, periphery, keywords, forest).

mod authenticity;
mod elastic;
mod forest;
mod revolution;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use authenticity::{
    authenticity, average_distance, minmax_map, score_similarities, AdMode, AuthenticityScore, AuthenticitySummary,
    DEFAULT_ALPHA,
};
pub use elastic::{
    elastic_net_fit, elastic_net_fit_with, objective, select_lambda, CdOptions, ElasticNetFit, LambdaSelection,
    DEFAULT_ALPHA_MIX, DEFAULT_LAMBDA_GRID,
};
pub use forest::{forest_fit, forest_train, rank_order_split, DataSplit, DecisionTree, ForestConfig, ForestModel, TreeNode};
pub use revolution::{
    label_revolutionaries, load_bios, load_corpus, normalize_text, periphery_score, semantic_match, write_labels_csv,
    BioSet, Evidence, RevolutionClass, RevolutionLabel, DEFAULT_PERIPHERY_THRESHOLD, MAJOR_FRACTION,
    NON_MAJOR_FRACTION,
};

use crate::centrality::CentralityScores;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    #[default]
    Ni,
    Rank,
}

/// Design matrix and response for regressing influence on artist features:
/// one row per scored artist that has a profile, in ascending id order.
pub fn regression_data<T: Scalar>(
    profiles: &BTreeMap<u64, Vec<T>>,
    scores: &[CentralityScores<T>],
    response: Response,
) -> Result<(Vec<u64>, Vec<Vec<T>>, Vec<T>)> {
    let by_id: BTreeMap<u64, &CentralityScores<T>> = scores.iter().map(|s| (s.node_id, s)).collect();
    let mut ids = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (id, row) in profiles {
        let Some(s) = by_id.get(id) else { continue };
        ids.push(*id);
        x.push(row.clone());
        y.push(match response {
            Response::Ni => s.ni,
            Response::Rank => T::from_count(s.rank_ni),
        });
    }
    if ids.is_empty() {
        return Err(Error::Insufficient("no scored artist has a feature profile".into()));
    }
    Ok((ids, x, y))
}

pub fn write_authenticity_csv<T: Scalar, W: Write>(w: W, scores: &[AuthenticityScore<T>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    wtr.write_record(["node_id", "n_influencers", "ad", "extreme", "stdev", "in_similarities"])
        .map_err(err)?;
    for s in scores {
        let sims: Vec<String> = s.in_similarities.iter().map(|v| v.to_string()).collect();
        wtr.write_record([
            s.node_id.to_string(),
            s.in_similarities.len().to_string(),
            s.ad.to_string(),
            s.extreme.to_string(),
            s.stdev.to_string(),
            sims.join(";"),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<authenticity writer>", e))
}
