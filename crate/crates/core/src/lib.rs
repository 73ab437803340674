//! Directed music-influence networks and the analyses built on them.
//!
//! * [`ingest`] loads and cleans the influence and song tables.
//! * [`graph`] builds the weighted influence network and breaks its cycles.
//! * [`centrality`] scores nodes with the composite influence metric.
//! * [`simvec`] standardizes features, reduces them with PCA and compares
//!   vectors with TS-SS.
//! * [`genre`] samples within/between-genre similarity and influence,
//!   clusters genres and produces time series.
//! * [`authrev`] covers influence authenticity, elastic-net regression and the
//!   revolutionary-detection pipeline.
//! * [`pipeline`] is the stage-persisted driver behind the `musnet` binary.
//!
//! Numeric kernels are generic over [`Scalar`]; the aliases below fix them to
//! `f64`, which is what the pipeline uses.

pub mod authrev;
pub mod centrality;
pub mod error;
pub mod genre;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod scalar;
pub mod simvec;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Scores = centrality::CentralityScores<f64>;
pub type Similarity = simvec::SimilarityResult<f64>;
pub type Pca = simvec::PcaModel<f64>;
