//! Stage-persisted driver: every stage reads its inputs from earlier stage
//! directories under the output root and writes its own directory plus a
//! manifest of content hashes.

pub mod config;
pub mod manifest;
mod stages;
pub mod tables;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::ProjectConfig;
pub use manifest::{read_manifest, FileHash, Manifest, MANIFEST_FILE, SUMMARY_FILE};
pub use stages::run_stage;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("missing {missing}; run `musnet {command}` first")]
    Dependency { command: &'static str, missing: PathBuf },
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// 2 config, 3 data, 4 missing upstream stage, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Dependency { .. } => 4,
            PipelineError::Io { .. } => 5,
        }
    }
}

impl From<crate::Error> for PipelineError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Io { path, source } => PipelineError::Io {
                path,
                message: source.to_string(),
            },
            other => PipelineError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Graph,
    Centrality,
    Similarity,
    Genre,
    Authenticity,
    Revolution,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Graph,
        Stage::Centrality,
        Stage::Similarity,
        Stage::Genre,
        Stage::Authenticity,
        Stage::Revolution,
        Stage::Report,
    ];

    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Graph => "graph",
            Stage::Centrality => "centrality",
            Stage::Similarity => "similarity",
            Stage::Genre => "genre",
            Stage::Authenticity => "authenticity",
            Stage::Revolution => "revolution",
            Stage::Report => "report",
        }
    }

    /// The CLI invocation that produces this stage.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Graph => "graph build",
            other => other.dir_name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Dot,
    Newick,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Dot => "dot",
            Format::Newick => "newick",
        }
    }
}

/// Per-invocation options that are not part of the project config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Extra export format for stages that offer one.
    pub format: Option<Format>,
    /// Write the full TSS matrix in the similarity stage.
    pub similarity_matrix: bool,
}

/// Path of a file produced by `stage`, or a dependency error naming the
/// command that creates it.
pub fn require(out: &Path, stage: Stage, file: &str) -> Result<PathBuf, PipelineError> {
    let p = out.join(stage.dir_name()).join(file);
    if p.is_file() {
        Ok(p)
    } else {
        Err(PipelineError::Dependency {
            command: stage.command(),
            missing: p,
        })
    }
}

/// Runs `stage` and returns its manifest.
pub fn run(cfg: &ProjectConfig, stage: Stage, opts: &RunOptions) -> Result<Manifest, PipelineError> {
    cfg.validate()?;
    run_stage(cfg, stage, opts)
}
