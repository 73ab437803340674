use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::authrev::{AdMode, ForestConfig, Response, DEFAULT_ALPHA, DEFAULT_ALPHA_MIX, DEFAULT_LAMBDA_GRID, DEFAULT_PERIPHERY_THRESHOLD};
use crate::centrality::DistanceMode;
use crate::genre::{InfluenceSampling, Linkage, SamplingConfig, DEFAULT_PRUNE_THRESHOLD};
use crate::graph::CorrelationMode;
use crate::ingest::{Feature, NUM_FEATURES};
use crate::simvec::DEFAULT_COMPONENTS;

/// Environment variables that override `[paths]` entries.
pub const PATH_ENV_VARS: [(&str, &str); 5] = [
    ("MUSNET_INFLUENCE", "influence"),
    ("MUSNET_SONGS", "songs"),
    ("MUSNET_CORPUS", "corpus"),
    ("MUSNET_BIOS", "bios"),
    ("MUSNET_OUT", "out"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ProjectConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub centrality: CentralityConfig,
    pub similarity: SimilarityConfig,
    pub sampling: SamplingSection,
    pub genre: GenreConfig,
    pub authenticity: AuthenticityConfig,
    pub elastic_net: ElasticNetConfig,
    pub forest: ForestSection,
    pub revolution: RevolutionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub influence: PathBuf,
    pub songs: PathBuf,
    /// Indicator phrases, one per line.
    pub corpus: Option<PathBuf>,
    /// Directory of `<id>.txt` bios.
    pub bios: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            influence: PathBuf::from("influence_data.csv"),
            songs: PathBuf::from("full_music_data.csv"),
            corpus: None,
            bios: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralityConfig {
    pub distance: DistanceMode,
    pub correlation: CorrelationMode,
    pub top: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    pub pca_k: usize,
    /// Artists drawn (seeded) for the uniqueness comparison.
    pub uniqueness_sample: usize,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            pca_k: DEFAULT_COMPONENTS,
            uniqueness_sample: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub samples_per_run: usize,
    pub runs: usize,
    /// Falls back to the top-level seed.
    pub seed: Option<u64>,
    pub influence_mode: InfluenceSampling,
}

impl Default for SamplingSection {
    fn default() -> Self {
        let d = SamplingConfig::default();
        SamplingSection {
            samples_per_run: d.samples_per_run,
            runs: d.runs,
            seed: None,
            influence_mode: InfluenceSampling::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenreConfig {
    pub linkage: Linkage,
    pub clusters: usize,
    pub prune_threshold: f64,
    pub trend_features: Vec<String>,
}

impl Default for GenreConfig {
    fn default() -> Self {
        GenreConfig {
            linkage: Linkage::Average,
            clusters: 5,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            trend_features: Feature::ALL.iter().map(|f| f.name().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthenticityConfig {
    pub alpha: f64,
    pub mode: AdMode,
}

impl Default for AuthenticityConfig {
    fn default() -> Self {
        AuthenticityConfig {
            alpha: DEFAULT_ALPHA,
            mode: AdMode::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticNetConfig {
    /// Chosen from `lambda_grid` on a holdout when unset.
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub alpha_mix: f64,
    pub response: Response,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        ElasticNetConfig {
            lambda: None,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            alpha_mix: DEFAULT_ALPHA_MIX,
            response: Response::Ni,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub trees: usize,
    pub max_depth: usize,
    pub features_per_split: Option<usize>,
    /// Falls back to the top-level seed.
    pub seed: Option<u64>,
}

impl Default for ForestSection {
    fn default() -> Self {
        let d = ForestConfig::default();
        ForestSection {
            trees: d.trees,
            max_depth: d.max_depth,
            features_per_split: d.features_per_split,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RevolutionConfig {
    pub periphery_threshold: f64,
}

impl Default for RevolutionConfig {
    fn default() -> Self {
        RevolutionConfig {
            periphery_threshold: DEFAULT_PERIPHERY_THRESHOLD,
        }
    }
}


fn field(name: &str, message: impl Into<String>) -> PipelineError {
    PipelineError::Config {
        field: name.to_string(),
        message: message.into(),
    }
}

fn unit_interval(name: &str, v: f64) -> Result<(), PipelineError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(field(name, format!("{v} is outside [0, 1]")))
    }
}

impl ProjectConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: ProjectConfig = toml::from_str(text).map_err(|e| field("<file>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths resolve against the config file's directory
        if let Some(base) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            cfg.paths.rebase(base);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `MUSNET_*` path overrides using `lookup` (normally the process
    /// environment).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for (var, key) in PATH_ENV_VARS {
            let Some(v) = lookup(var).filter(|v| !v.is_empty()) else { continue };
            let p = PathBuf::from(v);
            match key {
                "influence" => self.paths.influence = p,
                "songs" => self.paths.songs = p,
                "corpus" => self.paths.corpus = Some(p),
                "bios" => self.paths.bios = Some(p),
                _ => self.paths.out = p,
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(1..=NUM_FEATURES).contains(&self.similarity.pca_k) {
            return Err(field("similarity.pca_k", format!("must lie in 1..={NUM_FEATURES}")));
        }
        if self.similarity.uniqueness_sample < 2 {
            return Err(field("similarity.uniqueness_sample", "must be at least 2"));
        }
        if self.sampling.samples_per_run == 0 {
            return Err(field("sampling.samples_per_run", "must be at least 1"));
        }
        if self.sampling.runs == 0 {
            return Err(field("sampling.runs", "must be at least 1"));
        }
        if self.centrality.top == Some(0) {
            return Err(field("centrality.top", "must be at least 1"));
        }
        if self.genre.clusters == 0 {
            return Err(field("genre.clusters", "must be at least 1"));
        }
        unit_interval("genre.prune_threshold", self.genre.prune_threshold)?;
        for name in &self.genre.trend_features {
            name.parse::<Feature>()
                .map_err(|_| field("genre.trend_features", format!("unknown feature {name:?}")))?;
        }
        unit_interval("authenticity.alpha", self.authenticity.alpha)?;
        unit_interval("elastic_net.alpha_mix", self.elastic_net.alpha_mix)?;
        if let Some(l) = self.elastic_net.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(field("elastic_net.lambda", "must be finite and >= 0"));
            }
        }
        if self.elastic_net.lambda_grid.is_empty() {
            return Err(field("elastic_net.lambda_grid", "must not be empty"));
        }
        if self.elastic_net.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(field("elastic_net.lambda_grid", "entries must be finite and >= 0"));
        }
        if self.forest.trees == 0 {
            return Err(field("forest.trees", "must be at least 1"));
        }
        if let Some(m) = self.forest.features_per_split {
            if !(1..=NUM_FEATURES).contains(&m) {
                return Err(field("forest.features_per_split", format!("must lie in 1..={NUM_FEATURES}")));
            }
        }
        unit_interval("revolution.periphery_threshold", self.revolution.periphery_threshold)?;
        Ok(())
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            samples_per_run: self.sampling.samples_per_run,
            runs: self.sampling.runs,
            seed: self.sampling.seed.unwrap_or(self.seed),
        }
    }

    pub fn forest(&self) -> ForestConfig {
        ForestConfig {
            trees: self.forest.trees,
            max_depth: self.forest.max_depth,
            features_per_split: self.forest.features_per_split,
            seed: self.forest.seed.unwrap_or(self.seed),
        }
    }

    /// Sets the top-level seed and clears per-section seeds so it applies
    /// everywhere.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.sampling.seed = None;
        self.forest.seed = None;
    }
}

impl PathsConfig {
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.influence);
        fix(&mut self.songs);
        fix(&mut self.out);
        if let Some(p) = self.corpus.as_mut() {
            fix(p);
        }
        if let Some(p) = self.bios.as_mut() {
            fix(p);
        }
    }
}
