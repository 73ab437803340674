use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use musnet::genre::Linkage;
use musnet::pipeline::{self, Format, PipelineError, ProjectConfig, RunOptions, Stage};

/// Music-influence network analysis pipeline.
#[derive(Debug, Parser)]
#[command(name = "musnet", version, about)]
struct Cli {
    /// Project config (TOML). Defaults to ./musnet.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; each stage writes to <out>/<stage>/.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for sampling, subsetting and the forest.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Extra export format, where the stage supports one.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and clean the influence and song tables.
    Ingest,
    /// Influence-graph construction.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Composite centrality scores.
    Centrality,
    /// Standardization, PCA and metric uniqueness.
    Similarity {
        /// Also write the full pairwise TSS matrix.
        #[arg(long)]
        matrix: bool,
    },
    /// Genre sampling, clustering and time series.
    Genre {
        #[arg(long, value_enum)]
        linkage: Option<LinkageArg>,
        #[arg(long)]
        clusters: Option<usize>,
    },
    /// Authenticity scores and elastic-net regression.
    Authenticity {
        /// Use the strict pair-sum normalization.
        #[arg(long)]
        strict: bool,
    },
    /// Revolutionary labeling and forest importances.
    Revolution,
    /// Bundle every stage summary into one JSON file.
    Report,
    /// Print the effective config as TOML.
    Config,
}

#[derive(Debug, Subcommand)]
enum GraphAction {
    /// Build, weight and de-cycle the influence graph.
    Build,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum LinkageArg {
    Average,
    Ward,
}

fn load_config(cli: &Cli) -> Result<ProjectConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => ProjectConfig::load(p)?,
        None => {
            let local = PathBuf::from("musnet.toml");
            if local.is_file() {
                ProjectConfig::load(&local)?
            } else {
                ProjectConfig::default()
            }
        }
    };
    cfg.apply_env(|k| std::env::var(k).ok());
    if let Some(out) = &cli.out {
        cfg.paths.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    match &cli.command {
        Command::Genre { linkage, clusters } => {
            if let Some(l) = linkage {
                cfg.genre.linkage = match l {
                    LinkageArg::Average => Linkage::Average,
                    LinkageArg::Ward => Linkage::Ward,
                };
            }
            if let Some(k) = clusters {
                cfg.genre.clusters = *k;
            }
        }
        Command::Authenticity { strict: true } => cfg.authenticity.mode = musnet::authrev::AdMode::Strict,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(PipelineError::Config {
                field: "--threads".into(),
                message: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Config {
                field: "--threads".into(),
                message: e.to_string(),
            })?;
    }
    let cfg = load_config(cli)?;
    let mut opts = RunOptions {
        format: cli.format,
        ..Default::default()
    };
    let stage = match &cli.command {
        Command::Config => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Ingest => Stage::Ingest,
        Command::Graph { action: GraphAction::Build } => Stage::Graph,
        Command::Centrality => Stage::Centrality,
        Command::Similarity { matrix } => {
            opts.similarity_matrix = *matrix;
            Stage::Similarity
        }
        Command::Genre { .. } => Stage::Genre,
        Command::Authenticity { .. } => Stage::Authenticity,
        Command::Revolution => Stage::Revolution,
        Command::Report => Stage::Report,
    };
    let manifest = pipeline::run(&cfg, stage, &opts)?;
    log::info!("{} finished", manifest.command);
    for o in &manifest.outputs {
        println!("{}/{}", cfg.paths.out.join(stage.dir_name()).display(), o.path);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
