use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::manifest::{StageWriter, MANIFEST_FILE, SUMMARY_FILE};
use super::tables::{read_scores, read_vectors, score_rows, write_long, write_scores, write_vectors, ScoreRow};
use super::{require, Format, Manifest, PipelineError, ProjectConfig, RunOptions, Stage};
use crate::authrev::{
    self, authenticity, elastic_net_fit, label_revolutionaries, rank_order_split, regression_data, select_lambda,
    semantic_match, RevolutionClass,
};
use crate::centrality::{node_influence_with, top_k, CentralityScores};
use crate::genre;
use crate::graph::{self, InfluenceGraph};
use crate::ingest::{self, Feature, RawInfluenceRow};
use crate::simvec::{self, Metric, PcaModel};

type StageResult = Result<Manifest, PipelineError>;

pub fn run_stage(cfg: &ProjectConfig, stage: Stage, opts: &RunOptions) -> StageResult {
    check_format(stage, opts.format)?;
    match stage {
        Stage::Ingest => ingest_stage(cfg),
        Stage::Graph => graph_stage(cfg, opts),
        Stage::Centrality => centrality_stage(cfg, opts),
        Stage::Similarity => similarity_stage(cfg, opts),
        Stage::Genre => genre_stage(cfg),
        Stage::Authenticity => authenticity_stage(cfg),
        Stage::Revolution => revolution_stage(cfg),
        Stage::Report => report_stage(cfg),
    }
}

fn check_format(stage: Stage, format: Option<Format>) -> Result<(), PipelineError> {
    let Some(f) = format else { return Ok(()) };
    let allowed: &[Format] = match stage {
        Stage::Graph => &[Format::Csv, Format::Json, Format::Dot],
        Stage::Centrality => &[Format::Csv, Format::Json],
        Stage::Genre => &[Format::Json, Format::Newick],
        _ => &[],
    };
    if allowed.contains(&f) {
        Ok(())
    } else {
        Err(PipelineError::Config {
            field: "--format".into(),
            message: format!("`{}` does not support format {}", stage.command(), f.name()),
        })
    }
}

fn open(path: &Path) -> Result<std::fs::File, PipelineError> {
    std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))
}

fn feature_names() -> Vec<String> {
    Feature::ALL.iter().map(|f| f.name().to_string()).collect()
}

fn ingest_stage(cfg: &ProjectConfig) -> StageResult {
    let out = &cfg.paths.out;
    let rows = ingest::load_influence(&cfg.paths.influence)?;
    let known: HashSet<u64> = rows.iter().flat_map(|r| [r.influencer_id, r.follower_id]).collect();
    let (songs, report) = ingest::load_songs(&cfg.paths.songs, Some(&known))?;
    let profiles = ingest::build_artist_profiles(&songs);

    let mut w = StageWriter::create(out, Stage::Ingest)?;
    w.input(&cfg.paths.influence)?;
    w.input(&cfg.paths.songs)?;
    w.write_csv("influence.csv", |b| ingest::write_influence(b, &rows))?;
    w.write_csv("songs.csv", |b| ingest::write_songs(b, &songs))?;
    w.write_csv("profiles.csv", |b| ingest::write_profiles(b, profiles.values()))?;
    w.write_json("cleaning_report.json", &report)?;
    w.write_json(
        SUMMARY_FILE,
        &json!({
            "influence_rows": rows.len(),
            "artists": known.len(),
            "songs_read": report.rows_read,
            "songs_kept": songs.len(),
            "songs_dropped": report.rows_dropped(),
            "songs_unlinked": report.rows_flagged_unlinked,
            "profiles": profiles.len(),
        }),
    )?;
    w.finish(cfg)
}

fn load_rows(out: &Path, w: &mut StageWriter) -> Result<Vec<RawInfluenceRow>, PipelineError> {
    let p = require(out, Stage::Ingest, "influence.csv")?;
    w.input(&p)?;
    Ok(ingest::read_influence(open(&p)?)?)
}

fn graph_stage(cfg: &ProjectConfig, opts: &RunOptions) -> StageResult {
    let out = &cfg.paths.out;
    require(out, Stage::Ingest, "influence.csv")?;
    let mut w = StageWriter::create(out, Stage::Graph)?;
    let rows = load_rows(out, &mut w)?;
    let (built, build_report) = graph::build_graph(&rows)?;
    let (weighted, norm_report) = graph::normalize_weights(&built)?;
    let (g, removed) = graph::remove_cycles(&weighted);

    w.write_csv("nodes.csv", |b| graph::write_nodes_csv(b, &g))?;
    w.write_csv("edges.csv", |b| graph::write_edges_csv(b, g.edges()))?;
    w.write_csv("removed_edges.csv", |b| graph::write_edges_csv(b, removed.iter()))?;
    match opts.format {
        Some(Format::Dot) => w.write("graph.dot", graph::to_dot(&g).as_bytes())?,
        Some(Format::Json) => w.write_json("graph.json", &json!({ "nodes": g.nodes(), "edges": g.edges() }))?,
        _ => {}
    }
    w.write_json(
        SUMMARY_FILE,
        &json!({
            "build": build_report,
            "normalize": norm_report,
            "cycle_edges_removed": removed.len(),
            "nodes": g.node_count(),
            "edges": g.edge_count(),
            "acyclic": g.is_acyclic(),
            "genres": g.genres(),
        }),
    )?;
    w.finish(cfg)
}

fn load_graph(out: &Path, w: &mut StageWriter) -> Result<InfluenceGraph, PipelineError> {
    let np = require(out, Stage::Graph, "nodes.csv")?;
    let ep = require(out, Stage::Graph, "edges.csv")?;
    w.input(&np)?;
    w.input(&ep)?;
    let nodes = graph::read_nodes_csv(open(&np)?)?;
    let edges = graph::read_edges_csv(open(&ep)?)?;
    Ok(InfluenceGraph::from_parts(nodes, edges)?)
}

fn centrality_stage(cfg: &ProjectConfig, opts: &RunOptions) -> StageResult {
    let out = &cfg.paths.out;
    require(out, Stage::Graph, "edges.csv")?;
    let mut w = StageWriter::create(out, Stage::Centrality)?;
    let g = load_graph(out, &mut w)?;
    let scores = node_influence_with::<f64>(&g, cfg.centrality.distance)?;
    let rows = score_rows(&g, &scores)?;
    w.write_csv("scores.csv", |b| write_scores(b, &rows))?;
    if opts.format == Some(Format::Json) {
        w.write_json("scores.json", &rows)?;
    }
    let correlation = match graph::year_diff_centrality_correlation(&g, &scores, cfg.centrality.correlation) {
        Ok(m) => json!(m),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    w.write_json("correlation.json", &correlation)?;
    let top = top_k(&g, &scores, cfg.centrality.top.unwrap_or(10).min(scores.len()), None)?;
    w.write_json(
        SUMMARY_FILE,
        &json!({
            "nodes": scores.len(),
            "distance": cfg.centrality.distance,
            "correlation_mode": cfg.centrality.correlation,
            "year_diff_vs_ni": correlation.pointer("/r/0/4"),
            "top": top,
        }),
    )?;
    w.finish(cfg)
}

fn load_scores(out: &Path, w: &mut StageWriter) -> Result<Vec<ScoreRow>, PipelineError> {
    let p = require(out, Stage::Centrality, "scores.csv")?;
    w.input(&p)?;
    Ok(read_scores(open(&p)?)?)
}

fn similarity_stage(cfg: &ProjectConfig, opts: &RunOptions) -> StageResult {
    let out = &cfg.paths.out;
    let src = require(out, Stage::Ingest, "profiles.csv")?;
    let mut w = StageWriter::create(out, Stage::Similarity)?;
    w.input(&src)?;
    let profiles = ingest::read_profiles(open(&src)?)?;
    let ids: Vec<u64> = profiles.keys().copied().collect();
    let raw: Vec<Vec<f64>> = profiles.values().map(|p| p.features.to_vec()).collect();
    let k = cfg.similarity.pca_k;
    let (model, z, standardizer) = PcaModel::fit_raw(&raw, k)?;
    let standardized: BTreeMap<u64, Vec<f64>> = ids.iter().copied().zip(z.iter().cloned()).collect();
    let vectors: BTreeMap<u64, Vec<f64>> = ids
        .iter()
        .zip(&z)
        .map(|(&id, row)| Ok((id, model.project(row)?)))
        .collect::<crate::Result<_>>()?;
    let comp_names: Vec<String> = (1..=k).map(|c| format!("v{c}")).collect();

    let n = vectors.len();
    let m = cfg.similarity.uniqueness_sample.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked = sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    let all: Vec<&Vec<f64>> = vectors.values().collect();
    let subset: Vec<Vec<f64>> = picked.iter().map(|&i| all[i].clone()).collect();
    let mut uniqueness = BTreeMap::new();
    for metric in Metric::ALL {
        uniqueness.insert(metric.name(), simvec::uniqueness(&subset, metric)?);
    }

    w.write_csv("standardized.csv", |b| write_vectors(b, &feature_names(), &standardized))?;
    w.write_csv("vectors.csv", |b| write_vectors(b, &comp_names, &vectors))?;
    w.write_json("pca_model.json", &model)?;
    w.write_json(
        "uniqueness.json",
        &json!({ "vectors": m, "pairs": m * (m - 1) / 2, "decimals": simvec::UNIQUENESS_DECIMALS, "percent": uniqueness }),
    )?;
    if opts.similarity_matrix {
        w.write_csv("similarity_matrix.csv", |b| simvec::write_similarity_matrix(b, &vectors))?;
    }
    let ratio: Vec<f64> = model
        .explained_variance
        .iter()
        .map(|v| if model.total_variance > 0.0 { v / model.total_variance } else { 0.0 })
        .collect();
    let degenerate: Vec<&str> = Feature::ALL
        .iter()
        .zip(&standardizer.degenerate)
        .filter(|(_, &d)| d)
        .map(|(f, _)| f.name())
        .collect();
    w.write_json(
        SUMMARY_FILE,
        &json!({
            "artists": n,
            "components": k,
            "explained_variance": model.explained_variance,
            "explained_ratio": ratio,
            "cumulative_ratio": ratio.iter().sum::<f64>(),
            "degenerate_features": degenerate,
            "uniqueness": uniqueness,
        }),
    )?;
    w.finish(cfg)
}

fn load_vectors(out: &Path, file: &str, w: &mut StageWriter) -> Result<BTreeMap<u64, Vec<f64>>, PipelineError> {
    let p = require(out, Stage::Similarity, file)?;
    w.input(&p)?;
    Ok(read_vectors(open(&p)?)?.1)
}

/// Genre of each artist at its first appearance in the influence table.
pub fn artist_genres(rows: &[RawInfluenceRow]) -> HashMap<u64, String> {
    let mut m = HashMap::new();
    for r in rows {
        m.entry(r.influencer_id).or_insert_with(|| r.influencer_main_genre.clone());
        m.entry(r.follower_id).or_insert_with(|| r.follower_main_genre.clone());
    }
    m
}

fn to_scores(rows: &[ScoreRow]) -> Vec<CentralityScores<f64>> {
    rows.iter().map(ScoreRow::scores).collect()
}

fn genre_stage(cfg: &ProjectConfig) -> StageResult {
    let out = &cfg.paths.out;
    require(out, Stage::Ingest, "songs.csv")?;
    require(out, Stage::Graph, "edges.csv")?;
    require(out, Stage::Centrality, "scores.csv")?;
    require(out, Stage::Similarity, "vectors.csv")?;
    let mut w = StageWriter::create(out, Stage::Genre)?;
    let rows = load_rows(out, &mut w)?;
    let songs_path = require(out, Stage::Ingest, "songs.csv")?;
    w.input(&songs_path)?;
    let (songs, _) = ingest::read_songs(open(&songs_path)?, None)?;
    let g = load_graph(out, &mut w)?;
    let scores = to_scores(&load_scores(out, &mut w)?);
    let vectors = load_vectors(out, "vectors.csv", &mut w)?;
    let standardized = load_vectors(out, "standardized.csv", &mut w)?;
    let genres = artist_genres(&rows);
    let sampling = cfg.sampling();

    let sim = genre::sample_similarity(&vectors, &genres, &sampling)?;
    let inf = genre::sample_influence(&g, &scores, &sampling, cfg.sampling.influence_mode)?;
    let dend = genre::cluster_genres(&standardized, &genres, cfg.genre.linkage)?;
    let k = cfg.genre.clusters.min(dend.leaf_count());
    let cut = dend.cut(k)?;
    let debut = genre::debut_counts(&rows);
    let matrix = genre::genre_influence_matrix(&g, cfg.genre.prune_threshold)?;

    w.write_json("similarity_sampling.json", &sim)?;
    w.write_json("influence_sampling.json", &inf)?;
    w.write_json(
        "dendrogram.json",
        &json!({
            "linkage": cfg.genre.linkage,
            "leaves": dend.leaves,
            "merges": dend.merges,
            "tree": dend.tree(),
            "newick": dend.to_newick(),
        }),
    )?;
    let mut newick = dend.to_newick();
    newick.push('\n');
    w.write("dendrogram.nwk", newick.as_bytes())?;
    w.write_csv("clusters.csv", |b| {
        write_long(
            b,
            &["genre", "cluster"],
            dend.leaves.iter().zip(&cut).map(|(g, c)| vec![g.clone(), c.to_string()]),
        )
    })?;
    w.write_csv("debut_counts.csv", |b| {
        write_long(
            b,
            &["genre", "year", "value"],
            debut.iter().map(|((g, y), c)| vec![g.clone(), y.to_string(), c.to_string()]),
        )
    })?;
    w.write_csv("genre_matrix.csv", |b| {
        write_long(
            b,
            &["from_genre", "to_genre", "weight"],
            matrix
                .cross
                .iter()
                .map(|l| vec![l.from_genre.clone(), l.to_genre.clone(), l.weight.to_string()]),
        )
    })?;
    w.write_json("genre_links.json", &matrix)?;

    let song_genres: BTreeSet<&str> = songs.iter().filter_map(|s| genre::song_genre(s, &genres)).collect();
    for name in &cfg.genre.trend_features {
        let feature: Feature = name.parse()?;
        let mut lines = Vec::new();
        let mut global = None;
        for gname in &song_genres {
            let t = genre::genre_feature_trend(&songs, &genres, gname, feature)?;
            lines.extend(t.genre_series.iter().map(|(y, v)| vec![gname.to_string(), y.to_string(), v.to_string()]));
            global.get_or_insert(t.global_series);
        }
        if let Some(gs) = global {
            lines.extend(gs.iter().map(|(y, v)| vec![GLOBAL_SERIES.to_string(), y.to_string(), v.to_string()]));
        }
        w.write_csv(&format!("trend_{}.csv", feature.name()), |b| write_long(b, &["genre", "year", "value"], lines))?;
    }

    w.write_json(
        SUMMARY_FILE,
        &json!({
            "similarity": {
                "within_mean": sim.within_mean,
                "between_mean": sim.between_mean,
                "runs_within_stronger": sim.runs_within_stronger,
                "runs": sim.within.len(),
                "within_more_similar": sim.within_stronger,
                "excluded_genres": sim.excluded_genres,
            },
            "influence": {
                "mode": cfg.sampling.influence_mode,
                "within_mean": inf.within_mean,
                "between_mean": inf.between_mean,
                "runs_within_stronger": inf.runs_within_stronger,
                "runs": inf.within.len(),
                "within_stronger": inf.within_stronger,
                "flagged": inf.flagged,
            },
            "clusters": k,
            "genres": dend.leaf_count(),
            "cross_links": matrix.cross.len(),
            "pruned_links": matrix.pruned.len(),
            "sampling": sampling,
        }),
    )?;
    w.finish(cfg)
}

/// Genre label used for the all-genre series in trend tables.
pub const GLOBAL_SERIES: &str = "__all__";

fn authenticity_stage(cfg: &ProjectConfig) -> StageResult {
    let out = &cfg.paths.out;
    require(out, Stage::Graph, "edges.csv")?;
    require(out, Stage::Centrality, "scores.csv")?;
    require(out, Stage::Similarity, "vectors.csv")?;
    let mut w = StageWriter::create(out, Stage::Authenticity)?;
    let g = load_graph(out, &mut w)?;
    let scores = to_scores(&load_scores(out, &mut w)?);
    let vectors = load_vectors(out, "vectors.csv", &mut w)?;
    let standardized = load_vectors(out, "standardized.csv", &mut w)?;

    let (auth, summary) = authenticity(&g, &vectors, cfg.authenticity.alpha, cfg.authenticity.mode)?;
    let en = &cfg.elastic_net;
    let (_, x, y) = regression_data(&standardized, &scores, en.response)?;
    let (lambda, selection) = match en.lambda {
        Some(l) => (l, None),
        None => {
            let s = select_lambda(&x, &y, &en.lambda_grid, en.alpha_mix)?;
            (s.chosen, Some(s))
        }
    };
    let fit = elastic_net_fit(&x, &y, lambda, en.alpha_mix)?;
    let coefficients: BTreeMap<&str, f64> =
        Feature::ALL.iter().map(|f| f.name()).zip(fit.coefficients.iter().copied()).collect();

    w.write_csv("authenticity.csv", |b| authrev::write_authenticity_csv(b, &auth))?;
    w.write_json(
        "elastic_net.json",
        &json!({
            "response": en.response,
            "features": feature_names(),
            "samples": x.len(),
            "lambda_selection": selection,
            "fit": fit,
        }),
    )?;
    w.write_json(
        SUMMARY_FILE,
        &json!({
            "authenticity": {
                "alpha": summary.alpha,
                "mode": summary.mode,
                "eligible": summary.eligible,
                "extreme": summary.extreme,
                "extreme_fraction": summary.extreme_fraction,
                "excluded": summary.excluded,
                "missing_profile": summary.missing_profile,
            },
            "elastic_net": {
                "response": en.response,
                "lambda": lambda,
                "alpha_mix": en.alpha_mix,
                "intercept": fit.intercept,
                "coefficients": coefficients,
                "iterations": fit.iterations,
                "converged": fit.converged,
            },
        }),
    )?;
    w.finish(cfg)
}

fn revolution_stage(cfg: &ProjectConfig) -> StageResult {
    let out = &cfg.paths.out;
    require(out, Stage::Graph, "edges.csv")?;
    require(out, Stage::Centrality, "scores.csv")?;
    require(out, Stage::Similarity, "standardized.csv")?;
    let mut w = StageWriter::create(out, Stage::Revolution)?;
    let g = load_graph(out, &mut w)?;
    let scores = to_scores(&load_scores(out, &mut w)?);
    let standardized = load_vectors(out, "standardized.csv", &mut w)?;

    let mut keyword_note = Value::Null;
    let keywords: BTreeSet<u64> = match (&cfg.paths.corpus, &cfg.paths.bios) {
        (Some(corpus_path), Some(bios_dir)) => {
            w.input(corpus_path)?;
            let corpus = authrev::load_corpus(corpus_path)?;
            let bios = authrev::load_bios(bios_dir, g.nodes().iter().map(|n| n.id))?;
            let mut bio_ids: Vec<&u64> = bios.bios.keys().collect();
            bio_ids.sort_unstable();
            for id in bio_ids {
                w.input(&bios_dir.join(format!("{id}.txt")))?;
            }
            let hits = semantic_match(&corpus, &bios.bios)?;
            keyword_note = json!({ "phrases": corpus.len(), "bios": bios.bios.len(), "missing_bios": bios.missing.len(), "flagged": hits.len() });
            hits
        }
        _ => BTreeSet::new(),
    };
    let labels = label_revolutionaries(&g, &scores, cfg.revolution.periphery_threshold, &keywords)?;

    // class 1 = major, 0 = non-major; rows stay in rank order
    let rows: Vec<(Vec<f64>, usize)> = labels
        .iter()
        .filter(|l| l.label != RevolutionClass::Unlabeled)
        .filter_map(|l| {
            let class = usize::from(l.label == RevolutionClass::Major);
            standardized.get(&l.node_id).map(|v| (v.clone(), class))
        })
        .collect();
    let split = rank_order_split(&rows, 2);
    let model = authrev::forest_train(&split, 2, &cfg.forest())?;
    let importances: Vec<(&str, f64)> =
        Feature::ALL.iter().map(|f| f.name()).zip(model.feature_importances.iter().copied()).collect();

    w.write_csv("labels.csv", |b| authrev::write_labels_csv(b, &labels))?;
    w.write_json("forest.json", &model)?;
    w.write_csv("importances.csv", |b| {
        write_long(b, &["feature", "importance"], importances.iter().map(|(f, v)| vec![f.to_string(), v.to_string()]))
    })?;
    let count = |c: RevolutionClass| labels.iter().filter(|l| l.label == c).count();
    w.write_json(
        SUMMARY_FILE,
        &json!({
            "nodes": labels.len(),
            "major": count(RevolutionClass::Major),
            "non_major": count(RevolutionClass::NonMajor),
            "unlabeled": count(RevolutionClass::Unlabeled),
            "keywords": keyword_note,
            "train": split.train_y.len(),
            "validation": split.val_y.len(),
            "test": split.test_y.len(),
            "validation_accuracy": model.validation_accuracy,
            "test_accuracy": model.test_accuracy,
            "importances": importances.iter().map(|(f, v)| (f.to_string(), *v)).collect::<BTreeMap<_, _>>(),
        }),
    )?;
    w.finish(cfg)
}

fn report_stage(cfg: &ProjectConfig) -> StageResult {
    let out = &cfg.paths.out;
    require(out, Stage::Ingest, SUMMARY_FILE)?;
    let mut w = StageWriter::create(out, Stage::Report)?;
    let mut stages = BTreeMap::new();
    let mut outputs = BTreeMap::new();
    let mut missing = Vec::new();
    for stage in Stage::ALL.into_iter().filter(|s| *s != Stage::Report) {
        let dir = out.join(stage.dir_name());
        let summary = dir.join(SUMMARY_FILE);
        if !summary.is_file() {
            missing.push(stage.command());
            continue;
        }
        w.input(&summary)?;
        let text = std::fs::read_to_string(&summary).map_err(|e| PipelineError::io(&summary, e))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", summary.display())))?;
        stages.insert(stage.dir_name(), value);
        let manifest = dir.join(MANIFEST_FILE);
        if manifest.is_file() {
            let m = super::read_manifest(&manifest)?;
            outputs.insert(stage.dir_name(), m.outputs);
        }
    }
    let bundle = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "stages": stages,
        "outputs": outputs,
        "missing_stages": missing,
    });
    w.write_json("report.json", &bundle)?;
    w.write_json(SUMMARY_FILE, &json!({ "stages": stages.len(), "missing_stages": missing }))?;
    w.finish(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_support() {
        assert!(check_format(Stage::Graph, Some(Format::Dot)).is_ok());
        assert!(check_format(Stage::Genre, Some(Format::Newick)).is_ok());
        assert!(check_format(Stage::Ingest, Some(Format::Json)).is_err());
        assert!(check_format(Stage::Ingest, None).is_ok());
    }
}
