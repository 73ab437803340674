//! Genre-level analyses: within/between-genre similarity and influence
//! sampling, agglomerative clustering of genre means, debut counts, feature
//! trends and the genre → genre influence matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centrality::CentralityScores;
use crate::error::{Error, Result};
use crate::graph::InfluenceGraph;
use crate::ingest::{Feature, RawInfluenceRow, SongRecord};
use crate::scalar::{euclidean, Scalar};
use crate::simvec::tss_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub samples_per_run: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            samples_per_run: 2500,
            runs: 20,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_run == 0 || self.runs == 0 {
            return Err(Error::InvalidArgument("samples_per_run and runs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Random stream for one run: the run seed is `seed + run`, and the within
/// and between draws use separate ChaCha streams.
pub fn run_rng(seed: u64, run: usize, stream: SampleSide) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64));
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSide {
    Within = 0,
    Between = 1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreSamplingReport<T> {
    pub metric: String,
    /// True when a smaller total means a stronger relation (TSS).
    pub lower_is_stronger: bool,
    pub samples_per_run: usize,
    pub within: Vec<T>,
    pub between: Vec<T>,
    pub within_mean: T,
    pub between_mean: T,
    pub runs_within_stronger: usize,
    pub within_stronger: bool,
    /// Runs whose sample space was empty on one side (reported as 0).
    pub flagged: Vec<String>,
    /// Genres with fewer than 2 artists, left out of within-genre draws.
    pub excluded_genres: Vec<String>,
}

impl<T: Scalar> GenreSamplingReport<T> {
    fn assemble(
        metric: &str,
        lower_is_stronger: bool,
        cfg: &SamplingConfig,
        runs: Vec<(T, T)>,
        flagged: Vec<String>,
        excluded_genres: Vec<String>,
    ) -> Self {
        let (within, between): (Vec<T>, Vec<T>) = runs.into_iter().unzip();
        let stronger = |w: T, b: T| if lower_is_stronger { w < b } else { w > b };
        let runs_within_stronger = within.iter().zip(&between).filter(|(&w, &b)| stronger(w, b)).count();
        let mean = |xs: &[T]| xs.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(xs.len());
        let within_mean = mean(&within);
        let between_mean = mean(&between);
        GenreSamplingReport {
            metric: metric.to_string(),
            lower_is_stronger,
            samples_per_run: cfg.samples_per_run,
            within_stronger: stronger(within_mean, between_mean),
            within,
            between,
            within_mean,
            between_mean,
            runs_within_stronger,
            flagged,
            excluded_genres,
        }
    }
}

/// Artists grouped by genre; genres sorted by name, members by id. `flat`
/// lists every member with genres contiguous, so "any artist outside genre g"
/// is an index range complement.
#[derive(Debug, Clone)]
pub struct GenrePool {
    pub genres: Vec<String>,
    pub members: Vec<Vec<u64>>,
    offsets: Vec<usize>,
    flat: Vec<(usize, u64)>,
}

impl GenrePool {
    pub fn new<'a>(assignments: impl IntoIterator<Item = (u64, &'a str)>) -> Self {
        let mut by_genre: BTreeMap<&str, BTreeSet<u64>> = BTreeMap::new();
        for (id, g) in assignments {
            by_genre.entry(g).or_default().insert(id);
        }
        let genres: Vec<String> = by_genre.keys().map(|s| s.to_string()).collect();
        let members: Vec<Vec<u64>> = by_genre.into_values().map(|s| s.into_iter().collect()).collect();
        let mut offsets = vec![0];
        let mut flat = Vec::new();
        for (gi, m) in members.iter().enumerate() {
            flat.extend(m.iter().map(|&id| (gi, id)));
            offsets.push(flat.len());
        }
        GenrePool {
            genres,
            members,
            offsets,
            flat,
        }
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    fn within_candidates(&self) -> Vec<(usize, usize)> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| m.len() >= 2)
            .flat_map(|(g, m)| (0..m.len()).map(move |i| (g, i)))
            .collect()
    }

    /// Same-genre pair of distinct artists, `q` uniform over eligible artists.
    fn draw_within(&self, cands: &[(usize, usize)], rng: &mut impl Rng) -> (u64, u64) {
        let (g, qi) = cands[rng.gen_range(0..cands.len())];
        let m = &self.members[g];
        let mut pi = rng.gen_range(0..m.len() - 1);
        if pi >= qi {
            pi += 1;
        }
        (m[qi], m[pi])
    }

    /// `q` uniform over all artists, `p` uniform over artists of other genres.
    fn draw_between(&self, rng: &mut impl Rng) -> Option<(u64, u64)> {
        let (g, q) = self.flat[rng.gen_range(0..self.flat.len())];
        let (lo, hi) = (self.offsets[g], self.offsets[g + 1]);
        let others = self.flat.len() - (hi - lo);
        if others == 0 {
            return None;
        }
        let mut k = rng.gen_range(0..others);
        if k >= lo {
            k += hi - lo;
        }
        Some((q, self.flat[k].1))
    }

    fn excluded(&self) -> Vec<String> {
        self.genres
            .iter()
            .zip(&self.members)
            .filter(|(_, m)| m.len() < 2)
            .map(|(g, _)| g.clone())
            .collect()
    }
}

fn sample_pairs<T: Scalar>(
    pool: &GenrePool,
    cfg: &SamplingConfig,
    metric: impl Fn(u64, u64) -> T + Sync,
) -> Vec<(T, T)> {
    let cands = pool.within_candidates();
    (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(cfg.seed, run, SampleSide::Within);
            let mut within = T::zero();
            for _ in 0..cfg.samples_per_run {
                let (q, p) = pool.draw_within(&cands, &mut rng);
                within = within + metric(q, p);
            }
            let mut rng = run_rng(cfg.seed, run, SampleSide::Between);
            let mut between = T::zero();
            for _ in 0..cfg.samples_per_run {
                if let Some((q, p)) = pool.draw_between(&mut rng) {
                    between = between + metric(q, p);
                }
            }
            (within, between)
        })
        .collect()
}

fn check_pool(pool: &GenrePool) -> Result<()> {
    if pool.genres.len() < 2 {
        return Err(Error::Insufficient("genre sampling needs at least 2 genres".into()));
    }
    if pool.members.iter().all(|m| m.len() < 2) {
        return Err(Error::Insufficient("no genre has 2 or more artists".into()));
    }
    Ok(())
}

/// Sampled TSS totals within and between genres, one pair of totals per run.
/// Lower totals mean more similar.
pub fn sample_similarity<T: Scalar>(
    profiles: &BTreeMap<u64, Vec<T>>,
    genres: &HashMap<u64, String>,
    cfg: &SamplingConfig,
) -> Result<GenreSamplingReport<T>> {
    cfg.validate()?;
    let pool = GenrePool::new(
        profiles
            .keys()
            .filter_map(|id| genres.get(id).map(|g| (*id, g.as_str()))),
    );
    check_pool(&pool)?;
    let excluded = pool.excluded();
    for g in &excluded {
        log::info!("genre {g:?} has fewer than 2 profiled artists; excluded from within-genre sampling");
    }
    let runs = sample_pairs(&pool, cfg, |q, p| tss_value(&profiles[&q], &profiles[&p]));
    Ok(GenreSamplingReport::assemble("tss", true, cfg, runs, Vec::new(), excluded))
}

/// `1 / (1 + |rank_q - rank_p|)`.
pub fn influence_proximity<T: Scalar>(rank_q: usize, rank_p: usize) -> T {
    T::one() / T::from_count(1 + rank_q.abs_diff(rank_p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfluenceSampling {
    /// Only pairs joined by an influence edge.
    #[default]
    Connected,
    /// Any artist pair, as in similarity sampling.
    Unrestricted,
}

/// Edge lists used by connected influence sampling: `(from, to)` ids of edges
/// whose endpoints share a genre, and of edges that cross genres.
pub fn influence_edge_sets(g: &InfluenceGraph) -> (Vec<(u64, u64)>, Vec<(u64, u64)>) {
    let mut within = Vec::new();
    let mut between = Vec::new();
    for e in g.edges() {
        let a = &g.node(e.from).expect("edge endpoint").genre;
        let b = &g.node(e.to).expect("edge endpoint").genre;
        if a == b {
            within.push((e.from, e.to));
        } else {
            between.push((e.from, e.to));
        }
    }
    (within, between)
}

/// Sampled rank-proximity totals within and between genres. Higher totals
/// mean stronger influence.
pub fn sample_influence<T: Scalar>(
    g: &InfluenceGraph,
    scores: &[CentralityScores<T>],
    cfg: &SamplingConfig,
    mode: InfluenceSampling,
) -> Result<GenreSamplingReport<T>> {
    cfg.validate()?;
    let rank: HashMap<u64, usize> = scores.iter().map(|s| (s.node_id, s.rank_ni)).collect();
    for n in g.nodes() {
        if !rank.contains_key(&n.id) {
            return Err(Error::UnknownNode(n.id));
        }
    }
    let ip = |q: u64, p: u64| influence_proximity::<T>(rank[&q], rank[&p]);
    match mode {
        InfluenceSampling::Unrestricted => {
            let pool = GenrePool::new(g.nodes().iter().map(|n| (n.id, n.genre.as_str())));
            check_pool(&pool)?;
            let excluded = pool.excluded();
            let runs = sample_pairs(&pool, cfg, ip);
            Ok(GenreSamplingReport::assemble("ip", false, cfg, runs, Vec::new(), excluded))
        }
        InfluenceSampling::Connected => {
            let (within, between) = influence_edge_sets(g);
            let mut flagged = Vec::new();
            if within.is_empty() {
                flagged.push("no within-genre edges; within totals reported as 0".to_string());
            }
            if between.is_empty() {
                flagged.push("no cross-genre edges; between totals reported as 0".to_string());
            }
            let draw = |edges: &[(u64, u64)], rng: &mut ChaCha8Rng| -> T {
                if edges.is_empty() {
                    return T::zero();
                }
                let mut total = T::zero();
                for _ in 0..cfg.samples_per_run {
                    let (q, p) = edges[rng.gen_range(0..edges.len())];
                    total = total + ip(q, p);
                }
                total
            };
            let runs: Vec<(T, T)> = (0..cfg.runs)
                .into_par_iter()
                .map(|run| {
                    let w = draw(&within, &mut run_rng(cfg.seed, run, SampleSide::Within));
                    let b = draw(&between, &mut run_rng(cfg.seed, run, SampleSide::Between));
                    (w, b)
                })
                .collect();
            Ok(GenreSamplingReport::assemble("ip", false, cfg, runs, flagged, Vec::new()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Average,
    Ward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge<T> {
    /// Cluster ids: `0..n` are leaves, merge `i` creates cluster `n + i`.
    pub a: usize,
    pub b: usize,
    pub distance: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram<T> {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramNode<T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub height: T,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<DendrogramNode<T>>,
}

/// Agglomerative clustering of labeled points with Euclidean distance.
/// Points are ordered by label first; equal linkage distances are resolved
/// by the lexicographically smallest pair of (smallest-member) labels.
pub fn cluster_points<T: Scalar>(labeled: &[(String, Vec<T>)], linkage: Linkage) -> Result<Dendrogram<T>> {
    if labeled.len() < 2 {
        return Err(Error::Insufficient("clustering needs at least 2 points".into()));
    }
    let mut pts: Vec<&(String, Vec<T>)> = labeled.iter().collect();
    pts.sort_by(|a, b| a.0.cmp(&b.0));
    let n = pts.len();
    let mut dist = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&pts[i].1, &pts[j].1);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    // active slot -> (cluster id, size); a slot keeps its smallest leaf index
    let mut active: Vec<Option<(usize, usize)>> = (0..n).map(|i| Some((i, 1))).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(T, usize, usize)> = None;
        for i in 0..n {
            if active[i].is_none() {
                continue;
            }
            for j in (i + 1)..n {
                if active[j].is_none() {
                    continue;
                }
                let d = dist[i][j];
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (d, i, j) = best.expect("two active clusters remain");
        let (ci, ni) = active[i].expect("active");
        let (cj, nj) = active[j].expect("active");
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let Some((_, nk)) = active[k] else { continue };
            let updated = match linkage {
                Linkage::Average => {
                    (T::from_count(ni) * dist[i][k] + T::from_count(nj) * dist[j][k]) / T::from_count(ni + nj)
                }
                Linkage::Ward => {
                    let (a, b, c) = (T::from_count(ni + nk), T::from_count(nj + nk), T::from_count(nk));
                    let v = (a * dist[i][k] * dist[i][k] + b * dist[j][k] * dist[j][k] - c * d * d)
                        / T::from_count(ni + nj + nk);
                    v.max(T::zero()).sqrt()
                }
            };
            dist[i][k] = updated;
            dist[k][i] = updated;
        }
        active[i] = Some((n + step, ni + nj));
        active[j] = None;
        merges.push(Merge {
            a: ci,
            b: cj,
            distance: d,
            size: ni + nj,
        });
    }
    Ok(Dendrogram {
        leaves: pts.iter().map(|p| p.0.clone()).collect(),
        merges,
    })
}

/// Clusters genres by the mean of their artists' (standardized) profiles.
pub fn cluster_genres<T: Scalar>(
    profiles: &BTreeMap<u64, Vec<T>>,
    genres: &HashMap<u64, String>,
    linkage: Linkage,
) -> Result<Dendrogram<T>> {
    let means = genre_means(profiles, genres);
    if means.len() < 2 {
        return Err(Error::Insufficient("clustering needs at least 2 genres".into()));
    }
    cluster_points(&means, linkage)
}

pub fn genre_means<T: Scalar>(profiles: &BTreeMap<u64, Vec<T>>, genres: &HashMap<u64, String>) -> Vec<(String, Vec<T>)> {
    let mut acc: BTreeMap<&str, (usize, Vec<T>)> = BTreeMap::new();
    for (id, v) in profiles {
        let Some(g) = genres.get(id) else { continue };
        let (n, sum) = acc.entry(g.as_str()).or_insert_with(|| (0, vec![T::zero(); v.len()]));
        *n += 1;
        for (s, &x) in sum.iter_mut().zip(v) {
            *s = *s + x;
        }
    }
    acc.into_iter()
        .map(|(g, (n, sum))| (g.to_string(), sum.into_iter().map(|s| s / T::from_count(n)).collect()))
        .collect()
}

impl<T: Scalar> Dendrogram<T> {
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    fn height(&self, cluster: usize) -> T {
        let n = self.leaf_count();
        if cluster < n {
            T::zero()
        } else {
            self.merges[cluster - n].distance
        }
    }

    /// Flat assignment into `k` clusters: applies the first `n - k` merges.
    /// Cluster labels are numbered in order of each cluster's first leaf.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.leaf_count();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("cluster count {k} not in 1..={n}")));
        }
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, m) in self.merges.iter().take(n - k).enumerate() {
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[ra] = n + i;
            parent[rb] = n + i;
        }
        let mut label: HashMap<usize, usize> = HashMap::new();
        Ok((0..n)
            .map(|leaf| {
                let r = find(&mut parent, leaf);
                let next = label.len();
                *label.entry(r).or_insert(next)
            })
            .collect())
    }

    pub fn tree(&self) -> DendrogramNode<T> {
        let root = self.leaf_count() + self.merges.len() - 1;
        self.subtree(root)
    }

    fn subtree(&self, c: usize) -> DendrogramNode<T> {
        let n = self.leaf_count();
        if c < n {
            return DendrogramNode {
                name: Some(self.leaves[c].clone()),
                height: T::zero(),
                children: Vec::new(),
            };
        }
        let m = &self.merges[c - n];
        DendrogramNode {
            name: None,
            height: m.distance,
            children: vec![self.subtree(m.a), self.subtree(m.b)],
        }
    }

    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        let root = self.leaf_count() + self.merges.len() - 1;
        self.write_newick(root, &mut out);
        out.push(';');
        out
    }

    fn write_newick(&self, c: usize, out: &mut String) {
        let n = self.leaf_count();
        if c < n {
            out.push_str(&newick_label(&self.leaves[c]));
            return;
        }
        let m = &self.merges[c - n];
        out.push('(');
        for (k, child) in [m.a, m.b].into_iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            self.write_newick(child, out);
            let _ = write!(out, ":{}", m.distance - self.height(child));
        }
        out.push(')');
    }
}

fn newick_label(s: &str) -> String {
    if s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' || c == '/') {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', "''"))
    }
}

/// Number of artists debuting per (genre, year), each artist counted once.
pub fn debut_counts(rows: &[RawInfluenceRow]) -> BTreeMap<(String, i32), usize> {
    let mut artists: BTreeMap<u64, (&str, i32)> = BTreeMap::new();
    for r in rows {
        artists
            .entry(r.influencer_id)
            .or_insert((&r.influencer_main_genre, r.influencer_active_start));
        artists
            .entry(r.follower_id)
            .or_insert((&r.follower_main_genre, r.follower_active_start));
    }
    let mut counts = BTreeMap::new();
    for (genre, year) in artists.into_values() {
        *counts.entry((genre.to_string(), year)).or_insert(0) += 1;
    }
    counts
}

/// Genre of a song: that of its first credited artist with a known genre.
pub fn song_genre<'a>(song: &SongRecord, artist_genres: &'a HashMap<u64, String>) -> Option<&'a str> {
    song.artist_ids.iter().find_map(|id| artist_genres.get(id).map(String::as_str))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTrend {
    pub genre: String,
    pub feature: Feature,
    pub genre_series: BTreeMap<i32, f64>,
    pub global_series: BTreeMap<i32, f64>,
}

/// Yearly mean of a raw feature for one genre and across all genre-mapped
/// songs. Years without songs are omitted.
pub fn genre_feature_trend(
    songs: &[SongRecord],
    artist_genres: &HashMap<u64, String>,
    genre: &str,
    feature: Feature,
) -> Result<FeatureTrend> {
    let mut genre_acc: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    let mut global_acc: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for s in songs {
        let Some(g) = song_genre(s, artist_genres) else { continue };
        let v = s.feature(feature);
        let e = global_acc.entry(s.year).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
        if g == genre {
            let e = genre_acc.entry(s.year).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    if genre_acc.is_empty() {
        return Err(Error::UnknownGenre(genre.to_string()));
    }
    let finish = |m: BTreeMap<i32, (f64, usize)>| m.into_iter().map(|(y, (s, n))| (y, s / n as f64)).collect();
    Ok(FeatureTrend {
        genre: genre.to_string(),
        feature,
        genre_series: finish(genre_acc),
        global_series: finish(global_acc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreLink {
    pub from_genre: String,
    pub to_genre: String,
    pub edges: usize,
    /// Share of the source genre's out-edges.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreInfluence {
    pub threshold: f64,
    /// Cross-genre links with weight strictly above the threshold.
    pub cross: Vec<GenreLink>,
    pub self_pairs: Vec<GenreLink>,
    /// Cross-genre links removed by the threshold.
    pub pruned: Vec<GenreLink>,
}

pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.05;

pub fn genre_influence_matrix(g: &InfluenceGraph, threshold: f64) -> Result<GenreInfluence> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut out_total: HashMap<&str, usize> = HashMap::new();
    for e in g.edges() {
        let a = g.node(e.from)?.genre.as_str();
        let b = g.node(e.to)?.genre.as_str();
        *counts.entry((a, b)).or_insert(0) += 1;
        *out_total.entry(a).or_insert(0) += 1;
    }
    let mut result = GenreInfluence {
        threshold,
        cross: Vec::new(),
        self_pairs: Vec::new(),
        pruned: Vec::new(),
    };
    for ((a, b), c) in counts {
        let link = GenreLink {
            from_genre: a.to_string(),
            to_genre: b.to_string(),
            edges: c,
            weight: c as f64 / out_total[a] as f64,
        };
        if a == b {
            result.self_pairs.push(link);
        } else if link.weight > threshold {
            result.cross.push(link);
        } else {
            result.pruned.push(link);
        }
    }
    Ok(result)
}
