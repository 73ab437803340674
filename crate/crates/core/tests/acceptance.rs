//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (uncaptured) before asserting.
mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::time::{Duration, Instant};

use common::{ols, random_pairs, rel_close, snapshot, write_fixture, Oracle};
use musnet::authrev::{authenticity, average_distance, elastic_net_fit, forest_train, rank_order_split, AdMode, ForestConfig};
use musnet::centrality::{cluster_rank, node_influence, out_closeness, semi_local, DistanceMode};
use musnet::genre::{sample_similarity, SamplingConfig};
use musnet::graph::{remove_cycles, ArtistNode, InfluenceEdge, InfluenceGraph};
use musnet::pipeline::{self, ProjectConfig, RunOptions, Stage};
use musnet::simvec::{fit_pca, ss, ts, tss, tss_value, uniqueness, Metric};
use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn verdict(n: &str, ok: bool, detail: String) {
    let line = format!("criterion {n}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[test]
fn c01_centrality_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2001);
    let mut mismatches = 0;
    let mut checked = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=12);
        let p = rng.gen_range(0.05..0.7);
        let g = InfluenceGraph::from_pairs(1..=n as u64, &random_pairs(&mut rng, n, p)).unwrap();
        let edges: Vec<(usize, usize)> =
            g.edges().iter().map(|e| (g.idx(e.from).unwrap(), g.idx(e.to).unwrap())).collect();
        let o = Oracle::new(n, &edges);
        let ni: HashMap<u64, f64> = node_influence::<f64>(&g).unwrap().into_iter().map(|s| (s.node_id, s.ni)).collect();
        for i in 0..n {
            let id = g.id_at(i);
            let pairs = [
                (cluster_rank::<f64>(&g, id).unwrap(), o.lc(i)),
                (semi_local::<f64>(&g, id).unwrap(), o.sc(i)),
                (out_closeness::<f64>(&g, id, DistanceMode::Hops).unwrap(), o.gc(i)),
                (ni[&id], o.ni(i)),
            ];
            for (got, want) in pairs {
                checked += 1;
                if !rel_close(got, want, 1e-12) {
                    mismatches += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "1",
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("{checked} values, {mismatches} mismatches, {elapsed:.2?}"),
    );
}

#[test]
fn c02_cycle_removal_is_topological_and_scc_local() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut bad = 0;
    let mut removed_total = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=20);
        let p = rng.gen_range(0.05..0.5);
        let pairs = random_pairs(&mut rng, n, p);
        let nodes = (1..=n as u64).map(ArtistNode::bare).collect();
        let edges = pairs
            .iter()
            .map(|&(from, to)| InfluenceEdge { from, to, year_diff: 0, weight: rng.gen_range(0.01..=1.0) })
            .collect();
        let g = InfluenceGraph::from_parts(nodes, edges).unwrap();
        let (dag, removed) = remove_cycles(&g);
        removed_total += removed.len();

        let mut pg = DiGraph::<u64, ()>::new();
        let ix: HashMap<u64, _> = (1..=n as u64).map(|id| (id, pg.add_node(id))).collect();
        for &(a, b) in &pairs {
            pg.add_edge(ix[&a], ix[&b], ());
        }
        let mut comp = HashMap::new();
        for (c, scc) in tarjan_scc(&pg).into_iter().enumerate() {
            if scc.len() > 1 {
                for v in scc {
                    comp.insert(pg[v], c);
                }
            }
        }
        if removed.iter().any(|e| !(comp.contains_key(&e.from) && comp.get(&e.from) == comp.get(&e.to))) {
            bad += 1;
        }

        let mut out = DiGraph::<u64, ()>::new();
        let ox: HashMap<u64, _> = (1..=n as u64).map(|id| (id, out.add_node(id))).collect();
        for e in dag.edges() {
            out.add_edge(ox[&e.from], ox[&e.to], ());
        }
        if toposort(&out, None).is_err() || dag.edge_count() + removed.len() != g.edge_count() {
            bad += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "2",
        bad == 0 && elapsed < Duration::from_secs(5),
        format!("100 graphs, {removed_total} edges removed, {bad} violations, {elapsed:.2?}"),
    );
}

#[test]
fn c03_tss_identity_symmetry_and_hand_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(2003);
    let mut bad = 0;
    for _ in 0..1000 {
        let a: Vec<f64> = (0..9).map(|_| gauss(&mut rng)).collect();
        let b: Vec<f64> = (0..9).map(|_| gauss(&mut rng)).collect();
        if tss(&a, &a).unwrap().tss != 0.0 || tss(&b, &b).unwrap().tss != 0.0 {
            bad += 1;
        }
        if tss(&a, &b).unwrap().tss != tss(&b, &a).unwrap().tss {
            bad += 1;
        }
    }
    let (area, theta) = ts(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    let sector = ss(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    let want_ts = 100f64.to_radians().sin() / 2.0;
    let want_ss = std::f64::consts::PI * 2.0 * (100.0 / 360.0);
    let hand = (area - want_ts).abs() <= 1e-9 && (sector - want_ss).abs() <= 1e-9 && (theta - 100.0).abs() <= 1e-9;
    verdict(
        "3",
        bad == 0 && hand,
        format!("1000 pairs, {bad} violations; TS {area:.12} vs {want_ts:.12}, SS {sector:.12} vs {want_ss:.12}"),
    );
}

fn distinct_percent(vs: &[Vec<f64>], f: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let mut seen = BTreeSet::new();
    let mut pairs = 0usize;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            seen.insert((f(&vs[i], &vs[j]) * 1e7).round() as i64);
            pairs += 1;
        }
    }
    100.0 * seen.len() as f64 / pairs as f64
}

#[test]
fn c04_uniqueness_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(2004);
    let vs: Vec<Vec<f64>> = (0..500).map(|_| (0..9).map(|_| gauss(&mut rng)).collect()).collect();
    let start = Instant::now();
    let u_tss = uniqueness(&vs, Metric::Tss).unwrap();
    let u_euc = uniqueness(&vs, Metric::Euclidean).unwrap();
    let u_cos = uniqueness(&vs, Metric::Cosine).unwrap();
    let elapsed = start.elapsed();

    let euclid = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let cosine = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let o_tss = distinct_percent(&vs, tss_value);
    let o_euc = distinct_percent(&vs, euclid);
    let o_cos = distinct_percent(&vs, cosine);
    let agree = (u_tss - o_tss).abs() < 0.01 && (u_euc - o_euc).abs() < 0.01 && (u_cos - o_cos).abs() < 0.01;
    verdict(
        "4",
        u_tss >= u_euc && u_euc >= u_cos && agree && elapsed < Duration::from_secs(30),
        format!("TSS {u_tss:.4}% >= Euclidean {u_euc:.4}% >= cosine {u_cos:.4}%, oracle agrees {agree}, {elapsed:.2?}"),
    );
}

#[test]
fn c05_pca_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(2005);
    let rows: Vec<Vec<f64>> = (0..400)
        .map(|_| {
            let base: Vec<f64> = (0..9).map(|_| gauss(&mut rng)).collect();
            base.iter().enumerate().map(|(j, v)| v * (1.0 + j as f64 * 0.3) + 0.5 * base[0]).collect()
        })
        .collect();
    let m = fit_pca(&rows, 9).unwrap();
    let mut worst = 0.0f64;
    for i in 0..9 {
        for j in 0..9 {
            let d: f64 = m.components[i].iter().zip(&m.components[j]).map(|(x, y)| x * y).sum();
            worst = worst.max((d - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..9).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let total: f64 = (0..9).map(|j| rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sum();
    let explained: f64 = m.explained_variance.iter().sum();
    let sum_gap = (explained - total).abs();

    let noise = Normal::new(0.0, 0.05).unwrap();
    let planted: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let x: f64 = gauss(&mut rng);
            vec![x, x + noise.sample(&mut rng)]
        })
        .collect();
    let p = fit_pca(&planted, 1).unwrap();
    let c = &p.components[0];
    let cos = ((c[0] + c[1]) / std::f64::consts::SQRT_2).abs();
    verdict(
        "5",
        worst <= 1e-9 && sum_gap <= 1e-6 && cos >= 0.999,
        format!("orthonormality error {worst:.2e}, variance sum gap {sum_gap:.2e}, planted cosine {cos:.6}"),
    );
}

#[test]
fn c06_within_genre_more_similar() {
    let mut rng = ChaCha8Rng::seed_from_u64(2006);
    let sigma = 1.0;
    let mut profiles = BTreeMap::new();
    let mut genres = HashMap::new();
    for g in 0..5u64 {
        let mut center = [2.0; 9];
        center[g as usize] += 10.0 * sigma;
        center[(g as usize + 5) % 9] -= 10.0 * sigma;
        for a in 0..50u64 {
            let id = g * 1000 + a;
            let v: Vec<f64> = center.iter().map(|c| c + sigma * gauss(&mut rng)).collect();
            profiles.insert(id, v);
            genres.insert(id, format!("genre{g}"));
        }
    }
    let cfg = SamplingConfig { samples_per_run: 2500, runs: 20, seed: 6 };
    let start = Instant::now();
    let report = sample_similarity(&profiles, &genres, &cfg).unwrap();
    let elapsed = start.elapsed();
    let runs_ok = report.within.iter().zip(&report.between).filter(|(w, b)| w < b).count();
    verdict(
        "6",
        runs_ok == 20 && report.runs_within_stronger == 20 && elapsed < Duration::from_secs(60),
        format!(
            "{runs_ok}/20 runs within < between (mean SWG {:.1}, SBG {:.1}), {elapsed:.2?}",
            report.within_mean, report.between_mean
        ),
    );
}

#[test]
fn c07a_average_distance_values() {
    let pair = average_distance(&[0.0, 1.0], AdMode::Mean).unwrap();
    let flat = average_distance(&[0.3, 0.3, 0.3], AdMode::Mean).unwrap();
    let third = average_distance(&[0.0, 0.0, 1.0], AdMode::Mean).unwrap();
    verdict(
        "7a",
        pair == 1.0 && flat == 0.0 && third == 2.0 / 3.0,
        format!("AD{{0,1}} = {pair}, AD{{c,c,c}} = {flat}, AD{{0,0,1}} = {third}"),
    );
}

/// Offset from `f` along a perpendicular direction whose TSS to `f` is 1.
fn unit_tss_partner(f: &[f64; 2], sign: f64) -> Vec<f64> {
    let perp = [-f[1] * sign, f[0] * sign];
    let at = |t: f64| vec![f[0] + t * perp[0], f[1] + t * perp[1]];
    let (mut lo, mut hi) = (0.0, 1.0);
    while tss_value(f, &at(hi)) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tss_value(f, &at(mid)) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

#[test]
fn c07b_polarized_network_flagged_extreme() {
    let mut profiles: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut pairs = Vec::new();
    for k in 0..50u64 {
        let follower = 10 + 4 * k;
        let f = [1.0 + 0.05 * k as f64, 0.5 + 0.02 * k as f64];
        profiles.insert(follower, f.to_vec());
        profiles.insert(follower + 1, vec![f[0] * (1.0 + 1e-9), f[1] * (1.0 + 1e-9)]);
        profiles.insert(follower + 2, unit_tss_partner(&f, 1.0));
        profiles.insert(follower + 3, unit_tss_partner(&f, -1.0));
        for j in 1..=3 {
            pairs.push((follower + j, follower));
        }
    }
    let g = InfluenceGraph::from_pairs(profiles.keys().copied(), &pairs).unwrap();
    let sims: Vec<f64> = (1..=3).map(|j| tss_value(&profiles[&10], &profiles[&(10 + j)])).collect();
    let (_, summary) = authenticity(&g, &profiles, 0.8, AdMode::Mean).unwrap();
    verdict(
        "7b",
        summary.eligible > 0 && summary.extreme_fraction >= 0.95,
        format!(
            "{}/{} eligible followers extreme at alpha 0.8 (fraction {:.4}); raw TSS for one follower {:?}",
            summary.extreme, summary.eligible, summary.extreme_fraction, sims
        ),
    );
}

fn column(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    v.iter().map(|x| (x - mean) / sd).collect()
}

fn design(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..d).map(|_| column(rng, n)).collect();
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

#[test]
fn c08_elastic_net() {
    let mut rng = ChaCha8Rng::seed_from_u64(2008);
    let x = design(&mut rng, 300, 5);
    let y: Vec<f64> = x
        .iter()
        .map(|r| 0.7 + 1.5 * r[0] - 2.0 * r[1] + 0.3 * r[3] + 0.5 * gauss(&mut rng))
        .collect();
    let fit = elastic_net_fit(&x, &y, 0.0, 0.5).unwrap();
    let (b0, beta) = ols(&x, &y);
    let ols_gap = beta
        .iter()
        .zip(&fit.coefficients)
        .map(|(a, b)| (a - b).abs())
        .fold((b0 - fit.intercept).abs(), f64::max);

    let mut monotone = true;
    for (lambda, alpha) in [(0.0, 0.5), (1.0, 0.5), (10.0, 1.0), (50.0, 0.0), (200.0, 0.3)] {
        let f = elastic_net_fit(&x, &y, lambda, alpha).unwrap();
        monotone &= f.objective_history.windows(2).all(|w| w[1] <= w[0]);
    }

    let xp = design(&mut rng, 200, 5);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let yp: Vec<f64> = xp.iter().map(|r| 2.0 * r[0] + noise.sample(&mut rng)).collect();
    let planted = elastic_net_fit(&xp, &yp, 0.01, 0.5).unwrap();
    let b1 = planted.coefficients[0];
    let others = planted.coefficients[1..].iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let recovered = (1.8..=2.0).contains(&b1) && others < 0.05;
    verdict(
        "8",
        ols_gap <= 1e-6 && monotone && recovered,
        format!("OLS gap {ols_gap:.2e}, monotone {monotone}, planted beta1 {b1:.6}, max other |beta| {others:.2e}"),
    );
}

#[test]
fn c09_forest_separable() {
    let mut rng = ChaCha8Rng::seed_from_u64(2009);
    let rows: Vec<(Vec<f64>, usize)> = (0..400)
        .map(|i| {
            let class = i % 2;
            let signal = if class == 1 { rng.gen_range(0.1..1.0) } else { rng.gen_range(-1.0..-0.1) };
            let mut row = vec![signal];
            row.extend((0..4).map(|_| rng.gen_range(-1.0..1.0)));
            (row, class)
        })
        .collect();
    let split = rank_order_split(&rows, 2);
    let cfg = ForestConfig { seed: 9, ..ForestConfig::default() };
    let model = forest_train(&split, 2, &cfg).unwrap();
    let correct = split.test_x.iter().zip(&split.test_y).filter(|(r, &c)| model.predict(r) == c).count();
    let acc = correct as f64 / split.test_y.len() as f64;
    let imp = &model.feature_importances;
    let sum: f64 = imp.iter().sum();
    verdict(
        "9",
        acc >= 0.95 && imp[0] > 0.8 && (sum - 1.0).abs() <= 1e-9,
        format!("test accuracy {acc:.4} on {} rows, informative importance {:.4}, sum {sum:.12}", split.test_y.len(), imp[0]),
    );
}

#[test]
fn c10_pipeline_deterministic_across_threads() {
    std::env::set_var("SOURCE_DATE_EPOCH", "1700000000");
    let dir = tempfile::tempdir().unwrap();
    let (influence, songs) = write_fixture(dir.path(), 2010, 80);
    let mut cfg = ProjectConfig::default();
    cfg.seed = 10;
    cfg.paths.influence = influence;
    cfg.paths.songs = songs;
    cfg.paths.out = dir.path().join("out");
    cfg.sampling.samples_per_run = 300;
    cfg.sampling.runs = 5;
    cfg.forest.trees = 30;
    let opts = RunOptions { similarity_matrix: true, ..Default::default() };
    let run_all = || {
        for stage in Stage::ALL {
            pipeline::run(&cfg, stage, &opts).unwrap();
        }
        snapshot(&cfg.paths.out)
    };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(rayon::current_num_threads().max(4)).build().unwrap();
    let runs = [
        single.install(run_all),
        single.install(run_all),
        wide.install(run_all),
        wide.install(run_all),
    ];
    let files = runs[0].len();
    let base = &runs[0];
    let differing: BTreeSet<&String> = runs[1..]
        .iter()
        .flat_map(|r| base.keys().filter(move |k| r.get(*k) != base.get(*k)))
        .collect();
    let same_sets = runs.iter().all(|r| r.keys().eq(runs[0].keys()));
    verdict(
        "10",
        same_sets && differing.is_empty() && files > 0,
        format!("{files} files over {} stages, 4 runs (1 thread x2, {} threads x2), differing {differing:?}", Stage::ALL.len(), wide.current_num_threads()),
    );
}
