mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use musnet::authrev::{
    average_distance, elastic_net_fit, forest_fit, label_revolutionaries, minmax_map, AdMode, ForestConfig,
    RevolutionClass,
};
use musnet::centrality::node_influence;
use musnet::genre::{cluster_points, influence_proximity, Linkage};
use musnet::graph::{remove_cycles, ArtistNode, InfluenceEdge, InfluenceGraph};
use musnet::ingest::{format_id_list, parse_id_list};
use musnet::simvec::{fit_pca, ss, tss};
use proptest::prelude::*;

fn vec9() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 9)
}

fn digraph(max_n: usize) -> impl Strategy<Value = (usize, Vec<(u64, u64, f64)>)> {
    (2..=max_n).prop_flat_map(|n| {
        let edge = (1..=n as u64, 1..=n as u64, 0.01f64..1.0);
        (Just(n), prop::collection::vec(edge, 0..(n * n)))
    })
}

fn build(n: usize, raw: &[(u64, u64, f64)], genres: &[&str]) -> InfluenceGraph {
    let mut seen = BTreeSet::new();
    let edges = raw
        .iter()
        .filter(|(a, b, _)| a != b && seen.insert((*a, *b)))
        .map(|&(from, to, weight)| InfluenceEdge { from, to, year_diff: 0, weight })
        .collect();
    let nodes = (1..=n as u64)
        .map(|id| ArtistNode { id, name: String::new(), genre: genres[id as usize % genres.len()].into(), active_start: 1960 })
        .collect();
    InfluenceGraph::from_parts(nodes, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tss_identity_symmetry_nonnegative(a in vec9(), b in vec9()) {
        prop_assert_eq!(tss(&a, &a).unwrap().tss, 0.0);
        let ab = tss(&a, &b).unwrap();
        prop_assert_eq!(ab, tss(&b, &a).unwrap());
        prop_assert!(ab.tss >= 0.0);
        prop_assert!(ab.theta_prime >= 10.0 && ab.theta_prime <= 190.0);
    }

    #[test]
    fn sector_scales_quadratically(a in vec9(), b in vec9(), c in 0.1f64..10.0) {
        let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
        let base = ss(&a, &b).unwrap();
        let scaled = ss(&sa, &sb).unwrap();
        prop_assert!((scaled - c * c * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
    }

    #[test]
    fn cycle_removal_yields_dag((n, raw) in digraph(12)) {
        let g = build(n, &raw, &["x"]);
        let (dag, removed) = remove_cycles(&g);
        prop_assert!(dag.is_acyclic());
        prop_assert_eq!(dag.edge_count() + removed.len(), g.edge_count());
        if g.is_acyclic() {
            prop_assert!(removed.is_empty());
        }
    }

    #[test]
    fn ranks_are_dense_and_ordered((n, raw) in digraph(10)) {
        let g = build(n, &raw, &["x"]);
        let s = node_influence::<f64>(&g).unwrap();
        prop_assert!(s.iter().all(|r| r.ni >= 0.0 && r.lc >= 0.0 && r.sc >= 0.0 && r.gc >= 0.0));
        prop_assert_eq!(s[0].rank_ni, 1);
        for w in s.windows(2) {
            prop_assert!(w[0].ni >= w[1].ni);
            let step = if w[0].ni == w[1].ni { 0 } else { 1 };
            prop_assert_eq!(w[1].rank_ni, w[0].rank_ni + step);
        }
    }

    #[test]
    fn proximity_in_unit_interval(a in 1usize..10_000, b in 1usize..10_000) {
        let ip: f64 = influence_proximity(a, b);
        prop_assert!(ip > 0.0 && ip <= 1.0);
    }

    #[test]
    fn pca_orthonormal(rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 6..30)) {
        let m = fit_pca(&rows, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = m.components[i].iter().zip(&m.components[j]).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() < 1e-9);
            }
        }
        let sum: f64 = m.explained_variance.iter().sum();
        prop_assert!((sum - m.total_variance).abs() <= 1e-9 * (1.0 + m.total_variance));
        prop_assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn dendrogram_structure(points in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 2..9), seed in 0u64..1000) {
        let labeled: Vec<(String, Vec<f64>)> = points.iter().enumerate().map(|(i, p)| (format!("g{i:02}"), p.clone())).collect();
        let d = cluster_points(&labeled, Linkage::Average).unwrap();
        prop_assert_eq!(d.merges.len(), labeled.len() - 1);
        prop_assert!(d.merges.windows(2).all(|w| w[0].distance <= w[1].distance + 1e-12));
        let mut shuffled = labeled.clone();
        let k = shuffled.len();
        shuffled.rotate_left(seed as usize % k);
        shuffled.reverse();
        prop_assert_eq!(cluster_points(&shuffled, Linkage::Average).unwrap(), d);
    }

    #[test]
    fn average_distance_bounded(raw in prop::collection::vec(-100.0f64..100.0, 2..20)) {
        let mapped = minmax_map(&raw);
        let ad = average_distance(&mapped, AdMode::Mean).unwrap();
        prop_assert!((0.0..=1.0).contains(&ad));
    }

    #[test]
    fn objective_descends_and_shrinks(
        rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 12..40),
        noise in prop::collection::vec(-1.0f64..1.0, 40),
        alpha in 0.0f64..=1.0,
    ) {
        let y: Vec<f64> = rows.iter().zip(&noise).map(|(r, e)| 1.5 * r[0] - r[2] + e).collect();
        let mut prev_norm = f64::INFINITY;
        for lambda in [0.0, 0.5, 5.0, 50.0, 500.0] {
            let fit = elastic_net_fit(&rows, &y, lambda, alpha).unwrap();
            prop_assert!(fit.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0)));
            let norm = fit.coefficients.iter().fold(0.0f64, |m, b| m.max(b.abs()));
            prop_assert!(norm <= prev_norm + 1e-6);
            prev_norm = norm;
        }
    }

    #[test]
    fn forest_importances_normalized_and_label_invariant(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 20..60),
        seed in 0u64..100,
    ) {
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[1] > 0.0)).collect();
        prop_assume!(y.contains(&0) && y.contains(&1));
        let cfg = ForestConfig { trees: 8, max_depth: 4, features_per_split: None, seed };
        let m = forest_fit(&rows, &y, 2, &cfg).unwrap();
        let sum: f64 = m.feature_importances.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(m.feature_importances.iter().all(|&v| v >= 0.0));
        let flipped: Vec<usize> = y.iter().map(|c| 1 - c).collect();
        let f = forest_fit(&rows, &flipped, 2, &cfg).unwrap();
        for (a, b) in m.feature_importances.iter().zip(&f.feature_importances) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn labels_partition((n, raw) in digraph(16), threshold in 0.0f64..=1.0) {
        prop_assume!(n >= 10);
        let g = build(n, &raw, &["a", "b", "c"]);
        let scores = node_influence::<f64>(&g).unwrap();
        let kw: BTreeSet<u64> = [1, 2].into_iter().collect();
        let labels = label_revolutionaries(&g, &scores, threshold, &kw).unwrap();
        prop_assert_eq!(labels.len(), n);
        let ids: BTreeSet<u64> = labels.iter().map(|l| l.node_id).collect();
        prop_assert_eq!(ids.len(), n);
        let bottom = (n as f64 * 0.1).ceil() as usize;
        let by_class: HashMap<RevolutionClass, usize> = labels.iter().fold(HashMap::new(), |mut m, l| {
            *m.entry(l.label).or_default() += 1;
            m
        });
        prop_assert_eq!(by_class.get(&RevolutionClass::NonMajor).copied().unwrap_or(0), bottom);
        prop_assert!(by_class.get(&RevolutionClass::Major).copied().unwrap_or(0) <= (n as f64 * 0.2).ceil() as usize);
    }

    #[test]
    fn id_lists_round_trip(ids in prop::collection::vec(any::<u64>(), 0..8)) {
        prop_assert_eq!(parse_id_list(&format_id_list(&ids)).unwrap(), ids);
    }

    #[test]
    fn sampling_reproducible(seed in any::<u64>()) {
        let profiles: BTreeMap<u64, Vec<f64>> = (0..12u64).map(|i| (i, vec![i as f64, (i % 3) as f64])).collect();
        let genres: HashMap<u64, String> = (0..12u64).map(|i| (i, format!("g{}", i % 3))).collect();
        let cfg = musnet::genre::SamplingConfig { samples_per_run: 40, runs: 3, seed };
        let a = musnet::genre::sample_similarity(&profiles, &genres, &cfg).unwrap();
        let b = musnet::genre::sample_similarity(&profiles, &genres, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.within.iter().chain(&a.between).all(|&v| v >= 0.0));
        prop_assert_eq!(a.within.len(), 3);
    }
}
