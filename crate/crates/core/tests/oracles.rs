mod common;

use std::collections::{BTreeMap, HashMap};

use common::{random_pairs, rel_close, Oracle};
use musnet::centrality::{cluster_rank, node_influence, out_closeness, semi_local, DistanceMode};
use musnet::genre::{self, run_rng, InfluenceSampling, SampleSide, SamplingConfig};
use musnet::graph::{remove_cycles, ArtistNode, InfluenceEdge, InfluenceGraph};
use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn oracle_for(g: &InfluenceGraph) -> Oracle {
    let edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .map(|e| (g.idx(e.from).unwrap(), g.idx(e.to).unwrap()))
        .collect();
    Oracle::new(g.node_count(), &edges)
}

#[test]
fn centrality_matches_floyd_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..60 {
        let n = rng.gen_range(2..=10);
        let p = rng.gen_range(0.05..0.6);
        let g = InfluenceGraph::from_pairs(1..=n as u64, &random_pairs(&mut rng, n, p)).unwrap();
        let o = oracle_for(&g);
        for i in 0..n {
            let id = g.id_at(i);
            assert!(rel_close(cluster_rank::<f64>(&g, id).unwrap(), o.lc(i), 1e-12));
            assert!(rel_close(semi_local::<f64>(&g, id).unwrap(), o.sc(i), 1e-12));
            assert!(rel_close(out_closeness::<f64>(&g, id, DistanceMode::Hops).unwrap(), o.gc(i), 1e-12));
        }
        for s in node_influence::<f64>(&g).unwrap() {
            assert!(rel_close(s.ni, o.ni(g.idx(s.node_id).unwrap()), 1e-12));
        }
    }
}

#[test]
fn star_and_chain_by_hand() {
    // hub 1 -> 2, 3, 4 ; chain 2 -> 5
    let g = InfluenceGraph::from_pairs(1..=5, &[(1, 2), (1, 3), (1, 4), (2, 5)]).unwrap();
    let o = oracle_for(&g);
    // out-degrees of 2, 3, 4 are 1, 0, 0
    assert_eq!(o.lc(0), 4.0);
    assert_eq!(cluster_rank::<f64>(&g, 1).unwrap(), 4.0);
    // reach 4 nodes at distances 1, 1, 1, 2
    assert_eq!(out_closeness::<f64>(&g, 1, DistanceMode::Hops).unwrap(), 1.0 / 5.0);
}

fn weighted(rng: &mut ChaCha8Rng, n: usize, p: f64) -> InfluenceGraph {
    let nodes = (1..=n as u64).map(ArtistNode::bare).collect();
    let edges = random_pairs(rng, n, p)
        .into_iter()
        .map(|(from, to)| InfluenceEdge { from, to, year_diff: 0, weight: rng.gen_range(0.01..1.0) })
        .collect();
    InfluenceGraph::from_parts(nodes, edges).unwrap()
}

#[test]
fn cycle_removal_against_petgraph() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let n = rng.gen_range(2..=15);
        let p = rng.gen_range(0.1..0.5);
        let g = weighted(&mut rng, n, p);
        let (dag, removed) = remove_cycles(&g);

        let mut pg = DiGraph::<u64, ()>::new();
        let ix: HashMap<u64, _> = g.nodes().iter().map(|n| (n.id, pg.add_node(n.id))).collect();
        for e in g.edges() {
            pg.add_edge(ix[&e.from], ix[&e.to], ());
        }
        let mut comp = HashMap::new();
        for (c, scc) in tarjan_scc(&pg).into_iter().enumerate() {
            if scc.len() > 1 {
                for v in scc {
                    comp.insert(pg[v], c);
                }
            }
        }
        for e in &removed {
            assert!(comp.contains_key(&e.from) && comp.get(&e.from) == comp.get(&e.to));
        }

        let mut out = DiGraph::<u64, ()>::new();
        let ox: HashMap<u64, _> = dag.nodes().iter().map(|n| (n.id, out.add_node(n.id))).collect();
        for e in dag.edges() {
            out.add_edge(ox[&e.from], ox[&e.to], ());
        }
        assert!(toposort(&out, None).is_ok());
        assert_eq!(dag.edge_count() + removed.len(), g.edge_count());
    }
}

#[test]
fn influence_sampling_replays() {
    let genres = ["A", "A", "B", "B", "C", "A", "C", "B", "A", "C"];
    let nodes: Vec<ArtistNode> = (0..10u64)
        .map(|i| ArtistNode { id: i + 1, name: String::new(), genre: genres[i as usize].into(), active_start: 1960 })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let edges: Vec<InfluenceEdge> = random_pairs(&mut rng, 10, 0.25)
        .into_iter()
        .filter(|(a, b)| a < b)
        .map(|(from, to)| InfluenceEdge { from, to, year_diff: 3, weight: 0.4 })
        .collect();
    let g = InfluenceGraph::from_parts(nodes, edges).unwrap();
    let scores = node_influence::<f64>(&g).unwrap();
    let cfg = SamplingConfig { samples_per_run: 300, runs: 6, seed: 99 };
    let report = genre::sample_influence(&g, &scores, &cfg, InfluenceSampling::Connected).unwrap();

    let genre_of: HashMap<u64, &str> = g.nodes().iter().map(|n| (n.id, n.genre.as_str())).collect();
    let rank: HashMap<u64, usize> = scores.iter().map(|s| (s.node_id, s.rank_ni)).collect();
    let mut sorted: Vec<(u64, u64)> = g.edges().iter().map(|e| (e.from, e.to)).collect();
    sorted.sort();
    let (within, between): (Vec<_>, Vec<_>) = sorted.into_iter().partition(|(a, b)| genre_of[a] == genre_of[b]);
    let replay = |edges: &[(u64, u64)], run: usize, side: SampleSide| -> f64 {
        if edges.is_empty() {
            return 0.0;
        }
        let mut r = run_rng(cfg.seed, run, side);
        let mut total = 0.0;
        for _ in 0..cfg.samples_per_run {
            let (a, b) = edges[r.gen_range(0..edges.len())];
            total += 1.0 / (1.0 + rank[&a].abs_diff(rank[&b]) as f64);
        }
        total
    };
    for run in 0..cfg.runs {
        assert_eq!(report.within[run], replay(&within, run, SampleSide::Within));
        assert_eq!(report.between[run], replay(&between, run, SampleSide::Between));
    }
}

#[test]
fn clustering_hand_linkage() {
    let pts = vec![
        ("c".to_string(), vec![10.0f64]),
        ("a".to_string(), vec![0.0]),
        ("b".to_string(), vec![1.0]),
    ];
    let d = genre::cluster_points(&pts, genre::Linkage::Average).unwrap();
    assert_eq!(d.leaves, ["a", "b", "c"]);
    assert_eq!(d.merges[0].distance, 1.0);
    assert_eq!(d.merges[1].distance, 9.5);
}

#[test]
fn genre_matrix_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels = ["A", "B", "C"];
    let nodes: Vec<ArtistNode> = (1..=12u64)
        .map(|i| ArtistNode { id: i, name: String::new(), genre: labels[rng.gen_range(0..3)].into(), active_start: 1950 })
        .collect();
    let edges: Vec<InfluenceEdge> = random_pairs(&mut rng, 12, 0.3)
        .into_iter()
        .map(|(from, to)| InfluenceEdge { from, to, year_diff: 1, weight: 0.5 })
        .collect();
    let g = InfluenceGraph::from_parts(nodes, edges).unwrap();
    let m = genre::genre_influence_matrix(&g, 0.0).unwrap();
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for l in m.cross.iter().chain(&m.self_pairs).chain(&m.pruned) {
        *sums.entry(l.from_genre.as_str()).or_default() += l.weight;
    }
    for s in sums.values() {
        assert!((s - 1.0).abs() < 1e-12);
    }
}
