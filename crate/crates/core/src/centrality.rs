//! Composite node influence: ClusterRank (local), semi-local (spread) and
//! out-closeness (global) centrality, combined as `(e^GC - 1) * LC * SC`.
//!
//! All neighborhoods and distances follow out-edges, i.e. the direction in
//! which influence flows. Out-closeness uses the number of reachable nodes as
//! its correction term, so nodes that reach nothing score zero.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{reachability_counts, InfluenceGraph, Reach};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityScores<T> {
    pub node_id: u64,
    pub lc: T,
    pub sc: T,
    pub gc: T,
    pub ni: T,
    /// Dense rank by descending `ni`; 1 is the most influential.
    pub rank_ni: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Unweighted hop counts.
    #[default]
    Hops,
    /// Shortest paths using the normalized edge weight as length.
    Weighted,
}

/// Composite score from its three components.
#[inline]
pub fn combine<T: Scalar>(lc: T, sc: T, gc: T) -> T {
    gc.exp_m1() * lc * sc
}

/// Directed out-clustering coefficient: the fraction of ordered pairs of
/// distinct out-neighbors `(u, v)` joined by an edge `u -> v`.
pub fn out_clustering<T: Scalar>(g: &InfluenceGraph, i: usize) -> T {
    let nbrs = g.out_neighbors(i);
    let k = nbrs.len();
    if k < 2 {
        return T::zero();
    }
    let links: usize = nbrs
        .iter()
        .map(|&u| nbrs.iter().filter(|&&v| v != u && g.has_edge(u, v)).count())
        .sum();
    T::from_count(links) / T::from_count(k * (k - 1))
}

fn cluster_rank_at<T: Scalar>(g: &InfluenceGraph, i: usize) -> T {
    let spread: usize = g.out_neighbors(i).iter().map(|&j| g.out_degree(j) + 1).sum();
    if spread == 0 {
        return T::zero();
    }
    let c: T = out_clustering(g, i);
    T::lit(10.0).powf(-c) * T::from_count(spread)
}

/// `LC_i = 10^(-c_i) * sum over out-neighbors j of (k_j^out + 1)`.
pub fn cluster_rank<T: Scalar>(g: &InfluenceGraph, node: u64) -> Result<T> {
    Ok(cluster_rank_at(g, g.idx(node)?))
}

/// Number of distinct nodes within two out-hops of `w`, excluding `w`.
fn two_hop_count(g: &InfluenceGraph, w: usize) -> usize {
    let mut seen: HashSet<usize> = g.out_neighbors(w).iter().copied().collect();
    for &u in g.out_neighbors(w) {
        seen.extend(g.out_neighbors(u).iter().copied());
    }
    seen.remove(&w);
    seen.len()
}

fn semi_local_with(g: &InfluenceGraph, i: usize, two_hop: &dyn Fn(usize) -> usize) -> usize {
    g.out_neighbors(i)
        .iter()
        .map(|&u| g.out_neighbors(u).iter().map(|&w| two_hop(w)).sum::<usize>())
        .sum()
}

/// `SC_i = sum_{u in Γ(i)} Q(u)`, `Q(u) = sum_{w in Γ(u)} N(w)`, with `N(w)` the
/// number of nodes at out-distance 1 or 2 from `w`.
pub fn semi_local<T: Scalar>(g: &InfluenceGraph, node: u64) -> Result<T> {
    let i = g.idx(node)?;
    Ok(T::from_count(semi_local_with(g, i, &|w| two_hop_count(g, w))))
}

fn closeness_at<T: Scalar>(g: &InfluenceGraph, i: usize, mode: DistanceMode) -> T {
    let n = g.node_count();
    let (reached, total) = match mode {
        DistanceMode::Hops => {
            let d = g.bfs_distances(i);
            let reached = d.iter().filter(|x| x.is_some()).count() - 1;
            let total: usize = d.iter().flatten().sum();
            (reached, T::from_count(total))
        }
        DistanceMode::Weighted => {
            let d = weighted_distances(g, i);
            let reached = d.iter().filter(|x| x.is_some()).count() - 1;
            let total = d.iter().flatten().fold(0.0, |a, &b| a + b);
            (reached, T::lit(total))
        }
    };
    if reached == 0 || total <= T::zero() {
        return T::zero();
    }
    let share = T::from_count(reached) / T::from_count(n - 1);
    share * share / total
}

/// `GC_i = (A_i / (N - 1))^2 / C_i`, where `A_i` counts the nodes reachable from
/// `i` and `C_i` sums their distances. Zero when nothing is reachable.
pub fn out_closeness<T: Scalar>(g: &InfluenceGraph, node: u64, mode: DistanceMode) -> Result<T> {
    let i = g.idx(node)?;
    if g.node_count() < 2 {
        return Err(Error::Insufficient("out-closeness needs at least 2 nodes".into()));
    }
    Ok(closeness_at(g, i, mode))
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn weighted_distances(g: &InfluenceGraph, src: usize) -> Vec<Option<f64>> {
    let mut dist: Vec<Option<f64>> = vec![None; g.node_count()];
    let mut heap = BinaryHeap::from([Frontier(0.0, src)]);
    dist[src] = Some(0.0);
    while let Some(Frontier(d, u)) = heap.pop() {
        if dist[u].is_some_and(|best| d > best) {
            continue;
        }
        for (e, &v) in g.out_edges(u).iter().zip(g.out_neighbors(u)) {
            let nd = d + e.weight;
            if dist[v].is_none_or(|old| nd < old) {
                dist[v] = Some(nd);
                heap.push(Frontier(nd, v));
            }
        }
    }
    dist
}

/// Scores every node and assigns dense ranks. Rows are returned in rank order,
/// ties on `ni` ordered by ascending node id.
pub fn node_influence<T: Scalar>(g: &InfluenceGraph) -> Result<Vec<CentralityScores<T>>> {
    node_influence_with(g, DistanceMode::Hops)
}

pub fn node_influence_with<T: Scalar>(g: &InfluenceGraph, mode: DistanceMode) -> Result<Vec<CentralityScores<T>>> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::Insufficient("centrality needs at least 2 nodes".into()));
    }
    let two_hop: Vec<usize> = (0..n).into_par_iter().map(|w| two_hop_count(g, w)).collect();
    let rows: Vec<CentralityScores<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let lc = cluster_rank_at::<T>(g, i);
            let sc = T::from_count(semi_local_with(g, i, &|w| two_hop[w]));
            let gc = closeness_at::<T>(g, i, mode);
            CentralityScores {
                node_id: g.id_at(i),
                lc,
                sc,
                gc,
                ni: combine(lc, sc, gc),
                rank_ni: 0,
            }
        })
        .collect();
    Ok(assign_ranks(rows))
}

/// Sorts by descending `ni` (ties by ascending id) and fills `rank_ni` densely.
pub fn assign_ranks<T: Scalar>(mut rows: Vec<CentralityScores<T>>) -> Vec<CentralityScores<T>> {
    rows.sort_by(|a, b| b.ni.partial_cmp(&a.ni).unwrap_or(Ordering::Equal).then(a.node_id.cmp(&b.node_id)));
    let mut rank = 0;
    let mut prev: Option<T> = None;
    for r in &mut rows {
        if prev != Some(r.ni) {
            rank += 1;
            prev = Some(r.ni);
        }
        r.rank_ni = rank;
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedArtist<T> {
    pub scores: CentralityScores<T>,
    pub name: String,
    pub genre: String,
    pub reach: Reach,
}

/// The `k` most influential nodes. With a genre, scores are recomputed from
/// scratch on the subgraph induced by that genre's nodes, and reach counts are
/// taken inside that subnet.
pub fn top_k<T: Scalar>(
    g: &InfluenceGraph,
    scores: &[CentralityScores<T>],
    k: usize,
    genre: Option<&str>,
) -> Result<Vec<RankedArtist<T>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let (sub, sub_scores);
    let (graph, table): (&InfluenceGraph, &[CentralityScores<T>]) = match genre {
        None => (g, scores),
        Some(name) => {
            if !g.nodes().iter().any(|n| n.genre == name) {
                return Err(Error::UnknownGenre(name.to_string()));
            }
            sub = g.induced_subgraph(|n| n.genre == name);
            sub_scores = if sub.node_count() >= 2 {
                node_influence::<T>(&sub)?
            } else {
                assign_ranks(
                    sub.nodes()
                        .iter()
                        .map(|n| CentralityScores {
                            node_id: n.id,
                            lc: T::zero(),
                            sc: T::zero(),
                            gc: T::zero(),
                            ni: T::zero(),
                            rank_ni: 0,
                        })
                        .collect(),
                )
            };
            (&sub, &sub_scores)
        }
    };
    let mut ordered: Vec<&CentralityScores<T>> = table.iter().collect();
    ordered.sort_by(|a, b| a.rank_ni.cmp(&b.rank_ni).then(a.node_id.cmp(&b.node_id)));
    ordered
        .into_iter()
        .take(k)
        .map(|s| {
            let node = graph.node(s.node_id)?;
            Ok(RankedArtist {
                scores: s.clone(),
                name: node.name.clone(),
                genre: node.genre.clone(),
                reach: reachability_counts(graph, s.node_id)?,
            })
        })
        .collect()
}
