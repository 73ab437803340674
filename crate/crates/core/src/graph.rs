//! Weighted directed influence network.
//!
//! Nodes are artists, edges run influencer → follower. Edge weights come from
//! the difference in active-start years, Max-Min normalized after discarding
//! implausible gaps.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::centrality::CentralityScores;
use crate::error::{Error, Result};
use crate::ingest::RawInfluenceRow;
use crate::scalar::{pearson, Scalar};

/// Year differences at or below this are discarded; it is also the lower
/// anchor of the weight normalization so every kept weight is positive.
pub const YEAR_DIFF_FLOOR: i32 = -30;
/// Year differences at or above this are discarded.
pub const YEAR_DIFF_CEIL: i32 = 80;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtistNode {
    pub id: u64,
    pub name: String,
    pub genre: String,
    pub active_start: i32,
}

impl ArtistNode {
    pub fn bare(id: u64) -> Self {
        ArtistNode {
            id,
            name: String::new(),
            genre: String::new(),
            active_start: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEdge {
    pub from: u64,
    pub to: u64,
    /// `follower.active_start - influencer.active_start`
    pub year_diff: i32,
    pub weight: f64,
}

impl InfluenceEdge {
    fn order_key(&self) -> (f64, u64, u64) {
        (self.weight, self.from, self.to)
    }
}

/// Immutable directed graph with CSR-style out-adjacency and an in-adjacency
/// index. Nodes are kept sorted by id and edges by `(from, to)`, so node
/// indices and neighbor lists follow id order.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGraph {
    nodes: Vec<ArtistNode>,
    index: HashMap<u64, usize>,
    edges: Vec<InfluenceEdge>,
    edge_start: Vec<usize>,
    out_adj: Vec<usize>,
    in_adj: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub rows: usize,
    pub self_loops_dropped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizeReport {
    pub edges_in: usize,
    pub edges_removed: usize,
    pub year_diff_max: i32,
}

impl InfluenceGraph {
    /// Assembles a graph, validating node uniqueness, endpoint existence, the
    /// absence of self-loops and duplicate pairs.
    pub fn from_parts(mut nodes: Vec<ArtistNode>, mut edges: Vec<InfluenceEdge>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate node id {}", n.id)));
            }
        }
        edges.sort_by_key(|e| (e.from, e.to));
        for w in edges.windows(2) {
            if (w[0].from, w[0].to) == (w[1].from, w[1].to) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge {} -> {}",
                    w[0].from, w[0].to
                )));
            }
        }
        let n = nodes.len();
        let mut edge_start = vec![0usize; n + 1];
        let mut out_adj = Vec::with_capacity(edges.len());
        let mut in_adj = vec![Vec::new(); n];
        for e in &edges {
            if e.from == e.to {
                return Err(Error::InvalidArgument(format!("self-loop on {}", e.from)));
            }
            let u = *index.get(&e.from).ok_or(Error::UnknownNode(e.from))?;
            let v = *index.get(&e.to).ok_or(Error::UnknownNode(e.to))?;
            edge_start[u + 1] += 1;
            out_adj.push(v);
            in_adj[v].push(u);
        }
        for i in 0..n {
            edge_start[i + 1] += edge_start[i];
        }
        Ok(InfluenceGraph {
            nodes,
            index,
            edges,
            edge_start,
            out_adj,
            in_adj,
        })
    }

    /// Convenience constructor for bare topologies (unit weights, zero year gaps).
    pub fn from_pairs(node_ids: impl IntoIterator<Item = u64>, pairs: &[(u64, u64)]) -> Result<Self> {
        let mut ids: Vec<u64> = node_ids.into_iter().collect();
        ids.extend(pairs.iter().flat_map(|&(a, b)| [a, b]));
        ids.sort_unstable();
        ids.dedup();
        let nodes = ids.into_iter().map(ArtistNode::bare).collect();
        let edges = pairs
            .iter()
            .map(|&(from, to)| InfluenceEdge {
                from,
                to,
                year_diff: 0,
                weight: 1.0,
            })
            .collect();
        Self::from_parts(nodes, edges)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[ArtistNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[InfluenceEdge] {
        &self.edges
    }

    pub fn node(&self, id: u64) -> Result<&ArtistNode> {
        Ok(&self.nodes[self.idx(id)?])
    }

    pub fn contains(&self, id: u64) -> bool {
        self.index.contains_key(&id)
    }

    pub fn idx(&self, id: u64) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub fn id_at(&self, i: usize) -> u64 {
        self.nodes[i].id
    }

    /// Out-neighbor indices of node index `i`, ascending.
    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_adj[self.edge_start[i]..self.edge_start[i + 1]]
    }

    /// Out-edges of node index `i`, parallel to [`Self::out_neighbors`].
    pub fn out_edges(&self, i: usize) -> &[InfluenceEdge] {
        &self.edges[self.edge_start[i]..self.edge_start[i + 1]]
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_adj[i]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.edge_start[i + 1] - self.edge_start[i]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_adj[i].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out_neighbors(u).binary_search(&v).is_ok()
    }

    pub fn genres(&self) -> Vec<String> {
        let mut g: Vec<String> = self.nodes.iter().map(|n| n.genre.clone()).collect();
        g.sort();
        g.dedup();
        g
    }

    /// Subgraph induced on the nodes accepted by `keep`.
    pub fn induced_subgraph(&self, mut keep: impl FnMut(&ArtistNode) -> bool) -> InfluenceGraph {
        let nodes: Vec<ArtistNode> = self.nodes.iter().filter(|n| keep(n)).cloned().collect();
        let ids: HashSet<u64> = nodes.iter().map(|n| n.id).collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| ids.contains(&e.from) && ids.contains(&e.to))
            .cloned()
            .collect();
        InfluenceGraph::from_parts(nodes, edges).expect("subgraph of a valid graph is valid")
    }

    fn without_edges(&self, removed: &HashSet<(u64, u64)>) -> InfluenceGraph {
        let edges = self
            .edges
            .iter()
            .filter(|e| !removed.contains(&(e.from, e.to)))
            .cloned()
            .collect();
        InfluenceGraph::from_parts(self.nodes.clone(), edges).expect("edge removal keeps validity")
    }

    /// Hop distances from node index `src` along out-edges; `None` when unreachable.
    pub fn bfs_distances(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &v in self.out_neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Kahn-style peeling; `None` if a cycle remains.
    pub fn topological_order(&self) -> Option<Vec<u64>> {
        let n = self.node_count();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.in_degree(i)).collect();
        let mut ready: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = ready.pop_front() {
            order.push(self.id_at(u));
            for &v in self.out_neighbors(u) {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.push_back(v);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Strongly connected components (Tarjan, iterative), as node-index lists.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        const UNSEEN: usize = usize::MAX;
        let n = self.node_count();
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comps = Vec::new();
        let mut next = 0usize;
        // (node, position in its out-neighbor list)
        let mut call: Vec<(usize, usize)> = Vec::new();

        for root in 0..n {
            if index[root] != UNSEEN {
                continue;
            }
            call.push((root, 0));
            while let Some(&mut (u, ref mut pos)) = call.last_mut() {
                if *pos == 0 && index[u] == UNSEEN {
                    index[u] = next;
                    low[u] = next;
                    next += 1;
                    stack.push(u);
                    on_stack[u] = true;
                }
                let nbrs = self.out_neighbors(u);
                if *pos < nbrs.len() {
                    let v = nbrs[*pos];
                    *pos += 1;
                    if index[v] == UNSEEN {
                        call.push((v, 0));
                    } else if on_stack[v] {
                        low[u] = low[u].min(index[v]);
                    }
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[u]);
                }
                if low[u] == index[u] {
                    let mut comp = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp.push(w);
                        if w == u {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
        comps
    }
}

/// One node per distinct artist id and one influencer → follower edge per row.
/// Self-influence rows are dropped and counted. Edge weights are left at 0
/// until [`normalize_weights`].
pub fn build_graph(rows: &[RawInfluenceRow]) -> Result<(InfluenceGraph, BuildReport)> {
    let mut nodes: BTreeMap<u64, ArtistNode> = BTreeMap::new();
    let mut edges = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    let mut report = BuildReport {
        rows: rows.len(),
        ..Default::default()
    };
    for r in rows {
        nodes.entry(r.influencer_id).or_insert_with(|| ArtistNode {
            id: r.influencer_id,
            name: r.influencer_name.clone(),
            genre: r.influencer_main_genre.clone(),
            active_start: r.influencer_active_start,
        });
        nodes.entry(r.follower_id).or_insert_with(|| ArtistNode {
            id: r.follower_id,
            name: r.follower_name.clone(),
            genre: r.follower_main_genre.clone(),
            active_start: r.follower_active_start,
        });
        if r.influencer_id == r.follower_id {
            report.self_loops_dropped += 1;
            continue;
        }
        if !seen.insert((r.influencer_id, r.follower_id)) {
            continue;
        }
        edges.push(InfluenceEdge {
            from: r.influencer_id,
            to: r.follower_id,
            year_diff: r.follower_active_start - r.influencer_active_start,
            weight: 0.0,
        });
    }
    let g = InfluenceGraph::from_parts(nodes.into_values().collect(), edges)?;
    Ok((g, report))
}

/// Drops edges with `year_diff <= -30` or `>= 80` and sets
/// `weight = (x + 30) / (x_max + 30)` with `x_max` the largest kept gap.
pub fn normalize_weights(g: &InfluenceGraph) -> Result<(InfluenceGraph, NormalizeReport)> {
    let kept: Vec<InfluenceEdge> = g
        .edges
        .iter()
        .filter(|e| e.year_diff > YEAR_DIFF_FLOOR && e.year_diff < YEAR_DIFF_CEIL)
        .cloned()
        .collect();
    let x_max = kept
        .iter()
        .map(|e| e.year_diff)
        .max()
        .ok_or_else(|| Error::Insufficient("no edges left after year-difference filtering".into()))?;
    let denom = f64::from(x_max - YEAR_DIFF_FLOOR);
    let edges: Vec<InfluenceEdge> = kept
        .into_iter()
        .map(|mut e| {
            e.weight = f64::from(e.year_diff - YEAR_DIFF_FLOOR) / denom;
            e
        })
        .collect();
    let report = NormalizeReport {
        edges_in: g.edge_count(),
        edges_removed: g.edge_count() - edges.len(),
        year_diff_max: x_max,
    };
    Ok((InfluenceGraph::from_parts(g.nodes.clone(), edges)?, report))
}

/// Breaks every directed cycle. Each round finds the nontrivial strongly
/// connected components and removes, inside each, the internal edge with the
/// smallest `(weight, from, to)`; rounds repeat until the graph is acyclic.
pub fn remove_cycles(g: &InfluenceGraph) -> (InfluenceGraph, Vec<InfluenceEdge>) {
    let mut current = g.clone();
    let mut removed = Vec::new();
    loop {
        let mut comp_of = vec![usize::MAX; current.node_count()];
        let comps: Vec<Vec<usize>> = current
            .strongly_connected_components()
            .into_iter()
            .filter(|c| c.len() > 1)
            .collect();
        if comps.is_empty() {
            break;
        }
        for (ci, c) in comps.iter().enumerate() {
            for &u in c {
                comp_of[u] = ci;
            }
        }
        let mut cut: Vec<Option<&InfluenceEdge>> = vec![None; comps.len()];
        for u in 0..current.node_count() {
            let cu = comp_of[u];
            if cu == usize::MAX {
                continue;
            }
            for (e, &v) in current.out_edges(u).iter().zip(current.out_neighbors(u)) {
                if comp_of[v] != cu {
                    continue;
                }
                let better = match cut[cu] {
                    None => true,
                    Some(best) => {
                        let (a, b) = (e.order_key(), best.order_key());
                        a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))).is_lt()
                    }
                };
                if better {
                    cut[cu] = Some(e);
                }
            }
        }
        let round: Vec<InfluenceEdge> = cut.into_iter().flatten().cloned().collect();
        let keys: HashSet<(u64, u64)> = round.iter().map(|e| (e.from, e.to)).collect();
        current = current.without_edges(&keys);
        removed.extend(round);
    }
    removed.sort_by_key(|e| (e.from, e.to));
    (current, removed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reach {
    pub first_order: usize,
    pub second_order: usize,
    pub total: usize,
}

pub fn reachability_counts(g: &InfluenceGraph, node: u64) -> Result<Reach> {
    let i = g.idx(node)?;
    let first: HashSet<usize> = g.out_neighbors(i).iter().copied().collect();
    let second: HashSet<usize> = first
        .iter()
        .flat_map(|&u| g.out_neighbors(u).iter().copied())
        .filter(|v| *v != i && !first.contains(v))
        .collect();
    let total = g.bfs_distances(i).iter().filter(|d| d.is_some()).count() - 1;
    Ok(Reach {
        first_order: first.len(),
        second_order: second.len(),
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// Each node's mean incident-edge year difference against its scores.
    #[default]
    PerNode,
    /// Each edge's year difference against the influencer's scores.
    PerEdge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix<T> {
    pub labels: Vec<String>,
    pub r: Vec<Vec<T>>,
    pub degenerate: Vec<Vec<bool>>,
    pub samples: usize,
}

impl<T: Scalar> CorrelationMatrix<T> {
    /// Correlation between the year difference and the named score column.
    pub fn year_diff_vs(&self, label: &str) -> Option<T> {
        let j = self.labels.iter().position(|l| l == label)?;
        Some(self.r[0][j])
    }
}

/// Pearson correlation among year difference and the LC, SC, GC, NI scores.
pub fn year_diff_centrality_correlation<T: Scalar>(
    g: &InfluenceGraph,
    scores: &[CentralityScores<T>],
    mode: CorrelationMode,
) -> Result<CorrelationMatrix<T>> {
    if g.node_count() < 3 {
        return Err(Error::Insufficient("correlation needs at least 3 nodes".into()));
    }
    let by_id: HashMap<u64, &CentralityScores<T>> = scores.iter().map(|s| (s.node_id, s)).collect();
    let mut cols: [Vec<T>; 5] = Default::default();
    let mut push = |yd: T, s: &CentralityScores<T>| {
        for (c, v) in cols.iter_mut().zip([yd, s.lc, s.sc, s.gc, s.ni]) {
            c.push(v);
        }
    };
    match mode {
        CorrelationMode::PerNode => {
            let mut sum = vec![0i64; g.node_count()];
            let mut cnt = vec![0usize; g.node_count()];
            for e in g.edges() {
                for id in [e.from, e.to] {
                    let i = g.idx(id)?;
                    sum[i] += i64::from(e.year_diff);
                    cnt[i] += 1;
                }
            }
            for (i, n) in g.nodes().iter().enumerate() {
                if cnt[i] == 0 {
                    continue;
                }
                let s = by_id.get(&n.id).ok_or(Error::UnknownNode(n.id))?;
                push(T::lit(sum[i] as f64) / T::from_count(cnt[i]), s);
            }
        }
        CorrelationMode::PerEdge => {
            for e in g.edges() {
                let s = by_id.get(&e.from).ok_or(Error::UnknownNode(e.from))?;
                push(T::lit(f64::from(e.year_diff)), s);
            }
        }
    }
    let samples = cols[0].len();
    if samples < 3 {
        return Err(Error::Insufficient("fewer than 3 correlation samples".into()));
    }
    let mut r = vec![vec![T::zero(); 5]; 5];
    let mut degenerate = vec![vec![false; 5]; 5];
    for a in 0..5 {
        for b in 0..5 {
            let c = pearson(&cols[a], &cols[b]);
            r[a][b] = c.r;
            degenerate[a][b] = c.degenerate;
        }
    }
    Ok(CorrelationMatrix {
        labels: ["year_diff", "lc", "sc", "gc", "ni"].map(String::from).to_vec(),
        r,
        degenerate,
        samples,
    })
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Row {
        line,
        message: e.to_string(),
    }
}

pub fn write_nodes_csv<W: Write>(w: W, g: &InfluenceGraph) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["id", "name", "genre", "active_start"]).map_err(csv_err)?;
    for n in g.nodes() {
        wtr.write_record([n.id.to_string(), n.name.clone(), n.genre.clone(), n.active_start.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<node writer>", e))
}

pub fn write_edges_csv<'a, W: Write>(w: W, edges: impl IntoIterator<Item = &'a InfluenceEdge>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["from", "to", "year_diff", "weight"]).map_err(csv_err)?;
    for e in edges {
        wtr.write_record([e.from.to_string(), e.to.to_string(), e.year_diff.to_string(), e.weight.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<edge writer>", e))
}

pub fn read_nodes_csv<R: Read>(r: R) -> Result<Vec<ArtistNode>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

pub fn read_edges_csv<R: Read>(r: R) -> Result<Vec<InfluenceEdge>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering, nodes and edges in id order.
pub fn to_dot(g: &InfluenceGraph) -> String {
    let mut out = String::from("digraph influence {\n");
    for n in g.nodes() {
        let _ = writeln!(
            out,
            "  {} [label=\"{}\", genre=\"{}\", active_start={}];",
            n.id,
            dot_escape(&n.name),
            dot_escape(&n.genre),
            n.active_start
        );
    }
    for e in g.edges() {
        let _ = writeln!(
            out,
            "  {} -> {} [weight={}, year_diff={}];",
            e.from, e.to, e.weight, e.year_diff
        );
    }
    out.push_str("}\n");
    out
}
