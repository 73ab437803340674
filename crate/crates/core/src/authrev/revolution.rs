use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::centrality::CentralityScores;
use crate::error::{Error, Result};
use crate::graph::InfluenceGraph;
use crate::scalar::Scalar;

pub const DEFAULT_PERIPHERY_THRESHOLD: f64 = 0.5;
pub const NON_MAJOR_FRACTION: f64 = 0.1;
pub const MAJOR_FRACTION: f64 = 0.2;

/// Share of the node's out-edges that land in a different genre.
pub fn periphery_score(g: &InfluenceGraph, node: u64) -> Result<f64> {
    let i = g.idx(node)?;
    let own = &g.nodes()[i].genre;
    let out = g.out_neighbors(i);
    if out.is_empty() {
        return Ok(0.0);
    }
    let cross = out.iter().filter(|&&j| &g.nodes()[j].genre != own).count();
    Ok(cross as f64 / out.len() as f64)
}

/// Lowercases and collapses every whitespace run to one space.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Ids whose bio contains any indicator phrase, compared after normalization.
pub fn semantic_match(corpus: &[String], bios: &BTreeMap<u64, String>) -> Result<BTreeSet<u64>> {
    let phrases: Vec<String> = corpus.iter().map(|p| normalize_text(p)).filter(|p| !p.is_empty()).collect();
    if phrases.is_empty() {
        return Err(Error::InvalidArgument("indicator phrase corpus is empty".into()));
    }
    Ok(bios
        .iter()
        .filter(|(_, text)| {
            let t = normalize_text(text);
            phrases.iter().any(|p| t.contains(p.as_str()))
        })
        .map(|(&id, _)| id)
        .collect())
}

/// One phrase per non-blank line.
pub fn load_corpus(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BioSet {
    pub bios: BTreeMap<u64, String>,
    pub missing: Vec<u64>,
}

/// Reads `<id>.txt` from `dir` for each requested id.
pub fn load_bios(dir: &Path, ids: impl IntoIterator<Item = u64>) -> Result<BioSet> {
    let mut set = BioSet::default();
    for id in ids {
        let path = dir.join(format!("{id}.txt"));
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                set.bios.insert(id, text);
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => set.missing.push(id),
            Err(e) => return Err(Error::io(&path, e)),
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevolutionClass {
    Major,
    NonMajor,
    Unlabeled,
}

impl RevolutionClass {
    pub fn name(self) -> &'static str {
        match self {
            RevolutionClass::Major => "major",
            RevolutionClass::NonMajor => "non_major",
            RevolutionClass::Unlabeled => "unlabeled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    RankBottomDecile,
    Periphery,
    Keyword,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevolutionLabel {
    pub node_id: u64,
    /// 0-based position in the (NI desc, id asc) order.
    pub position: usize,
    pub label: RevolutionClass,
    pub evidence: BTreeSet<Evidence>,
    pub periphery: f64,
    pub keyword: bool,
}

/// Bottom `ceil(10%)` by NI are non-major; of the top `ceil(20%)`, those with
/// periphery at or above the threshold or a keyword hit are major.
pub fn label_revolutionaries<T: Scalar>(
    g: &InfluenceGraph,
    scores: &[CentralityScores<T>],
    periphery_threshold: f64,
    keywords: &BTreeSet<u64>,
) -> Result<Vec<RevolutionLabel>> {
    let n = scores.len();
    if n < 10 {
        return Err(Error::Insufficient(format!("revolution labeling needs at least 10 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&periphery_threshold) {
        return Err(Error::InvalidArgument("periphery threshold must lie in [0, 1]".into()));
    }
    let mut order: Vec<&CentralityScores<T>> = scores.iter().collect();
    order.sort_by(|a, b| {
        b.ni
            .partial_cmp(&a.ni)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.node_id.cmp(&b.node_id))
    });
    let bottom = (n as f64 * NON_MAJOR_FRACTION).ceil() as usize;
    let top = (n as f64 * MAJOR_FRACTION).ceil() as usize;
    order
        .iter()
        .enumerate()
        .map(|(pos, s)| {
            let periphery = periphery_score(g, s.node_id)?;
            let keyword = keywords.contains(&s.node_id);
            let mut evidence = BTreeSet::new();
            let label = if pos >= n - bottom {
                evidence.insert(Evidence::RankBottomDecile);
                RevolutionClass::NonMajor
            } else if pos < top {
                if periphery >= periphery_threshold {
                    evidence.insert(Evidence::Periphery);
                }
                if keyword {
                    evidence.insert(Evidence::Keyword);
                }
                if evidence.is_empty() {
                    RevolutionClass::Unlabeled
                } else {
                    RevolutionClass::Major
                }
            } else {
                RevolutionClass::Unlabeled
            };
            Ok(RevolutionLabel {
                node_id: s.node_id,
                position: pos,
                label,
                evidence,
                periphery,
                keyword,
            })
        })
        .collect()
}

pub fn write_labels_csv<W: Write>(w: W, labels: &[RevolutionLabel]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    wtr.write_record(["node_id", "position", "label", "evidence", "periphery", "keyword"])
        .map_err(err)?;
    for l in labels {
        let evidence: Vec<&str> = l
            .evidence
            .iter()
            .map(|e| match e {
                Evidence::RankBottomDecile => "rank_bottom_decile",
                Evidence::Periphery => "periphery",
                Evidence::Keyword => "keyword",
            })
            .collect();
        wtr.write_record([
            l.node_id.to_string(),
            l.position.to_string(),
            l.label.name().to_string(),
            evidence.join(";"),
            l.periphery.to_string(),
            l.keyword.to_string(),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<labels writer>", e))
}
