use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::centrality::CentralityScores;
use crate::error::{Error, Result};
use crate::graph::{reachability_counts, InfluenceGraph};

fn csv_err(e: csv::Error) -> Error {
    Error::Row {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub node_id: u64,
    pub name: String,
    pub genre: String,
    pub lc: f64,
    pub sc: f64,
    pub gc: f64,
    pub ni: f64,
    pub rank_ni: usize,
    pub first_order: usize,
    pub second_order: usize,
    pub total_reach: usize,
}

impl ScoreRow {
    pub fn scores(&self) -> CentralityScores<f64> {
        CentralityScores {
            node_id: self.node_id,
            lc: self.lc,
            sc: self.sc,
            gc: self.gc,
            ni: self.ni,
            rank_ni: self.rank_ni,
        }
    }
}

/// Rows in the order of `scores`, joined with node metadata and reach.
pub fn score_rows(g: &InfluenceGraph, scores: &[CentralityScores<f64>]) -> Result<Vec<ScoreRow>> {
    scores
        .iter()
        .map(|s| {
            let node = g.node(s.node_id)?;
            let reach = reachability_counts(g, s.node_id)?;
            Ok(ScoreRow {
                node_id: s.node_id,
                name: node.name.clone(),
                genre: node.genre.clone(),
                lc: s.lc,
                sc: s.sc,
                gc: s.gc,
                ni: s.ni,
                rank_ni: s.rank_ni,
                first_order: reach.first_order,
                second_order: reach.second_order,
                total_reach: reach.total,
            })
        })
        .collect()
}

pub fn write_scores<W: Write>(w: W, rows: &[ScoreRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<scores writer>", e))
}

pub fn read_scores<R: Read>(r: R) -> Result<Vec<ScoreRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(csv_err))
        .collect()
}

/// `id` column followed by one named column per vector entry.
pub fn write_vectors<W: Write>(w: W, columns: &[String], rows: &BTreeMap<u64, Vec<f64>>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string()];
    header.extend(columns.iter().cloned());
    wtr.write_record(&header).map_err(csv_err)?;
    for (id, v) in rows {
        if v.len() != columns.len() {
            return Err(Error::Dimension { expected: columns.len(), got: v.len() });
        }
        let mut rec = vec![id.to_string()];
        rec.extend(v.iter().map(f64::to_string));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<vector writer>", e))
}

pub fn read_vectors<R: Read>(r: R) -> Result<(Vec<String>, BTreeMap<u64, Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("id") {
        return Err(Error::Schema("vector table must start with an `id` column".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut rows = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| Error::Row { line, message: format!("cannot parse {what}") };
        let id: u64 = rec.get(0).unwrap_or("").parse().map_err(|_| bad("id"))?;
        let v = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| bad("value")))
            .collect::<Result<Vec<_>>>()?;
        rows.insert(id, v);
    }
    Ok((columns, rows))
}

/// Long-format table with a header and stringly rows.
pub fn write_long<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header).map_err(csv_err)?;
    for r in rows {
        wtr.write_record(&r).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<table writer>", e))
}
