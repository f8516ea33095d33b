//! Graph file formats: edge lists, anchor-link TSV, aligned-pair directories.
//!
//! Edge lists are UTF-8 text with one `u v` pair per line (whitespace- or
//! comma-separated); `#` starts a comment line. String ids are densely
//! re-indexed in order of first appearance and the original ids retained as
//! node labels.

use crate::error::{Error, Result};
use crate::graph::{AlignedPair, AnchorKind, AnchorLinkSet, Graph};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Field separator convention for edge lists and anchor files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeListFormat {
    /// Split on any ASCII whitespace (tabs or spaces).
    Tsv,
    /// Split on commas.
    Csv,
}

impl EdgeListFormat {
    fn split(self, line: &str) -> Vec<&str> {
        match self {
            EdgeListFormat::Tsv => line.split_whitespace().collect(),
            EdgeListFormat::Csv => {
                line.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
            }
        }
    }
}

/// Parse an edge list into a symmetrized, deduplicated graph. Returns the
/// graph with original string ids retained as labels.
pub fn parse_edge_list<R: Read>(r: R, format: EdgeListFormat) -> Result<Graph> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let intern = |s: &str, labels: &mut Vec<String>, ids: &mut HashMap<String, usize>| {
        *ids.entry(s.to_string()).or_insert_with(|| {
            labels.push(s.to_string());
            labels.len() - 1
        })
    };
    for (idx, line) in BufReader::new(r).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = format.split(trimmed);
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `u{}v`, found {} fields", sep_name(format), fields.len()),
            });
        }
        let u = intern(fields[0], &mut labels, &mut ids);
        let v = intern(fields[1], &mut labels, &mut ids);
        edges.push((u, v));
    }
    if edges.is_empty() {
        return Err(Error::EmptyGraph("edge list contains no edges".into()));
    }
    Graph::from_edges(labels.len(), &edges)?.with_labels(labels)
}

fn sep_name(f: EdgeListFormat) -> &'static str {
    match f {
        EdgeListFormat::Tsv => "<ws>",
        EdgeListFormat::Csv => ",",
    }
}

pub fn load_edge_list(path: &Path, format: EdgeListFormat) -> Result<Graph> {
    parse_edge_list(std::fs::File::open(path)?, format)
}

/// Sniff the separator from the first non-comment line.
pub fn detect_format(path: &Path) -> Result<EdgeListFormat> {
    let file = std::fs::File::open(path)?;
    for line in BufReader::new(file).lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        return Ok(if trimmed.contains(',') { EdgeListFormat::Csv } else { EdgeListFormat::Tsv });
    }
    Ok(EdgeListFormat::Tsv)
}

/// Write the canonical (u < v) edge list using node labels, one edge per line.
pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    for (u, v) in g.edges() {
        writeln!(w, "{}\t{}", g.label(u), g.label(v))?;
    }
    Ok(())
}

pub fn save_edge_list(g: &Graph, path: &Path) -> Result<()> {
    write_edge_list(g, BufWriter::new(std::fs::File::create(path)?))
}

/// Anchor file: `source_id<TAB>target_id` per line; an optional third column
/// carries the selection score for pseudo anchors.
pub fn write_anchors<W: Write>(
    anchors: &AnchorLinkSet,
    source_labels: &[String],
    target_labels: &[String],
    scores: Option<&[f64]>,
    mut w: W,
) -> Result<()> {
    for (i, &(s, t)) in anchors.pairs().iter().enumerate() {
        match scores {
            Some(sc) => writeln!(w, "{}\t{}\t{:.6}", source_labels[s], target_labels[t], sc[i])?,
            None => writeln!(w, "{}\t{}", source_labels[s], target_labels[t])?,
        }
    }
    Ok(())
}

/// Parse anchors, resolving label pairs against two explicit id lists
/// (e.g. the id columns of two embedding files).
pub fn parse_anchors_with_ids<R: Read>(
    r: R,
    source_ids: &[String],
    target_ids: &[String],
    kind: AnchorKind,
) -> Result<AnchorLinkSet> {
    let src_idx: HashMap<&str, usize> =
        source_ids.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let tgt_idx: HashMap<&str, usize> =
        target_ids.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut pairs = Vec::new();
    for (idx, line) in BufReader::new(r).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(Error::Parse { line: line_no, msg: "expected `source<TAB>target`".into() });
        }
        let s = *src_idx
            .get(fields[0])
            .ok_or_else(|| Error::UnknownNodeId(fields[0].to_string()))?;
        let t = *tgt_idx
            .get(fields[1])
            .ok_or_else(|| Error::UnknownNodeId(fields[1].to_string()))?;
        pairs.push((s, t));
    }
    AnchorLinkSet::new(pairs, kind)
}

/// Parse anchors, resolving labels to dense node ids via the two graphs.
pub fn parse_anchors<R: Read>(
    r: R,
    source: &Graph,
    target: &Graph,
    kind: AnchorKind,
) -> Result<AnchorLinkSet> {
    parse_anchors_with_ids(r, &source.labels(), &target.labels(), kind)
}

pub fn load_anchors(
    path: &Path,
    source: &Graph,
    target: &Graph,
    kind: AnchorKind,
) -> Result<AnchorLinkSet> {
    parse_anchors(std::fs::File::open(path)?, source, target, kind)
}

/// Metadata stored alongside an exported aligned pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignedPairMeta {
    pub lambda_e: f64,
    pub seed: u64,
    pub node_count: usize,
    pub source_edges: usize,
    pub target_edges: usize,
    pub anchor_count: usize,
}

/// Export an aligned pair as a directory: `source.edges`, `target.edges`,
/// `anchors.tsv`, `meta.json`.
pub fn export_aligned_pair(pair: &AlignedPair, seed: u64, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_edge_list(&pair.source, &dir.join("source.edges"))?;
    save_edge_list(&pair.target, &dir.join("target.edges"))?;
    let anchors = std::fs::File::create(dir.join("anchors.tsv"))?;
    write_anchors(
        &pair.ground_truth,
        &pair.source.labels(),
        &pair.target.labels(),
        None,
        BufWriter::new(anchors),
    )?;
    let meta = AlignedPairMeta {
        lambda_e: pair.lambda_e,
        seed,
        node_count: pair.source.node_count(),
        source_edges: pair.source.edge_count(),
        target_edges: pair.target.edge_count(),
        anchor_count: pair.ground_truth.len(),
    };
    let f = std::fs::File::create(dir.join("meta.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &meta)?;
    Ok(())
}
