//! Tab-separated graph inputs and the artifacts the pipeline writes.
//!
//! Node ids in files are the original string ids. Lists of node ids are
//! comma-separated, so ids may not contain commas, tabs or newlines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hin_embed_core::align::AlignmentReport;
use hin_embed_core::hypergraph::Hyperedge;
use hin_embed_core::infomax::EmbeddingMatrix;
use hin_embed_core::linalg::Matrix;
use hin_embed_core::pipeline::Metrics;
use hin_embed_core::{AnchorNetwork, HinBuilder, HinGraph, NodeId, Partition, PartitionId};
use serde::Serialize;

/// Partition id used for the anchor network in every file.
pub const ANCHOR_TAG: &str = "anchor";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("{path}:{line}: {source}")]
    Invalid { path: PathBuf, line: usize, source: hin_embed_core::Error },
    #[error("{path}: {source}")]
    Graph { path: PathBuf, source: hin_embed_core::Error },
}

pub type IoResult<T> = Result<T, IoError>;

fn read(path: &Path) -> IoResult<String> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

/// Writes `contents` to `path`, replacing it.
pub fn write(path: &Path, contents: &str) -> IoResult<()> {
    fs::write(path, contents).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> IoError {
    IoError::Malformed { path: path.to_path_buf(), line, reason: reason.into() }
}

fn invalid(path: &Path, line: usize, source: hin_embed_core::Error) -> IoError {
    IoError::Invalid { path: path.to_path_buf(), line, source }
}

fn check_id<'a>(path: &Path, line: usize, id: &'a str) -> IoResult<&'a str> {
    if id.is_empty() || id.contains(',') {
        return Err(malformed(path, line, format!("invalid node id `{id}`")));
    }
    Ok(id)
}

fn parse_floats(path: &Path, line: usize, field: &str) -> IoResult<Vec<f64>> {
    field
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| malformed(path, line, format!("bad number `{s}`"))))
        .collect()
}

/// Loads edges, and optionally features and labels, into a graph.
pub fn load_hin(edges: &Path, features: Option<&Path>, labels: Option<&Path>) -> IoResult<HinGraph> {
    let mut b = HinBuilder::new();
    let text = read(edges)?;
    for (line, l) in records(&text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 5 {
            return Err(malformed(edges, line, format!("expected 5 tab-separated fields, got {}", f.len())));
        }
        let (src, dst) = (check_id(edges, line, f[0])?, check_id(edges, line, f[3])?);
        if f[2].is_empty() {
            return Err(malformed(edges, line, "empty relation"));
        }
        b.add_edge(src, f[1], f[2], dst, f[4]).map_err(|source| invalid(edges, line, source))?;
    }
    if let Some(path) = features {
        let text = read(path)?;
        for (line, l) in records(&text) {
            let (id, values) = l.split_once('\t').ok_or_else(|| malformed(path, line, "expected `node<TAB>values`"))?;
            let values = parse_floats(path, line, values)?;
            b.set_features(id, values).map_err(|source| invalid(path, line, source))?;
        }
    }
    if let Some(path) = labels {
        let text = read(path)?;
        for (line, l) in records(&text) {
            let (id, label) = l.split_once('\t').ok_or_else(|| malformed(path, line, "expected `node<TAB>label`"))?;
            if label.is_empty() || label.contains('\t') {
                return Err(malformed(path, line, "expected exactly one label"));
            }
            b.add_label(id, label).map_err(|source| invalid(path, line, source))?;
        }
    }
    b.build().map_err(|source| IoError::Graph { path: edges.to_path_buf(), source })
}

pub fn format_edges(g: &HinGraph) -> String {
    let mut s = String::new();
    for e in g.edges() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            g.node_name(e.src),
            g.node_type_name(g.node_type(e.src)),
            g.relation_name(e.rel),
            g.node_name(e.dst),
            g.node_type_name(g.node_type(e.dst)),
        );
    }
    s
}

fn join_floats(xs: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{x}");
    }
    s
}

pub fn format_features(g: &HinGraph) -> String {
    let mut s = String::new();
    if let Some(x) = g.features() {
        for v in g.nodes() {
            let _ = writeln!(s, "{}\t{}", g.node_name(v), join_floats(x.row(v.index())));
        }
    }
    s
}

pub fn format_labels(g: &HinGraph) -> String {
    let mut s = String::new();
    if let Some(labels) = g.labels() {
        for (v, ls) in labels {
            for l in ls {
                let _ = writeln!(s, "{}\t{}", g.node_name(*v), g.label_name(*l));
            }
        }
    }
    s
}

fn join_names(g: &HinGraph, nodes: &[NodeId]) -> String {
    nodes.iter().map(|v| g.node_name(*v)).collect::<Vec<_>>().join(",")
}

fn partition_tag(id: PartitionId) -> String {
    if id.is_anchor() { ANCHOR_TAG.to_string() } else { id.to_string() }
}

fn parse_partition_tag(path: &Path, line: usize, s: &str) -> IoResult<PartitionId> {
    if s == ANCHOR_TAG {
        return Ok(PartitionId::ANCHOR);
    }
    s.parse::<u32>().map(PartitionId).map_err(|_| malformed(path, line, format!("bad partition id `{s}`")))
}

/// `partition_id<TAB>node_count<TAB>origin_relations<TAB>node ids`, one line
/// per partition and a final `anchor` line when an anchor network exists.
pub fn format_partition_manifest(g: &HinGraph, parts: &[Partition], anchor: Option<&AnchorNetwork>) -> String {
    let mut s = String::new();
    for p in parts.iter().chain(anchor.map(|a| &a.network)) {
        let rels: Vec<&str> = p.origin_relations.iter().map(|r| g.relation_name(*r)).collect();
        let _ = writeln!(s, "{}\t{}\t{}\t{}", partition_tag(p.id), p.len(), rels.join(","), join_names(g, &p.node_ids));
    }
    s
}

/// Partition node sets from a manifest; the anchor line is skipped.
pub fn read_partition_manifest(g: &HinGraph, path: &Path) -> IoResult<Vec<(PartitionId, Vec<NodeId>)>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (line, l) in records(&text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 4 {
            return Err(malformed(path, line, "expected 4 tab-separated fields"));
        }
        let id = parse_partition_tag(path, line, f[0])?;
        if id.is_anchor() {
            continue;
        }
        let nodes = node_list(g, path, line, f[3])?;
        if f[1].parse::<usize>().ok() != Some(nodes.len()) {
            return Err(malformed(path, line, "node count does not match node list"));
        }
        out.push((id, nodes));
    }
    Ok(out)
}

fn node_list(g: &HinGraph, path: &Path, line: usize, field: &str) -> IoResult<Vec<NodeId>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(',')
        .map(|name| g.node_id(name).ok_or_else(|| malformed(path, line, format!("unknown node `{name}`"))))
        .collect()
}

/// `hyperedge_id<TAB>relation<TAB>node_count<TAB>node ids`.
pub fn format_hyperedges(g: &HinGraph, hyperedges: &[Hyperedge]) -> String {
    let mut s = String::new();
    for h in hyperedges {
        let rels: Vec<&str> = h.relation_tags.iter().map(|r| g.relation_name(*r)).collect();
        let _ = writeln!(s, "{}\t{}\t{}\t{}", h.id, rels.join(","), h.len(), join_names(g, &h.node_ids));
    }
    s
}

/// `node_id<TAB>partition_id<TAB>f0,...`, partitions in order, anchor last.
pub fn format_partition_embeddings(g: &HinGraph, embeddings: &[EmbeddingMatrix], anchor: Option<&EmbeddingMatrix>) -> String {
    let mut s = String::new();
    for e in embeddings.iter().chain(anchor) {
        for (i, v) in e.node_ids.iter().enumerate() {
            let _ = writeln!(s, "{}\t{}\t{}", g.node_name(*v), partition_tag(e.partition_id), join_floats(e.z.row(i)));
        }
    }
    s
}

/// Inverse of [`format_partition_embeddings`]: partition embeddings in file
/// order plus the anchor embedding when present.
pub fn read_partition_embeddings(
    g: &HinGraph,
    path: &Path,
) -> IoResult<(Vec<EmbeddingMatrix>, Option<EmbeddingMatrix>)> {
    let text = read(path)?;
    let mut order: Vec<PartitionId> = Vec::new();
    let mut rows: BTreeMap<PartitionId, (Vec<NodeId>, Vec<f64>)> = BTreeMap::new();
    let mut dim = None;
    for (line, l) in records(&text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 3 {
            return Err(malformed(path, line, "expected `node<TAB>partition<TAB>values`"));
        }
        let v = g.node_id(f[0]).ok_or_else(|| malformed(path, line, format!("unknown node `{}`", f[0])))?;
        let pid = parse_partition_tag(path, line, f[1])?;
        let x = parse_floats(path, line, f[2])?;
        if *dim.get_or_insert(x.len()) != x.len() {
            return Err(malformed(path, line, "embedding width differs from earlier rows"));
        }
        let entry = rows.entry(pid).or_insert_with(|| {
            order.push(pid);
            (Vec::new(), Vec::new())
        });
        entry.0.push(v);
        entry.1.extend(x);
    }
    let d = dim.unwrap_or(0);
    let mut parts = Vec::new();
    let mut anchor = None;
    for pid in order {
        let (node_ids, data) = rows.remove(&pid).unwrap();
        let z = Matrix::from_vec(node_ids.len(), d, data).map_err(|source| IoError::Graph { path: path.to_path_buf(), source })?;
        let e = EmbeddingMatrix { partition_id: pid, node_ids, z };
        if pid.is_anchor() { anchor = Some(e) } else { parts.push(e) }
    }
    Ok((parts, anchor))
}

/// `node_id<TAB>f0,...` in node-id order.
pub fn format_embeddings(g: &HinGraph, embeddings: &BTreeMap<NodeId, Vec<f64>>) -> String {
    let mut s = String::new();
    for (v, x) in embeddings {
        let _ = writeln!(s, "{}\t{}", g.node_name(*v), join_floats(x));
    }
    s
}

pub fn read_embeddings(g: &HinGraph, path: &Path) -> IoResult<BTreeMap<NodeId, Vec<f64>>> {
    let text = read(path)?;
    let mut out = BTreeMap::new();
    let mut dim = None;
    for (line, l) in records(&text) {
        let (id, values) = l.split_once('\t').ok_or_else(|| malformed(path, line, "expected `node<TAB>values`"))?;
        let v = g.node_id(id).ok_or_else(|| malformed(path, line, format!("unknown node `{id}`")))?;
        let x = parse_floats(path, line, values)?;
        if *dim.get_or_insert(x.len()) != x.len() {
            return Err(malformed(path, line, "embedding width differs from earlier rows"));
        }
        out.insert(v, x);
    }
    Ok(out)
}

/// `partition_id<TAB>mu<TAB>residual<TAB>scale`.
pub fn format_alignment_report(reports: &[AlignmentReport]) -> String {
    let mut s = String::from("partition_id\tmu\tresidual\tscale\n");
    for r in reports {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", r.partition_id, r.mu, r.residual, r.scale);
    }
    s
}

/// `partition_id,epoch,loss` for every recorded epoch.
pub fn format_loss_trace(losses: &[(PartitionId, Vec<f64>)]) -> String {
    let mut s = String::from("partition_id,epoch,loss\n");
    for (p, ls) in losses {
        for (epoch, l) in ls.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", partition_tag(*p), epoch, l);
        }
    }
    s
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PartitionRecord {
    pub partition_id: u32,
    pub nodes: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub anchors: Option<usize>,
    pub residual: Option<f64>,
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricsRecord {
    pub macro_f1: Option<f64>,
    pub micro_f1: Option<f64>,
    pub auc: Option<f64>,
    pub avg_neighborhood_loss: Option<f64>,
    pub per_partition: Vec<PartitionRecord>,
}

impl From<&Metrics> for MetricsRecord {
    fn from(m: &Metrics) -> Self {
        MetricsRecord {
            macro_f1: m.macro_f1,
            micro_f1: m.micro_f1,
            auc: m.auc,
            avg_neighborhood_loss: m.avg_neighborhood_loss,
            per_partition: m
                .per_partition
                .iter()
                .map(|p| PartitionRecord {
                    partition_id: p.partition_id.0,
                    nodes: p.nodes,
                    epochs: p.epochs,
                    final_loss: p.final_loss,
                    anchors: p.anchors,
                    residual: p.residual,
                    scale: p.scale,
                })
                .collect(),
        }
    }
}

pub fn format_metrics(m: &Metrics) -> String {
    let mut s = serde_json::to_string_pretty(&MetricsRecord::from(m)).expect("metrics serialize");
    s.push('\n');
    s
}
