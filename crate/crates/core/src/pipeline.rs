//! End-to-end orchestration: hyperedges, partitioning, independent workers,
//! anchor network, alignment and aggregation, plus the evaluation run.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::align::{aggregate_unaligned, align_all, AlignmentReport};
use crate::error::{Error, Result};
use crate::eval::{link_prediction_eval_split, node_classification_eval, split_links, EvalConfig, LinkSplit};
use crate::exec::Executor;
use crate::graph::HinGraph;
use crate::hypergraph::{generate_hyperedges, Hyperedge};
use crate::ids::{NodeId, PartitionId};
use crate::infomax::{train_worker, EmbeddingMatrix, WorkerConfig, WorkerOutput};
use crate::partitioner::{avg_neighborhood_loss, extract_anchor_network, partition, AnchorNetwork, PartitionBounds};
use crate::subnet::{Partition, DEFAULT_FALLBACK_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub bounds: PartitionBounds,
    /// `worker.seed` is overwritten by `seed` when the pipeline runs.
    pub worker: WorkerConfig,
    pub executor_count: usize,
    pub eval: EvalConfig,
    pub seed: u64,
    /// One-hot width for graphs without features.
    pub fallback_dim: usize,
    /// When false, partition embeddings are averaged without alignment.
    pub align: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bounds: PartitionBounds::default(),
            worker: WorkerConfig::default(),
            executor_count: 1,
            eval: EvalConfig::default(),
            seed: 0,
            fallback_dim: DEFAULT_FALLBACK_DIM,
            align: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.executor_count == 0 {
            return Err(Error::InvalidConfig("executor_count must be >= 1"));
        }
        if self.fallback_dim == 0 {
            return Err(Error::InvalidConfig("fallback_dim must be >= 1"));
        }
        self.bounds.validate()?;
        self.worker.validate()?;
        self.eval.validate()
    }

    pub fn worker_config(&self) -> WorkerConfig {
        WorkerConfig { seed: self.seed, ..self.worker }
    }
}

/// Partitions and the contraction bookkeeping.
#[derive(Debug, Clone)]
pub struct PartitionStage {
    pub partitions: Vec<Partition>,
    pub bucket_counts: Vec<usize>,
    pub hyperedges: Vec<Hyperedge>,
    pub isolated: Vec<NodeId>,
}

pub fn partition_stage<E: Executor>(g: &HinGraph, cfg: &PipelineConfig, exec: &E) -> Result<PartitionStage> {
    let buckets = generate_hyperedges(g, exec);
    let hyperedges: Vec<Hyperedge> = buckets.iter().flat_map(|b| b.iter().cloned()).collect();
    let out = partition(g, buckets, cfg.bounds, cfg.seed, cfg.fallback_dim, exec)?;
    Ok(PartitionStage {
        partitions: out.partitions,
        bucket_counts: out.bucket_counts,
        hyperedges,
        isolated: out.isolated,
    })
}

/// Trains one worker per partition; outputs are in partition order.
pub fn train_stage<E: Executor>(partitions: &[Partition], worker: &WorkerConfig, exec: &E) -> Result<Vec<WorkerOutput>> {
    exec.map(partitions.iter().collect(), |p| train_worker(p, worker)).into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Final embedding of every node covered by a partition or the anchor network.
    pub embeddings: BTreeMap<NodeId, Vec<f64>>,
    pub partitions: Vec<Partition>,
    pub bucket_counts: Vec<usize>,
    pub hyperedges: Vec<Hyperedge>,
    pub anchor: Option<AnchorNetwork>,
    pub partition_embeddings: Vec<EmbeddingMatrix>,
    pub anchor_embedding: Option<EmbeddingMatrix>,
    /// Per-epoch losses by partition, anchor network last.
    pub losses: Vec<(PartitionId, Vec<f64>)>,
    pub reports: Vec<AlignmentReport>,
    pub warnings: Vec<String>,
}

/// Runs every stage on `g`. A single partition, or partitions sharing no
/// node or edge, skip the anchor network and fall back to plain averaging.
pub fn embed<E: Executor>(g: &HinGraph, cfg: &PipelineConfig, exec: &E) -> Result<PipelineOutput> {
    cfg.validate()?;
    let worker = cfg.worker_config();
    let stage = partition_stage(g, cfg, exec).map_err(|e| e.in_stage("partition"))?;
    log::info!("{} partitions after {} contraction rounds", stage.partitions.len(), stage.bucket_counts.len() - 1);
    let outputs = train_stage(&stage.partitions, &worker, exec).map_err(|e| e.in_stage("train"))?;
    let mut losses: Vec<(PartitionId, Vec<f64>)> = Vec::with_capacity(outputs.len() + 1);
    let mut partition_embeddings = Vec::with_capacity(outputs.len());
    for o in outputs {
        losses.push((o.embedding.partition_id, o.losses));
        partition_embeddings.push(o.embedding);
    }

    let mut warnings = Vec::new();
    let mut out = PipelineOutput {
        embeddings: BTreeMap::new(),
        partitions: stage.partitions,
        bucket_counts: stage.bucket_counts,
        hyperedges: stage.hyperedges,
        anchor: None,
        partition_embeddings,
        anchor_embedding: None,
        losses,
        reports: Vec::new(),
        warnings: Vec::new(),
    };
    let unaligned = |out: &PipelineOutput| aggregate_unaligned(&out.partition_embeddings).map_err(|e| e.in_stage("aggregate"));
    if out.partitions.len() == 1 {
        out.embeddings = unaligned(&out)?;
        return Ok(out);
    }
    if !cfg.align {
        out.embeddings = unaligned(&out)?;
        return Ok(out);
    }
    let anchor = match extract_anchor_network(g, &out.partitions, cfg.bounds, cfg.fallback_dim) {
        Ok(a) => a,
        Err(Error::NoCrossPartitionNodes) => {
            let msg = String::from("partitions share no nodes or edges; embeddings averaged without alignment");
            log::warn!("{msg}");
            warnings.push(msg);
            out.embeddings = unaligned(&out)?;
            out.warnings = warnings;
            return Ok(out);
        }
        Err(e) => return Err(e.in_stage("anchor")),
    };
    let trained = train_worker(&anchor.network, &worker).map_err(|e| e.in_stage("anchor"))?;
    out.losses.push((PartitionId::ANCHOR, trained.losses));
    let alignment =
        align_all(&out.partition_embeddings, &trained.embedding, exec).map_err(|e| e.in_stage("align"))?;
    for r in &alignment.reports {
        if let Some(why) = r.fallback {
            warnings.push(format!("partition {} aligned with fallback {:?} ({} anchors)", r.partition_id, why, r.mu));
        }
    }
    out.embeddings = alignment.embeddings;
    out.reports = alignment.reports;
    out.anchor = Some(anchor);
    out.anchor_embedding = Some(trained.embedding);
    out.warnings = warnings;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMetrics {
    pub partition_id: PartitionId,
    pub nodes: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub anchors: Option<usize>,
    pub residual: Option<f64>,
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub macro_f1: Option<f64>,
    pub micro_f1: Option<f64>,
    pub auc: Option<f64>,
    pub avg_neighborhood_loss: Option<f64>,
    pub per_partition: Vec<PartitionMetrics>,
}

pub fn partition_metrics(out: &PipelineOutput) -> Vec<PartitionMetrics> {
    out.partitions
        .iter()
        .zip(&out.losses)
        .map(|(p, (_, l))| {
            let report = out.reports.iter().find(|r| r.partition_id == p.id);
            PartitionMetrics {
                partition_id: p.id,
                nodes: p.len(),
                epochs: l.len(),
                final_loss: l.last().copied().unwrap_or(f64::NAN),
                anchors: report.map(|r| r.mu),
                residual: report.map(|r| r.residual),
                scale: report.map(|r| r.scale),
            }
        })
        .collect()
}

/// Neighborhood loss, or `None` with a logged reason when undefined.
pub fn neighborhood_loss_or_none(g: &HinGraph, partitions: &[Partition]) -> Option<f64> {
    match avg_neighborhood_loss(g, partitions) {
        Ok(x) => Some(x),
        Err(e) => {
            log::warn!("neighborhood loss undefined: {e}");
            None
        }
    }
}

/// Pairs of `split.hidden_pairs` that still occur in `observed` or in any
/// partition adjacency. Empty when the split is isolated from training.
pub fn hidden_link_leaks(split: &LinkSplit, partitions: &[Partition]) -> Vec<(NodeId, NodeId)> {
    let hidden: BTreeSet<(NodeId, NodeId)> = split.hidden_pairs.iter().copied().collect();
    let mut seen: BTreeSet<(NodeId, NodeId)> = split
        .observed
        .edges()
        .iter()
        .map(|e| e.pair())
        .filter(|p| hidden.contains(p))
        .collect();
    for p in partitions {
        for (i, j) in p.adjacency.off_diagonal_pairs() {
            let (a, b) = (p.node_ids[i], p.node_ids[j]);
            let key = if a < b { (a, b) } else { (b, a) };
            if hidden.contains(&key) {
                seen.insert(key);
            }
        }
    }
    seen.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct EvaluationRun {
    /// Pipeline on the full graph; classification uses its embeddings.
    pub full: PipelineOutput,
    /// Pipeline on the graph with hidden links removed; link prediction uses it.
    pub observed: Option<PipelineOutput>,
    pub split: Option<LinkSplit>,
    pub metrics: Metrics,
}

/// Embeds `g` and scores it. Node classification runs when `g` carries
/// labels; link prediction hides links first, embeds the remaining graph,
/// verifies no hidden pair reached training, and ranks hidden pairs.
pub fn evaluate<E: Executor>(g: &HinGraph, cfg: &PipelineConfig, exec: &E) -> Result<EvaluationRun> {
    let full = embed(g, cfg, exec)?;
    let (macro_f1, micro_f1) = match g.labels() {
        Some(labels) => {
            let s = node_classification_eval(&full.embeddings, labels, &cfg.eval, cfg.seed)
                .map_err(|e| e.in_stage("classification"))?;
            (Some(s.macro_f1), Some(s.micro_f1))
        }
        None => (None, None),
    };
    let (auc, observed, split) = match split_links(g, cfg.eval.hidden_link_fraction, cfg.seed) {
        Ok(split) => {
            let observed = embed(&split.observed, cfg, exec)?;
            let leaks = hidden_link_leaks(&split, &observed.partitions);
            if !leaks.is_empty() {
                return Err(Error::InvalidConfig("hidden links reached a training stage").in_stage("link-prediction"));
            }
            let auc = link_prediction_eval_split(g, &split, &observed.embeddings, &cfg.eval, cfg.seed)
                .map_err(|e| e.in_stage("link-prediction"))?;
            (Some(auc), Some(observed), Some(split))
        }
        Err(Error::TooFewEdges(m)) => {
            log::warn!("link prediction skipped: only {m} edges");
            (None, None, None)
        }
        Err(e) => return Err(e.in_stage("link-prediction")),
    };
    let metrics = Metrics {
        macro_f1,
        micro_f1,
        auc,
        avg_neighborhood_loss: neighborhood_loss_or_none(g, &full.partitions),
        per_partition: partition_metrics(&full),
    };
    Ok(EvaluationRun { full, observed, split, metrics })
}
