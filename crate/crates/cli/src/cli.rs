//! Command-line surface: argument parsing, config merging, stage dispatch and
//! artifact writing.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hin_embed_core::align::{aggregate_unaligned, align_all};
use hin_embed_core::eval::{link_prediction_eval_split, node_classification_eval, split_links};
use hin_embed_core::partitioner::{avg_neighborhood_loss, extract_anchor_network};
use hin_embed_core::pipeline::{embed, evaluate, partition_stage, Metrics};
use hin_embed_core::{induce_partition, Error, HinGraph};

use crate::config::{ConfigError, FileConfig};
use crate::exec::RayonExecutor;
use crate::io;

pub const PARTITIONS_FILE: &str = "partitions.tsv";
pub const HYPEREDGES_FILE: &str = "hyperedges.tsv";
pub const PARTITION_EMBEDDINGS_FILE: &str = "partition_embeddings.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const ALIGNMENT_FILE: &str = "alignment.tsv";
pub const LOSSES_FILE: &str = "losses.csv";
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Parser)]
#[command(name = "hin-embed", version, about = "Partition, embed and align heterogeneous information networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config file; explicit flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum number of concurrently running workers
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Embedding dimension
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// Partitions smaller than this are packed together
    #[arg(long, global = true)]
    pub lower_bound: Option<usize>,
    /// No partition grows past this many nodes by merging
    #[arg(long, global = true)]
    pub upper_bound: Option<usize>,
    /// Fraction of edges rewired in the negative sample
    #[arg(long, global = true)]
    pub corruption_rate: Option<f64>,
    /// Output directory (default `out`)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Edge file: src<TAB>src_type<TAB>relation<TAB>dst<TAB>dst_type
    #[arg(long, global = true, value_name = "PATH")]
    pub edges: Option<PathBuf>,
    /// Feature file: node<TAB>f0,f1,...
    #[arg(long, global = true, value_name = "PATH")]
    pub features: Option<PathBuf>,
    /// Label file: node<TAB>label, one line per label
    #[arg(long, global = true, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    /// Average partition embeddings instead of aligning them
    #[arg(long, global = true)]
    pub no_align: bool,
    /// Remove the seeded link-prediction test links before partitioning
    /// (`partition`, `embed`) and score them (`eval`)
    #[arg(long, global = true)]
    pub hide_links: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build hyperedges and partitions; writes the partition and hyperedge manifests
    Partition,
    /// Partition, train every worker and the anchor network, and align
    Embed,
    /// Align partition embeddings produced by `embed`
    Align {
        /// Partition embedding dump (default `<out>/partition_embeddings.tsv`)
        #[arg(long, value_name = "PATH")]
        partition_embeddings: Option<PathBuf>,
    },
    /// Score final embeddings by node classification and link prediction
    Eval {
        /// Final embeddings (default `<out>/embeddings.tsv`)
        #[arg(long, value_name = "PATH")]
        embeddings: Option<PathBuf>,
    },
    /// Embed, then evaluate with hidden links removed before training
    Run,
    /// Print the average neighborhood loss of a partition manifest
    Quality {
        /// Partition manifest (default `<out>/partitions.tsv`)
        #[arg(long, value_name = "PATH")]
        partitions: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error(transparent)]
    Usage(#[from] ConfigError),
    #[error("{0:#}")]
    Pipeline(#[from] anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Pipeline(_) => 1,
        }
    }
}

impl GlobalArgs {
    fn as_file_config(&self) -> FileConfig {
        FileConfig {
            edges: self.edges.clone(),
            features: self.features.clone(),
            labels: self.labels.clone(),
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            lower_bound: self.lower_bound,
            upper_bound: self.upper_bound,
            dim: self.dim,
            epochs: self.epochs,
            lr: self.lr,
            corruption_rate: self.corruption_rate,
            align: self.no_align.then_some(false),
            ..FileConfig::default()
        }
    }

    /// Config file values overlaid with explicit flags.
    pub fn resolve(&self) -> Result<FileConfig, ConfigError> {
        let base = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(base.overlay(self.as_file_config()))
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors and usage go to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let file = cli.global.resolve()?;
    let cfg = file.pipeline()?;
    let out_dir = file.out_dir();
    let exec = RayonExecutor::new(cfg.executor_count).context("starting worker pool")?;
    let load = || -> Result<HinGraph, Failure> {
        let edges = file.edges()?;
        let g = io::load_hin(edges, file.features.as_deref(), file.labels.as_deref()).context("loading graph")?;
        log::info!("loaded {} nodes, {} edges, {} relations", g.node_count(), g.edge_count(), g.relation_count());
        Ok(g)
    };
    // Graph the training stages see: the full graph, or with test links hidden.
    let training_graph = |g: HinGraph| -> Result<HinGraph, Failure> {
        if !cli.global.hide_links {
            return Ok(g);
        }
        let split = split_links(&g, cfg.eval.hidden_link_fraction, cfg.seed).context("hiding links")?;
        Ok(split.observed)
    };

    match &cli.command {
        Command::Partition => {
            let g = training_graph(load()?)?;
            let stage = partition_stage(&g, &cfg, &exec).map_err(|e| stage_err(e.in_stage("partition")))?;
            let anchor = if stage.partitions.len() > 1 {
                match extract_anchor_network(&g, &stage.partitions, cfg.bounds, cfg.fallback_dim) {
                    Ok(a) => Some(a),
                    Err(Error::NoCrossPartitionNodes) => None,
                    Err(e) => return Err(stage_err(e.in_stage("anchor"))),
                }
            } else {
                None
            };
            write_artifacts(
                &out_dir,
                &[
                    (PARTITIONS_FILE, io::format_partition_manifest(&g, &stage.partitions, anchor.as_ref())),
                    (HYPEREDGES_FILE, io::format_hyperedges(&g, &stage.hyperedges)),
                ],
            )?;
            println!("{} partitions, {} contraction rounds", stage.partitions.len(), stage.bucket_counts.len() - 1);
        }
        Command::Embed => {
            let g = training_graph(load()?)?;
            let out = embed(&g, &cfg, &exec).map_err(stage_err)?;
            write_artifacts(
                &out_dir,
                &[
                    (PARTITIONS_FILE, io::format_partition_manifest(&g, &out.partitions, out.anchor.as_ref())),
                    (HYPEREDGES_FILE, io::format_hyperedges(&g, &out.hyperedges)),
                    (
                        PARTITION_EMBEDDINGS_FILE,
                        io::format_partition_embeddings(&g, &out.partition_embeddings, out.anchor_embedding.as_ref()),
                    ),
                    (EMBEDDINGS_FILE, io::format_embeddings(&g, &out.embeddings)),
                    (ALIGNMENT_FILE, io::format_alignment_report(&out.reports)),
                    (LOSSES_FILE, io::format_loss_trace(&out.losses)),
                ],
            )?;
            println!("{} nodes embedded from {} partitions", out.embeddings.len(), out.partitions.len());
        }
        Command::Align { partition_embeddings } => {
            let g = load()?;
            let path = partition_embeddings.clone().unwrap_or_else(|| out_dir.join(PARTITION_EMBEDDINGS_FILE));
            let (parts, anchor) = io::read_partition_embeddings(&g, &path).context("reading partition embeddings")?;
            let (embeddings, reports) = match (&anchor, cfg.align) {
                (Some(a), true) => {
                    let al = align_all(&parts, a, &exec).map_err(|e| stage_err(e.in_stage("align")))?;
                    (al.embeddings, al.reports)
                }
                _ => (aggregate_unaligned(&parts).map_err(|e| stage_err(e.in_stage("aggregate")))?, Vec::new()),
            };
            write_artifacts(
                &out_dir,
                &[
                    (EMBEDDINGS_FILE, io::format_embeddings(&g, &embeddings)),
                    (ALIGNMENT_FILE, io::format_alignment_report(&reports)),
                ],
            )?;
            println!("{} nodes aligned from {} partitions", embeddings.len(), parts.len());
        }
        Command::Eval { embeddings } => {
            let g = load()?;
            let path = embeddings.clone().unwrap_or_else(|| out_dir.join(EMBEDDINGS_FILE));
            let emb = io::read_embeddings(&g, &path).context("reading embeddings")?;
            let (macro_f1, micro_f1) = match g.labels() {
                Some(labels) => {
                    let s = node_classification_eval(&emb, labels, &cfg.eval, cfg.seed)
                        .map_err(|e| stage_err(e.in_stage("classification")))?;
                    (Some(s.macro_f1), Some(s.micro_f1))
                }
                None => (None, None),
            };
            let auc = if cli.global.hide_links {
                let split = split_links(&g, cfg.eval.hidden_link_fraction, cfg.seed)
                    .map_err(|e| stage_err(e.in_stage("link-prediction")))?;
                let auc = link_prediction_eval_split(&g, &split, &emb, &cfg.eval, cfg.seed)
                    .map_err(|e| stage_err(e.in_stage("link-prediction")))?;
                Some(auc)
            } else {
                log::info!("link prediction skipped; pass --hide-links with embeddings trained the same way");
                None
            };
            let metrics = Metrics { macro_f1, micro_f1, auc, avg_neighborhood_loss: None, per_partition: Vec::new() };
            let json = io::format_metrics(&metrics);
            write_artifacts(&out_dir, &[(METRICS_FILE, json.clone())])?;
            print!("{json}");
        }
        Command::Run => {
            let g = load()?;
            let run = evaluate(&g, &cfg, &exec).map_err(stage_err)?;
            let out = &run.full;
            for w in &out.warnings {
                log::warn!("{w}");
            }
            let json = io::format_metrics(&run.metrics);
            write_artifacts(
                &out_dir,
                &[
                    (PARTITIONS_FILE, io::format_partition_manifest(&g, &out.partitions, out.anchor.as_ref())),
                    (HYPEREDGES_FILE, io::format_hyperedges(&g, &out.hyperedges)),
                    (
                        PARTITION_EMBEDDINGS_FILE,
                        io::format_partition_embeddings(&g, &out.partition_embeddings, out.anchor_embedding.as_ref()),
                    ),
                    (EMBEDDINGS_FILE, io::format_embeddings(&g, &out.embeddings)),
                    (ALIGNMENT_FILE, io::format_alignment_report(&out.reports)),
                    (LOSSES_FILE, io::format_loss_trace(&out.losses)),
                    (METRICS_FILE, json.clone()),
                ],
            )?;
            print!("{json}");
        }
        Command::Quality { partitions } => {
            let g = load()?;
            let path = partitions.clone().unwrap_or_else(|| out_dir.join(PARTITIONS_FILE));
            let manifest = io::read_partition_manifest(&g, &path).context("reading partition manifest")?;
            let parts = manifest
                .into_iter()
                .map(|(id, nodes)| induce_partition(&g, nodes, id, cfg.fallback_dim))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| stage_err(e.in_stage("quality")))?;
            let loss = avg_neighborhood_loss(&g, &parts).map_err(|e| stage_err(e.in_stage("quality")))?;
            println!("avg_neighborhood_loss {loss:.2}");
        }
    }
    Ok(())
}

fn stage_err(e: Error) -> Failure {
    Failure::Pipeline(anyhow::Error::new(e))
}

/// Writes every artifact into `dir`. If any write fails, the files written
/// by this call are removed again.
pub fn write_artifacts(dir: &Path, artifacts: &[(&str, String)]) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, contents) in artifacts {
        let path = dir.join(name);
        if let Err(e) = io::write(&path, contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(anyhow::Error::new(e).into());
        }
        written.push(path);
    }
    Ok(())
}
