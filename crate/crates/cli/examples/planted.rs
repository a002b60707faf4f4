//! Writes a synthetic HIN with planted communities as edge, feature and label
//! files: `cargo run -p hin-embed --example planted -- <dir> [nodes] [seed]`.

use std::path::PathBuf;

use hin_embed::io;
use hin_embed_core::synthetic::{planted_hin, PlantedConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let nodes = args.next().map(|s| s.parse()).transpose()?.unwrap_or(600);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let g = planted_hin(&PlantedConfig { nodes, seed, ..PlantedConfig::default() })?.graph;
    std::fs::create_dir_all(&dir)?;
    io::write(&dir.join("edges.tsv"), &io::format_edges(&g))?;
    io::write(&dir.join("features.tsv"), &io::format_features(&g))?;
    io::write(&dir.join("labels.tsv"), &io::format_labels(&g))?;
    println!("{} nodes, {} edges, {} relations in {}", g.node_count(), g.edge_count(), g.relation_count(), dir.display());
    Ok(())
}
