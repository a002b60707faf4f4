#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hin_embed::io;
use hin_embed_core::synthetic::{planted_hin, PlantedConfig};
use hin_embed_core::HinGraph;

pub struct Inputs {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
}

pub fn write_graph(dir: &Path, g: &HinGraph) -> Inputs {
    let inputs = Inputs { edges: dir.join("edges.tsv"), features: dir.join("features.tsv"), labels: dir.join("labels.tsv") };
    io::write(&inputs.edges, &io::format_edges(g)).unwrap();
    io::write(&inputs.features, &io::format_features(g)).unwrap();
    io::write(&inputs.labels, &io::format_labels(g)).unwrap();
    inputs
}

pub fn write_planted(dir: &Path, cfg: &PlantedConfig) -> Inputs {
    write_graph(dir, &planted_hin(cfg).unwrap().graph)
}

pub fn hin_embed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hin-embed")).args(args).output().expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
