mod common;

use std::time::{Duration, Instant};

use common::Threaded;
use hin_embed_core::infomax::{train_worker, WorkerConfig};
use hin_embed_core::pipeline::{embed, evaluate, hidden_link_leaks, PipelineConfig};
use hin_embed_core::subnet::induce_partition;
use hin_embed_core::synthetic::{planted_hin, PlantedConfig};
use hin_embed_core::{PartitionBounds, PartitionId, Sequential};

fn cfg(lower: usize, upper: usize, seed: u64) -> PipelineConfig {
    PipelineConfig {
        bounds: PartitionBounds::new(lower, upper).unwrap(),
        worker: WorkerConfig { epochs: 30, ..WorkerConfig::default() },
        seed,
        ..PipelineConfig::default()
    }
}

#[test]
fn smoke_three_hundred_nodes() {
    let g = planted_hin(&PlantedConfig { nodes: 300, relations: 3, ..Default::default() }).unwrap().graph;
    let start = Instant::now();
    let out = embed(&g, &cfg(60, 150, 1), &Sequential).unwrap();
    assert!(start.elapsed() < Duration::from_secs(60));
    let isolated = g.isolated_nodes();
    for v in g.nodes().filter(|v| !isolated.contains(v)) {
        assert_eq!(out.embeddings[&v].len(), 32);
    }
    assert!(out.partitions.len() > 1);
    assert!(out.anchor.is_some());
}

#[test]
fn executor_count_does_not_change_results() {
    let g = planted_hin(&PlantedConfig { nodes: 300, relations: 3, seed: 2, ..Default::default() }).unwrap().graph;
    let c = cfg(60, 150, 2);
    let one = embed(&g, &c, &Sequential).unwrap();
    let many = embed(&g, &c, &Threaded(8)).unwrap();
    let bits = |e: &std::collections::BTreeMap<_, Vec<f64>>| {
        e.iter().map(|(k, v): (&_, &Vec<f64>)| (*k, v.iter().map(|x| x.to_bits()).collect::<Vec<_>>())).collect::<Vec<_>>()
    };
    assert_eq!(bits(&one.embeddings), bits(&many.embeddings));
    assert_eq!(one.losses, many.losses);
}

#[test]
fn one_partition_equals_direct_training() {
    let g = planted_hin(&PlantedConfig { nodes: 120, relations: 2, seed: 3, ..Default::default() }).unwrap().graph;
    let c = cfg(500, 1000, 3);
    let out = embed(&g, &c, &Sequential).unwrap();
    assert_eq!(out.partitions.len(), 1);
    assert!(out.reports.is_empty());
    let p = induce_partition(&g, g.nodes(), PartitionId(0), c.fallback_dim).unwrap();
    let direct = train_worker(&p, &WorkerConfig { seed: c.seed, ..c.worker }).unwrap().embedding;
    for (i, v) in direct.node_ids.iter().enumerate() {
        let a: Vec<u64> = out.embeddings[v].iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = direct.z.row(i).iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn hidden_links_stay_out_of_training() {
    let g = planted_hin(&PlantedConfig { nodes: 240, relations: 3, seed: 4, ..Default::default() }).unwrap().graph;
    let run = evaluate(&g, &cfg(50, 120, 4), &Sequential).unwrap();
    let split = run.split.as_ref().unwrap();
    let observed = run.observed.as_ref().unwrap();
    assert!(hidden_link_leaks(split, &observed.partitions).is_empty());
    if let Some(anchor) = &observed.anchor {
        assert!(hidden_link_leaks(split, std::slice::from_ref(&anchor.network)).is_empty());
    }
    let hidden_edges: Vec<_> = split.hidden_edges.iter().map(|&i| g.edges()[i]).collect();
    assert!(hidden_edges.iter().all(|e| !split.observed.edges().contains(e)));
    let m = &run.metrics;
    assert!(m.auc.unwrap() > 0.5);
    assert!(m.micro_f1.unwrap() > 0.5);
    assert!(m.avg_neighborhood_loss.unwrap() >= 0.0);
}
