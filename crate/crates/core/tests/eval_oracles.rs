mod common;

use std::collections::{BTreeMap, BTreeSet};

use hin_embed_core::eval::{
    auc, f1_scores, link_prediction_eval, node_classification_eval, sample_non_edges, split_links, EvalConfig,
};
use hin_embed_core::{HinBuilder, LabelId, NodeId};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let (u1, u2): (f64, f64) = (1.0 - rng.gen::<f64>(), rng.gen());
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn single(labels: &[usize]) -> BTreeMap<NodeId, BTreeSet<LabelId>> {
    labels.iter().enumerate().map(|(i, &l)| (NodeId(i as u32), BTreeSet::from([LabelId(l as u32)]))).collect()
}

#[test]
fn separable_clusters_classify() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
    let emb: BTreeMap<NodeId, Vec<f64>> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let centre = if l == 0 { -3.0 } else { 3.0 };
            (NodeId(i as u32), (0..4).map(|_| centre + normal(&mut rng)).collect())
        })
        .collect();
    let s = node_classification_eval(&emb, &single(&labels), &EvalConfig::default(), 0).unwrap();
    assert!(s.micro_f1 >= 0.95, "{s:?}");
}

#[test]
fn permuted_labels_score_near_majority_rate() {
    let mut total = 0.0;
    let runs = 20;
    // three classes with shares 0.5 / 0.3 / 0.2
    let mut labels: Vec<usize> = (0..300).map(|i| if i < 150 { 0 } else if i < 240 { 1 } else { 2 }).collect();
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        labels.shuffle(&mut rng);
        let emb: BTreeMap<NodeId, Vec<f64>> =
            (0..300).map(|i| (NodeId(i), (0..8).map(|_| normal(&mut rng)).collect())).collect();
        total += node_classification_eval(&emb, &single(&labels), &EvalConfig::default(), seed).unwrap().micro_f1;
    }
    let mean = total / runs as f64;
    assert!((mean - 0.5).abs() <= 0.1, "mean micro-F1 {mean}");
}

#[test]
fn multi_label_thresholds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut labels = BTreeMap::new();
    let mut emb = BTreeMap::new();
    for i in 0..200u32 {
        let (a, b) = (rng.gen_bool(0.5), rng.gen_bool(0.5));
        let mut set = BTreeSet::new();
        if a {
            set.insert(LabelId(0));
        }
        if b || !a {
            set.insert(LabelId(1));
        }
        let x = vec![if a { 2.0 } else { -2.0 } + 0.3 * normal(&mut rng), if b || !a { 2.0 } else { -2.0 } + 0.3 * normal(&mut rng)];
        labels.insert(NodeId(i), set);
        emb.insert(NodeId(i), x);
    }
    let s = node_classification_eval(&emb, &labels, &EvalConfig::default(), 0).unwrap();
    assert!(s.micro_f1 > 0.95 && s.macro_f1 > 0.95, "{s:?}");
}

#[test]
fn random_scores_give_half_auc() {
    let mut total = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos: Vec<f64> = (0..200).map(|_| rng.gen()).collect();
        let neg: Vec<f64> = (0..200).map(|_| rng.gen()).collect();
        total += auc(&pos, &neg);
    }
    assert!((total / 20.0 - 0.5).abs() <= 0.05);
}

fn pair_count_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

proptest! {
    #[test]
    fn auc_equals_pair_count(pos in prop::collection::vec(0u8..20, 1..40), neg in prop::collection::vec(0u8..20, 1..40)) {
        // small integer scores force many ties
        let pos: Vec<f64> = pos.into_iter().map(f64::from).collect();
        let neg: Vec<f64> = neg.into_iter().map(f64::from).collect();
        prop_assert!((auc(&pos, &neg) - pair_count_auc(&pos, &neg)).abs() < 1e-12);
    }

    #[test]
    fn single_label_micro_is_accuracy(truth in prop::collection::vec(0usize..4, 1..60), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred: Vec<usize> = truth.iter().map(|&t| if rng.gen_bool(0.6) { t } else { rng.gen_range(0..4) }).collect();
        let as_sets = |v: &[usize]| v.iter().map(|&c| BTreeSet::from([c])).collect::<Vec<_>>();
        let s = f1_scores(&as_sets(&truth), &as_sets(&pred), 4);
        let acc = truth.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
        prop_assert!((s.micro_f1 - acc).abs() < 1e-12);
        prop_assert!(s.macro_f1 >= 0.0 && s.macro_f1 <= 1.0);
    }
}

/// Two dense communities with a few bridges; node `i` is in community `i % 2`.
fn homophilous_graph(seed: u64) -> hin_embed_core::HinGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = HinBuilder::new();
    for i in 0..80usize {
        for j in i + 1..80 {
            let p = if i % 2 == j % 2 { 0.15 } else { 0.005 };
            if rng.gen_bool(p) {
                b.add_edge(&i.to_string(), "t", "r", &j.to_string(), "t").unwrap();
            }
        }
    }
    b.build().unwrap()
}

#[test]
fn community_embeddings_predict_links() {
    let g = homophilous_graph(4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let emb: BTreeMap<NodeId, Vec<f64>> = g
        .nodes()
        .map(|v| {
            let name: u32 = g.node_name(v).parse().unwrap();
            let s = if name % 2 == 0 { 1.0 } else { -1.0 };
            (v, vec![s + 0.1 * normal(&mut rng), s + 0.1 * normal(&mut rng)])
        })
        .collect();
    let a = link_prediction_eval(&g, &emb, &EvalConfig::default(), 0).unwrap();
    // half of the uniform negatives are same-community pairs, which tie with
    // the positives up to noise, so the ceiling is about 0.75
    assert!(a > 0.65, "{a}");
    let noise: BTreeMap<NodeId, Vec<f64>> = g.nodes().map(|v| (v, vec![normal(&mut rng), normal(&mut rng)])).collect();
    let r = link_prediction_eval(&g, &noise, &EvalConfig::default(), 0).unwrap();
    assert!((r - 0.5).abs() < 0.15, "{r}");
}

#[test]
fn split_hides_whole_pairs() {
    let g = homophilous_graph(6);
    let split = split_links(&g, 0.2, 3).unwrap();
    let hidden: BTreeSet<(NodeId, NodeId)> = split.hidden_pairs.iter().copied().collect();
    assert!(split.observed.edges().iter().all(|e| !hidden.contains(&e.pair())));
    assert_eq!(split.observed.edge_count() + split.hidden_edges.len(), g.edge_count());
    assert_eq!(split.observed.node_count(), g.node_count());
    let neg = sample_non_edges(&g, 300, &hidden, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(neg.len(), 300);
    assert!(neg.iter().all(|&(a, b)| a != b && !g.neighbors(a).contains(&b) && !hidden.contains(&(a, b))));
    assert_eq!(neg.iter().collect::<BTreeSet<_>>().len(), 300);
}
