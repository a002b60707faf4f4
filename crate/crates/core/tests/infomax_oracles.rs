use hin_embed_core::infomax::{
    corrupt, dgi_loss, discriminator, gcn_forward, loss, readout, train_worker, worker_seed, WorkerConfig,
    WorkerParams,
};
use hin_embed_core::linalg::Matrix;
use hin_embed_core::subnet::{induce_partition, SparseAdjacency};
use hin_embed_core::{HinBuilder, PartitionId};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pairs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<(usize, usize)> {
    (0..m).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn prelu(x: f64, a: f64) -> f64 {
    if x >= 0.0 { x } else { a * x }
}

fn dense_forward(pairs: &[(usize, usize)], n: usize, x: &Matrix, params: &WorkerParams) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::identity(n, n);
    for &(i, j) in pairs {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let norm = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (deg[i] * deg[j]).sqrt());
    let mut h = DMatrix::from_row_slice(n, x.cols(), x.as_slice());
    for (w, &slope) in params.weights.iter().zip(&params.slopes) {
        let w = DMatrix::from_row_slice(w.rows(), w.cols(), w.as_slice());
        h = (&norm * h * w).map(|v| prelu(v, slope));
    }
    h
}

#[test]
fn gcn_matches_dense_reference() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 10;
        let pairs = random_pairs(&mut rng, n, 18);
        let adj = SparseAdjacency::from_pairs(n, pairs.iter().copied());
        let x = random_matrix(&mut rng, n, 5);
        let layers = 1 + (seed as usize % 3);
        let mut params = WorkerParams::init(5, 4, layers, &mut rng);
        params.slopes.iter_mut().for_each(|s| *s = rng.gen_range(0.0..1.0));
        let got = gcn_forward(&x, &adj, &params).unwrap();
        let want = dense_forward(&pairs, n, &x, &params);
        for i in 0..n {
            for j in 0..4 {
                assert!((got[(i, j)] - want[(i, j)]).abs() < 1e-12, "seed {seed} ({i},{j})");
            }
        }
    }
}

#[test]
fn readout_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z = random_matrix(&mut rng, 7, 4);
    let s = readout(&z);
    for (j, sj) in s.iter().enumerate() {
        let mean = (0..7).map(|i| z[(i, j)]).sum::<f64>() / 7.0;
        assert!((sj - 1.0 / (1.0 + (-mean).exp())).abs() < 1e-15);
        assert!(*sj > 0.0 && *sj < 1.0);
    }
}

#[test]
fn discriminator_matches_step_by_step() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 1 + seed as usize % 5;
        let mut p = WorkerParams::init(3, d, 1, &mut rng);
        p.disc_bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        p.disc_slope = rng.gen_range(0.0..1.0);
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let joined: Vec<f64> = z.iter().chain(&s).copied().collect();
        let mut logit = 0.0;
        for j in 0..d {
            let mut h = p.disc_bias[j];
            for (i, x) in joined.iter().enumerate() {
                h += x * p.disc_weight[(i, j)];
            }
            logit += prelu(h, p.disc_slope) * p.disc_proj[j];
        }
        let want = 1.0 / (1.0 + (-logit).exp());
        assert!((discriminator(&z, &s, &p).unwrap() - want).abs() < 1e-14);
    }
}

proptest! {
    #[test]
    fn loss_matches_direct_sum(pos in prop::collection::vec(0.0f64..1.0, 1..20), neg in prop::collection::vec(0.0f64..1.0, 1..20)) {
        let c = |p: f64| p.clamp(1e-7, 1.0 - 1e-7);
        let mut total = 0.0;
        for p in &pos {
            total -= c(*p).ln();
        }
        for q in &neg {
            total -= (1.0 - c(*q)).ln();
        }
        let want = total / (pos.len() + neg.len()) as f64;
        let got = dgi_loss(&pos, &neg);
        prop_assert!((got - want).abs() < 1e-12);
        prop_assert!(got >= 0.0);
    }

    #[test]
    fn gcn_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = random_pairs(&mut rng, n, 2 * n);
        let x = random_matrix(&mut rng, n, 3);
        let params = WorkerParams::init(3, 4, 2, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        // node i becomes node perm[i]
        let permuted_pairs: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let mut inverse = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let px = x.select_rows(&inverse);
        let z = gcn_forward(&x, &SparseAdjacency::from_pairs(n, pairs), &params).unwrap();
        let pz = gcn_forward(&px, &SparseAdjacency::from_pairs(n, permuted_pairs), &params).unwrap();
        for i in 0..n {
            for j in 0..4 {
                prop_assert!((z[(i, j)] - pz[(perm[i], j)]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn corruption_conserves_edge_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 30;
    let adj = SparseAdjacency::from_pairs(n, random_pairs(&mut rng, n, 60));
    let x = random_matrix(&mut rng, n, 2);
    let m = adj.off_diagonal_count();
    let absent = n * (n - 1) / 2 - m;
    for seed in 0..100u64 {
        let rate = 0.05 + 0.9 * (seed as f64 / 100.0);
        let k = (rate * m as f64).ceil() as usize;
        assert!(absent >= k);
        let c = corrupt(&adj, &x, rate, &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(c.adjacency.off_diagonal_count(), m, "seed {seed}");
        assert_eq!(c.features.rows(), c.kept.len());
        assert_eq!(c.adjacency.n(), c.kept.len());
        for (new, &old) in c.kept.iter().enumerate() {
            assert_eq!(c.features.row(new), x.row(old));
        }
    }
}

fn two_communities() -> hin_embed_core::Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut b = HinBuilder::new();
    for i in 0..20usize {
        for j in i + 1..20 {
            let same = (i < 10) == (j < 10);
            if rng.gen_bool(if same { 0.6 } else { 0.05 }) {
                b.add_edge(&i.to_string(), "t", "r", &j.to_string(), "t").unwrap();
            }
        }
    }
    for i in 0..20usize {
        let base = if i < 10 { 1.0 } else { -1.0 };
        b.set_features(&i.to_string(), (0..6).map(|_| base + rng.gen_range(-0.5..0.5)).collect()).unwrap();
    }
    let g = b.build().unwrap();
    induce_partition(&g, g.nodes(), PartitionId(0), 8).unwrap()
}

#[test]
fn training_lowers_loss_and_repeats_exactly() {
    let p = two_communities();
    let cfg = WorkerConfig { dim: 8, epochs: 300, patience: 300, lr: 0.05, corruption_rate: 0.5, ..WorkerConfig::default() };
    let a = train_worker(&p, &cfg).unwrap();
    assert!(a.losses.last().unwrap() < a.losses.first().unwrap(), "{:?}", a.losses);
    // same corrupted samples scored with initial and trained parameters
    let init = WorkerParams::init(6, 8, 1, &mut ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, p.id)));
    let (mut before, mut after) = (0.0, 0.0);
    for s in 0..20 {
        let neg = corrupt(&p.adjacency, &p.features, cfg.corruption_rate, &mut ChaCha8Rng::seed_from_u64(1000 + s));
        before += loss(&init, &p.features, &p.adjacency, &neg).unwrap();
        after += loss(&a.params, &p.features, &p.adjacency, &neg).unwrap();
    }
    assert!(after < before, "{after} >= {before}");
    let b = train_worker(&p, &cfg).unwrap();
    let bits = |m: &Matrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.embedding.z), bits(&b.embedding.z));
    let other = train_worker(&p, &WorkerConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(bits(&a.embedding.z), bits(&other.embedding.z));
}
