//! Seeded planted-community heterogeneous graphs for tests and demos.
//!
//! Every relation cuts each community into chunks and joins each chunk with
//! a chunk of another community into one connected group, so a relation's
//! components are small, mix two communities, and pair communities
//! differently from the other relations. Edges are mostly intra-community.
//! Features are a per-community centroid plus Gaussian noise; labels are the
//! community.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{HinBuilder, HinGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub nodes: usize,
    pub communities: usize,
    pub relations: usize,
    pub node_types: usize,
    pub feature_dim: usize,
    /// Nodes per community chunk; groups hold two chunks.
    pub chunk: usize,
    /// Extra intra-community edges per node and relation, on top of the spanning trees.
    pub extra_edges: f64,
    pub feature_noise: f64,
    pub with_labels: bool,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            nodes: 600,
            communities: 6,
            relations: 4,
            node_types: 3,
            feature_dim: 16,
            chunk: 15,
            extra_edges: 1.0,
            feature_noise: 3.0,
            with_labels: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedHin {
    pub graph: HinGraph,
    /// Community of each node, indexed by node id.
    pub community: Vec<usize>,
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Builds the graph. Node `v` is named `v`, has type `t{v % node_types}` and
/// belongs to community `v % communities`.
pub fn planted_hin(cfg: &PlantedConfig) -> Result<PlantedHin> {
    if cfg.communities < 2 || cfg.relations == 0 || cfg.node_types == 0 || cfg.chunk == 0 {
        return Err(Error::InvalidConfig("planted graph needs >= 2 communities, >= 1 relation, type and chunk"));
    }
    if cfg.nodes < 2 * cfg.communities {
        return Err(Error::InvalidConfig("planted graph needs at least two nodes per community"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let community: Vec<usize> = (0..cfg.nodes).map(|v| v % cfg.communities).collect();
    let names: Vec<_> = (0..cfg.nodes).map(|v| v.to_string()).collect();
    let types: Vec<_> = (0..cfg.node_types).map(|t| format!("t{t}")).collect();
    let mut b = HinBuilder::new();
    for v in 0..cfg.nodes {
        b.add_node(&names[v], &types[v % cfg.node_types])?;
    }
    let add = |b: &mut HinBuilder, u: usize, v: usize, rel: &str| -> Result<()> {
        b.add_edge(&names[u], &types[u % cfg.node_types], rel, &names[v], &types[v % cfg.node_types]).map(|_| ())
    };

    for r in 0..cfg.relations {
        let rel = format!("r{r}");
        let offset = 1 + r % (cfg.communities - 1);
        let chunks: Vec<Vec<Vec<usize>>> = (0..cfg.communities)
            .map(|c| {
                let mut members: Vec<usize> = (c..cfg.nodes).step_by(cfg.communities).collect();
                members.shuffle(&mut rng);
                members.chunks(cfg.chunk).map(<[usize]>::to_vec).collect()
            })
            .collect();
        for c in 0..cfg.communities {
            let partner = (c + offset) % cfg.communities;
            // chunks of `c` at even positions pair with odd chunks of `partner`
            for (i, a) in chunks[c].iter().enumerate().step_by(2) {
                let tree = |b: &mut HinBuilder, xs: &[usize], rng: &mut ChaCha8Rng| -> Result<()> {
                    for j in 1..xs.len() {
                        let k = rng.gen_range(0..j);
                        add(b, xs[j], xs[k], &rel)?;
                    }
                    Ok(())
                };
                tree(&mut b, a, &mut rng)?;
                if let Some(other) = chunks[partner].get(i + 1) {
                    tree(&mut b, other, &mut rng)?;
                    add(&mut b, a[rng.gen_range(0..a.len())], other[rng.gen_range(0..other.len())], &rel)?;
                }
            }
        }
        // remaining odd chunks stay single-community groups
        for c in 0..cfg.communities {
            let back = (c + cfg.communities - offset) % cfg.communities;
            for (i, a) in chunks[c].iter().enumerate().skip(1).step_by(2) {
                if chunks[back].len() > i - 1 {
                    continue;
                }
                for j in 1..a.len() {
                    let k = rng.gen_range(0..j);
                    add(&mut b, a[j], a[k], &rel)?;
                }
            }
        }
        for chunk_list in &chunks {
            for a in chunk_list {
                let extra = libm::round(cfg.extra_edges * a.len() as f64) as usize;
                for _ in 0..extra {
                    if a.len() < 2 {
                        break;
                    }
                    let (x, y) = (a[rng.gen_range(0..a.len())], a[rng.gen_range(0..a.len())]);
                    if x != y {
                        add(&mut b, x, y, &rel)?;
                    }
                }
            }
        }
    }

    let centroids: Vec<Vec<f64>> =
        (0..cfg.communities).map(|_| (0..cfg.feature_dim).map(|_| gaussian(&mut rng)).collect()).collect();
    if cfg.feature_dim > 0 {
        for v in 0..cfg.nodes {
            let x = centroids[community[v]].iter().map(|c| c + cfg.feature_noise * gaussian(&mut rng)).collect();
            b.set_features(&names[v], x)?;
        }
    }
    if cfg.with_labels {
        for v in 0..cfg.nodes {
            b.add_label(&names[v], &format!("c{}", community[v]))?;
        }
    }
    Ok(PlantedHin { graph: b.build()?, community })
}
