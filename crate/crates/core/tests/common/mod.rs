#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use hin_embed_core::{Executor, HinBuilder, HinGraph, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random graph with `n` nodes (all registered), `relations` relations and
/// up to `edges` random edges. Node `i` is named `i`.
pub fn random_hin(seed: u64, n: usize, relations: usize, edges: usize) -> HinGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = HinBuilder::new();
    for i in 0..n {
        b.add_node(&i.to_string(), if i % 2 == 0 { "a" } else { "b" }).unwrap();
    }
    for r in 0..relations {
        b.add_relation(&format!("r{r}"));
    }
    for _ in 0..edges {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let r = rng.gen_range(0..relations);
        let ty = |x: usize| if x % 2 == 0 { "a" } else { "b" };
        b.add_edge(&u.to_string(), ty(u), &format!("r{r}"), &v.to_string(), ty(v)).unwrap();
    }
    b.build().unwrap()
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Components of the endpoints of `edges`, as a set of sorted node sets.
pub fn union_find_components(edges: &[(NodeId, NodeId)]) -> BTreeSet<Vec<NodeId>> {
    let n = edges.iter().map(|(a, b)| a.0.max(b.0) as usize + 1).max().unwrap_or(0);
    let mut uf = UnionFind::new(n);
    let mut touched = BTreeSet::new();
    for &(a, b) in edges {
        uf.union(a.index(), b.index());
        touched.insert(a);
        touched.insert(b);
    }
    let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for v in touched {
        groups.entry(uf.find(v.index())).or_default().push(v);
    }
    groups.into_values().collect()
}

/// Spreads items round-robin over `self.0` scoped threads, results in input order.
pub struct Threaded(pub usize);

impl Executor for Threaded {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        let n = items.len();
        let lanes = self.0.max(1);
        let mut chunks: Vec<Vec<(usize, T)>> = (0..lanes).map(|_| Vec::new()).collect();
        for (i, t) in items.into_iter().enumerate() {
            chunks[i % lanes].push((i, t));
        }
        let mut slots: Vec<Option<R>> = (0..n).map(|_| None).collect();
        let f = &f;
        std::thread::scope(|s| {
            let handles: Vec<_> = chunks
                .into_iter()
                .rev()
                .map(|c| s.spawn(move || c.into_iter().map(|(i, t)| (i, f(t))).collect::<Vec<_>>()))
                .collect();
            for h in handles {
                for (i, r) in h.join().unwrap() {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(Option::unwrap).collect()
    }

    fn parallelism(&self) -> usize {
        self.0
    }
}
