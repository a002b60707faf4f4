//! Extended orthogonal Procrustes alignment of partition embeddings onto the
//! anchor-network space, and multi-context averaging.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ids::{NodeId, PartitionId};
use crate::infomax::EmbeddingMatrix;
use crate::linalg::{svd_jacobi, Matrix};

/// A node embedded both in a partition (`z_hat`) and in the anchor network (`g_hat`).
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorPair {
    pub node_id: NodeId,
    pub z_hat: Vec<f64>,
    pub g_hat: Vec<f64>,
}

/// Why a map fell back to something simpler than the full closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignFallback {
    /// One anchor: pure translation.
    SingleAnchor,
    /// Anchor rows in the partition space are all identical: pure translation.
    DegenerateSource,
    /// Anchor rows in the target space are all identical: pure translation.
    DegenerateTarget,
    /// No anchors at all: identity map.
    NoAnchors,
}

/// `x ↦ c·x·T + t` for row vectors `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap {
    pub rotation: Matrix,
    pub scale: f64,
    pub translation: Vec<f64>,
    pub source_partition: PartitionId,
    /// Number of anchor pairs the map was fitted on.
    pub mu: usize,
    pub fallback: Option<AlignFallback>,
}

impl AlignmentMap {
    pub fn identity(dim: usize, source_partition: PartitionId) -> Self {
        AlignmentMap {
            rotation: Matrix::identity(dim),
            scale: 1.0,
            translation: vec![0.0; dim],
            source_partition,
            mu: 0,
            fallback: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.rows()
    }

    pub fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = self.translation.clone();
        for (i, &xi) in x.iter().enumerate().take(d) {
            let r = self.rotation.row(i);
            for (o, &tij) in out.iter_mut().zip(r) {
                *o += self.scale * xi * tij;
            }
        }
        out
    }
}

fn stack(pairs: &[AnchorPair], d: usize) -> Result<(Matrix, Matrix)> {
    let mut z = Vec::with_capacity(pairs.len() * d);
    let mut g = Vec::with_capacity(pairs.len() * d);
    for p in pairs {
        if p.z_hat.len() != d || p.g_hat.len() != d {
            return Err(Error::ShapeMismatch("anchor pair dimensions differ"));
        }
        z.extend_from_slice(&p.z_hat);
        g.extend_from_slice(&p.g_hat);
    }
    let (z, g) = (Matrix::from_vec(pairs.len(), d, z)?, Matrix::from_vec(pairs.len(), d, g)?);
    if !z.is_finite() || !g.is_finite() {
        return Err(Error::NonFinite("anchor embeddings"));
    }
    Ok((z, g))
}

fn translation_only(z_mean: &[f64], g_mean: &[f64], source: PartitionId, mu: usize, why: AlignFallback) -> AlignmentMap {
    let d = z_mean.len();
    AlignmentMap {
        rotation: Matrix::identity(d),
        scale: 1.0,
        translation: g_mean.iter().zip(z_mean).map(|(g, z)| g - z).collect(),
        source_partition: source,
        mu,
        fallback: Some(why),
    }
}

/// Least-squares rotation, isotropic scale and translation taking the
/// partition-space anchors onto the anchor-space ones.
///
/// Both sides are centered; with `S = Z_cᵀ G_c = U Σ Vᵀ` the rotation is
/// `U Vᵀ`, the scale `tr Σ / tr(Z_cᵀ Z_c)`, and the translation
/// `mean(G) - c·mean(Z)·T`. Reflections are allowed.
pub fn fit_procrustes(pairs: &[AnchorPair], source: PartitionId) -> Result<AlignmentMap> {
    let Some(first) = pairs.first() else {
        return Err(Error::TooFewAnchors);
    };
    let d = first.z_hat.len();
    let mu = pairs.len();
    let (z, g) = stack(pairs, d)?;
    let (z_mean, g_mean) = (z.column_means(), g.column_means());
    if mu == 1 {
        log::warn!("partition {source}: single anchor, translation-only alignment");
        return Ok(translation_only(&z_mean, &g_mean, source, mu, AlignFallback::SingleAnchor));
    }
    let (zc, gc) = (z.center_by(&z_mean), g.center_by(&g_mean));
    let z_var = zc.as_slice().iter().map(|x| x * x).sum::<f64>();
    let z_energy = z.as_slice().iter().map(|x| x * x).sum::<f64>();
    if z_var <= 1e-24 * z_energy || z_var == 0.0 {
        log::warn!("partition {source}: anchors collapse to one point, translation-only alignment");
        return Ok(translation_only(&z_mean, &g_mean, source, mu, AlignFallback::DegenerateSource));
    }
    let s = zc.t_matmul(&gc)?;
    let svd = svd_jacobi(&s)?;
    let rotation = svd.u.matmul_t(&svd.v)?;
    let scale = svd.sigma.iter().sum::<f64>() / z_var;
    if !(scale > 0.0 && scale.is_finite()) {
        log::warn!("partition {source}: anchor targets collapse to one point, translation-only alignment");
        return Ok(translation_only(&z_mean, &g_mean, source, mu, AlignFallback::DegenerateTarget));
    }
    let mut translation = g_mean;
    for (i, &zm) in z_mean.iter().enumerate() {
        for (t, &r) in translation.iter_mut().zip(rotation.row(i)) {
            *t -= scale * zm * r;
        }
    }
    Ok(AlignmentMap { rotation, scale, translation, source_partition: source, mu, fallback: None })
}

/// Applies `m` to every row of `z`.
pub fn apply_map(z: &Matrix, m: &AlignmentMap) -> Result<Matrix> {
    if z.cols() != m.dim() {
        return Err(Error::ShapeMismatch("embedding width != map dimension"));
    }
    let mut out = z.matmul(&m.rotation)?;
    for i in 0..out.rows() {
        for (x, t) in out.row_mut(i).iter_mut().zip(&m.translation) {
            *x = m.scale * *x + t;
        }
    }
    Ok(out)
}

/// Frobenius norm of `c·Ẑ·T + jᵀt − Ĝ`.
pub fn alignment_residual(pairs: &[AnchorPair], m: &AlignmentMap) -> f64 {
    let sq: f64 = pairs
        .iter()
        .map(|p| {
            m.apply_row(&p.z_hat).iter().zip(&p.g_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum();
    libm::sqrt(sq)
}

/// Mean of each node's context vectors.
pub fn aggregate_contexts(aligned: BTreeMap<NodeId, Vec<Vec<f64>>>) -> Result<BTreeMap<NodeId, Vec<f64>>> {
    aligned
        .into_iter()
        .map(|(v, ctx)| {
            let first = ctx.first().ok_or(Error::EmptyContextList(v))?;
            let mut mean = vec![0.0; first.len()];
            for c in &ctx {
                if c.len() != mean.len() {
                    return Err(Error::ShapeMismatch("context vectors differ in width"));
                }
                mean.iter_mut().zip(c).for_each(|(m, x)| *m += x);
            }
            let n = ctx.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            Ok((v, mean))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub partition_id: PartitionId,
    pub mu: usize,
    pub residual: f64,
    pub scale: f64,
    pub fallback: Option<AlignFallback>,
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub embeddings: BTreeMap<NodeId, Vec<f64>>,
    pub maps: Vec<AlignmentMap>,
    pub reports: Vec<AlignmentReport>,
}

/// Anchor pairs between one partition's embeddings and the anchor embeddings.
pub fn anchor_pairs(part: &EmbeddingMatrix, anchor: &EmbeddingMatrix) -> Vec<AnchorPair> {
    part.node_ids
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| {
            anchor.row_of(v).map(|g| AnchorPair { node_id: v, z_hat: part.z.row(i).to_vec(), g_hat: g.to_vec() })
        })
        .collect()
}

/// Fits and applies one map per partition, then averages every node's
/// aligned contexts. Nodes only present in the anchor network keep their
/// anchor-space embedding. A partition without anchors keeps an identity map.
pub fn align_all<E: Executor>(
    partitions: &[EmbeddingMatrix],
    anchor: &EmbeddingMatrix,
    exec: &E,
) -> Result<Alignment> {
    let d = anchor.dim();
    if partitions.iter().any(|p| p.dim() != d) {
        return Err(Error::ShapeMismatch("partition and anchor embedding widths differ"));
    }
    let fitted = exec.map(partitions.iter().collect(), |part| -> Result<(Matrix, AlignmentMap, AlignmentReport)> {
        let pairs = anchor_pairs(part, anchor);
        let map = match fit_procrustes(&pairs, part.partition_id) {
            Ok(m) => m,
            Err(Error::TooFewAnchors) => {
                log::warn!("partition {} shares no anchor nodes; left unaligned", part.partition_id);
                AlignmentMap { fallback: Some(AlignFallback::NoAnchors), ..AlignmentMap::identity(d, part.partition_id) }
            }
            Err(e) => return Err(e),
        };
        let report = AlignmentReport {
            partition_id: part.partition_id,
            mu: map.mu,
            residual: alignment_residual(&pairs, &map),
            scale: map.scale,
            fallback: map.fallback,
        };
        Ok((apply_map(&part.z, &map)?, map, report))
    });

    let mut contexts: BTreeMap<NodeId, Vec<Vec<f64>>> = BTreeMap::new();
    let mut maps = Vec::with_capacity(partitions.len());
    let mut reports = Vec::with_capacity(partitions.len());
    for (part, res) in partitions.iter().zip(fitted) {
        let (aligned, map, report) = res?;
        for (i, &v) in part.node_ids.iter().enumerate() {
            contexts.entry(v).or_default().push(aligned.row(i).to_vec());
        }
        maps.push(map);
        reports.push(report);
    }
    for (i, &v) in anchor.node_ids.iter().enumerate() {
        contexts.entry(v).or_insert_with(|| vec![anchor.z.row(i).to_vec()]);
    }
    Ok(Alignment { embeddings: aggregate_contexts(contexts)?, maps, reports })
}

/// Averages raw per-partition embeddings with no alignment step.
pub fn aggregate_unaligned(partitions: &[EmbeddingMatrix]) -> Result<BTreeMap<NodeId, Vec<f64>>> {
    let mut contexts: BTreeMap<NodeId, Vec<Vec<f64>>> = BTreeMap::new();
    for part in partitions {
        for (i, &v) in part.node_ids.iter().enumerate() {
            contexts.entry(v).or_default().push(part.z.row(i).to_vec());
        }
    }
    aggregate_contexts(contexts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(z: &[[f64; 2]], g: &[[f64; 2]]) -> Vec<AnchorPair> {
        z.iter()
            .zip(g)
            .enumerate()
            .map(|(i, (a, b))| AnchorPair { node_id: NodeId(i as u32), z_hat: a.to_vec(), g_hat: b.to_vec() })
            .collect()
    }

    #[test]
    fn identical_sets_give_identity() {
        let z = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let m = fit_procrustes(&pairs(&z, &z), PartitionId(0)).unwrap();
        assert!(m.rotation.max_abs_diff(&Matrix::identity(2)) < 1e-8);
        assert!((m.scale - 1.0).abs() < 1e-8);
        assert!(m.translation.iter().all(|t| t.abs() < 1e-8));
    }

    #[test]
    fn apply_scales() {
        let mut m = AlignmentMap::identity(2, PartitionId(0));
        let z = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(apply_map(&z, &m).unwrap(), z);
        m.scale = 2.0;
        assert_eq!(apply_map(&z, &m).unwrap().row(0), &[2.0, 2.0]);
        assert!(matches!(apply_map(&Matrix::zeros(1, 3), &m), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn fallbacks() {
        assert_eq!(fit_procrustes(&[], PartitionId(0)), Err(Error::TooFewAnchors));
        let m = fit_procrustes(&pairs(&[[1.0, 1.0]], &[[3.0, 0.0]]), PartitionId(0)).unwrap();
        assert_eq!(m.fallback, Some(AlignFallback::SingleAnchor));
        assert_eq!(m.translation, vec![2.0, -1.0]);
        let m = fit_procrustes(&pairs(&[[1.0, 1.0], [1.0, 1.0]], &[[0.0, 0.0], [2.0, 2.0]]), PartitionId(0))
            .unwrap();
        assert_eq!(m.fallback, Some(AlignFallback::DegenerateSource));
        assert_eq!(m.scale, 1.0);
        assert_eq!(m.translation, vec![0.0, 0.0]);
    }

    #[test]
    fn contexts_average() {
        let mut ctx = BTreeMap::new();
        ctx.insert(NodeId(0), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        ctx.insert(NodeId(1), vec![vec![3.0, 4.0]]);
        let out = aggregate_contexts(ctx).unwrap();
        assert_eq!(out[&NodeId(0)], vec![0.5, 0.5]);
        assert_eq!(out[&NodeId(1)], vec![3.0, 4.0]);
        let mut empty = BTreeMap::new();
        empty.insert(NodeId(7), Vec::new());
        assert_eq!(aggregate_contexts(empty), Err(Error::EmptyContextList(NodeId(7))));
    }

    #[test]
    fn partition_equal_to_anchor_is_untouched() {
        let z = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]]).unwrap();
        let ids = vec![NodeId(0), NodeId(1), NodeId(2)];
        let part = EmbeddingMatrix { partition_id: PartitionId(0), node_ids: ids.clone(), z: z.clone() };
        let anchor = EmbeddingMatrix { partition_id: PartitionId::ANCHOR, node_ids: ids, z };
        let out = align_all(&[part], &anchor, &crate::exec::Sequential).unwrap();
        for (i, v) in anchor.node_ids.iter().enumerate() {
            for (a, b) in out.embeddings[v].iter().zip(anchor.z.row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
