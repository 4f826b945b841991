//! Encoder/decoder abstraction over a fixed sequence pool.
//!
//! [`ReferenceLatentModel`] is a deterministic stand-in for a trained
//! generative model: it embeds sequences into a `d`-dimensional latent space
//! whose geometry is organized by chosen descriptors with tunable strength
//! `lambda`, and decodes arbitrary latent points by nearest-neighbor lookup
//! over the pool. `lambda = 1` aligns the leading coordinates with the
//! standardized organizing descriptors; `lambda = 0` leaves only seeded
//! random orthogonal directions built from hashed positional n-gram counts.
//! As a convention, `lambda` plays the role of label availability when
//! emulating semi-supervised organization (1.0 for fully labelled, ~0.1 for
//! scarce labels).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::peptides::{
    fit_normalization, DescriptorVector, FeatureRegistry, NormalizationStats, PeptideError,
    Sequence,
};
use crate::rng::{fnv1a, rng_from_seed};

/// Pool embeddings are rescaled so the largest norm is `POOL_RADIUS`,
/// keeping every pool point (and any PCA score of it) inside the default
/// [-10, 10] search box.
const POOL_RADIUS: f64 = 8.0;

/// Hash-feature count for a given latent dimension. Kept well below the
/// dimension so the pool has low intrinsic dimension inside the box
/// (trained encoders concentrate data the same way); with d iid hash
/// coordinates instead, every pool member sits in a thin shell far from
/// any low-dimensional projection plane and nearest-neighbor decoding
/// degenerates to a handful of sequences.
fn hash_feature_count(dim: usize) -> usize {
    (dim / 4).clamp(2, 16)
}

/// Minimum number of pool sequences accepted by the fit.
pub const MIN_POOL: usize = 10;

#[derive(Debug, Error)]
pub enum LatentError {
    #[error("pool of {0} sequences is too small (need at least {MIN_POOL})")]
    PoolTooSmall(usize),
    #[error("organization strength {0} outside [0, 1]")]
    BadLambda(f64),
    #[error("latent dimension {dim} invalid (need >= 2 and >= {organizing} organizing features)")]
    BadDim { dim: usize, organizing: usize },
    #[error("latent point has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Feature(#[from] PeptideError),
}

/// Point in a model's latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    coords: Vec<f64>,
}

impl LatentPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        LatentPoint { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for LatentPoint {
    fn from(coords: Vec<f64>) -> Self {
        LatentPoint::new(coords)
    }
}

/// Deterministic descriptor-organized latent model over a sequence pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "SavedLatentModel", into = "SavedLatentModel")]
pub struct ReferenceLatentModel {
    dim: usize,
    lambda: f64,
    seed: u64,
    organizing: Vec<String>,
    descriptor_stats: Option<NormalizationStats>,
    bucket_mean: Vec<f64>,
    /// Population std per hash bucket; 0 marks a dead bucket (left at 0).
    bucket_std: Vec<f64>,
    /// d x H matrix with orthonormal columns mixing standardized bucket
    /// counts into the latent space.
    hash_directions: DMatrix<f64>,
    scale: f64,
    scales_version: u32,
    pool: Vec<Sequence>,
    embeddings: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

/// Serialized form: caches are rebuilt deterministically on load.
#[derive(Serialize, Deserialize)]
struct SavedLatentModel {
    dim: usize,
    lambda: f64,
    seed: u64,
    organizing: Vec<String>,
    descriptor_stats: Option<NormalizationStats>,
    bucket_mean: Vec<f64>,
    bucket_std: Vec<f64>,
    hash_directions: DMatrix<f64>,
    scale: f64,
    scales_version: u32,
    pool: Vec<Sequence>,
}

impl From<ReferenceLatentModel> for SavedLatentModel {
    fn from(m: ReferenceLatentModel) -> Self {
        SavedLatentModel {
            dim: m.dim,
            lambda: m.lambda,
            seed: m.seed,
            organizing: m.organizing,
            descriptor_stats: m.descriptor_stats,
            bucket_mean: m.bucket_mean,
            bucket_std: m.bucket_std,
            hash_directions: m.hash_directions,
            scale: m.scale,
            scales_version: m.scales_version,
            pool: m.pool,
        }
    }
}

impl From<SavedLatentModel> for ReferenceLatentModel {
    fn from(s: SavedLatentModel) -> Self {
        let mut m = ReferenceLatentModel {
            dim: s.dim,
            lambda: s.lambda,
            seed: s.seed,
            organizing: s.organizing,
            descriptor_stats: s.descriptor_stats,
            bucket_mean: s.bucket_mean,
            bucket_std: s.bucket_std,
            hash_directions: s.hash_directions,
            scale: s.scale,
            scales_version: s.scales_version,
            pool: s.pool,
            embeddings: Vec::new(),
            index: HashMap::new(),
        };
        m.rebuild_caches();
        m
    }
}

/// Fit a reference latent model on a pool of sequences.
///
/// Latent coordinates are `lambda * (descriptor-aligned directions)
/// + (1 - lambda) * (seeded random orthogonal directions of hashed
/// positional n-gram features)`, rescaled so the pool fits a ball of radius
/// 8. Deterministic given the seed.
pub fn fit_reference_model(
    pool: &[Sequence],
    dim: usize,
    organizing: &[String],
    lambda: f64,
    seed: u64,
) -> Result<ReferenceLatentModel, LatentError> {
    if pool.len() < MIN_POOL {
        return Err(LatentError::PoolTooSmall(pool.len()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(LatentError::BadLambda(lambda));
    }
    if dim < 2 || dim < organizing.len() {
        return Err(LatentError::BadDim { dim, organizing: organizing.len() });
    }

    let registry = FeatureRegistry::standard();
    let descriptors: Vec<DescriptorVector> = pool
        .iter()
        .map(|s| registry.compute(s, organizing))
        .collect::<Result<_, _>>()?;
    let descriptor_stats = if organizing.is_empty() {
        None
    } else {
        Some(fit_normalization(&descriptors)?)
    };

    // Bucket statistics over the pool.
    let buckets = hash_feature_count(dim);
    let counts: Vec<Vec<f64>> = pool.iter().map(|s| ngram_counts(s, buckets, seed)).collect();
    let n = pool.len() as f64;
    let mut bucket_mean = vec![0.0; buckets];
    for c in &counts {
        for (m, v) in bucket_mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    for m in &mut bucket_mean {
        *m /= n;
    }
    let mut bucket_std = vec![0.0; buckets];
    for c in &counts {
        for ((s, v), m) in bucket_std.iter_mut().zip(c).zip(&bucket_mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut bucket_std {
        *s = (*s / n).sqrt();
    }

    let hash_directions = random_orthonormal_columns(dim, buckets, seed);

    let mut model = ReferenceLatentModel {
        dim,
        lambda,
        seed,
        organizing: organizing.to_vec(),
        descriptor_stats,
        bucket_mean,
        bucket_std,
        hash_directions,
        scale: 1.0,
        scales_version: crate::peptides::scales::SCALES_VERSION,
        pool: pool.to_vec(),
        embeddings: Vec::new(),
        index: HashMap::new(),
    };

    // Calibrate the spread on unscaled embeddings.
    let max_norm = pool
        .iter()
        .map(|s| {
            let z = model.raw_embedding(s);
            z.iter().map(|c| c * c).sum::<f64>().sqrt()
        })
        .fold(0.0f64, f64::max);
    model.scale = if max_norm > 0.0 { POOL_RADIUS / max_norm } else { 1.0 };
    model.rebuild_caches();
    Ok(model)
}

impl ReferenceLatentModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn organizing(&self) -> &[String] {
        &self.organizing
    }

    pub fn pool(&self) -> &[Sequence] {
        &self.pool
    }

    /// Stored embedding of each pool sequence, in pool order.
    pub fn pool_embeddings(&self) -> &[Vec<f64>] {
        &self.embeddings
    }

    fn rebuild_caches(&mut self) {
        self.embeddings = self.pool.iter().map(|s| self.compute_embedding(s)).collect();
        let mut index = HashMap::new();
        for (i, s) in self.pool.iter().enumerate() {
            index.entry(s.to_string()).or_insert(i);
        }
        self.index = index;
    }

    fn raw_embedding(&self, seq: &Sequence) -> Vec<f64> {
        let mut z = vec![0.0; self.dim];
        if let Some(stats) = &self.descriptor_stats {
            let registry = FeatureRegistry::standard();
            let dv = registry
                .compute(seq, &self.organizing)
                .expect("organizing features validated at fit time");
            let std_dv = stats.apply(&dv).expect("descriptor names fixed at fit time");
            for (j, v) in std_dv.values().iter().enumerate() {
                z[j] += self.lambda * v;
            }
        }
        let buckets = self.bucket_mean.len();
        let counts = ngram_counts(seq, buckets, self.seed);
        let mut u = DVector::zeros(buckets);
        for (h, (c, (m, s))) in counts
            .iter()
            .zip(self.bucket_mean.iter().zip(&self.bucket_std))
            .enumerate()
        {
            u[h] = if *s > 0.0 { (c - m) / s } else { 0.0 };
        }
        let mixed = &self.hash_directions * u;
        for (zj, mj) in z.iter_mut().zip(mixed.iter()) {
            *zj += (1.0 - self.lambda) * mj;
        }
        z
    }

    fn compute_embedding(&self, seq: &Sequence) -> Vec<f64> {
        let mut z = self.raw_embedding(seq);
        for c in &mut z {
            *c *= self.scale;
        }
        z
    }

    /// Encode a sequence. Pool members return their stored embedding.
    pub fn encode(&self, seq: &Sequence) -> LatentPoint {
        if let Some(&i) = self.index.get(&seq.to_string()) {
            return LatentPoint::new(self.embeddings[i].clone());
        }
        LatentPoint::new(self.compute_embedding(seq))
    }

    /// Decode a latent point to the pool sequence with the nearest
    /// embedding; ties break toward the lowest pool index.
    pub fn decode(&self, z: &LatentPoint) -> Result<Sequence, LatentError> {
        let i = self.decode_index(z)?;
        Ok(self.pool[i].clone())
    }

    /// Index of the nearest pool member.
    pub fn decode_index(&self, z: &LatentPoint) -> Result<usize, LatentError> {
        if z.dim() != self.dim {
            return Err(LatentError::DimensionMismatch { expected: self.dim, got: z.dim() });
        }
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, e) in self.embeddings.iter().enumerate() {
            let d: f64 = e
                .iter()
                .zip(z.coords())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Ok(best)
    }
}

/// Positional n-gram counts (n = 1..=3) hashed into `buckets` buckets with
/// a seed-salted FNV hash.
fn ngram_counts(seq: &Sequence, buckets: usize, seed: u64) -> Vec<f64> {
    let codes: Vec<u8> = seq.residues().iter().map(|r| r.code() as u8).collect();
    let mut counts = vec![0.0; buckets];
    let mut key = Vec::with_capacity(16);
    for n in 1..=3usize.min(codes.len()) {
        for i in 0..=(codes.len() - n) {
            key.clear();
            key.extend_from_slice(&seed.to_le_bytes());
            key.push(n as u8);
            key.extend_from_slice(&(i as u32).to_le_bytes());
            key.extend_from_slice(&codes[i..i + n]);
            let h = fnv1a(&key) as usize % buckets;
            counts[h] += 1.0;
        }
    }
    counts
}

/// Random d x h matrix with orthonormal columns: QR of a seeded Gaussian
/// matrix with the sign convention R_jj > 0, which makes the factor unique.
fn random_orthonormal_columns(dim: usize, h: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(crate::rng::derive_seed(seed, "latent-directions", 0));
    let g = DMatrix::from_fn(dim, h, |_, _| crate::norm::standard_normal(&mut rng));
    let qr = g.qr();
    let mut q = qr.q().columns(0, h).into_owned();
    let r = qr.r();
    for j in 0..h {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}
