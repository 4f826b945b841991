//! Projection faithfulness metrics between a high-dimensional point cloud
//! and its reduced counterpart.
//!
//! Trustworthiness and continuity are the Venna-Kaski rank penalties over
//! k-nearest-neighbor sets: trustworthiness charges points that intrude
//! into a low-space neighborhood without being high-space neighbors,
//! continuity charges neighbors that get lost. Steadiness and cohesiveness
//! follow the cluster-level procedure of Jeon et al.: seeded random-walk
//! clusters extracted in one space are checked for false separation or
//! false merging in the other via shared-nearest-neighbor dissimilarity.
//! All four metrics live in [0, 1] (1 = no distortion) and depend only on
//! neighbor ranks, so they are invariant to rigid rotations and uniform
//! rescaling of either space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Error)]
pub enum DistortionError {
    #[error("neighborhood size {k} too large for {n} points (need n >= 2k+2)")]
    KTooLarge { k: usize, n: usize },
    #[error("point clouds have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("subsample size {size} exceeds data size {n}")]
    SizeTooLarge { size: usize, n: usize },
    #[error("need at least one subsample")]
    NoSubsamples,
}

/// Parameters for the cluster-level metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScParams {
    pub k: usize,
    /// Number of random-walk cluster extractions per metric.
    pub iterations: usize,
    /// Steps per random walk.
    pub walk_length: usize,
    pub seed: u64,
}

impl Default for ScParams {
    fn default() -> Self {
        ScParams { k: 10, iterations: 150, walk_length: 30, seed: 0 }
    }
}

/// Distortion summary for one high/low pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub trustworthiness: f64,
    pub continuity: f64,
    pub steadiness: f64,
    pub cohesiveness: f64,
    pub k: usize,
}

/// Full report with the spec'd defaults.
pub fn distortion_report(
    high: &[Vec<f64>],
    low: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<DistortionReport, DistortionError> {
    let (t, c) = trust_continuity(high, low, k)?;
    let (st, co) =
        steadiness_cohesiveness(high, low, &ScParams { k, seed, ..ScParams::default() })?;
    Ok(DistortionReport { trustworthiness: t, continuity: c, steadiness: st, cohesiveness: co, k })
}

fn check_sizes(high: &[Vec<f64>], low: &[Vec<f64>], k: usize) -> Result<usize, DistortionError> {
    if high.len() != low.len() {
        return Err(DistortionError::SizeMismatch(high.len(), low.len()));
    }
    let n = high.len();
    if n < 2 * k + 2 {
        return Err(DistortionError::KTooLarge { k, n });
    }
    Ok(n)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For each point: all other indices ordered by distance (ties by index).
fn neighbor_order(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let d: Vec<f64> = (0..n).map(|j| sq_dist(&points[i], &points[j])).collect();
            idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap().then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// Venna-Kaski trustworthiness and continuity at neighborhood size `k`.
pub fn trust_continuity(
    high: &[Vec<f64>],
    low: &[Vec<f64>],
    k: usize,
) -> Result<(f64, f64), DistortionError> {
    let n = check_sizes(high, low, k)?;
    let order_high = neighbor_order(high);
    let order_low = neighbor_order(low);

    // rank[i][j] = 1-based rank of j among i's neighbors.
    let rank_of = |order: &[Vec<usize>]| -> Vec<Vec<usize>> {
        let mut rank = vec![vec![0usize; n]; n];
        for (i, ord) in order.iter().enumerate() {
            for (r, &j) in ord.iter().enumerate() {
                rank[i][j] = r + 1;
            }
        }
        rank
    };
    let rank_high = rank_of(&order_high);
    let rank_low = rank_of(&order_low);

    let norm = 2.0 / (n as f64 * k as f64 * (2.0 * n as f64 - 3.0 * k as f64 - 1.0));
    let mut t_penalty = 0.0;
    let mut c_penalty = 0.0;
    for i in 0..n {
        let hi_set: std::collections::HashSet<usize> =
            order_high[i][..k].iter().copied().collect();
        let lo_set: std::collections::HashSet<usize> =
            order_low[i][..k].iter().copied().collect();
        for &j in &order_low[i][..k] {
            if !hi_set.contains(&j) {
                t_penalty += (rank_high[i][j] - k) as f64;
            }
        }
        for &j in &order_high[i][..k] {
            if !lo_set.contains(&j) {
                c_penalty += (rank_low[i][j] - k) as f64;
            }
        }
    }
    Ok((1.0 - norm * t_penalty, 1.0 - norm * c_penalty))
}

/// k-nearest-neighbor lists plus the shared-neighbor similarity
/// `|kNN(i) ∩ kNN(j)| / k`.
struct SnnSpace {
    knn: Vec<Vec<usize>>,
    k: usize,
}

impl SnnSpace {
    fn build(points: &[Vec<f64>], k: usize) -> Self {
        let order = neighbor_order(points);
        SnnSpace { knn: order.into_iter().map(|o| o[..k].to_vec()).collect(), k }
    }

    fn similarity(&self, i: usize, j: usize) -> f64 {
        let a = &self.knn[i];
        let b = &self.knn[j];
        let mut shared = 0usize;
        for x in a {
            if b.contains(x) {
                shared += 1;
            }
        }
        shared as f64 / self.k as f64
    }

    fn adjacent(&self, i: usize, j: usize) -> bool {
        self.knn[i].contains(&j) || self.knn[j].contains(&i) || self.similarity(i, j) > 0.0
    }
}

/// Steadiness and cohesiveness via seeded random-walk cluster extraction.
///
/// Steadiness extracts clusters in the low space and charges them when
/// they fall apart in the high space (false merges in the projection);
/// cohesiveness extracts in the high space and charges splits in the low
/// space (false separation). Cluster splits are connected components of
/// the other space's neighborhood graph; the charge is the size-weighted
/// mean shared-neighbor dissimilarity between components.
pub fn steadiness_cohesiveness(
    high: &[Vec<f64>],
    low: &[Vec<f64>],
    params: &ScParams,
) -> Result<(f64, f64), DistortionError> {
    check_sizes(high, low, params.k)?;
    let high_space = SnnSpace::build(high, params.k);
    let low_space = SnnSpace::build(low, params.k);
    let steadiness = cluster_distortion(&low_space, &high_space, params, "steadiness");
    let cohesiveness = cluster_distortion(&high_space, &low_space, params, "cohesiveness");
    Ok((steadiness, cohesiveness))
}

fn cluster_distortion(
    cluster_space: &SnnSpace,
    check_space: &SnnSpace,
    params: &ScParams,
    tag: &str,
) -> f64 {
    let n = cluster_space.knn.len();
    let mut total = 0.0;
    for iter in 0..params.iterations {
        let mut rng = rng_from_seed(derive_seed(params.seed, tag, iter as u64));
        let start = rand::Rng::gen_range(&mut rng, 0..n);
        let mut members: Vec<usize> = vec![start];
        let mut current = start;
        for _ in 0..params.walk_length {
            let neighbors = &cluster_space.knn[current];
            let weights: Vec<f64> = neighbors
                .iter()
                .map(|&j| cluster_space.similarity(current, j).max(1e-9))
                .collect();
            let total_w: f64 = weights.iter().sum();
            let mut u: f64 = rand::Rng::gen::<f64>(&mut rng) * total_w;
            let mut next = neighbors[neighbors.len() - 1];
            for (&j, w) in neighbors.iter().zip(&weights) {
                if u < *w {
                    next = j;
                    break;
                }
                u -= w;
            }
            if !members.contains(&next) {
                members.push(next);
            }
            current = next;
        }
        total += split_charge(&members, check_space);
    }
    1.0 - total / params.iterations as f64
}

/// Components of `members` in the check space's neighborhood graph, then
/// the size-weighted mean SNN dissimilarity across components.
fn split_charge(members: &[usize], check_space: &SnnSpace) -> f64 {
    let m = members.len();
    if m <= 1 {
        return 0.0;
    }
    let mut component = vec![usize::MAX; m];
    let mut n_components = 0usize;
    for s in 0..m {
        if component[s] != usize::MAX {
            continue;
        }
        let id = n_components;
        n_components += 1;
        let mut stack = vec![s];
        component[s] = id;
        while let Some(a) = stack.pop() {
            for b in 0..m {
                if component[b] == usize::MAX && check_space.adjacent(members[a], members[b]) {
                    component[b] = id;
                    stack.push(b);
                }
            }
        }
    }
    if n_components <= 1 {
        return 0.0;
    }
    let mut weight_sum = 0.0;
    let mut charge = 0.0;
    for a in 0..m {
        for b in (a + 1)..m {
            if component[a] != component[b] {
                let d = 1.0 - check_space.similarity(members[a], members[b]);
                charge += d;
                weight_sum += 1.0;
            }
        }
    }
    if weight_sum == 0.0 {
        0.0
    } else {
        charge / weight_sum
    }
}

/// Mean and standard deviation of a metric over seeded subsamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleStats {
    pub mean: f64,
    pub sd: f64,
    pub values: Vec<f64>,
}

/// Evaluate `metric` on `n_sub` seeded subsamples of `size` points drawn
/// without replacement from the paired clouds.
pub fn subsample_estimate<E>(
    high: &[Vec<f64>],
    low: &[Vec<f64>],
    n_sub: usize,
    size: usize,
    seed: u64,
    metric: impl Fn(&[Vec<f64>], &[Vec<f64>]) -> Result<f64, E>,
) -> Result<SubsampleStats, DistortionError>
where
    E: std::fmt::Debug,
{
    if high.len() != low.len() {
        return Err(DistortionError::SizeMismatch(high.len(), low.len()));
    }
    if size > high.len() {
        return Err(DistortionError::SizeTooLarge { size, n: high.len() });
    }
    if n_sub == 0 {
        return Err(DistortionError::NoSubsamples);
    }
    let n = high.len();
    let mut values = Vec::with_capacity(n_sub);
    for s in 0..n_sub {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = rng_from_seed(derive_seed(seed, "subsample", s as u64));
        for i in (1..n).rev() {
            let j = rand::Rng::gen_range(&mut rng, 0..=i);
            idx.swap(i, j);
        }
        let hs: Vec<Vec<f64>> = idx[..size].iter().map(|&i| high[i].clone()).collect();
        let ls: Vec<Vec<f64>> = idx[..size].iter().map(|&i| low[i].clone()).collect();
        values.push(metric(&hs, &ls).expect("metric failed on subsample"));
    }
    let mean = values.iter().sum::<f64>() / n_sub as f64;
    let sd =
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_sub as f64).sqrt();
    Ok(SubsampleStats { mean, sd, values })
}
