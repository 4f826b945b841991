//! Exploration metrics and statistics over optimization runs.
//!
//! Hypervolume is measured toward the search-box corner with the maximum
//! value in each dimension: the union volume of the boxes spanned between
//! each sampled point and that corner. An exact recursive sweep (WFG-style
//! exclusive volumes with domination filtering) handles up to 8 dimensions;
//! beyond that a seeded Monte Carlo estimate with a reported standard error
//! takes over.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::lbo::RunRecord;
use crate::rng::rng_from_seed;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("point dimension {got} does not match reference dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("reference set is empty")]
    EmptySet,
    #[error("input has zero variance")]
    DegenerateInput,
}

/// Largest dimension handled by the exact hypervolume sweep.
pub const HV_EXACT_MAX_DIM: usize = 8;

/// Monte Carlo sample count for high-dimensional hypervolume.
pub const HV_MC_SAMPLES: usize = 1_000_000;

/// Hypervolume estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HvEstimate {
    pub value: f64,
    /// Standard error of the Monte Carlo estimate; `None` for exact sweeps.
    pub standard_error: Option<f64>,
    /// Number of points clipped to the reference corner.
    pub clipped: usize,
}

#[derive(Debug, Clone)]
pub struct HvOptions {
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for HvOptions {
    fn default() -> Self {
        HvOptions { mc_samples: HV_MC_SAMPLES, seed: 0x48_56 }
    }
}

/// Hypervolume of the union of boxes `[p_i, ref]` with default options.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<HvEstimate, DiagnosticsError> {
    hypervolume_with(points, reference, &HvOptions::default())
}

/// Hypervolume with explicit Monte Carlo options.
pub fn hypervolume_with(
    points: &[Vec<f64>],
    reference: &[f64],
    options: &HvOptions,
) -> Result<HvEstimate, DiagnosticsError> {
    let k = reference.len();
    for p in points {
        if p.len() != k {
            return Err(DiagnosticsError::DimensionMismatch { expected: k, got: p.len() });
        }
    }
    // Clip coordinates beyond the reference corner; fully clipped points
    // span a zero-volume box.
    let mut clipped = 0usize;
    let pts: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let mut q = p.clone();
            let mut any = false;
            for (v, r) in q.iter_mut().zip(reference) {
                if *v > *r {
                    *v = *r;
                    any = true;
                }
            }
            if any {
                clipped += 1;
            }
            q
        })
        .collect();
    let pts = nondominated(pts);
    if pts.is_empty() {
        return Ok(HvEstimate { value: 0.0, standard_error: None, clipped });
    }
    if k <= HV_EXACT_MAX_DIM {
        let value = hv_exact(&pts, reference);
        Ok(HvEstimate { value, standard_error: None, clipped })
    } else {
        let (value, se) = hv_monte_carlo(&pts, reference, options);
        Ok(HvEstimate { value, standard_error: Some(se), clipped })
    }
}

/// Keep the points not weakly dominated by another (minimization sense:
/// `a` dominates `b` when `a <= b` coordinate-wise).
fn nondominated(mut pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut keep: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    'outer: for (i, p) in pts.iter().enumerate() {
        for (j, q) in pts.iter().enumerate() {
            if i != j && dominates(q, p) && !dominates(p, q) {
                continue 'outer;
            }
        }
        keep.push(p.clone());
    }
    keep
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// WFG-style exclusive-volume recursion.
fn hv_exact(pts: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, p) in pts.iter().enumerate() {
        total += exclusive_volume(p, &pts[i + 1..], reference);
    }
    total
}

fn box_volume(p: &[f64], reference: &[f64]) -> f64 {
    p.iter().zip(reference).map(|(a, r)| (r - a).max(0.0)).product()
}

/// Volume contributed by `p` and not by any of the later points `rest`.
fn exclusive_volume(p: &[f64], rest: &[Vec<f64>], reference: &[f64]) -> f64 {
    let own = box_volume(p, reference);
    if rest.is_empty() || own == 0.0 {
        return own;
    }
    // Limit the later points to the region dominated by p, then subtract
    // their union volume inside it.
    let limited: Vec<Vec<f64>> = rest
        .iter()
        .map(|q| q.iter().zip(p).map(|(a, b)| a.max(*b)).collect())
        .collect();
    let limited = nondominated(limited);
    own - hv_exact(&limited, reference)
}

fn hv_monte_carlo(pts: &[Vec<f64>], reference: &[f64], options: &HvOptions) -> (f64, f64) {
    let k = reference.len();
    // Bounding box [component-wise min, reference].
    let mut low = vec![f64::INFINITY; k];
    for p in pts {
        for (l, v) in low.iter_mut().zip(p) {
            *l = l.min(*v);
        }
    }
    let bound_vol: f64 = low.iter().zip(reference).map(|(l, r)| r - l).product();
    if bound_vol <= 0.0 {
        return (0.0, 0.0);
    }
    let mut rng = rng_from_seed(options.seed);
    let mut hits = 0usize;
    let n = options.mc_samples;
    let mut sample = vec![0.0; k];
    for _ in 0..n {
        for (s, (l, r)) in sample.iter_mut().zip(low.iter().zip(reference)) {
            *s = l + (r - l) * rand::Rng::gen::<f64>(&mut rng);
        }
        if pts.iter().any(|p| dominates(p, &sample)) {
            hits += 1;
        }
    }
    let frac = hits as f64 / n as f64;
    let se = bound_vol * (frac * (1.0 - frac) / n as f64).sqrt();
    (bound_vol * frac, se)
}

/// Population variance of all sampled objective scores in a run.
pub fn score_variance(run: &RunRecord) -> Result<f64, DiagnosticsError> {
    let scores = run.scores();
    if scores.len() < 2 {
        return Err(DiagnosticsError::TooFew { need: 2, got: scores.len() });
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    Ok(scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n)
}

/// Minimum Euclidean distance from `x` to a reference set, both already
/// projected to the chosen two-component plane.
pub fn min_distance_to_set(x: &[f64; 2], set: &[[f64; 2]]) -> Result<f64, DiagnosticsError> {
    if set.is_empty() {
        return Err(DiagnosticsError::EmptySet);
    }
    Ok(set
        .iter()
        .map(|t| ((x[0] - t[0]).powi(2) + (x[1] - t[1]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min))
}

/// Total path length: sum of consecutive Euclidean distances in the plane.
pub fn path_length(points: &[[f64; 2]]) -> Result<f64, DiagnosticsError> {
    if points.len() < 2 {
        return Err(DiagnosticsError::TooFew { need: 2, got: points.len() });
    }
    Ok(points
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .sum())
}

/// Pearson correlation with a two-sided p-value from the t transform with
/// n-2 degrees of freedom.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<(f64, f64), DiagnosticsError> {
    assert_eq!(x.len(), y.len(), "input length mismatch");
    let n = x.len();
    if n < 3 {
        return Err(DiagnosticsError::TooFew { need: 3, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(DiagnosticsError::DegenerateInput);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    let r = r.clamp(-1.0, 1.0);
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * ((nf - 2.0) / (1.0 - r * r)).sqrt();
        two_sided_t_pvalue(t, nf - 2.0)
    };
    Ok((r, p))
}

/// Welch's two-sample t-test with Welch-Satterthwaite degrees of freedom.
pub fn two_sample_ttest(a: &[f64], b: &[f64]) -> Result<(f64, f64), DiagnosticsError> {
    if a.len() < 2 {
        return Err(DiagnosticsError::TooFew { need: 2, got: a.len() });
    }
    if b.len() < 2 {
        return Err(DiagnosticsError::TooFew { need: 2, got: b.len() });
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>() / (nb - 1.0);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        // Degenerate constant samples.
        return Ok(if ma == mb { (0.0, 1.0) } else { (f64::INFINITY * (ma - mb).signum(), 0.0) });
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    Ok((t, two_sided_t_pvalue(t, dof)))
}

fn two_sided_t_pvalue(t: f64, dof: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("valid dof");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

/// Per-run exploration metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationReport {
    pub hypervolume: f64,
    pub hypervolume_se: Option<f64>,
    /// Hypervolume divided by the search-box volume.
    pub hypervolume_normalized: f64,
    pub clipped: usize,
    pub score_variance: f64,
    pub min_distance: f64,
    pub path_length: f64,
    pub best_score: f64,
}

/// Compute the exploration metrics of a run.
///
/// Hypervolume and path length run over the points sampled during the
/// optimization iterations (the shared initialization is excluded), while
/// the score variance covers every recorded score and the distance uses
/// the overall best point. `plane` projects a full-latent point onto the
/// chosen two-PC plane; `reference_set` is the comparison set (for example
/// the oracle training pool) already projected onto the same plane.
pub fn exploration_report(
    run: &RunRecord,
    box_lo: f64,
    box_hi: f64,
    plane: impl Fn(&[f64]) -> [f64; 2],
    reference_set: &[[f64; 2]],
    hv_options: &HvOptions,
) -> Result<ExplorationReport, DiagnosticsError> {
    let k = run.entries[0].coords.len();
    let sampled = &run.entries[run.n_init.min(run.entries.len())..];
    if sampled.len() < 2 {
        return Err(DiagnosticsError::TooFew { need: 2, got: sampled.len() });
    }
    let reference = vec![box_hi; k];
    let points: Vec<Vec<f64>> = sampled.iter().map(|e| e.coords.clone()).collect();
    let hv = hypervolume_with(&points, &reference, hv_options)?;
    let box_volume = (box_hi - box_lo).powi(k as i32);

    let projected: Vec<[f64; 2]> = sampled.iter().map(|e| plane(&e.latent)).collect();
    let best = plane(&run.best_entry().latent);
    Ok(ExplorationReport {
        hypervolume: hv.value,
        hypervolume_se: hv.standard_error,
        hypervolume_normalized: hv.value / box_volume,
        clipped: hv.clipped,
        score_variance: score_variance(run)?,
        min_distance: min_distance_to_set(&best, reference_set)?,
        path_length: path_length(&projected)?,
        best_score: run.final_best(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Inclusion-exclusion oracle over all nonempty subsets.
    fn hv_inclusion_exclusion(pts: &[Vec<f64>], reference: &[f64]) -> f64 {
        let n = pts.len();
        let k = reference.len();
        let mut total = 0.0;
        for mask in 1u32..(1 << n) {
            let mut corner = vec![f64::NEG_INFINITY; k];
            for (i, p) in pts.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    for (c, v) in corner.iter_mut().zip(p) {
                        *c = c.max(*v);
                    }
                }
            }
            let vol: f64 = corner.iter().zip(reference).map(|(c, r)| (r - c).max(0.0)).product();
            if mask.count_ones() % 2 == 1 {
                total += vol;
            } else {
                total -= vol;
            }
        }
        total
    }

    #[test]
    fn single_point_box() {
        let hv = hypervolume(&[vec![0.0, 0.0]], &[10.0, 10.0]).unwrap();
        assert_relative_eq!(hv.value, 100.0, epsilon = 1e-12);
        assert_eq!(hv.clipped, 0);
    }

    #[test]
    fn two_point_union_by_inclusion_exclusion() {
        let hv = hypervolume(&[vec![0.0, 5.0], vec![5.0, 0.0]], &[10.0, 10.0]).unwrap();
        assert_relative_eq!(hv.value, 75.0, epsilon = 1e-12);
    }

    #[test]
    fn dominated_point_changes_nothing() {
        let base = hypervolume(&[vec![0.0, 5.0], vec![5.0, 0.0]], &[10.0, 10.0]).unwrap();
        let with_dominated =
            hypervolume(&[vec![0.0, 5.0], vec![5.0, 0.0], vec![6.0, 6.0]], &[10.0, 10.0]).unwrap();
        assert_relative_eq!(base.value, with_dominated.value, epsilon = 1e-12);
    }

    #[test]
    fn clipped_points_are_counted() {
        let hv = hypervolume(&[vec![0.0, 0.0], vec![11.0, -1.0]], &[10.0, 10.0]).unwrap();
        assert_eq!(hv.clipped, 1);
        assert_relative_eq!(hv.value, 100.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_sweep_matches_inclusion_exclusion_oracle() {
        let mut rng = crate::rng::rng_from_seed(41);
        for k in 2..=4usize {
            for _ in 0..20 {
                let n = 1 + rand::Rng::gen_range(&mut rng, 0..4usize);
                let pts: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..k).map(|_| rand::Rng::gen_range(&mut rng, -5.0..9.0)).collect())
                    .collect();
                let reference = vec![10.0; k];
                let exact = hypervolume(&pts, &reference).unwrap();
                let oracle = hv_inclusion_exclusion(&pts, &reference);
                assert_relative_eq!(exact.value, oracle, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact_at_five_dims() {
        let mut rng = crate::rng::rng_from_seed(43);
        for case in 0..20 {
            let n = 3 + (case % 5);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..5).map(|_| rand::Rng::gen_range(&mut rng, -8.0..8.0)).collect())
                .collect();
            let reference = vec![10.0; 5];
            let exact = hypervolume(&pts, &reference).unwrap().value;
            let opts = HvOptions { mc_samples: 200_000, seed: 1000 + case as u64 };
            let mut low = vec![f64::INFINITY; 5];
            for p in &pts {
                for (l, v) in low.iter_mut().zip(p) {
                    *l = l.min(*v);
                }
            }
            let (mc, se) = hv_monte_carlo(&pts, &reference, &opts);
            assert!(
                (mc - exact).abs() <= 3.0 * se,
                "case {case}: mc {mc} exact {exact} se {se}"
            );
        }
    }

    #[test]
    fn high_dimensions_report_standard_error() {
        let pts = vec![vec![0.0; 9], vec![5.0; 9]];
        let hv = hypervolume_with(
            &pts,
            &vec![10.0; 9],
            &HvOptions { mc_samples: 50_000, seed: 7 },
        )
        .unwrap();
        assert!(hv.standard_error.is_some());
        // Union of [0,10]^9 and [5,10]^9 is just [0,10]^9 = 10^9.
        let se = hv.standard_error.unwrap();
        assert!((hv.value - 1e9).abs() <= 3.0 * se.max(1.0));
    }

    fn record_with_scores(scores: &[f64]) -> RunRecord {
        let seq = crate::peptides::parse_sequence("GIGK").unwrap();
        let mut best = f64::NEG_INFINITY;
        RunRecord {
            space: crate::lbo::SearchSpace::Full,
            run_index: 0,
            seed: 0,
            n_init: 1,
            entries: scores
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    best = best.max(s);
                    crate::lbo::RunEntry {
                        index: i,
                        coords: vec![s, -s],
                        latent: vec![s, -s],
                        sequence: seq.clone(),
                        score: s,
                        best,
                    }
                })
                .collect(),
            acquisition_fallbacks: 0,
            aborted: None,
        }
    }

    #[test]
    fn score_variance_examples() {
        assert_eq!(score_variance(&record_with_scores(&[2.0, 2.0, 2.0])).unwrap(), 0.0);
        assert_eq!(score_variance(&record_with_scores(&[-1.0, 1.0])).unwrap(), 1.0);
        let scores: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        let run = record_with_scores(&scores);
        let mean = scores.iter().sum::<f64>() / 50.0;
        let direct = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / 50.0;
        assert_relative_eq!(score_variance(&run).unwrap(), direct, epsilon = 1e-12);
        assert!(matches!(
            score_variance(&record_with_scores(&[1.0])),
            Err(DiagnosticsError::TooFew { .. })
        ));
    }

    #[test]
    fn min_distance_examples() {
        let t = [[0.0, 0.0], [2.0, 2.0]];
        assert_eq!(min_distance_to_set(&[0.0, 0.0], &t).unwrap(), 0.0);
        assert_relative_eq!(min_distance_to_set(&[3.0, 4.0], &[[0.0, 0.0]]).unwrap(), 5.0);
        assert!(matches!(
            min_distance_to_set(&[0.0, 0.0], &[]),
            Err(DiagnosticsError::EmptySet)
        ));
        // Matches an exhaustive scan.
        let mut rng = crate::rng::rng_from_seed(3);
        let set: Vec<[f64; 2]> = (0..40)
            .map(|_| [rand::Rng::gen::<f64>(&mut rng), rand::Rng::gen::<f64>(&mut rng)])
            .collect();
        let x = [0.5, 0.5];
        let direct = set
            .iter()
            .map(|t| ((x[0] - t[0]).powi(2) + (x[1] - t[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min_distance_to_set(&x, &set).unwrap(), direct);
    }

    #[test]
    fn path_length_examples() {
        assert_relative_eq!(
            path_length(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];
        assert_relative_eq!(path_length(&square).unwrap(), 4.0, epsilon = 1e-12);
        let mut reversed = square;
        reversed.reverse();
        assert_relative_eq!(path_length(&reversed).unwrap(), 4.0, epsilon = 1e-12);
        assert!(matches!(
            path_length(&[[0.0, 0.0]]),
            Err(DiagnosticsError::TooFew { .. })
        ));
    }

    #[test]
    fn pearson_r_examples() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let (r, p) = pearson_r(&x, &y).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
        assert_eq!(p, 0.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (r, _) = pearson_r(&x, &neg).unwrap();
        assert_relative_eq!(r, -1.0, epsilon = 1e-12);
        assert!(matches!(
            pearson_r(&x, &vec![1.0; 20]),
            Err(DiagnosticsError::DegenerateInput)
        ));
    }

    #[test]
    fn pearson_r_matches_textbook_formula() {
        let mut rng = crate::rng::rng_from_seed(9);
        let n = 100;
        let x: Vec<f64> = (0..n).map(|_| crate::norm::standard_normal(&mut rng)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 0.6 * v + 0.8 * crate::norm::standard_normal(&mut rng))
            .collect();
        let (r, _) = pearson_r(&x, &y).unwrap();
        let nf = n as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|a| a * a).sum();
        let textbook = (nf * sxy - sx * sy)
            / ((nf * sxx - sx * sx).sqrt() * (nf * syy - sy * sy).sqrt());
        assert_relative_eq!(r, textbook, epsilon = 1e-12);
    }

    #[test]
    fn pearson_p_value_sanity() {
        // Strong correlation at n=100 must be significant; independent
        // noise must not be.
        let mut rng = crate::rng::rng_from_seed(10);
        let n = 100;
        let x: Vec<f64> = (0..n).map(|_| crate::norm::standard_normal(&mut rng)).collect();
        let strong: Vec<f64> = x
            .iter()
            .map(|v| v + 0.3 * crate::norm::standard_normal(&mut rng))
            .collect();
        let (_, p_strong) = pearson_r(&x, &strong).unwrap();
        assert!(p_strong < 1e-10);
        let noise: Vec<f64> = (0..n).map(|_| crate::norm::standard_normal(&mut rng)).collect();
        let (_, p_noise) = pearson_r(&x, &noise).unwrap();
        assert!(p_noise > 0.01);
    }

    #[test]
    fn ttest_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let (t, p) = two_sample_ttest(&a, &a).unwrap();
        assert_eq!(t, 0.0);
        assert_relative_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ttest_separated_samples_are_significant() {
        let mut rng = crate::rng::rng_from_seed(11);
        let a: Vec<f64> = (0..100).map(|_| crate::norm::standard_normal(&mut rng)).collect();
        let b: Vec<f64> = (0..100).map(|_| 5.0 + crate::norm::standard_normal(&mut rng)).collect();
        let (t, p) = two_sample_ttest(&a, &b).unwrap();
        assert!(t < -10.0);
        assert!(p < 1e-10);
    }

    #[test]
    fn ttest_is_antisymmetric() {
        let a = [0.1, 0.4, 0.3, 0.9, 0.2];
        let b = [0.5, 0.6, 0.55, 0.7];
        let (t_ab, p_ab) = two_sample_ttest(&a, &b).unwrap();
        let (t_ba, p_ba) = two_sample_ttest(&b, &a).unwrap();
        assert_relative_eq!(t_ab, -t_ba, epsilon = 1e-12);
        assert_relative_eq!(p_ab, p_ba, epsilon = 1e-12);
        assert!(matches!(
            two_sample_ttest(&[1.0], &b),
            Err(DiagnosticsError::TooFew { .. })
        ));
    }

    #[test]
    fn welch_p_matches_reference_value() {
        // Classic Welch example: unequal variances and sizes.
        let a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4];
        let b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 30.0, 23.9];
        let (t, p) = two_sample_ttest(&a, &b).unwrap();
        // scipy.stats.ttest_ind(a, b, equal_var=False):
        // t = -2.835263800664482, p = 0.008452732437443437 (df 27.7136).
        assert_relative_eq!(t, -2.835263800664482, epsilon = 1e-9);
        assert_relative_eq!(p, 0.008452732437443437, epsilon = 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn hypervolume_is_monotone_and_translation_invariant(
            pts in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..9.0, 3), 1..5
            ),
            extra in proptest::collection::vec(-5.0f64..9.0, 3),
            shift in -3.0f64..3.0,
        ) {
            let reference = vec![10.0; 3];
            let base = hypervolume(&pts, &reference).unwrap().value;
            let mut more = pts.clone();
            more.push(extra);
            let grown = hypervolume(&more, &reference).unwrap().value;
            prop_assert!(grown >= base - 1e-9);

            let shifted: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| p.iter().map(|v| v + shift).collect())
                .collect();
            let shifted_ref = vec![10.0 + shift; 3];
            let moved = hypervolume(&shifted, &shifted_ref).unwrap().value;
            prop_assert!((moved - base).abs() < 1e-9 * base.abs().max(1.0));
        }

        #[test]
        fn path_length_bounded_below_by_endpoint_distance(
            pts in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..5.0, 2), 2..20
            ),
        ) {
            let path: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
            let total = path_length(&path).unwrap();
            let first = path.first().unwrap();
            let last = path.last().unwrap();
            let direct =
                ((last[0] - first[0]).powi(2) + (last[1] - first[1]).powi(2)).sqrt();
            prop_assert!(total >= direct - 1e-12);
        }
    }
}
