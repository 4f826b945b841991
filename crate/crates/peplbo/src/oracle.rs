//! Objective construction: feature screening, sparse selection, an
//! epsilon-SVR "true" objective, and a closed-form desk oracle.
//!
//! The pipeline mirrors a standard tabular-regression oracle build:
//! mutual-information mRMR screening, dummy-feature LASSO thresholding,
//! then an RBF-kernel epsilon-SVR tuned by k-fold cross-validated grid
//! search over `C` and `epsilon`. The objective to maximize is
//! `M = -log10(MIC)`, the negation of the model's prediction.
//!
//! [`ClosedFormOracle`] is a self-contained smooth stand-in over charge and
//! hydrophobicity so optimization experiments can run without any training
//! data.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::norm::standard_normal;
use crate::peptides::{kd_hydrophobicity, net_charge, FeatureRegistry, PeptideError, Sequence};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("unknown feature column '{0}'")]
    UnknownColumn(String),
    #[error("feature count mismatch: expected {expected}, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("non-finite entry in feature matrix at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("empty grid for {0}")]
    EmptyGrid(&'static str),
    #[error("SVR solver did not converge at C={c}, eps={eps}")]
    SolverNonConvergence { c: f64, eps: f64 },
    #[error(transparent)]
    Feature(#[from] PeptideError),
}

/// Named feature table with regression targets on the log10(MIC) scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMatrix {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
    ) -> Result<Self, OracleError> {
        assert_eq!(rows.len(), targets.len(), "rows/targets length mismatch");
        for (r, row) in rows.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(OracleError::FeatureMismatch {
                    expected: feature_names.len(),
                    got: row.len(),
                });
            }
            for (c, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(OracleError::NonFinite { row: r, col: c });
                }
            }
        }
        for (r, t) in targets.iter().enumerate() {
            if !t.is_finite() {
                return Err(OracleError::NonFinite { row: r, col: feature_names.len() });
            }
        }
        Ok(FeatureMatrix { feature_names, rows, targets })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Restrict to the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix, OracleError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| OracleError::UnknownColumn(n.clone()))
            })
            .collect::<Result<_, _>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&j| r[j]).collect())
            .collect();
        FeatureMatrix::new(names.to_vec(), rows, self.targets.clone())
    }
}

// ── Mutual information ──────────────────────────────────────────

/// Minimum sample count for the MI estimator.
pub const MI_MIN_SAMPLES: usize = 50;

/// Mutual information in nats via an equal-frequency histogram with
/// `B = floor(sqrt(n/5))` bins per axis, Miller-Madow bias corrected and
/// clamped at zero.
pub fn mutual_information(x: &[f64], y: &[f64]) -> Result<f64, OracleError> {
    assert_eq!(x.len(), y.len(), "input length mismatch");
    let n = x.len();
    if n < MI_MIN_SAMPLES {
        return Err(OracleError::TooFewSamples { need: MI_MIN_SAMPLES, got: n });
    }
    let b = ((n as f64 / 5.0).sqrt().floor() as usize).max(2);
    let bx = equal_frequency_bins(x, b);
    let by = equal_frequency_bins(y, b);

    let mut joint = vec![0.0f64; b * b];
    for (&i, &j) in bx.iter().zip(&by) {
        joint[i * b + j] += 1.0;
    }
    let mut px = vec![0.0f64; b];
    let mut py = vec![0.0f64; b];
    for i in 0..b {
        for j in 0..b {
            px[i] += joint[i * b + j];
            py[j] += joint[i * b + j];
        }
    }
    let nf = n as f64;
    let mut mi = 0.0;
    let mut occupied_joint = 0usize;
    for i in 0..b {
        for j in 0..b {
            let c = joint[i * b + j];
            if c > 0.0 {
                occupied_joint += 1;
                mi += (c / nf) * ((c * nf) / (px[i] * py[j])).ln();
            }
        }
    }
    let occupied_x = px.iter().filter(|&&c| c > 0.0).count();
    let occupied_y = py.iter().filter(|&&c| c > 0.0).count();
    // Miller-Madow: H_mm = H + (m-1)/(2n) per entropy term.
    let correction =
        (occupied_joint as f64 - occupied_x as f64 - occupied_y as f64 + 1.0) / (2.0 * nf);
    Ok((mi - correction).max(0.0))
}

/// Equal-frequency bin index per sample; ties resolved by original index.
fn equal_frequency_bins(v: &[f64], b: usize) -> Vec<usize> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap().then(i.cmp(&j)));
    let mut bins = vec![0usize; n];
    for (rank, &i) in order.iter().enumerate() {
        bins[i] = (rank * b) / n;
    }
    bins
}

// ── mRMR feature screening ──────────────────────────────────────

/// Greedy minimum-redundancy maximum-relevance selection (difference
/// scheme): the first pick maximizes MI with the target, later picks
/// maximize `relevance - mean MI to already-picked features`. Ties break
/// by feature name.
pub fn mrmr_select(data: &FeatureMatrix, k: usize) -> Result<Vec<String>, OracleError> {
    let p = data.feature_names().len();
    assert!(k <= p, "k = {k} exceeds feature count {p}");
    let columns: Vec<Vec<f64>> = (0..p).map(|j| data.column(j)).collect();
    let relevance: Vec<f64> = columns
        .iter()
        .map(|c| mutual_information(c, data.targets()))
        .collect::<Result<_, _>>()?;

    let mut pair_cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pair_mi = |a: usize, bx: usize, cols: &[Vec<f64>]| -> Result<f64, OracleError> {
        let key = if a < bx { (a, bx) } else { (bx, a) };
        if let Some(&v) = pair_cache.get(&key) {
            return Ok(v);
        }
        let v = mutual_information(&cols[key.0], &cols[key.1])?;
        pair_cache.insert(key, v);
        Ok(v)
    };

    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut remaining: Vec<usize> = (0..p).collect();
    while selected.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for &j in &remaining {
            let score = if selected.is_empty() {
                relevance[j]
            } else {
                let mut red = 0.0;
                for &s in &selected {
                    red += pair_mi(j, s, &columns)?;
                }
                relevance[j] - red / selected.len() as f64
            };
            let better = match best {
                None => true,
                Some((bs, bj)) => {
                    score > bs
                        || (score == bs && data.feature_names()[j] < data.feature_names()[bj])
                }
            };
            if better {
                best = Some((score, j));
            }
        }
        let (_, j) = best.expect("remaining nonempty");
        selected.push(j);
        remaining.retain(|&r| r != j);
    }
    Ok(selected.into_iter().map(|j| data.feature_names()[j].clone()).collect())
}

// ── Dummy-feature LASSO selection ───────────────────────────────

/// The regularization grid used for the LASSO validation sweep.
pub fn default_alpha_grid() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 1e-1, 0.5, 1.0, 1.5, 2.5, 5.0, 7.5, 10.0, 50.0, 100.0]
}

/// Number of appended standard-normal dummy features.
pub const LASSO_DUMMIES: usize = 10;

/// Minimum sample count for the LASSO selection stage.
pub const LASSO_MIN_SAMPLES: usize = 30;

/// Dummy-feature LASSO thresholding.
///
/// Appends [`LASSO_DUMMIES`] seeded standard-normal columns and runs `t`
/// seeded 80-20 splits, fitting the alpha grid on each training part. The
/// winning alpha minimizes the validation MSE averaged over the splits
/// (per-split winners are too noisy to zero reliably: the paired MSE gap
/// between a near-zero alpha and a zeroing one is of the same order as its
/// own sampling noise, independent of n). Each split's coefficient vector
/// at the winning alpha is kept, and every real feature whose mean
/// |coefficient| does not exceed the mean |coefficient| over all dummies
/// and splits is removed.
pub fn lasso_dummy_select(
    data: &FeatureMatrix,
    t: usize,
    alphas: &[f64],
    seed: u64,
) -> Result<Vec<String>, OracleError> {
    let n = data.len();
    if n < LASSO_MIN_SAMPLES {
        return Err(OracleError::TooFewSamples { need: LASSO_MIN_SAMPLES, got: n });
    }
    if alphas.is_empty() {
        return Err(OracleError::EmptyGrid("alpha"));
    }
    let p_real = data.feature_names().len();
    let p = p_real + LASSO_DUMMIES;

    let mut rng = rng_from_seed(derive_seed(seed, "lasso-dummies", 0));
    let mut rows: Vec<Vec<f64>> = data.rows().to_vec();
    for row in &mut rows {
        for _ in 0..LASSO_DUMMIES {
            row.push(standard_normal(&mut rng));
        }
    }
    let y = data.targets();

    let n_val = (n as f64 * 0.2).round().max(1.0) as usize;

    // Per split: standardized train/validation parts.
    struct Split {
        x_train: Vec<Vec<f64>>,
        y_train: Vec<f64>,
        y_mean: f64,
        x_val: Vec<Vec<f64>>,
        y_val: Vec<f64>,
    }
    let splits: Vec<Split> = (0..t)
        .map(|split| {
            let mut order: Vec<usize> = (0..n).collect();
            let mut srng = rng_from_seed(derive_seed(seed, "lasso-split", split as u64));
            for i in (1..n).rev() {
                let j = rand::Rng::gen_range(&mut srng, 0..=i);
                order.swap(i, j);
            }
            let (val_idx, train_idx) = order.split_at(n_val);

            // Standardize on the training part so dummy and real
            // coefficients are comparable in magnitude.
            let mut mean = vec![0.0; p];
            let mut std = vec![0.0; p];
            for &i in train_idx {
                for j in 0..p {
                    mean[j] += rows[i][j];
                }
            }
            for m in &mut mean {
                *m /= train_idx.len() as f64;
            }
            for &i in train_idx {
                for j in 0..p {
                    std[j] += (rows[i][j] - mean[j]).powi(2);
                }
            }
            for s in &mut std {
                *s = (*s / train_idx.len() as f64).sqrt();
                if *s == 0.0 {
                    *s = 1.0;
                }
            }
            let standardize =
                |i: usize| -> Vec<f64> { (0..p).map(|j| (rows[i][j] - mean[j]) / std[j]).collect() };
            let y_mean = train_idx.iter().map(|&i| y[i]).sum::<f64>() / train_idx.len() as f64;
            Split {
                x_train: train_idx.iter().map(|&i| standardize(i)).collect(),
                y_train: train_idx.iter().map(|&i| y[i] - y_mean).collect(),
                y_mean,
                x_val: val_idx.iter().map(|&i| standardize(i)).collect(),
                y_val: val_idx.iter().map(|&i| y[i]).collect(),
            }
        })
        .collect();

    // Mean and standard error of the validation MSE per alpha.
    let mut stats: Vec<(f64, f64, f64)> = Vec::with_capacity(alphas.len()); // (alpha, mean, se)
    for &alpha in alphas {
        let mut mses = Vec::with_capacity(t);
        for s in &splits {
            let beta = lasso_coordinate_descent(&s.x_train, &s.y_train, alpha);
            let mut mse = 0.0;
            for (xv, yv) in s.x_val.iter().zip(&s.y_val) {
                let pred = s.y_mean + xv.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
                mse += (pred - yv).powi(2);
            }
            mses.push(mse / s.y_val.len() as f64);
        }
        let mean = mses.iter().sum::<f64>() / t as f64;
        let se = if t > 1 {
            (mses.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (t - 1) as f64 / t as f64)
                .sqrt()
        } else {
            0.0
        };
        stats.push((alpha, mean, se));
    }
    // One-standard-error rule: the largest alpha whose mean validation MSE
    // is within one SE of the minimum.
    let (best_alpha, best_mean, best_se) = stats
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("alpha grid nonempty");
    let cutoff = best_mean + best_se;
    let alpha = stats
        .iter()
        .filter(|(_, mean, _)| *mean <= cutoff)
        .map(|(a, _, _)| *a)
        .fold(best_alpha, f64::max);

    let mut coef_acc = vec![0.0f64; p];
    for s in &splits {
        let beta = lasso_coordinate_descent(&s.x_train, &s.y_train, alpha);
        for j in 0..p {
            coef_acc[j] += beta[j].abs();
        }
    }

    let threshold: f64 = coef_acc[p_real..].iter().sum::<f64>() / (LASSO_DUMMIES * t) as f64;
    let survivors = (0..p_real)
        .filter(|&j| coef_acc[j] / t as f64 > threshold)
        .map(|j| data.feature_names()[j].clone())
        .collect();
    Ok(survivors)
}

/// LASSO by cyclic coordinate descent on standardized columns:
/// minimize (1/2n)||y - X b||^2 + alpha * ||b||_1.
fn lasso_coordinate_descent(x: &[Vec<f64>], y: &[f64], alpha: f64) -> Vec<f64> {
    let n = x.len();
    let p = if n > 0 { x[0].len() } else { 0 };
    let nf = n as f64;
    let mut beta = vec![0.0f64; p];
    let mut residual = y.to_vec();
    // Columns are standardized, so x_j . x_j / n == 1.
    for _ in 0..1000 {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            let mut rho = 0.0;
            for i in 0..n {
                rho += x[i][j] * residual[i];
            }
            rho = rho / nf + beta[j];
            let new = soft_threshold(rho, alpha);
            let delta = new - beta[j];
            if delta != 0.0 {
                for i in 0..n {
                    residual[i] -= delta * x[i][j];
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < 1e-7 {
            break;
        }
    }
    beta
}

fn soft_threshold(v: f64, alpha: f64) -> f64 {
    if v > alpha {
        v - alpha
    } else if v < -alpha {
        v + alpha
    } else {
        0.0
    }
}

// ── Epsilon-SVR with cross-validated grid search ────────────────

/// Grid of `10^a` values with `steps` equidistant exponents in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    assert!(steps >= 2);
    (0..steps)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (steps - 1) as f64))
        .collect()
}

/// Grid-search configuration for [`fit_oracle`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleFitConfig {
    pub c_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    /// RBF bandwidth; defaults to 1/n_features on standardized inputs.
    pub gamma: Option<f64>,
}

impl Default for OracleFitConfig {
    fn default() -> Self {
        OracleFitConfig {
            c_grid: log_grid(-2.0, 2.0, 9),
            eps_grid: log_grid(-2.0, 2.0, 9),
            folds: 5,
            seed: 0,
            gamma: None,
        }
    }
}

/// Fitted SVR oracle: predicts log10(MIC) from named features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleModel {
    feature_names: Vec<String>,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    gamma: f64,
    c: f64,
    eps: f64,
    /// (standardized support row, beta) pairs with beta != 0.
    support: Vec<(Vec<f64>, f64)>,
    bias: f64,
    cv_mse: f64,
}

impl OracleModel {
    pub fn selected_features(&self) -> &[String] {
        &self.feature_names
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Mean cross-validation MSE of the winning grid point.
    pub fn cv_mse(&self) -> f64 {
        self.cv_mse
    }

    /// Predict log10(MIC) from raw feature values (order must match
    /// [`selected_features`](Self::selected_features)).
    pub fn predict(&self, features: &[f64]) -> Result<f64, OracleError> {
        if features.len() != self.feature_names.len() {
            return Err(OracleError::FeatureMismatch {
                expected: self.feature_names.len(),
                got: features.len(),
            });
        }
        let xs: Vec<f64> = features
            .iter()
            .zip(self.feature_mean.iter().zip(&self.feature_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut f = self.bias;
        for (row, beta) in &self.support {
            f += beta * rbf(row, &xs, self.gamma);
        }
        Ok(f)
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Fit the SVR oracle: k-fold cross-validated grid search over `(C, eps)`
/// (ties prefer smaller C, then smaller eps), then a final refit on all
/// data.
pub fn fit_oracle(data: &FeatureMatrix, config: &OracleFitConfig) -> Result<OracleModel, OracleError> {
    let n = data.len();
    let need = config.folds * 5;
    if n < need {
        return Err(OracleError::TooFewSamples { need, got: n });
    }
    if config.c_grid.is_empty() {
        return Err(OracleError::EmptyGrid("C"));
    }
    if config.eps_grid.is_empty() {
        return Err(OracleError::EmptyGrid("eps"));
    }
    let p = data.feature_names().len();

    // Standardize features on the full data set.
    let mut mean = vec![0.0; p];
    let mut std = vec![0.0; p];
    for row in data.rows() {
        for j in 0..p {
            mean[j] += row[j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    for row in data.rows() {
        for j in 0..p {
            std[j] += (row[j] - mean[j]).powi(2);
        }
    }
    for s in &mut std {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let xs: Vec<Vec<f64>> = data
        .rows()
        .iter()
        .map(|row| (0..p).map(|j| (row[j] - mean[j]) / std[j]).collect())
        .collect();
    let y = data.targets();
    let gamma = config.gamma.unwrap_or(1.0 / p.max(1) as f64);

    // Seeded shuffle then round-robin fold assignment.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(derive_seed(config.seed, "oracle-folds", 0));
    for i in (1..n).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    let fold_of: Vec<usize> = {
        let mut f = vec![0usize; n];
        for (pos, &i) in order.iter().enumerate() {
            f[i] = pos % config.folds;
        }
        f
    };

    let mut c_sorted = config.c_grid.clone();
    c_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut eps_sorted = config.eps_grid.clone();
    eps_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut winner: Option<(f64, f64, f64)> = None; // (mse, c, eps)
    for &c in &c_sorted {
        for &eps in &eps_sorted {
            let mut total = 0.0;
            let mut count = 0usize;
            for fold in 0..config.folds {
                let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
                let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
                let xt: Vec<&[f64]> = train.iter().map(|&i| xs[i].as_slice()).collect();
                let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let (beta, bias) = svr_smo(&xt, &yt, c, eps, gamma)
                    .ok_or(OracleError::SolverNonConvergence { c, eps })?;
                for &i in &test {
                    let mut f = bias;
                    for (k, &ti) in train.iter().enumerate() {
                        if beta[k] != 0.0 {
                            f += beta[k] * rbf(&xs[ti], &xs[i], gamma);
                        }
                    }
                    total += (f - y[i]).powi(2);
                    count += 1;
                }
            }
            let mse = total / count as f64;
            // Strict improvement keeps the smallest (C, eps) on ties.
            if winner.as_ref().map_or(true, |(wm, _, _)| mse < *wm) {
                winner = Some((mse, c, eps));
            }
        }
    }
    let (cv_mse, c, eps) = winner.expect("nonempty grid");

    let x_all: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
    let (beta, bias) =
        svr_smo(&x_all, y, c, eps, gamma).ok_or(OracleError::SolverNonConvergence { c, eps })?;
    let support: Vec<(Vec<f64>, f64)> = xs
        .iter()
        .zip(&beta)
        .filter(|(_, &b)| b != 0.0)
        .map(|(row, &b)| (row.clone(), b))
        .collect();
    Ok(OracleModel {
        feature_names: data.feature_names().to_vec(),
        feature_mean: mean,
        feature_std: std,
        gamma,
        c,
        eps,
        support,
        bias,
        cv_mse,
    })
}

/// Sequential minimal optimization for the epsilon-SVR dual.
///
/// 2n box variables with signs; working pairs picked by maximal violation
/// with a second-order step, LIBSVM style. Returns `(beta, bias)` with
/// `f(x) = sum_i beta_i k(x_i, x) + bias`, or `None` if the iteration cap
/// is hit before the KKT gap closes.
fn svr_smo(x: &[&[f64]], y: &[f64], c: f64, eps: f64, gamma: f64) -> Option<(Vec<f64>, f64)> {
    let n = x.len();
    let tol = 1e-4;
    let tau = 1e-12;
    let max_steps = 40_000 + 200 * n;

    let mut kernel = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(x[i], x[j], gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }

    // Variable t in 0..2n: data index t % n, sign +1 for t < n else -1.
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let data = |t: usize| t % n;
    let mut theta = vec![0.0f64; 2 * n];
    let mut kbeta = vec![0.0f64; n];
    let grad = |t: usize, kbeta: &[f64]| -> f64 {
        let i = data(t);
        sign(t) * kbeta[i] + eps - sign(t) * y[i]
    };

    let mut m_up = 0.0;
    let mut m_low = 0.0;
    for _step in 0..max_steps {
        // i: the most violating "up" variable.
        let mut i_best: Option<(f64, usize)> = None;
        let mut low_best = f64::INFINITY;
        for t in 0..2 * n {
            let zg = -sign(t) * grad(t, &kbeta);
            let movable_up = theta[t] < c;
            let movable_down = theta[t] > 0.0;
            let in_up = (sign(t) > 0.0 && movable_up) || (sign(t) < 0.0 && movable_down);
            let in_low = (sign(t) > 0.0 && movable_down) || (sign(t) < 0.0 && movable_up);
            if in_up && i_best.as_ref().map_or(true, |(v, _)| zg > *v) {
                i_best = Some((zg, t));
            }
            if in_low {
                low_best = low_best.min(zg);
            }
        }
        let (m, ti) = i_best?;
        m_up = m;
        m_low = low_best;
        if m - low_best <= tol {
            break;
        }

        // j: second-order selection among the "low" set.
        let p = data(ti);
        let gp = grad(ti, &kbeta);
        let mut j_best: Option<(f64, usize)> = None;
        for t in 0..2 * n {
            let movable_up = theta[t] < c;
            let movable_down = theta[t] > 0.0;
            let in_low = (sign(t) > 0.0 && movable_down) || (sign(t) < 0.0 && movable_up);
            if !in_low {
                continue;
            }
            let zg = -sign(t) * grad(t, &kbeta);
            let b = m - zg;
            if b <= 0.0 {
                continue;
            }
            let q = data(t);
            let a = (kernel[p * n + p] + kernel[q * n + q]
                - 2.0 * sign(ti) * sign(t) * kernel[p * n + q])
                .max(tau);
            let score = -(b * b) / a;
            if j_best.as_ref().map_or(true, |(v, _)| score < *v) {
                j_best = Some((score, t));
            }
        }
        let (_, tj) = j_best?;
        let q = data(tj);
        let gq = grad(tj, &kbeta);

        let a = (kernel[p * n + p] + kernel[q * n + q]
            - 2.0 * sign(ti) * sign(tj) * kernel[p * n + q])
            .max(tau);
        // Ascent along theta_i += z_i*lambda, theta_j -= z_j*lambda.
        let mut lambda = -(sign(ti) * gp - sign(tj) * gq) / a;
        debug_assert!(lambda >= 0.0);
        let cap_i = if sign(ti) > 0.0 { c - theta[ti] } else { theta[ti] };
        let cap_j = if sign(tj) > 0.0 { theta[tj] } else { c - theta[tj] };
        lambda = lambda.min(cap_i).min(cap_j);
        if lambda <= 0.0 {
            break;
        }
        theta[ti] += sign(ti) * lambda;
        theta[tj] -= sign(tj) * lambda;
        for r in 0..n {
            kbeta[r] += lambda * (kernel[r * n + p] - kernel[r * n + q]);
        }

        if _step == max_steps - 1 {
            return None;
        }
    }
    if m_up - m_low > 10.0 * tol && n > 1 {
        // Loop ended without closing the gap.
        return None;
    }

    let beta: Vec<f64> = (0..n).map(|i| theta[i] - theta[n + i]).collect();
    let bias = (m_up + m_low) / 2.0;
    Some((beta, bias))
}

// ── Objectives over sequences ───────────────────────────────────

/// A "true" objective M over sequences (larger is better).
pub trait SequenceObjective: Sync {
    fn score(&self, seq: &Sequence) -> Result<f64, OracleError>;
}

/// SVR-backed objective: `M = -predict(descriptors(seq))`.
pub struct SvrOracle {
    model: OracleModel,
    registry: FeatureRegistry,
}

impl SvrOracle {
    /// The model's selected features must be registry-computable ids.
    pub fn new(model: OracleModel) -> Self {
        SvrOracle { model, registry: FeatureRegistry::standard() }
    }

    pub fn with_registry(model: OracleModel, registry: FeatureRegistry) -> Self {
        SvrOracle { model, registry }
    }

    pub fn model(&self) -> &OracleModel {
        &self.model
    }
}

impl SequenceObjective for SvrOracle {
    fn score(&self, seq: &Sequence) -> Result<f64, OracleError> {
        let dv = self.registry.compute(seq, &self.model.feature_names.clone())?;
        Ok(-self.model.predict(dv.values())?)
    }
}

/// Closed-form desk oracle: a smooth stand-in for predicted log10(MIC)
/// driven by net charge and hydrophobicity (cationic, moderately
/// hydrophobic sequences score as more active).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ClosedFormOracle;

impl ClosedFormOracle {
    pub const BASE: f64 = 1.1;
    pub const CHARGE_WEIGHT: f64 = 0.35;
    pub const HYDRO_WEIGHT: f64 = 0.9;
    pub const HYDRO_CENTER: f64 = 0.9;
    pub const HYDRO_WIDTH: f64 = 0.6;

    /// Predicted log10(MIC); lower means more active.
    pub fn predicted_log10_mic(&self, seq: &Sequence) -> Result<f64, OracleError> {
        let charge = net_charge(seq, 7.2)?;
        let hydro = kd_hydrophobicity(seq);
        let bump = (-((hydro - Self::HYDRO_CENTER) / Self::HYDRO_WIDTH).powi(2) / 2.0).exp();
        Ok(Self::BASE - Self::CHARGE_WEIGHT * charge - Self::HYDRO_WEIGHT * bump)
    }
}

impl SequenceObjective for ClosedFormOracle {
    fn score(&self, seq: &Sequence) -> Result<f64, OracleError> {
        Ok(-self.predicted_log10_mic(seq)?)
    }
}
