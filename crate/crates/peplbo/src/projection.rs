//! PCA fitting, forward/inverse projection and component-property
//! correlation reports.
//!
//! Components come from an eigendecomposition of the centered covariance
//! matrix (1/(N-1) convention) and are stored as orthonormal rows ordered by
//! decreasing eigenvalue. The sign of each component is fixed so that its
//! largest-magnitude entry is positive, which makes fits reproducible; PCA
//! signs are otherwise arbitrary.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latent::LatentPoint;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("need at least 2 points to fit a PCA, got {0}")]
    TooFewPoints(usize),
    #[error("component count {n} outside 1..={dim}")]
    BadN { n: usize, dim: usize },
    #[error("reduced vector of length {len} exceeds dimension {dim}")]
    BadDimension { len: usize, dim: usize },
    #[error("point has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("values have zero variance")]
    DegenerateValues,
    #[error("need points and values of equal length >= 3")]
    TooFewValues,
}

/// Fitted PCA projection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    mean: DVector<f64>,
    /// d x d orthonormal rows, ordered by decreasing eigenvalue.
    components: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    evr: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Row-major orthonormal components.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// Component `i` as a slice of length `dim`.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.components.row(i).iter().copied().collect()
    }

    /// Eigenvalues of the covariance matrix, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Explained-variance ratios, non-increasing, summing to 1.
    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.evr
    }
}

/// Fit a PCA on latent points.
pub fn fit_pca(points: &[LatentPoint]) -> Result<PcaModel, ProjectionError> {
    if points.len() < 2 {
        return Err(ProjectionError::TooFewPoints(points.len()));
    }
    let d = points[0].dim();
    let n = points.len();
    for p in points {
        if p.dim() != d {
            return Err(ProjectionError::DimensionMismatch { expected: d, got: p.dim() });
        }
    }

    let mut mean = DVector::zeros(d);
    for p in points {
        mean += DVector::from_column_slice(p.coords());
    }
    mean /= n as f64;

    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let c = DVector::from_column_slice(p.coords()) - &mean;
        cov.syger(1.0, &c, &c, 1.0);
    }
    cov /= (n - 1) as f64;
    // syger fills the lower triangle; mirror it.
    for i in 0..d {
        for j in (i + 1)..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let mut components = DMatrix::zeros(d, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (row, &k) in order.iter().enumerate() {
        // Numerical eigenvalues of a PSD matrix can dip slightly negative.
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
        let col = eig.eigenvectors.column(k);
        // Sign convention: largest-magnitude entry positive.
        let mut arg = 0;
        for i in 1..d {
            if col[i].abs() > col[arg].abs() {
                arg = i;
            }
        }
        let sign = if col[arg] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components[(row, i)] = sign * col[i];
        }
    }
    let total: f64 = eigenvalues.iter().sum();
    let evr = if total > 0.0 {
        eigenvalues.iter().map(|l| l / total).collect()
    } else {
        vec![0.0; d]
    };
    Ok(PcaModel { mean, components, eigenvalues, evr })
}

/// Project a latent point onto the top `n` components.
pub fn project(model: &PcaModel, z: &LatentPoint, n: usize) -> Result<Vec<f64>, ProjectionError> {
    let d = model.dim();
    if n < 1 || n > d {
        return Err(ProjectionError::BadN { n, dim: d });
    }
    if z.dim() != d {
        return Err(ProjectionError::DimensionMismatch { expected: d, got: z.dim() });
    }
    let centered = DVector::from_column_slice(z.coords()) - &model.mean;
    let scores = model.components.rows(0, n) * centered;
    Ok(scores.iter().copied().collect())
}

/// Map a reduced vector back to the full latent space.
pub fn inverse_project(model: &PcaModel, r: &[f64]) -> Result<LatentPoint, ProjectionError> {
    let d = model.dim();
    if r.len() > d {
        return Err(ProjectionError::BadDimension { len: r.len(), dim: d });
    }
    let mut z = model.mean.clone();
    if !r.is_empty() {
        z += model.components.rows(0, r.len()).transpose() * DVector::from_column_slice(r);
    }
    Ok(LatentPoint::new(z.iter().copied().collect()))
}

/// Report of the two components most correlated with a property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopCorrelatedPcs {
    /// (component index, Pearson r), strongest first.
    pub first: (usize, f64),
    pub second: (usize, f64),
}

/// Find the two components whose scores correlate most (in magnitude) with
/// the given property values over the given points.
pub fn top_correlated_pcs(
    model: &PcaModel,
    points: &[LatentPoint],
    values: &[f64],
) -> Result<TopCorrelatedPcs, ProjectionError> {
    if points.len() != values.len() || points.len() < 3 {
        return Err(ProjectionError::TooFewValues);
    }
    let n = points.len() as f64;
    let my = values.iter().sum::<f64>() / n;
    let syy: f64 = values.iter().map(|v| (v - my) * (v - my)).sum();
    if syy == 0.0 {
        return Err(ProjectionError::DegenerateValues);
    }

    let d = model.dim();
    let mut scores = vec![vec![0.0; points.len()]; d];
    for (col, p) in points.iter().enumerate() {
        let s = project(model, p, d)?;
        for (k, v) in s.into_iter().enumerate() {
            scores[k][col] = v;
        }
    }

    let mut rs: Vec<(usize, f64)> = Vec::with_capacity(d);
    for (k, sk) in scores.iter().enumerate() {
        let mx = sk.iter().sum::<f64>() / n;
        let sxx: f64 = sk.iter().map(|v| (v - mx) * (v - mx)).sum();
        let r = if sxx == 0.0 {
            0.0 // constant component score carries no correlation
        } else {
            let sxy: f64 = sk.iter().zip(values).map(|(x, y)| (x - mx) * (y - my)).sum();
            sxy / (sxx.sqrt() * syy.sqrt())
        };
        rs.push((k, r));
    }
    rs.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(&b.0)));
    Ok(TopCorrelatedPcs { first: rs[0], second: rs[1] })
}
