//! Expected-improvement acquisition in log space and its box-constrained
//! maximization.
//!
//! `LogEI(x) = log(sigma * (z*Phi(z) + phi(z)))` with `z = (mean - best) / sigma`
//! stays finite and differentiable far into the no-improvement regime where
//! plain EI underflows, which is what makes it optimizable numerically. The
//! maximizer runs seeded multi-start projected gradient ascent with central
//! finite differences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::GpModel;
use crate::norm::log_ei_term;
use crate::optim::{central_gradient, projected_ascent};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Error)]
pub enum AcquisitionError {
    #[error("variance {0} is negative")]
    NegativeVariance(f64),
    #[error("box bound lo {lo} >= hi {hi} in dimension {dim}")]
    BadBox { dim: usize, lo: f64, hi: f64 },
}

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, AcquisitionError> {
        assert_eq!(lo.len(), hi.len(), "box bound lengths differ");
        for (dim, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a < b) {
                return Err(AcquisitionError::BadBox { dim, lo: a, hi: b });
            }
        }
        Ok(SearchBox { lo, hi })
    }

    /// Hypercube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, AcquisitionError> {
        SearchBox::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *v >= a - tol && *v <= b + tol)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (a, b)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*a, *b);
        }
    }

    /// Seeded uniform sample.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| a + (b - a) * rng.gen::<f64>())
            .collect()
    }
}

/// Log of expected improvement for a Gaussian belief over the objective.
///
/// For `sigma = 0` the improvement is deterministic: returns
/// `ln(mean - best)` when positive and `f64::NEG_INFINITY` otherwise (the
/// distinguished "no improvement possible" value).
pub fn log_expected_improvement(
    mean: f64,
    variance: f64,
    best: f64,
) -> Result<f64, AcquisitionError> {
    if variance < 0.0 {
        return Err(AcquisitionError::NegativeVariance(variance));
    }
    if variance == 0.0 {
        let imp = mean - best;
        return Ok(if imp > 0.0 { imp.ln() } else { f64::NEG_INFINITY });
    }
    let sigma = variance.sqrt();
    let z = (mean - best) / sigma;
    Ok(sigma.ln() + log_ei_term(z))
}

/// Result of an acquisition maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionOutcome {
    pub point: Vec<f64>,
    pub log_ei: f64,
    /// True when the acquisition surface was flat across all restarts and
    /// the returned point is a seeded uniform exploration draw.
    pub fallback: bool,
}

const ASCENT_ITERS: usize = 50;
const FLAT_SPREAD: f64 = 1e-12;

/// Maximize LogEI over `search_box` with `restarts` seeded uniform starts
/// plus the best observed incumbent. Deterministic per seed.
pub fn maximize_acquisition(
    model: &GpModel,
    search_box: &SearchBox,
    restarts: usize,
    seed: u64,
) -> AcquisitionOutcome {
    assert!(restarts >= 1, "need at least one restart");
    assert_eq!(search_box.dim(), model.input_dim(), "box/model dimension mismatch");
    let (incumbent, best_y) = model.best_observation();

    let objective = |x: &[f64]| match model.posterior(x) {
        Ok(p) => log_expected_improvement(p.mean, p.variance, best_y)
            .unwrap_or(f64::NEG_INFINITY),
        Err(_) => f64::NEG_INFINITY,
    };

    let h: Vec<f64> = search_box
        .lo()
        .iter()
        .zip(search_box.hi())
        .map(|(a, b)| 1e-5 * (b - a))
        .collect();
    let grad = |x: &[f64]| {
        let g = central_gradient(x, search_box.lo(), search_box.hi(), &h, objective);
        if g.iter().all(|v| v.is_finite()) {
            g
        } else {
            vec![0.0; x.len()]
        }
    };

    let mut rng = rng_from_seed(derive_seed(seed, "acq-starts", 0));
    let mut starts: Vec<Vec<f64>> = (0..restarts).map(|_| search_box.sample(&mut rng)).collect();
    let mut incumbent_start = incumbent;
    search_box.clamp(&mut incumbent_start);
    starts.push(incumbent_start);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut lowest = f64::INFINITY;
    let mut improvement: f64 = 0.0;
    for s in &starts {
        let start_value = objective(s);
        let res = projected_ascent(s, search_box.lo(), search_box.hi(), ASCENT_ITERS, objective, grad);
        lowest = lowest.min(res.value);
        if start_value.is_finite() && res.value.is_finite() {
            improvement = improvement.max(res.value - start_value);
        }
        let replace = match &best {
            None => true,
            Some((bv, bx)) => {
                res.value > *bv || (res.value == *bv && res.x.as_slice() < bx.as_slice())
            }
        };
        if replace {
            best = Some((res.value, res.x));
        }
    }
    let (value, point) = best.expect("at least one start");

    // Flat surface: no start could climb and every restart finished at the
    // same value to machine precision.
    let flat =
        !value.is_finite() || ((value - lowest).abs() <= FLAT_SPREAD && improvement <= FLAT_SPREAD);
    if flat {
        let mut rng = rng_from_seed(derive_seed(seed, "acq-fallback", 0));
        let point = search_box.sample(&mut rng);
        let log_ei = objective(&point);
        return AcquisitionOutcome { point, log_ei, fallback: true };
    }
    AcquisitionOutcome { point, log_ei: value, fallback: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{with_hyperparameters, Hyperparameters};
    use crate::norm::standard_normal;
    use approx::assert_relative_eq;

    #[test]
    fn zero_variance_without_improvement_is_minus_infinity() {
        assert_eq!(
            log_expected_improvement(1.0, 0.0, 2.0).unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(
            log_expected_improvement(2.0, 0.0, 2.0).unwrap(),
            f64::NEG_INFINITY
        );
        // Deterministic improvement: exactly log(mean - best).
        assert_relative_eq!(
            log_expected_improvement(3.0, 0.0, 2.0).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn at_the_incumbent_logei_is_log_phi_zero() {
        let v = log_expected_improvement(1.5, 1.0, 1.5).unwrap();
        assert_relative_eq!(v, 0.398_942_280_401_432_7f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_negative_variance() {
        assert!(matches!(
            log_expected_improvement(0.0, -1e-9, 0.0),
            Err(AcquisitionError::NegativeVariance(_))
        ));
    }

    #[test]
    fn exp_logei_matches_monte_carlo() {
        let mut rng = crate::rng::rng_from_seed(2024);
        let n = 1_000_000usize;
        for case in 0..12 {
            let mean = -1.0 + 2.0 * rand::Rng::gen::<f64>(&mut rng);
            let sigma = 0.2 + 1.5 * rand::Rng::gen::<f64>(&mut rng);
            // Keep z in a range where Monte Carlo has signal.
            let z_target = -4.0 + 6.0 * (case as f64 / 11.0);
            let best = mean - z_target * sigma;
            let logei = log_expected_improvement(mean, sigma * sigma, best).unwrap();
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let draw = mean + sigma * standard_normal(&mut rng);
                let imp = (draw - best).max(0.0);
                sum += imp;
                sumsq += imp * imp;
            }
            let mc = sum / n as f64;
            let mc_var = (sumsq / n as f64 - mc * mc).max(0.0);
            let se = (mc_var / n as f64).sqrt();
            assert!(
                (logei.exp() - mc).abs() <= 3.0 * se + 1e-12,
                "case {case}: exp(logei) {} vs mc {mc} (se {se})",
                logei.exp()
            );
        }
    }

    #[test]
    fn deep_tail_is_finite() {
        let v = log_expected_improvement(0.0, 1.0, 30.0).unwrap();
        assert!(v.is_finite());
        assert!(v < -400.0);
        assert!(v.exp() < 1e-150); // vanishes in linear space, fine in log space
    }

    #[test]
    fn monotone_in_mean_and_sigma() {
        let best = 0.0;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..60 {
            let mean = -3.0 + i as f64 * 0.1;
            let v = log_expected_improvement(mean, 0.49, best).unwrap();
            assert!(v > prev);
            prev = v;
        }
        for &mean in &[-2.0, -1.0, -0.1] {
            let mut prev = f64::NEG_INFINITY;
            for j in 1..40 {
                let sigma = j as f64 * 0.1;
                let v = log_expected_improvement(mean, sigma * sigma, best).unwrap();
                assert!(v > prev, "mean {mean} sigma {sigma}");
                prev = v;
            }
        }
    }

    fn fit_1d_parabola() -> GpModel {
        let xs = [0.05, 0.25, 0.45, 0.7, 0.95];
        let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        let y: Vec<f64> = xs.iter().map(|&v| -(v - 0.3) * (v - 0.3)).collect();
        let b = SearchBox::cube(1, 0.0, 1.0).unwrap();
        with_hyperparameters(
            &x,
            &y,
            &b,
            Hyperparameters { length_scales: vec![0.25], signal_var: 1.0, noise_var: 1e-6 },
        )
        .unwrap()
    }

    #[test]
    fn maximizer_matches_dense_grid_oracle() {
        let model = fit_1d_parabola();
        let b = SearchBox::cube(1, 0.0, 1.0).unwrap();
        let best_y = model.best_observation().1;
        let out = maximize_acquisition(&model, &b, 8, 11);
        assert!(!out.fallback);
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..10_000 {
            let x = i as f64 / 9_999.0;
            let p = model.posterior(&[x]).unwrap();
            let v = log_expected_improvement(p.mean, p.variance, best_y).unwrap();
            grid_best = grid_best.max(v);
        }
        assert!(
            out.log_ei >= grid_best - 1e-6,
            "found {} vs grid {grid_best}",
            out.log_ei
        );
    }

    #[test]
    fn symmetric_two_point_case_stays_in_box() {
        let b = SearchBox::cube(1, 0.0, 1.0).unwrap();
        let model = with_hyperparameters(
            &[vec![0.25], vec![0.75]],
            &[1.0, 1.0],
            &b,
            Hyperparameters { length_scales: vec![0.2], signal_var: 1.0, noise_var: 1e-4 },
        )
        .unwrap();
        let out = maximize_acquisition(&model, &b, 8, 3);
        assert!(out.point.iter().all(|v| v.is_finite()));
        assert!(b.contains(&out.point, 0.0));
        let best_y = model.best_observation().1;
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..10_000 {
            let x = i as f64 / 9_999.0;
            let p = model.posterior(&[x]).unwrap();
            let v = log_expected_improvement(p.mean, p.variance, best_y).unwrap();
            grid_best = grid_best.max(v);
        }
        assert!(out.log_ei >= grid_best - 1e-6);
    }

    #[test]
    fn single_restart_is_deterministic() {
        let model = fit_1d_parabola();
        let b = SearchBox::cube(1, 0.0, 1.0).unwrap();
        let a = maximize_acquisition(&model, &b, 1, 99);
        let c = maximize_acquisition(&model, &b, 1, 99);
        assert_eq!(a, c);
    }

    #[test]
    fn box_validation_and_sampling() {
        assert!(matches!(
            SearchBox::new(vec![0.0, 1.0], vec![1.0, 1.0]),
            Err(AcquisitionError::BadBox { dim: 1, .. })
        ));
        let b = SearchBox::cube(3, -10.0, 10.0).unwrap();
        let mut rng = crate::rng::rng_from_seed(8);
        for _ in 0..100 {
            let s = b.sample(&mut rng);
            assert!(b.contains(&s, 0.0));
        }
        let mut x = vec![-20.0, 0.0, 20.0];
        b.clamp(&mut x);
        assert_eq!(x, vec![-10.0, 0.0, 10.0]);
    }
}
