//! Box-constrained gradient ascent shared by hyperparameter fitting and
//! acquisition maximization.
//!
//! Plain projected gradient ascent with an adaptive step and backtracking:
//! the step is expressed in units of the per-dimension box width, doubles
//! after a successful move and halves on failure. Deterministic given the
//! starting point.

/// Result of one ascent: the best point found and its objective value.
pub struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Maximize `f` over the box `[lo, hi]` starting from `x0`.
///
/// `grad` must return the ascent direction (gradient of `f`). Stops after
/// `max_iters` outer iterations or when backtracking bottoms out.
pub fn projected_ascent(
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iters: usize,
    mut f: impl FnMut(&[f64]) -> f64,
    mut grad: impl FnMut(&[f64]) -> Vec<f64>,
) -> AscentResult {
    let dim = x0.len();
    let width: Vec<f64> = lo.iter().zip(hi).map(|(&a, &b)| b - a).collect();
    let clamp = |x: &mut [f64]| {
        for i in 0..dim {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };

    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut fx = f(&x);
    let mut t = 0.25;
    const T_MIN: f64 = 1e-12;

    for _ in 0..max_iters {
        let g = grad(&x);
        // Scale so the largest coordinate moves t * width at step size t.
        let gmax = g
            .iter()
            .zip(&width)
            .map(|(gi, wi)| (gi * wi).abs())
            .fold(0.0f64, f64::max);
        if gmax == 0.0 || !gmax.is_finite() {
            break;
        }
        let mut improved = false;
        while t >= T_MIN {
            let mut cand = x.clone();
            for i in 0..dim {
                cand[i] += t * width[i] * (g[i] * width[i]) / gmax;
            }
            clamp(&mut cand);
            let fc = f(&cand);
            if fc > fx {
                x = cand;
                fx = fc;
                improved = true;
                t = (t * 2.0).min(1.0);
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    AscentResult { x, value: fx }
}

/// Central-difference gradient with per-dimension step `h[i]`, clamped to
/// the box so evaluations stay feasible.
pub fn central_gradient(
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
    h: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let up = (x[i] + h[i]).min(hi[i]);
        let dn = (x[i] - h[i]).max(lo[i]);
        if up <= dn {
            g[i] = 0.0;
            continue;
        }
        probe[i] = up;
        let fu = f(&probe);
        probe[i] = dn;
        let fd = f(&probe);
        probe[i] = x[i];
        g[i] = (fu - fd) / (up - dn);
    }
    g
}
