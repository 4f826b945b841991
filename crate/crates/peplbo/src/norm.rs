//! Standard normal density, distribution and related special functions.
//!
//! `erfc`/`erfcx` follow Cody's rational Chebyshev approximations (CALERF),
//! giving close to full double precision. Having `erfcx` in hand lets the
//! acquisition code evaluate `log(phi(z) + z*Phi(z))` without catastrophic
//! cancellation arbitrarily far into the lower tail.

const THRESH: f64 = 0.46875;
const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

const A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut xnum = A[4] * z;
    let mut xden = z;
    for i in 0..3 {
        xnum = (xnum + A[i]) * z;
        xden = (xden + B[i]) * z;
    }
    x * (xnum + A[3]) / (xden + B[3])
}

/// erfcx(y) = exp(y^2) * erfc(y) for y >= THRESH.
fn erfcx_tail(y: f64) -> f64 {
    if y <= 4.0 {
        let mut xnum = C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + C[i]) * y;
            xden = (xden + D[i]) * y;
        }
        (xnum + C[7]) / (xden + D[7])
    } else {
        let z = 1.0 / (y * y);
        let mut xnum = P[5] * z;
        let mut xden = z;
        for i in 0..4 {
            xnum = (xnum + P[i]) * z;
            xden = (xden + Q[i]) * z;
        }
        let r = z * (xnum + P[4]) / (xden + Q[4]);
        (INV_SQRT_PI - r) / y
    }
}

/// exp(-y^2) computed as exp(-ysq^2)*exp(-del) with ysq a 1/16 grid point,
/// which keeps the argument reduction exact (Cody's trick).
fn exp_neg_sq(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= THRESH {
        1.0 - erf_small(x)
    } else if y >= 26.6 {
        0.0
    } else {
        exp_neg_sq(y) * erfcx_tail(y)
    };
    if x < -THRESH {
        2.0 - result
    } else {
        result
    }
}

/// Scaled complementary error function exp(x^2)*erfc(x) for x >= 0.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= THRESH {
        (x * x).exp() * (1.0 - erf_small(x))
    } else {
        erfcx_tail(x)
    }
}

/// Standard normal density.
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() * (1.0 / (2.0 * std::f64::consts::PI).sqrt())
}

/// Log of the standard normal density.
pub fn log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal distribution function.
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// log(phi(z) + z*Phi(z)), the z-dependent factor of expected improvement.
///
/// For z < -1 the two terms nearly cancel, so the value is rebuilt from the
/// Mills ratio via `erfcx`: phi(z) + z*Phi(z) = phi(z) * (1 - t*R(t)) with
/// t = -z and R(t) = sqrt(pi/2) * erfcx(t/sqrt(2)). Finite for all finite z.
pub fn log_ei_term(z: f64) -> f64 {
    if z >= -1.0 {
        (pdf(z) + z * cdf(z)).ln()
    } else {
        let t = -z;
        let mills = (std::f64::consts::PI / 2.0).sqrt() * erfcx(t / SQRT_2);
        log_pdf(t) + (-t * mills).ln_1p()
    }
}

/// One standard normal draw (Box-Muller, deterministic per RNG state).
pub fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
