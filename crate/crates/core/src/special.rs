//! Chi-square and normal primitives.
//!
//! The incomplete gamma follows the usual split: power series below `a + 1`,
//! Lentz continued fraction above. `ln Γ` and `erfc` come from `libm`.

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 500;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Degrees of freedom of a chi-square law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChiSquareDf(u32);

impl ChiSquareDf {
    pub fn new(df: u32) -> Result<Self> {
        if df < 1 {
            return Err(Error::InvalidArgument("chi-square df must be >= 1".into()));
        }
        Ok(ChiSquareDf(df))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    fn half(self) -> f64 {
        0.5 * self.0 as f64
    }
}

/// Regularized incomplete gamma pair `(P(a,x), Q(a,x))`.
pub fn gamma_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "incomplete gamma needs a > 0, x >= 0 (a = {a}, x = {x})"
        )));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_pref = a * x.ln() - x - libm::lgamma(a);
    if x < a + 1.0 {
        let p = series(a, x)? * log_pref.exp();
        Ok((p, 1.0 - p))
    } else {
        let q = cont_frac(a, x)? * log_pref.exp();
        Ok((1.0 - q, q))
    }
}

// sum x^k / (a (a+1) ... (a+k))
fn series(a: f64, x: f64) -> Result<f64> {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence { what: "incomplete gamma series", iters: MAX_ITER })
}

fn cont_frac(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence { what: "incomplete gamma continued fraction", iters: MAX_ITER })
}

/// `G_df(x) = P(df/2, x/2)`.
pub fn chi2_cdf(x: f64, df: ChiSquareDf) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("chi-square cdf needs x >= 0, got {x}")));
    }
    Ok(gamma_pq(df.half(), 0.5 * x)?.0)
}

/// Upper tail `1 - G_df(x)`, without cancellation.
pub fn chi2_sf(x: f64, df: ChiSquareDf) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("chi-square sf needs x >= 0, got {x}")));
    }
    Ok(gamma_pq(df.half(), 0.5 * x)?.1)
}

pub fn chi2_pdf(x: f64, df: ChiSquareDf) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let k = df.half();
    if x == 0.0 {
        return match df.get() {
            1 => f64::INFINITY,
            2 => 0.5,
            _ => 0.0,
        };
    }
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - libm::lgamma(k)).exp()
}

/// Inverse of [`chi2_cdf`]: Newton steps kept inside a bisection bracket,
/// started from the Wilson–Hilferty cube approximation.
pub fn chi2_quantile(p: f64, df: ChiSquareDf) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in (0,1), got {p}")));
    }
    let k = df.get() as f64;
    let z = std_normal_quantile(p);
    let h = 2.0 / (9.0 * k);
    let wh = k * (1.0 - h + z * h.sqrt()).powi(3);
    let mut x = if wh > 0.0 { wh } else { k * 0.5 * p.powf(2.0 / k) };

    let mut lo = 0.0;
    let mut hi = x.max(1.0);
    while chi2_cdf(hi, df)? < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let (f, upper) = gamma_pq(df.half(), 0.5 * x)?;
        // compare on the smaller tail so p near 1 keeps relative accuracy
        let err = if p > 0.5 { (1.0 - p) - upper } else { f - p };
        if err.abs() <= 1e-15 * p.min(1.0 - p).max(1e-300) {
            return Ok(x);
        }
        if err < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let dens = chi2_pdf(x, df);
        let mut next = if dens > 0.0 && dens.is_finite() { x - err / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence { what: "chi-square quantile", iters: 200 })
}

/// Φ(v).
pub fn std_normal_cdf(v: f64) -> f64 {
    0.5 * libm::erfc(-v / std::f64::consts::SQRT_2)
}

pub fn std_normal_pdf(v: f64) -> f64 {
    (-0.5 * v * v).exp() / SQRT_2PI
}

/// `e^{v²/2} (1 - Φ(v))`, finite for all large `v`.
///
/// Past `v = 8` this switches to the Laplace continued fraction, which
/// converges quickly there and avoids `erfc` underflow.
pub fn normal_tail_scaled(v: f64) -> f64 {
    if v < 8.0 {
        return 0.5 * libm::erfc(v / std::f64::consts::SQRT_2) * (0.5 * v * v).exp();
    }
    // 1 / (v + 1/(v + 2/(v + 3/(v + ...))))
    let mut f = v;
    let mut c = v;
    let mut d = 0.0;
    for i in 1..MAX_ITER {
        let an = i as f64;
        d = v + an * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = v + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = c * d;
        f *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    1.0 / (f * SQRT_2PI)
}

/// Standard normal quantile: Acklam's rational approximation polished by
/// one Halley step against `erfc`.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549671010382296e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    let x = if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = std_normal_cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
