//! The three improved procedures built from (A1, A2, A3): the expanded CDF,
//! the Bartlett-type corrected statistic and the modified percentile, plus
//! the order-1/n moments.
//!
//! The `_eps` variants take the expansion parameter `ε` in place of `1/n`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::ExpansionCoefficients;
use crate::special::{chi2_cdf, chi2_quantile, chi2_sf, ChiSquareDf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// `|c + bS + aS²| > 0.5`: the correction factor is far from one.
    LargeCorrection,
    /// `S* < 0`.
    NegativeCorrected,
    /// The expanded CDF left `[0, 1]`.
    ExpandedCdfOutOfRange,
    /// A p-value was clamped into `[0, 1]`.
    PValueClamped,
    /// A slightly negative `S` from fit tolerance was set to zero.
    StatisticClamped,
}

impl Warning {
    pub fn describe(self) -> &'static str {
        match self {
            Warning::LargeCorrection => "|c + bS + aS^2| > 0.5; correction outside its asymptotic regime",
            Warning::NegativeCorrected => "corrected statistic is negative",
            Warning::ExpandedCdfOutOfRange => "expanded CDF outside [0,1] at this sample size",
            Warning::PValueClamped => "p-value clamped into [0,1]",
            Warning::StatisticClamped => "tiny negative statistic clamped to 0",
        }
    }
}

/// `a`, `b`, `c` of the correction factor `1 - (c + bS + aS²)`, each
/// carrying its `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BartlettFactors {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub n: usize,
    pub q: usize,
}

impl BartlettFactors {
    pub fn new(coef: &ExpansionCoefficients, q: usize, n: usize) -> Result<Self> {
        check_qn(q, n)?;
        let (a, b, c) = factors_eps(coef, q, 1.0 / n as f64);
        Ok(BartlettFactors { a, b, c, n, q })
    }

    pub fn factor(&self, s: f64) -> f64 {
        self.c + self.b * s + self.a * s * s
    }
}

fn factors_eps(coef: &ExpansionCoefficients, q: usize, eps: f64) -> (f64, f64, f64) {
    let q = q as f64;
    let a = eps * coef.a3 / (12.0 * q * (q + 2.0) * (q + 4.0));
    let b = eps * (coef.a2 - 2.0 * coef.a3) / (12.0 * q * (q + 2.0));
    let c = eps * (coef.a1 - coef.a2 + coef.a3) / (12.0 * q);
    (a, b, c)
}

fn check_qn(q: usize, n: usize) -> Result<()> {
    if q < 1 {
        return Err(Error::InvalidArgument("q must be >= 1".into()));
    }
    if n < 1 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    Ok(())
}

fn df(k: usize) -> Result<ChiSquareDf> {
    ChiSquareDf::new(k as u32)
}

/// `G_q(x) + ε/24 Σ R_i G_{q+2i}(x)`, unclamped.
pub fn expanded_cdf_eps(x: f64, coef: &ExpansionCoefficients, q: usize, eps: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("expanded cdf needs x >= 0, got {x}")));
    }
    let mut corr = 0.0;
    for (i, r) in coef.r.iter().enumerate() {
        corr += r * chi2_cdf(x, df(q + 2 * i)?)?;
    }
    Ok(chi2_cdf(x, df(q)?)? + eps * corr / 24.0)
}

pub fn expanded_cdf(x: f64, coef: &ExpansionCoefficients, q: usize, n: usize) -> Result<f64> {
    check_qn(q, n)?;
    expanded_cdf_eps(x, coef, q, 1.0 / n as f64)
}

/// Upper tail of the expansion, computed from chi-square upper tails so
/// that small p-values keep their digits. Uses `Σ R_i = 0`.
pub fn expanded_sf_eps(x: f64, coef: &ExpansionCoefficients, q: usize, eps: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("expanded sf needs x >= 0, got {x}")));
    }
    let mut corr = 0.0;
    for (i, r) in coef.r.iter().enumerate() {
        corr += r * chi2_sf(x, df(q + 2 * i)?)?;
    }
    Ok(chi2_sf(x, df(q)?)? + eps * corr / 24.0)
}

/// `S* = S {1 - (c + bS + aS²)}`, never clamped.
pub fn corrected_statistic(
    s: f64,
    coef: &ExpansionCoefficients,
    q: usize,
    n: usize,
) -> Result<(f64, Vec<Warning>)> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("statistic must be >= 0, got {s}")));
    }
    let f = BartlettFactors::new(coef, q, n)?;
    let adj = f.factor(s);
    let s_star = s * (1.0 - adj);
    let mut w = Vec::new();
    if adj.abs() > 0.5 {
        w.push(Warning::LargeCorrection);
    }
    if s_star < 0.0 {
        w.push(Warning::NegativeCorrected);
    }
    Ok((s_star, w))
}

/// Percentile `z_{1-γ}` of the expansion, to order ε.
pub fn modified_quantile_eps(gamma: f64, coef: &ExpansionCoefficients, q: usize, eps: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0,1), got {gamma}")));
    }
    let x = chi2_quantile(1.0 - gamma, df(q)?)?;
    let qf = q as f64;
    let t3 = coef.a3 * x * (x * x + (qf + 4.0) * x + (qf + 2.0) * (qf + 4.0))
        / (qf * (qf + 2.0) * (qf + 4.0));
    let t2 = x * (x + qf + 2.0) * (coef.a2 - 3.0 * coef.a3) / (qf * (qf + 2.0));
    let t1 = x * (3.0 * coef.a3 - 2.0 * coef.a2 + coef.a1) / qf;
    Ok(x + eps * (t3 + t2 + t1) / 12.0)
}

pub fn modified_quantile(gamma: f64, coef: &ExpansionCoefficients, q: usize, n: usize) -> Result<f64> {
    check_qn(q, n)?;
    modified_quantile_eps(gamma, coef, q, 1.0 / n as f64)
}

/// `(μ1', μ2, μ3)`: mean, variance and third central moment to order 1/n.
pub fn approximate_moments(coef: &ExpansionCoefficients, q: usize, n: usize) -> Result<(f64, f64, f64)> {
    check_qn(q, n)?;
    let (q, n) = (q as f64, n as f64);
    Ok((
        q + coef.a1 / (12.0 * n),
        2.0 * q + (coef.a1 + coef.a2) / (3.0 * n),
        8.0 * q + 2.0 * (coef.a1 + 2.0 * coef.a2 + coef.a3) / n,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "S_star")]
    pub s_star: f64,
    pub p_asymptotic: f64,
    pub p_expanded: f64,
    pub p_corrected: f64,
    pub z_modified: f64,
    pub gamma: f64,
    /// Raw `Pr(S <= s)` from the expansion, before any clamping.
    pub expanded_cdf_raw: f64,
    pub n: usize,
    pub q: usize,
    pub coefficients: ExpansionCoefficients,
    pub warnings: Vec<Warning>,
}

impl TestReport {
    pub fn reject_asymptotic(&self) -> bool {
        self.p_asymptotic < self.gamma
    }
    pub fn reject_expanded(&self) -> bool {
        self.p_expanded < self.gamma
    }
    pub fn reject_corrected(&self) -> bool {
        self.p_corrected < self.gamma
    }
    pub fn reject_modified(&self) -> bool {
        self.s > self.z_modified
    }
}

fn clamp_p(p: f64, w: &mut Vec<Warning>) -> f64 {
    if (0.0..=1.0).contains(&p) {
        return p;
    }
    if !w.contains(&Warning::PValueClamped) {
        w.push(Warning::PValueClamped);
    }
    p.clamp(0.0, 1.0)
}

/// All three procedures at level `gamma`.
pub fn run_test(s: f64, coef: &ExpansionCoefficients, q: usize, n: usize, gamma: f64) -> Result<TestReport> {
    check_qn(q, n)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0,1), got {gamma}")));
    }
    let mut warnings = Vec::new();
    let s = if s < 0.0 && s >= -1e-10 {
        warnings.push(Warning::StatisticClamped);
        0.0
    } else {
        s
    };
    let eps = 1.0 / n as f64;
    let (s_star, w) = corrected_statistic(s, coef, q, n)?;
    warnings.extend(w);

    let raw_cdf = expanded_cdf_eps(s, coef, q, eps)?;
    if !(0.0..=1.0).contains(&raw_cdf) {
        warnings.push(Warning::ExpandedCdfOutOfRange);
    }
    let p_asymptotic = chi2_sf(s, df(q)?)?;
    let p_expanded = clamp_p(expanded_sf_eps(s, coef, q, eps)?, &mut warnings);
    // a negative S* lies below every chi-square quantile
    let p_corrected = if s_star <= 0.0 { 1.0 } else { chi2_sf(s_star, df(q)?)? };
    let z_modified = modified_quantile_eps(gamma, coef, q, eps)?;
    Ok(TestReport {
        s,
        s_star,
        p_asymptotic,
        p_expanded,
        p_corrected,
        z_modified,
        gamma,
        expanded_cdf_raw: raw_cdf,
        n,
        q,
        coefficients: *coef,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coef(a1: f64, a2: f64, a3: f64) -> ExpansionCoefficients {
        ExpansionCoefficients::new(a1, a2, a3)
    }

    #[test]
    fn cdf_endpoints() {
        let c = coef(3.0, -7.0, 11.0);
        assert_eq!(expanded_cdf(0.0, &c, 2, 10).unwrap(), 0.0);
        assert!((expanded_cdf(1e4, &c, 2, 10).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn null_coefficients_reduce_to_chi_square() {
        let c = coef(0.0, 0.0, 0.0);
        for &x in &[0.3, 2.0, 9.0] {
            let g = chi2_cdf(x, ChiSquareDf::new(3).unwrap()).unwrap();
            assert_eq!(expanded_cdf(x, &c, 3, 7).unwrap(), g);
        }
        assert_eq!(corrected_statistic(2.5, &c, 1, 5).unwrap().0, 2.5);
        let x = chi2_quantile(0.95, ChiSquareDf::new(2).unwrap()).unwrap();
        assert_eq!(modified_quantile(0.05, &c, 2, 9).unwrap(), x);
        assert_eq!(approximate_moments(&c, 3, 4).unwrap(), (3.0, 6.0, 24.0));
        let r = run_test(2.2, &c, 1, 15, 0.05).unwrap();
        assert_eq!(r.p_asymptotic, r.p_expanded);
        assert_eq!(r.p_asymptotic, r.p_corrected);
    }

    #[test]
    fn exponential_corrected_statistic() {
        // S* = S {1 - (3 - 11 S + 2 S²)/(18 n)} at n = 20, S = 3
        let (s_star, w) = corrected_statistic(3.0, &coef(0.0, 18.0, 20.0), 1, 20).unwrap();
        assert!((s_star - 3.1).abs() < 1e-14);
        assert!(w.is_empty());
    }

    #[test]
    fn normal_mean_fixed_point() {
        let (s_star, _) = corrected_statistic(3.0, &coef(0.0, -18.0, 0.0), 1, 10).unwrap();
        assert!((s_star - 3.0).abs() < 1e-15);
    }

    #[test]
    fn normal_mean_modified_quantile() {
        // z = x + x(3 - x)/(2n)
        let z = modified_quantile(0.05, &coef(0.0, -18.0, 0.0), 1, 20).unwrap();
        let x = chi2_quantile(0.95, ChiSquareDf::new(1).unwrap()).unwrap();
        assert!((z - (x + x * (3.0 - x) / 40.0)).abs() < 1e-13);
        assert!((z - 3.760644).abs() < 1e-4);
    }

    #[test]
    fn quantile_tends_to_chi_square() {
        let c = coef(0.0, 18.0, 20.0);
        let x = chi2_quantile(0.95, ChiSquareDf::new(1).unwrap()).unwrap();
        assert!((modified_quantile(0.05, &c, 1, 100_000_000).unwrap() - x).abs() < 1e-6);
    }

    #[test]
    fn exponential_moments() {
        let (m1, m2, m3) = approximate_moments(&coef(0.0, 18.0, 20.0), 1, 10).unwrap();
        assert!((m1 - 1.0).abs() < 1e-15 && (m2 - 2.6).abs() < 1e-14 && (m3 - 19.2).abs() < 1e-13);
        let (m1, m2, m3) = approximate_moments(&coef(24.0, 30.0, 10.0), 1, 10).unwrap();
        assert!((m1 - 1.2).abs() < 1e-15 && (m2 - 3.8).abs() < 1e-14 && (m3 - 26.8).abs() < 1e-13);
    }

    #[test]
    fn zero_statistic_has_unit_p_values() {
        let r = run_test(0.0, &coef(0.0, 18.0, 20.0), 1, 20, 0.05).unwrap();
        assert_eq!((r.p_asymptotic, r.p_expanded, r.p_corrected), (1.0, 1.0, 1.0));
    }

    #[test]
    fn exponential_report_composes() {
        let c = coef(0.0, 18.0, 20.0);
        let s = 3.841459;
        let r = run_test(s, &c, 1, 20, 0.05).unwrap();
        let s_star = s * (1.0 - (3.0 - 11.0 * s + 2.0 * s * s) / 360.0);
        assert!((r.s_star - s_star).abs() < 1e-13);
        let p = 1.0 - chi2_cdf(s_star, ChiSquareDf::new(1).unwrap()).unwrap();
        assert!((r.p_corrected - p).abs() < 1e-13);
        assert!((1.0 - r.expanded_cdf_raw - r.p_expanded).abs() < 1e-13, "{} {}", r.expanded_cdf_raw, r.p_expanded);
    }

    #[test]
    fn large_statistics_raise_warnings() {
        let (s_star, w) = corrected_statistic(40.0, &coef(0.0, 18.0, 20.0), 1, 5).unwrap();
        assert!(s_star < 0.0);
        assert!(w.contains(&Warning::LargeCorrection) && w.contains(&Warning::NegativeCorrected));
        let r = run_test(40.0, &coef(0.0, 18.0, 20.0), 1, 5, 0.05).unwrap();
        assert_eq!(r.p_corrected, 1.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let c = coef(0.0, 0.0, 0.0);
        assert!(expanded_cdf(-1.0, &c, 1, 5).is_err());
        assert!(expanded_cdf(1.0, &c, 1, 0).is_err());
        assert!(modified_quantile(1.0, &c, 1, 5).is_err());
        assert!(corrected_statistic(-0.1, &c, 1, 5).is_err());
        assert!(run_test(1.0, &c, 0, 5, 0.05).is_err());
    }
}
