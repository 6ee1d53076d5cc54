use std::f64::consts::{PI, TAU};

use serde::Serialize;

use super::expfam::normals;
use super::tensor::{bundle_from_fn, count_nuisance};
use super::{check_finite, check_len, check_min_len, mean, newton_bracketed, Data, ModelFamily};
use crate::cumulant::CumulantBundle;
use crate::error::{Error, Result};
use crate::expansion::{coefficients_orthogonal, ExpansionCoefficients, OrthogonalCumulants};
use crate::rng::StreamRng;
use crate::special::normal_tail_scaled;

const REL_TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;

/// Birnbaum–Saunders with shape `φ` under test and scale `β` as nuisance:
/// `Pr(X <= x) = Φ(ρ(x/β)/φ)`, `ρ(z) = z^(1/2) - z^(-1/2)`.
pub struct BirnbaumSaunders;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BsFit {
    pub phi: f64,
    pub beta: f64,
}

/// `s = mean x`, `r = mean 1/x`.
fn moments(x: &[f64]) -> (f64, f64) {
    (mean(x), x.iter().map(|v| 1.0 / v).sum::<f64>() / x.len() as f64)
}

/// `β U_β(φ, β)` and its `β`-derivative.
fn beta_score(x: &[f64], s: f64, r: f64, phi2: f64, beta: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let (mut a, mut da) = (0.0, 0.0);
    for &v in x {
        let w = 1.0 / (v + beta);
        a += beta * w;
        da += v * w * w;
    }
    let h = -0.5 + a / n + (s / beta - r * beta) / (2.0 * phi2);
    let dh = da / n + (-s / (beta * beta) - r) / (2.0 * phi2);
    (h, dh)
}

/// Maximum likelihood fit. With `phi0 = Some(φ0)` the shape is fixed and
/// the scale solves its score equation; otherwise the scale maximises the
/// profile likelihood (the shape is eliminated through
/// `φ² = s/β + rβ - 2`) and the shape follows from that identity.
pub fn fit_birnbaum_saunders(data: &Data, phi0: Option<f64>) -> Result<BsFit> {
    let x = data.one()?;
    BirnbaumSaunders.validate(data)?;
    let (s, r) = moments(x);
    match phi0 {
        Some(phi) => {
            if !(phi > 0.0 && phi.is_finite()) {
                return Err(Error::InvalidArgument(format!("phi0 must be positive, got {phi}")));
            }
            let phi2 = phi * phi;
            // outside [lo, hi] the sign of β U_β is fixed
            let disc = (phi2 * phi2 + 4.0 * r * s).sqrt();
            let lo = (-phi2 + disc) / (2.0 * r);
            let hi = (phi2 + disc) / (2.0 * r);
            let start = (s / r).sqrt();
            let beta = newton_bracketed("restricted scale", lo, hi, start, REL_TOL, MAX_ITER, |b| {
                beta_score(x, s, r, phi2, b)
            })?;
            Ok(BsFit { phi, beta })
        }
        None => {
            // harmonic and arithmetic means bracket the profile root
            let (lo, hi) = (1.0 / r, s);
            if !(s * r - 1.0 > 1e-14) {
                return Err(Error::Degenerate("all observations are equal".into()));
            }
            let profile = |b: f64| {
                let num = s / b - r * b;
                let den = s / b + r * b - 2.0;
                let (dnum, dden) = (-s / (b * b) - r, -s / (b * b) + r);
                let n = x.len() as f64;
                let (mut a, mut da) = (0.0, 0.0);
                for &v in x {
                    let w = 1.0 / (v + b);
                    a += b * w;
                    da += v * w * w;
                }
                let h = -0.5 + a / n + num / (2.0 * den);
                let dh = da / n + (dnum * den - num * dden) / (2.0 * den * den);
                (h, dh)
            };
            let beta = newton_bracketed("profile scale", lo, hi, (s / r).sqrt(), REL_TOL, MAX_ITER, profile)?;
            let phi2 = s / beta + r * beta - 2.0;
            if !(phi2 > 0.0) {
                return Err(Error::Degenerate("shape estimate is zero".into()));
            }
            Ok(BsFit { phi: phi2.sqrt(), beta })
        }
    }
}

/// `h(φ) = φ (π/2)^(1/2) - π e^(2/φ²) {1 - Φ(2/φ)}`.
pub fn bs_h(phi: f64) -> f64 {
    phi * (PI / 2.0).sqrt() - PI * normal_tail_scaled(2.0 / phi)
}

/// Expectations `e_k = E (1 + X/β)^(-k)` and the shape derivatives needed
/// for the cumulant derivatives. With `c = 2/φ` and
/// `J1 = (2π)^(1/2) c e^(c²/2) {1 - Φ(c)}`:
///
/// ```text
/// e2 = (2 - J1)/4
/// e3 = 1/8 + 3(1 - J1)/8
/// e4 = 1/16 + 3(1 - J1)/8 + (1 - 2 J1 + J2)/16,  J2 = {J1 + c²(1 - J1)}/2
/// ```
struct Expectations {
    e2: f64,
    e3: f64,
    e4: f64,
    e2_d: f64,
    e2_dd: f64,
    e3_d: f64,
}

fn expectations(phi: f64) -> Expectations {
    let c = 2.0 / phi;
    let rt = TAU.sqrt() * normal_tail_scaled(c);
    let j1 = c * rt;
    let j2 = 0.5 * (j1 + c * c * (1.0 - j1));
    // dJ1/dc and d²J1/dc², using R'(c) = c R(c) - (2π)^(-1/2)
    let j1_c = (1.0 + c * c) * rt - c;
    let j1_cc = c * (3.0 + c * c) * rt - c * c - 2.0;
    // dc/dφ = -c²/2, d²c/dφ² = c³/2
    let j1_d = -0.5 * c * c * j1_c;
    let j1_dd = 0.25 * c.powi(4) * j1_cc + 0.5 * c.powi(3) * j1_c;
    Expectations {
        e2: (2.0 - j1) / 4.0,
        e3: 0.125 + 0.375 * (1.0 - j1),
        e4: 0.0625 + 0.375 * (1.0 - j1) + (1.0 - 2.0 * j1 + j2) / 16.0,
        e2_d: -j1_d / 4.0,
        e2_dd: -j1_dd / 4.0,
        e3_d: -0.375 * j1_d,
    }
}

/// Cumulant with `nb` scale indices is `β^(-nb) f(φ)`; returns
/// `[f, f', f'']` (derivatives only where the bundle needs them).
fn shape_part(order: usize, nb: i32, phi: f64, e: &Expectations) -> [f64; 3] {
    let f = phi;
    match (order, nb) {
        (2, 0) => [-2.0 / (f * f), 4.0 / f.powi(3), -12.0 / f.powi(4)],
        (2, 2) => [-1.0 / (f * f) - e.e2, 2.0 / f.powi(3) - e.e2_d, -6.0 / f.powi(4) - e.e2_dd],
        (3, 0) => [10.0 / f.powi(3), -30.0 / f.powi(4), f64::NAN],
        (3, 2) => [2.0 / f.powi(3) + 1.0 / f, -6.0 / f.powi(4) - 1.0 / (f * f), f64::NAN],
        (3, 3) => [3.0 / (f * f) + 0.5 + 2.0 * e.e3, -6.0 / f.powi(3) + 2.0 * e.e3_d, f64::NAN],
        (4, 0) => [-54.0 / f.powi(4), f64::NAN, f64::NAN],
        (4, 2) => [-6.0 / f.powi(4) - 3.0 / (f * f), f64::NAN, f64::NAN],
        (4, 3) => [-6.0 / f.powi(3) - 3.0 / f, f64::NAN, f64::NAN],
        (4, 4) => [-12.0 / (f * f) - 3.0 - 6.0 * e.e4, f64::NAN, f64::NAN],
        // one scale index with the rest shape, or its reflection: zero
        _ => [0.0; 3],
    }
}

pub(crate) fn bs_bundle(phi: f64, beta: f64) -> CumulantBundle {
    let e = expectations(phi);
    let part = |idx: &[usize]| (count_nuisance(idx), shape_part(idx.len(), count_nuisance(idx), phi, &e));
    bundle_from_fn(
        2,
        |idx| {
            let (nb, f) = part(idx);
            beta.powi(-nb) * f[0]
        },
        |idx, s| {
            let (nb, f) = part(idx);
            if s == 0 {
                beta.powi(-nb) * f[1]
            } else {
                -(nb as f64) * beta.powi(-nb - 1) * f[0]
            }
        },
        |idx, j, r| {
            let (nb, f) = part(idx);
            let nf = nb as f64;
            match j + r {
                0 => beta.powi(-nb) * f[2],
                1 => -nf * beta.powi(-nb - 1) * f[1],
                _ => nf * (nf + 1.0) * beta.powi(-nb - 2) * f[0],
            }
        },
    )
}

impl ModelFamily for BirnbaumSaunders {
    fn name(&self) -> &str {
        "bs"
    }
    fn p(&self) -> usize {
        2
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["phi", "beta"]
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_len(theta, 2)?;
        if !theta.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("phi and beta must be positive, got {theta:?}")));
        }
        Ok(())
    }

    fn sample(&self, theta: &[f64], n: usize, rng: &mut StreamRng) -> Result<Data> {
        self.check_theta(theta)?;
        let (phi, beta) = (theta[0], theta[1]);
        Ok(Data::One(
            normals(n, rng)
                .into_iter()
                .map(|z| {
                    let w = 0.5 * phi * z;
                    beta * (w + (w * w + 1.0).sqrt()).powi(2)
                })
                .collect(),
        ))
    }

    fn validate(&self, data: &Data) -> Result<()> {
        let x = data.one()?;
        check_min_len(data, 2)?;
        check_finite(x, 0)?;
        for (i, &v) in x.iter().enumerate() {
            if v <= 0.0 {
                return Err(Error::Support { index: i, value: v, reason: "observations must be positive" });
            }
        }
        Ok(())
    }

    fn fit_unrestricted(&self, data: &Data) -> Result<Vec<f64>> {
        let f = fit_birnbaum_saunders(data, None)?;
        Ok(vec![f.phi, f.beta])
    }

    fn fit_restricted(&self, data: &Data, theta10: &[f64]) -> Result<Vec<f64>> {
        let f = fit_birnbaum_saunders(data, Some(theta10[0]))?;
        Ok(vec![f.phi, f.beta])
    }

    fn score(&self, data: &Data, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let x = data.one()?;
        let (s, r) = moments(x);
        let (phi, beta) = (theta[0], theta[1]);
        let u_phi = -1.0 / phi + (s / beta + beta * r - 2.0) / phi.powi(3);
        let (h, _) = beta_score(x, s, r, phi * phi, beta);
        Ok(vec![u_phi, h / beta])
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle> {
        self.check_theta(theta)?;
        Ok(bs_bundle(theta[0], theta[1]))
    }

    fn closed_form_coefficients(&self, theta: &[f64]) -> Result<ExpansionCoefficients> {
        let b = self.cumulants(theta)?;
        Ok(coefficients_orthogonal(&OrthogonalCumulants::from_bundle(&b)?)?.coefficients)
    }

    /// `n (φ̂ - φ0)/φ0³ {s̄ + r̄ - (2 + φ0²)}` with `s̄ = s/β̃`, `r̄ = β̃ r`.
    fn closed_form_statistic(&self, data: &Data, theta10: &[f64]) -> Option<Result<f64>> {
        let run = || -> Result<f64> {
            let x = data.one()?;
            let phi0 = theta10[0];
            let hat = fit_birnbaum_saunders(data, None)?;
            let tilde = fit_birnbaum_saunders(data, Some(phi0))?;
            let (s, r) = moments(x);
            let (sb, rb) = (s / tilde.beta, tilde.beta * r);
            Ok(x.len() as f64 * (hat.phi - phi0) / phi0.powi(3) * (sb + rb - (2.0 + phi0 * phi0)))
        };
        Some(run())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_stream;
    use crate::special::std_normal_pdf;

    /// `E g(X)` by Simpson's rule over the normal variate of the sampler.
    fn expect(phi: f64, g: impl Fn(f64) -> f64) -> f64 {
        let (a, b, m) = (-12.0, 12.0, 24_000);
        let h = (b - a) / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let z = a + i as f64 * h;
            let w = 0.5 * phi * z;
            let t = (w + (w * w + 1.0).sqrt()).powi(2);
            let c = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += c * g(t) * std_normal_pdf(z);
        }
        acc * h / 3.0
    }

    #[test]
    fn tail_expectations_match_quadrature() {
        for &phi in &[0.2, 0.5, 1.0, 2.0, 5.0] {
            let e = expectations(phi);
            for (k, v) in [(2, e.e2), (3, e.e3), (4, e.e4)] {
                let q = expect(phi, |t| (1.0 + t).powi(-k));
                assert!((v - q).abs() < 1e-10, "phi={phi} e{k}: {v} vs {q}");
            }
        }
    }

    #[test]
    fn expectation_derivatives_match_differences() {
        let h = 1e-4;
        for &phi in &[0.3, 1.0, 2.5] {
            let (lo, mid, hi) = (expectations(phi - h), expectations(phi), expectations(phi + h));
            assert!(((hi.e2 - lo.e2) / (2.0 * h) - mid.e2_d).abs() < 1e-7);
            assert!(((hi.e3 - lo.e3) / (2.0 * h) - mid.e3_d).abs() < 1e-7);
            assert!(((hi.e2 - 2.0 * mid.e2 + lo.e2) / (h * h) - mid.e2_dd).abs() < 1e-5);
        }
    }

    #[test]
    fn information_matches_h_form() {
        // κ_ββ = -{1 + φ (2π)^(-1/2) h(φ)} / (φ² β²)
        for &phi in &[0.1, 0.5, 1.0, 3.0] {
            let beta = 2.0;
            let b = bs_bundle(phi, beta);
            let want = -(1.0 + phi * bs_h(phi) / TAU.sqrt()) / (phi * phi * beta * beta);
            assert!((b.kappa2[[1, 1]] - want).abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn all_equal_data_fix_the_scale() {
        let d = Data::One(vec![2.5; 6]);
        let f = fit_birnbaum_saunders(&d, Some(0.7)).unwrap();
        assert!((f.beta - 2.5).abs() < 1e-12);
        assert!(fit_birnbaum_saunders(&d, None).unwrap_err().is_convergence());
    }

    #[test]
    fn fits_solve_their_score_equations() {
        let mut rng = replicate_stream(9, 30, 0);
        for _ in 0..20 {
            let d = BirnbaumSaunders.sample(&[0.8, 1.5], 30, &mut rng).unwrap();
            let hat = BirnbaumSaunders.fit_unrestricted(&d).unwrap();
            let u = BirnbaumSaunders.score(&d, &hat).unwrap();
            assert!(u[0].abs() < 1e-8 && u[1].abs() < 1e-8, "{u:?}");
            let tilde = BirnbaumSaunders.fit_restricted(&d, &[1.0]).unwrap();
            assert!(BirnbaumSaunders.score(&d, &tilde).unwrap()[1].abs() < 1e-8);
        }
    }

    #[test]
    fn large_sample_shape_estimate_is_consistent() {
        let mut rng = replicate_stream(2024, 5000, 0);
        let d = BirnbaumSaunders.sample(&[1.0, 1.0], 5000, &mut rng).unwrap();
        let f = fit_birnbaum_saunders(&d, None).unwrap();
        // Var(φ̂) ≈ -1/(n κ_φφ) = φ²/(2n)
        let se = (1.0f64 / (2.0 * 5000.0)).sqrt();
        assert!((f.phi - 1.0).abs() < 3.0 * se, "phi_hat = {}", f.phi);
    }

    #[test]
    fn nonpositive_data_is_rejected() {
        assert!(matches!(
            fit_birnbaum_saunders(&Data::One(vec![1.0, 0.0]), None),
            Err(Error::Support { index: 1, .. })
        ));
    }
}
