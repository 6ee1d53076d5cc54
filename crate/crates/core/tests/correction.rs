use gradcorr::correction::{
    approximate_moments, expanded_cdf, expanded_cdf_eps, modified_quantile_eps, BartlettFactors,
};
use gradcorr::expansion::ExpansionCoefficients;
use gradcorr::models::{builtin_models, coefficients_at, model_by_name, ModelParams, Route};
use gradcorr::special::{chi2_cdf, chi2_pdf, chi2_sf, ChiSquareDf};
use proptest::prelude::*;

fn all_coefficients() -> Vec<(&'static str, ExpansionCoefficients, usize)> {
    builtin_models()
        .into_iter()
        .map(|i| {
            let r = model_by_name(i.name, &ModelParams::default()).unwrap();
            (i.name, coefficients_at(r.model.as_ref(), &r.theta, Route::General).unwrap(), i.q)
        })
        .collect()
}

#[test]
fn first_order_cancellation_of_quantile_and_cdf() {
    let h = 1e-5;
    for (name, coef, q) in all_coefficients() {
        for gamma in [0.01, 0.05, 0.10] {
            let g = |eps: f64| {
                expanded_cdf_eps(modified_quantile_eps(gamma, &coef, q, eps).unwrap(), &coef, q, eps).unwrap()
            };
            assert!((g(0.0) - (1.0 - gamma)).abs() < 1e-12);
            let d = (g(h) - g(-h)) / (2.0 * h);
            assert!(d.abs() <= 1e-6, "{name} gamma={gamma}: g'(0) = {d:e}");
        }
    }
}

/// `∫ x dF` for the expansion's density: Simpson over `[0, q+40]` in the
/// variable `t = √x`, which removes the `x^{-1/2}` singularity of the
/// one-degree density, plus the exact tail `∫_L^∞ x g_k = k G̅_{k+2}(L)`.
fn expanded_mean_by_quadrature(coef: &ExpansionCoefficients, q: usize, n: usize) -> f64 {
    let density = |x: f64| {
        let mut f = chi2_pdf(x, ChiSquareDf::new(q as u32).unwrap());
        for (i, r) in coef.r.iter().enumerate() {
            f += r * chi2_pdf(x, ChiSquareDf::new((q + 2 * i) as u32).unwrap()) / (24.0 * n as f64);
        }
        f
    };
    let upper = ((q + 40) as f64).sqrt();
    let steps = 20_000;
    let h = upper / steps as f64;
    let integrand = |t: f64| if t == 0.0 { 0.0 } else { 2.0 * t.powi(3) * density(t * t) };
    let mut sum = integrand(0.0) + integrand(upper);
    for i in 1..steps {
        sum += integrand(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let l = (q + 40) as f64;
    let tail = |k: usize| k as f64 * chi2_sf(l, ChiSquareDf::new((k + 2) as u32).unwrap()).unwrap();
    let mut tails = tail(q);
    for (i, r) in coef.r.iter().enumerate() {
        tails += r * tail(q + 2 * i) / (24.0 * n as f64);
    }
    sum * h / 3.0 + tails
}

#[test]
fn expansion_density_reproduces_mean() {
    for (name, coef, q) in all_coefficients() {
        let (mean, _, _) = approximate_moments(&coef, q, 50).unwrap();
        let quad = expanded_mean_by_quadrature(&coef, q, 50);
        assert!((quad - mean).abs() <= 1e-6, "{name}: {quad} vs {mean}");
    }
}

#[test]
fn factors_match_their_definition() {
    let coef = ExpansionCoefficients::new(24.0, 63.0, 45.0);
    let f = BartlettFactors::new(&coef, 1, 10).unwrap();
    assert!((f.a - 45.0 / (12.0 * 10.0 * 15.0)).abs() < 1e-15);
    assert!((f.b - (63.0 - 90.0) / (12.0 * 10.0 * 3.0)).abs() < 1e-15);
    assert!((f.c - (24.0 - 63.0 + 45.0) / 120.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn expansion_stays_within_its_weight_of_chi_square(
        a1 in -60.0..60.0f64, a2 in -60.0..60.0f64, a3 in 0.0..60.0f64,
        n in 2usize..200, q in 1usize..4, x in 0.0..60.0f64,
    ) {
        let coef = ExpansionCoefficients::new(a1, a2, a3);
        let f = expanded_cdf(x, &coef, q, n).unwrap();
        let g = chi2_cdf(x, ChiSquareDf::new(q as u32).unwrap()).unwrap();
        let bound = coef.r.iter().map(|r| r.abs()).sum::<f64>() / (24.0 * n as f64);
        prop_assert!((f - g).abs() <= bound + 1e-14);
    }

    #[test]
    fn expansion_has_chi_square_endpoints(a1 in -60.0..60.0f64, a2 in -60.0..60.0f64, a3 in 0.0..60.0f64, n in 2usize..200) {
        let coef = ExpansionCoefficients::new(a1, a2, a3);
        prop_assert_eq!(expanded_cdf(0.0, &coef, 1, n).unwrap(), 0.0);
        prop_assert!((expanded_cdf(1e4, &coef, 1, n).unwrap() - 1.0).abs() < 1e-12);
    }
}
