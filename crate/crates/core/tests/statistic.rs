use gradcorr::cumulant::derive_mixed_cumulants;
use gradcorr::models::{builtin_models, gradient_statistic, model_by_name, Data, ModelParams};
use gradcorr::rng::replicate_stream;

#[test]
fn generic_statistic_matches_printed_closed_forms() {
    for name in ["exponential", "normal2", "two-sample-exponential", "bs"] {
        let r = model_by_name(name, &ModelParams::default()).unwrap();
        let theta10 = &r.theta[..1];
        for rep in 0..100u64 {
            let n = 6 + 2 * (rep as usize % 20);
            let data = r.model.sample(&r.theta, n, &mut replicate_stream(11, n as u64, rep)).unwrap();
            let generic = gradient_statistic(r.model.as_ref(), &data, theta10).unwrap().value;
            let closed = r.model.closed_form_statistic(&data, theta10).unwrap().unwrap();
            let err = (generic - closed).abs() / closed.abs().max(1e-300);
            assert!(err <= 1e-8 || (generic - closed).abs() < 1e-12, "{name} rep {rep}: {generic} vs {closed}");
        }
    }
}

#[test]
fn fits_solve_their_score_equations() {
    for info in builtin_models() {
        let r = model_by_name(info.name, &ModelParams::default()).unwrap();
        let q = info.q;
        for rep in 0..20u64 {
            let data = r.model.sample(&r.theta, 30, &mut replicate_stream(5, 30, rep)).unwrap();
            let hat = r.model.fit_unrestricted(&data).unwrap();
            let tilde = r.model.fit_restricted(&data, &r.theta[..q]).unwrap();
            assert_eq!(&tilde[..q], &r.theta[..q]);
            let u_hat = r.model.score(&data, &hat).unwrap();
            let u_tilde = r.model.score(&data, &tilde).unwrap();
            let n = data.len() as f64;
            for (j, u) in u_hat.iter().enumerate() {
                assert!(u.abs() / n <= 1e-8, "{} rep {rep}: U_{j}(θ̂) = {u}", info.name);
            }
            for (j, u) in u_tilde.iter().enumerate().skip(q) {
                assert!(u.abs() / n <= 1e-8, "{} rep {rep}: U_{j}(θ̃) = {u}", info.name);
            }
        }
    }
}

/// `E(U_φφ U_φ) = n κ_{φφ,φ}` for the exponential model, by simulation.
#[test]
fn exponential_mixed_cumulant_by_simulation() {
    let r = model_by_name("exponential", &ModelParams::parse("phi=1.5").unwrap()).unwrap();
    let phi = r.theta[0];
    let n = 200;
    let reps = 50_000u64;
    let mut prod = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let Data::One(x) = r.model.sample(&r.theta, n, &mut replicate_stream(3, n as u64, rep)).unwrap() else {
            unreachable!()
        };
        let t: f64 = x.iter().sum();
        let nf = n as f64;
        let u1 = -nf / phi + t / (phi * phi);
        let u2 = nf / (phi * phi) - 2.0 * t / phi.powi(3);
        prod.push(u1 * u2);
    }
    let m = prod.iter().sum::<f64>() / reps as f64;
    let sd = (prod.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let se = sd / (reps as f64).sqrt();
    let b = r.model.cumulants(&r.theta).unwrap();
    let expect = n as f64 * derive_mixed_cumulants(&b).unwrap().k_jr_s[[0, 0, 0]];
    assert!((m - expect).abs() <= 3.0 * se, "{m} vs {expect} (se {se})");
}
