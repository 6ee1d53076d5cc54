use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{check_finite, check_len, check_min_len, mean, Data, ModelFamily};
use crate::cumulant::CumulantBundle;
use crate::error::{Error, Result};
use crate::expansion::{coefficients_expfam, coefficients_one_param, ExpFamDerivs, ExpansionCoefficients};
use crate::rng::StreamRng;

type Curve = Box<dyn Fn(f64) -> [f64; 4] + Send + Sync>;

/// Ingredients of a one-parameter family with density
/// `exp{-α(φ) d(x) + v(x)} / ξ(φ)`, `β = ξ'/(ξ α')`.
///
/// `alpha` and `beta` return the value and first three derivatives.
pub struct ExpFamilyParts {
    pub name: &'static str,
    pub param: &'static str,
    pub alpha: Curve,
    pub beta: Curve,
    /// The `φ` with `β(φ) = b`, when it lies in the parameter space.
    pub beta_inv: Box<dyn Fn(f64) -> Option<f64> + Send + Sync>,
    pub d: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `None` inside the support, otherwise the reason.
    pub support: Box<dyn Fn(f64) -> Option<&'static str> + Send + Sync>,
    pub param_ok: fn(f64) -> bool,
    pub sampler: Box<dyn Fn(f64, usize, &mut StreamRng) -> Vec<f64> + Send + Sync>,
}

pub struct ExpFamily {
    parts: ExpFamilyParts,
    /// Use the cumulant-based scalar formulas for the closed route instead
    /// of the `α, β` ones.
    scalar_route: bool,
}

impl ExpFamily {
    pub fn new(parts: ExpFamilyParts) -> Self {
        ExpFamily { parts, scalar_route: false }
    }

    pub fn derivs(&self, phi: f64) -> ExpFamDerivs {
        let a = (self.parts.alpha)(phi);
        let b = (self.parts.beta)(phi);
        ExpFamDerivs { alpha: [a[1], a[2], a[3]], beta: [b[1], b[2], b[3]] }
    }

    fn d_bar(&self, x: &[f64]) -> f64 {
        mean(&x.iter().map(|&v| (self.parts.d)(v)).collect::<Vec<_>>())
    }
}

impl ModelFamily for ExpFamily {
    fn name(&self) -> &str {
        self.parts.name
    }
    fn p(&self) -> usize {
        1
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec![self.parts.param]
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_len(theta, 1)?;
        if !theta[0].is_finite() || !(self.parts.param_ok)(theta[0]) {
            return Err(Error::InvalidArgument(format!(
                "{} = {} is outside the parameter space of {}",
                self.parts.param, theta[0], self.parts.name
            )));
        }
        Ok(())
    }

    fn sample(&self, theta: &[f64], n: usize, rng: &mut StreamRng) -> Result<Data> {
        self.check_theta(theta)?;
        Ok(Data::One((self.parts.sampler)(theta[0], n, rng)))
    }

    fn validate(&self, data: &Data) -> Result<()> {
        let x = data.one()?;
        check_min_len(data, 1)?;
        check_finite(x, 0)?;
        for (i, &v) in x.iter().enumerate() {
            if let Some(reason) = (self.parts.support)(v) {
                return Err(Error::Support { index: i, value: v, reason });
            }
        }
        Ok(())
    }

    fn fit_unrestricted(&self, data: &Data) -> Result<Vec<f64>> {
        let x = data.one()?;
        let d = self.d_bar(x);
        match (self.parts.beta_inv)(-d) {
            Some(phi) if phi.is_finite() && (self.parts.param_ok)(phi) => Ok(vec![phi]),
            _ => Err(Error::Degenerate(format!(
                "{}: no maximum likelihood estimate for mean d(x) = {d}",
                self.parts.name
            ))),
        }
    }

    fn fit_restricted(&self, _data: &Data, theta10: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta10)?;
        Ok(theta10.to_vec())
    }

    /// `U(φ) = -α'(φ) {β(φ) + d̄}`
    fn score(&self, data: &Data, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let d = self.d_bar(data.one()?);
        let a = (self.parts.alpha)(theta[0]);
        let b = (self.parts.beta)(theta[0]);
        Ok(vec![-a[1] * (b[0] + d)])
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle> {
        self.check_theta(theta)?;
        Ok(CumulantBundle::scalar(&self.derivs(theta[0]).cumulants()))
    }

    fn closed_form_coefficients(&self, theta: &[f64]) -> Result<ExpansionCoefficients> {
        self.check_theta(theta)?;
        let d = self.derivs(theta[0]);
        if self.scalar_route {
            coefficients_one_param(&d.cumulants())
        } else {
            coefficients_expfam(&d)
        }
    }

    fn closed_form_statistic(&self, data: &Data, theta10: &[f64]) -> Option<Result<f64>> {
        if self.parts.name != "exponential" {
            return None;
        }
        Some(data.one().map(|x| {
            let phi0 = theta10[0];
            x.len() as f64 * (mean(x) - phi0).powi(2) / (phi0 * phi0)
        }))
    }
}

/// Uniform on `(0, 1]`.
pub(crate) fn unit_open(rng: &mut StreamRng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// `n` standard normals by the polar method.
pub(crate) fn normals(n: usize, rng: &mut StreamRng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s >= 1.0 || s == 0.0 {
            continue;
        }
        let f = (-2.0 * s.ln() / s).sqrt();
        out.push(u * f);
        out.push(v * f);
    }
    out.truncate(n);
    out
}

pub(crate) fn exponentials(n: usize, rng: &mut StreamRng) -> Vec<f64> {
    (0..n).map(|_| -unit_open(rng).ln()).collect()
}

fn positive(v: f64) -> bool {
    v > 0.0
}

fn any_real(_: f64) -> bool {
    true
}

fn positive_support(x: f64) -> Option<&'static str> {
    (x <= 0.0).then_some("observations must be positive")
}

/// `α = 1/φ`, `β = -φ`, shared by several families.
fn reciprocal_alpha() -> Curve {
    Box::new(|f| [1.0 / f, -1.0 / (f * f), 2.0 / f.powi(3), -6.0 / f.powi(4)])
}

fn negated_beta() -> Curve {
    Box::new(|f| [-f, -1.0, 0.0, 0.0])
}

pub(crate) fn exponential() -> ExpFamily {
    let mut m = ExpFamily::new(ExpFamilyParts {
        name: "exponential",
        param: "phi",
        alpha: reciprocal_alpha(),
        beta: negated_beta(),
        beta_inv: Box::new(|b| Some(-b)),
        d: Box::new(|x| x),
        support: Box::new(positive_support),
        param_ok: positive,
        sampler: Box::new(|phi, n, rng| exponentials(n, rng).into_iter().map(|e| phi * e).collect()),
    });
    m.scalar_route = true;
    m
}

/// Variance `φ` unknown, mean `mu` known.
pub(crate) fn normal_known_mean(mu: f64) -> ExpFamily {
    ExpFamily::new(ExpFamilyParts {
        name: "normal-known-mean",
        param: "phi",
        alpha: Box::new(|f| [0.5 / f, -0.5 / (f * f), 1.0 / f.powi(3), -3.0 / f.powi(4)]),
        beta: negated_beta(),
        beta_inv: Box::new(|b| Some(-b)),
        d: Box::new(move |x| (x - mu) * (x - mu)),
        support: Box::new(|_| None),
        param_ok: positive,
        sampler: Box::new(move |phi, n, rng| normals(n, rng).into_iter().map(|z| mu + phi.sqrt() * z).collect()),
    })
}

/// Mean `mu` unknown, variance `phi` known.
pub(crate) fn normal_known_variance(phi: f64) -> ExpFamily {
    ExpFamily::new(ExpFamilyParts {
        name: "normal-known-variance",
        param: "mu",
        alpha: Box::new(move |m| [-m / phi, -1.0 / phi, 0.0, 0.0]),
        beta: Box::new(|m| [-m, -1.0, 0.0, 0.0]),
        beta_inv: Box::new(|b| Some(-b)),
        d: Box::new(|x| x),
        support: Box::new(|_| None),
        param_ok: any_real,
        sampler: Box::new(move |mu, n, rng| normals(n, rng).into_iter().map(|z| mu + phi.sqrt() * z).collect()),
    })
}

/// Michael, Schucany and Haas transformation with shape `lambda`.
fn inverse_gaussians(mu: f64, lambda: f64, n: usize, rng: &mut StreamRng) -> Vec<f64> {
    let z = normals(n, rng);
    z.into_iter()
        .map(|z| {
            let y = z * z;
            let x = mu + mu * mu * y / (2.0 * lambda)
                - mu / (2.0 * lambda) * (4.0 * mu * lambda * y + mu * mu * y * y).sqrt();
            if unit_open(rng) <= mu / (mu + x) {
                x
            } else {
                mu * mu / x
            }
        })
        .collect()
}

/// Shape `φ` unknown, mean `mu` known.
pub(crate) fn inverse_normal_known_mean(mu: f64) -> ExpFamily {
    ExpFamily::new(ExpFamilyParts {
        name: "inverse-normal-known-mean",
        param: "phi",
        alpha: Box::new(|f| [f, 1.0, 0.0, 0.0]),
        beta: Box::new(|f| [-0.5 / f, 0.5 / (f * f), -1.0 / f.powi(3), 3.0 / f.powi(4)]),
        beta_inv: Box::new(|b| (b < 0.0).then(|| -0.5 / b)),
        d: Box::new(move |x| (x - mu) * (x - mu) / (2.0 * mu * mu * x)),
        support: Box::new(positive_support),
        param_ok: positive,
        sampler: Box::new(move |phi, n, rng| inverse_gaussians(mu, phi, n, rng)),
    })
}

/// Mean `mu` unknown, shape `phi` known.
pub(crate) fn inverse_normal_known_shape(phi: f64) -> ExpFamily {
    ExpFamily::new(ExpFamilyParts {
        name: "inverse-normal-known-shape",
        param: "mu",
        alpha: Box::new(move |m| {
            [phi / (2.0 * m * m), -phi / m.powi(3), 3.0 * phi / m.powi(4), -12.0 * phi / m.powi(5)]
        }),
        beta: Box::new(|m| [-m, -1.0, 0.0, 0.0]),
        beta_inv: Box::new(|b| Some(-b)),
        d: Box::new(|x| x),
        support: Box::new(positive_support),
        param_ok: positive,
        sampler: Box::new(move |mu, n, rng| inverse_gaussians(mu, phi, n, rng)),
    })
}

/// Rate `φ` unknown, index `k` known.
pub(crate) fn gamma(k: f64) -> ExpFamily {
    ExpFamily::new(ExpFamilyParts {
        name: "gamma",
        param: "phi",
        alpha: Box::new(|f| [f, 1.0, 0.0, 0.0]),
        beta: Box::new(move |f| [-k / f, k / (f * f), -2.0 * k / f.powi(3), 6.0 * k / f.powi(4)]),
        beta_inv: Box::new(move |b| (b < 0.0).then(|| -k / b)),
        d: Box::new(|x| x),
        support: Box::new(positive_support),
        param_ok: positive,
        sampler: Box::new(move |phi, n, rng| {
            let g = Gamma::new(k, 1.0 / phi).expect("gamma parameters checked");
            (0..n).map(|_| g.sample(rng)).collect()
        }),
    })
}

pub(crate) fn truncated_extreme_value() -> ExpFamily {
    ExpFamily::new(ExpFamilyParts {
        name: "truncated-extreme-value",
        param: "phi",
        alpha: reciprocal_alpha(),
        beta: negated_beta(),
        beta_inv: Box::new(|b| Some(-b)),
        d: Box::new(f64::exp_m1),
        support: Box::new(positive_support),
        param_ok: positive,
        // e^x - 1 is exponential with mean φ
        sampler: Box::new(|phi, n, rng| exponentials(n, rng).into_iter().map(|e| (phi * e).ln_1p()).collect()),
    })
}

/// Shape `φ` unknown, minimum `k` known.
pub(crate) fn pareto(k: f64) -> ExpFamily {
    let lk = k.ln();
    ExpFamily::new(ExpFamilyParts {
        name: "pareto",
        param: "phi",
        alpha: Box::new(|f| [1.0 + f, 1.0, 0.0, 0.0]),
        beta: Box::new(move |f| [-1.0 / f - lk, 1.0 / (f * f), -2.0 / f.powi(3), 6.0 / f.powi(4)]),
        beta_inv: Box::new(move |b| (b + lk < 0.0).then(|| -1.0 / (b + lk))),
        d: Box::new(f64::ln),
        support: Box::new(move |x| (x <= k).then_some("observations must exceed k")),
        param_ok: positive,
        sampler: Box::new(move |phi, n, rng| (0..n).map(|_| k * unit_open(rng).powf(-1.0 / phi)).collect()),
    })
}

/// Shape `φ` unknown, upper end `theta` known; support `0 < x < theta`.
pub(crate) fn power(theta: f64) -> ExpFamily {
    let lt = theta.ln();
    ExpFamily::new(ExpFamilyParts {
        name: "power",
        param: "phi",
        alpha: Box::new(|f| [1.0 - f, -1.0, 0.0, 0.0]),
        beta: Box::new(move |f| [1.0 / f - lt, -1.0 / (f * f), 2.0 / f.powi(3), -6.0 / f.powi(4)]),
        beta_inv: Box::new(move |b| (b + lt > 0.0).then(|| 1.0 / (b + lt))),
        d: Box::new(f64::ln),
        support: Box::new(move |x| {
            if x <= 0.0 {
                Some("observations must be positive")
            } else if x >= theta {
                Some("observations must lie below theta")
            } else {
                None
            }
        }),
        param_ok: positive,
        sampler: Box::new(move |phi, n, rng| (0..n).map(|_| theta * unit_open(rng).powf(1.0 / phi)).collect()),
    })
}

/// Scale `θ` unknown, location `k` known.
pub(crate) fn laplace(k: f64) -> ExpFamily {
    ExpFamily::new(ExpFamilyParts {
        name: "laplace",
        param: "theta",
        alpha: reciprocal_alpha(),
        beta: negated_beta(),
        beta_inv: Box::new(|b| (b < 0.0).then_some(-b)),
        d: Box::new(move |x| (x - k).abs()),
        support: Box::new(|_| None),
        param_ok: positive,
        sampler: Box::new(move |theta, n, rng| {
            exponentials(n, rng)
                .into_iter()
                .map(|e| if rng.random::<bool>() { k + theta * e } else { k - theta * e })
                .collect()
        }),
    })
}
