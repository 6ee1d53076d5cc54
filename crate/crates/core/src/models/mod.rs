//! Built-in model families and the gradient statistic
//! `S = n U_1(θ̃)ᵀ(θ̂_1 - θ10)`.

mod bs;
mod catalog;
mod expfam;
mod tensor;
mod two_param;

use serde::Serialize;

use crate::cumulant::{CumulantBundle, HypothesisSpec};
use crate::error::{Error, Result};
use crate::expansion::{coefficients_general, ExpansionCoefficients};
use crate::rng::StreamRng;

pub use bs::{bs_h, fit_birnbaum_saunders, BirnbaumSaunders, BsFit};
pub use catalog::{builtin_models, model_by_name, ModelInfo, ModelParams, Resolved, MODEL_NAMES};
pub use expfam::{ExpFamily, ExpFamilyParts};
pub use tensor::bundle_from_fn;
pub use two_param::{NormalMean, TwoSampleExponential};

/// Observations, one or two samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    One(Vec<f64>),
    Two(Vec<f64>, Vec<f64>),
}

impl Data {
    /// Total number of observations.
    pub fn len(&self) -> usize {
        match self {
            Data::One(x) => x.len(),
            Data::Two(x, y) => x.len() + y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn one(&self) -> Result<&[f64]> {
        match self {
            Data::One(x) => Ok(x),
            Data::Two(..) => Err(Error::InvalidArgument("model expects a single sample".into())),
        }
    }

    pub fn two(&self) -> Result<(&[f64], &[f64])> {
        match self {
            Data::Two(x, y) => Ok((x, y)),
            Data::One(_) => Err(Error::InvalidArgument("model expects two samples".into())),
        }
    }
}

/// A parametric family with `θ = (θ_1, θ_2)`, `θ_1` the first `q` entries.
///
/// `score` and the cumulants are on the per-observation scale.
pub trait ModelFamily: Send + Sync {
    fn name(&self) -> &str;
    fn p(&self) -> usize;
    fn q(&self) -> usize {
        1
    }
    fn param_names(&self) -> Vec<&'static str>;

    fn sample(&self, theta: &[f64], n: usize, rng: &mut StreamRng) -> Result<Data>;
    /// Checks support and sample-size requirements.
    fn validate(&self, data: &Data) -> Result<()>;
    fn fit_unrestricted(&self, data: &Data) -> Result<Vec<f64>>;
    fn fit_restricted(&self, data: &Data, theta10: &[f64]) -> Result<Vec<f64>>;
    fn score(&self, data: &Data, theta: &[f64]) -> Result<Vec<f64>>;
    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle>;
    /// The specialised scalar or orthogonal route.
    fn closed_form_coefficients(&self, theta: &[f64]) -> Result<ExpansionCoefficients>;
    /// `S` from a family-specific formula, if there is one.
    fn closed_form_statistic(&self, _data: &Data, _theta10: &[f64]) -> Option<Result<f64>> {
        None
    }
    fn check_theta(&self, theta: &[f64]) -> Result<()>;
}

/// Which formulas produce the expansion coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Tensor contraction over the cumulant bundle.
    #[default]
    General,
    /// The model's own closed form.
    Closed,
}

impl std::str::FromStr for Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Route::General),
            "closed" => Ok(Route::Closed),
            _ => Err(Error::InvalidArgument(format!("unknown route '{s}' (expected general or closed)"))),
        }
    }
}

/// Coefficients at `theta` for the hypothesis on the first `q` components.
pub fn coefficients_at(model: &dyn ModelFamily, theta: &[f64], route: Route) -> Result<ExpansionCoefficients> {
    model.check_theta(theta)?;
    match route {
        Route::Closed => model.closed_form_coefficients(theta),
        Route::General => {
            let h = HypothesisSpec::new(model.p(), model.q(), theta[..model.q()].to_vec())?;
            coefficients_general(&model.cumulants(theta)?, &h)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientStatistic {
    pub value: f64,
    pub n: usize,
    /// A tiny negative value from fit tolerance was set to zero.
    pub clamped: bool,
}

/// Tolerance below zero that is attributed to fit error.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Both fits plus `S`. Returns `(S, θ̂, θ̃)`.
pub fn gradient_statistic_full(
    model: &dyn ModelFamily,
    data: &Data,
    theta10: &[f64],
) -> Result<(GradientStatistic, Vec<f64>, Vec<f64>)> {
    let q = model.q();
    if theta10.len() != q {
        return Err(Error::Dimension(format!("theta10 has {} entries, model tests {q}", theta10.len())));
    }
    model.validate(data)?;
    let hat = model.fit_unrestricted(data)?;
    let tilde = model.fit_restricted(data, theta10)?;
    let u = model.score(data, &tilde)?;
    let n = data.len();
    let raw: f64 = (0..q).map(|i| u[i] * (hat[i] - theta10[i])).sum::<f64>() * n as f64;
    if !raw.is_finite() {
        return Err(Error::Degenerate("non-finite gradient statistic".into()));
    }
    let clamped = raw < 0.0;
    if raw < -NEGATIVE_TOLERANCE * (1.0 + n as f64) {
        return Err(Error::Degenerate(format!("gradient statistic is negative ({raw:e})")));
    }
    Ok((GradientStatistic { value: raw.max(0.0), n, clamped }, hat, tilde))
}

pub fn gradient_statistic(model: &dyn ModelFamily, data: &Data, theta10: &[f64]) -> Result<GradientStatistic> {
    gradient_statistic_full(model, data, theta10).map(|r| r.0)
}

pub(crate) fn check_len(theta: &[f64], p: usize) -> Result<()> {
    if theta.len() != p {
        return Err(Error::Dimension(format!("expected {p} parameters, got {}", theta.len())));
    }
    Ok(())
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn check_finite(x: &[f64], offset: usize) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Support { index: offset + i, value: v, reason: "not a finite number" });
        }
    }
    Ok(())
}

pub(crate) fn check_min_len(data: &Data, min: usize) -> Result<()> {
    if data.len() < min {
        return Err(Error::InvalidArgument(format!("need at least {min} observations, got {}", data.len())));
    }
    Ok(())
}

/// Safeguarded Newton for a root of `f` inside `[lo, hi]`; `f` returns
/// `(value, derivative)`. Bisection whenever a Newton step leaves the
/// bracket or fails to halve the residual.
pub(crate) fn newton_bracketed(
    what: &'static str,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    rel_tol: f64,
    max_iter: usize,
    f: impl Fn(f64) -> (f64, f64),
) -> Result<f64> {
    let (flo, fhi) = (f(lo).0, f(hi).0);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Degenerate(format!("{what}: root is not bracketed")));
    }
    let rising = flo < 0.0;
    let mut x = x0.clamp(lo, hi);
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == rising {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if newton.is_finite() && newton > lo && newton < hi && fx.abs() < 0.5 * last {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last = fx.abs();
        if (next - x).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence { what, iters: max_iter })
}
