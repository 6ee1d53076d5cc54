use std::collections::BTreeMap;

use serde::Serialize;

use super::{expfam, BirnbaumSaunders, ModelFamily, NormalMean, TwoSampleExponential};
use crate::error::{Error, Result};

pub const MODEL_NAMES: [&str; 13] = [
    "exponential",
    "normal-known-mean",
    "normal-known-variance",
    "inverse-normal-known-mean",
    "inverse-normal-known-shape",
    "gamma",
    "truncated-extreme-value",
    "pareto",
    "power",
    "laplace",
    "normal2",
    "two-sample-exponential",
    "bs",
];

/// Static description of a catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub name: &'static str,
    pub p: usize,
    pub q: usize,
    /// Model parameters with their default values; the first `q` are tested.
    pub params: Vec<(&'static str, f64)>,
    /// Known constants with their default values.
    pub constants: Vec<(&'static str, f64)>,
    pub two_sample: bool,
    pub summary: &'static str,
}

fn info(name: &'static str) -> Option<ModelInfo> {
    let one = |params: Vec<(&'static str, f64)>, constants: Vec<(&'static str, f64)>, summary| ModelInfo {
        name,
        p: params.len(),
        q: 1,
        params,
        constants,
        two_sample: false,
        summary,
    };
    Some(match name {
        "exponential" => one(vec![("phi", 1.0)], vec![], "exponential with mean phi"),
        "normal-known-mean" => one(vec![("phi", 1.0)], vec![("mu", 0.0)], "normal variance phi, mean mu known"),
        "normal-known-variance" => {
            one(vec![("mu", 0.0)], vec![("phi", 1.0)], "normal mean mu, variance phi known")
        }
        "inverse-normal-known-mean" => {
            one(vec![("phi", 1.0)], vec![("mu", 1.0)], "inverse normal shape phi, mean mu known")
        }
        "inverse-normal-known-shape" => {
            one(vec![("mu", 1.0)], vec![("phi", 1.0)], "inverse normal mean mu, shape phi known")
        }
        "gamma" => one(vec![("phi", 1.0)], vec![("k", 1.0)], "gamma rate phi, index k known"),
        "truncated-extreme-value" => {
            one(vec![("phi", 1.0)], vec![], "truncated extreme value, exp(x) - 1 exponential with mean phi")
        }
        "pareto" => one(vec![("phi", 1.0)], vec![("k", 1.0)], "Pareto shape phi on x > k"),
        "power" => one(vec![("phi", 1.0)], vec![("theta", 1.0)], "power shape phi on 0 < x < theta"),
        "laplace" => one(vec![("theta", 1.0)], vec![("k", 0.0)], "Laplace scale theta, location k known"),
        "normal2" => one(vec![("phi", 0.0), ("beta", 1.0)], vec![], "normal mean phi, variance beta nuisance"),
        "two-sample-exponential" => ModelInfo {
            two_sample: true,
            ..one(
                vec![("phi", 1.0), ("beta", 1.0)],
                vec![],
                "two balanced exponential samples, ratio of means phi, beta = mu phi^(1/2)",
            )
        },
        "bs" => one(vec![("phi", 1.0), ("beta", 1.0)], vec![], "Birnbaum-Saunders shape phi, scale beta"),
        _ => return None,
    })
}

fn canonical(name: &str) -> &str {
    match name {
        "birnbaum-saunders" => "bs",
        "tev" => "truncated-extreme-value",
        "two-sample" => "two-sample-exponential",
        other => other,
    }
}

pub fn builtin_models() -> Vec<ModelInfo> {
    MODEL_NAMES.iter().filter_map(|n| info(n)).collect()
}

/// `key=value` pairs for constants and parameter values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParams(pub BTreeMap<String, f64>);

impl ModelParams {
    /// Parses `"k=2,phi=1.5"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got '{item}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("'{}' is not a number", v.trim())))?;
            map.insert(k.trim().to_string(), v);
        }
        Ok(ModelParams(map))
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }
}

/// A constructed family with the parameter point implied by the supplied
/// values and defaults.
pub struct Resolved {
    pub info: ModelInfo,
    pub model: Box<dyn ModelFamily>,
    pub theta: Vec<f64>,
}

/// Builds a catalog model. Keys in `params` name either constants or model
/// parameters; anything else is an error.
pub fn model_by_name(name: &str, params: &ModelParams) -> Result<Resolved> {
    let requested = canonical(name);
    let info = MODEL_NAMES
        .iter()
        .find(|n| **n == requested)
        .and_then(|n| info(n))
        .ok_or_else(|| {
            Error::InvalidArgument(format!("unknown model '{name}'; known models: {}", MODEL_NAMES.join(", ")))
        })?;
    let name = info.name;
    for key in params.0.keys() {
        let known = info.params.iter().chain(&info.constants).any(|(k, _)| k == key);
        if !known {
            return Err(Error::InvalidArgument(format!("model '{name}' has no parameter or constant '{key}'")));
        }
    }
    let value = |(k, d): &(&str, f64)| params.get(k).unwrap_or(*d);
    let c: Vec<f64> = info.constants.iter().map(value).collect();
    let theta: Vec<f64> = info.params.iter().map(value).collect();
    let positive = |v: f64, what: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(format!("{what} must be positive, got {v}")))
        }
    };
    let model: Box<dyn ModelFamily> = match name {
        "exponential" => Box::new(expfam::exponential()),
        "normal-known-mean" => Box::new(expfam::normal_known_mean(c[0])),
        "normal-known-variance" => Box::new(expfam::normal_known_variance(positive(c[0], "phi")?)),
        "inverse-normal-known-mean" => Box::new(expfam::inverse_normal_known_mean(positive(c[0], "mu")?)),
        "inverse-normal-known-shape" => Box::new(expfam::inverse_normal_known_shape(positive(c[0], "phi")?)),
        "gamma" => Box::new(expfam::gamma(positive(c[0], "k")?)),
        "truncated-extreme-value" => Box::new(expfam::truncated_extreme_value()),
        "pareto" => Box::new(expfam::pareto(positive(c[0], "k")?)),
        "power" => Box::new(expfam::power(positive(c[0], "theta")?)),
        "laplace" => Box::new(expfam::laplace(c[0])),
        "normal2" => Box::new(NormalMean),
        "two-sample-exponential" => Box::new(TwoSampleExponential),
        "bs" => Box::new(BirnbaumSaunders),
        _ => unreachable!("catalog names are matched above"),
    };
    model.check_theta(&theta)?;
    Ok(Resolved { info, model, theta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_thirteen_families() {
        let all = builtin_models();
        assert_eq!(all.len(), 13);
        for i in &all {
            let r = model_by_name(i.name, &ModelParams::default()).unwrap();
            assert_eq!(r.model.name(), i.name);
            assert_eq!(r.model.p(), i.p);
        }
    }

    #[test]
    fn params_parse_and_validate() {
        let p = ModelParams::parse("k=2, phi=1.5").unwrap();
        assert_eq!(p.get("k"), Some(2.0));
        let r = model_by_name("gamma", &p).unwrap();
        assert_eq!(r.theta, vec![1.5]);
        assert!(ModelParams::parse("k").is_err());
        assert!(ModelParams::parse("k=x").is_err());
        assert!(model_by_name("gamma", &ModelParams::parse("z=1").unwrap()).is_err());
        assert!(model_by_name("gamma", &ModelParams::parse("k=-1").unwrap()).is_err());
        assert!(model_by_name("nope", &ModelParams::default()).is_err());
        assert_eq!(model_by_name("birnbaum-saunders", &ModelParams::default()).unwrap().info.name, "bs");
    }
}
