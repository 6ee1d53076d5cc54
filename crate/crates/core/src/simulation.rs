//! Seeded Monte Carlo studies under the null hypothesis: rejection rates of
//! the uncorrected and improved tests, and the empirical null CDF of `S`
//! against its first-order and expanded approximations.
//!
//! Replicate `r` at sample size `n` always draws from
//! [`replicate_stream`]`(seed, n, r)`, and results are reduced from integer
//! counts or ordered vectors, so output does not depend on the thread count.

use std::io::Write;

use serde::Serialize;

use crate::correction::{corrected_statistic, expanded_cdf, expanded_sf_eps, modified_quantile};
use crate::error::{Error, Result};
use crate::expansion::ExpansionCoefficients;
use crate::models::{coefficients_at, gradient_statistic_full, ModelFamily, Route};
use crate::rng::replicate_stream;
use crate::special::{chi2_cdf, chi2_quantile, ChiSquareDf};

/// Failure share above which a study is abandoned.
pub const MAX_FAILURE_RATE: f64 = 0.05;

pub const THREADS_ENV: &str = "GRADCORR_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Uncorrected,
    CorrectedStatistic,
    ExpandedCdf,
    ModifiedQuantile,
}

impl Procedure {
    pub const ALL: [Procedure; 4] =
        [Procedure::Uncorrected, Procedure::CorrectedStatistic, Procedure::ExpandedCdf, Procedure::ModifiedQuantile];

    pub fn as_str(self) -> &'static str {
        match self {
            Procedure::Uncorrected => "uncorrected",
            Procedure::CorrectedStatistic => "corrected_statistic",
            Procedure::ExpandedCdf => "expanded_cdf",
            Procedure::ModifiedQuantile => "modified_quantile",
        }
    }
}

impl std::str::FromStr for Procedure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Procedure::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown procedure '{s}'")))
    }
}

/// How replicates are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon pool capped by `GRADCORR_THREADS` when set. Falls back to
    /// sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// True parameter vector; its first `q` entries are the null value.
    pub theta: Vec<f64>,
    pub theta10: Vec<f64>,
    pub sizes: Vec<usize>,
    pub replicates: u64,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub procedures: Vec<Procedure>,
    pub route: Route,
}

impl SimulationConfig {
    pub fn validate(&self, model: &dyn ModelFamily) -> Result<()> {
        model.check_theta(&self.theta)?;
        let q = model.q();
        if self.theta10.len() != q {
            return Err(Error::Dimension(format!("theta10 has {} entries, model tests {q}", self.theta10.len())));
        }
        if self.theta[..q] != self.theta10[..] {
            return Err(Error::InvalidArgument("size studies sample under the null: theta must start with theta10".into()));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument("sample sizes must be a non-empty list of values >= 2".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::InvalidArgument("levels must be a non-empty list inside (0,1)".into()));
        }
        if self.procedures.is_empty() {
            return Err(Error::InvalidArgument("no procedures selected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRow {
    pub n: usize,
    pub alpha: f64,
    pub procedure: Procedure,
    pub rejections: u64,
    /// Replicates that produced a statistic.
    pub replicates: u64,
    pub rate: f64,
    pub distortion: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub rows: Vec<RejectionRow>,
    /// `(n, failed replicates)`
    pub failures: Vec<(usize, u64)>,
}

impl SimulationResult {
    pub fn row(&self, n: usize, alpha: f64, procedure: Procedure) -> Option<&RejectionRow> {
        self.rows.iter().find(|r| r.n == n && r.alpha == alpha && r.procedure == procedure)
    }
}

/// Thread cap from `GRADCORR_THREADS`; `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(Some(t)),
            _ => Err(Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}

#[cfg(feature = "parallel")]
fn map_replicates<T: Send>(reps: u64, exec: Execution, f: impl Fn(u64) -> T + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    match exec {
        Execution::Sequential => Ok((0..reps).map(f).collect()),
        Execution::Parallel => {
            let mut b = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads_from_env()? {
                b = b.num_threads(t);
            }
            let pool = b.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(|| (0..reps).into_par_iter().map(f).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn map_replicates<T: Send>(reps: u64, _exec: Execution, f: impl Fn(u64) -> T + Sync + Send) -> Result<Vec<T>> {
    Ok((0..reps).map(f).collect())
}

fn df(q: usize) -> Result<ChiSquareDf> {
    ChiSquareDf::new(q as u32)
}

/// Per-replicate outcome: the statistic and the coefficients at `θ̃`.
fn replicate(
    model: &dyn ModelFamily,
    theta: &[f64],
    theta10: &[f64],
    n: usize,
    seed: u64,
    r: u64,
    route: Route,
) -> Result<(f64, ExpansionCoefficients)> {
    let mut rng = replicate_stream(seed, n as u64, r);
    let data = model.sample(theta, n, &mut rng)?;
    let (s, _, tilde) = gradient_statistic_full(model, &data, theta10)?;
    Ok((s.value, coefficients_at(model, &tilde, route)?))
}

fn check_failures(failed: u64, total: u64) -> Result<()> {
    if failed as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::TooManyFailures { failed, total });
    }
    Ok(())
}

/// Rejection rule of one procedure at level `alpha`; `x` is the `1 - alpha`
/// chi-square quantile.
fn rejects(
    proc_: Procedure,
    s: f64,
    coef: &ExpansionCoefficients,
    q: usize,
    n: usize,
    alpha: f64,
    x: f64,
) -> Result<bool> {
    Ok(match proc_ {
        Procedure::Uncorrected => s > x,
        Procedure::CorrectedStatistic => corrected_statistic(s, coef, q, n)?.0 > x,
        Procedure::ExpandedCdf => expanded_sf_eps(s, coef, q, 1.0 / n as f64)?.clamp(0.0, 1.0) < alpha,
        Procedure::ModifiedQuantile => s > modified_quantile(alpha, coef, q, n)?,
    })
}

pub fn run_size_study(model: &dyn ModelFamily, cfg: &SimulationConfig) -> Result<SimulationResult> {
    run_size_study_with(model, cfg, Execution::default())
}

pub fn run_size_study_with(
    model: &dyn ModelFamily,
    cfg: &SimulationConfig,
    exec: Execution,
) -> Result<SimulationResult> {
    cfg.validate(model)?;
    let q = model.q();
    let quantiles: Vec<f64> =
        cfg.alphas.iter().map(|&a| chi2_quantile(1.0 - a, df(q)?)).collect::<Result<_>>()?;
    let cells = cfg.alphas.len() * cfg.procedures.len();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &n in &cfg.sizes {
        let outcomes = map_replicates(cfg.replicates, exec, |r| -> Result<Option<Vec<bool>>> {
            let (s, coef) = match replicate(model, &cfg.theta, &cfg.theta10, n, cfg.seed, r, cfg.route) {
                Ok(v) => v,
                Err(Error::InvalidArgument(m)) => return Err(Error::InvalidArgument(m)),
                Err(Error::Dimension(m)) => return Err(Error::Dimension(m)),
                Err(_) => return Ok(None),
            };
            let mut hits = Vec::with_capacity(cells);
            for (&alpha, &x) in cfg.alphas.iter().zip(&quantiles) {
                for &p in &cfg.procedures {
                    hits.push(rejects(p, s, &coef, q, n, alpha, x)?);
                }
            }
            Ok(Some(hits))
        })?;
        let mut counts = vec![0u64; cells];
        let (mut used, mut failed) = (0u64, 0u64);
        for o in outcomes {
            match o? {
                None => failed += 1,
                Some(h) => {
                    used += 1;
                    for (c, hit) in counts.iter_mut().zip(h) {
                        *c += hit as u64;
                    }
                }
            }
        }
        check_failures(failed, cfg.replicates)?;
        failures.push((n, failed));
        for (ai, &alpha) in cfg.alphas.iter().enumerate() {
            for (pi, &procedure) in cfg.procedures.iter().enumerate() {
                let rejections = counts[ai * cfg.procedures.len() + pi];
                let rate = if used == 0 { f64::NAN } else { rejections as f64 / used as f64 };
                rows.push(RejectionRow {
                    n,
                    alpha,
                    procedure,
                    rejections,
                    replicates: used,
                    rate,
                    distortion: rate - alpha,
                    se: (rate * (1.0 - rate) / used as f64).sqrt(),
                });
            }
        }
    }
    Ok(SimulationResult { rows, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfPoint {
    pub x: f64,
    pub f_empirical: f64,
    pub f_chisq: f64,
    pub f_expanded: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfStudy {
    pub n: usize,
    pub replicates: u64,
    pub failures: u64,
    pub coefficients: ExpansionCoefficients,
    pub grid: Vec<CdfPoint>,
    /// `sup |F_emp - G_q|` over the whole line.
    pub sup_chisq: f64,
    /// `sup |F_emp - F_expanded|` over the whole line.
    pub sup_expanded: f64,
    /// Sorted statistics, failures excluded.
    #[serde(skip)]
    pub statistics: Vec<f64>,
}

/// Largest distance between the empirical CDF of sorted `s` and `f`,
/// checked on both sides of every jump.
fn sup_distance(sorted: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let m = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        let fv = f(v)?;
        d = d.max((fv - i as f64 / m).abs()).max(((i + 1) as f64 / m - fv).abs());
    }
    Ok(d)
}

/// Default evaluation grid: 201 points from 0 to the 0.999 quantile of
/// `χ²_q`.
pub fn default_grid(q: usize) -> Result<Vec<f64>> {
    let hi = chi2_quantile(0.999, df(q)?)?;
    Ok((0..=200).map(|i| hi * i as f64 / 200.0).collect())
}

#[allow(clippy::too_many_arguments)]
pub fn run_cdf_study(
    model: &dyn ModelFamily,
    theta: &[f64],
    theta10: &[f64],
    n: usize,
    replicates: u64,
    seed: u64,
    route: Route,
    grid: &[f64],
    exec: Execution,
) -> Result<CdfStudy> {
    model.check_theta(theta)?;
    let q = model.q();
    if theta10.len() != q || theta[..q] != theta10[..] {
        return Err(Error::InvalidArgument("the null CDF needs theta to start with theta10".into()));
    }
    if replicates < 1 {
        return Err(Error::InvalidArgument("replicates must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("sample size must be at least 2".into()));
    }
    if grid.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument("grid points must be finite and nonnegative".into()));
    }
    let coefficients = coefficients_at(model, theta, route)?;
    let outcomes = map_replicates(replicates, exec, |r| -> Result<Option<f64>> {
        let mut rng = replicate_stream(seed, n as u64, r);
        let data = model.sample(theta, n, &mut rng)?;
        Ok(gradient_statistic_full(model, &data, theta10).ok().map(|g| g.0.value))
    })?;
    let mut stats = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        if let Some(s) = o? {
            stats.push(s);
        }
    }
    let failures = replicates - stats.len() as u64;
    check_failures(failures, replicates)?;
    stats.sort_by(f64::total_cmp);
    let m = stats.len() as f64;
    let g = df(q)?;
    let mut points = Vec::with_capacity(grid.len());
    for &x in grid {
        let below = stats.partition_point(|&s| s <= x) as f64;
        points.push(CdfPoint {
            x,
            f_empirical: below / m,
            f_chisq: chi2_cdf(x, g)?,
            f_expanded: expanded_cdf(x, &coefficients, q, n)?,
        });
    }
    let sup_chisq = sup_distance(&stats, |x| chi2_cdf(x, g))?;
    let sup_expanded = sup_distance(&stats, |x| expanded_cdf(x, &coefficients, q, n))?;
    Ok(CdfStudy {
        n,
        replicates,
        failures,
        coefficients,
        grid: points,
        sup_chisq,
        sup_expanded,
        statistics: stats,
    })
}

/// 17 significant digits, the precision that round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn write_size_csv(res: &SimulationResult, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "n,alpha,procedure,rejections,replicates,rate,distortion,se")?;
    for r in &res.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.alpha),
            r.procedure.as_str(),
            r.rejections,
            r.replicates,
            fmt_f64(r.rate),
            fmt_f64(r.distortion),
            fmt_f64(r.se)
        )?;
    }
    Ok(())
}

pub fn write_cdf_csv(study: &CdfStudy, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "x,f_empirical,f_chisq,f_expanded")?;
    for p in &study.grid {
        writeln!(w, "{},{},{},{}", fmt_f64(p.x), fmt_f64(p.f_empirical), fmt_f64(p.f_chisq), fmt_f64(p.f_expanded))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{model_by_name, ModelParams};

    fn cfg(theta: Vec<f64>, sizes: Vec<usize>, reps: u64) -> SimulationConfig {
        SimulationConfig {
            theta10: theta[..1].to_vec(),
            theta,
            sizes,
            replicates: reps,
            alphas: vec![0.05, 0.1],
            seed: 11,
            procedures: Procedure::ALL.to_vec(),
            route: Route::General,
        }
    }

    #[test]
    fn null_coefficients_leave_decisions_unchanged() {
        let m = model_by_name("normal-known-variance", &ModelParams::default()).unwrap();
        let res = run_size_study(m.model.as_ref(), &cfg(m.theta.clone(), vec![5, 9], 300)).unwrap();
        for r in &res.rows {
            let base = res.row(r.n, r.alpha, Procedure::Uncorrected).unwrap();
            assert_eq!(r.rejections, base.rejections);
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let m = model_by_name("bs", &ModelParams::default()).unwrap();
        let c = cfg(m.theta.clone(), vec![6, 8], 200);
        let a = run_size_study_with(m.model.as_ref(), &c, Execution::Sequential).unwrap();
        let b = run_size_study_with(m.model.as_ref(), &c, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let m = model_by_name("exponential", &ModelParams::default()).unwrap();
        let model = m.model.as_ref();
        let good = cfg(m.theta.clone(), vec![5], 10);
        assert!(good.validate(model).is_ok());
        for bad in [
            SimulationConfig { replicates: 0, ..good.clone() },
            SimulationConfig { sizes: vec![1], ..good.clone() },
            SimulationConfig { sizes: vec![], ..good.clone() },
            SimulationConfig { alphas: vec![1.0], ..good.clone() },
            SimulationConfig { theta10: vec![2.0], ..good.clone() },
            SimulationConfig { procedures: vec![], ..good.clone() },
        ] {
            assert!(bad.validate(model).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn single_replicate_gives_unit_step() {
        let m = model_by_name("exponential", &ModelParams::default()).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let st = run_cdf_study(m.model.as_ref(), &[1.0], &[1.0], 10, 1, 3, Route::Closed, &grid, Execution::Sequential)
            .unwrap();
        let s = st.statistics[0];
        for p in &st.grid {
            assert_eq!(p.f_empirical, if p.x >= s { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn failure_threshold() {
        assert!(check_failures(5, 100).is_ok());
        assert!(matches!(check_failures(6, 100), Err(Error::TooManyFailures { failed: 6, total: 100 })));
    }

    #[test]
    fn sup_distance_of_exact_uniform() {
        let s = [0.25, 0.5, 0.75];
        let d = sup_distance(&s, |x| Ok(x)).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn procedure_names_round_trip() {
        for p in Procedure::ALL {
            assert_eq!(p.as_str().parse::<Procedure>().unwrap(), p);
        }
        assert!("x".parse::<Procedure>().is_err());
    }
}
