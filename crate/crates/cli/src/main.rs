use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gradcorr::correction::run_test;
use gradcorr::data::{read_file, read_two_files, Dataset};
use gradcorr::models::{coefficients_at, gradient_statistic_full, model_by_name, ModelParams, Resolved, Route};
use gradcorr::simulation::{
    default_grid, fmt_f64, run_cdf_study, run_size_study, write_cdf_csv, write_size_csv, Execution, Procedure,
    SimulationConfig,
};
use gradcorr::Error;

#[derive(Parser)]
#[command(name = "gradcorr", version, about = "Gradient test with Bartlett-type corrections")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the gradient test and its three improved versions on a data file.
    Test(TestArgs),
    /// Print the expansion coefficients of a model.
    Coeffs(CoeffArgs),
    /// Null rejection rates over a grid of sample sizes (CSV).
    Simulate(SimArgs),
    /// Empirical null CDF of S against the chi-square and expanded CDFs (CSV).
    CdfStudy(CdfArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    General,
    Closed,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Route {
        match r {
            RouteArg::General => Route::General,
            RouteArg::Closed => Route::Closed,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Model name; an unknown name prints the list of known models.
    #[arg(long)]
    model: String,
    /// Constants and parameter values, e.g. `k=2,phi=1.5`.
    #[arg(long, default_value = "")]
    params: String,
}

impl ModelArgs {
    fn resolve(&self) -> Result<Resolved, Error> {
        model_by_name(&self.model, &ModelParams::parse(&self.params)?)
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Observations; a two-column CSV for two-sample models.
    #[arg(long)]
    data: PathBuf,
    /// Second sample, for two-sample models given as two files.
    #[arg(long)]
    data2: Option<PathBuf>,
    /// Null value(s) of the tested parameter(s), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    theta10: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long, value_enum, default_value = "closed")]
    route: RouteArg,
}

#[derive(Args)]
struct CoeffArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "general")]
    route: RouteArg,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Null value(s); defaults to the leading parameter value(s).
    #[arg(long, value_delimiter = ',')]
    theta10: Option<Vec<f64>>,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "closed")]
    route: RouteArg,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run replicates on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Sample sizes: `a:b` (step 1), `a:b:step`, or a comma list.
    #[arg(long)]
    n: String,
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "uncorrected,corrected_statistic")]
    procedures: Vec<String>,
}

#[derive(Args)]
struct CdfArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[arg(long)]
    n: usize,
    /// Upper end of the grid; the 0.999 chi-square quantile when absent.
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    grid_points: usize,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_sizes(s: &str) -> Result<Vec<usize>, Error> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| invalid(format!("bad sample size '{t}'")));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let (lo, hi, step) = match parts[..] {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return Err(invalid(format!("bad range '{s}'"))),
        };
        if step == 0 || hi < lo {
            return Err(invalid(format!("bad range '{s}'")));
        }
        Ok((lo..=hi).step_by(step).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| invalid(format!("cannot write {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(e: io::Error) -> Error {
    // reader went away, e.g. `| head`
    if e.kind() == io::ErrorKind::BrokenPipe {
        std::process::exit(0);
    }
    invalid(format!("write failed: {e}"))
}

fn theta10_or_default(r: &Resolved, t: &Option<Vec<f64>>) -> Vec<f64> {
    t.clone().unwrap_or_else(|| r.theta[..r.info.q].to_vec())
}

/// The true parameter with its leading entries replaced by the null value.
fn null_theta(r: &Resolved, theta10: &[f64]) -> Result<Vec<f64>, Error> {
    if theta10.len() != r.info.q {
        return Err(Error::Dimension(format!("theta10 has {} entries, model tests {}", theta10.len(), r.info.q)));
    }
    let mut t = r.theta.clone();
    t[..theta10.len()].copy_from_slice(theta10);
    Ok(t)
}

fn cmd_test(a: &TestArgs) -> Result<(), Error> {
    let r = a.model.resolve()?;
    let ds: Dataset = match &a.data2 {
        Some(d2) => read_two_files(&a.data, d2)?,
        None => read_file(&a.data)?,
    };
    let model = r.model.as_ref();
    let (s, _, tilde) = gradient_statistic_full(model, &ds.data, &a.theta10).map_err(|e| ds.locate(e))?;
    let coef = coefficients_at(model, &tilde, a.route.into())?;
    let rep = run_test(s.value, &coef, model.q(), s.n, a.gamma)?;
    let mut out = io::stdout().lock();
    let write = |out: &mut dyn Write| -> io::Result<()> {
        match a.format {
            Format::Json => {
                let mut v = serde_json::to_value(&rep).map_err(io::Error::other)?;
                v["model"] = json!(r.info.name);
                v["theta_restricted"] = json!(tilde);
                writeln!(out, "{}", serde_json::to_string_pretty(&v).map_err(io::Error::other)?)
            }
            Format::Csv => {
                writeln!(out, "S,S_star,p_asymptotic,p_expanded,p_corrected,z_modified,gamma,n,q,A1,A2,A3,warnings")?;
                let w: Vec<&str> = rep.warnings.iter().map(|w| w.describe()).collect();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
                    fmt_f64(rep.s),
                    fmt_f64(rep.s_star),
                    fmt_f64(rep.p_asymptotic),
                    fmt_f64(rep.p_expanded),
                    fmt_f64(rep.p_corrected),
                    fmt_f64(rep.z_modified),
                    fmt_f64(rep.gamma),
                    rep.n,
                    rep.q,
                    fmt_f64(coef.a1),
                    fmt_f64(coef.a2),
                    fmt_f64(coef.a3),
                    w.join("; ")
                )
            }
            Format::Text => {
                writeln!(out, "model          {}", r.info.name)?;
                writeln!(out, "n              {}", rep.n)?;
                writeln!(out, "theta10        {:?}", a.theta10)?;
                writeln!(out, "S              {}", rep.s)?;
                writeln!(out, "S*             {}", rep.s_star)?;
                writeln!(out, "p asymptotic   {}", rep.p_asymptotic)?;
                writeln!(out, "p expanded     {}", rep.p_expanded)?;
                writeln!(out, "p corrected    {}", rep.p_corrected)?;
                writeln!(out, "z modified     {} (gamma = {})", rep.z_modified, rep.gamma)?;
                writeln!(out, "A1 A2 A3       {} {} {}", coef.a1, coef.a2, coef.a3)?;
                for w in &rep.warnings {
                    writeln!(out, "warning        {}", w.describe())?;
                }
                Ok(())
            }
        }
    };
    write(&mut out).map_err(io_err)
}

fn cmd_coeffs(a: &CoeffArgs) -> Result<(), Error> {
    let r = a.model.resolve()?;
    let model = r.model.as_ref();
    let route: Route = a.route.into();
    let c = coefficients_at(model, &r.theta, route)?;
    let other = coefficients_at(model, &r.theta, if route == Route::General { Route::Closed } else { Route::General })?;
    let delta = c.max_rel_diff(&other);
    let mut out = io::stdout().lock();
    let res = match a.format {
        Format::Json => {
            let v = json!({
                "model": r.info.name,
                "theta": r.theta,
                "route": route,
                "A1": c.a1, "A2": c.a2, "A3": c.a3,
                "R": c.r,
                "route_delta": delta,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("plain json"))
        }
        Format::Csv => writeln!(out, "model,A1,A2,A3,R0,R1,R2,R3,route_delta").and_then(|_| {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.info.name,
                fmt_f64(c.a1),
                fmt_f64(c.a2),
                fmt_f64(c.a3),
                fmt_f64(c.r[0]),
                fmt_f64(c.r[1]),
                fmt_f64(c.r[2]),
                fmt_f64(c.r[3]),
                fmt_f64(delta)
            )
        }),
        Format::Text => {
            let names: Vec<String> =
                r.info.params.iter().zip(&r.theta).map(|((k, _), v)| format!("{k}={v}")).collect();
            writeln!(out, "model        {} ({})", r.info.name, names.join(", "))
                .and_then(|_| writeln!(out, "A1 A2 A3     {} {} {}", c.a1, c.a2, c.a3))
                .and_then(|_| writeln!(out, "R0 R1 R2 R3  {} {} {} {}", c.r[0], c.r[1], c.r[2], c.r[3]))
                .and_then(|_| writeln!(out, "route delta  {delta:e}"))
        }
    };
    res.map_err(io_err)
}

fn exec(s: &StudyArgs) -> Execution {
    if s.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn cmd_simulate(a: &SimArgs) -> Result<(), Error> {
    let r = a.study.model.resolve()?;
    let theta10 = theta10_or_default(&r, &a.study.theta10);
    let cfg = SimulationConfig {
        theta: null_theta(&r, &theta10)?,
        theta10,
        sizes: parse_sizes(&a.n)?,
        replicates: a.study.reps,
        alphas: a.alpha.clone(),
        seed: a.study.seed,
        procedures: a.procedures.iter().map(|p| p.parse()).collect::<Result<Vec<Procedure>, _>>()?,
        route: a.study.route.into(),
    };
    cfg.validate(r.model.as_ref())?;
    let res = if a.study.sequential {
        gradcorr::simulation::run_size_study_with(r.model.as_ref(), &cfg, exec(&a.study))?
    } else {
        run_size_study(r.model.as_ref(), &cfg)?
    };
    let mut out = output(&a.study.out)?;
    write_size_csv(&res, &mut out).and_then(|_| out.flush()).map_err(io_err)?;
    let failed: u64 = res.failures.iter().map(|f| f.1).sum();
    if failed > 0 {
        eprintln!("{failed} replicate(s) failed to fit and were excluded");
    }
    Ok(())
}

fn cmd_cdf_study(a: &CdfArgs) -> Result<(), Error> {
    let r = a.study.model.resolve()?;
    let theta10 = theta10_or_default(&r, &a.study.theta10);
    let theta = null_theta(&r, &theta10)?;
    let grid = match a.grid_max {
        None if a.grid_points == 201 => default_grid(r.info.q)?,
        hi => {
            if a.grid_points < 2 {
                return Err(invalid("grid needs at least 2 points"));
            }
            let hi = match hi {
                Some(h) if h > 0.0 && h.is_finite() => h,
                Some(h) => return Err(invalid(format!("grid maximum must be positive, got {h}"))),
                None => *default_grid(r.info.q)?.last().unwrap(),
            };
            (0..a.grid_points).map(|i| hi * i as f64 / (a.grid_points - 1) as f64).collect()
        }
    };
    let st = run_cdf_study(
        r.model.as_ref(),
        &theta,
        &theta10,
        a.n,
        a.study.reps,
        a.study.seed,
        a.study.route.into(),
        &grid,
        exec(&a.study),
    )?;
    let mut out = output(&a.study.out)?;
    write_cdf_csv(&st, &mut out).and_then(|_| out.flush()).map_err(io_err)?;
    eprintln!("sup|F_emp - G_q|        = {}", fmt_f64(st.sup_chisq));
    eprintln!("sup|F_emp - F_expanded| = {}", fmt_f64(st.sup_expanded));
    if st.failures > 0 {
        eprintln!("{} replicate(s) failed to fit and were excluded", st.failures);
    }
    Ok(())
}

/// 3 for fits that did not converge, 2 for everything the user can fix.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. } | Error::Degenerate(_) | Error::TooManyFailures { .. } | Error::Singular(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Test(a) => cmd_test(a),
        Command::Coeffs(a) => cmd_coeffs(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::CdfStudy(a) => cmd_cdf_study(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
