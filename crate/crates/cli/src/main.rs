//! Command-line front end for `orlicz_lab`.
//!
//! Exit codes: 0 success, 1 failed assertion, 2 usage or configuration
//! error, 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use orlicz_lab::experiments::{self, ExperimentConfig, ExperimentKind};
use orlicz_lab::gibbs::{self, GibbsMeasure1D};
use orlicz_lab::maxent::{self, ConstraintKind, MomentConstraint};
use orlicz_lab::samplers::{self, BallConstraint, ChainPlan};
use orlicz_lab::{Error, OrliczFunction, QuadratureConfig};

#[derive(Parser, Debug)]
#[command(name = "orlicz-lab", version, about = "Gibbs measures, maximum-entropy laws and sampling on Orlicz balls")]
struct Cli {
    /// Master seed (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (default stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Absolute quadrature tolerance (default 1e-12).
    #[arg(long = "quad-tol", global = true)]
    quad_tol: Option<f64>,
    /// Worker threads for concurrent chains; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON file with the parameters of the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the resolved parameters as JSON and exit.
    #[arg(long = "dump-config", global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical temperature, log-partition and mean potential of a Gibbs measure.
    Gibbs(GibbsArgs),
    /// Regime thresholds for a pair of potentials.
    Thresholds(PairArgs),
    /// Maximum-entropy law under two moment constraints.
    Maxent(MaxentArgs),
    /// Thin-shell rate on a grid of points.
    Thinshell(ThinshellArgs),
    /// Exact and asymptotic per-dimension log-volumes.
    Volume(VolumeArgs),
    /// Draw samples and write them as CSV.
    Sample(SampleArgs),
    /// Run a verification experiment and write its report.
    Experiment(ExperimentArgs),
    /// Run the closed-form invariant suite.
    Verify(VerifyArgs),
}

fn potential(s: &str) -> Result<OrliczFunction, String> {
    orlicz_lab::parse_spec(s).map_err(|e| e.to_string())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, Default)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
struct GibbsArgs {
    #[arg(long = "V", value_parser = potential)]
    #[serde(rename = "V")]
    v: Option<OrliczFunction>,
    /// Per-coordinate budget; solves for alpha.
    #[arg(long = "R", conflicts_with = "alpha")]
    #[serde(rename = "R", default)]
    r: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    alpha: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, Default)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
struct PairArgs {
    #[arg(long = "V1", value_parser = potential)]
    #[serde(rename = "V1")]
    v1: Option<OrliczFunction>,
    #[arg(long = "V2", value_parser = potential)]
    #[serde(rename = "V2")]
    v2: Option<OrliczFunction>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, Deserialize, Default, PartialEq)]
#[serde(rename_all = "lowercase")]
enum Kind {
    #[default]
    Le,
    Eq,
}

impl From<Kind> for ConstraintKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Le => ConstraintKind::AtMost,
            Kind::Eq => ConstraintKind::Equal,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, Default)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
struct MaxentArgs {
    #[arg(long = "V1", value_parser = potential)]
    #[serde(rename = "V1")]
    v1: Option<OrliczFunction>,
    #[arg(long = "V2", value_parser = potential)]
    #[serde(rename = "V2")]
    v2: Option<OrliczFunction>,
    /// Level of the first constraint.
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Level of the second constraint (the radius R).
    #[arg(long, visible_alias = "R")]
    c2: Option<f64>,
    #[arg(long, value_enum, default_value_t = Kind::Le)]
    #[serde(default)]
    kind1: Kind,
    #[arg(long, value_enum, default_value_t = Kind::Le)]
    #[serde(default)]
    kind2: Kind,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, Default)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
struct ThinshellArgs {
    #[arg(long = "V", value_parser = potential)]
    #[serde(rename = "V")]
    v: Option<OrliczFunction>,
    #[arg(long = "R", default_value_t = 1.0)]
    #[serde(rename = "R")]
    r: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Points at which to evaluate the rate (comma separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    x: Vec<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, Default)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
struct VolumeArgs {
    /// Potential for the limit; the exact column needs a power.
    #[arg(long = "V", value_parser = potential)]
    #[serde(rename = "V")]
    v: Option<OrliczFunction>,
    #[arg(long = "R", default_value_t = 1.0)]
    #[serde(rename = "R")]
    r: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 100, 1000, 5000])]
    n: Vec<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, Deserialize, Default, PartialEq)]
#[serde(rename_all = "lowercase")]
enum SampleMode {
    /// i.i.d. draws from a Gibbs measure.
    #[default]
    Gibbs,
    /// Exact uniform draws from an l_p ball.
    Lp,
    /// Coordinate-Gibbs chain on one or two Orlicz balls.
    Ball,
    /// First k coordinates of the two-ball intersection at radius R + eps.
    Conditional,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, Default)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
struct SampleArgs {
    #[arg(long, value_enum, default_value_t = SampleMode::Gibbs)]
    #[serde(default)]
    mode: SampleMode,
    /// Potential (gibbs) or first ball potential.
    #[arg(long = "V1", visible_alias = "V", value_parser = potential)]
    #[serde(rename = "V1", default)]
    v1: Option<OrliczFunction>,
    #[arg(long = "V2", value_parser = potential)]
    #[serde(rename = "V2", default)]
    v2: Option<OrliczFunction>,
    /// Budget per coordinate of the first ball (gibbs: solves for alpha).
    #[arg(long = "R1", visible_alias = "R", default_value_t = 1.0)]
    #[serde(rename = "R1")]
    r1: f64,
    /// Budget per coordinate of the second ball.
    #[arg(long = "R2")]
    #[serde(rename = "R2", default)]
    r2: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    eps: f64,
    /// Exponent of the l_p ball.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Number of leading coordinates written (0 = all).
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 8)]
    chains: usize,
    /// Default 2n.
    #[arg(long = "burn-in")]
    #[serde(default)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 5)]
    thin: usize,
}

#[derive(Args, Debug, Clone)]
struct ExperimentArgs {
    /// Preset scenario, used when no --config is given.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<ExperimentKind>,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, Default)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
struct VerifyArgs {}

/// Parameters shared by every subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Resolved<T> {
    command: String,
    seed: u64,
    quadrature: QuadratureConfig,
    params: T,
}

enum Failure {
    Usage(String),
    Assertion(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.workers {
        Some(0) => Err(Failure::Usage("--workers must be at least 1".into())),
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Usage(e.to_string())),
        },
        None => dispatch(&cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(m)) => {
            eprintln!("assertion failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical error: {m}");
            ExitCode::from(3)
        }
    }
}

fn emit(cli: &Cli, value: &Value) -> Outcome {
    let text = serde_json::to_string_pretty(value)?;
    match &cli.out {
        Some(path) => fs::write(path, text + "\n")?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

/// Merges `--config` with the command-line values and handles
/// `--dump-config`. Returns `None` when the run should stop after dumping.
fn resolve<T>(cli: &Cli, name: &str, args: &T) -> Result<Option<Resolved<T>>, Failure>
where
    T: Serialize + for<'de> Deserialize<'de> + Clone,
{
    let mut resolved = match &cli.config {
        Some(path) => {
            let r: Resolved<T> = serde_json::from_str(&fs::read_to_string(path)?)?;
            if r.command != name {
                return Err(Failure::Usage(format!(
                    "config is for `{}`, not `{name}`",
                    r.command
                )));
            }
            r
        }
        None => Resolved {
            command: name.into(),
            seed: 0,
            quadrature: QuadratureConfig::default(),
            params: args.clone(),
        },
    };
    if let Some(s) = cli.seed {
        resolved.seed = s;
    }
    if let Some(t) = cli.quad_tol {
        resolved.quadrature.abs_tol = t;
    }
    resolved.quadrature.validate()?;
    if cli.dump_config {
        emit(cli, &serde_json::to_value(&resolved)?)?;
        return Ok(None);
    }
    Ok(Some(resolved))
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, Failure> {
    v.clone().ok_or_else(|| Failure::Usage(format!("missing required argument {flag}")))
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Gibbs(a) => run_gibbs(cli, a),
        Command::Thresholds(a) => run_thresholds(cli, a),
        Command::Maxent(a) => run_maxent(cli, a),
        Command::Thinshell(a) => run_thinshell(cli, a),
        Command::Volume(a) => run_volume(cli, a),
        Command::Sample(a) => run_sample(cli, a),
        Command::Experiment(a) => run_experiment(cli, a),
        Command::Verify(a) => run_verify(cli, a),
    }
}

fn run_gibbs(cli: &Cli, args: &GibbsArgs) -> Outcome {
    let Some(res) = resolve(cli, "gibbs", args)? else {
        return Ok(());
    };
    let q = &res.quadrature;
    let v = required(&res.params.v, "--V")?;
    let alpha = match (res.params.r, res.params.alpha) {
        (Some(r), None) => gibbs::solve_alpha(&v, r, q)?,
        (None, Some(a)) => a,
        _ => return Err(Failure::Usage("give exactly one of --R and --alpha".into())),
    };
    let log_partition = gibbs::log_partition(&v, alpha, q)?;
    let m_v = gibbs::moment(&v, &v, alpha, q)?;
    let variance = gibbs::variance_of_potential(&v, alpha, q)?;
    emit(
        cli,
        &json!({
            "config": res,
            "alpha": alpha,
            "log_partition": log_partition,
            "m_V": m_v,
            "variance_V": variance,
        }),
    )
}

fn run_thresholds(cli: &Cli, args: &PairArgs) -> Outcome {
    let Some(res) = resolve(cli, "thresholds", args)? else {
        return Ok(());
    };
    let v1 = required(&res.params.v1, "--V1")?;
    let v2 = required(&res.params.v2, "--V2")?;
    let t = maxent::thresholds(&v1, &v2, &res.quadrature)?;
    emit(
        cli,
        &json!({
            "config": res,
            "alpha_bar": t.alpha_bar,
            "r_bar": t.r_bar,
            "r_tilde": t.r_tilde,
            "r_typical": t.r_typical,
        }),
    )
}

fn run_maxent(cli: &Cli, args: &MaxentArgs) -> Outcome {
    let Some(res) = resolve(cli, "maxent", args)? else {
        return Ok(());
    };
    let p = &res.params;
    let c1 = MomentConstraint {
        potential: required(&p.v1, "--V1")?,
        level: p.c1,
        kind: p.kind1.into(),
    };
    let c2 = MomentConstraint {
        potential: required(&p.v2, "--V2")?,
        level: required(&p.c2, "--c2")?,
        kind: p.kind2.into(),
    };
    let sol = maxent::maxent_two_constraints(&c1, &c2, &res.quadrature)?;
    let mut value = serde_json::to_value(&sol)?;
    value["config"] = serde_json::to_value(&res)?;
    value["entropy"] = json!(sol.entropy());
    emit(cli, &value)
}

fn float(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(if v > 0.0 { "inf" } else { "-inf" })
    }
}

fn run_thinshell(cli: &Cli, args: &ThinshellArgs) -> Outcome {
    let Some(res) = resolve(cli, "thinshell", args)? else {
        return Ok(());
    };
    let q = &res.quadrature;
    let p = &res.params;
    let v = required(&p.v, "--V")?;
    let x_star = maxent::thinshell_typical(&v, p.r, p.p, q)?;
    let mut rows = Vec::new();
    for &x in &p.x {
        let j = maxent::thinshell_rate(&v, p.r, p.p, x, q)?;
        rows.push(json!({"x": x, "rate": float(j.value), "infeasible": j.infeasible}));
    }
    emit(cli, &json!({"config": res, "x_star": x_star, "values": rows}))
}

fn run_volume(cli: &Cli, args: &VolumeArgs) -> Outcome {
    let Some(res) = resolve(cli, "volume", args)? else {
        return Ok(());
    };
    let p = &res.params;
    let v = required(&p.v, "--V")?;
    let limit = gibbs::log_volume_limit(&v, p.r, &res.quadrature)?;
    let mut rows = Vec::new();
    if let Some(exp) = v.as_power() {
        for &n in &p.n {
            let exact = gibbs::exact_lp_log_volume(exp, p.r, n)?;
            rows.push(json!({"n": n, "exact": exact, "gap": exact - limit}));
        }
    }
    emit(cli, &json!({"config": res, "limit": limit, "rows": rows}))
}

fn run_sample(cli: &Cli, args: &SampleArgs) -> Outcome {
    let Some(res) = resolve(cli, "sample", args)? else {
        return Ok(());
    };
    let q = &res.quadrature;
    let p = &res.params;
    let seed = res.seed;
    let plan = ChainPlan {
        chains: p.chains,
        burn_in: p.burn_in.unwrap_or(2 * p.n),
        thin: p.thin,
    };
    let mut rows: Vec<Vec<f64>> = match p.mode {
        SampleMode::Gibbs => {
            let v = required(&p.v1, "--V1")?;
            let g = GibbsMeasure1D::at_radius(&v, p.r1, q)?;
            samplers::sample_gibbs_iid(&v, g.alpha(), p.count, seed, q)?
                .into_iter()
                .map(|x| vec![x])
                .collect()
        }
        SampleMode::Lp => samplers::sample_lp_ball_exact(p.p, p.r1, p.n, p.count, seed)?,
        SampleMode::Ball => {
            let mut balls = vec![BallConstraint::per_coordinate(required(&p.v1, "--V1")?, p.r1, p.n)?];
            if let Some(v2) = &p.v2 {
                balls.push(BallConstraint::per_coordinate(v2.clone(), required(&p.r2, "--R2")?, p.n)?);
            }
            samplers::run_chains(&balls, p.n, &plan, p.count, seed, <[f64]>::to_vec)?
        }
        SampleMode::Conditional => samplers::conditional_marginal_samples(
            &required(&p.v1, "--V1")?,
            &required(&p.v2, "--V2")?,
            required(&p.r2, "--R2")?,
            p.eps,
            p.n,
            if p.k == 0 { p.n } else { p.k },
            p.count,
            &plan,
            seed,
        )?,
    };
    if p.k > 0 {
        for r in rows.iter_mut() {
            r.truncate(p.k);
        }
    }
    let meta = serde_json::to_value(&res)?;
    match &cli.out {
        Some(path) => samplers::write_samples_csv(path, &rows, &meta)?,
        None => samplers::write_samples(std::io::stdout().lock(), &rows, &meta)?,
    }
    Ok(())
}

fn load_experiment_config(cli: &Cli, args: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&cli.config, args.kind) {
        (Some(path), _) => {
            let cfg: ExperimentConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
            if args.kind.is_some_and(|k| k != cfg.experiment) {
                return Err(Failure::Usage("--kind disagrees with the config file".into()));
            }
            cfg.resolved()
        }
        (None, Some(kind)) => ExperimentConfig::preset(kind),
        (None, None) => return Err(Failure::Usage("give --config or --kind".into())),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.quad_tol {
        cfg.quadrature.abs_tol = t;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(cli: &Cli, args: &ExperimentArgs) -> Outcome {
    let cfg = load_experiment_config(cli, args)?;
    if cli.dump_config {
        let text = serde_json::to_string_pretty(&cfg)?;
        match &cli.out {
            Some(path) => fs::write(path, text + "\n")?,
            None => println!("{text}"),
        }
        return Ok(());
    }
    eprintln!("config: {}", serde_json::to_string(&cfg)?);
    let report = experiments::run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => {
            let csv = report.write(Path::new(path))?;
            log::info!("report written to {} and {}", path.display(), csv.display());
        }
        None => println!("{}", report.to_json()?),
    }
    if report.pass {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .failures()
            .map(|c| format!("{} (n={:?}): {} vs tolerance {}", c.case, c.n, c.statistic, c.tolerance))
            .collect();
        Err(Failure::Assertion(failed.join("; ")))
    }
}

fn run_verify(cli: &Cli, args: &VerifyArgs) -> Outcome {
    let Some(res) = resolve(cli, "verify", args)? else {
        return Ok(());
    };
    let checks = experiments::closed_form_checks(&res.quadrature);
    let pass = checks.iter().all(|c| c.pass);
    emit(cli, &json!({"config": res, "checks": checks, "pass": pass}))?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(Failure::Assertion(format!("failed checks: {}", failed.join(", "))))
    }
}
