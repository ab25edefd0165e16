//! End-to-end scenarios combining the calculus, the maximum-entropy solver,
//! the samplers and the statistics. Each run yields an [`ExperimentReport`]
//! that depends only on its configuration (wall-clock aside).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::empirics::{ks_distance, ks_two_sample, rare_event_rate, Histogram, SplittingPlan, KOLMOGOROV_1PCT};
use crate::error::{Error, Result};
use crate::gibbs::{self, exact_lp_log_volume, log_volume_limit, GibbsMeasure1D, GridDensity, TiltedLaw};
use crate::maxent::{self, Regime};
use crate::orlicz::OrliczFunction;
use crate::quadrature::QuadratureConfig;
use crate::samplers::{derive_seed, run_chains, BallConstraint, ChainPlan, LpBallSampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Marginal,
    Conditional,
    Volume,
    Thinshell,
    LdpRate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Marginal,
        ExperimentKind::Conditional,
        ExperimentKind::Volume,
        ExperimentKind::Thinshell,
        ExperimentKind::LdpRate,
    ];

    fn potentials_needed(self) -> usize {
        match self {
            ExperimentKind::Conditional | ExperimentKind::LdpRate => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Marginal => "marginal",
            ExperimentKind::Conditional => "conditional",
            ExperimentKind::Volume => "volume",
            ExperimentKind::Thinshell => "thinshell",
            ExperimentKind::LdpRate => "ldp_rate",
        })
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Chain settings; `burn_in = None` means `2n` sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSettings {
    pub chains: usize,
    pub burn_in: Option<usize>,
    pub thin: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings {
            chains: 8,
            burn_in: None,
            thin: 5,
        }
    }
}

impl McmcSettings {
    pub fn plan(&self, n: usize) -> ChainPlan {
        ChainPlan {
            chains: self.chains,
            burn_in: self.burn_in.unwrap_or(2 * n),
            thin: self.thin,
        }
    }
}

fn default_eps() -> Vec<f64> {
    vec![0.0]
}

fn default_k() -> usize {
    1
}

fn default_bins() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// `[V]`, or `[V₁, V₂]` for the conditional and rate experiments.
    pub potentials: Vec<OrliczFunction>,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Points per case; a per-experiment default when absent.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Exponent of the thin-shell norm.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub x_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub mcmc: McmcSettings,
    /// Splitting stages; `None` means `max(1, n/5)`.
    #[serde(default)]
    pub n_levels: Option<usize>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Overrides the default per-case tolerance of the main statistic.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

impl ExperimentConfig {
    /// The reference scenario of each experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let p = OrliczFunction::Power;
        let base = ExperimentConfig {
            experiment: kind,
            potentials: vec![p(2.0)],
            r: 1.0,
            eps: default_eps(),
            n: vec![],
            k: 1,
            samples: None,
            p: None,
            x_grid: None,
            mcmc: McmcSettings::default(),
            n_levels: None,
            bins: default_bins(),
            tolerance: None,
            seed: 0,
            output: None,
            quadrature: QuadratureConfig::default(),
        };
        match kind {
            ExperimentKind::Marginal => ExperimentConfig {
                n: vec![50, 100, 200, 400],
                ..base
            },
            ExperimentKind::Conditional => ExperimentConfig {
                potentials: vec![p(2.0), p(1.0)],
                r: 0.5,
                n: vec![200],
                ..base
            },
            ExperimentKind::Volume => ExperimentConfig {
                n: vec![10, 100, 1000, 5000],
                ..base
            },
            ExperimentKind::Thinshell => ExperimentConfig {
                potentials: vec![p(4.0)],
                p: Some(2.0),
                n: vec![100, 400],
                ..base
            },
            ExperimentKind::LdpRate => ExperimentConfig {
                potentials: vec![p(2.0), p(1.0)],
                r: 0.5,
                n: vec![20, 40, 80],
                ..base
            },
        }
        .resolved()
    }

    /// Fills per-experiment defaults that depend on the experiment kind.
    pub fn resolved(mut self) -> Self {
        if self.samples.is_none() {
            self.samples = Some(match self.experiment {
                ExperimentKind::Marginal if self.potentials.first().and_then(|v| v.as_power()).is_some() => 100_000,
                ExperimentKind::Marginal | ExperimentKind::Conditional => 10_000,
                ExperimentKind::Volume => 0,
                ExperimentKind::Thinshell => 4000,
                ExperimentKind::LdpRate => 8000,
            });
        }
        if self.experiment == ExperimentKind::Thinshell {
            self.p.get_or_insert(2.0);
            self.x_grid
                .get_or_insert_with(|| std::iter::once(-0.5).chain((1..=19).map(|i| i as f64 / 20.0)).collect());
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let need = self.experiment.potentials_needed();
        if self.potentials.len() != need {
            return bad(format!(
                "{} needs {need} potential(s), got {}",
                self.experiment,
                self.potentials.len()
            ));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("R must be positive, got {}", self.r));
        }
        if self.n.is_empty() || self.n[0] == 0 || !self.n.windows(2).all(|w| w[0] < w[1]) {
            return bad("n list must be nonempty, positive and strictly increasing".into());
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return bad("eps list must be nonempty and nonnegative".into());
        }
        if self.k != 1 {
            return bad("only the k = 1 marginal is supported".into());
        }
        if self.experiment != ExperimentKind::Volume && self.samples.is_some_and(|s| s < 2) {
            return bad("samples must be at least 2".into());
        }
        if self.mcmc.chains == 0 || self.mcmc.thin == 0 {
            return bad("mcmc.chains and mcmc.thin must be positive".into());
        }
        if self.bins < 10 {
            return bad("bins must be at least 10".into());
        }
        if self.p.is_some_and(|p| !(p >= 1.0 && p.is_finite())) {
            return bad("p must be at least 1".into());
        }
        if self.tolerance.is_some_and(|t| !(t > 0.0)) {
            return bad("tolerance must be positive".into());
        }
        self.quadrature.validate()
    }

    fn samples(&self) -> usize {
        self.samples.unwrap_or(10_000)
    }
}

/// How a case's statistic is judged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `statistic ≤ tolerance`.
    AtMost,
    /// `|statistic − target| ≤ tolerance`.
    Within,
    /// `statistic ≥ target − tolerance`.
    AtLeast,
    /// `statistic = +∞`.
    Infinite,
    /// Reported only; always passes.
    Report,
}

/// Serialises non-finite floats as the strings `inf`, `-inf`, `nan`.
mod lossless {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float `{other}`"))),
            },
        }
    }

    pub fn text(v: f64) -> String {
        if v.is_finite() {
            format!("{v:?}")
        } else if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case: String,
    pub n: Option<usize>,
    pub eps: Option<f64>,
    #[serde(with = "lossless")]
    pub statistic: f64,
    #[serde(with = "lossless")]
    pub target: f64,
    #[serde(with = "lossless")]
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl CaseResult {
    pub fn new(case: impl Into<String>, statistic: f64, target: f64, tolerance: f64, comparison: Comparison) -> Self {
        let pass = match comparison {
            Comparison::AtMost => statistic <= tolerance,
            Comparison::Within => (statistic - target).abs() <= tolerance,
            Comparison::AtLeast => statistic >= target - tolerance,
            Comparison::Infinite => statistic == f64::INFINITY,
            Comparison::Report => true,
        };
        CaseResult {
            case: case.into(),
            n: None,
            eps: None,
            statistic,
            target,
            tolerance,
            comparison,
            pass,
        }
    }

    pub fn at(mut self, n: usize, eps: Option<f64>) -> Self {
        self.n = Some(n);
        self.eps = eps;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cases: Vec<CaseResult>,
    pub fits: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    /// Seed of each `n` (and `ε`) case, in run order.
    pub seeds: Vec<u64>,
    pub pass: bool,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    fn new(config: ExperimentConfig) -> Self {
        ExperimentReport {
            config,
            cases: vec![],
            fits: BTreeMap::new(),
            notes: vec![],
            seeds: vec![],
            pass: false,
            wall_clock_seconds: 0.0,
        }
    }

    fn finish(mut self, started: Instant) -> Self {
        self.pass = !self.cases.is_empty() && self.cases.iter().all(|c| c.pass);
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the wall-clock field zeroed, for reproducibility checks.
    pub fn to_json_without_clock(&self) -> Result<String> {
        ExperimentReport {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
        .to_json()
    }

    /// Companion table with columns `case, n, eps, statistic, target,
    /// tolerance, pass`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["case", "n", "eps", "statistic", "target", "tolerance", "pass"])?;
        for c in &self.cases {
            w.write_record([
                c.case.clone(),
                c.n.map(|n| n.to_string()).unwrap_or_default(),
                c.eps.map(lossless::text).unwrap_or_default(),
                lossless::text(c.statistic),
                lossless::text(c.target),
                lossless::text(c.tolerance),
                c.pass.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `path` (JSON) and the CSV table next to it.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, self.to_json()?)?;
        let csv_path = path.with_extension("csv");
        std::fs::write(&csv_path, self.to_csv()?)?;
        Ok(csv_path)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        ExperimentKind::Marginal => run_marginal_experiment(cfg),
        ExperimentKind::Conditional => run_conditional_experiment(cfg),
        ExperimentKind::Volume => run_volume_experiment(cfg),
        ExperimentKind::Thinshell => run_thinshell_experiment(cfg),
        ExperimentKind::LdpRate => run_ldp_rate_experiment(cfg),
    }
}

fn start(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<(ExperimentConfig, Instant)> {
    if cfg.experiment != kind {
        return Err(Error::Config(format!("config is for {}, not {kind}", cfg.experiment)));
    }
    let cfg = cfg.clone().resolved();
    cfg.validate()?;
    Ok((cfg, Instant::now()))
}

/// Least-squares line through `(x, y)`: `(slope, intercept)`.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Number of `i` with `values[i+1] >= values[i]`.
fn increases(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] >= w[0]).count()
}

/// Number of sign changes between successive differences.
fn trend_reversals(values: &[f64]) -> usize {
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    d.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}

fn ks_tolerance(cfg: &ExperimentConfig, m: usize) -> f64 {
    cfg.tolerance
        .unwrap_or(KOLMOGOROV_1PCT / (m as f64).sqrt() + 0.01)
}

/// Uniform samples on `{Σ V(x_i) ≤ Rn}`: all coordinates pooled in a
/// histogram of `range`, plus the first coordinate of each sample.
#[allow(clippy::too_many_arguments)]
fn ball_marginals(
    v: &OrliczFunction,
    r: f64,
    n: usize,
    count: usize,
    bins: usize,
    range: f64,
    mcmc: &McmcSettings,
    seed: u64,
) -> Result<(Histogram, Vec<f64>)> {
    let empty = Histogram::new(bins, -range, range)?;
    let mut hist = empty.clone();
    let mut first = Vec::with_capacity(count);
    if let Some(p) = v.as_power() {
        let sampler = LpBallSampler::new(p, r, n)?;
        let blocks = sampler.fold(
            count,
            seed,
            || (empty.clone(), Vec::new()),
            |(h, f), x| {
                h.extend(x);
                f.push(x[0]);
            },
        );
        for (h, f) in blocks {
            hist.merge(&h);
            first.extend(f);
        }
    } else {
        let ball = [BallConstraint::per_coordinate(v.clone(), r, n)?];
        let states = run_chains(&ball, n, &mcmc.plan(n), count, seed, |x| {
            let mut h = empty.clone();
            h.extend(x);
            (h, x[0])
        })?;
        for (h, x0) in states {
            hist.merge(&h);
            first.push(x0);
        }
    }
    Ok((hist, first))
}

/// Coordinate marginals of the uniform law on an Orlicz ball against
/// `μ_{V,α(R)}`: histogram TV of the pooled coordinates and KS of the first
/// coordinate, with a `C/n` fit of the TV decay.
pub fn run_marginal_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (cfg, started) = start(cfg, ExperimentKind::Marginal)?;
    let q = &cfg.quadrature;
    let v = &cfg.potentials[0];
    let law = GibbsMeasure1D::at_radius(v, cfg.r, q)?;
    let range = law.quantile(1.0 - 1e-6);
    let mut report = ExperimentReport::new(cfg.clone());
    report.fits.insert("alpha".into(), law.alpha());
    if v.as_power().is_none() {
        report.notes.push("no exact sampler for this potential: coordinate-Gibbs MCMC used".into());
    }
    let mut tvs = Vec::new();
    for (i, &n) in cfg.n.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        report.seeds.push(seed);
        let (hist, first) = ball_marginals(v, cfg.r, n, cfg.samples(), cfg.bins, range, &cfg.mcmc, seed)?;
        let tv = hist.tv(|a, b| law.cdf(b) - law.cdf(a));
        tvs.push(tv);
        report
            .cases
            .push(CaseResult::new("tv_marginal", tv, 0.0, 0.02, Comparison::AtMost).at(n, None));
        let ks = ks_distance(&first, |x| law.cdf(x));
        report.cases.push(
            CaseResult::new("ks_marginal", ks.statistic, 0.0, ks_tolerance(&cfg, first.len()), Comparison::AtMost)
                .at(n, None),
        );
    }
    if tvs.len() >= 2 {
        report.cases.push(CaseResult::new(
            "tv_strictly_decreasing_violations",
            increases(&tvs) as f64,
            0.0,
            0.0,
            Comparison::AtMost,
        ));
        let logn: Vec<f64> = cfg.n.iter().map(|&n| (n as f64).ln()).collect();
        let logtv: Vec<f64> = tvs.iter().map(|t| t.ln()).collect();
        let (slope, intercept) = fit_line(&logn, &logtv);
        let c_fixed = (logtv.iter().zip(&logn).map(|(t, n)| t + n).sum::<f64>() / logn.len() as f64).exp();
        report.fits.insert("tv_loglog_slope".into(), slope);
        report.fits.insert("tv_loglog_intercept".into(), intercept);
        report.fits.insert("tv_c_over_n".into(), c_fixed);
        report
            .cases
            .push(CaseResult::new("tv_loglog_slope", slope, -1.0, 0.5, Comparison::Within));
    }
    Ok(report.finish(started))
}

/// Largest pointwise discrepancy on a 512-node grid between the subcritical
/// maximum-entropy law and `μ_{V₂,α(R)}`, in CDF and in density.
fn subcritical_consistency(law: &TiltedLaw, gibbs_law: &GibbsMeasure1D) -> (f64, f64) {
    let half = gibbs_law.law().cutoff().min(law.cutoff());
    let (mut dc, mut dd) = (0.0_f64, 0.0_f64);
    for i in 0..512 {
        let x = -half + 2.0 * half * i as f64 / 511.0;
        dc = dc.max((law.cdf(x) - gibbs_law.cdf(x)).abs());
        dd = dd.max((law.density(x) - gibbs_law.density(x)).abs());
    }
    (dc, dd)
}

/// First-coordinate samples of `{Σ V₁ ≤ n} ∩ {Σ V₂ ≤ (R+ε)n}` against the
/// maximum-entropy law `ν*` of the limit; in the subcritical regime also
/// against the first coordinate of the `V₂`-ball of radius `R + ε`.
pub fn run_conditional_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (cfg, started) = start(cfg, ExperimentKind::Conditional)?;
    let q = &cfg.quadrature;
    let (v1, v2) = (&cfg.potentials[0], &cfg.potentials[1]);
    let mut report = ExperimentReport::new(cfg.clone());
    let thresholds = match maxent::thresholds(v1, v2, q) {
        Ok(t) => t,
        Err(e @ Error::Hypothesis(_)) => {
            report.notes.push(e.to_string());
            report
                .cases
                .push(CaseResult::new("hypothesis", 1.0, 0.0, 0.0, Comparison::AtMost));
            return Ok(report.finish(started));
        }
        Err(e) => return Err(e),
    };
    report.fits.insert("alpha_bar".into(), thresholds.alpha_bar);
    report.fits.insert("r_bar".into(), thresholds.r_bar);
    report.fits.insert("r_tilde".into(), thresholds.r_tilde);
    report.fits.insert("r_typical".into(), thresholds.r_typical);

    let sol = maxent::conditional_limit_law(v1, v2, cfg.r, q)?;
    report.fits.insert("mu1_star".into(), sol.mu1_star);
    report.fits.insert("mu2_star".into(), sol.mu2_star);
    report.fits.insert("kkt_residual".into(), sol.kkt_residual);
    report.notes.push(format!("regime: {}", sol.regime));
    let predicted = maxent::regime_from_thresholds(&thresholds, cfg.r);
    report.cases.push(CaseResult::new(
        "regime_matches_thresholds",
        f64::from(u8::from(predicted != sol.regime)),
        0.0,
        0.0,
        Comparison::AtMost,
    ));
    let law = sol.law(v1, v2, q)?;

    let subcritical = sol.regime == Regime::Subcritical;
    if subcritical {
        let g = GibbsMeasure1D::at_radius(v2, cfg.r, q)?;
        let (dc, dd) = subcritical_consistency(&law, &g);
        report
            .cases
            .push(CaseResult::new("target_cdf_vs_gibbs", dc, 0.0, 1e-7, Comparison::AtMost));
        report
            .cases
            .push(CaseResult::new("target_density_vs_gibbs", dd, 0.0, 1e-7, Comparison::AtMost));
    }
    let tolerance = cfg.tolerance.unwrap_or(match sol.regime {
        Regime::Intermediate => 0.06,
        _ => 0.05,
    });

    let mut index = 0;
    for &n in &cfg.n {
        for &eps in &cfg.eps {
            let seed = derive_seed(cfg.seed, index);
            index += 1;
            report.seeds.push(seed);
            let samples = crate::samplers::conditional_marginal_samples(
                v1,
                v2,
                cfg.r,
                eps,
                n,
                1,
                cfg.samples(),
                &cfg.mcmc.plan(n),
                seed,
            )?;
            let xs: Vec<f64> = samples.into_iter().map(|s| s[0]).collect();
            let ks = ks_distance(&xs, |x| law.cdf(x));
            report.cases.push(
                CaseResult::new("ks_conditional_vs_maxent", ks.statistic, 0.0, tolerance, Comparison::AtMost)
                    .at(n, Some(eps)),
            );
            if subcritical {
                let ball_seed = derive_seed(seed, 1);
                let (_, ys) = ball_marginals(
                    v2,
                    cfg.r + eps,
                    n,
                    cfg.samples(),
                    cfg.bins,
                    1.0,
                    &cfg.mcmc,
                    ball_seed,
                )?;
                let two = ks_two_sample(&xs, &ys);
                report.cases.push(
                    CaseResult::new(
                        "ks_conditional_vs_v2_ball",
                        two.statistic,
                        0.0,
                        two.critical_value_1pct,
                        Comparison::AtMost,
                    )
                    .at(n, Some(eps)),
                );
            }
        }
    }
    Ok(report.finish(started))
}

/// Exact per-dimension log-volume of ℓ_p balls against the limit
/// `φ_V(α(R)) − α(R)R`.
pub fn run_volume_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (cfg, started) = start(cfg, ExperimentKind::Volume)?;
    let v = &cfg.potentials[0];
    let limit = log_volume_limit(v, cfg.r, &cfg.quadrature)?;
    let mut report = ExperimentReport::new(cfg.clone());
    report.fits.insert("limit".into(), limit);
    let Some(p) = v.as_power() else {
        report
            .notes
            .push("no closed-form volume for this potential: limit reported only".into());
        report
            .cases
            .push(CaseResult::new("limit", limit, limit, 0.0, Comparison::Report));
        return Ok(report.finish(started));
    };
    let last = *cfg.n.last().unwrap_or(&0);
    let mut gaps = Vec::new();
    for &n in &cfg.n {
        let exact = exact_lp_log_volume(p, cfg.r, n)?;
        let gap = (exact - limit).abs();
        gaps.push(gap);
        let case = if n == last {
            CaseResult::new("gap_final", gap, 0.0, cfg.tolerance.unwrap_or(2e-3), Comparison::AtMost)
        } else {
            CaseResult::new("gap", gap, 0.0, f64::INFINITY, Comparison::Report)
        };
        report.cases.push(case.at(n, None));
    }
    if gaps.len() >= 2 {
        report.cases.push(CaseResult::new(
            "gap_decreasing_violations",
            increases(&gaps) as f64,
            0.0,
            0.0,
            Comparison::AtMost,
        ));
    }
    Ok(report.finish(started))
}

/// The thin-shell rate on a grid of `x`, and the Monte Carlo concentration
/// of `n^{−1/p}‖X‖_p` for `X` uniform on the `V`-ball.
pub fn run_thinshell_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (cfg, started) = start(cfg, ExperimentKind::Thinshell)?;
    let q = &cfg.quadrature;
    let v = &cfg.potentials[0];
    let p = cfg.p.unwrap_or(2.0);
    let mut report = ExperimentReport::new(cfg.clone());
    let x_star = maxent::thinshell_typical(v, cfg.r, p, q)?;
    report.fits.insert("x_star".into(), x_star);

    let at_star = maxent::thinshell_rate(v, cfg.r, p, x_star, q)?;
    report
        .cases
        .push(CaseResult::new("rate_at_typical", at_star.value, 0.0, 1e-6, Comparison::AtMost));
    let mut min_rate = f64::INFINITY;
    for &x in cfg.x_grid.as_deref().unwrap_or(&[]) {
        let j = maxent::thinshell_rate(v, cfg.r, p, x, q)?;
        let label = format!("rate(x={x})");
        if x < 0.0 {
            report
                .cases
                .push(CaseResult::new(label, j.value, f64::INFINITY, 0.0, Comparison::Infinite));
        } else {
            if j.infeasible {
                report.notes.push(format!("x = {x}: dual diverged, rate reported as +inf"));
            }
            min_rate = min_rate.min(j.value);
            report
                .cases
                .push(CaseResult::new(label, j.value, 0.0, f64::INFINITY, Comparison::Report));
        }
    }
    if min_rate.is_finite() {
        report
            .cases
            .push(CaseResult::new("rate_min_on_grid", min_rate, 0.0, 0.0, Comparison::AtLeast));
    }

    let mut variances = Vec::new();
    let last = *cfg.n.last().unwrap_or(&0);
    for (i, &n) in cfg.n.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        report.seeds.push(seed);
        let ball = [BallConstraint::per_coordinate(v.clone(), cfg.r, n)?];
        let nf = n as f64;
        let norms = run_chains(&ball, n, &cfg.mcmc.plan(n), cfg.samples(), seed, |x| {
            (x.iter().map(|t| t.abs().powf(p)).sum::<f64>() / nf).powf(1.0 / p)
        })?;
        let m = norms.len() as f64;
        let mean = norms.iter().sum::<f64>() / m;
        let var = norms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1.0);
        variances.push(var);
        report.fits.insert(format!("shell_variance_n{n}"), var);
        let rel = (mean - x_star).abs() / x_star;
        let case = if n == last {
            CaseResult::new("shell_mean_rel_err", rel, 0.0, cfg.tolerance.unwrap_or(0.01), Comparison::AtMost)
        } else {
            CaseResult::new("shell_mean_rel_err", rel, 0.0, f64::INFINITY, Comparison::Report)
        };
        report.cases.push(case.at(n, None));
    }
    if variances.len() >= 2 {
        report.cases.push(CaseResult::new(
            "shell_variance_decreasing_violations",
            increases(&variances) as f64,
            0.0,
            0.0,
            Comparison::AtMost,
        ));
    }
    Ok(report.finish(started))
}

/// `𝕀_{V₁}(ν*)` for the conditional limit law `ν*` at radius `R`, through
/// the Sanov rate function on a fine grid.
pub fn conditional_rate_limit(v1: &OrliczFunction, v2: &OrliczFunction, r: f64, q: &QuadratureConfig) -> Result<f64> {
    let sol = maxent::conditional_limit_law(v1, v2, r, q)?;
    let law = sol.law(v1, v2, q)?;
    let half = law.cutoff();
    let nodes: Vec<f64> = (0..=40_000).map(|i| -half + 2.0 * half * i as f64 / 40_000.0).collect();
    let density = GridDensity::from_fn(&nodes, |x| law.density(x))?;
    gibbs::rate_function(v1, 1.0, &density, q)
}

/// Multilevel-splitting estimates of `−(1/n) log P[Σ V₂(X_i) ≤ Rn]` for `X`
/// uniform on the `V₁`-ball, against the limit `𝕀_{V₁}(ν*)`.
pub fn run_ldp_rate_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (cfg, started) = start(cfg, ExperimentKind::LdpRate)?;
    let q = &cfg.quadrature;
    let (v1, v2) = (&cfg.potentials[0], &cfg.potentials[1]);
    let mut report = ExperimentReport::new(cfg.clone());
    let alpha_one = gibbs::solve_alpha(v1, 1.0, q)?;
    let typical = gibbs::moment(v2, v1, alpha_one, q)?;
    report.fits.insert("typical".into(), typical);
    let rare = cfg.r < typical;
    let limit = if rare {
        conditional_rate_limit(v1, v2, cfg.r, q)?
    } else {
        0.0
    };
    report.fits.insert("limit".into(), limit);
    report
        .notes
        .push("informational: finite-n bias of the rate is not quantified".into());

    let mut estimates = Vec::new();
    for (i, &n) in cfg.n.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        report.seeds.push(seed);
        let chains = cfg.mcmc.chains.max(2);
        let plan = SplittingPlan {
            n_levels: cfg.n_levels.unwrap_or((n / 5).max(1)),
            chains,
            burn_in: cfg.mcmc.burn_in.unwrap_or(2 * n),
            thin: 2,
            kept_per_chain: cfg.samples().div_ceil(chains),
        };
        let est = rare_event_rate(v1, v2, cfg.r, n, &plan, seed, q)?;
        report.fits.insert(format!("stderr_n{n}"), est.stderr);
        estimates.push(est.rate);
        report
            .cases
            .push(CaseResult::new("rate_estimate", est.rate, limit, f64::INFINITY, Comparison::Report).at(n, None));
    }
    let last_n = *cfg.n.last().unwrap_or(&0);
    let last = *estimates.last().unwrap_or(&f64::NAN);
    let final_case = if rare {
        CaseResult::new(
            "rate_final_rel",
            last,
            limit,
            cfg.tolerance.unwrap_or(0.2) * limit,
            Comparison::Within,
        )
    } else {
        CaseResult::new("rate_nonrare", last, 0.0, cfg.tolerance.unwrap_or(0.02), Comparison::AtMost)
    };
    report.cases.push(final_case.at(last_n, None));
    if estimates.len() >= 3 {
        report.cases.push(CaseResult::new(
            "trend_reversals",
            trend_reversals(&estimates) as f64,
            0.0,
            1.0,
            Comparison::AtMost,
        ));
    }
    Ok(report.finish(started))
}

/// Outcome of one closed-form check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, result: Result<(bool, String)>) -> Check {
    match result {
        Ok((pass, detail)) => Check {
            name: name.into(),
            pass,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            pass: false,
            detail: e.to_string(),
        },
    }
}

/// Built-in potentials exercised by the closed-form checks.
pub fn builtin_potentials() -> Vec<OrliczFunction> {
    vec![
        OrliczFunction::Power(1.0),
        OrliczFunction::Power(1.5),
        OrliczFunction::Power(2.0),
        OrliczFunction::Power(3.0),
        OrliczFunction::Power(4.0),
        OrliczFunction::Huber(1.0),
        OrliczFunction::Mix(vec![(1.0, 4.0), (0.5, 1.0)]),
    ]
}

/// Deterministic invariant suite: no sampling.
pub fn closed_form_checks(q: &QuadratureConfig) -> Vec<Check> {
    use std::f64::consts::{PI, SQRT_2};
    let mut out = Vec::new();

    out.push(check("orlicz_axioms", (|| {
        let grid: Vec<f64> = (0..=400).map(|i| -10.0 + 0.05 * i as f64).collect();
        let mut worst = Vec::new();
        for v in builtin_potentials() {
            if !crate::orlicz::verify_orlicz(&v, &grid)?.all_pass() {
                worst.push(v.to_string());
            }
        }
        Ok((worst.is_empty(), format!("failing: {worst:?}")))
    })()));

    out.push(check("critical_temperature_power", (|| {
        let mut worst = 0.0_f64;
        for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
            for r in [0.1, 0.5, 1.0, 2.0, 10.0] {
                let a = gibbs::solve_alpha(&OrliczFunction::Power(p), r, q)?;
                let exact = -1.0 / (p * r);
                worst = worst.max(((a - exact) / exact).abs());
            }
        }
        Ok((worst <= 1e-9, format!("worst relative error {worst:e}")))
    })()));

    out.push(check("log_partition_derivative", (|| {
        let mut worst = 0.0_f64;
        let h = 1e-4;
        for v in builtin_potentials() {
            for a in [-4.0, -2.0, -1.0, -0.5, -0.1] {
                let fd = (gibbs::log_partition(&v, a + h, q)? - gibbs::log_partition(&v, a - h, q)?) / (2.0 * h);
                worst = worst.max((gibbs::moment(&v, &v, a, q)? - fd).abs());
            }
        }
        Ok((worst <= 1e-5, format!("worst |m_V - dphi/dalpha| {worst:e}")))
    })()));

    out.push(check("thresholds", (|| {
        let p = OrliczFunction::Power;
        let a = maxent::thresholds(&p(2.0), &p(1.0), q)?;
        let b = maxent::thresholds(&p(4.0), &p(2.0), q)?;
        let ok = (a.alpha_bar + SQRT_2).abs() <= 1e-6
            && (a.r_bar - 1.0 / SQRT_2).abs() <= 1e-6
            && (a.r_tilde - 1.0).abs() <= 1e-4
            && (b.r_bar - 1.0 / 3f64.sqrt()).abs() <= 1e-6
            && (b.r_tilde - 1.0).abs() <= 1e-4;
        Ok((ok, format!("{a:?} {b:?}")))
    })()));

    out.push(check("maxent_kkt", (|| {
        let p = OrliczFunction::Power;
        let mut worst = (0.0_f64, 0.0_f64);
        for (v1, v2, r) in [(p(2.0), p(1.0), 0.5), (p(2.0), p(1.0), 0.75), (p(2.0), p(1.0), 1.5), (p(4.0), p(2.0), 0.62)] {
            let s = maxent::conditional_limit_law(&v1, &v2, r, q)?;
            worst.0 = worst.0.max(s.kkt_residual);
            worst.1 = worst.1.max(s.slackness(1.0, r));
        }
        Ok((worst.0 <= 1e-9 && worst.1 <= 1e-8, format!("kkt {:e}, slackness {:e}", worst.0, worst.1)))
    })()));

    out.push(check("volume_limit", (|| {
        let mut worst = 0.0_f64;
        for p in [1.0, 2.0, 4.0] {
            for r in [0.5, 1.0, 2.0] {
                let limit = log_volume_limit(&OrliczFunction::Power(p), r, q)?;
                worst = worst.max((exact_lp_log_volume(p, r, 5000)? - limit).abs());
            }
        }
        let gauss = log_volume_limit(&OrliczFunction::Power(2.0), 1.0, q)?;
        let ok = worst <= 2e-3 && (gauss - 0.5 * (2.0 * PI).ln() - 0.5).abs() <= 1e-9;
        Ok((ok, format!("worst gap at n=5000 {worst:e}")))
    })()));

    out.push(check("thinshell_zero_and_sign", (|| {
        let v = OrliczFunction::Power(4.0);
        let xs = maxent::thinshell_typical(&v, 1.0, 2.0, q)?;
        let j0 = maxent::thinshell_rate(&v, 1.0, 2.0, xs, q)?.value;
        let neg = maxent::thinshell_rate(&v, 1.0, 2.0, -0.5, q)?.value;
        let mut min = f64::INFINITY;
        for i in 1..=18 {
            min = min.min(maxent::thinshell_rate(&v, 1.0, 2.0, i as f64 / 20.0, q)?.value);
        }
        Ok((
            j0 <= 1e-6 && neg == f64::INFINITY && min >= 0.0,
            format!("J(x*={xs}) = {j0:e}, min on grid {min}"),
        ))
    })()));

    out.push(check("rate_function_zero_at_gibbs", (|| {
        let v = OrliczFunction::Power(2.0);
        let nodes: Vec<f64> = (0..=40_000).map(|i| -12.0 + 24.0 * i as f64 / 40_000.0).collect();
        let g = GridDensity::from_fn(&nodes, |x| (-0.5 * x * x).exp())?;
        let i = gibbs::rate_function(&v, 1.0, &g, q)?;
        Ok((i.abs() <= 1e-6, format!("I(N(0,1)) = {i:e}")))
    })()));

    out
}
