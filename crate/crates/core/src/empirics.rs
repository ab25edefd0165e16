//! Goodness-of-fit statistics and a rare-event rate estimator.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs;
use crate::orlicz::OrliczFunction;
use crate::quadrature::{integrate_scalar, QuadratureConfig};
use crate::samplers::{run_chain, stream_rng, BallConstraint, McmcParams};

/// Asymptotic Kolmogorov quantile at the 1% level.
pub const KOLMOGOROV_1PCT: f64 = 1.63;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonStat {
    pub statistic: f64,
    pub sample_sizes: Vec<usize>,
    pub critical_value_1pct: f64,
    pub pass: bool,
}

impl ComparisonStat {
    fn new(statistic: f64, sample_sizes: Vec<usize>, critical_value_1pct: f64) -> Self {
        ComparisonStat {
            statistic,
            sample_sizes,
            critical_value_1pct,
            pass: statistic <= critical_value_1pct,
        }
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `sup_x |F_m(x) − F(x)|` for the empirical CDF `F_m` of `samples`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> ComparisonStat {
    let s = sorted(samples);
    let m = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max);
    ComparisonStat::new(d, vec![s.len()], KOLMOGOROV_1PCT / m.sqrt())
}

/// `sup_x |F_a(x) − F_b(x)|` for two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> ComparisonStat {
    let (a, b) = (sorted(a), sorted(b));
    let (ma, mb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / ma - j as f64 / mb).abs());
    }
    let crit = KOLMOGOROV_1PCT * ((ma + mb) / (ma * mb)).sqrt();
    ComparisonStat::new(d, vec![a.len(), b.len()], crit)
}

/// Counts on `bins` equal cells of `[lo, hi)`, plus the count outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub outside: u64,
}

impl Histogram {
    pub fn new(bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins < 10 {
            return Err(Error::Domain(format!("need at least 10 bins, got {bins}")));
        }
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Domain(format!("bad histogram range [{lo}, {hi}]")));
        }
        Ok(Histogram {
            lo,
            hi,
            counts: vec![0; bins],
            outside: 0,
        })
    }

    pub fn add(&mut self, x: f64) {
        let t = (x - self.lo) / (self.hi - self.lo);
        if (0.0..1.0).contains(&t) {
            let b = ((t * self.counts.len() as f64) as usize).min(self.counts.len() - 1);
            self.counts[b] += 1;
        } else {
            self.outside += 1;
        }
    }

    pub fn extend(&mut self, xs: &[f64]) {
        for &x in xs {
            self.add(x);
        }
    }

    /// Adds the counts of a histogram on the same cells.
    pub fn merge(&mut self, other: &Histogram) {
        debug_assert!(self.counts.len() == other.counts.len() && self.lo == other.lo && self.hi == other.hi);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.outside += other.outside;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.outside
    }

    pub fn edges(&self) -> Vec<f64> {
        let k = self.counts.len();
        (0..=k)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / k as f64)
            .collect()
    }

    /// `½ Σ_cells |p̂ − q|` where the complement of the range is one extra
    /// cell, and `bin_mass(a, b)` is the target mass of `[a, b)`.
    pub fn tv(&self, mut bin_mass: impl FnMut(f64, f64) -> f64) -> f64 {
        let total = self.total() as f64;
        let edges = self.edges();
        let mut inside_target = 0.0;
        let mut sum = 0.0;
        for (w, &c) in edges.windows(2).zip(&self.counts) {
            let q = bin_mass(w[0], w[1]);
            inside_target += q;
            sum += (c as f64 / total - q).abs();
        }
        let q_out = (1.0 - inside_target).max(0.0);
        sum += (self.outside as f64 / total - q_out).abs();
        0.5 * sum
    }
}

/// Histogram total-variation distance between `samples` and `density` on
/// `bins` cells of `range`, with the mass outside `range` as one more cell.
pub fn tv_histogram(
    samples: &[f64],
    density: impl Fn(f64) -> f64,
    bins: usize,
    range: (f64, f64),
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let mut h = Histogram::new(bins, range.0, range.1)?;
    h.extend(samples);
    let masses = h
        .edges()
        .windows(2)
        .map(|w| integrate_scalar(&density, w[0], w[1], cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut it = masses.into_iter();
    Ok(h.tv(|_, _| it.next().unwrap_or(0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Percentile-bootstrap interval for the mean of `f(x)`.
pub fn bootstrap_mean(samples: &[f64], f: impl Fn(f64) -> f64, resamples: usize, level: f64, seed: u64) -> Result<Interval> {
    if samples.is_empty() || resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain("bootstrap needs samples, resamples and a level in (0,1)".into()));
    }
    let values: Vec<f64> = samples.iter().map(|&x| f(x)).collect();
    let m = values.len();
    let estimate = values.iter().sum::<f64>() / m as f64;
    let mut rng = stream_rng(seed, 0);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..m).map(|_| values[rng.random_range(0..m)]).sum::<f64>() / m as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let tail = 0.5 * (1.0 - level);
    Ok(Interval {
        estimate,
        lower: q(tail),
        upper: q(1.0 - tail),
    })
}

/// Schedule of the multilevel splitting estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplittingPlan {
    pub n_levels: usize,
    /// Independent chains per stage; also the replications behind `stderr`.
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub kept_per_chain: usize,
}

impl SplittingPlan {
    pub fn defaults(n: usize, n_levels: usize) -> Self {
        SplittingPlan {
            n_levels,
            chains: 8,
            burn_in: 2 * n,
            thin: 2,
            kept_per_chain: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Estimate of `−(1/n) log P[Σ V₂(X_i) ≤ Rn]` for `X` uniform on the
    /// `V₁`-ball of budget `n`.
    pub rate: f64,
    pub stderr: f64,
    /// Per-coordinate `V₂` levels, from the typical value down to `R`.
    pub levels: Vec<f64>,
    pub stage_probabilities: Vec<f64>,
}

/// Multilevel splitting. Stage 0 estimates `P[Σ V₂ ≤ n·R₀]` on the `V₁`-ball
/// with `R₀ = m_{V₂}(μ_{V₁,α(1)})`; stage `l` estimates
/// `P[Σ V₂ ≤ n·R_l | Σ V₂ ≤ n·R_{l−1}]` by sampling the intersection body at
/// level `R_{l−1}`, with `R_l = R₀ (R/R₀)^{l/L}`.
pub fn rare_event_rate(
    v1: &OrliczFunction,
    v2: &OrliczFunction,
    r: f64,
    n: usize,
    plan: &SplittingPlan,
    seed: u64,
    cfg: &QuadratureConfig,
) -> Result<RateEstimate> {
    if !(r > 0.0) || n == 0 || plan.chains < 2 || plan.kept_per_chain == 0 {
        return Err(Error::Config(
            "need R > 0, n >= 1, at least 2 chains and kept_per_chain >= 1".into(),
        ));
    }
    let alpha_one = gibbs::solve_alpha(v1, 1.0, cfg)?;
    let typical = gibbs::moment(v2, v1, alpha_one, cfg)?;
    let levels: Vec<f64> = if r >= typical {
        vec![r]
    } else {
        if plan.n_levels == 0 {
            return Err(Error::Config("n_levels must be at least 1 below the typical value".into()));
        }
        let l = plan.n_levels as f64;
        (0..=plan.n_levels)
            .map(|i| typical * (r / typical).powf(i as f64 / l))
            .map(|x| x.max(r))
            .collect()
    };
    let params = McmcParams {
        sweeps: plan.burn_in + plan.thin * plan.kept_per_chain,
        burn_in: plan.burn_in,
        thin: plan.thin,
    };
    params.validate()?;
    let ball = BallConstraint::per_coordinate(v1.clone(), 1.0, n)?;
    let nf = n as f64;

    let mut probabilities = Vec::with_capacity(levels.len());
    let mut log_var = 0.0;
    for (stage, &level) in levels.iter().enumerate() {
        let mut body = vec![ball.clone()];
        if stage > 0 {
            body.push(BallConstraint::per_coordinate(v2.clone(), levels[stage - 1], n)?);
        }
        let threshold = level * nf;
        let fractions: Vec<f64> = (0..plan.chains)
            .into_par_iter()
            .map(|c| {
                let stream = (stage * plan.chains + c) as u64;
                let hits = run_chain(&body, n, &params, seed, stream, |x| {
                    x.iter().map(|&t| v2.value(t)).sum::<f64>() <= threshold
                })?;
                Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
            })
            .collect::<Result<_>>()?;
        let c = fractions.len() as f64;
        let p = fractions.iter().sum::<f64>() / c;
        if p == 0.0 {
            return Err(Error::Degenerate(format!(
                "no hits at stage {stage} (level {level}); raise n_levels or chains"
            )));
        }
        let var = fractions.iter().map(|f| (f - p).powi(2)).sum::<f64>() / (c - 1.0);
        log_var += var / c / (p * p);
        probabilities.push(p);
    }
    let rate = -probabilities.iter().map(|p| p.ln()).sum::<f64>() / nf;
    Ok(RateEstimate {
        rate,
        stderr: log_var.sqrt() / nf,
        levels,
        stage_probabilities: probabilities,
    })
}
