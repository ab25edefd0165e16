//! Random generation on Orlicz balls.
//!
//! * i.i.d. draws from a one-dimensional Gibbs measure by inversion;
//! * exact uniform draws from `{Σ|x_i|^p ≤ Rn}` via the Schechtman–Zinn
//!   representation;
//! * a coordinate-Gibbs chain whose stationary law is uniform on
//!   `{Σ V_j(x_i) ≤ budget_j for all j}`.
//!
//! Every stream is a [`ChaCha8Rng`] keyed by `(seed, stream index)`, so
//! results never depend on how chains or blocks are scheduled.

use std::io::Write;
use std::path::Path;

use log::warn;
use rand::distr::{Distribution, Open01};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::GibbsMeasure1D;
use crate::orlicz::OrliczFunction;
use crate::quadrature::QuadratureConfig;

/// Independent generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for sub-task `index` of a run keyed by `seed`, drawn from a stream
/// disjoint from the low stream indices used by chains and blocks.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, u64::MAX - index).next_u64()
}

/// `count` i.i.d. draws from `μ_{V,α}` by inverting its CDF.
pub fn sample_gibbs_iid(
    v: &OrliczFunction,
    alpha: f64,
    count: usize,
    seed: u64,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let g = GibbsMeasure1D::new(v, alpha, cfg)?;
    let mut rng = stream_rng(seed, 0);
    Ok((0..count).map(|_| g.quantile(Open01.sample(&mut rng))).collect())
}

/// Exact uniform sampler on the ℓ_p ball of radius `(Rn)^{1/p}` in ℝⁿ.
#[derive(Clone, Debug)]
pub struct LpBallSampler {
    p: f64,
    n: usize,
    budget: f64,
    gamma: Gamma<f64>,
}

/// Samples per generator stream in the exact sampler.
const BLOCK: usize = 256;

impl LpBallSampler {
    pub fn new(p: f64, r: f64, n: usize) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite() && r > 0.0 && r.is_finite() && n >= 1) {
            return Err(Error::Domain(format!("need p >= 1, R > 0, n >= 1 (got p={p}, R={r}, n={n})")));
        }
        let gamma = Gamma::new(1.0 / p, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(LpBallSampler {
            p,
            n,
            budget: r * n as f64,
            gamma,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `X = (Rn)^{1/p} U^{1/n} G/‖G‖_p` with `|G_i|^p ~ Γ(1/p, 1)` and
    /// independent signs, written into `out`.
    pub fn sample_into<G: Rng>(&self, rng: &mut G, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        let mut total = 0.0;
        for o in out.iter_mut() {
            let e = self.gamma.sample(rng);
            total += e;
            let mag = e.powf(1.0 / self.p);
            *o = if rng.random::<bool>() { mag } else { -mag };
        }
        let u: f64 = Open01.sample(rng);
        // Σ|X_i|^p = budget·U^{p/n} ≤ budget
        let scale = (self.budget / total).powf(1.0 / self.p) * u.powf(1.0 / self.n as f64);
        for o in out.iter_mut() {
            *o *= scale;
        }
    }

    /// Runs `fold` over `count` samples, one accumulator per block of
    /// consecutive samples, returned in block order.
    pub fn fold<A, I, F>(&self, count: usize, seed: u64, init: I, fold: F) -> Vec<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &[f64]) + Sync,
    {
        let blocks = count.div_ceil(BLOCK);
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream_rng(seed, b as u64);
                let mut acc = init();
                let mut x = vec![0.0; self.n];
                let len = BLOCK.min(count - b * BLOCK);
                for _ in 0..len {
                    self.sample_into(&mut rng, &mut x);
                    fold(&mut acc, &x);
                }
                acc
            })
            .collect()
    }

    /// `f` applied to each of `count` samples, in sample order.
    pub fn map<T, F>(&self, count: usize, seed: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        self.fold(count, seed, Vec::new, |acc, x| acc.push(f(x)))
            .into_iter()
            .flatten()
            .collect()
    }
}

/// `count` exact uniform samples from `{x ∈ ℝⁿ : Σ|x_i|^p ≤ Rn}`.
pub fn sample_lp_ball_exact(p: f64, r: f64, n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(LpBallSampler::new(p, r, n)?.map(count, seed, <[f64]>::to_vec))
}

/// `Σ V(x_i) ≤ budget`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallConstraint {
    pub potential: OrliczFunction,
    pub budget: f64,
}

/// Relative shrink of each budget inside the chain, so that states checked
/// by fresh summation stay inside the body despite cache round-off.
const BUDGET_MARGIN: f64 = 1e-10;
const RESYNC_EVERY: usize = 64;

impl BallConstraint {
    pub fn new(potential: OrliczFunction, budget: f64) -> Result<Self> {
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::Config(format!("ball budget must be positive, got {budget}")));
        }
        Ok(BallConstraint { potential, budget })
    }

    /// The constraint `Σ V(x_i) ≤ R·n`.
    pub fn per_coordinate(potential: OrliczFunction, r: f64, n: usize) -> Result<Self> {
        Self::new(potential, r * n as f64)
    }

    pub fn sum(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| self.potential.value(t)).sum()
    }

    /// Fresh-summation membership test.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.sum(x) <= self.budget
    }

    fn working_budget(&self) -> f64 {
        self.budget * (1.0 - BUDGET_MARGIN)
    }
}

/// Chain lengths in sweeps. A record is kept after sweep `s` when
/// `s > burn_in` and `(s − burn_in) % thin == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcParams {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl McmcParams {
    /// Default burn-in `2n` and thinning 5, sized to keep `kept` records.
    pub fn for_kept(n: usize, kept: usize) -> Self {
        let burn_in = 2 * n;
        McmcParams {
            sweeps: burn_in + 5 * kept,
            burn_in,
            thin: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.sweeps <= self.burn_in {
            return Err(Error::Config(format!(
                "sweeps ({}) must exceed burn_in ({})",
                self.sweeps, self.burn_in
            )));
        }
        if self.kept() == 0 {
            return Err(Error::Config(format!(
                "no records kept: sweeps − burn_in = {} < thin = {}",
                self.sweeps - self.burn_in,
                self.thin
            )));
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        self.sweeps.saturating_sub(self.burn_in) / self.thin.max(1)
    }
}

/// One coordinate-Gibbs chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub x: Vec<f64>,
    /// `Σ_i V_j(x_i)` per constraint, updated incrementally.
    pub potential_sums: Vec<f64>,
    pub rng: ChaCha8Rng,
    pub sweep_count: usize,
    order: Vec<usize>,
    scratch: Vec<f64>,
}

impl ChainState {
    /// Chain started at the origin.
    pub fn new(constraints: &[BallConstraint], n: usize, rng: ChaCha8Rng) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::Config("at least one ball constraint is required".into()));
        }
        if n == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        Ok(ChainState {
            x: vec![0.0; n],
            potential_sums: vec![0.0; constraints.len()],
            rng,
            sweep_count: 0,
            order: (0..n).collect(),
            scratch: vec![0.0; constraints.len()],
        })
    }

    /// Visits all coordinates in random order, redrawing each uniformly on
    /// the interval allowed by the other coordinates.
    pub fn sweep(&mut self, constraints: &[BallConstraint]) {
        self.order.shuffle(&mut self.rng);
        for &i in &self.order {
            let xi = self.x[i];
            let mut half_width = f64::INFINITY;
            for (j, c) in constraints.iter().enumerate() {
                let vi = c.potential.value(xi);
                self.scratch[j] = vi;
                let slack = (c.working_budget() - (self.potential_sums[j] - vi)).max(0.0);
                half_width = half_width.min(c.potential.inverse_nonneg(slack));
            }
            let u: f64 = self.rng.random();
            let new = half_width * (2.0 * u - 1.0);
            for (j, c) in constraints.iter().enumerate() {
                self.potential_sums[j] += c.potential.value(new) - self.scratch[j];
            }
            self.x[i] = new;
        }
        self.sweep_count += 1;
        if self.sweep_count.is_multiple_of(RESYNC_EVERY) {
            self.resync(constraints);
        }
    }

    /// Recomputes the cached sums from scratch.
    pub fn resync(&mut self, constraints: &[BallConstraint]) {
        let n = self.x.len() as f64;
        for (j, c) in constraints.iter().enumerate() {
            let fresh = c.sum(&self.x);
            let drift = (fresh - self.potential_sums[j]).abs();
            if drift > 1e-8 * n {
                warn!("potential sum drifted by {drift:e} over {RESYNC_EVERY} sweeps");
            }
            self.potential_sums[j] = fresh;
        }
    }
}

/// Runs one chain on stream `stream` and returns `record(state)` for every
/// kept state.
pub fn run_chain<T>(
    constraints: &[BallConstraint],
    n: usize,
    params: &McmcParams,
    seed: u64,
    stream: u64,
    mut record: impl FnMut(&[f64]) -> T,
) -> Result<Vec<T>> {
    params.validate()?;
    let mut chain = ChainState::new(constraints, n, stream_rng(seed, stream))?;
    let mut out = Vec::with_capacity(params.kept());
    for s in 1..=params.sweeps {
        chain.sweep(constraints);
        if s > params.burn_in && (s - params.burn_in).is_multiple_of(params.thin) {
            out.push(record(&chain.x));
        }
    }
    Ok(out)
}

/// Kept states of a single chain (stream 0) targeting the uniform law on the
/// intersection of `constraints`.
pub fn mcmc_orlicz_ball(
    constraints: &[BallConstraint],
    n: usize,
    params: &McmcParams,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    run_chain(constraints, n, params, seed, 0, <[f64]>::to_vec)
}

/// Independent chains with a shared schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl ChainPlan {
    /// 8 chains, burn-in `2n`, thinning 5.
    pub fn defaults(n: usize) -> Self {
        ChainPlan {
            chains: 8,
            burn_in: 2 * n,
            thin: 5,
        }
    }

    /// Per-chain parameters for `kept` records in total.
    pub fn params_for(&self, kept: usize) -> Result<McmcParams> {
        if self.chains == 0 {
            return Err(Error::Config("need at least one chain".into()));
        }
        let per_chain = kept.div_ceil(self.chains).max(1);
        let p = McmcParams {
            sweeps: self.burn_in + self.thin * per_chain,
            burn_in: self.burn_in,
            thin: self.thin,
        };
        p.validate()?;
        Ok(p)
    }
}

/// `kept` records pooled over `plan.chains` chains (chain `c` on stream `c`),
/// concatenated in chain order and truncated to `kept`. Chains run on the
/// current rayon pool.
pub fn run_chains<T, F>(
    constraints: &[BallConstraint],
    n: usize,
    plan: &ChainPlan,
    kept: usize,
    seed: u64,
    record: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    let params = plan.params_for(kept)?;
    let per_chain: Vec<Vec<T>> = (0..plan.chains)
        .into_par_iter()
        .map(|c| run_chain(constraints, n, &params, seed, c as u64, &record))
        .collect::<Result<_>>()?;
    let mut out: Vec<T> = per_chain.into_iter().flatten().collect();
    out.truncate(kept);
    Ok(out)
}

/// First `k` coordinates of `kept` states uniform on
/// `{Σ V₁(x_i) ≤ n} ∩ {Σ V₂(x_i) ≤ (R + ε)n}`.
#[allow(clippy::too_many_arguments)]
pub fn conditional_marginal_samples(
    v1: &OrliczFunction,
    v2: &OrliczFunction,
    r: f64,
    eps: f64,
    n: usize,
    k: usize,
    kept: usize,
    plan: &ChainPlan,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(eps >= 0.0) {
        return Err(Error::Config(format!("eps must be nonnegative, got {eps}")));
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("need 1 <= k <= n (k={k}, n={n})")));
    }
    let constraints = [
        BallConstraint::per_coordinate(v1.clone(), 1.0, n)?,
        BallConstraint::per_coordinate(v2.clone(), r + eps, n)?,
    ];
    run_chains(&constraints, n, plan, kept, seed, |x| x[..k].to_vec())
}

/// Writes samples as CSV with columns `x1..xk`, preceded by a `#` line
/// holding `metadata` as JSON.
pub fn write_samples_csv(path: impl AsRef<Path>, rows: &[Vec<f64>], metadata: &serde_json::Value) -> Result<()> {
    write_samples(std::io::BufWriter::new(std::fs::File::create(path)?), rows, metadata)
}

/// Writer form of [`write_samples_csv`].
pub fn write_samples<W: Write>(mut out: W, rows: &[Vec<f64>], metadata: &serde_json::Value) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(metadata)?)?;
    let width = rows.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=width).map(|i| format!("x{i}")))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<(serde_json::Value, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let meta = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::Io("missing `#` metadata line".into()))?;
    let meta: serde_json::Value = serde_json::from_str(meta)?;
    let mut rdr = csv::Reader::from_reader(rest.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(
            rec?.iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Io(format!("bad number `{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok((meta, rows))
}
