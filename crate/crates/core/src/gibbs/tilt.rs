use crate::error::{Error, Result};
use crate::orlicz::OrliczFunction;
use crate::quadrature::{integrate, QuadratureConfig};

const MAX_CUTOFF: f64 = 1e12;
const SCAN_POINTS: usize = 256;

/// Unnormalised even log-weight `x ↦ −Σ_k c_k V_k(x)` on the real line.
///
/// A Gibbs measure `μ_{V,α}` is the single-term tilt `c = −α`; maximum-entropy
/// laws are two-term tilts whose coefficients are the Lagrange multipliers.
/// Coefficients may be negative as long as the weight stays integrable.
#[derive(Clone, Debug, PartialEq)]
pub struct Tilt {
    terms: Vec<(f64, OrliczFunction)>,
}

/// Where the weight lives: its (approximate) peak log-value and location, and
/// the cutoff beyond which it is negligible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Support {
    pub peak: f64,
    pub peak_at: f64,
    pub cutoff: f64,
}

impl Tilt {
    pub fn new(terms: Vec<(f64, OrliczFunction)>) -> Self {
        Tilt { terms }
    }

    /// The weight `e^{α V}` of the Gibbs measure `μ_{V,α}`.
    pub fn gibbs(v: &OrliczFunction, alpha: f64) -> Self {
        Tilt {
            terms: vec![(-alpha, v.clone())],
        }
    }

    pub fn terms(&self) -> &[(f64, OrliczFunction)] {
        &self.terms
    }

    #[inline]
    pub fn log_weight(&self, x: f64) -> f64 {
        -self.terms.iter().map(|(c, v)| c * v.value(x)).sum::<f64>()
    }

    pub(crate) fn kinks(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.terms.iter().flat_map(|(_, v)| v.kinks()).collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    /// Finds a cutoff `T` with `score(T) − peak` below the tail threshold,
    /// where `score` adds `2·log(1 + Σ W)` for the moment weights `growth`.
    pub(crate) fn locate(&self, cfg: &QuadratureConfig, growth: &[&OrliczFunction]) -> Result<Support> {
        let score = |x: f64| {
            let w: f64 = growth.iter().map(|g| g.value(x)).sum();
            self.log_weight(x) + 2.0 * w.ln_1p()
        };
        let scan = |t: f64| {
            let mut best = (self.log_weight(0.0), 0.0);
            for i in 1..=SCAN_POINTS {
                let x = t * i as f64 / SCAN_POINTS as f64;
                let g = self.log_weight(x);
                if g > best.0 {
                    best = (g, x);
                }
            }
            best
        };

        let mut t = 1.0_f64;
        let (mut peak, mut peak_at);
        loop {
            (peak, peak_at) = scan(t);
            let s = score(t);
            if s - peak < cfg.tail_log_threshold && s < score(0.5 * t) {
                break;
            }
            t *= 2.0;
            if t > MAX_CUTOFF {
                return Err(Error::Integrability(format!(
                    "weight {:?} does not decay before |x| = {MAX_CUTOFF:e}",
                    self.terms
                )));
            }
        }
        // Shrink for sharply concentrated weights.
        while 0.5 * t > peak_at && t > 1e-200 && score(0.5 * t) - peak < cfg.tail_log_threshold {
            t *= 0.5;
            (peak, peak_at) = scan(t);
        }
        if !peak.is_finite() {
            return Err(Error::Integrability("log-weight is not finite".into()));
        }
        Ok(Support {
            peak,
            peak_at,
            cutoff: t,
        })
    }

    pub(crate) fn breakpoints(&self, support: &Support) -> Vec<f64> {
        let mut pts = vec![0.0];
        for k in self.kinks() {
            if k > 0.0 && k < support.cutoff {
                pts.push(k);
            }
        }
        if support.peak_at > 0.0 && support.peak_at < support.cutoff {
            pts.push(support.peak_at);
        }
        pts.push(support.cutoff);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Returns the support and `∫_ℝ f(x) e^{log_weight(x) − peak} dx` for an
    /// even integrand `f`.
    pub(crate) fn integrate<const N: usize, F>(
        &self,
        cfg: &QuadratureConfig,
        growth: &[&OrliczFunction],
        f: F,
    ) -> Result<(Support, [f64; N])>
    where
        F: Fn(f64) -> [f64; N],
    {
        let support = self.locate(cfg, growth)?;
        let peak = support.peak;
        // Integrands are bounded by ~1 after the peak shift, so the absolute
        // tolerance scales with the width of the support.
        let cfg = &QuadratureConfig {
            abs_tol: cfg.abs_tol * support.cutoff.min(1.0),
            ..*cfg
        };
        let g = |x: f64| {
            let w = (self.log_weight(x) - peak).exp();
            let mut v = f(x);
            for c in v.iter_mut() {
                *c *= w;
            }
            v
        };
        let main = integrate(g, &self.breakpoints(&support), cfg)?;
        let t = support.cutoff;
        let tail = integrate(g, &[t, 2.0 * t], cfg)?;
        for k in 0..N {
            if tail[k].abs() > cfg.abs_tol.max(cfg.rel_tol * main[k].abs()) {
                return Err(Error::Quadrature(format!(
                    "tail [{t}, {}] carries {:e} of mass",
                    2.0 * t,
                    tail[k]
                )));
            }
        }
        Ok((support, std::array::from_fn(|k| 2.0 * (main[k] + tail[k]))))
    }

    /// `log ∫_ℝ e^{log_weight(x)} dx`.
    pub fn log_partition(&self, cfg: &QuadratureConfig) -> Result<f64> {
        let (s, v) = self.integrate(cfg, &[], |_| [1.0])?;
        Ok(s.peak + v[0].ln())
    }
}
