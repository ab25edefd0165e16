use crate::error::{Error, Result};
use crate::orlicz::OrliczFunction;
use crate::quadrature::{integrate, QuadratureConfig};

use super::tilt::Tilt;

/// Half-line panels of the cumulative table (2·TABLE_PANELS nodes on [−T, T]).
const TABLE_PANELS: usize = 1024;

/// Normalised law with density `exp(log_weight(x) − log_partition)`, plus a
/// cached cumulative table for the CDF and quantile function.
#[derive(Clone, Debug)]
pub struct TiltedLaw {
    tilt: Tilt,
    log_partition: f64,
    cutoff: f64,
    /// `cum[i] = ∫_0^{x_i} density`, rescaled so that `cum[last] = ½` exactly.
    cum: Vec<f64>,
    scale: f64,
    kinks: Vec<f64>,
    cfg: QuadratureConfig,
}

impl TiltedLaw {
    pub fn new(tilt: Tilt, cfg: &QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        let (support, z) = tilt.integrate(cfg, &[], |_| [1.0])?;
        let log_partition = support.peak + z[0].ln();
        let cutoff = support.cutoff;
        let kinks = tilt.kinks();
        let panel_cfg = QuadratureConfig {
            abs_tol: 1e-15,
            rel_tol: 1e-13,
            ..*cfg
        };
        let h = cutoff / TABLE_PANELS as f64;
        let mut cum = Vec::with_capacity(TABLE_PANELS + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..TABLE_PANELS {
            let a = i as f64 * h;
            let b = if i + 1 == TABLE_PANELS { cutoff } else { (i + 1) as f64 * h };
            acc += panel_integral(&tilt, log_partition, &kinks, a, b, &panel_cfg)?;
            cum.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::Quadrature("cumulative table is degenerate".into()));
        }
        let scale = 0.5 / acc;
        for c in cum.iter_mut() {
            *c *= scale;
        }
        Ok(TiltedLaw {
            tilt,
            log_partition,
            cutoff,
            cum,
            scale,
            kinks,
            cfg: panel_cfg,
        })
    }

    pub fn tilt(&self) -> &Tilt {
        &self.tilt
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// Half-width beyond which the mass is negligible.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        (self.tilt.log_weight(x) - self.log_partition).exp()
    }

    fn step(&self) -> f64 {
        self.cutoff / TABLE_PANELS as f64
    }

    /// `∫_0^t density` for `t ≥ 0`.
    fn half_mass(&self, t: f64) -> f64 {
        if t >= self.cutoff {
            return 0.5;
        }
        let h = self.step();
        let i = ((t / h) as usize).min(TABLE_PANELS - 1);
        let a = i as f64 * h;
        if t <= a {
            return self.cum[i];
        }
        let part = panel_integral(&self.tilt, self.log_partition, &self.kinks, a, t, &self.cfg).unwrap_or(0.0);
        (self.cum[i] + part * self.scale).min(self.cum[i + 1])
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.5;
        }
        let m = self.half_mass(x.abs());
        if x > 0.0 {
            0.5 + m
        } else {
            0.5 - m
        }
    }

    /// Inverse CDF on the open unit interval.
    pub fn quantile(&self, u: f64) -> f64 {
        if !(u > 0.0 && u < 1.0) {
            return if u <= 0.0 { -self.cutoff } else { self.cutoff };
        }
        let target = (u - 0.5).abs();
        if target == 0.0 {
            return 0.0;
        }
        let sign = if u > 0.5 { 1.0 } else { -1.0 };
        if target >= 0.5 {
            return sign * self.cutoff;
        }
        // panel with cum[i] <= target < cum[i+1]
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&target)) {
            Ok(i) => return sign * (i as f64 * self.step()).min(self.cutoff),
            Err(j) => j - 1,
        };
        let h = self.step();
        let mut lo = i as f64 * h;
        let mut hi = ((i + 1) as f64 * h).min(self.cutoff);
        let (c0, c1) = (self.cum[i], self.cum[i + 1]);
        let mut x = lo + (hi - lo) * (target - c0) / (c1 - c0);
        for _ in 0..60 {
            let r = self.half_mass(x) - target;
            if r.abs() <= 1e-14 {
                break;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.density(x);
            let newton = x - r / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == x || hi - lo <= 1e-15 * hi {
                break;
            }
            x = next;
        }
        sign * x
    }

    /// `∫ f dμ` by adaptive quadrature on the support.
    pub fn expect(&self, f: impl Fn(f64) -> f64, cfg: &QuadratureConfig) -> Result<f64> {
        let mut pts = vec![-self.cutoff, 0.0, self.cutoff];
        for k in &self.kinks {
            if *k < self.cutoff {
                pts.push(*k);
                pts.push(-*k);
            }
        }
        pts.sort_by(f64::total_cmp);
        integrate(|x| [f(x) * self.density(x)], &pts, cfg).map(|v| v[0])
    }
}

fn panel_integral(
    tilt: &Tilt,
    log_partition: f64,
    kinks: &[f64],
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let mut pts = vec![a];
    pts.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
    pts.push(b);
    integrate(|x| [(tilt.log_weight(x) - log_partition).exp()], &pts, cfg).map(|v| v[0])
}

/// The Gibbs measure `μ_{V,α}(dx) = e^{αV(x) − φ_V(α)} dx`.
#[derive(Clone, Debug)]
pub struct GibbsMeasure1D {
    potential: OrliczFunction,
    alpha: f64,
    law: TiltedLaw,
}

impl GibbsMeasure1D {
    pub fn new(potential: &OrliczFunction, alpha: f64, cfg: &QuadratureConfig) -> Result<Self> {
        if !(alpha < 0.0 && alpha.is_finite()) {
            return Err(Error::AlphaDomain(alpha));
        }
        let law = TiltedLaw::new(Tilt::gibbs(potential, alpha), cfg)?;
        Ok(GibbsMeasure1D {
            potential: potential.clone(),
            alpha,
            law,
        })
    }

    /// The Gibbs measure matching the per-coordinate budget `R`, i.e. at `α(R)`.
    pub fn at_radius(potential: &OrliczFunction, r: f64, cfg: &QuadratureConfig) -> Result<Self> {
        let alpha = super::solve_alpha(potential, r, cfg)?;
        Self::new(potential, alpha, cfg)
    }

    pub fn potential(&self) -> &OrliczFunction {
        &self.potential
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn log_partition(&self) -> f64 {
        self.law.log_partition()
    }

    pub fn law(&self) -> &TiltedLaw {
        &self.law
    }

    pub fn density(&self, x: f64) -> f64 {
        self.law.density(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.law.cdf(x)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.law.quantile(u)
    }
}
