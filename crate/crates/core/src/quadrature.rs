//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector-valued
//! integrands on finite intervals.
//!
//! All integrands in this crate are several moments of the same weight, so
//! one pass evaluates them together and the error test is applied per
//! component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits for the quadrature routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Log-weight drop (relative to the peak) below which the tail is cut.
    pub tail_log_threshold: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            tail_log_threshold: -60.0,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        if !(self.tail_log_threshold < -20.0) {
            return Err(Error::Config("tail_log_threshold must be below -20".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Config("max_subdivisions must be positive".into()));
        }
        Ok(())
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the 7-point rule (nodes XGK[1], XGK[3], XGK[5], XGK[7]).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn gk15<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64) -> Panel<N> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    for k in 0..N {
        kron[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for k in 0..N {
        value[k] = kron[k] * h;
        error[k] = ((kron[k] - gauss[k]) * h).abs();
    }
    Panel { a, b, value, error }
}

/// Integrates `f` over `[points[0], points[last]]`, using the interior points
/// as forced breakpoints (kinks of the integrand).
pub fn integrate<const N: usize, F>(f: F, points: &[f64], cfg: &QuadratureConfig) -> Result<[f64; N]>
where
    F: Fn(f64) -> [f64; N],
{
    if points.len() < 2 {
        return Err(Error::Quadrature("need at least two interval endpoints".into()));
    }
    let mut panels: Vec<Panel<N>> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();
    if panels.is_empty() {
        return Ok([0.0; N]);
    }

    loop {
        let mut total = [0.0; N];
        let mut err = [0.0; N];
        for p in &panels {
            for k in 0..N {
                total[k] += p.value[k];
                err[k] += p.error[k];
            }
        }
        let tol: [f64; N] = std::array::from_fn(|k| cfg.abs_tol.max(cfg.rel_tol * total[k].abs()));
        if (0..N).all(|k| err[k] <= tol[k]) {
            return Ok(total);
        }
        if panels.len() >= cfg.max_subdivisions {
            return Err(Error::Quadrature(format!(
                "subdivision budget {} exhausted (error {:?}, tolerance {:?})",
                cfg.max_subdivisions, err, tol
            )));
        }
        // Split the panel contributing the largest scaled error.
        let (worst, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s = (0..N).map(|k| p.error[k] / tol[k]).fold(0.0, f64::max);
                (i, s)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::Quadrature("interval collapsed below machine precision".into()));
        }
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    integrate(|x| [f(x)], &[a, b], cfg).map(|v| v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let cfg = QuadratureConfig::default();
        let v = integrate(|x| [1.0, x, x * x, x.powi(7)], &[0.0, 2.0], &cfg).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14);
        assert!((v[1] - 2.0).abs() < 1e-14);
        assert!((v[2] - 8.0 / 3.0).abs() < 1e-14);
        assert!((v[3] - 32.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_half_line() {
        let cfg = QuadratureConfig::default();
        let v = integrate_scalar(|x| (-x * x).exp(), 0.0, 12.0, &cfg).unwrap();
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_in_derivative() {
        // sqrt has an unbounded derivative at 0; adaptivity must cope.
        let cfg = QuadratureConfig::default();
        let v = integrate_scalar(|x| x.sqrt(), 0.0, 1.0, &cfg).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn kink_breakpoints() {
        let cfg = QuadratureConfig::default();
        let v = integrate(|x: f64| [(x - 1.0).abs()], &[0.0, 1.0, 3.0], &cfg).unwrap();
        assert!((v[0] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = QuadratureConfig {
            max_subdivisions: 3,
            abs_tol: 1e-15,
            rel_tol: 1e-15,
            ..Default::default()
        };
        let r = integrate_scalar(|x: f64| (1.0 / x.max(1e-300)).sin(), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::default().validate().is_ok());
        let bad = QuadratureConfig {
            tail_log_threshold: -10.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
