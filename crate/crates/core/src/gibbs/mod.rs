//! Quadrature-backed calculus of one-dimensional Gibbs measures
//! `μ_{V,α}(dx) ∝ e^{αV(x)} dx` with `α < 0`.
//!
//! The log-partition `φ_V(α) = log ∫ e^{αV}` is convex in `α`; its first
//! derivative is the mean potential `m_V(μ_{V,α})` and its second derivative
//! the variance of `V` under `μ_{V,α}`. The critical temperature `α(R)` is the
//! unique root of `m_V(μ_{V,α}) = R`.

mod grid;
mod law;
mod tilt;
mod volume;

pub use grid::GridDensity;
pub use law::{GibbsMeasure1D, TiltedLaw};
pub use tilt::Tilt;
pub use volume::{exact_lp_log_volume, log_volume_limit};

use crate::error::{Error, Result};
use crate::orlicz::OrliczFunction;
use crate::quadrature::QuadratureConfig;

const ALPHA_FAR: f64 = 1e12;
const ALPHA_NEAR: f64 = 1e-12;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha < 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::AlphaDomain(alpha))
    }
}

/// `φ_V(α) = log ∫_ℝ e^{αV(t)} dt`.
pub fn log_partition(v: &OrliczFunction, alpha: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_alpha(alpha)?;
    Tilt::gibbs(v, alpha).log_partition(cfg)
}

/// `m_W(μ_{V,α}) = ∫ W dμ_{V,α}`.
pub fn moment(w: &OrliczFunction, v: &OrliczFunction, alpha: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_alpha(alpha)?;
    let (_, i) = Tilt::gibbs(v, alpha).integrate(cfg, &[w], |x| [1.0, w.value(x)])?;
    Ok(i[1] / i[0])
}

/// `Var_{μ_{V,α}}(V) = d²φ_V/dα²`.
pub fn variance_of_potential(v: &OrliczFunction, alpha: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_alpha(alpha)?;
    let (_, i) = Tilt::gibbs(v, alpha).integrate(cfg, &[v], |x| {
        let y = v.value(x);
        [1.0, y, y * y]
    })?;
    let m = i[1] / i[0];
    Ok((i[2] / i[0] - m * m).max(0.0))
}

/// `m_W(μ_{V,α})` together with its `α`-derivative `Cov(W, V)`.
pub fn moment_with_slope(
    w: &OrliczFunction,
    v: &OrliczFunction,
    alpha: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let (_, i) = Tilt::gibbs(v, alpha).integrate(cfg, &[w, v], |x| {
        let a = w.value(x);
        let b = v.value(x);
        [1.0, a, b, a * b]
    })?;
    let mw = i[1] / i[0];
    let mv = i[2] / i[0];
    Ok((mw, i[3] / i[0] - mw * mv))
}

/// Solves `m_W(μ_{V,α}) = target` for `α < 0`.
///
/// The map `α ↦ m_W(μ_{V,α})` is increasing, tends to 0 as `α → −∞` and
/// diverges as `α → 0⁻`; the root is bracketed by doubling from `α = −1`,
/// narrowed by geometric bisection and polished with Newton steps.
pub fn solve_moment_equation(
    w: &OrliczFunction,
    v: &OrliczFunction,
    target: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Domain(format!("moment target must be positive, got {target}")));
    }
    let f = |a: f64| moment(w, v, a, cfg).map(|m| m - target);

    // Bracket [lo, hi] with f(lo) < 0 < f(hi), lo < hi < 0.
    let (mut lo, mut hi);
    let f1 = f(-1.0)?;
    if f1 == 0.0 {
        return Ok(-1.0);
    }
    if f1 < 0.0 {
        lo = -1.0;
        hi = -0.5;
        while f(hi)? < 0.0 {
            lo = hi;
            hi *= 0.5;
            if -hi < ALPHA_NEAR {
                return Err(Error::Bracket(format!(
                    "no sign change for alpha in [-1, -{ALPHA_NEAR:e}] (target {target})"
                )));
            }
        }
    } else {
        hi = -1.0;
        lo = -2.0;
        while f(lo)? > 0.0 {
            hi = lo;
            lo *= 2.0;
            if -lo > ALPHA_FAR {
                return Err(Error::Bracket(format!(
                    "no sign change for alpha in [-{ALPHA_FAR:e}, -1] (target {target})"
                )));
            }
        }
    }

    while lo / hi > 1.0 + 1e-3 {
        let mid = -((lo * hi).sqrt());
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let tol = 1e-12 * target.max(1.0);
    let mut alpha = -((lo * hi).sqrt());
    for _ in 0..60 {
        let (m, slope) = moment_with_slope(w, v, alpha, cfg)?;
        let r = m - target;
        if r.abs() <= tol {
            break;
        }
        if r < 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
        let step = alpha - r / slope;
        let next = if slope > 0.0 && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if next == alpha {
            break;
        }
        alpha = next;
    }
    Ok(alpha)
}

/// The critical temperature `α(R)`: the unique `α < 0` with
/// `m_V(μ_{V,α}) = R`.
pub fn solve_alpha(v: &OrliczFunction, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    solve_moment_equation(v, v, r, cfg)
}

/// Numerical check that `∫ V₁ e^{α V₂} < ∞` at `α = −10⁻³`.
pub fn check_cross_integrability(v1: &OrliczFunction, v2: &OrliczFunction, cfg: &QuadratureConfig) -> Result<()> {
    moment(v1, v2, -1e-3, cfg).map(|_| ())
}

/// Value of the Sanov rate function `𝕀_V(μ)` of the coordinate empirical
/// measure of the uniform law on the Orlicz ball of radius `R`.
///
/// For densities, `𝕀_V(μ) = −h(μ) + φ_V(α(R)) − α(R)·R` when
/// `m_V(μ) ≤ R`, and `+∞` otherwise (returned as `f64::INFINITY`). The moment
/// constraint is tested with a relative slack of `1e−9` to absorb rounding in
/// the trapezoid sums.
pub fn rate_function(v: &OrliczFunction, r: f64, mu: &GridDensity, cfg: &QuadratureConfig) -> Result<f64> {
    let alpha = solve_alpha(v, r, cfg)?;
    let phi = log_partition(v, alpha, cfg)?;
    let m = mu.moment(v);
    if m > r + 1e-9 * r.max(1.0) {
        return Ok(f64::INFINITY);
    }
    Ok(-mu.entropy() + phi - alpha * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn builtins() -> Vec<OrliczFunction> {
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

    #[test]
    fn log_partition_closed_forms() {
        let g = log_partition(&OrliczFunction::Power(2.0), -1.0, &cfg()).unwrap();
        assert!((g - 0.5 * PI.ln()).abs() < 1e-12, "{g}");
        let l = log_partition(&OrliczFunction::Power(1.0), -2.0, &cfg()).unwrap();
        assert!(l.abs() < 1e-12, "{l}");
    }

    /// Composite Simpson with 10⁶ panels on [0, 40], independent of the
    /// adaptive routine.
    fn simpson_oracle(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut s = f(a) + f(b);
        for i in 1..panels {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn huber_log_partition_matches_fine_simpson() {
        let huber = |x: f64| if x <= 1.0 { x * x } else { 2.0 * x - 1.0 };
        // Kink at 1 sits on a node since 10⁶ panels over [0, 40] have width 4e-5.
        let oracle = (2.0 * simpson_oracle(|x| (-huber(x)).exp(), 0.0, 40.0, 1_000_000)).ln();
        let got = log_partition(&OrliczFunction::Huber(1.0), -1.0, &cfg()).unwrap();
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
        // closed form: sqrt(pi) erf(1) + e^{-1}
        assert!((got - 0.621_397_498_343_582_4).abs() < 1e-10);
    }

    #[test]
    fn alpha_domain_errors() {
        let v = OrliczFunction::Power(2.0);
        assert!(matches!(log_partition(&v, 0.0, &cfg()), Err(Error::AlphaDomain(_))));
        assert!(matches!(log_partition(&v, 0.3, &cfg()), Err(Error::AlphaDomain(_))));
        assert!(matches!(moment(&v, &v, f64::NAN, &cfg()), Err(Error::AlphaDomain(_))));
    }

    #[test]
    fn moment_closed_forms() {
        let p1 = OrliczFunction::Power(1.0);
        let p2 = OrliczFunction::Power(2.0);
        assert!((moment(&p2, &p2, -1.0, &cfg()).unwrap() - 0.5).abs() < 1e-12);
        assert!((moment(&p2, &p1, -1.0, &cfg()).unwrap() - 2.0).abs() < 1e-12);
        assert!((moment(&p1, &p2, -1.0, &cfg()).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn variance_closed_forms() {
        let p1 = OrliczFunction::Power(1.0);
        let p2 = OrliczFunction::Power(2.0);
        assert!((variance_of_potential(&p1, -1.0, &cfg()).unwrap() - 1.0).abs() < 1e-10);
        assert!((variance_of_potential(&p2, -1.0, &cfg()).unwrap() - 0.5).abs() < 1e-10);
        assert!((variance_of_potential(&p2, -0.5, &cfg()).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn solve_alpha_examples() {
        let cases = [(2.0, 0.5), (1.0, 1.0), (4.0, 0.25)];
        for (p, r) in cases {
            let a = solve_alpha(&OrliczFunction::Power(p), r, &cfg()).unwrap();
            assert!((a + 1.0).abs() < 1e-9, "p={p} r={r} a={a}");
        }
    }

    #[test]
    fn solve_alpha_rejects_bad_radius() {
        assert!(solve_alpha(&OrliczFunction::Power(2.0), 0.0, &cfg()).is_err());
        assert!(solve_alpha(&OrliczFunction::Power(2.0), -1.0, &cfg()).is_err());
    }

    #[test]
    fn solve_alpha_residual_and_order() {
        for v in builtins() {
            let mut prev = f64::NEG_INFINITY;
            for r in [0.1, 0.5, 1.0, 2.0, 10.0] {
                let a = solve_alpha(&v, r, &cfg()).unwrap();
                let m = moment(&v, &v, a, &cfg()).unwrap();
                assert!((m - r).abs() <= 1e-10 * r.max(1.0), "{v} r={r} m={m}");
                assert!(a > prev);
                prev = a;
            }
        }
    }

    #[test]
    fn finite_difference_derivative() {
        let h = 1e-4;
        for v in builtins() {
            for a in [-4.0, -2.0, -1.0, -0.5, -0.1] {
                let fd = (log_partition(&v, a + h, &cfg()).unwrap() - log_partition(&v, a - h, &cfg()).unwrap())
                    / (2.0 * h);
                let m = moment(&v, &v, a, &cfg()).unwrap();
                assert!((fd - m).abs() <= 1e-5, "{v} a={a}: fd={fd} m={m}");
            }
        }
    }

    #[test]
    fn moment_map_is_increasing() {
        let w = OrliczFunction::Power(2.0);
        for v in builtins() {
            let ms: Vec<f64> = (1..=40)
                .map(|i| -4.0 + 0.0975 * i as f64)
                .map(|a| (moment(&v, &v, a, &cfg()).unwrap(), moment(&w, &v, a, &cfg()).unwrap()))
                .flat_map(|(a, b)| [a, b])
                .collect();
            for k in 0..2 {
                let seq: Vec<f64> = ms.iter().skip(k).step_by(2).copied().collect();
                assert!(seq.windows(2).all(|w| w[0] < w[1]), "{v}");
            }
        }
    }

    #[test]
    fn rate_function_examples() {
        let v = OrliczFunction::Power(2.0);
        let nodes: Vec<f64> = (0..4001).map(|i| -8.0 + 16.0 * i as f64 / 4000.0).collect();
        let normal = |s2: f64| GridDensity::from_fn(&nodes, |x| (-x * x / (2.0 * s2)).exp()).unwrap();

        let zero = rate_function(&v, 0.5, &normal(0.5), &cfg()).unwrap();
        assert!(zero.abs() < 1e-4, "{zero}");

        assert_eq!(rate_function(&v, 0.5, &normal(1.0), &cfg()).unwrap(), f64::INFINITY);

        // −h(N(0,¼)) + ½ log π + ½, with h = ½ log(2πe/4)
        let expected = -0.5 * (2.0 * PI * std::f64::consts::E * 0.25).ln() + 0.5 * PI.ln() + 0.5;
        let got = rate_function(&v, 0.5, &normal(0.25), &cfg()).unwrap();
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
        // Direct route: KL(N(0,¼) | N(0,½)) + α(m_V − R) with α = −1.
        let kl = 0.5 * (0.5 - 1.0 - 0.5_f64.ln());
        assert!((got - (kl + 0.25)).abs() < 1e-6);
    }

    #[test]
    fn cross_integrability_holds_for_builtins() {
        for v1 in builtins() {
            for v2 in builtins() {
                check_cross_integrability(&v1, &v2, &cfg()).unwrap();
            }
        }
    }
}
