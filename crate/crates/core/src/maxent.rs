//! Maximum-entropy laws on ℝ under (at most) two moment constraints, the
//! regime thresholds of the conditional limit, and the thin-shell rate.
//!
//! The maximiser of `h(ν)` subject to `∫V₁dν (≤|=) c₁`, `∫V₂dν (≤|=) c₂`
//! has density `∝ exp(−μ₁V₁ − μ₂V₂)`. The multipliers minimise the convex
//! dual
//!
//! ```text
//! D(μ₁, μ₂) = log ∫ exp(−μ₁V₁(x) − μ₂V₂(x)) dx + μ₁c₁ + μ₂c₂
//! ```
//!
//! over `μᵢ ≥ 0` for inequality constraints (`μᵢ ∈ ℝ` for equalities), and
//! `min D = max h`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{self, Tilt, TiltedLaw};
use crate::orlicz::OrliczFunction;
use crate::quadrature::QuadratureConfig;

/// Multipliers below this are treated as zero when labelling regimes.
pub const ACTIVE_TOL: f64 = 1e-7;
const KKT_TARGET: f64 = 1e-11;
const MAX_ITER: usize = 200;
const BLOWUP: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "=")]
    Equal,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::AtMost => "<=",
            ConstraintKind::Equal => "=",
        })
    }
}

/// `∫ V dν (≤ | =) level`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub potential: OrliczFunction,
    pub level: f64,
    pub kind: ConstraintKind,
}

impl MomentConstraint {
    pub fn at_most(potential: OrliczFunction, level: f64) -> Self {
        MomentConstraint {
            potential,
            level,
            kind: ConstraintKind::AtMost,
        }
    }

    pub fn equal(potential: OrliczFunction, level: f64) -> Self {
        MomentConstraint {
            potential,
            level,
            kind: ConstraintKind::Equal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Only the `V₂` constraint binds: the limit is `μ_{V₂,α(R)}`.
    Subcritical,
    /// Both constraints bind.
    Intermediate,
    /// Only the `V₁` constraint binds: the limit is `μ_{V₁,α(1)}`.
    Supercritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Subcritical => "subcritical",
            Regime::Intermediate => "intermediate",
            Regime::Supercritical => "supercritical",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxEntSolution {
    pub mu1_star: f64,
    pub mu2_star: f64,
    /// `log ∫ exp(−μ₁V₁ − μ₂V₂)`; the normalising constant `κ₀` of the
    /// density `exp(−κ₀ − 1 − μ₁V₁ − μ₂V₂)` is `log_partition − 1`.
    pub log_partition: f64,
    #[serde(rename = "m1")]
    pub achieved_m1: f64,
    #[serde(rename = "m2")]
    pub achieved_m2: f64,
    pub regime: Regime,
    pub kkt_residual: f64,
}

impl MaxEntSolution {
    /// Differential entropy of the maximiser, `log Z + μ₁m₁ + μ₂m₂`.
    pub fn entropy(&self) -> f64 {
        self.log_partition + self.mu1_star * self.achieved_m1 + self.mu2_star * self.achieved_m2
    }

    pub fn tilt(&self, v1: &OrliczFunction, v2: &OrliczFunction) -> Tilt {
        Tilt::new(vec![(self.mu1_star, v1.clone()), (self.mu2_star, v2.clone())])
    }

    /// The maximiser as a law with CDF/quantile.
    pub fn law(&self, v1: &OrliczFunction, v2: &OrliczFunction, cfg: &QuadratureConfig) -> Result<TiltedLaw> {
        TiltedLaw::new(self.tilt(v1, v2), cfg)
    }

    /// Worst `|(mᵢ − cᵢ)·μᵢ|` over the two constraints.
    pub fn slackness(&self, c1: f64, c2: f64) -> f64 {
        ((self.achieved_m1 - c1) * self.mu1_star)
            .abs()
            .max(((self.achieved_m2 - c2) * self.mu2_star).abs())
    }
}

fn label(mu1: f64, mu2: f64) -> Regime {
    if mu1 <= ACTIVE_TOL && mu2 > ACTIVE_TOL {
        Regime::Subcritical
    } else if mu2 <= ACTIVE_TOL && mu1 > ACTIVE_TOL {
        Regime::Supercritical
    } else {
        Regime::Intermediate
    }
}

struct DualPoint {
    value: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
    log_z: f64,
    m: [f64; 2],
}

struct Dual<'a> {
    c1: &'a MomentConstraint,
    c2: &'a MomentConstraint,
    cfg: &'a QuadratureConfig,
}

impl Dual<'_> {
    fn bounded(&self, i: usize) -> bool {
        [self.c1, self.c2][i].kind == ConstraintKind::AtMost
    }

    fn project(&self, mu: [f64; 2]) -> [f64; 2] {
        std::array::from_fn(|i| if self.bounded(i) { mu[i].max(0.0) } else { mu[i] })
    }

    /// `None` when the weight is not integrable at `mu` (dual is `+∞`).
    fn eval(&self, mu: [f64; 2]) -> Result<Option<DualPoint>> {
        let (v1, v2) = (&self.c1.potential, &self.c2.potential);
        let tilt = Tilt::new(vec![(mu[0], v1.clone()), (mu[1], v2.clone())]);
        let r = tilt.integrate(self.cfg, &[v1, v2], |x| {
            let a = v1.value(x);
            let b = v2.value(x);
            [1.0, a, b, a * a, a * b, b * b]
        });
        let (support, i) = match r {
            Ok(v) => v,
            Err(Error::Integrability(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let log_z = support.peak + i[0].ln();
        let m = [i[1] / i[0], i[2] / i[0]];
        let c11 = i[3] / i[0] - m[0] * m[0];
        let c12 = i[4] / i[0] - m[0] * m[1];
        let c22 = i[5] / i[0] - m[1] * m[1];
        let value = log_z + mu[0] * self.c1.level + mu[1] * self.c2.level;
        Ok(Some(DualPoint {
            value,
            grad: [self.c1.level - m[0], self.c2.level - m[1]],
            hess: [[c11, c12], [c12, c22]],
            log_z,
            m,
        }))
    }

    fn projected_gradient(&self, mu: [f64; 2], g: [f64; 2]) -> [f64; 2] {
        std::array::from_fn(|i| {
            if self.bounded(i) {
                mu[i] - (mu[i] - g[i]).max(0.0)
            } else {
                g[i]
            }
        })
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Maximum-entropy law under two moment constraints, by projected Newton on
/// the dual started at `(1, 1)`.
pub fn maxent_two_constraints(
    c1: &MomentConstraint,
    c2: &MomentConstraint,
    cfg: &QuadratureConfig,
) -> Result<MaxEntSolution> {
    for c in [c1, c2] {
        if !(c.level > 0.0 && c.level.is_finite()) {
            return Err(Error::Domain(format!("constraint level must be positive, got {}", c.level)));
        }
    }
    let dual = Dual { c1, c2, cfg };
    let mut mu = dual.project([1.0, 1.0]);
    let mut pt = dual
        .eval(mu)?
        .ok_or_else(|| Error::Infeasible("dual not finite at the initial multipliers".into()))?;

    for _ in 0..MAX_ITER {
        let pg = dual.projected_gradient(mu, pt.grad);
        if norm(pg) <= KKT_TARGET {
            break;
        }
        if mu.iter().any(|m| m.abs() > BLOWUP) || pt.value < -BLOWUP {
            return Err(Error::Infeasible(format!(
                "dual unbounded below (multipliers {mu:?}, dual {})",
                pt.value
            )));
        }

        // Bounded variables sitting on the bound with outward gradient stay fixed.
        let active: [bool; 2] =
            std::array::from_fn(|i| dual.bounded(i) && mu[i] <= 1e-14 && pt.grad[i] > 0.0);
        let newton = newton_direction(&pt, active);
        let gradient_dir: [f64; 2] = std::array::from_fn(|i| if active[i] { 0.0 } else { -pt.grad[i] });

        let mut accepted = None;
        for dir in [newton, Some(gradient_dir)].into_iter().flatten() {
            if let Some(next) = line_search(&dual, mu, &pt, dir)? {
                accepted = Some(next);
                break;
            }
        }
        match accepted {
            Some((m, p)) => {
                mu = m;
                pt = p;
            }
            None => break,
        }
    }

    let kkt = norm(dual.projected_gradient(mu, pt.grad));
    if mu.iter().all(|m| m.abs() < 1e-10) {
        return Err(Error::Divergence(
            "both multipliers vanish: exp(0) is not integrable on the line".into(),
        ));
    }
    if kkt > 1e-6 {
        return Err(Error::Infeasible(format!(
            "dual descent stalled with projected gradient {kkt:e} at {mu:?}"
        )));
    }
    Ok(MaxEntSolution {
        mu1_star: mu[0],
        mu2_star: mu[1],
        log_partition: pt.log_z,
        achieved_m1: pt.m[0],
        achieved_m2: pt.m[1],
        regime: label(mu[0], mu[1]),
        kkt_residual: kkt,
    })
}

fn newton_direction(pt: &DualPoint, active: [bool; 2]) -> Option<[f64; 2]> {
    let h = pt.hess;
    let g = pt.grad;
    match active {
        [false, false] => {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if !(det > 1e-300) || !(h[0][0] > 0.0) {
                return None;
            }
            Some([
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
            ])
        }
        [true, false] => (h[1][1] > 0.0).then(|| [0.0, -g[1] / h[1][1]]),
        [false, true] => (h[0][0] > 0.0).then(|| [-g[0] / h[0][0], 0.0]),
        [true, true] => None,
    }
}

/// Armijo backtracking along the projection arc. Near the optimum the dual
/// decrease drops below quadrature noise, so a step that does not raise `D`
/// beyond that noise and shrinks the projected gradient is also accepted.
fn line_search(
    dual: &Dual<'_>,
    mu: [f64; 2],
    pt: &DualPoint,
    dir: [f64; 2],
) -> Result<Option<([f64; 2], DualPoint)>> {
    let pg0 = norm(dual.projected_gradient(mu, pt.grad));
    let noise = 1e-13 * (1.0 + pt.value.abs());
    let mut t = 1.0;
    for _ in 0..60 {
        let cand = dual.project([mu[0] + t * dir[0], mu[1] + t * dir[1]]);
        if cand == mu {
            return Ok(None);
        }
        // Quadrature failures at extreme multipliers are treated like `+∞`.
        let eval = match dual.eval(cand) {
            Err(Error::Quadrature(_)) => None,
            other => other?,
        };
        if let Some(p) = eval {
            let decrease = pt.grad[0] * (cand[0] - mu[0]) + pt.grad[1] * (cand[1] - mu[1]);
            let armijo = p.value <= pt.value + 1e-4 * decrease;
            let pg = norm(dual.projected_gradient(cand, p.grad));
            if armijo || (p.value <= pt.value + noise && pg < pg0) {
                return Ok(Some((cand, p)));
            }
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Regime thresholds for the pair `(V₁, V₂)` with the `V₁` budget fixed at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `ᾱ`: solves `m_{V₁}(μ_{V₂,ᾱ}) = 1`.
    pub alpha_bar: f64,
    /// `R̄ = m_{V₂}(μ_{V₂,ᾱ})`: largest radius with `μ₁* = 0`.
    pub r_bar: f64,
    /// `R̃ = sup{m_{V₂}(ν) : m_{V₁}(ν) ≤ 1}`.
    pub r_tilde: f64,
    /// `m_{V₂}(μ_{V₁,α(1)})`: smallest radius with `μ₂* = 0`. Lies in `[R̄, R̃]`.
    pub r_typical: f64,
}

/// Numerical check that `V₁(x)/V₂(x) → ∞`: the ratio must grow tenfold
/// between `x₀ = V₂⁻¹(1)` and `10³·x₀`.
pub fn check_domination(v1: &OrliczFunction, v2: &OrliczFunction) -> Result<()> {
    let x0 = v2.inverse_nonneg(1.0);
    let far = 1e3 * x0;
    let r0 = v1.value(x0) / v2.value(x0);
    let r1 = v1.value(far) / v2.value(far);
    if r1 >= 10.0 * r0 {
        Ok(())
    } else {
        Err(Error::Hypothesis(format!(
            "{v1} does not dominate {v2}: ratio {r0} at {x0} vs {r1} at {far}"
        )))
    }
}

/// `(ᾱ, R̄)`.
pub fn threshold_rbar(v1: &OrliczFunction, v2: &OrliczFunction, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    check_domination(v1, v2)?;
    gibbs::check_cross_integrability(v1, v2, cfg)?;
    let alpha_bar = gibbs::solve_moment_equation(v1, v2, 1.0, cfg)?;
    let r_bar = gibbs::moment(v2, v2, alpha_bar, cfg)?;
    Ok((alpha_bar, r_bar))
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of a unimodal `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..500 {
        if (b - a) <= rel_tol * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `sup_{x ≥ 0} V₂(x) − b·V₁(x)` by a grid scan plus golden refinement.
fn inner_sup(v1: &OrliczFunction, v2: &OrliczFunction, b: f64) -> Result<f64> {
    let g = |x: f64| v2.value(x) - b * v1.value(x);
    let mut edge = v2.inverse_nonneg(1.0).max(1e-6);
    // Past the edge the objective must be negative and falling.
    while !(g(edge) < 0.0 && g(edge) < g(0.5 * edge)) {
        edge *= 2.0;
        if edge > 1e12 {
            return Err(Error::Hypothesis(format!(
                "V2/V1 does not vanish numerically for b = {b}: sup is infinite"
            )));
        }
    }
    const GRID: usize = 4000;
    let h = edge / GRID as f64;
    let (mut best_i, mut best) = (0, g(0.0));
    for i in 1..=GRID {
        let v = g(i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = (best_i.saturating_sub(1)) as f64 * h;
    let hi = ((best_i + 1) as f64 * h).min(edge);
    let (_, neg) = golden_min(|x| -g(x), lo, hi, 1e-14);
    Ok(best.max(-neg))
}

/// `R̃ = min_{b ≥ 0} [b + sup_x (V₂(x) − b·V₁(x))]`, the dual of the linear
/// program `sup{m_{V₂}(ν) : m_{V₁}(ν) ≤ 1}` over probability measures.
pub fn threshold_rtilde(v1: &OrliczFunction, v2: &OrliczFunction) -> Result<f64> {
    check_domination(v1, v2)?;
    let f = |b: f64| inner_sup(v1, v2, b).map(|s| b + s);
    // Expand around b = 1 until the middle point is lowest.
    let (mut lo, mut mid, mut hi) = (0.5, 1.0, 2.0);
    let (mut flo, mut fmid, mut fhi) = (f(lo)?, f(mid)?, f(hi)?);
    for _ in 0..200 {
        if fmid <= flo && fmid <= fhi {
            break;
        }
        if flo < fmid {
            (hi, fhi) = (mid, fmid);
            (mid, fmid) = (lo, flo);
            lo *= 0.5;
            flo = f(lo)?;
        } else {
            (lo, flo) = (mid, fmid);
            (mid, fmid) = (hi, fhi);
            hi *= 2.0;
            fhi = f(hi)?;
        }
    }
    let _ = (flo, fhi);
    // `f` is convex; errors in the inner sup are rare enough to map to +∞.
    let (_, best) = golden_min(|b| f(b).unwrap_or(f64::INFINITY), lo, hi, 1e-12);
    Ok(best.min(fmid))
}

pub fn thresholds(v1: &OrliczFunction, v2: &OrliczFunction, cfg: &QuadratureConfig) -> Result<Thresholds> {
    let (alpha_bar, r_bar) = threshold_rbar(v1, v2, cfg)?;
    let r_tilde = threshold_rtilde(v1, v2)?;
    let alpha_one = gibbs::solve_alpha(v1, 1.0, cfg)?;
    let r_typical = gibbs::moment(v2, v1, alpha_one, cfg)?;
    Ok(Thresholds {
        alpha_bar,
        r_bar,
        r_tilde,
        r_typical,
    })
}

/// Regime of the conditional limit for `V₁`-budget 1 and `V₂`-radius `R`:
/// subcritical iff `R ≤ R̄`, supercritical iff `R ≥ m_{V₂}(μ_{V₁,α(1)})`.
pub fn classify_regime(v1: &OrliczFunction, v2: &OrliczFunction, r: f64, cfg: &QuadratureConfig) -> Result<Regime> {
    Ok(regime_from_thresholds(&thresholds(v1, v2, cfg)?, r))
}

pub fn regime_from_thresholds(t: &Thresholds, r: f64) -> Regime {
    if r <= t.r_bar {
        Regime::Subcritical
    } else if r >= t.r_typical {
        Regime::Supercritical
    } else {
        Regime::Intermediate
    }
}

/// Maximum-entropy law of the conditional limit: `m_{V₁} ≤ 1`, `m_{V₂} ≤ R`.
pub fn conditional_limit_law(
    v1: &OrliczFunction,
    v2: &OrliczFunction,
    r: f64,
    cfg: &QuadratureConfig,
) -> Result<MaxEntSolution> {
    maxent_two_constraints(
        &MomentConstraint::at_most(v1.clone(), 1.0),
        &MomentConstraint::at_most(v2.clone(), r),
        cfg,
    )
}

/// Value of the thin-shell rate `J_p^V(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinShellValue {
    /// `+∞` off the effective domain.
    pub value: f64,
    /// Set when `+∞` comes from a failed (infeasible) dual solve rather
    /// than the `x < 0` branch.
    pub infeasible: bool,
}

/// `J_p^V(x) = [φ_V(α(R)) − α(R)R] − max{h(ν) : m_p(ν) = x^p, m_V(ν) ≤ R}`
/// for `x ≥ 0`, and `+∞` for `x < 0`.
pub fn thinshell_rate(v: &OrliczFunction, r: f64, p: f64, x: f64, cfg: &QuadratureConfig) -> Result<ThinShellValue> {
    let power = OrliczFunction::power(p)?;
    check_domination(v, &power)?;
    if x < 0.0 {
        return Ok(ThinShellValue {
            value: f64::INFINITY,
            infeasible: false,
        });
    }
    if x == 0.0 {
        return Ok(ThinShellValue {
            value: f64::INFINITY,
            infeasible: true,
        });
    }
    let base = gibbs::log_volume_limit(v, r, cfg)?;
    let sol = maxent_two_constraints(
        &MomentConstraint::equal(power, x.powf(p)),
        &MomentConstraint::at_most(v.clone(), r),
        cfg,
    );
    match sol {
        Ok(s) => {
            let j = base - s.entropy();
            // round-off around the zero at the typical point
            let value = if j < 0.0 && j > -1e-9 { 0.0 } else { j };
            Ok(ThinShellValue {
                value,
                infeasible: false,
            })
        }
        Err(Error::Infeasible(_)) => Ok(ThinShellValue {
            value: f64::INFINITY,
            infeasible: true,
        }),
        Err(e) => Err(e),
    }
}

/// Typical value `x* = m_p(μ_{V,α(R)})^{1/p}` where `J_p^V` vanishes.
pub fn thinshell_typical(v: &OrliczFunction, r: f64, p: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let alpha = gibbs::solve_alpha(v, r, cfg)?;
    Ok(gibbs::moment(&OrliczFunction::power(p)?, v, alpha, cfg)?.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn p(x: f64) -> OrliczFunction {
        OrliczFunction::Power(x)
    }

    fn mix() -> OrliczFunction {
        OrliczFunction::Mix(vec![(1.0, 4.0), (0.5, 1.0)])
    }

    #[test]
    fn rbar_closed_forms() {
        let (a, r) = threshold_rbar(&p(2.0), &p(1.0), &cfg()).unwrap();
        assert!((a + SQRT_2).abs() < 1e-9, "{a}");
        assert!((r - 1.0 / SQRT_2).abs() < 1e-9, "{r}");
        let (a, r) = threshold_rbar(&p(4.0), &p(2.0), &cfg()).unwrap();
        assert!((a + 3f64.sqrt() / 2.0).abs() < 1e-9, "{a}");
        assert!((r - 1.0 / 3f64.sqrt()).abs() < 1e-9, "{r}");
    }

    #[test]
    fn rbar_mix_against_laplace_moment_oracle() {
        // Under μ_{|x|,−a} (Laplace, rate a): E x⁴ = 24/a⁴, E|x| = 1/a.
        // Solve 24/a⁴ + 0.5/a = 1 by dense scan then bisection.
        let f = |a: f64| 24.0 / a.powi(4) + 0.5 / a - 1.0;
        let grid: Vec<f64> = (0..100_000).map(|i| 0.5 + i as f64 * 1e-4).collect();
        let k = grid.windows(2).position(|w| f(w[0]) > 0.0 && f(w[1]) <= 0.0).unwrap();
        let (mut lo, mut hi) = (grid[k], grid[k + 1]);
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if f(m) > 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        let a_oracle = 0.5 * (lo + hi);
        let (a, r) = threshold_rbar(&mix(), &p(1.0), &cfg()).unwrap();
        assert!((a + a_oracle).abs() < 1e-8, "{a} vs {}", -a_oracle);
        assert!((r - 1.0 / a_oracle).abs() < 1e-8);
    }

    #[test]
    fn rbar_rejects_non_dominating_pair() {
        assert!(matches!(
            threshold_rbar(&p(2.0), &p(2.0), &cfg()),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(threshold_rbar(&p(1.0), &p(2.0), &cfg()), Err(Error::Hypothesis(_))));
    }

    /// Brute-force `sup t·V₂(x) + (1−t)·V₂(y)` subject to
    /// `t·V₁(x) + (1−t)·V₁(y) ≤ 1` over two-point laws on a grid.
    fn two_point_oracle(v1: &OrliczFunction, v2: &OrliczFunction, xmax: f64, n: usize) -> f64 {
        let xs: Vec<f64> = (0..=n).map(|i| xmax * i as f64 / n as f64).collect();
        let mut best = 0.0_f64;
        for &x in &xs {
            let (a1, a2) = (v1.value(x), v2.value(x));
            if a1 <= 1.0 {
                best = best.max(a2);
                continue;
            }
            for &y in &xs {
                let (b1, b2) = (v1.value(y), v2.value(y));
                if b1 > 1.0 {
                    break;
                }
                // largest weight t on x keeping the constraint
                let t = (1.0 - b1) / (a1 - b1);
                best = best.max(t * a2 + (1.0 - t) * b2);
            }
        }
        best
    }

    #[test]
    fn rtilde_examples_and_oracle() {
        let cases = [
            (p(2.0), p(1.0), 1.0),
            (p(4.0), p(2.0), 1.0),
            (p(2.0), OrliczFunction::Huber(1.0), 1.0),
        ];
        for (v1, v2, exact) in cases {
            let r = threshold_rtilde(&v1, &v2).unwrap();
            assert!((r - exact).abs() < 1e-6, "{v1}/{v2}: {r}");
            let oracle = two_point_oracle(&v1, &v2, 6.0, 3000);
            assert!((r - oracle).abs() <= 1e-4 * oracle, "{v1}/{v2}: {r} vs {oracle}");
        }
        let r = threshold_rtilde(&mix(), &p(1.0)).unwrap();
        let oracle = two_point_oracle(&mix(), &p(1.0), 3.0, 3000);
        assert!((r - oracle).abs() <= 1e-4 * oracle, "{r} vs {oracle}");
    }

    #[test]
    fn subcritical_example() {
        let s = maxent_two_constraints(
            &MomentConstraint::at_most(p(2.0), 1.0),
            &MomentConstraint::at_most(p(1.0), 0.5),
            &cfg(),
        )
        .unwrap();
        assert!(s.mu1_star.abs() <= 1e-9, "{s:?}");
        assert!((s.mu2_star - 2.0).abs() < 1e-8);
        assert!((s.achieved_m1 - 0.5).abs() < 1e-8 && (s.achieved_m2 - 0.5).abs() < 1e-9);
        assert_eq!(s.regime, Regime::Subcritical);
        assert!(s.kkt_residual <= 1e-9);
    }

    #[test]
    fn supercritical_example() {
        let s = maxent_two_constraints(
            &MomentConstraint::at_most(p(2.0), 1.0),
            &MomentConstraint::at_most(p(1.0), 2.0),
            &cfg(),
        )
        .unwrap();
        assert!((s.mu1_star - 0.5).abs() < 1e-8, "{s:?}");
        assert!(s.mu2_star.abs() <= 1e-9);
        assert!((s.achieved_m2 - (2.0 / PI).sqrt()).abs() < 1e-8);
        assert_eq!(s.regime, Regime::Supercritical);
    }

    /// Nested bisection on the stationarity conditions with fixed-step
    /// trapezoid moments: inner `μ₁(μ₂)` solves `E x² = 1`, outer `μ₂` solves
    /// `E|x| = c₂` (or is 0 when that constraint is slack).
    fn nested_bisection_oracle(c2: f64) -> (f64, f64) {
        let moments = |m1: f64, m2: f64| {
            let h = 5e-4;
            let (mut z, mut a, mut b) = (0.0, 0.0, 0.0);
            for i in 0..=40_000 {
                let x = i as f64 * h;
                let w = if i == 0 || i == 40_000 { 0.5 } else { 1.0 } * (-m1 * x * x - m2 * x).exp();
                z += w;
                a += w * x * x;
                b += w * x;
            }
            (a / z, b / z)
        };
        let mu1_of = |m2: f64| {
            let (mut lo, mut hi) = (1e-9, 10.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if moments(mid, m2).0 > 1.0 { lo = mid } else { hi = mid }
            }
            0.5 * (lo + hi)
        };
        if moments(mu1_of(0.0), 0.0).1 <= c2 {
            return (mu1_of(0.0), 0.0);
        }
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if moments(mu1_of(mid), mid).1 > c2 { lo = mid } else { hi = mid }
        }
        let m2 = 0.5 * (lo + hi);
        (mu1_of(m2), m2)
    }

    #[test]
    fn two_multiplier_case_matches_bisection_oracle() {
        let s = maxent_two_constraints(
            &MomentConstraint::at_most(p(2.0), 1.0),
            &MomentConstraint::at_most(p(1.0), 0.75),
            &cfg(),
        )
        .unwrap();
        let (o1, o2) = nested_bisection_oracle(0.75);
        assert!((s.mu1_star - o1).abs() < 1e-5, "{s:?} vs ({o1}, {o2})");
        assert!((s.mu2_star - o2).abs() < 1e-5, "{s:?} vs ({o1}, {o2})");
        assert!(s.mu1_star > 0.1 && s.mu2_star > 0.5);
        assert!((s.achieved_m1 - 1.0).abs() < 1e-9 && (s.achieved_m2 - 0.75).abs() < 1e-9);
        assert_eq!(s.regime, Regime::Intermediate);
    }

    #[test]
    fn radius_085_is_not_two_multiplier() {
        // N(0,1) already has E|X| = √(2/π) < 0.85, so the V₂ constraint is slack.
        let s = maxent_two_constraints(
            &MomentConstraint::at_most(p(2.0), 1.0),
            &MomentConstraint::at_most(p(1.0), 0.85),
            &cfg(),
        )
        .unwrap();
        let (o1, o2) = nested_bisection_oracle(0.85);
        assert!((s.mu1_star - o1).abs() < 1e-5 && (s.mu2_star - o2).abs() < 1e-5);
        assert!((s.mu1_star - 0.5).abs() < 1e-8);
        assert_eq!(s.regime, Regime::Supercritical);
    }

    #[test]
    fn regime_classification_examples() {
        let c = cfg();
        assert_eq!(classify_regime(&p(2.0), &p(1.0), 0.5, &c).unwrap(), Regime::Subcritical);
        assert_eq!(classify_regime(&p(2.0), &p(1.0), 0.75, &c).unwrap(), Regime::Intermediate);
        assert_eq!(classify_regime(&p(2.0), &p(1.0), 1.5, &c).unwrap(), Regime::Supercritical);
        let t = thresholds(&p(2.0), &p(1.0), &c).unwrap();
        assert!(t.r_bar <= t.r_typical && t.r_typical <= t.r_tilde);
        assert!((t.r_typical - (2.0 / PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn subcritical_identity() {
        for r in [0.2, 0.4, 0.6, 0.7] {
            let s = conditional_limit_law(&p(2.0), &p(1.0), r, &cfg()).unwrap();
            let alpha = gibbs::solve_alpha(&p(1.0), r, &cfg()).unwrap();
            assert!(s.mu1_star <= 1e-7);
            assert!((s.mu2_star + alpha).abs() <= 1e-7, "{r}: {s:?}");
        }
    }

    #[test]
    fn multiplier_vanishes_approaching_rbar_from_above() {
        let (_, rbar) = threshold_rbar(&p(2.0), &p(1.0), &cfg()).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=4 {
            let r = rbar * (1.0 + 10f64.powi(-k));
            let s = conditional_limit_law(&p(2.0), &p(1.0), r, &cfg()).unwrap();
            assert!(s.mu1_star < prev, "k={k}");
            prev = s.mu1_star;
            let below = conditional_limit_law(&p(2.0), &p(1.0), rbar * (1.0 - 10f64.powi(-k)), &cfg()).unwrap();
            assert!(below.mu1_star <= 1e-7);
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn dual_local_optimality() {
        let c1 = MomentConstraint::at_most(p(2.0), 1.0);
        let c2 = MomentConstraint::at_most(p(1.0), 0.75);
        let s = maxent_two_constraints(&c1, &c2, &cfg()).unwrap();
        let dual = Dual {
            c1: &c1,
            c2: &c2,
            cfg: &cfg(),
        };
        let base = dual.eval([s.mu1_star, s.mu2_star]).unwrap().unwrap().value;
        for (d1, d2) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
            let m = dual.project([s.mu1_star + d1, s.mu2_star + d2]);
            let v = dual.eval(m).unwrap().unwrap().value;
            assert!(v >= base - 1e-9);
        }
    }

    #[test]
    fn thinshell_examples() {
        let c = cfg();
        let v = p(4.0);
        let xs = thinshell_typical(&v, 1.0, 2.0, &c).unwrap();
        let j0 = thinshell_rate(&v, 1.0, 2.0, xs, &c).unwrap();
        assert!(j0.value.abs() <= 1e-6, "{j0:?}");
        let neg = thinshell_rate(&v, 1.0, 2.0, -0.5, &c).unwrap();
        assert_eq!(neg.value, f64::INFINITY);
        assert!(!neg.infeasible);

        // At x = x*/2 only the equality binds: the maximiser is N(0, x²).
        let x = 0.5 * xs;
        let j = thinshell_rate(&v, 1.0, 2.0, x, &c).unwrap().value;
        let base = (2.0 * libm::tgamma(1.25) * 4f64.powf(0.25)).ln() + 0.25;
        let gaussian_entropy = 0.5 * (2.0 * PI * std::f64::consts::E * x * x).ln();
        assert!((j - (base - gaussian_entropy)).abs() < 1e-8, "{j}");
        assert!(j > 0.0);
    }

    #[test]
    fn thinshell_infeasible_beyond_power_mean_bound() {
        // m₂ ≤ m₄^{1/2} ≤ 1, so x > 1 is off the domain.
        let r = thinshell_rate(&p(4.0), 1.0, 2.0, 1.2, &cfg()).unwrap();
        assert_eq!(r.value, f64::INFINITY);
        assert!(r.infeasible);
    }

    #[test]
    fn thinshell_shape() {
        let c = cfg();
        let v = p(4.0);
        let xs = thinshell_typical(&v, 1.0, 2.0, &c).unwrap();
        let grid: Vec<f64> = (1..=18).map(|i| i as f64 * 0.05).collect();
        let js: Vec<f64> = grid.iter().map(|&x| thinshell_rate(&v, 1.0, 2.0, x, &c).unwrap().value).collect();
        for (x, j) in grid.iter().zip(&js) {
            assert!(*j >= 0.0, "J({x}) = {j}");
        }
        for w in grid.windows(2).zip(js.windows(2)) {
            let ((x0, x1), (j0, j1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
            if x1 <= xs {
                assert!(j1 <= j0 + 1e-12, "not nonincreasing on (0, x*]: {x0} {x1}");
            } else if x0 >= xs {
                assert!(j1 >= j0 - 1e-12, "not nondecreasing on [x*, 1): {x0} {x1}");
            }
        }
    }

    #[test]
    fn bad_levels_rejected() {
        assert!(maxent_two_constraints(
            &MomentConstraint::at_most(p(2.0), 0.0),
            &MomentConstraint::at_most(p(1.0), 1.0),
            &cfg()
        )
        .is_err());
    }

    #[test]
    fn solution_json_keys() {
        let s = conditional_limit_law(&p(2.0), &p(1.0), 0.5, &cfg()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for k in ["mu1_star", "mu2_star", "log_partition", "m1", "m2", "regime", "kkt_residual"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert_eq!(v["regime"], "subcritical");
    }
}
