//! Orlicz functions: convex, even potentials vanishing only at the origin.
//!
//! The family is closed and parseable: pure powers `|x|^p` (p ≥ 1), positive
//! mixtures of powers, and a Huber-type potential that is quadratic on
//! `[-t0, t0]` and continues affinely (with matching slope) beyond.
//!
//! Textual form, used by the CLI and JSON configs:
//!
//! ```text
//! power:2
//! huber:1.0
//! mix:1.0*power:4+0.5*power:1
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A convex symmetric potential `V` with `V(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum OrliczFunction {
    /// `|x|^p`, `p ≥ 1`.
    Power(f64),
    /// `Σ w_k |x|^{p_k}` with `w_k > 0`, `p_k ≥ 1`. Stored as `(weight, exponent)`.
    Mix(Vec<(f64, f64)>),
    /// `x²` for `|x| ≤ t0`, `2 t0 |x| − t0²` beyond.
    Huber(f64),
}

#[inline]
fn pow_abs(t: f64, p: f64) -> f64 {
    if p == 1.0 {
        t
    } else if p == 2.0 {
        t * t
    } else if p == 4.0 {
        let s = t * t;
        s * s
    } else {
        t.powf(p)
    }
}

impl OrliczFunction {
    /// Builds a validated power potential.
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::Domain(format!("power exponent must be >= 1, got {p}")));
        }
        Ok(OrliczFunction::Power(p))
    }

    pub fn huber(t0: f64) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::Domain(format!("huber threshold must be > 0, got {t0}")));
        }
        Ok(OrliczFunction::Huber(t0))
    }

    pub fn mix(terms: Vec<(f64, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Domain("mix needs at least one term".into()));
        }
        for &(w, p) in &terms {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Domain(format!("mix weight must be > 0, got {w}")));
            }
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::Domain(format!("power exponent must be >= 1, got {p}")));
            }
        }
        Ok(OrliczFunction::Mix(terms))
    }

    /// `V(x)`, evaluated on `|x|`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let t = x.abs();
        match self {
            OrliczFunction::Power(p) => pow_abs(t, *p),
            OrliczFunction::Mix(terms) => terms.iter().map(|&(w, p)| w * pow_abs(t, p)).sum(),
            OrliczFunction::Huber(t0) => {
                if t <= *t0 {
                    t * t
                } else {
                    2.0 * t0 * t - t0 * t0
                }
            }
        }
    }

    /// Right derivative `V'(x+)`.
    pub fn derivative_right(&self, x: f64) -> f64 {
        let t = x.abs();
        let s = if x < 0.0 { -1.0 } else { 1.0 };
        match self {
            OrliczFunction::Power(p) => power_derivative_right(x, *p),
            OrliczFunction::Mix(terms) => terms
                .iter()
                .map(|&(w, p)| w * power_derivative_right(x, p))
                .sum(),
            OrliczFunction::Huber(t0) => {
                if t <= *t0 {
                    2.0 * x
                } else {
                    s * 2.0 * t0
                }
            }
        }
    }

    /// The unique `t ≥ 0` with `V(t) = y`.
    pub fn inverse_nonneg(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y.is_infinite() {
            return f64::INFINITY;
        }
        match self {
            OrliczFunction::Power(p) => {
                if *p == 1.0 {
                    y
                } else if *p == 2.0 {
                    y.sqrt()
                } else if *p == 4.0 {
                    y.sqrt().sqrt()
                } else {
                    y.powf(1.0 / p)
                }
            }
            OrliczFunction::Huber(t0) => {
                if y <= t0 * t0 {
                    y.sqrt()
                } else {
                    (y + t0 * t0) / (2.0 * t0)
                }
            }
            OrliczFunction::Mix(terms) => {
                // Every term alone is <= y at the root, so each term inverse bounds it.
                let hi = terms
                    .iter()
                    .map(|&(w, p)| (y / w).powf(1.0 / p))
                    .fold(f64::INFINITY, f64::min);
                self.invert_bracketed(y, 0.0, hi)
            }
        }
    }

    /// Safeguarded Newton on `[lo, hi]` for the monotone map `t ↦ V(t)`.
    fn invert_bracketed(&self, y: f64, mut lo: f64, mut hi: f64) -> f64 {
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.value(t) - y;
            if f == 0.0 {
                return t;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if hi - lo <= 1e-15 * hi.max(f64::MIN_POSITIVE) {
                break;
            }
            let d = self.derivative_right(t);
            let newton = t - f / d;
            t = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) <= 1e-13 * hi && (self.value(t) - y).abs() <= 1e-14 * (1.0 + y) {
                return t;
            }
        }
        0.5 * (lo + hi)
    }

    /// Nonnegative points where `V` is not twice differentiable (besides the origin).
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            OrliczFunction::Huber(t0) => vec![*t0],
            _ => Vec::new(),
        }
    }

    /// Exponent when `V` is a pure power.
    pub fn as_power(&self) -> Option<f64> {
        match self {
            OrliczFunction::Power(p) => Some(*p),
            _ => None,
        }
    }

    /// Exponent of the fastest-growing term: `V(x) = O(|x|^d)` at infinity.
    pub fn growth_degree(&self) -> f64 {
        match self {
            OrliczFunction::Power(p) => *p,
            OrliczFunction::Mix(terms) => terms.iter().map(|t| t.1).fold(1.0, f64::max),
            OrliczFunction::Huber(_) => 1.0,
        }
    }
}

fn power_derivative_right(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        return if p == 1.0 { 1.0 } else { 0.0 };
    }
    let t = x.abs();
    let s = x.signum();
    if p == 1.0 {
        s
    } else {
        s * p * pow_abs(t, p - 1.0)
    }
}

impl fmt::Display for OrliczFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrliczFunction::Power(p) => write!(f, "power:{p}"),
            OrliczFunction::Huber(t0) => write!(f, "huber:{t0}"),
            OrliczFunction::Mix(terms) => {
                write!(f, "mix:")?;
                for (i, (w, p)) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{w}*power:{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for OrliczFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_spec(s)
    }
}

impl Serialize for OrliczFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for OrliczFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_spec(&s).map_err(serde::de::Error::custom)
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos + self.offset,
            message: message.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn expect(&mut self, lit: &str) -> Result<()> {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            self.err(format!("expected `{lit}`"))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64> {
        let bytes = self.rest().as_bytes();
        let mut end = 0;
        if end < bytes.len() && (bytes[end] == b'-' || bytes[end] == b'+') {
            end += 1;
        }
        while end < bytes.len() {
            let b = bytes[end];
            if b.is_ascii_digit() || b == b'.' {
                end += 1;
            } else if (b == b'e' || b == b'E') && end > 0 {
                end += 1;
                if end < bytes.len() && (bytes[end] == b'-' || bytes[end] == b'+') {
                    end += 1;
                }
            } else {
                break;
            }
        }
        let tok = &self.rest()[..end];
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos += end;
                Ok(v)
            }
            _ => self.err("expected a finite number"),
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.src.len()
    }
}

/// Parses a potential specification such as `power:1.5` or
/// `mix:1.0*power:4+0.5*power:1`.
pub fn parse_spec(text: &str) -> Result<OrliczFunction> {
    let trimmed = text.trim_start();
    let offset = text.len() - trimmed.len();
    let mut cur = Cursor {
        src: trimmed.trim_end(),
        pos: 0,
        offset,
    };
    let v = if cur.rest().starts_with("power:") {
        cur.expect("power:")?;
        let p = cur.number()?;
        OrliczFunction::power(p)?
    } else if cur.rest().starts_with("huber:") {
        cur.expect("huber:")?;
        let t0 = cur.number()?;
        OrliczFunction::huber(t0)?
    } else if cur.rest().starts_with("mix:") {
        cur.expect("mix:")?;
        let mut terms = Vec::new();
        loop {
            let w = cur.number()?;
            cur.expect("*")?;
            cur.expect("power:")?;
            let p = cur.number()?;
            terms.push((w, p));
            if !cur.eat('+') {
                break;
            }
        }
        OrliczFunction::mix(terms)?
    } else {
        return cur.err("expected `power:`, `huber:` or `mix:`");
    };
    if !cur.at_end() {
        return cur.err("trailing input");
    }
    Ok(v)
}

/// Outcome of a numerical sweep of the Orlicz axioms over a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    pub zero_at_origin: bool,
    pub symmetric: bool,
    pub convex: bool,
    pub monotone: bool,
    pub inverse_round_trip: bool,
    pub worst_asymmetry: f64,
    /// Largest `V((a+b)/2) − (V(a)+V(b))/2` over sampled pairs, floored at zero.
    pub convexity_slack: f64,
    pub worst_round_trip: f64,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.zero_at_origin && self.symmetric && self.convex && self.monotone && self.inverse_round_trip
    }
}

/// Checks evenness, `V(0) = 0`, midpoint convexity, strict monotonicity on
/// the half-line and inverse round trips on the given grid.
pub fn verify_orlicz(v: &OrliczFunction, grid: &[f64]) -> Result<AxiomReport> {
    if grid.is_empty() {
        return Err(Error::Domain("verify_orlicz needs a nonempty grid".into()));
    }
    let zero_at_origin = v.value(0.0) == 0.0 && grid.iter().all(|&x| x == 0.0 || v.value(x) > 0.0);

    let worst_asymmetry = grid
        .iter()
        .map(|&x| (v.value(x) - v.value(-x)).abs())
        .fold(0.0, f64::max);

    let mut convexity_slack = 0.0_f64;
    let mut convex = true;
    let n = grid.len();
    for i in 0..n {
        let mut stride = 1;
        while stride < n {
            let j = (i + stride) % n;
            let (a, b) = (grid[i], grid[j]);
            let (va, vb) = (v.value(a), v.value(b));
            let excess = v.value(0.5 * (a + b)) - 0.5 * (va + vb);
            convexity_slack = convexity_slack.max(excess);
            if excess > 1e-12 * (1.0 + va.abs() + vb.abs()) {
                convex = false;
            }
            stride *= 2;
        }
    }

    let mut half: Vec<f64> = grid.iter().map(|x| x.abs()).collect();
    half.sort_by(f64::total_cmp);
    half.dedup();
    let monotone = half.windows(2).all(|w| v.value(w[0]) < v.value(w[1]));

    let worst_round_trip = half
        .iter()
        .map(|&x| {
            let y = v.value(x);
            (v.value(v.inverse_nonneg(y)) - y).abs() / (1.0 + y)
        })
        .fold(0.0, f64::max);

    Ok(AxiomReport {
        zero_at_origin,
        symmetric: worst_asymmetry == 0.0,
        convex,
        monotone,
        inverse_round_trip: worst_round_trip <= 1e-10,
        worst_asymmetry,
        convexity_slack,
        worst_round_trip,
    })
}
