use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};
use crate::orlicz::OrliczFunction;
use crate::quadrature::QuadratureConfig;

use super::{log_partition, solve_alpha};

/// `lim (1/n) log vol_n(𝔹_R^{n,V}) = φ_V(α(R)) − α(R)·R`.
pub fn log_volume_limit(v: &OrliczFunction, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let alpha = solve_alpha(v, r, cfg)?;
    Ok(log_partition(v, alpha, cfg)? - alpha * r)
}

/// Exact `(1/n) log vol_n` of `{x ∈ ℝⁿ : Σ|x_i|^p ≤ Rn}`, the ℓ_p ball of
/// radius `(Rn)^{1/p}`, from `vol = (2Γ(1+1/p) r)ⁿ / Γ(1+n/p)`.
pub fn exact_lp_log_volume(p: f64, r: f64, n: usize) -> Result<f64> {
    if !(p >= 1.0 && r > 0.0 && n >= 1) {
        return Err(Error::Domain(format!("need p >= 1, R > 0, n >= 1 (got p={p}, R={r}, n={n})")));
    }
    let nf = n as f64;
    let log_unit = (2.0_f64).ln() + ln_gamma(1.0 + 1.0 / p);
    Ok(log_unit + (r * nf).ln() / p - ln_gamma(1.0 + nf / p) / nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exact_volume_examples() {
        let v = exact_lp_log_volume(2.0, 1.0, 2).unwrap();
        assert!((v - 0.5 * (2.0 * PI).ln()).abs() < 1e-14);
        let v = exact_lp_log_volume(1.0, 1.0, 1).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-14);
        let v = exact_lp_log_volume(2.0, 1.0, 5000).unwrap();
        assert!((v - 1.418_938_533_204_672_7).abs() < 1.2e-3);
        assert!(exact_lp_log_volume(0.5, 1.0, 3).is_err());
    }

    #[test]
    fn limit_examples() {
        let cfg = QuadratureConfig::default();
        let l2 = log_volume_limit(&OrliczFunction::Power(2.0), 1.0, &cfg).unwrap();
        assert!((l2 - (0.5 * (2.0 * PI).ln() + 0.5)).abs() < 1e-9);
        let l1 = log_volume_limit(&OrliczFunction::Power(1.0), 1.0, &cfg).unwrap();
        assert!((l1 - (2f64.ln() + 1.0)).abs() < 1e-9);
        let l4 = log_volume_limit(&OrliczFunction::Power(4.0), 1.0, &cfg).unwrap();
        let closed = (2.0 * ln_gamma(1.25).exp() * 4f64.powf(0.25)).ln() + 0.25;
        assert!((l4 - closed).abs() < 1e-9, "{l4} vs {closed}");
    }
}
