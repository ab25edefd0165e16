//! Numerical toolkit for uniform distributions on high-dimensional Orlicz
//! balls `𝔹_R^{n,V} = {x ∈ ℝⁿ : Σ V(x_i) ≤ Rn}`.
//!
//! * [`orlicz`]: the potentials `V` and their text form.
//! * [`gibbs`]: log-partition functions, critical temperatures, Sanov rate
//!   function and asymptotic volumes.
//! * [`maxent`]: maximum-entropy laws under one or two moment constraints,
//!   the regime thresholds and the thin-shell rate.
//! * [`samplers`]: exact ℓ_p-ball sampling and coordinate-Gibbs MCMC on
//!   (intersections of) Orlicz balls.
//! * [`empirics`]: goodness-of-fit statistics and a multilevel-splitting
//!   rare-event estimator.
//! * [`experiments`]: end-to-end verification scenarios producing reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod empirics;
pub mod error;
pub mod experiments;
pub mod gibbs;
pub mod maxent;
pub mod orlicz;
pub mod quadrature;
pub mod samplers;

pub use error::{Error, Result};
pub use orlicz::{parse_spec, OrliczFunction};
pub use quadrature::QuadratureConfig;
