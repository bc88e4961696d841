//! Numerical laboratory for half-line Sturm–Liouville operators
//! `-(P U')' + Q U = z R U`, scalar (`m = 1`) and matrix-valued.
//!
//! The crate evaluates limit-point criteria of Hartman–Rellich and
//! Povzner–Wienholtz type, classifies the endpoint at infinity by counting
//! square-integrable solutions, probes semiboundedness and oscillation, and
//! replays the cutoff argument behind the Povzner–Wienholtz criterion at
//! finite scale.
//!
//! Module map:
//! - [`exprdsl`]: coefficient formula parser/evaluator
//! - [`coefficients`]: piecewise fields, problems, quadrature, hypothesis checks
//! - [`odesolver`]: renormalized first-order system integration
//! - [`oscillation`]: zero / conjugate point counting
//! - [`semibound`]: Dirichlet truncation eigenvalue probe
//! - [`criteria`]: integral and growth criteria
//! - [`weyl`]: limit-point / limit-circle classification
//! - [`proofreplay`]: cutoff identities and inequality data
//! - [`harness`]: stage orchestration, reports and consistency checks

pub mod coefficients;
pub mod criteria;
pub mod exprdsl;
pub mod harness;
pub mod odesolver;
pub mod oscillation;
pub mod proofreplay;
pub mod semibound;
pub mod weyl;

pub mod linalg;

/// Geometric ladder `start + s0 * 2^k` for `k` in `k_range`.
pub fn dyadic_ladder(start: f64, s0: f64, k_range: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    k_range.map(|k| start + s0 * 2f64.powi(k)).collect()
}
