//! Adaptive integration of `-(P U')' + Q U = z R U` written as the first-order
//! system `U' = P⁻¹V`, `V' = (Q − zR)U` (V is the quasi-derivative `PU'`).
//!
//! Solutions that grow exponentially are kept representable by QR
//! renormalisation of the stacked `(U; V)` columns; the discarded triangular
//! factors are accumulated as `e^{s} T̂` so true solutions and the weighted
//! Gram matrix `∫ U* R U` remain recoverable.

pub mod dopri;
mod integrator;

use std::io::Write;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::coefficients::{CoeffError, Problem, QuadError, QuadOptions};
use crate::linalg::{CMat, C64};

pub use integrator::{log_sum_exp, GramSegment, GridPoint, Integrator, Layout, SolveStats, StepView, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error(transparent)]
    Coefficient(#[from] CoeffError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("step size underflow at x = {x} (h = {h}); the coefficients may be singular here")]
    StepUnderflow { x: f64, h: f64 },
    #[error("step budget of {max_steps} exhausted at x = {x}")]
    TooManySteps { x: f64, max_steps: usize },
    #[error("P is singular at x = {x}")]
    SingularP { x: f64 },
    #[error("x = {x} is outside the integrated range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("solution scale e^{log_scale} at x = {x} is not representable")]
    Overflow { x: f64, log_scale: f64 },
    #[error("invalid initial data: {0}")]
    InvalidInit(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    /// Relative local error tolerance.
    pub tol: f64,
    /// Absolute local error tolerance.
    pub atol: f64,
    pub h_init: f64,
    /// Relative floor on the step size.
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Column norm of the stacked state that triggers QR renormalisation.
    pub renorm_threshold: f64,
    pub track_gram: bool,
    pub store_grid: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            atol: 1e-9,
            h_init: 1e-3,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
            renorm_threshold: 1e2,
            track_gram: true,
            store_grid: true,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            atol: tol,
            ..Self::default()
        }
    }
}

/// Integrate from `c` to `x_end` with initial columns `(U₀; V₀)`.
pub fn integrate(problem: &Problem, z: C64, u0: &CMat, v0: &CMat, x_end: f64, opts: OdeOptions) -> Result<Trajectory, OdeError> {
    let mut it = Integrator::new(problem, z, u0, v0, opts)?;
    it.advance_to(x_end)?;
    Ok(it.finish())
}

/// Wronskian-type form of two trajectories at `x`.
///
/// For `z₂ = z̄₁` the sesquilinear form `U₁*V₂ − V₁*U₂` is conserved; for
/// `z₂ = z₁` the bilinear form `U₁ᵀV₂ − V₁ᵀU₂` is. For real `z` the two
/// definitions coincide on the conserved quantity and the sesquilinear one is
/// returned. Other pairs have no conserved form and are rejected.
pub fn wronskian(t1: &Trajectory, t2: &Trajectory, x: f64) -> Result<CMat, OdeError> {
    if t1.layout.m != t2.layout.m {
        return Err(OdeError::Invalid("trajectories have different dimensions".into()));
    }
    let (u1, v1) = t1.state_at(x)?;
    let (u2, v2) = t2.state_at(x)?;
    let (z1, z2) = (t1.z, t2.z);
    let close = |a: C64, b: C64| (a - b).norm() <= 1e-14 * (1.0 + a.norm());
    if close(z2, z1.conj()) {
        Ok(u1.adjoint() * &v2 - v1.adjoint() * &u2)
    } else if close(z1, z2) {
        Ok(u1.transpose() * &v2 - v1.transpose() * &u2)
    } else {
        Err(OdeError::Invalid(format!(
            "no conserved Wronskian for spectral parameters {z1} and {z2}"
        )))
    }
}

/// `U(x) = (∫_c^x P⁻¹) C + D`, the general solution when Q ≡ 0 and z = 0.
pub fn explicit_q0_solution(problem: &Problem, cm: &DMatrix<f64>, dm: &DMatrix<f64>, x: f64, tol: f64) -> Result<DMatrix<f64>, OdeError> {
    if !problem.q_is_zero() {
        return Err(OdeError::Invalid("explicit solution needs Q ≡ 0".into()));
    }
    let m = problem.m();
    let c = problem.c();
    let mut integral = DMatrix::zeros(m, m);
    if x != c {
        for i in 0..m {
            for j in 0..m {
                let entry = |t: f64| -> Result<f64, CoeffError> {
                    let p = problem.eval_p(t)?;
                    let inv = p.try_inverse().ok_or(CoeffError::Invalid(format!("P singular at {t}")))?;
                    Ok(inv[(i, j)])
                };
                let (lo, hi, sign) = if x > c { (c, x, 1.0) } else { (x, c, -1.0) };
                integral[(i, j)] = sign * problem.integrate(entry, lo, hi, QuadOptions::with_tol(tol))?.value;
            }
        }
    }
    Ok(integral * cm + dm)
}

impl Trajectory {
    /// CSV layout: `x,seg,log_scale`, then `re/im` of every entry of
    /// `U T̂` and `V T̂` (row-major). True values are `e^{log_scale}` times
    /// the listed ones. One row per grid point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let Layout { m, k } = self.layout;
        let mut header = vec!["x".to_string(), "seg".into(), "log_scale".into()];
        for name in ["U", "V"] {
            for i in 0..m {
                for j in 0..k {
                    header.push(format!("re_{name}{i}{j}"));
                    header.push(format!("im_{name}{i}{j}"));
                }
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for g in &self.grid {
            let s = &self.segments[g.seg.min(self.segments.len() - 1)];
            let u = self.layout.u(&g.y) * &s.t_hat;
            let v = self.layout.v(&g.y) * &s.t_hat;
            let mut row = vec![format!("{:e}", g.x), g.seg.to_string(), format!("{:e}", s.log_scale)];
            for a in [&u, &v] {
                for i in 0..m {
                    for j in 0..k {
                        row.push(format!("{:e}", a[(i, j)].re));
                        row.push(format!("{:e}", a[(i, j)].im));
                    }
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
