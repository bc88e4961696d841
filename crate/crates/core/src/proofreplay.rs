//! Finite-scale replay of the cutoff argument: a C² cutoff `θ_ρ` equal to 1
//! on `[c, ρ/2]` and 0 beyond `ρ`, the integration-by-parts identity
//!
//! `∫ (θû, R·L(θû)) = ∫ θ'² (û, P û)`   for `L û = 0`,
//!
//! and the two sides of the resulting inequality along a ρ ladder. Nothing
//! here proves anything; the reports are the numerical shadow of the
//! argument.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coefficients::{CoeffError, Problem, QuadError, QuadOptions};
use crate::linalg::{c, to_complex, CMat};
use crate::odesolver::{self, OdeError, OdeOptions, Trajectory};
use crate::semibound::{SemiboundReport, SemiboundVerdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Coefficient(#[from] CoeffError),
    #[error("no admissible shift: {0}")]
    NotSemibounded(String),
    #[error("non-finite {what} at ρ = {rho}")]
    NonFinite { what: &'static str, rho: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// `S₅(t) = 6t⁵ − 15t⁴ + 10t³` clamped to `[0, 1]`.
pub fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

pub fn smoothstep5_derivative(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

pub fn smoothstep5_second(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

/// Closed-form constants of the polynomial cutoff: `ρ·max|θ'_ρ| = 15/4` and
/// `ρ²·max|θ''_ρ| = 40/√3`.
pub fn cutoff_constants() -> (f64, f64) {
    (15.0 / 4.0, 40.0 / 3f64.sqrt())
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `θ(x) = 1 − S₅(2x/ρ − 1)`.
    Polynomial,
    /// Quintic composed with `s(x) = ρ⁻¹ ∫_c^x p⁻¹`, rescaled to run from 1 at
    /// `x = ρ/2` to 0 at `x = ρ`.
    PAdapted { s_start: f64, s_end: f64 },
}

#[derive(Debug, Clone)]
pub struct Cutoff {
    pub rho: f64,
    pub profile: Profile,
    problem: Option<Problem>,
    tol: f64,
}

impl Cutoff {
    pub fn polynomial(rho: f64) -> Result<Self, ReplayError> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(ReplayError::Invalid(format!("ρ must be positive, got {rho}")));
        }
        Ok(Self {
            rho,
            profile: Profile::Polynomial,
            problem: None,
            tol: 0.0,
        })
    }

    /// p-adapted profile; needs `c < ρ/2` and a scalar problem.
    pub fn p_adapted(problem: &Problem, rho: f64, tol: f64) -> Result<Self, ReplayError> {
        if problem.m() != 1 {
            return Err(ReplayError::Invalid("p-adapted cutoff needs m = 1".into()));
        }
        let c = problem.c();
        if !(0.5 * rho > c) || !(rho < problem.b().value()) {
            return Err(ReplayError::Invalid(format!("need c < ρ/2 and ρ < b, got ρ = {rho}")));
        }
        let q = QuadOptions::with_tol(tol);
        let pinv = |x: f64| -> Result<f64, CoeffError> { Ok(1.0 / problem.p_field().eval_scalar(x)?) };
        let s_start = problem.integrate(pinv, c, 0.5 * rho, q)?.value / rho;
        let s_end = s_start + problem.integrate(pinv, 0.5 * rho, rho, q)?.value / rho;
        Ok(Self {
            rho,
            profile: Profile::PAdapted { s_start, s_end },
            problem: Some(problem.clone()),
            tol,
        })
    }

    /// `(θ, θ', θ'')` at `x`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64, f64), ReplayError> {
        let rho = self.rho;
        match self.profile {
            Profile::Polynomial => {
                let t = 2.0 * x / rho - 1.0;
                if t <= 0.0 {
                    return Ok((1.0, 0.0, 0.0));
                }
                if t >= 1.0 {
                    return Ok((0.0, 0.0, 0.0));
                }
                Ok((
                    1.0 - smoothstep5(t),
                    -2.0 / rho * smoothstep5_derivative(t),
                    -4.0 / (rho * rho) * smoothstep5_second(t),
                ))
            }
            Profile::PAdapted { s_start, s_end } => {
                let half = 0.5 * rho;
                if x <= half {
                    return Ok((1.0, 0.0, 0.0));
                }
                if x >= rho {
                    return Ok((0.0, 0.0, 0.0));
                }
                let problem = self.problem.as_ref().expect("p-adapted cutoff keeps its problem");
                let pinv = |y: f64| -> Result<f64, CoeffError> { Ok(1.0 / problem.p_field().eval_scalar(y)?) };
                let s = s_start + problem.integrate(pinv, half, x, QuadOptions::with_tol(self.tol))?.value / rho;
                let w = s_end - s_start;
                let t = (s - s_start) / w;
                let p = problem.p_field().eval_scalar(x)?;
                let dp = p_derivative(problem, x)?[(0, 0)];
                let ds = 1.0 / (rho * p);
                let dds = -dp / (rho * p * p);
                let f1 = -smoothstep5_derivative(t) / w;
                let f2 = -smoothstep5_second(t) / (w * w);
                Ok((1.0 - smoothstep5(t), f1 * ds, f2 * ds * ds + f1 * dds))
            }
        }
    }
}

/// `P'(x)`: zero on pieces with constant entries, otherwise a central
/// difference of the piece's own formula.
pub fn p_derivative(problem: &Problem, x: f64) -> Result<DMatrix<f64>, CoeffError> {
    let m = problem.m();
    let field = problem.p_field();
    let seg = field.segment_at(x).ok_or(CoeffError::OutOfDomain { coeff: "P", x })?;
    if seg.entries.iter().all(|e| e.is_constant()) {
        return Ok(DMatrix::zeros(m, m));
    }
    let h = 1e-5 * x.abs().max(1.0);
    let lo = seg.eval_matrix(m, x - h, field.kind())?;
    let hi = seg.eval_matrix(m, x + h, field.kind())?;
    Ok((hi - lo) / (2.0 * h))
}

/// Sampled `(ρ·max|θ'|, ρ²·max|θ''|)` with golden-section polishing.
pub fn sampled_cutoff_constants(cutoff: &Cutoff, samples: usize) -> Result<(f64, f64), ReplayError> {
    let rho = cutoff.rho;
    let (lo, hi) = (0.5 * rho, rho);
    let n = samples.max(8);
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| cutoff.eval(x).map(|(_, d1, d2)| (d1.abs(), d2.abs())))
        .collect::<Result<_, _>>()?;
    let polish = |which: usize| -> Result<f64, ReplayError> {
        let pick = |v: &(f64, f64)| if which == 1 { v.0 } else { v.1 };
        let mut best = 0.0f64;
        let mut idx = 0;
        for (i, v) in vals.iter().enumerate() {
            if pick(v) > best {
                best = pick(v);
                idx = i;
            }
        }
        let (mut a, mut b) = (xs[idx.saturating_sub(1)], xs[(idx + 1).min(n)]);
        let f = |x: f64| cutoff.eval(x).map(|v| pick(&(v.1.abs(), v.2.abs()))).unwrap_or(0.0);
        const G: f64 = 0.618_033_988_749_894_9;
        for _ in 0..80 {
            let x1 = b - G * (b - a);
            let x2 = a + G * (b - a);
            let (f1, f2) = (f(x1), f(x2));
            best = best.max(f1).max(f2);
            if f1 >= f2 {
                b = x2;
            } else {
                a = x1;
            }
        }
        Ok(best)
    };
    Ok((rho * polish(1)?, rho * rho * polish(2)?))
}

/// A solution (or test function) of `L U = 0` given by its values and
/// quasi-derivatives, `m × k`.
pub trait ReplayFunction: Sync {
    fn m(&self) -> usize;
    fn eval(&self, x: f64) -> Result<(CMat, CMat), ReplayError>;
}

/// Closed-form `(U(x), V(x))`.
pub struct ClosedForm<F> {
    pub m: usize,
    pub f: F,
}

impl<F> ReplayFunction for ClosedForm<F>
where
    F: Fn(f64) -> (CMat, CMat) + Sync,
{
    fn m(&self) -> usize {
        self.m
    }

    fn eval(&self, x: f64) -> Result<(CMat, CMat), ReplayError> {
        Ok((self.f)(x))
    }
}

impl ReplayFunction for Trajectory {
    fn m(&self) -> usize {
        self.layout.m
    }

    fn eval(&self, x: f64) -> Result<(CMat, CMat), ReplayError> {
        Ok(self.state_at(x)?)
    }
}

fn to_coeff(e: ReplayError) -> CoeffError {
    match e {
        ReplayError::Coefficient(c) => c,
        other => CoeffError::Invalid(other.to_string()),
    }
}

/// Both sides of the identity over `[ρ/2, ρ]` (outside it both integrands
/// vanish). Returns `(lhs, rhs)`.
pub fn identity_sides(problem: &Problem, u: &dyn ReplayFunction, cutoff: &Cutoff, tol: f64) -> Result<(f64, f64), ReplayError> {
    if u.m() != problem.m() {
        return Err(ReplayError::Invalid("test function and problem dimensions differ".into()));
    }
    let (a, b) = (0.5 * cutoff.rho, cutoff.rho);
    let q = QuadOptions::with_tol(tol);
    // (θU, −θ''PU − θ'P'U − 2θ'V) summed over columns
    let lhs_f = |x: f64| -> Result<f64, CoeffError> {
        let (th, d1, d2) = cutoff.eval(x).map_err(to_coeff)?;
        let (uu, vv) = u.eval(x).map_err(to_coeff)?;
        let p = to_complex(&problem.eval_p(x)?);
        let dp = to_complex(&p_derivative(problem, x)?);
        let lu = (&p * &uu) * c(-d2, 0.0) - (&dp * &uu) * c(d1, 0.0) - &vv * c(2.0 * d1, 0.0);
        Ok(th * (uu.adjoint() * lu).trace().re)
    };
    let rhs_f = |x: f64| -> Result<f64, CoeffError> {
        let (_, d1, _) = cutoff.eval(x).map_err(to_coeff)?;
        let (uu, _) = u.eval(x).map_err(to_coeff)?;
        let p = to_complex(&problem.eval_p(x)?);
        Ok(d1 * d1 * (uu.adjoint() * p * &uu).trace().re)
    };
    let lhs = problem.integrate(lhs_f, a, b, q)?.value;
    let rhs = problem.integrate(rhs_f, a, b, q)?.value;
    Ok((lhs, rhs))
}

/// `|∫ (u_ρ, R L u_ρ) − ∫ θ'² (u, P u)|`.
pub fn verify_identity(problem: &Problem, u: &dyn ReplayFunction, cutoff: &Cutoff, tol: f64) -> Result<f64, ReplayError> {
    let (l, r) = identity_sides(problem, u, cutoff, tol)?;
    Ok((l - r).abs())
}

/// `∫ (u_ρ, R u_ρ)`, `∫ (w, P⁻¹ w)` with `w = P u_ρ'`, and `∫ |R L u_ρ|²`
/// over `[c, ρ]`: finiteness of these places `u_ρ` in the minimal domain.
pub fn finiteness_integrals(problem: &Problem, u: &dyn ReplayFunction, cutoff: &Cutoff, tol: f64) -> Result<[f64; 3], ReplayError> {
    let q = QuadOptions::with_tol(tol);
    let (lo, hi) = (problem.c(), cutoff.rho);
    let weighted = |x: f64| -> Result<f64, CoeffError> {
        let (th, _, _) = cutoff.eval(x).map_err(to_coeff)?;
        let (uu, _) = u.eval(x).map_err(to_coeff)?;
        let r = to_complex(&problem.eval_r(x)?);
        Ok(th * th * (uu.adjoint() * r * &uu).trace().re)
    };
    let energy = |x: f64| -> Result<f64, CoeffError> {
        let (th, d1, _) = cutoff.eval(x).map_err(to_coeff)?;
        let (uu, vv) = u.eval(x).map_err(to_coeff)?;
        let p = problem.eval_p(x)?;
        let pinv = to_complex(&p.clone().try_inverse().ok_or(CoeffError::Invalid(format!("P singular at {x}")))?);
        let w = to_complex(&p) * &uu * c(d1, 0.0) + &vv * c(th, 0.0);
        Ok((w.adjoint() * pinv * &w).trace().re)
    };
    let image = |x: f64| -> Result<f64, CoeffError> {
        let (_, d1, d2) = cutoff.eval(x).map_err(to_coeff)?;
        let (uu, vv) = u.eval(x).map_err(to_coeff)?;
        let p = to_complex(&problem.eval_p(x)?);
        let dp = to_complex(&p_derivative(problem, x)?);
        let lu = (&p * &uu) * c(-d2, 0.0) - (&dp * &uu) * c(d1, 0.0) - &vv * c(2.0 * d1, 0.0);
        Ok(lu.norm_squared())
    };
    Ok([
        problem.integrate(weighted, lo, hi, q)?.value,
        problem.integrate(energy, lo, hi, q)?.value,
        problem.integrate(image, lo, hi, q)?.value,
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub rho: f64,
    /// `∫_c^{ρ/2} (û, R û)`.
    pub lhs: f64,
    /// `∫ θ'² (û, P û)`.
    pub rhs: f64,
    /// `rhs / lhs`; `None` when `û` vanishes (degenerate).
    pub ratio: Option<f64>,
    pub residual: f64,
    pub finiteness: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplaySeries {
    pub shift: f64,
    pub reports: Vec<ReplayReport>,
    /// ρ values dropped because the solution scale left the floating range.
    pub truncated: Vec<f64>,
    pub degenerate: bool,
}

/// Shift implementing the strict positivity normalisation: the extrapolated
/// lower bound minus 1.
pub fn shift_from_semibound(report: &SemiboundReport) -> Result<f64, ReplayError> {
    match (report.verdict, report.bound_estimate) {
        (SemiboundVerdict::BoundedBelow, Some(b)) => Ok(b - 1.0),
        (v, _) => Err(ReplayError::NotSemibounded(format!("semibound verdict is {v:?}"))),
    }
}

/// Inequality data along a ρ ladder for the Dirichlet solution of the problem
/// with potential `Q − shift·R` at `z = 0`.
pub fn inequality_chain(problem: &Problem, shift: f64, rhos: &[f64], tol: f64) -> Result<ReplaySeries, ReplayError> {
    let shifted = problem.shifted(shift);
    let m = problem.m();
    let rho_max = rhos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(rho_max < problem.b().value()) || rhos.iter().any(|&r| !(0.5 * r > problem.c())) {
        return Err(ReplayError::Invalid(format!("ρ ladder {rhos:?} must lie in (2c, b)")));
    }
    let traj = odesolver::integrate(
        &shifted,
        c(0.0, 0.0),
        &CMat::zeros(m, m),
        &CMat::identity(m, m),
        rho_max,
        OdeOptions::with_tol(tol.min(1e-10)),
    )?;
    replay_series(&shifted, &traj, shift, rhos, tol)
}

/// Replay on a given solution of the (already shifted) problem.
pub fn replay_series(problem: &Problem, u: &Trajectory, shift: f64, rhos: &[f64], tol: f64) -> Result<ReplaySeries, ReplayError> {
    let m = problem.m();
    let rows: Vec<Result<Option<ReplayReport>, ReplayError>> = rhos
        .par_iter()
        .map(|&rho| {
            // scale check: values at ρ must be representable
            if let Err(OdeError::Overflow { .. }) = u.state_at(rho) {
                return Ok(None);
            }
            let cutoff = Cutoff::polynomial(rho)?;
            let mut lhs = 0.0;
            for j in 0..m {
                let mut w = CMat::zeros(m, 1);
                w[(j, 0)] = c(1.0, 0.0);
                let l = u.log_weighted_norm(&w, problem.c(), 0.5 * rho);
                if l.is_finite() {
                    lhs += l.exp();
                }
            }
            let (lid, rhs) = identity_sides(problem, u, &cutoff, tol)?;
            let finiteness = finiteness_integrals(problem, u, &cutoff, tol)?;
            if !lhs.is_finite() || !rhs.is_finite() || finiteness.iter().any(|v| !v.is_finite()) {
                return Err(ReplayError::NonFinite { what: "replay integral", rho });
            }
            Ok(Some(ReplayReport {
                rho,
                lhs,
                rhs,
                ratio: (lhs > 0.0).then(|| rhs / lhs),
                residual: (lid - rhs).abs(),
                finiteness,
            }))
        })
        .collect();
    let mut reports = Vec::new();
    let mut truncated = Vec::new();
    for (row, &rho) in rows.into_iter().zip(rhos) {
        match row? {
            Some(r) => reports.push(r),
            None => truncated.push(rho),
        }
    }
    let degenerate = reports.iter().all(|r| r.ratio.is_none());
    Ok(ReplaySeries {
        shift,
        reports,
        truncated,
        degenerate,
    })
}

impl ReplaySeries {
    /// CSV with columns `rho,lhs,rhs,ratio,residual,fin_weighted,fin_energy,fin_image`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rho,lhs,rhs,ratio,residual,fin_weighted,fin_energy,fin_image")?;
        for r in &self.reports {
            writeln!(
                w,
                "{:e},{:e},{:e},{},{:e},{:e},{:e},{:e}",
                r.rho,
                r.lhs,
                r.rhs,
                r.ratio.map_or(String::new(), |v| format!("{v:e}")),
                r.residual,
                r.finiteness[0],
                r.finiteness[1],
                r.finiteness[2]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin;

    fn linear(m: usize) -> ClosedForm<impl Fn(f64) -> (CMat, CMat) + Sync> {
        ClosedForm {
            m,
            f: move |x: f64| (CMat::identity(m, m) * c(x, 0.0), CMat::identity(m, m)),
        }
    }

    #[test]
    fn polynomial_cutoff_shape() {
        let t = Cutoff::polynomial(4.0).unwrap();
        assert_eq!(t.eval(2.0).unwrap().0, 1.0);
        assert_eq!(t.eval(4.0).unwrap().0, 0.0);
        assert!((t.eval(3.0).unwrap().0 - 0.5).abs() < 1e-15);
        assert!((t.eval(3.0).unwrap().1 + 15.0 / 16.0).abs() < 1e-15);
        // C² joins
        for x in [2.0, 4.0] {
            let (_, d1, d2) = t.eval(x).unwrap();
            assert_eq!((d1, d2), (0.0, 0.0));
        }
    }

    #[test]
    fn cutoff_scaling_constants() {
        let (k1, k2) = cutoff_constants();
        for rho in [8.0, 16.0, 32.0, 1000.0] {
            let (a, b) = sampled_cutoff_constants(&Cutoff::polynomial(rho).unwrap(), 4096).unwrap();
            assert!((a - k1).abs() < 1e-12 * k1, "{a}");
            assert!((b - k2).abs() < 1e-12 * k2, "{b}");
        }
    }

    #[test]
    fn p_adapted_reduces_on_free() {
        let free = builtin("free").unwrap();
        let a = Cutoff::p_adapted(&free, 16.0, 1e-13).unwrap();
        let b = Cutoff::polynomial(16.0).unwrap();
        for x in [8.5, 10.0, 12.0, 15.3] {
            let (u, v) = (a.eval(x).unwrap(), b.eval(x).unwrap());
            assert!((u.0 - v.0).abs() < 1e-12 && (u.1 - v.1).abs() < 1e-12 && (u.2 - v.2).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_on_linear_solution() {
        let free = builtin("free").unwrap();
        let mf = builtin("matrix_free").unwrap();
        for rho in [8.0, 16.0, 32.0] {
            let t = Cutoff::polynomial(rho).unwrap();
            assert!(verify_identity(&free, &linear(1), &t, 1e-12).unwrap() < 1e-8);
            let (l, r) = identity_sides(&mf, &linear(2), &t, 1e-12).unwrap();
            let (l1, r1) = identity_sides(&free, &linear(1), &t, 1e-12).unwrap();
            assert!((l - r).abs() < 1e-8);
            assert!((r - 2.0 * r1).abs() < 1e-8 * r.abs() && (l - 2.0 * l1).abs() < 1e-8 * l.abs());
        }
        let zero = ClosedForm {
            m: 1,
            f: |_x: f64| (CMat::zeros(1, 1), CMat::zeros(1, 1)),
        };
        assert_eq!(verify_identity(&free, &zero, &Cutoff::polynomial(8.0).unwrap(), 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn sinh_chain_against_independent_integrals() {
        // q ≡ 2: û = sinh(√2 x)/√2
        let free = builtin("free").unwrap();
        let s = inequality_chain(&free, -2.0, &[8.0, 16.0, 32.0], 1e-11).unwrap();
        assert_eq!(s.reports.len(), 3);
        let k = 2f64.sqrt();
        let r8 = &s.reports[0];
        // ∫_0^4 sinh²(kx)/2 = (sinh(8k)/(2k) − 4)/4
        let lhs_exact = ((8.0 * k).sinh() / (2.0 * k) - 4.0) / 4.0;
        assert!((r8.lhs / lhs_exact - 1.0).abs() < 1e-8, "{} vs {lhs_exact}", r8.lhs);
        // independent composite Simpson for the right side
        let t = Cutoff::polynomial(8.0).unwrap();
        let n = 20000;
        let h = 4.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = 4.0 + h * i as f64;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let d1 = t.eval(x).unwrap().1;
            acc += w * d1 * d1 * (k * x).sinh().powi(2) / 2.0;
        }
        let rhs_exact = acc * h / 3.0;
        assert!((r8.rhs / rhs_exact - 1.0).abs() < 1e-8, "{} vs {rhs_exact}", r8.rhs);
        for r in &s.reports {
            assert!(r.residual <= 1e-8 * r.rhs.abs().max(1.0));
            assert!(r.finiteness.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn shift_requires_semibound() {
        let q = builtin("quartic_lc").unwrap();
        let rep = crate::semibound::semibound_verdict(
            &q,
            &crate::semibound::default_ladder(&q)[..4],
            &Default::default(),
        )
        .unwrap();
        assert!(matches!(shift_from_semibound(&rep), Err(ReplayError::NotSemibounded(_))));
    }
}
