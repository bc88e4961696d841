//! Zero and conjugate-point counting at real λ, and the nonoscillation
//! verdict built on top of it.
//!
//! Scalar problems use the Prüfer angle. Matrix problems use the unitary
//! angle of the Dirichlet frame: with `Ω = (V + iU)(V − iU)⁻¹`, `det U = 0`
//! exactly when `Ω` has eigenvalue 1, and the eigen-angles of `Ω` cross `0`
//! (mod 2π) in the positive direction. The number of crossings in `(c, d]` is
//! the unwrapped `arg det Ω` minus the sum of the current eigen-angles,
//! divided by 2π. Renormalising the frame by an invertible right factor
//! leaves `Ω` unchanged, so the count is immune to growth.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::Problem;
use crate::linalg::{self, c, CMat};
use crate::odesolver::{dopri, Integrator, Layout, OdeError, OdeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OscVerdict {
    Nonoscillatory,
    Oscillatory,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMethod {
    Prufer,
    UnitaryAngle,
}

#[derive(Debug, Clone, Serialize)]
pub struct OscillationReport {
    pub lambda: f64,
    pub d_ladder: Vec<f64>,
    /// Zeros (m = 1) or conjugate points (m > 1) in `(c, d]`.
    pub counts: Vec<u64>,
    pub verdict: OscVerdict,
    /// First ladder index from which the counts stay constant (when
    /// nonoscillatory).
    pub stabilization_index: Option<usize>,
    pub method: CountMethod,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct OscillationOptions {
    pub ode: OdeOptions,
    /// Number of trailing ladder steps that must agree.
    pub window: usize,
    /// Largest accepted change of the unitary angle per step.
    pub max_angle_step: f64,
}

impl Default for OscillationOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions {
                track_gram: false,
                store_grid: false,
                ..OdeOptions::with_tol(1e-10)
            },
            window: 3,
            max_angle_step: PI / 4.0,
        }
    }
}

/// Default ladder `c + 2^k`, `k = 0..=5`.
pub fn default_ladder(problem: &Problem) -> Vec<f64> {
    let b = problem.b().value();
    crate::dyadic_ladder(problem.c(), 1.0, 0..=5)
        .into_iter()
        .filter(|&d| d < b)
        .collect()
}

fn check_ladder(problem: &Problem, ladder: &[f64]) -> Result<(), OdeError> {
    let (lo, hi) = (problem.c(), problem.b().value());
    let mut prev = lo;
    for &d in ladder {
        if !(d > prev) || !(d < hi) {
            return Err(OdeError::Invalid(format!(
                "ladder must be increasing inside ({lo}, {hi}); got {ladder:?}"
            )));
        }
        prev = d;
    }
    Ok(())
}

/// Prüfer angle `θ` with `u = ρ sin θ`, `pu' = ρ cos θ` from Dirichlet data at
/// `c`, evaluated at every ladder point.
pub fn prufer_angles(problem: &Problem, lambda: f64, ladder: &[f64], opts: &OdeOptions) -> Result<Vec<f64>, OdeError> {
    if problem.m() != 1 {
        return Err(OdeError::Invalid("Prüfer counting needs m = 1".into()));
    }
    check_ladder(problem, ladder)?;
    let mut out = Vec::with_capacity(ladder.len());
    let mut ws = dopri::Workspace::new(1);
    let mut x = problem.c();
    let mut theta = [0.0f64];
    let mut h = opts.h_init;
    let mut steps = 0usize;
    for &d in ladder {
        while x < d {
            let end = problem.next_breakpoint_after(x).map_or(d, |bp| bp.min(d));
            // freeze the piece formula: evaluate just left of a breakpoint at its end
            let piece_end = end;
            let mut f = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), OdeError> {
                let te = if t >= piece_end { piece_end.next_down() } else { t };
                let (p, q, r) = problem.scalar(te)?;
                if p == 0.0 {
                    return Err(OdeError::SingularP { x: te });
                }
                let (s, co) = y[0].sin_cos();
                dy[0] = co * co / p + (lambda * r - q) * s * s;
                Ok(())
            };
            let mut k1 = [0.0];
            f(x, &theta, &mut k1)?;
            while x < end {
                let remaining = end - x;
                let mut step = h.min(opts.h_max).min(remaining);
                let lands = step >= remaining * (1.0 - 1e-12);
                if lands {
                    step = remaining;
                }
                if step < opts.h_min * x.abs().max(1.0) {
                    return Err(OdeError::StepUnderflow { x, h: step });
                }
                steps += 1;
                if steps > opts.max_steps {
                    return Err(OdeError::TooManySteps { x, max_steps: opts.max_steps });
                }
                let err = dopri::step(&mut f, x, &theta, &k1, step, opts.atol, opts.tol, &mut ws)?;
                if !err.is_finite() || err > 1.0 {
                    h = step * if err.is_finite() { dopri::step_factor(err).min(1.0) } else { 0.1 };
                    continue;
                }
                x = if lands { end } else { x + step };
                theta[0] = ws.y_new[0];
                k1[0] = ws.k7[0];
                h = step * dopri::step_factor(err);
                if lands {
                    h = h.max(remaining);
                }
            }
        }
        out.push(theta[0]);
    }
    Ok(out)
}

fn floor_count(theta: f64, period: f64) -> u64 {
    // θ stays ≥ 0: it starts at 0 and θ' = 1/p > 0 wherever θ ≡ 0 (mod π)
    (theta / period).floor().max(0.0) as u64
}

/// Zeros of the Dirichlet solution in `(c, d]` at each ladder point (m = 1).
pub fn count_zeros_ladder(problem: &Problem, lambda: f64, ladder: &[f64], opts: &OdeOptions) -> Result<Vec<u64>, OdeError> {
    Ok(prufer_angles(problem, lambda, ladder, opts)?
        .into_iter()
        .map(|t| floor_count(t, PI))
        .collect())
}

pub fn count_zeros_scalar(problem: &Problem, lambda: f64, d: f64, opts: &OdeOptions) -> Result<u64, OdeError> {
    Ok(count_zeros_ladder(problem, lambda, &[d], opts)?[0])
}

fn angle_parts(layout: Layout, y: &[f64]) -> (CMat, CMat) {
    let u = layout.u(y);
    let v = layout.v(y);
    let i = c(0.0, 1.0);
    (&v + &u * i, &v - &u * i)
}

fn log_det_arg(a: &CMat) -> f64 {
    a.clone().determinant().arg()
}

fn wrap(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Conjugate points counted at each ladder point, plus warnings for ladder
/// points that sit (numerically) on a conjugate point.
pub fn count_conjugate_points_ladder(
    problem: &Problem,
    lambda: f64,
    ladder: &[f64],
    opts: &OscillationOptions,
) -> Result<(Vec<u64>, Vec<String>), OdeError> {
    check_ladder(problem, ladder)?;
    let m = problem.m();
    let u0 = CMat::zeros(m, m);
    let v0 = CMat::identity(m, m);
    let ode = OdeOptions {
        track_gram: false,
        store_grid: false,
        ..opts.ode
    };
    let mut it = Integrator::new(problem, c(lambda, 0.0), &u0, &v0, ode)?;
    let layout = it.layout();
    let angle = |y: &[f64]| {
        let (plus, minus) = angle_parts(layout, y);
        log_det_arg(&plus) - log_det_arg(&minus)
    };
    // unwrapped arg det Ω; Ω(c) = I
    let mut total = 0.0;
    let mut counts = Vec::with_capacity(ladder.len());
    let mut warnings = Vec::new();
    for &d in ladder {
        let max_step = opts.max_angle_step;
        it.advance_with(d, |s| {
            let delta = wrap(angle(s.y1) - angle(s.y0));
            if delta.abs() > max_step {
                return false;
            }
            total += delta;
            true
        })?;
        let (plus, minus) = angle_parts(layout, it.state());
        let omega = &plus
            * minus
                .try_inverse()
                .ok_or_else(|| OdeError::Invalid(format!("V - iU singular at x = {d}")))?;
        let mut eig_sum = 0.0;
        for ev in linalg::eigenvalues(&omega) {
            let a = ev.arg().rem_euclid(TAU);
            if a < 1e-8 || TAU - a < 1e-8 {
                warnings.push(format!("ladder point {d} is within numerical distance of a conjugate point"));
            }
            eig_sum += a;
        }
        let n = ((total - eig_sum) / TAU).round();
        counts.push(n.max(0.0) as u64);
    }
    Ok((counts, warnings))
}

pub fn count_conjugate_points_matrix(problem: &Problem, lambda: f64, d: f64, opts: &OscillationOptions) -> Result<u64, OdeError> {
    Ok(count_conjugate_points_ladder(problem, lambda, &[d], opts)?.0[0])
}

/// Stabilisation rule: nonoscillatory when the last `window` ladder steps add
/// no zeros, oscillatory when each of them adds at least one.
pub fn verdict_from_counts(counts: &[u64], window: usize) -> (OscVerdict, Option<usize>) {
    let n = counts.len();
    if window == 0 || n < window + 1 {
        return (OscVerdict::Undecided, None);
    }
    let tail = &counts[n - window - 1..];
    if tail.windows(2).all(|w| w[0] == w[1]) {
        let last = counts[n - 1];
        let first = counts.iter().position(|&k| k == last).unwrap_or(n - 1);
        (OscVerdict::Nonoscillatory, Some(first))
    } else if tail.windows(2).all(|w| w[1] > w[0]) {
        (OscVerdict::Oscillatory, None)
    } else {
        (OscVerdict::Undecided, None)
    }
}

pub fn nonoscillation_verdict(
    problem: &Problem,
    lambda: f64,
    ladder: &[f64],
    opts: &OscillationOptions,
) -> Result<OscillationReport, OdeError> {
    let (counts, warnings, method) = if problem.m() == 1 {
        (count_zeros_ladder(problem, lambda, ladder, &opts.ode)?, Vec::new(), CountMethod::Prufer)
    } else {
        let (c, w) = count_conjugate_points_ladder(problem, lambda, ladder, opts)?;
        (c, w, CountMethod::UnitaryAngle)
    };
    let (verdict, stabilization_index) = verdict_from_counts(&counts, opts.window);
    Ok(OscillationReport {
        lambda,
        d_ladder: ladder.to_vec(),
        counts,
        verdict,
        stabilization_index,
        method,
        warnings,
    })
}

/// Verdicts for several λ, computed in parallel.
pub fn scan_lambdas(
    problem: &Problem,
    lambdas: &[f64],
    ladder: &[f64],
    opts: &OscillationOptions,
) -> Result<Vec<OscillationReport>, OdeError> {
    lambdas
        .par_iter()
        .map(|&l| nonoscillation_verdict(problem, l, ladder, opts))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Lambda0Search {
    /// Largest λ found nonoscillatory.
    pub nonoscillatory_at: f64,
    /// Smallest λ found oscillatory, if any was.
    pub oscillatory_at: Option<f64>,
    pub evaluations: usize,
}

/// Bisection for the nonoscillation threshold on `[lo, hi]`. Returns `None`
/// when `lo` itself is not nonoscillatory. Undecided midpoints stop the search.
pub fn find_lambda0(
    problem: &Problem,
    lo: f64,
    hi: f64,
    ladder: &[f64],
    iterations: usize,
    opts: &OscillationOptions,
) -> Result<Option<Lambda0Search>, OdeError> {
    let mut evals = 1;
    if nonoscillation_verdict(problem, lo, ladder, opts)?.verdict != OscVerdict::Nonoscillatory {
        return Ok(None);
    }
    evals += 1;
    let (mut a, mut b) = (lo, hi);
    match nonoscillation_verdict(problem, hi, ladder, opts)?.verdict {
        OscVerdict::Nonoscillatory => {
            return Ok(Some(Lambda0Search {
                nonoscillatory_at: hi,
                oscillatory_at: None,
                evaluations: evals,
            }))
        }
        OscVerdict::Undecided => {
            return Ok(Some(Lambda0Search {
                nonoscillatory_at: lo,
                oscillatory_at: None,
                evaluations: evals,
            }))
        }
        OscVerdict::Oscillatory => {}
    }
    for _ in 0..iterations {
        let mid = 0.5 * (a + b);
        evals += 1;
        match nonoscillation_verdict(problem, mid, ladder, opts)?.verdict {
            OscVerdict::Nonoscillatory => a = mid,
            OscVerdict::Oscillatory => b = mid,
            OscVerdict::Undecided => break,
        }
    }
    Ok(Some(Lambda0Search {
        nonoscillatory_at: a,
        oscillatory_at: Some(b),
        evaluations: evals,
    }))
}
