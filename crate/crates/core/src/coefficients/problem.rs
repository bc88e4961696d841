use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::field::{CoefficientField, FieldKind};
use super::quad::{quad, QuadError, QuadOptions, QuadResult};
use super::CoeffError;

/// Right endpoint of the half-line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Finite(f64),
    Infinite,
}

impl Endpoint {
    pub fn value(self) -> f64 {
        match self {
            Endpoint::Finite(b) => b,
            Endpoint::Infinite => f64::INFINITY,
        }
    }
}

/// Coefficients frozen at one point.
#[derive(Debug, Clone)]
pub struct LocalCoeffs {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Half-line problem `-(P U')' + Q U = z R U` on `[c, b)`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    m: usize,
    c: f64,
    b: Endpoint,
    p: CoefficientField,
    q: CoefficientField,
    r: CoefficientField,
    /// Effective potential is `Q - shift * R`.
    shift: f64,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        c: f64,
        b: Endpoint,
        p: CoefficientField,
        q: CoefficientField,
        r: CoefficientField,
    ) -> Result<Self, CoeffError> {
        let m = p.m();
        if q.m() != m || r.m() != m {
            return Err(CoeffError::Invalid("P, Q, R dimensions differ".into()));
        }
        if !c.is_finite() || !(c < b.value()) {
            return Err(CoeffError::Invalid(format!("need finite c < b, got c = {c}, b = {}", b.value())));
        }
        for (f, want) in [(&p, FieldKind::PLike), (&q, FieldKind::QLike), (&r, FieldKind::RLike)] {
            if f.kind() != want {
                return Err(CoeffError::Invalid(format!("field in {} slot has kind {:?}", want.label(), f.kind())));
            }
            let (lo, hi) = f.span();
            if lo > c || hi < b.value() {
                return Err(CoeffError::Invalid(format!(
                    "{} covers [{lo}, {hi}) but the problem interval is [{c}, {})",
                    want.label(),
                    b.value()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            m,
            c,
            b,
            p,
            q,
            r,
            shift: 0.0,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn b(&self) -> Endpoint {
        self.b
    }

    pub fn p_field(&self) -> &CoefficientField {
        &self.p
    }

    pub fn q_field(&self) -> &CoefficientField {
        &self.q
    }

    pub fn r_field(&self) -> &CoefficientField {
        &self.r
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Copy with potential `Q - s R` (spectral shift by `s`).
    pub fn shifted(&self, s: f64) -> Problem {
        Problem {
            shift: self.shift + s,
            ..self.clone()
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.c && x < self.b.value()
    }

    /// Sorted, de-duplicated breakpoints of P, Q, R strictly inside `(lo, hi)`.
    pub fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.p.breakpoints_in(lo, hi, &mut out);
        self.q.breakpoints_in(lo, hi, &mut out);
        self.r.breakpoints_in(lo, hi, &mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Smallest breakpoint of P, Q, R strictly greater than `x`.
    pub fn next_breakpoint_after(&self, x: f64) -> Option<f64> {
        [&self.p, &self.q, &self.r]
            .iter()
            .filter_map(|f| f.next_breakpoint_after(x))
            .min_by(f64::total_cmp)
    }

    pub fn eval_p(&self, x: f64) -> Result<DMatrix<f64>, CoeffError> {
        self.p.eval(x)
    }

    pub fn eval_q(&self, x: f64) -> Result<DMatrix<f64>, CoeffError> {
        let q = self.q.eval(x)?;
        if self.shift == 0.0 {
            Ok(q)
        } else {
            Ok(q - self.r.eval(x)? * self.shift)
        }
    }

    pub fn eval_r(&self, x: f64) -> Result<DMatrix<f64>, CoeffError> {
        self.r.eval(x)
    }

    pub fn local(&self, x: f64) -> Result<LocalCoeffs, CoeffError> {
        let r = self.r.eval(x)?;
        let mut q = self.q.eval(x)?;
        if self.shift != 0.0 {
            q -= &r * self.shift;
        }
        Ok(LocalCoeffs {
            p: self.p.eval(x)?,
            q,
            r,
        })
    }

    /// Scalar values `(p, q, r)`; meaningful for m = 1.
    pub fn scalar(&self, x: f64) -> Result<(f64, f64, f64), CoeffError> {
        let p = self.p.eval_scalar(x)?;
        let r = self.r.eval_scalar(x)?;
        let q = self.q.eval_scalar(x)? - self.shift * r;
        Ok((p, q, r))
    }

    /// True when the effective potential vanishes identically by construction.
    pub fn q_is_zero(&self) -> bool {
        if self.shift != 0.0 {
            return false;
        }
        match self.q.definition() {
            super::field::PiecewiseDef::Segments(segs) => segs.iter().all(|s| {
                s.entries
                    .iter()
                    .all(|e| e.is_constant() && e.eval(0.0).map(|v| v == 0.0).unwrap_or(false))
            }),
            super::field::PiecewiseDef::Windows(_) => false,
        }
    }

    /// Integrate a scalar function of x over `[a, b]`, split at breakpoints.
    pub fn integrate<F>(&self, f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult, QuadError>
    where
        F: Fn(f64) -> Result<f64, CoeffError>,
    {
        let bps = self.breakpoints_in(a, b);
        quad(f, a, b, &bps, opts)
    }

    /// Restrict to `[c, hi)`, keeping `c`.
    pub fn truncated(&self, hi: f64) -> Result<Problem, CoeffError> {
        let mut p = self.clone();
        p.b = Endpoint::Finite(hi);
        if !(hi > self.c) {
            return Err(CoeffError::Invalid(format!("truncation point {hi} <= c")));
        }
        Ok(p)
    }

    /// Left half-line `(a, c]` mapped to `[c, 2c - a)` by `x ↦ 2c − x`.
    pub fn reflected_left(
        name: impl Into<String>,
        a: f64,
        c: f64,
        p: &CoefficientField,
        q: &CoefficientField,
        r: &CoefficientField,
    ) -> Result<Problem, CoeffError> {
        let b = if a.is_finite() {
            Endpoint::Finite(2.0 * c - a)
        } else {
            Endpoint::Infinite
        };
        Problem::new(name, c, b, p.reflect(c)?, q.reflect(c)?, r.reflect(c)?)
    }
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].abs();
    }
    a.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eig(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)];
    }
    a.clone().symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtins::builtin;

    #[test]
    fn shift_moves_q() {
        let p = builtin("free").unwrap();
        let s = p.shifted(5.0);
        assert_eq!(s.eval_q(1.0).unwrap()[(0, 0)], -5.0);
        assert!(!s.q_is_zero());
        assert!(p.q_is_zero());
        assert!(!builtin("quartic_lc").unwrap().q_is_zero());
    }

    #[test]
    fn breakpoints_union() {
        let p = builtin("example_2_7").unwrap();
        let e = std::f64::consts::E;
        assert_eq!(p.breakpoints_in(0.0, 10.0), vec![e]);
        assert!(p.breakpoints_in(3.0, 10.0).is_empty());
    }

    #[test]
    fn integrate_windows() {
        let p = builtin("example_2_8").unwrap();
        let r = p
            .integrate(|x| Ok((p.scalar(x)?.2 / p.scalar(x)?.0).sqrt()), 2.0, 3.0, QuadOptions::with_tol(1e-13))
            .unwrap();
        assert!((r.value - (2.5f64 / 2.0).ln()).abs() < 1e-12);
    }
}
