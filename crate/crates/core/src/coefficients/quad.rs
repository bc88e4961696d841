//! Global adaptive Gauss–Kronrod (7/15) quadrature with forced splitting at
//! coefficient breakpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use super::CoeffError;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error(transparent)]
    Coefficient(#[from] CoeffError),
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("no convergence on [{a}, {b}] after {intervals} intervals: value {value}, error {error}")]
    NoConvergence {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
        intervals: usize,
    },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Used both as absolute and relative tolerance.
    pub tol: f64,
    /// Extra bisections allowed beyond the breakpoint pieces.
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_subdivisions: 100_000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<Piece, QuadError>
where
    F: Fn(f64) -> Result<f64, CoeffError>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64, QuadError> {
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { x })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = eval(center - dx)? + eval(center + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok(Piece {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Integrate `f` over `[a, b]` (finite), never placing a rule across any of
/// `breakpoints`. Gauss–Kronrod nodes are interior, so the integrand is
/// never sampled exactly at a breakpoint.
pub fn quad<F>(f: F, a: f64, b: f64, breakpoints: &[f64], opts: QuadOptions) -> Result<QuadResult, QuadError>
where
    F: Fn(f64) -> Result<f64, CoeffError>,
{
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let mut pts: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    pts.push(a);
    pts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut heap = BinaryHeap::with_capacity(pts.len());
    let (mut total, mut err) = (0.0, 0.0);
    for w in pts.windows(2) {
        let p = gk15(&f, w[0], w[1])?;
        total += p.value;
        err += p.error;
        heap.push(p);
    }
    let limit = heap.len() + opts.max_subdivisions;
    loop {
        if err <= opts.tol * total.abs().max(1.0) {
            break;
        }
        if heap.len() >= limit {
            return Err(QuadError::NoConvergence {
                a,
                b,
                value: total,
                error: err,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval exhausted at floating-point resolution
            return Err(QuadError::NoConvergence {
                a,
                b,
                value: total,
                error: err,
                intervals: heap.len() + 1,
            });
        }
        let l = gk15(&f, worst.a, mid)?;
        let r = gk15(&f, mid, worst.b)?;
        total += l.value + r.value - worst.value;
        err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
    }
    // Re-sum to shed the cancellation accumulated by the running updates.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadResult {
        value,
        error,
        intervals: heap.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> Result<f64, CoeffError> {
        move |x| Ok(f(x))
    }

    #[test]
    fn log_antiderivative() {
        let e = std::f64::consts::E;
        let r = quad(ok(|x: f64| 1.0 / (x * x.ln().sqrt())), e, e.powi(4), &[], QuadOptions::with_tol(1e-12)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn zero_and_polynomials() {
        let r = quad(ok(|_| 0.0), 0.0, 1.0, &[], QuadOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        let r = quad(ok(|x: f64| x.powi(5)), 0.0, 2.0, &[], QuadOptions::default()).unwrap();
        assert!((r.value - 64.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn respects_breakpoints() {
        // step at 0.3 is integrated exactly when the breakpoint is declared
        let f = ok(|x: f64| if x < 0.3 { 1.0 } else { 0.0 });
        let r = quad(&f, 0.0, 1.0, &[0.3], QuadOptions::with_tol(1e-14)).unwrap();
        assert_eq!(r.intervals, 2);
        assert!((r.value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn divergent_integrand_reports() {
        let r = quad(ok(|x: f64| 1.0 / (x - 0.5).abs()), 0.0, 1.0, &[], QuadOptions { tol: 1e-10, max_subdivisions: 2000 });
        assert!(matches!(r, Err(QuadError::NoConvergence { .. }) | Err(QuadError::NonFinite { .. })));
    }
}
