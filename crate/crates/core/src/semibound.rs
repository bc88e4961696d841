//! Lower-bound probe: Dirichlet truncations of the operator to `[c, d]`,
//! discretised by the standard three-point scheme, and the lowest
//! generalized eigenvalue as `d` grows.
//!
//! The lowest eigenvalue is bracketed by inertia counts of `A − σB` (block
//! LDLᵀ, Sylvester's law) and polished by shifted inverse iteration. With the
//! shift just below the bracket `A − σB` is positive definite, so the block
//! factorisation needs no pivoting.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{CoeffError, PiecewiseDef, Problem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemiboundError {
    #[error(transparent)]
    Coefficient(#[from] CoeffError),
    #[error("inverse iteration at d = {d} stopped with relative residual {residual:e}")]
    NoConvergence { d: f64, residual: f64 },
    #[error("could not bracket the lowest eigenvalue at d = {d}")]
    Bracket { d: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// Block-tridiagonal pencil `(A, B)` for the Dirichlet problem on `[c, d]`.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub c: f64,
    pub d: f64,
    pub n: usize,
    pub h: f64,
    pub m: usize,
    /// Diagonal blocks of `A` (n − 1 of them).
    pub diag: Vec<DMatrix<f64>>,
    /// `off[i]` couples unknown `i` to `i + 1`; symmetric blocks.
    pub off: Vec<DMatrix<f64>>,
    /// Diagonal blocks of `B`.
    pub b: Vec<DMatrix<f64>>,
}

pub fn discretize(problem: &Problem, d: f64, n: usize) -> Result<Discretization, SemiboundError> {
    let c = problem.c();
    if n < 8 {
        return Err(SemiboundError::Invalid(format!("grid size {n} < 8")));
    }
    if !(d > c) || !(d < problem.b().value()) {
        return Err(SemiboundError::Invalid(format!("d = {d} outside ({c}, {})", problem.b().value())));
    }
    let h = (d - c) / n as f64;
    let m = problem.m();
    let x = |j: f64| c + j * h;
    // P at half points x_{1/2} .. x_{n-1/2}
    let half: Vec<DMatrix<f64>> = (0..n)
        .map(|j| problem.eval_p(x(j as f64 + 0.5)))
        .collect::<Result<_, _>>()?;
    let mut diag = Vec::with_capacity(n - 1);
    let mut b = Vec::with_capacity(n - 1);
    for j in 1..n {
        let loc = problem.local(x(j as f64))?;
        diag.push((&half[j - 1] + &half[j]) / h + loc.q * h);
        b.push(loc.r * h);
    }
    let off = (1..n - 1).map(|j| -&half[j] / h).collect();
    Ok(Discretization { c, d, n, h, m, diag, off, b })
}

fn count_negative(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 1 {
        return usize::from(a[(0, 0)] < 0.0);
    }
    a.clone().symmetric_eigenvalues().iter().filter(|v| **v < 0.0).count()
}

fn guarded_inverse(a: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    if a.nrows() == 1 {
        let v = a[(0, 0)];
        let v = if v.abs() < f64::EPSILON * scale { f64::EPSILON * scale } else { v };
        return DMatrix::from_element(1, 1, 1.0 / v);
    }
    a.clone().try_inverse().unwrap_or_else(|| {
        let n = a.nrows();
        (a + DMatrix::identity(n, n) * (f64::EPSILON * scale))
            .try_inverse()
            .unwrap_or_else(|| DMatrix::identity(n, n) / (f64::EPSILON * scale))
    })
}

impl Discretization {
    pub fn dim(&self) -> usize {
        self.m * (self.n - 1)
    }

    fn shifted_block(&self, i: usize, sigma: f64) -> DMatrix<f64> {
        &self.diag[i] - &self.b[i] * sigma
    }

    fn scale(&self) -> f64 {
        self.diag.iter().map(|d| d.amax()).fold(1.0, f64::max)
    }

    /// Number of generalized eigenvalues below `sigma` (inertia of `A − σB`).
    pub fn count_below(&self, sigma: f64) -> usize {
        let scale = self.scale() * (1.0 + sigma.abs());
        let mut neg = 0;
        let mut dprev: Option<DMatrix<f64>> = None;
        for i in 0..self.diag.len() {
            let mut t = self.shifted_block(i, sigma);
            if let Some(dp) = &dprev {
                let cpl = &self.off[i - 1];
                t -= cpl.transpose() * guarded_inverse(dp, scale) * cpl;
            }
            neg += count_negative(&t);
            dprev = Some(t);
        }
        neg
    }

    /// `A v` and `B v` for a flat vector.
    pub fn apply(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let blocks = self.diag.len();
        let mut av = vec![0.0; v.len()];
        let mut bv = vec![0.0; v.len()];
        let seg = |i: usize| nalgebra::DVectorView::from_slice(&v[i * m..(i + 1) * m], m);
        for i in 0..blocks {
            let mut a = &self.diag[i] * seg(i);
            if i > 0 {
                a += self.off[i - 1].transpose() * seg(i - 1);
            }
            if i + 1 < blocks {
                a += &self.off[i] * seg(i + 1);
            }
            let bb = &self.b[i] * seg(i);
            av[i * m..(i + 1) * m].copy_from_slice(a.as_slice());
            bv[i * m..(i + 1) * m].copy_from_slice(bb.as_slice());
        }
        (av, bv)
    }

    /// Block LDLᵀ of `A − σB`, valid when it is positive definite.
    fn factor(&self, sigma: f64) -> Vec<DMatrix<f64>> {
        let scale = self.scale() * (1.0 + sigma.abs());
        let mut dinv: Vec<DMatrix<f64>> = Vec::with_capacity(self.diag.len());
        for i in 0..self.diag.len() {
            let mut t = self.shifted_block(i, sigma);
            if i > 0 {
                let cpl = &self.off[i - 1];
                t -= cpl.transpose() * &dinv[i - 1] * cpl;
            }
            dinv.push(guarded_inverse(&t, scale));
        }
        dinv
    }

    /// Solve `(A − σB) x = rhs` with a factorisation from [`Self::factor`].
    fn solve(&self, dinv: &[DMatrix<f64>], rhs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let blocks = self.diag.len();
        // forward: w_i = r_i − Cᵀ_{i−1} D⁻¹_{i−1} w_{i−1}
        let mut w: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(blocks);
        for i in 0..blocks {
            let mut wi = nalgebra::DVector::from_column_slice(&rhs[i * m..(i + 1) * m]);
            if i > 0 {
                wi -= self.off[i - 1].transpose() * (&dinv[i - 1] * &w[i - 1]);
            }
            w.push(wi);
        }
        // backward: x_i = D⁻¹_i (w_i − C_i x_{i+1})
        let mut x = vec![0.0; rhs.len()];
        let mut next: Option<nalgebra::DVector<f64>> = None;
        for i in (0..blocks).rev() {
            let mut wi = w[i].clone();
            if let Some(xn) = &next {
                wi -= &self.off[i] * xn;
            }
            let xi = &dinv[i] * wi;
            x[i * m..(i + 1) * m].copy_from_slice(xi.as_slice());
            next = Some(xi);
        }
        x
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Eigenpair {
    pub lambda: f64,
    /// `‖Ay − λBy‖ / (‖By‖ max(1, |λ|))`.
    pub residual: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub vector: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lowest generalized eigenvalue of the pencil.
pub fn lambda_min(disc: &Discretization) -> Result<Eigenpair, SemiboundError> {
    // bracket
    let mut lo = -1.0;
    while disc.count_below(lo) > 0 {
        lo *= 4.0;
        if lo < -1e300 {
            return Err(SemiboundError::Bracket { d: disc.d });
        }
    }
    let mut hi = 1.0;
    while disc.count_below(hi) == 0 {
        hi *= 4.0;
        if hi > 1e300 {
            return Err(SemiboundError::Bracket { d: disc.d });
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if disc.count_below(mid) > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // inverse iteration just below the bracket
    let sigma = lo - 1e-9 * lo.abs().max(1.0);
    let dinv = disc.factor(sigma);
    let dim = disc.dim();
    let mut y: Vec<f64> = (0..dim).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let mut best = Eigenpair {
        lambda: lo,
        residual: f64::INFINITY,
        iterations: 0,
        vector: Vec::new(),
    };
    for it in 1..=60 {
        let (_, by) = disc.apply(&y);
        let mut next = disc.solve(&dinv, &by);
        let nn = norm(&next);
        if !(nn > 0.0) || !nn.is_finite() {
            break;
        }
        next.iter_mut().for_each(|v| *v /= nn);
        y = next;
        let (ay, by) = disc.apply(&y);
        let yby = dot(&y, &by);
        if yby <= 0.0 {
            continue;
        }
        let lambda = dot(&y, &ay) / yby;
        let r: Vec<f64> = ay.iter().zip(&by).map(|(a, b)| a - lambda * b).collect();
        let residual = norm(&r) / (norm(&by) * lambda.abs().max(1.0));
        if residual < best.residual {
            best = Eigenpair {
                lambda,
                residual,
                iterations: it,
                vector: y.clone(),
            };
        }
        if residual <= 1e-11 {
            break;
        }
    }
    if best.residual > 1e-8 {
        return Err(SemiboundError::NoConvergence {
            d: disc.d,
            residual: best.residual,
        });
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemiboundVerdict {
    BoundedBelow,
    UnboundedBelow,
    Undecided,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SemiboundOptions {
    pub min_n: usize,
    pub points_per_unit: f64,
    /// Absolute tolerance of the Cauchy test on the last steps.
    pub cauchy_tol: f64,
    pub floor: f64,
    pub window: usize,
    /// Largest ratio of successive decrements accepted as geometric decay.
    pub decel_ratio: f64,
}

impl Default for SemiboundOptions {
    fn default() -> Self {
        Self {
            min_n: 1024,
            points_per_unit: 64.0,
            cauchy_tol: 1e-3,
            floor: -1e6,
            window: 3,
            decel_ratio: 0.75,
        }
    }
}

impl SemiboundOptions {
    pub fn grid_size(&self, c: f64, d: f64) -> usize {
        self.min_n.max((self.points_per_unit * (d - c)).ceil() as usize)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiboundReport {
    pub d_ladder: Vec<f64>,
    pub grid_sizes: Vec<usize>,
    pub lambda_min: Vec<f64>,
    pub residuals: Vec<f64>,
    pub verdict: SemiboundVerdict,
    pub bound_estimate: Option<f64>,
    /// Set when Q − shift·R is a constant positive semidefinite matrix, so
    /// the quadratic form is nonnegative whatever the numerics say.
    pub form_positivity: bool,
    pub warnings: Vec<String>,
    pub note: &'static str,
}

/// Default ladder `c + 2^k`, `k = 2..=8`.
pub fn default_ladder(problem: &Problem) -> Vec<f64> {
    let b = problem.b().value();
    crate::dyadic_ladder(problem.c(), 1.0, 2..=8)
        .into_iter()
        .filter(|&d| d < b)
        .collect()
}

fn constant_psd_potential(problem: &Problem) -> bool {
    if problem.shift() > 0.0 {
        return false;
    }
    let PiecewiseDef::Segments(segs) = problem.q_field().definition() else {
        return false;
    };
    let m = problem.m();
    segs.iter().all(|s| {
        if !s.entries.iter().all(|e| e.is_constant()) {
            return false;
        }
        let vals: Result<Vec<f64>, _> = s.entries.iter().map(|e| e.eval(0.0)).collect();
        match vals {
            Ok(v) => crate::coefficients::sym_min_eig(&DMatrix::from_row_slice(m, m, &v)) >= 0.0,
            Err(_) => false,
        }
    })
}

/// Classify a `λ_min` sequence.
pub fn classify_sequence(lams: &[f64], opts: &SemiboundOptions) -> (SemiboundVerdict, Option<f64>) {
    let n = lams.len();
    if lams.iter().any(|&l| l < opts.floor) {
        return (SemiboundVerdict::UnboundedBelow, None);
    }
    if n < opts.window + 1 {
        return (SemiboundVerdict::Undecided, None);
    }
    // decrements δ_k = λ_{k-1} − λ_k
    let dec: Vec<f64> = lams.windows(2).map(|w| w[0] - w[1]).collect();
    let tail = &dec[dec.len() - opts.window..];
    let last = lams[n - 1];
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    let geometric = tail.iter().all(|&d| d > 0.0) && ratios.iter().all(|&r| r <= opts.decel_ratio);
    if geometric {
        let r = ratios.iter().cloned().fold(0.0, f64::max);
        return (SemiboundVerdict::BoundedBelow, Some(last - tail[tail.len() - 1] * r / (1.0 - r)));
    }
    if tail.iter().all(|d| d.abs() <= opts.cauchy_tol) {
        return (SemiboundVerdict::BoundedBelow, Some(last));
    }
    if tail.iter().all(|&d| d > opts.cauchy_tol) && ratios.iter().all(|&r| r >= 2.0) {
        return (SemiboundVerdict::UnboundedBelow, None);
    }
    (SemiboundVerdict::Undecided, None)
}

pub fn semibound_verdict(problem: &Problem, ladder: &[f64], opts: &SemiboundOptions) -> Result<SemiboundReport, SemiboundError> {
    let c = problem.c();
    let sizes: Vec<usize> = ladder.iter().map(|&d| opts.grid_size(c, d)).collect();
    let pairs: Vec<Eigenpair> = ladder
        .par_iter()
        .zip(&sizes)
        .map(|(&d, &n)| lambda_min(&discretize(problem, d, n)?))
        .collect::<Result<_, _>>()?;
    let lams: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
    let mut warnings = Vec::new();
    for (k, w) in lams.windows(2).enumerate() {
        let slack = 1e-6 * w[0].abs().max(1.0);
        if w[1] > w[0] + slack {
            warnings.push(format!(
                "λ_min increased from {} (d = {}) to {} (d = {}); expected monotone decrease",
                w[0],
                ladder[k],
                w[1],
                ladder[k + 1]
            ));
        }
    }
    let (mut verdict, mut bound) = classify_sequence(&lams, opts);
    let form_positivity = constant_psd_potential(problem);
    if form_positivity {
        match verdict {
            SemiboundVerdict::UnboundedBelow => {
                warnings.push("numerics suggest unboundedness although the form is nonnegative".into())
            }
            SemiboundVerdict::Undecided => {
                verdict = SemiboundVerdict::BoundedBelow;
                bound = Some(0.0);
            }
            SemiboundVerdict::BoundedBelow => {}
        }
    }
    Ok(SemiboundReport {
        d_ladder: ladder.to_vec(),
        grid_sizes: sizes,
        lambda_min: lams,
        residuals: pairs.iter().map(|p| p.residual).collect(),
        verdict,
        bound_estimate: bound,
        form_positivity,
        warnings,
        note: "Dirichlet truncation to [c, d] plus discretisation; convergence of λ_min(d) to the bound of the minimal operator is assumed, not proved",
    })
}

impl SemiboundReport {
    /// CSV with columns `d,n,lambda_min,residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "d,n,lambda_min,residual")?;
        for i in 0..self.d_ladder.len() {
            writeln!(
                w,
                "{:e},{},{:e},{:e}",
                self.d_ladder[i], self.grid_sizes[i], self.lambda_min[i], self.residuals[i]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin;
    use std::f64::consts::PI;

    #[test]
    fn free_dirichlet_ground_state() {
        let p = builtin("free").unwrap();
        let e = lambda_min(&discretize(&p, PI, 2048).unwrap()).unwrap();
        assert!((e.lambda - 1.0).abs() < 5e-4, "{}", e.lambda);
        assert!(e.residual <= 1e-8);
        let e = lambda_min(&discretize(&p, 1.0, 4096).unwrap()).unwrap();
        assert!((e.lambda - PI * PI).abs() < 1e-4);
    }

    #[test]
    fn pencil_structure() {
        let p = builtin("free").unwrap();
        let d = discretize(&p, 2.0, 16).unwrap();
        let h = d.h;
        assert!((d.diag[3][(0, 0)] * h - 2.0).abs() < 1e-12);
        assert!((d.off[3][(0, 0)] * h + 1.0).abs() < 1e-12);
        assert!((d.b[3][(0, 0)] - h).abs() < 1e-15);
        // exact inertia for the second-difference matrix: eigenvalues (4/h²) sin²(kπh/(2L))
        let ev = |k: usize| (4.0 / (h * h)) * (k as f64 * PI / 32.0).sin().powi(2);
        assert_eq!(d.count_below(0.5 * (ev(3) + ev(4))), 3);
        assert_eq!(d.count_below(ev(1) * 0.99), 0);
    }

    #[test]
    fn shift_moves_spectrum() {
        let p = builtin("free").unwrap();
        let a = lambda_min(&discretize(&p, 3.0, 1024).unwrap()).unwrap().lambda;
        // Q − (−5)R = Q + 5R
        let b = lambda_min(&discretize(&p.shifted(-5.0), 3.0, 1024).unwrap()).unwrap().lambda;
        assert!((b - a - 5.0).abs() < 1e-9);
    }

    #[test]
    fn matrix_free_degenerate() {
        let p = builtin("matrix_free").unwrap();
        let d = discretize(&p, PI, 2048).unwrap();
        let e = lambda_min(&d).unwrap();
        assert!((e.lambda - 1.0).abs() < 5e-4);
        // doubly degenerate
        assert_eq!(d.count_below(e.lambda + 1e-6), 2);
    }

    #[test]
    fn quartic_bump_oracle() {
        // Rayleigh quotient of a bump at x = 5 already lies far below −100
        let bump = |x: f64| if (x - 5.0).abs() < 0.5 { (PI * (x - 5.0)).cos().powi(2) } else { 0.0 };
        let dbump = |x: f64| if (x - 5.0).abs() < 0.5 { -PI * (2.0 * PI * (x - 5.0)).sin() } else { 0.0 };
        let n = 20000;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let x = 4.5 + (i as f64 + 0.5) / n as f64;
            num += (dbump(x).powi(2) - x.powi(4) * bump(x).powi(2)) / n as f64;
            den += bump(x).powi(2) / n as f64;
        }
        let rq = num / den;
        assert!(rq < -100.0);
        let p = builtin("quartic_lc").unwrap();
        let e = lambda_min(&discretize(&p, 6.0, 4096).unwrap()).unwrap();
        assert!(e.lambda <= rq + 1e-6, "{} vs {rq}", e.lambda);
    }

    #[test]
    fn verdicts() {
        let opts = SemiboundOptions::default();
        let free = builtin("free").unwrap();
        let r = semibound_verdict(&free, &default_ladder(&free), &opts).unwrap();
        assert_eq!(r.verdict, SemiboundVerdict::BoundedBelow);
        assert!(r.bound_estimate.unwrap().abs() < 1e-3);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);

        let q = builtin("quartic_lc").unwrap();
        let r = semibound_verdict(&q, &default_ladder(&q), &opts).unwrap();
        assert_eq!(r.verdict, SemiboundVerdict::UnboundedBelow);

        let e7 = builtin("example_2_7").unwrap();
        let r = semibound_verdict(&e7, &default_ladder(&e7), &opts).unwrap();
        assert_eq!(r.verdict, SemiboundVerdict::BoundedBelow);
        assert!(r.lambda_min.iter().all(|&l| l >= -1e-6));
        assert!(r.form_positivity);
    }

    #[test]
    fn sequence_rules() {
        let o = SemiboundOptions::default();
        assert_eq!(classify_sequence(&[1.0, 0.5, 0.4, 0.4, 0.4, 0.4], &o).0, SemiboundVerdict::BoundedBelow);
        assert_eq!(classify_sequence(&[0.0, -1.0, -3.0, -9.0, -30.0], &o).0, SemiboundVerdict::UnboundedBelow);
        assert_eq!(classify_sequence(&[0.0, -1.0, -2.0, -3.0, -4.0], &o).0, SemiboundVerdict::Undecided);
        assert_eq!(classify_sequence(&[0.0, -2e6], &o).0, SemiboundVerdict::UnboundedBelow);
    }
}
