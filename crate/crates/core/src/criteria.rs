//! Limit-point criteria: the integral test `∫ √(r/p) = ∞`, the growth test
//! `ess sup_{(ρ/2, ρ)} ‖R^{-1/2} P R^{-1/2}‖ = O(ρ²)`, and the value of the
//! cutoff-derivative condition for a rescaled smoothstep profile.
//!
//! The essential supremum is taken with respect to the measure `r dx`: points
//! where the weight vanishes are ignored. The plain Lebesgue value is reported
//! next to it and differs only when the weight vanishes on a set of positive
//! length.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{CoeffError, FieldKind, Problem, QuadError, QuadOptions, SegmentView};
use crate::proofreplay::smoothstep5_derivative;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Coefficient(#[from] CoeffError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("this criterion needs a scalar problem (m = 1), got m = {0}")]
    NotScalar(usize),
    #[error("{0}")]
    Invalid(String),
}

pub const WEIGHTED_READING: &str =
    "ess sup taken with respect to r dx (points where the weight vanishes are excluded); Lebesgue value reported alongside";

// ---------------------------------------------------------------------------
// integral test

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceVerdict {
    Diverges,
    Converges,
    Undecided,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DivergenceOptions {
    pub quad_tol: f64,
    /// Smallest block increment still counted as divergent growth.
    pub delta_min: f64,
    /// Largest ratio of successive increments accepted as geometric decay.
    pub ratio_max: f64,
    /// Bound on the extrapolated remaining tail for `Converges`.
    pub tail_tol: f64,
    pub window: usize,
}

impl Default for DivergenceOptions {
    fn default() -> Self {
        Self {
            quad_tol: 1e-11,
            delta_min: 1e-3,
            ratio_max: 0.75,
            tail_tol: 1e-2,
            window: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceEstimate {
    pub d: Vec<f64>,
    /// `I(d) = ∫_c^d √(r/p)`.
    pub partial_integrals: Vec<f64>,
    pub increments: Vec<f64>,
    pub verdict: DivergenceVerdict,
    /// Geometric tail model `Δ_last · q / (1 − q)` when the increments decay.
    pub tail_bound: Option<f64>,
    pub decay_ratio: Option<f64>,
}

/// Default ladder `c + 2^k`, `k = 1..=16`.
pub fn hr_ladder(problem: &Problem) -> Vec<f64> {
    crate::dyadic_ladder(problem.c(), 1.0, 1..=16)
}

fn hr_integrand(problem: &Problem) -> impl Fn(f64) -> Result<f64, CoeffError> + '_ {
    move |x| {
        let p = problem.p_field().eval_scalar(x)?;
        let r = problem.r_field().eval_scalar(x)?;
        Ok((r / p).max(0.0).sqrt())
    }
}

/// `∫_a^b √(r/p)` for a scalar problem.
pub fn partial_integral(problem: &Problem, a: f64, b: f64, tol: f64) -> Result<f64, CriteriaError> {
    if problem.m() != 1 {
        return Err(CriteriaError::NotScalar(problem.m()));
    }
    Ok(problem.integrate(hr_integrand(problem), a, b, QuadOptions::with_tol(tol))?.value)
}

/// Integrals of `√(r/p)` over consecutive intervals `[x_i, x_{i+1}]`.
pub fn block_integrals(problem: &Problem, points: &[f64], tol: f64) -> Result<Vec<f64>, CriteriaError> {
    points
        .par_windows(2)
        .map(|w| partial_integral(problem, w[0], w[1], tol))
        .collect()
}

pub fn classify_increments(inc: &[f64], opts: &DivergenceOptions) -> (DivergenceVerdict, Option<f64>, Option<f64>) {
    if inc.len() < opts.window {
        return (DivergenceVerdict::Undecided, None, None);
    }
    let tail = &inc[inc.len() - opts.window..];
    if tail.iter().all(|&d| d >= opts.delta_min) {
        return (DivergenceVerdict::Diverges, None, None);
    }
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    if tail.iter().all(|&d| d > 0.0) && ratios.iter().all(|&q| q <= opts.ratio_max) {
        let q = ratios.iter().cloned().fold(0.0, f64::max);
        let bound = tail[tail.len() - 1] * q / (1.0 - q);
        if bound <= opts.tail_tol {
            return (DivergenceVerdict::Converges, Some(bound), Some(q));
        }
        return (DivergenceVerdict::Undecided, Some(bound), Some(q));
    }
    if tail.iter().all(|&d| d == 0.0) {
        return (DivergenceVerdict::Converges, Some(0.0), None);
    }
    (DivergenceVerdict::Undecided, None, None)
}

pub fn hartman_rellich(problem: &Problem, ladder: &[f64], opts: &DivergenceOptions) -> Result<DivergenceEstimate, CriteriaError> {
    if problem.m() != 1 {
        return Err(CriteriaError::NotScalar(problem.m()));
    }
    let mut points = vec![problem.c()];
    points.extend_from_slice(ladder);
    if points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CriteriaError::Invalid(format!("ladder must increase from c: {ladder:?}")));
    }
    let increments = block_integrals(problem, &points, opts.quad_tol)?;
    let partial_integrals = increments
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    let (verdict, tail_bound, decay_ratio) = classify_increments(&increments, opts);
    Ok(DivergenceEstimate {
        d: ladder.to_vec(),
        partial_integrals,
        increments,
        verdict,
        tail_bound,
        decay_ratio,
    })
}

// ---------------------------------------------------------------------------
// growth test

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupOptions {
    /// Uniform samples per piece (endpoints included).
    pub samples_per_piece: usize,
    /// Total sample budget per block once there are many pieces.
    pub block_budget: usize,
    pub refine_candidates: usize,
}

impl Default for SupOptions {
    fn default() -> Self {
        Self {
            samples_per_piece: 4096,
            block_budget: 1 << 18,
            refine_candidates: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PwSup {
    pub rho: f64,
    /// Sup over the points where the weight is positive; `None` when the
    /// weight vanishes on the whole block.
    pub weighted: Option<f64>,
    /// Plain Lebesgue ess sup; `None` means `+∞` (weight vanishes on a set of
    /// positive length).
    pub lebesgue: Option<f64>,
    /// Total length of pieces on which the weight vanished at every sample.
    pub null_length: f64,
    pub pieces: usize,
}

/// Frozen P and R formulas on one piece.
struct PieceEval<'a> {
    m: usize,
    p: SegmentView<'a>,
    r: SegmentView<'a>,
}

impl PieceEval<'_> {
    /// `‖R^{-1/2} P R^{-1/2}‖` (largest eigenvalue of the pencil `(P, R)`),
    /// or `None` where R is not positive definite.
    fn ratio(&self, x: f64) -> Result<Option<f64>, CoeffError> {
        if self.m == 1 {
            let err = |kind: FieldKind| move |source| CoeffError::Eval { coeff: kind.label(), x, source };
            let p = self.p.entries[0].eval(x).map_err(err(FieldKind::PLike))?;
            let r = self.r.entries[0].eval(x).map_err(err(FieldKind::RLike))?;
            return Ok((r > 0.0).then(|| p / r));
        }
        let p = self.p.eval_matrix(self.m, x, FieldKind::PLike)?;
        let r = self.r.eval_matrix(self.m, x, FieldKind::RLike)?;
        Ok(matrix_ratio(&p, &r))
    }
}

/// Largest eigenvalue of `L⁻¹ P L⁻ᵀ` with `R = LLᵀ`.
pub fn matrix_ratio(p: &DMatrix<f64>, r: &DMatrix<f64>) -> Option<f64> {
    let chol = r.clone().cholesky()?;
    let l = chol.l();
    let linv = l.try_inverse()?;
    let s = &linv * p * linv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    s.symmetric_eigenvalues().max().into()
}

fn golden_max<F: Fn(f64) -> Option<f64>>(f: F, mut a: f64, mut b: f64) -> Option<f64> {
    const G: f64 = 0.618_033_988_749_894_9;
    let mut best = f64::NEG_INFINITY;
    let mut x1 = b - G * (b - a);
    let mut x2 = a + G * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..60 {
        if b - a <= 1e-14 * b.abs().max(1.0) {
            break;
        }
        let v1 = f1.unwrap_or(f64::NEG_INFINITY);
        let v2 = f2.unwrap_or(f64::NEG_INFINITY);
        best = best.max(v1).max(v2);
        if v1 >= v2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - G * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + G * (b - a);
            f2 = f(x2);
        }
    }
    best.is_finite().then_some(best)
}

/// Pieces of the coefficient definitions inside `(lo, hi)`.
fn pieces(problem: &Problem, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![lo];
    pts.extend(problem.breakpoints_in(lo, hi));
    pts.push(hi);
    pts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
}

/// Weighted and Lebesgue ess sup of `‖R^{-1/2} P R^{-1/2}‖` over `(ρ/2, ρ)`.
pub fn pw_sup(problem: &Problem, rho: f64, opts: &SupOptions) -> Result<PwSup, CriteriaError> {
    let (lo, hi) = (0.5 * rho, rho);
    if !(lo >= problem.c()) || !(hi <= problem.b().value()) {
        return Err(CriteriaError::Invalid(format!(
            "block ({lo}, {hi}) is not inside the problem interval"
        )));
    }
    let pcs = pieces(problem, lo, hi);
    let per_piece = if pcs.len() * opts.samples_per_piece <= opts.block_budget {
        opts.samples_per_piece
    } else {
        (opts.block_budget / pcs.len()).max(3)
    };
    let m = problem.m();
    let mut weighted: Option<f64> = None;
    let mut lebesgue_infinite = false;
    let mut null_length = 0.0;
    // (value, piece index, x, spacing)
    let mut top: Vec<(f64, usize, f64, f64)> = Vec::new();
    let views: Vec<PieceEval<'_>> = pcs
        .iter()
        .map(|&(a, b)| {
            let mid = 0.5 * (a + b);
            let view = |kind: FieldKind| {
                let f = if kind == FieldKind::PLike { problem.p_field() } else { problem.r_field() };
                f.segment_at(mid).ok_or(CoeffError::OutOfDomain { coeff: kind.label(), x: mid })
            };
            Ok(PieceEval {
                m,
                p: view(FieldKind::PLike)?,
                r: view(FieldKind::RLike)?,
            })
        })
        .collect::<Result<_, CoeffError>>()?;
    for (idx, (&(a, b), ev)) in pcs.iter().zip(&views).enumerate() {
        let spacing = (b - a) / (per_piece - 1) as f64;
        let mut any_positive = false;
        for i in 0..per_piece {
            let x = if i + 1 == per_piece { b } else { a + spacing * i as f64 };
            match ev.ratio(x)? {
                Some(v) => {
                    any_positive = true;
                    if weighted.is_none_or(|w| v > w) {
                        weighted = Some(v);
                    }
                    if top.len() < opts.refine_candidates || v > top[top.len() - 1].0 {
                        top.push((v, idx, x, spacing));
                        top.sort_by(|p, q| q.0.total_cmp(&p.0));
                        top.truncate(opts.refine_candidates);
                    }
                }
                None => lebesgue_infinite = true,
            }
        }
        if !any_positive {
            null_length += b - a;
        }
    }
    for &(_, idx, x, spacing) in &top {
        let (a, b) = pcs[idx];
        let ev = &views[idx];
        let f = |t: f64| ev.ratio(t).ok().flatten();
        if let Some(v) = golden_max(f, (x - spacing).max(a), (x + spacing).min(b)) {
            if weighted.is_none_or(|w| v > w) {
                weighted = Some(v);
            }
        }
    }
    Ok(PwSup {
        rho,
        weighted,
        lebesgue: if lebesgue_infinite { None } else { weighted },
        null_length,
        pieces: pcs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVerdict {
    #[serde(rename = "satisfies_O_rho2")]
    SatisfiesORho2,
    Violates,
    Undecided,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthOptions {
    pub eps_slope: f64,
    pub tail: usize,
    /// `C_cap = cap_factor × (first tail ratio)`.
    pub cap_factor: f64,
    pub min_samples: usize,
    pub sup: SupOptions,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self {
            eps_slope: 0.01,
            tail: 8,
            cap_factor: 1e3,
            min_samples: 6,
            sup: SupOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthEstimate {
    pub rho: Vec<f64>,
    pub sups: Vec<PwSup>,
    /// `S(ρ)/ρ²` for the weighted reading.
    pub ratios: Vec<Option<f64>>,
    pub slope: Option<f64>,
    pub tail_ratios: Vec<f64>,
    pub c_cap: Option<f64>,
    pub verdict: GrowthVerdict,
    /// Verdict under the Lebesgue reading, when it differs.
    pub lebesgue_verdict: Option<GrowthVerdict>,
    pub reading: &'static str,
}

/// Default samples `ρ = 2^k`, `k = 4..=20`.
pub fn default_rhos() -> Vec<f64> {
    (4..=20).map(|k| 2f64.powi(k)).collect()
}

/// Least-squares slope of `ln s` against `ln ρ`.
pub fn fit_slope(rho: &[f64], s: &[f64]) -> Option<f64> {
    let n = rho.len();
    if n < 2 || s.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn growth_verdict(rho: &[f64], s: &[Option<f64>], opts: &GrowthOptions) -> (GrowthVerdict, Option<f64>, Vec<f64>, Option<f64>) {
    let valid: Vec<(f64, f64)> = rho
        .iter()
        .zip(s)
        .filter_map(|(&r, v)| v.filter(|x| x.is_finite() && *x > 0.0).map(|x| (r, x)))
        .collect();
    let all_finite = s.iter().all(|v| v.is_some());
    if valid.len() < opts.min_samples {
        return (GrowthVerdict::Undecided, None, Vec::new(), None);
    }
    let tail = &valid[valid.len().saturating_sub(opts.tail)..];
    let (tr, ts): (Vec<f64>, Vec<f64>) = tail.iter().cloned().unzip();
    let slope = fit_slope(&tr, &ts);
    let tail_ratios: Vec<f64> = tail.iter().map(|(r, v)| v / (r * r)).collect();
    let cap = opts.cap_factor * tail_ratios[0];
    let verdict = match slope {
        Some(a) if all_finite && a <= 2.0 + opts.eps_slope && tail_ratios.iter().all(|&t| t <= cap) => {
            GrowthVerdict::SatisfiesORho2
        }
        Some(a) if a >= 2.0 + 3.0 * opts.eps_slope && tail_ratios.windows(2).all(|w| w[1] > w[0]) => {
            GrowthVerdict::Violates
        }
        _ => GrowthVerdict::Undecided,
    };
    (verdict, slope, tail_ratios, Some(cap))
}

pub fn pw_growth(problem: &Problem, rhos: &[f64], opts: &GrowthOptions) -> Result<GrowthEstimate, CriteriaError> {
    let sups: Vec<PwSup> = rhos
        .par_iter()
        .map(|&r| pw_sup(problem, r, &opts.sup))
        .collect::<Result<_, _>>()?;
    let weighted: Vec<Option<f64>> = sups.iter().map(|s| s.weighted).collect();
    let (verdict, slope, tail_ratios, c_cap) = growth_verdict(rhos, &weighted, opts);
    let lebesgue_verdict = if sups.iter().any(|s| s.lebesgue != s.weighted) {
        // an infinite value anywhere rules out O(ρ²)
        let leb: Vec<Option<f64>> = sups.iter().map(|s| s.lebesgue).collect();
        Some(if leb.iter().any(|v| v.is_none()) {
            GrowthVerdict::Violates
        } else {
            growth_verdict(rhos, &leb, opts).0
        })
    } else {
        None
    };
    Ok(GrowthEstimate {
        rho: rhos.to_vec(),
        ratios: sups.iter().map(|s| s.weighted.map(|v| v / (s.rho * s.rho))).collect(),
        sups,
        slope,
        tail_ratios,
        c_cap,
        verdict,
        lebesgue_verdict,
        reading: WEIGHTED_READING,
    })
}

impl GrowthEstimate {
    /// CSV with columns `rho,S,S_over_rho2,S_lebesgue`; empty fields mark
    /// missing (weighted) or infinite (Lebesgue) values.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rho,S,S_over_rho2,S_lebesgue")?;
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        for s in &self.sups {
            writeln!(
                w,
                "{:e},{},{},{}",
                s.rho,
                f(s.weighted),
                f(s.weighted.map(|v| v / (s.rho * s.rho))),
                f(s.lebesgue)
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// cutoff-derivative condition

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CutoffConditionValue {
    pub rho: f64,
    /// `ρ⁻¹ ∫_c^{ρ/2} p⁻¹` and `ρ⁻¹ ∫_c^{ρ} p⁻¹`: the profile runs from 1 to 0
    /// between these arguments.
    pub s_start: f64,
    pub s_end: f64,
    pub value: f64,
}

/// `sup_{(ρ/2, ρ)} (pr)⁻¹ [f'_ρ(s(x))]²` with `s(x) = ρ⁻¹ ∫_c^x p⁻¹` and
/// `f_ρ(s) = 1 − S₅((s − s_start)/(s_end − s_start))`, the quintic smoothstep
/// rescaled so that `f_ρ(s_start) = 1`, `f_ρ(s_end) = 0`. Points with `r = 0`
/// are excluded as in the growth test.
pub fn cutoff_condition(problem: &Problem, rho: f64, samples: usize, tol: f64) -> Result<CutoffConditionValue, CriteriaError> {
    if problem.m() != 1 {
        return Err(CriteriaError::NotScalar(problem.m()));
    }
    let c = problem.c();
    let (lo, hi) = (0.5 * rho, rho);
    if !(lo > c) || !(hi < problem.b().value()) {
        return Err(CriteriaError::Invalid(format!("block ({lo}, {hi}) must lie in (c, b)")));
    }
    let pinv = |x: f64| -> Result<f64, CoeffError> { Ok(1.0 / problem.p_field().eval_scalar(x)?) };
    let q = QuadOptions::with_tol(tol);
    let s_start = problem.integrate(pinv, c, lo, q)?.value / rho;
    let n = samples.max(2);
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let incs: Vec<f64> = xs
        .par_windows(2)
        .map(|w| problem.integrate(pinv, w[0], w[1], q).map(|r| r.value))
        .collect::<Result<_, _>>()?;
    let s_end = s_start + incs.iter().sum::<f64>() / rho;
    let width = s_end - s_start;
    let mut s = s_start;
    let mut value = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        if i > 0 {
            s += incs[i - 1] / rho;
        }
        let (p, _, r) = problem.scalar(x)?;
        let (p, r) = (p, r);
        if !(r > 0.0) {
            continue;
        }
        let t = ((s - s_start) / width).clamp(0.0, 1.0);
        let df = smoothstep5_derivative(t) / width;
        value = value.max(df * df / (p * r));
    }
    Ok(CutoffConditionValue {
        rho,
        s_start,
        s_end,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin;
    use std::f64::consts::E;

    #[test]
    fn integral_test_log_weight() {
        let p = builtin("example_2_7").unwrap();
        for k in [2, 4, 8] {
            let d = E.powi(k);
            let got = partial_integral(&p, E, d, 1e-12).unwrap();
            let want = 2.0 * ((k as f64).sqrt() - 1.0);
            assert!((got / want - 1.0).abs() < 1e-9, "{got} vs {want}");
        }
        let est = hartman_rellich(&p, &hr_ladder(&p), &DivergenceOptions::default()).unwrap();
        assert_eq!(est.verdict, DivergenceVerdict::Diverges);
        // I(e) = ∫_0^e (1/e) = 1
        assert!((partial_integral(&p, 0.0, E, 1e-12).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integral_test_windows() {
        let p = builtin("example_2_8").unwrap();
        let pts: Vec<f64> = (1..=21).map(|n| n as f64).collect();
        let blocks = block_integrals(&p, &pts, 1e-12).unwrap();
        for (i, b) in blocks.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!((b - (1.0 + 1.0 / (n * n)).ln()).abs() < 1e-10);
        }
        let est = hartman_rellich(&p, &hr_ladder(&p), &DivergenceOptions::default()).unwrap();
        assert_eq!(est.verdict, DivergenceVerdict::Converges, "{:?}", est.increments);
        let free = builtin("free").unwrap();
        let est = hartman_rellich(&free, &hr_ladder(&free), &DivergenceOptions::default()).unwrap();
        assert_eq!(est.verdict, DivergenceVerdict::Diverges);
        assert!((est.partial_integrals[3] - 16.0).abs() < 1e-9);
    }

    #[test]
    fn sup_values() {
        let o = SupOptions::default();
        let e7 = builtin("example_2_7").unwrap();
        let rho = E.powi(4);
        let s = pw_sup(&e7, rho, &o).unwrap();
        assert!((s.weighted.unwrap() / (4.0 * E.powi(8)) - 1.0).abs() < 1e-13);
        assert_eq!(s.lebesgue, s.weighted);

        let e8 = builtin("example_2_8").unwrap();
        let s = pw_sup(&e8, 8.0, &o).unwrap();
        // windows [n, n+1/n) inside (4, 8): the largest point approached is 7 + 1/7
        let want = (7.0f64 + 1.0 / 7.0).powi(2);
        assert!((s.weighted.unwrap() - want).abs() < 1e-9, "{:?}", s);
        assert_eq!(s.lebesgue, None);
        assert!(s.null_length > 3.0);

        let mf = builtin("matrix_free").unwrap();
        assert!((pw_sup(&mf, 32.0, &o).unwrap().weighted.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_matrix_paths_agree() {
        let p = DMatrix::from_element(1, 1, 3.7);
        let r = DMatrix::from_element(1, 1, 0.23);
        let got = matrix_ratio(&p, &r).unwrap();
        assert!((got - 3.7 / 0.23).abs() <= 4.0 * f64::EPSILON * got);
        let p2 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        // R^{-1/2} P R^{-1/2} = [[2, 0.25], [0.25, 0.25]]
        let want = 1.125 + (0.875f64 * 0.875 + 0.0625).sqrt();
        assert!((matrix_ratio(&p2, &r2).unwrap() - want).abs() < 1e-14);
        assert!(matrix_ratio(&p2, &DMatrix::zeros(2, 2)).is_none());
    }

    #[test]
    fn growth_verdicts() {
        let o = GrowthOptions::default();
        let free = builtin("free").unwrap();
        let g = pw_growth(&free, &default_rhos(), &o).unwrap();
        assert_eq!(g.verdict, GrowthVerdict::SatisfiesORho2);
        assert!(g.slope.unwrap().abs() < 1e-9);

        let e7 = builtin("example_2_7").unwrap();
        let g = pw_growth(&e7, &default_rhos(), &o).unwrap();
        assert_eq!(g.verdict, GrowthVerdict::Violates);
        assert!(g.tail_ratios.windows(2).all(|w| w[1] > w[0]));
        for (s, r) in g.sups.iter().zip(&g.rho) {
            assert!((s.weighted.unwrap() / (r * r * r.ln()) - 1.0).abs() < 1e-12);
        }
        assert!(g.lebesgue_verdict.is_none());
    }

    #[test]
    fn cutoff_condition_free() {
        let free = builtin("free").unwrap();
        for rho in [8.0, 16.0, 64.0] {
            let v = cutoff_condition(&free, rho, 4097, 1e-12).unwrap();
            assert!((v.s_start - 0.5).abs() < 1e-12 && (v.s_end - 1.0).abs() < 1e-12);
            assert!((v.value - 14.0625).abs() < 1e-9, "{}", v.value);
        }
        let e7 = builtin("example_2_7").unwrap();
        let v = cutoff_condition(&e7, E.powi(4), 4097, 1e-12).unwrap();
        assert!(v.value.is_finite() && v.value > 0.0);
    }
}
