//! Limit-point / limit-circle classification at `b = ∞` by counting
//! square-integrable solutions of `L U = z U` at nonreal `z`.
//!
//! A full `2m`-column fundamental system is integrated from orthonormal data
//! at `c`, with Gram checkpoints on a dyadic ladder. By Courant–Fischer the
//! number of L² solutions equals the number of eigenvalues of
//! `G(b) = ∫_c^b Y* R Y` that stay bounded as `b → ∞`; the others diverge.
//! Each sorted eigenvalue branch is tested for geometrically decaying
//! increments (bounded) or persisting ones (divergent). Small eigenvalues are
//! recomputed on their own eigenspace so exponential growth elsewhere does
//! not swamp them. For `m = 1` the Weyl disk radii are attached as a
//! cross-check.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::Problem;
use crate::linalg::{c, hermitian_eigen, CMat, C64};
use crate::odesolver::{Integrator, OdeError, OdeOptions, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeylError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("spectral parameter must be nonreal, got {0}")]
    RealZ(C64),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointLabel {
    LimitPoint,
    LimitCircle,
    Intermediate,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionClass {
    L2,
    NotL2,
    Undecided,
}

/// One eigenvalue branch `λ_j(b)` of the Gram matrix `∫_c^b Y* R Y`,
/// eigenvalues sorted ascending at every ladder point.
#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    /// `ln λ_j(b_k)` per ladder point.
    pub log_eigenvalues: Vec<f64>,
    /// `ln(λ_j(b_k) − λ_j(b_{k−1}))` per ladder block (`-inf` when the
    /// increment is below the resolution floor).
    pub log_increments: Vec<f64>,
    /// Successive increment ratios over the decision window.
    pub ratios: Vec<f64>,
    /// Mean exponential rate `Δ ln(increment) / Δ(block start)` over the window.
    pub exponent: f64,
    pub class: DirectionClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationVerdict {
    pub problem: String,
    pub m: usize,
    pub z: [f64; 2],
    /// Ladder points actually used.
    pub ladder: Vec<f64>,
    /// Requested points dropped because the frame scale left the resolvable range.
    pub truncated: Vec<f64>,
    pub branches: Vec<Branch>,
    pub n_estimate: Option<usize>,
    pub label: EndpointLabel,
    /// Weyl disk radii at the ladder points (m = 1).
    pub radii: Option<Vec<f64>>,
    /// Disk-based verdict (m = 1): radii shrinking geometrically → limit point.
    pub disk_label: Option<EndpointLabel>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct WeylOptions {
    pub z: C64,
    pub ode: OdeOptions,
    /// Ladder points beyond which the frame log-scale exceeds this are
    /// dropped: L² directions are resolved by cancellation with error about
    /// `ε e^{s}` that must stay well below their size `e^{-s}`.
    pub max_log_scale: f64,
    pub window: usize,
    pub l2_ratio: f64,
    pub non_l2_ratio: f64,
}

impl Default for WeylOptions {
    fn default() -> Self {
        Self {
            z: c(0.0, 1.0),
            ode: OdeOptions::with_tol(1e-10),
            max_log_scale: 16.0,
            window: 3,
            l2_ratio: 0.75,
            non_l2_ratio: 0.9,
        }
    }
}

/// Default ladder `c + 2^k`, `k = 0..=6`.
pub fn default_ladder(problem: &Problem) -> Vec<f64> {
    let b = problem.b().value();
    crate::dyadic_ladder(problem.c(), 1.0, 0..=6)
        .into_iter()
        .filter(|&d| d < b)
        .collect()
}

/// Integrate the full frame with checkpoints; returns the trajectory, the
/// ladder points used and those dropped.
pub fn integrate_frame(problem: &Problem, ladder: &[f64], opts: &WeylOptions) -> Result<(Trajectory, Vec<f64>, Vec<f64>), WeylError> {
    if opts.z.im == 0.0 {
        return Err(WeylError::RealZ(opts.z));
    }
    let mut prev = problem.c();
    for &b in ladder {
        if !(b > prev) || !(b < problem.b().value()) {
            return Err(WeylError::Invalid(format!("ladder must increase inside (c, b): {ladder:?}")));
        }
        prev = b;
    }
    let m = problem.m();
    let mut u0 = CMat::zeros(m, 2 * m);
    let mut v0 = CMat::zeros(m, 2 * m);
    for i in 0..m {
        u0[(i, i)] = c(1.0, 0.0);
        v0[(i, m + i)] = c(1.0, 0.0);
    }
    let ode = OdeOptions {
        track_gram: true,
        store_grid: true,
        ..opts.ode
    };
    let mut it = Integrator::new(problem, opts.z, &u0, &v0, ode)?;
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    for (i, &b) in ladder.iter().enumerate() {
        it.advance_to(b)?;
        if it.log_scale() > opts.max_log_scale {
            dropped.extend_from_slice(&ladder[i..]);
            break;
        }
        it.checkpoint();
        used.push(b);
    }
    Ok((it.finish(), used, dropped))
}

fn classify_ratios(ratios: &[f64], opts: &WeylOptions) -> DirectionClass {
    if ratios.is_empty() {
        DirectionClass::Undecided
    } else if ratios.iter().all(|&r| r <= opts.l2_ratio) {
        DirectionClass::L2
    } else if ratios.iter().all(|&r| r >= opts.non_l2_ratio) {
        DirectionClass::NotL2
    } else {
        DirectionClass::Undecided
    }
}

pub fn label_for(n: usize, m: usize) -> EndpointLabel {
    if n == m {
        EndpointLabel::LimitPoint
    } else if n == 2 * m {
        EndpointLabel::LimitCircle
    } else if n > m && n < 2 * m {
        EndpointLabel::Intermediate
    } else {
        EndpointLabel::Undecided
    }
}

/// Weyl disk radii `[2 |Im z| ∫_c^b r|φ|²]⁻¹` for the Dirichlet solution,
/// read from a frame whose column `m` (0-based) starts as `(0, 1)`.
pub fn disk_radii(traj: &Trajectory, z: C64, points: &[f64]) -> Vec<f64> {
    let mut w = CMat::zeros(2, 1);
    w[(1, 0)] = c(1.0, 0.0);
    points
        .iter()
        .map(|&b| {
            let l = traj.log_weighted_norm(&w, traj.c, b);
            (-(2.0 * z.im.abs()).ln() - l).exp()
        })
        .collect()
}

pub fn weyl_disk_radius(problem: &Problem, z: C64, b: f64, opts: &WeylOptions) -> Result<f64, WeylError> {
    if problem.m() != 1 {
        return Err(WeylError::Invalid("disk radius needs m = 1".into()));
    }
    if z.im == 0.0 {
        return Err(WeylError::RealZ(z));
    }
    let u0 = CMat::from_element(1, 1, c(0.0, 0.0));
    let v0 = CMat::from_element(1, 1, c(1.0, 0.0));
    let mut it = Integrator::new(problem, z, &u0, &v0, opts.ode)?;
    it.advance_to(b)?;
    let t = it.finish();
    let l = t.log_weighted_norm(&CMat::from_element(1, 1, c(1.0, 0.0)), problem.c(), b);
    Ok((-(2.0 * z.im.abs()).ln() - l).exp())
}

/// Largest-to-smallest eigenvalue ratio below which a subspace is
/// recomputed on its own.
const SPREAD: f64 = 1e-6;

/// Relative change of an eigenvalue treated as no change at all.
const RESOLUTION: f64 = 1e-9;

/// `ln` of the eigenvalues (ascending) of `∫_c^b Y* R Y`.
pub fn log_gram_spectrum(traj: &Trajectory, b: f64) -> Vec<f64> {
    let k = traj.layout.k;
    refine_spectrum(traj, &CMat::identity(k, k), b, 4)
}

fn refine_spectrum(traj: &Trajectory, basis: &CMat, b: f64, depth: usize) -> Vec<f64> {
    let (g, log_ref) = traj.gram_restricted(basis, traj.c, b);
    let (vals, vecs) = hermitian_eigen(&g);
    let ln = |v: f64| if v > 0.0 { v.ln() + log_ref } else { f64::NEG_INFINITY };
    let top = vals.iter().copied().fold(0.0, f64::max);
    let small: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] < SPREAD * top).collect();
    if top <= 0.0 || small.is_empty() || depth == 0 {
        return vals.iter().map(|&v| ln(v)).collect();
    }
    let sub = basis * vecs.select_columns(small.iter());
    let mut out = refine_spectrum(traj, &sub, b, depth - 1);
    out.extend((0..vals.len()).filter(|i| !small.contains(i)).map(|i| ln(vals[i])));
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// `ln(e^{new} − e^{old})`, or `-inf` below the resolution floor.
fn log_increment(new: f64, old: f64) -> f64 {
    if old == f64::NEG_INFINITY {
        return new;
    }
    let d = new - old;
    if !(d > RESOLUTION) {
        return f64::NEG_INFINITY;
    }
    new + (-(-d).exp()).ln_1p()
}

/// Count L² solutions at `opts.z` over the ladder.
pub fn l2_solution_count(problem: &Problem, ladder: &[f64], opts: &WeylOptions) -> Result<ClassificationVerdict, WeylError> {
    let m = problem.m();
    let (traj, used, truncated) = integrate_frame(problem, ladder, opts)?;
    let mut warnings = Vec::new();
    if !truncated.is_empty() {
        warnings.push(format!(
            "ladder truncated at {:?}: frame scale exceeded e^{}",
            truncated.first(),
            opts.max_log_scale
        ));
    }
    let mut bounds = vec![problem.c()];
    bounds.extend_from_slice(&used);
    let blocks = used.len();
    let spectra: Vec<Vec<f64>> = used.iter().map(|&b| log_gram_spectrum(&traj, b)).collect();
    let mut branches = Vec::new();
    for j in 0..2 * m {
        let logs: Vec<f64> = spectra.iter().map(|sp| sp[j]).collect();
        let mut incs = Vec::with_capacity(blocks);
        for k in 0..blocks {
            incs.push(if k == 0 { logs[0] } else { log_increment(logs[k], logs[k - 1]) });
        }
        let start = blocks.saturating_sub(opts.window);
        let tail = &incs[start..];
        let ratios: Vec<f64> = tail
            .windows(2)
            .map(|p| match (p[0] == f64::NEG_INFINITY, p[1] == f64::NEG_INFINITY) {
                (_, true) => 0.0,
                (true, false) => f64::INFINITY,
                _ => (p[1] - p[0]).exp(),
            })
            .collect();
        let exponent = if tail.len() >= 2 && tail.iter().all(|t| t.is_finite()) {
            let span = bounds[blocks - 1] - bounds[start];
            (tail[tail.len() - 1] - tail[0]) / span.max(f64::MIN_POSITIVE)
        } else {
            f64::NAN
        };
        let class = if blocks < opts.window {
            DirectionClass::Undecided
        } else {
            classify_ratios(&ratios, opts)
        };
        branches.push(Branch {
            log_eigenvalues: logs,
            log_increments: incs,
            ratios,
            exponent,
            class,
        });
    }
    if blocks < opts.window {
        warnings.push(format!("only {blocks} ladder blocks usable; need {}", opts.window));
    }
    let mut any_undecided = branches.is_empty() || branches.iter().any(|d| d.class == DirectionClass::Undecided);
    let n = branches.iter().filter(|d| d.class == DirectionClass::L2).count();
    // bounded branches must be the lowest ones
    if !any_undecided && branches[..n].iter().any(|d| d.class != DirectionClass::L2) {
        warnings.push("bounded and divergent eigenvalue branches interleave".into());
        any_undecided = true;
    }
    let (n_estimate, label) = if any_undecided {
        (None, EndpointLabel::Undecided)
    } else {
        let l = label_for(n, m);
        if l == EndpointLabel::Undecided {
            warnings.push(format!("{n} L² solutions is below the Weyl lower bound m = {m}"));
        }
        (Some(n), l)
    };
    let (radii, disk_label) = if m == 1 && !used.is_empty() {
        let radii = disk_radii(&traj, opts.z, &used);
        let start = radii.len().saturating_sub(opts.window);
        let ratios: Vec<f64> = radii[start..].windows(2).map(|w| w[1] / w[0]).collect();
        let dl = if radii.len() < opts.window {
            EndpointLabel::Undecided
        } else if ratios.iter().all(|&r| r <= opts.l2_ratio) {
            EndpointLabel::LimitPoint
        } else if ratios.iter().all(|&r| r >= opts.non_l2_ratio) {
            EndpointLabel::LimitCircle
        } else {
            EndpointLabel::Undecided
        };
        if dl != EndpointLabel::Undecided && label != EndpointLabel::Undecided && dl != label {
            warnings.push(format!("disk radii suggest {dl:?} but the solution count gives {label:?}"));
        }
        (Some(radii), Some(dl))
    } else {
        (None, None)
    };
    Ok(ClassificationVerdict {
        problem: problem.name.clone(),
        m,
        z: [opts.z.re, opts.z.im],
        ladder: used,
        truncated,
        branches,
        n_estimate,
        label,
        radii,
        disk_label,
        warnings,
    })
}

/// Classification with the default ladder unless one is given.
pub fn classify_endpoint(problem: &Problem, ladder: Option<&[f64]>, opts: &WeylOptions) -> Result<ClassificationVerdict, WeylError> {
    let default;
    let ladder = match ladder {
        Some(l) => l,
        None => {
            default = default_ladder(problem);
            &default
        }
    };
    l2_solution_count(problem, ladder, opts)
}
