//! Local integrability and positivity checks on the coefficients.

use serde::{Deserialize, Serialize};

use super::field::{CoefficientField, FieldKind};
use super::problem::{sym_min_eig, sym_norm, Problem};
use super::quad::QuadOptions;
use super::CoeffError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IntegrabilityRow {
    pub d: f64,
    /// `∫_c^d ‖P⁻¹‖`, `∫_c^d ‖Q‖`, `∫_c^d ‖R‖`; `None` when quadrature failed.
    pub p_inv: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PositivityViolation {
    pub coeff: String,
    pub x: f64,
    /// Smallest eigenvalue (P, R) or asymmetry `‖M − Mᵀ‖` (Q).
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NullSet {
    pub coeff: String,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HypothesisReport {
    pub ladder: Vec<f64>,
    pub rows: Vec<IntegrabilityRow>,
    pub violations: Vec<PositivityViolation>,
    pub violation_count: usize,
    /// First declared null sets met on `[c, d_max]`, capped for size.
    pub null_sets: Vec<NullSet>,
    pub null_set_count: usize,
    pub warnings: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    pub tol: f64,
    /// Chebyshev points per segment.
    pub grid_points: usize,
    pub max_reported: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            grid_points: 257,
            max_reported: 64,
        }
    }
}

/// Default ladder: `c + 2^k`, k = 0..=10, or geometric approach to a finite `b`.
pub fn default_ladder(problem: &Problem) -> Vec<f64> {
    let c = problem.c();
    let b = problem.b().value();
    if b.is_finite() {
        (1..=10).map(|k| c + (b - c) * (1.0 - 0.5f64.powi(k))).collect()
    } else {
        crate::dyadic_ladder(c, 1.0, 0..=10)
    }
}

fn chebyshev(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |k| {
        let t = 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos());
        a + (b - a) * t
    })
}

fn check_field(
    field: &CoefficientField,
    lo: f64,
    hi: f64,
    opts: &ValidateOptions,
    report: &mut HypothesisReport,
) {
    let m = field.m();
    let label = field.kind().label();
    for seg in field.segments_in(lo, hi) {
        if seg.null_set {
            report.null_set_count += 1;
            if report.null_sets.len() < opts.max_reported {
                report.null_sets.push(NullSet {
                    coeff: label.into(),
                    from: seg.from,
                    to: seg.to,
                });
            }
        }
        for x in chebyshev(seg.from, seg.to, opts.grid_points) {
            let v = match seg.eval_matrix(m, x, field.kind()) {
                Ok(v) => v,
                Err(e) => {
                    report.violation_count += 1;
                    if report.warnings.len() < opts.max_reported {
                        report.warnings.push(e.to_string());
                    }
                    continue;
                }
            };
            let asym = (&v - v.transpose()).abs().max();
            let bad = match field.kind() {
                FieldKind::QLike => (asym != 0.0).then_some(asym),
                FieldKind::PLike | FieldKind::RLike => {
                    if asym != 0.0 {
                        Some(asym)
                    } else {
                        let min = sym_min_eig(&v);
                        let ok = if seg.null_set { min >= 0.0 } else { min > 0.0 };
                        (!ok).then_some(min)
                    }
                }
            };
            if let Some(value) = bad {
                report.violation_count += 1;
                if report.violations.len() < opts.max_reported {
                    report.violations.push(PositivityViolation {
                        coeff: label.into(),
                        x,
                        value,
                    });
                }
            }
        }
    }
}

/// Check local integrability of ‖P⁻¹‖, ‖Q‖, ‖R‖ on `[c, d]` for each ladder
/// point and positivity / symmetry on a sampling grid up to the last point.
pub fn validate_hypothesis(problem: &Problem, ladder: &[f64], opts: ValidateOptions) -> HypothesisReport {
    let mut report = HypothesisReport {
        ladder: ladder.to_vec(),
        rows: Vec::new(),
        violations: Vec::new(),
        violation_count: 0,
        null_sets: Vec::new(),
        null_set_count: 0,
        warnings: Vec::new(),
        pass: true,
    };
    let c = problem.c();
    let ladder_ok = ladder.windows(2).all(|w| w[0] < w[1])
        && ladder.iter().all(|&d| d > c && problem.contains(d));
    if !ladder_ok {
        report.warnings.push("ladder must be strictly increasing within (c, b)".into());
        report.pass = false;
        return report;
    }
    let qopts = QuadOptions {
        tol: opts.tol,
        max_subdivisions: 20_000,
    };
    let norms: [(&str, Box<dyn Fn(f64) -> Result<f64, CoeffError> + '_>); 3] = [
        (
            "P^-1",
            Box::new(|x| {
                let p = problem.eval_p(x)?;
                let min_abs = if p.nrows() == 1 {
                    p[(0, 0)].abs()
                } else {
                    p.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()))
                };
                Ok(1.0 / min_abs)
            }),
        ),
        ("Q", Box::new(|x| Ok(sym_norm(&problem.eval_q(x)?)))),
        ("R", Box::new(|x| Ok(sym_norm(&problem.eval_r(x)?)))),
    ];
    let mut acc: [Option<f64>; 3] = [Some(0.0); 3];
    let mut prev = c;
    for &d in ladder {
        let mut row = IntegrabilityRow {
            d,
            p_inv: None,
            q: None,
            r: None,
            errors: Vec::new(),
        };
        for (i, (label, f)) in norms.iter().enumerate() {
            if let Some(sofar) = acc[i] {
                match problem.integrate(f, prev, d, qopts) {
                    Ok(res) => acc[i] = Some(sofar + res.value),
                    Err(e) => {
                        acc[i] = None;
                        row.errors.push(format!("{label}: {e}"));
                    }
                }
            } else {
                row.errors.push(format!("{label}: not integrable on an earlier interval"));
            }
        }
        row.p_inv = acc[0];
        row.q = acc[1];
        row.r = acc[2];
        if !row.errors.is_empty() {
            report.pass = false;
        }
        report.rows.push(row);
        prev = d;
    }
    let hi = *ladder.last().unwrap_or(&c);
    if hi > c {
        for f in [problem.p_field(), problem.q_field(), problem.r_field()] {
            check_field(f, c, hi, &opts, &mut report);
        }
    }
    if report.violation_count > 0 {
        report.pass = false;
    }
    if report.null_set_count > 0 {
        report.warnings.push(format!(
            "{} declared null-set piece(s) on [{c}, {hi}]: the weight vanishes on a set of positive measure",
            report.null_set_count
        ));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtins::builtin;
    use crate::coefficients::problem::Endpoint;

    #[test]
    fn builtins_pass() {
        for name in ["free", "example_2_7", "quartic_lc", "matrix_mixed"] {
            let p = builtin(name).unwrap();
            let rep = validate_hypothesis(&p, &default_ladder(&p), ValidateOptions::default());
            assert!(rep.pass, "{name}: {:?}", rep.warnings);
            assert!(rep.null_sets.is_empty());
        }
    }

    #[test]
    fn free_integrals_exact() {
        let p = builtin("free").unwrap();
        let rep = validate_hypothesis(&p, &[1.0, 2.0, 4.0], ValidateOptions::default());
        assert_eq!(rep.rows[2].p_inv.unwrap(), 4.0);
        assert_eq!(rep.rows[2].q.unwrap(), 0.0);
    }

    #[test]
    fn windows_declared_null() {
        let p = builtin("example_2_8").unwrap();
        let rep = validate_hypothesis(&p, &default_ladder(&p), ValidateOptions::default());
        assert!(rep.pass);
        assert!(rep.null_set_count > 0);
        assert!(rep.warnings.iter().any(|w| w.contains("null-set")));
    }

    #[test]
    fn sign_change_detected() {
        let p = Problem::new(
            "shifted",
            0.0,
            Endpoint::Infinite,
            CoefficientField::uniform_str(1, FieldKind::PLike, &["x - 5"]),
            CoefficientField::uniform_str(1, FieldKind::QLike, &["0"]),
            CoefficientField::uniform_str(1, FieldKind::RLike, &["1"]),
        )
        .unwrap();
        let rep = validate_hypothesis(&p, &[2.0, 8.0], ValidateOptions::default());
        assert!(!rep.pass);
        assert!(rep.violation_count > 0);
        assert!(rep.violations.iter().all(|v| v.coeff == "P" && v.x <= 5.0));
    }

    #[test]
    fn asymmetric_q_flagged() {
        let p = Problem::new(
            "asym",
            0.0,
            Endpoint::Infinite,
            CoefficientField::scaled_identity(2, FieldKind::PLike, "1"),
            CoefficientField::uniform_str(2, FieldKind::QLike, &["0", "x", "0", "0"]),
            CoefficientField::scaled_identity(2, FieldKind::RLike, "1"),
        )
        .unwrap();
        let rep = validate_hypothesis(&p, &[1.0], ValidateOptions::default());
        assert!(!rep.pass);
    }
}
