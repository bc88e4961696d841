//! Built-in problems. All live on `[0, ∞)`.

use std::f64::consts::E;

use super::field::{CoefficientField, FieldKind, HarmonicWindows, Segment};
use super::problem::{Endpoint, Problem};
use crate::exprdsl::parse_expr;

pub const BUILTIN_NAMES: [&str; 6] = [
    "free",
    "example_2_7",
    "example_2_8",
    "quartic_lc",
    "matrix_free",
    "matrix_mixed",
];

fn one(kind: FieldKind) -> CoefficientField {
    CoefficientField::scaled_identity(1, kind, "1")
}

fn zero_q(m: usize) -> CoefficientField {
    CoefficientField::scaled_identity(m, FieldKind::QLike, "0")
}

fn scalar(name: &str, p: CoefficientField, q: CoefficientField, r: CoefficientField) -> Problem {
    Problem::new(name, 0.0, Endpoint::Infinite, p, q, r).expect("builtin problem")
}

/// Look up a built-in problem by name.
pub fn builtin(name: &str) -> Option<Problem> {
    Some(match name {
        "free" => scalar(name, one(FieldKind::PLike), zero_q(1), one(FieldKind::RLike)),
        "example_2_7" => {
            // r = 1/(x^2 ln x) for x >= e, continued by its value 1/e^2 at x = e.
            let r = CoefficientField::from_segments(
                1,
                FieldKind::RLike,
                vec![
                    Segment {
                        from: f64::NEG_INFINITY,
                        to: E,
                        entries: vec![parse_expr("1/e^2").unwrap()],
                        null_set: false,
                    },
                    Segment {
                        from: E,
                        to: f64::INFINITY,
                        entries: vec![parse_expr("1/(x^2*ln(x))").unwrap()],
                        null_set: false,
                    },
                ],
            )
            .expect("example_2_7 weight");
            scalar(name, one(FieldKind::PLike), zero_q(1), r)
        }
        "example_2_8" => {
            let r = CoefficientField::from_windows(
                1,
                FieldKind::RLike,
                HarmonicWindows {
                    inside: vec![parse_expr("1/x^2").unwrap()],
                    outside: vec![parse_expr("0").unwrap()],
                    outside_null: true,
                    n_max: HarmonicWindows::DEFAULT_N_MAX,
                },
            )
            .expect("example_2_8 weight");
            scalar(name, one(FieldKind::PLike), zero_q(1), r)
        }
        "quartic_lc" => scalar(
            name,
            one(FieldKind::PLike),
            CoefficientField::uniform_str(1, FieldKind::QLike, &["-x^4"]),
            one(FieldKind::RLike),
        ),
        "matrix_free" => Problem::new(
            name,
            0.0,
            Endpoint::Infinite,
            CoefficientField::scaled_identity(2, FieldKind::PLike, "1"),
            zero_q(2),
            CoefficientField::scaled_identity(2, FieldKind::RLike, "1"),
        )
        .expect("builtin problem"),
        "matrix_mixed" => Problem::new(
            name,
            0.0,
            Endpoint::Infinite,
            CoefficientField::scaled_identity(2, FieldKind::PLike, "1"),
            CoefficientField::uniform_str(2, FieldKind::QLike, &["0", "0", "0", "-x^4"]),
            CoefficientField::scaled_identity(2, FieldKind::RLike, "1"),
        )
        .expect("builtin problem"),
        _ => return None,
    })
}

/// All built-in problems, in a fixed order.
pub fn builtin_problems() -> Vec<Problem> {
    BUILTIN_NAMES.iter().map(|n| builtin(n).expect("listed builtin")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn coefficient_values() {
        let p = builtin("example_2_7").unwrap();
        let r_e = p.eval_r(E).unwrap()[(0, 0)];
        assert!((r_e - 1.0 / (E * E)).abs() < 1e-16);
        let e2 = E * E;
        let want = 1.0 / (E.powi(4) * 2.0);
        assert!((p.eval_r(e2).unwrap()[(0, 0)] - want).abs() < 1e-15);
        assert!((want - 0.00915782).abs() < 1e-8);
        // continuous join
        assert!((p.eval_r(E - 1e-12).unwrap()[(0, 0)] - r_e).abs() < 1e-12);

        let mf = builtin("matrix_free").unwrap();
        assert_eq!(mf.eval_p(3.7).unwrap(), DMatrix::identity(2, 2));
        assert_eq!(builtin("quartic_lc").unwrap().eval_q(2.0).unwrap()[(0, 0)], -16.0);
        let mm = builtin("matrix_mixed").unwrap();
        assert_eq!(mm.eval_q(2.0).unwrap(), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -16.0]));

        let e8 = builtin("example_2_8").unwrap();
        assert!((e8.eval_r(2.25).unwrap()[(0, 0)] - 0.197531).abs() < 1e-6);
        assert_eq!(e8.eval_r(2.75).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn all_listed() {
        let all = builtin_problems();
        assert_eq!(all.len(), BUILTIN_NAMES.len());
        assert!(builtin("nope").is_none());
        for p in &all {
            assert_eq!(p.c(), 0.0);
            assert_eq!(p.b(), Endpoint::Infinite);
        }
    }
}
