//! TOML problem files.
//!
//! ```toml
//! [problem]
//! name = "my_problem"
//! m = 1
//! c = 0.0
//! b = "inf"              # or a number
//! # a = "-inf"           # optional left end: whole line split at c
//! # reflect = true       # keep only the left half (a, c], mapped by x -> 2c - x
//!
//! [[coeff.P]]
//! from = 0.0
//! to = "inf"
//! expr = "1"             # m > 1: expr = [["1", "0"], ["0", "1"]]
//!
//! [coeff.R.windows]      # alternative: r on [n, n + 1/n), outside elsewhere
//! inside = "1/x^2"
//! outside = "0"
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::field::{CoefficientField, FieldKind, HarmonicWindows, Segment};
use super::problem::{Endpoint, Problem};
use super::CoeffError;
use crate::exprdsl::{parse_expr, Expr, ParseError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed problem file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{location}: {source}")]
    Expr {
        location: String,
        #[source]
        source: ParseError,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Coefficient(#[from] CoeffError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    problem: ProblemSection,
    coeff: CoeffSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    name: String,
    m: usize,
    c: f64,
    b: Option<Bound>,
    a: Option<Bound>,
    #[serde(default)]
    reflect: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Bound {
    Num(f64),
    Text(String),
}

impl Bound {
    fn value(&self, what: &str) -> Result<f64, ConfigError> {
        match self {
            Bound::Num(v) => Ok(*v),
            Bound::Text(s) => match s.trim() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("{what}: expected a number or \"inf\", got {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffSection {
    #[serde(rename = "P")]
    p: CoeffSpec,
    #[serde(rename = "Q")]
    q: CoeffSpec,
    #[serde(rename = "R")]
    r: CoeffSpec,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CoeffSpec {
    Segments(Vec<SegmentSpec>),
    Windows { windows: WindowSpec },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentSpec {
    from: Bound,
    to: Bound,
    expr: ExprSpec,
    #[serde(default)]
    null_set: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowSpec {
    inside: ExprSpec,
    outside: ExprSpec,
    #[serde(default = "default_true")]
    outside_null: bool,
    n_max: Option<u64>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ExprSpec {
    Scalar(String),
    Matrix(Vec<Vec<String>>),
}

impl ExprSpec {
    fn parse(&self, m: usize, location: &str) -> Result<Vec<Expr>, ConfigError> {
        let texts: Vec<&String> = match self {
            ExprSpec::Scalar(s) if m == 1 => vec![s],
            ExprSpec::Scalar(_) => {
                return Err(ConfigError::Invalid(format!("{location}: m = {m} needs an m x m array of formulas")))
            }
            ExprSpec::Matrix(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(ConfigError::Invalid(format!("{location}: expected a {m} x {m} array")));
                }
                rows.iter().flatten().collect()
            }
        };
        texts
            .into_iter()
            .enumerate()
            .map(|(k, s)| {
                parse_expr(s).map_err(|source| ConfigError::Expr {
                    location: format!("{location}[{}][{}]", k / m, k % m),
                    source,
                })
            })
            .collect()
    }
}

/// Which half-line of the original configuration a problem represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Right,
    /// Left half-line `(a, c]` pulled back to `[c, 2c − a)`.
    LeftReflected,
}

#[derive(Debug, Clone)]
pub struct HalfLine {
    pub side: Side,
    pub problem: Problem,
}

/// One or two half-line problems produced from a configuration.
#[derive(Debug, Clone)]
pub struct ProblemSet {
    pub name: String,
    pub halves: Vec<HalfLine>,
    pub notes: Vec<String>,
}

impl ProblemSet {
    pub fn single(problem: Problem) -> Self {
        Self {
            name: problem.name.clone(),
            halves: vec![HalfLine {
                side: Side::Right,
                problem,
            }],
            notes: Vec::new(),
        }
    }
}

fn build_field(spec: &CoeffSpec, m: usize, kind: FieldKind) -> Result<CoefficientField, ConfigError> {
    let label = kind.label();
    match spec {
        CoeffSpec::Segments(segs) => {
            let mut out = Vec::with_capacity(segs.len());
            for (i, s) in segs.iter().enumerate() {
                let loc = format!("coeff.{label}[{i}].expr");
                out.push(Segment {
                    from: s.from.value(&format!("coeff.{label}[{i}].from"))?,
                    to: s.to.value(&format!("coeff.{label}[{i}].to"))?,
                    entries: s.expr.parse(m, &loc)?,
                    null_set: s.null_set,
                });
            }
            Ok(CoefficientField::from_segments(m, kind, out)?)
        }
        CoeffSpec::Windows { windows } => Ok(CoefficientField::from_windows(
            m,
            kind,
            HarmonicWindows {
                inside: windows.inside.parse(m, &format!("coeff.{label}.windows.inside"))?,
                outside: windows.outside.parse(m, &format!("coeff.{label}.windows.outside"))?,
                outside_null: windows.outside_null,
                n_max: windows.n_max.unwrap_or(HarmonicWindows::DEFAULT_N_MAX),
            },
        )?),
    }
}

/// Parse a problem file's text.
pub fn parse_problem_toml(text: &str, force_reflect: bool) -> Result<ProblemSet, ConfigError> {
    let file: ConfigFile = toml::from_str(text)?;
    let sec = &file.problem;
    let m = sec.m;
    if m == 0 {
        return Err(ConfigError::Invalid("problem.m must be positive".into()));
    }
    let p = build_field(&file.coeff.p, m, FieldKind::PLike)?;
    let q = build_field(&file.coeff.q, m, FieldKind::QLike)?;
    let r = build_field(&file.coeff.r, m, FieldKind::RLike)?;
    let c = sec.c;
    let a = sec.a.as_ref().map(|v| v.value("problem.a")).transpose()?;
    let b = sec.b.as_ref().map(|v| v.value("problem.b")).transpose()?;
    let reflect = sec.reflect || force_reflect;

    let right = |b: f64| -> Result<HalfLine, ConfigError> {
        let end = if b.is_finite() { Endpoint::Finite(b) } else { Endpoint::Infinite };
        let problem = Problem::new(sec.name.clone(), c, end, p.restrict(c, b)?, q.restrict(c, b)?, r.restrict(c, b)?)?;
        Ok(HalfLine {
            side: Side::Right,
            problem,
        })
    };
    let left = |a: f64| -> Result<HalfLine, ConfigError> {
        if !(a < c) {
            return Err(ConfigError::Invalid(format!("problem.a = {a} must be below c = {c}")));
        }
        let problem = Problem::reflected_left(
            format!("{}[left]", sec.name),
            a,
            c,
            &p.restrict(a, c)?,
            &q.restrict(a, c)?,
            &r.restrict(a, c)?,
        )?;
        Ok(HalfLine {
            side: Side::LeftReflected,
            problem,
        })
    };

    let mut notes = Vec::new();
    let halves = match (a, b, reflect) {
        (None, Some(b), false) => vec![right(b)?],
        (None, _, true) => {
            return Err(ConfigError::Invalid("reflection needs a left endpoint problem.a".into()));
        }
        (None, None, false) => return Err(ConfigError::Invalid("problem.b is required".into())),
        (Some(a), None, _) | (Some(a), Some(_), true) => vec![left(a)?],
        (Some(a), Some(b), false) => {
            notes.push(format!(
                "whole line split at c = {c}: each half-line is classified separately; \
                 limit point at both ends is the setting in which the operator on (a, b) is essentially self-adjoint"
            ));
            vec![left(a)?, right(b)?]
        }
    };
    Ok(ProblemSet {
        name: sec.name.clone(),
        halves,
        notes,
    })
}

pub fn load_problem_file(path: &Path, force_reflect: bool) -> Result<ProblemSet, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problem_toml(&text, force_reflect)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"
[problem]
name = "ex27"
m = 1
c = 0
b = "inf"

[[coeff.P]]
from = 0
to = "inf"
expr = "1"

[[coeff.Q]]
from = 0
to = "inf"
expr = "0"

[[coeff.R]]
from = 0
to = 2.718281828459045
expr = "1/e^2"

[[coeff.R]]
from = 2.718281828459045
to = "inf"
expr = "1/(x^2*ln(x))"
"#;

    #[test]
    fn scalar_file() {
        let set = parse_problem_toml(SCALAR, false).unwrap();
        assert_eq!(set.halves.len(), 1);
        let p = &set.halves[0].problem;
        let e = std::f64::consts::E;
        assert!((p.eval_r(e * e).unwrap()[(0, 0)] - 1.0 / (2.0 * e.powi(4))).abs() < 1e-15);
    }

    #[test]
    fn matrix_and_windows() {
        let text = r#"
[problem]
name = "mixed"
m = 2
c = 0.0
b = "inf"
[[coeff.P]]
from = 0
to = "inf"
expr = [["1", "0"], ["0", "1"]]
[[coeff.Q]]
from = 0
to = "inf"
expr = [["0", "0"], ["0", "-x^4"]]
[coeff.R.windows]
inside = [["1", "0"], ["0", "1"]]
outside = [["0", "0"], ["0", "0"]]
"#;
        let set = parse_problem_toml(text, false).unwrap();
        let p = &set.halves[0].problem;
        assert_eq!(p.eval_q(2.0).unwrap()[(1, 1)], -16.0);
        assert_eq!(p.eval_r(2.75).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn whole_line_split() {
        let text = r#"
[problem]
name = "line"
m = 1
c = 0
a = "-inf"
b = "inf"
[[coeff.P]]
from = "-inf"
to = "inf"
expr = "1"
[[coeff.Q]]
from = "-inf"
to = "inf"
expr = "x"
[[coeff.R]]
from = "-inf"
to = "inf"
expr = "1"
"#;
        let set = parse_problem_toml(text, false).unwrap();
        assert_eq!(set.halves.len(), 2);
        assert_eq!(set.halves[0].side, Side::LeftReflected);
        // left half sees q(2c - x) = -x
        assert_eq!(set.halves[0].problem.eval_q(3.0).unwrap()[(0, 0)], -3.0);
        assert_eq!(set.halves[1].problem.eval_q(3.0).unwrap()[(0, 0)], 3.0);
        assert!(!set.notes.is_empty());
        let only_left = parse_problem_toml(text, true).unwrap();
        assert_eq!(only_left.halves.len(), 1);
    }

    #[test]
    fn errors_are_located() {
        let bad = SCALAR.replace("1/(x^2*ln(x))", "1/(x^2*log(x))");
        let err = parse_problem_toml(&bad, false).unwrap_err();
        assert!(err.to_string().contains("coeff.R[1].expr"), "{err}");
        let gap = SCALAR.replace("from = 2.718281828459045", "from = 3");
        assert!(parse_problem_toml(&gap, false).is_err());
        assert!(parse_problem_toml("[problem]\nname=1", false).is_err());
    }

    #[test]
    fn shipped_example_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/example_problem.toml");
        let set = load_problem_file(&path, false).unwrap();
        assert_eq!(set.halves[0].problem.m(), 1);
    }
}
