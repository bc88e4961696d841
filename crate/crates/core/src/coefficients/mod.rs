//! Problems, piecewise coefficient fields, quadrature and hypothesis checks.

pub mod builtins;
pub mod config;
pub mod field;
pub mod problem;
pub mod quad;
pub mod validate;

use thiserror::Error;

use crate::exprdsl::EvalError;

pub use builtins::{builtin, builtin_problems, BUILTIN_NAMES};
pub use field::{CoefficientField, FieldKind, HarmonicWindows, PiecewiseDef, Segment, SegmentView};
pub use problem::{sym_min_eig, sym_norm, Endpoint, LocalCoeffs, Problem};
pub use quad::{quad, QuadError, QuadOptions, QuadResult};
pub use config::{load_problem_file, parse_problem_toml, ConfigError, HalfLine, ProblemSet, Side};
pub use validate::{validate_hypothesis, HypothesisReport, ValidateOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoeffError {
    #[error("{coeff}({x}): {source}")]
    Eval {
        coeff: &'static str,
        x: f64,
        #[source]
        source: EvalError,
    },
    #[error("{coeff} is not defined at x = {x}")]
    OutOfDomain { coeff: &'static str, x: f64 },
    #[error("{0}")]
    Invalid(String),
}
