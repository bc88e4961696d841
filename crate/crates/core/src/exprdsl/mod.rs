//! Coefficient expression language.
//!
//! Coefficients in problem files are written as small infix formulas in the
//! single variable `x`, e.g. `1/(x^2*ln(x))`. This module parses them into an
//! immutable [`Expr`] tree, prints them back, and evaluates them with domain
//! errors reported as values instead of NaN.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" unary)?
//! atom  := number | "x" | "e" | "pi" | func "(" expr ")" | "(" expr ")"
//! func  := "ln" | "exp" | "sin" | "cos" | "sqrt" | "abs"
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^4` is `-(x^4)`, and it is
//! right-associative: `a^b^c` is `a^(b^c)`.

mod lexer;
mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parser::parse_expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Ln,
    Exp,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "ln" => Func::Ln,
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Built-in named constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NamedConst {
    E,
    Pi,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::E => std::f64::consts::E,
            NamedConst::Pi => std::f64::consts::PI,
        }
    }
}

/// Expression tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Named(NamedConst),
    X,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" | "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("{func}({arg}) is outside the function's domain")]
    Domain { func: &'static str, arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result from `{op}`")]
    NonFinite { op: &'static str },
}

fn finite(v: f64, op: &'static str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => finite(*c, "constant"),
            Expr::Named(n) => Ok(n.value()),
            Expr::X => finite(x, "x"),
            Expr::Neg(a) => Ok(-a.eval(x)?),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinOp::Add => finite(a + b, "+"),
                    BinOp::Sub => finite(a - b, "-"),
                    BinOp::Mul => finite(a * b, "*"),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(EvalError::DivisionByZero)
                        } else {
                            finite(a / b, "/")
                        }
                    }
                    BinOp::Pow => {
                        let v = a.powf(b);
                        if v.is_nan() {
                            Err(EvalError::Domain { func: "^", arg: a })
                        } else {
                            finite(v, "^")
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(x)?;
                let v = match f {
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(EvalError::Domain { func: "ln", arg: a });
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::Domain { func: "sqrt", arg: a });
                        }
                        a.sqrt()
                    }
                    Func::Exp => a.exp(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Abs => a.abs(),
                };
                finite(v, f.name())
            }
        }
    }

    /// True when the tree does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Named(_) => true,
            Expr::X => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Replace every occurrence of `x` by `with`.
    pub fn substitute_x(&self, with: &Expr) -> Expr {
        match self {
            Expr::X => with.clone(),
            Expr::Const(_) | Expr::Named(_) => self.clone(),
            Expr::Neg(a) => Expr::neg(a.substitute_x(with)),
            Expr::Call(f, a) => Expr::call(*f, a.substitute_x(with)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute_x(with), b.substitute_x(with)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 5,
            _ => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                // Debug formatting of f64 is the shortest exact round-trip form.
                if c.is_sign_negative() {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Named(NamedConst::E) => f.write_str("e"),
            Expr::Named(NamedConst::Pi) => f.write_str("pi"),
            Expr::X => f.write_str("x"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.precedence() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                if *op == BinOp::Pow {
                    write_child(f, a, a.precedence() <= p)?;
                    f.write_str("^")?;
                    write_child(f, b, b.precedence() < 3)
                } else {
                    // The tree shape is preserved exactly: floating-point
                    // addition is not associative.
                    write_child(f, a, a.precedence() < p)?;
                    write!(f, " {} ", op.symbol())?;
                    write_child(f, b, b.precedence() <= p)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_domain_errors() {
        let ln = parse_expr("ln(x)").unwrap();
        assert!(matches!(ln.eval(0.0), Err(EvalError::Domain { func: "ln", .. })));
        assert!(matches!(ln.eval(-1.0), Err(EvalError::Domain { .. })));
        assert_eq!(ln.eval(1.0).unwrap(), 0.0);

        let div = parse_expr("1/x").unwrap();
        assert_eq!(div.eval(0.0), Err(EvalError::DivisionByZero));

        let big = parse_expr("exp(x)").unwrap();
        assert!(matches!(big.eval(1000.0), Err(EvalError::NonFinite { op: "exp" })));

        let root = parse_expr("sqrt(x)").unwrap();
        assert!(matches!(root.eval(-4.0), Err(EvalError::Domain { func: "sqrt", .. })));
        assert!(matches!(parse_expr("x^0.5").unwrap().eval(-2.0), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn eval_examples() {
        let e = std::f64::consts::E;
        let v = parse_expr("1/(x^2*ln(x))").unwrap().eval(e).unwrap();
        assert!((v - 1.0 / (e * e)).abs() < 1e-15);
        assert!((v - 0.135335).abs() < 1e-6);
        assert_eq!(parse_expr("x").unwrap().eval(5.0).unwrap(), 5.0);
        assert_eq!(parse_expr("x^2 + -3").unwrap().eval(2.0).unwrap(), 1.0);
    }

    #[test]
    fn constants_and_substitution() {
        let e = parse_expr("e*pi").unwrap();
        assert!(e.is_constant());
        assert_eq!(e.eval(0.0).unwrap(), std::f64::consts::E * std::f64::consts::PI);
        let refl = parse_expr("x^2").unwrap().substitute_x(&parse_expr("2 - x").unwrap());
        assert_eq!(refl.eval(5.0).unwrap(), 9.0);
        assert!(!refl.is_constant());
    }

    #[test]
    fn display_is_reparseable() {
        for s in ["-x^4", "(-x)^4", "x^-2", "2^3^2", "(2^3)^2", "1 - (2 - 3)", "a"] {
            let Ok(e) = parse_expr(s) else { continue };
            let printed = e.to_string();
            assert_eq!(parse_expr(&printed).unwrap(), e, "{s} -> {printed}");
        }
        assert_eq!(parse_expr("-x^4").unwrap().to_string(), "-x^4.0");
        assert_eq!(Expr::Const(-3.0).to_string(), "(-3.0)");
    }
}
