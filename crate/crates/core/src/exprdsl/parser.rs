use super::lexer::{tokenize, Tok, Token};
use super::{BinOp, Expr, Func, NamedConst, ParseError};

/// Parse a coefficient formula.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        _ => Err(p.unexpected(&["operator", "end of input"])),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "x" => return Ok(Expr::X),
                    "e" => return Ok(Expr::Named(NamedConst::E)),
                    "pi" => return Ok(Expr::Named(NamedConst::Pi)),
                    _ => {}
                }
                let Some(f) = Func::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier { name, offset });
                };
                if *self.peek() != Tok::LParen {
                    return Err(self.unexpected(&["`(`"]));
                }
                self.bump();
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::call(f, arg))
            }
            _ => Err(self.unexpected(&["number", "`x`", "`e`", "`pi`", "function", "`(`", "`-`"])),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&["`)`", "operator"]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprdsl::BinOp::*;

    fn c(v: f64) -> Expr {
        Expr::Const(v)
    }
    fn b(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::binary(op, l, r)
    }

    #[test]
    fn ast_shapes() {
        assert_eq!(
            parse_expr("1/(x^2*ln(x))").unwrap(),
            b(Div, c(1.0), b(Mul, b(Pow, Expr::X, c(2.0)), Expr::call(Func::Ln, Expr::X)))
        );
        assert_eq!(parse_expr("0").unwrap(), c(0.0));
        assert_eq!(
            parse_expr("x^2 + -3").unwrap(),
            b(Add, b(Pow, Expr::X, c(2.0)), Expr::neg(c(3.0)))
        );
    }

    #[test]
    fn precedence_table() {
        // (input, fully parenthesised equivalent)
        let table = [
            ("a+b*c", "a+(b*c)"),
            ("a*b+c", "(a*b)+c"),
            ("a-b-c", "(a-b)-c"),
            ("a/b/c", "(a/b)/c"),
            ("a^b^c", "a^(b^c)"),
            ("-a^b", "-(a^b)"),
            ("a^-b", "a^(-b)"),
            ("a*b^c", "a*(b^c)"),
            ("a^b*c", "(a^b)*c"),
            ("-a*b", "(-a)*b"),
            ("a+-b", "a+(-b)"),
            ("--a", "-(-a)"),
            ("a-b+c", "(a-b)+c"),
            ("a/b*c", "(a/b)*c"),
            ("ln(a)^b", "(ln(a))^b"),
            ("a^b^-c", "a^(b^(-c))"),
            ("a+b/c-d", "(a+(b/c))-d"),
            ("-a-b", "(-a)-b"),
            ("a*-b^c", "a*(-(b^c))"),
            ("(a+b)*c", "(a+b)*c"),
        ];
        let sub = |s: &str| s.replace('a', "x").replace('b', "2.5").replace('c', "3").replace('d', "1.5");
        for (input, expected) in table {
            let got = parse_expr(&sub(input)).unwrap();
            let want = parse_expr(&sub(expected)).unwrap();
            assert_eq!(got, want, "{input}");
        }
    }

    #[test]
    fn positioned_errors() {
        let err = parse_expr("x + * 2").unwrap_err();
        assert_eq!(err.offset(), 4);
        let err = parse_expr("foo(x)").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "foo".into(),
                offset: 0
            }
        );
        assert_eq!(parse_expr("(x + 1").unwrap_err().offset(), 6);
        assert_eq!(parse_expr("x $ 1").unwrap_err().offset(), 2);
        assert_eq!(parse_expr("2e").unwrap_err().offset(), 1);
        assert!(parse_expr("").is_err());
        assert!(parse_expr("sin x").is_err());
        if let ParseError::Syntax { expected, .. } = parse_expr("x 1").unwrap_err() {
            assert!(expected.contains(&"end of input".to_string()));
        } else {
            panic!("expected syntax error");
        }
    }

    #[test]
    fn number_forms() {
        assert_eq!(parse_expr("1e-3").unwrap(), c(1e-3));
        assert_eq!(parse_expr("2.5E+2").unwrap(), c(250.0));
        assert_eq!(parse_expr(".5").unwrap(), c(0.5));
        assert_eq!(
            parse_expr("2*e").unwrap(),
            b(Mul, c(2.0), Expr::Named(NamedConst::E))
        );
    }
}
