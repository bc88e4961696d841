//! Property tests for the formula parser and the quadrature.

use proptest::prelude::*;

use sl_lab::coefficients::{builtin, QuadOptions};
use sl_lab::exprdsl::{parse_expr, BinOp, Expr, Func};

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000, 0u32..4).prop_map(|(n, k)| Expr::constant(n as f64 / 10f64.powi(k as i32))),
        Just(Expr::X),
        Just(parse_expr("e").unwrap()),
        Just(parse_expr("pi").unwrap()),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow)
        ];
        let func = prop_oneof![
            Just(Func::Ln),
            Just(Func::Exp),
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Sqrt),
            Just(Func::Abs)
        ];
        prop_oneof![
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::binary(o, a, b)),
            inner.clone().prop_map(Expr::neg),
            (func, inner).prop_map(|(f, a)| Expr::call(f, a)),
        ]
    })
}

proptest! {
    #[test]
    fn parser_is_total(src in "[-+*/^() x0-9.eplnisqrtabcoxy,]{0,40}") {
        // Any input yields a tree or a positioned error, never a panic.
        if let Err(e) = parse_expr(&src) {
            prop_assert!(e.offset() <= src.len());
        }
    }

    #[test]
    fn display_round_trips(e in arb_expr()) {
        let text = e.to_string();
        let back = parse_expr(&text).map_err(|err| TestCaseError::fail(format!("{text:?}: {err}")))?;
        prop_assert_eq!(&back, &e, "text {:?}", text);
        for x in [0.5, 1.0, 3.25] {
            match (e.eval(x), back.eval(x)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }
    }

    #[test]
    fn quad_is_additive(a in 0.0f64..20.0, w1 in 0.1f64..15.0, w2 in 0.1f64..15.0) {
        // weight with a breakpoint at e
        let p = builtin("example_2_7").unwrap();
        let f = |x: f64| p.r_field().eval_scalar(x);
        let (m, b) = (a + w1, a + w1 + w2);
        let opts = QuadOptions::with_tol(1e-12);
        let whole = p.integrate(f, a, b, opts).unwrap().value;
        let parts = p.integrate(f, a, m, opts).unwrap().value + p.integrate(f, m, b, opts).unwrap().value;
        prop_assert!((whole - parts).abs() <= 1e-11 * whole.abs().max(1.0), "{} vs {}", whole, parts);
    }
}
