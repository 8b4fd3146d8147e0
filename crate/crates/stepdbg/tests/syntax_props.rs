//! Round-trip and binding-structure properties of the concrete syntax.

mod common;

use std::collections::BTreeSet;
use std::rc::Rc;

use proptest::prelude::*;

use stepdbg::syntax::{
    free_vars, parse_expr, parse_program, structural_eq, Case, Expr, ExprKind, Pattern,
};
use stepdbg::trace::{render_expr, RenderOpts};

fn names() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "d", "x", "y", "f", "g"])
        .prop_map(|s| s.to_string())
}

fn literal() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::unit()),
        any::<i16>().prop_map(|i| Expr::int(i as i64)),
        any::<bool>().prop_map(Expr::bool),
        prop::char::range('a', 'z').prop_map(|c| Expr::new(ExprKind::Char(c))),
        Just(Expr::new(ExprKind::Char('\n'))),
        "[ -~]{0,6}".prop_map(Expr::str),
        Just(Expr::str("line\nbreak\t\"quoted\"")),
        Just(Expr::new(ExprKind::Nil)),
        names().prop_map(Expr::var),
    ]
}

fn patterns() -> impl Strategy<Value = Pattern> {
    let leaf = prop_oneof![
        Just(Pattern::Any),
        names().prop_map(Pattern::Var),
        any::<i8>().prop_map(|i| Pattern::Int(i as i64)),
        any::<bool>().prop_map(Pattern::Bool),
        prop::char::range('a', 'z').prop_map(Pattern::Char),
        (prop::char::range('a', 'm'), prop::char::range('n', 'z'))
            .prop_map(|(lo, hi)| Pattern::CharRange(lo, hi)),
        "[a-z]{0,3}".prop_map(Pattern::Str),
        Just(Pattern::Unit),
        Just(Pattern::Nil),
    ];
    leaf.prop_recursive(3, 16, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Pattern::Tuple),
            (inner.clone(), inner.clone())
                .prop_map(|(h, t)| Pattern::Cons(Box::new(h), Box::new(t))),
            (names(), inner.clone())
                .prop_map(|(n, p)| Pattern::Alias(n, Box::new(p))),
            // both sides of an or-pattern must bind the same names
            (binder_free_pattern(), binder_free_pattern())
                .prop_map(|(a, b)| Pattern::Or(Box::new(a), Box::new(b))),
            (names(), inner).prop_map(|(n, p)| Pattern::Record(vec![(n, p)])),
        ]
    })
}

fn binder_free_pattern() -> impl Strategy<Value = Pattern> {
    prop_oneof![
        Just(Pattern::Any),
        any::<i8>().prop_map(|i| Pattern::Int(i as i64)),
        any::<bool>().prop_map(Pattern::Bool),
        Just(Pattern::Nil),
        Just(Pattern::Unit),
    ]
}

fn exprs() -> impl Strategy<Value = Expr> {
    literal().prop_recursive(4, 48, 4, |inner| {
        let e = inner.clone();
        let case = (patterns(), prop::option::of(e.clone()), e.clone())
            .prop_map(|(pattern, guard, rhs)| Case {
                pattern,
                guard,
                rhs,
            })
            .boxed();
        prop_oneof![
            prop::collection::vec(e.clone(), 2..4).prop_map(|es| Expr::new(ExprKind::Tuple(es))),
            (e.clone(), e.clone())
                .prop_map(|(h, t)| Expr::new(ExprKind::Cons(Rc::new(h), Rc::new(t)))),
            (names(), e.clone()).prop_map(|(n, v)| Expr::record(vec![(n, v)])),
            (any::<u8>(), e.clone(), e.clone()).prop_map(|(op, a, b)| {
                use stepdbg::syntax::ArithOp::*;
                Expr::op([Add, Sub, Mul, Div][op as usize % 4], a, b)
            }),
            (any::<u8>(), e.clone(), e.clone()).prop_map(|(op, a, b)| {
                use stepdbg::syntax::CmpOp::*;
                Expr::cmp([Lt, Eq, Gt, LtEq, GtEq, NotEq][op as usize % 6], a, b)
            }),
            (e.clone(), e.clone())
                .prop_map(|(a, b)| Expr::new(ExprKind::And(Rc::new(a), Rc::new(b)))),
            (e.clone(), e.clone())
                .prop_map(|(a, b)| Expr::new(ExprKind::Or(Rc::new(a), Rc::new(b)))),
            (e.clone(), e.clone(), prop::option::of(e.clone())).prop_map(|(c, t, els)| {
                Expr::new(ExprKind::If(Rc::new(c), Rc::new(t), els.map(Rc::new)))
            }),
            (any::<bool>(), names(), e.clone(), e.clone()).prop_map(|(r, n, rhs, body)| {
                Expr::new(ExprKind::Let {
                    recursive: r,
                    bindings: vec![(Pattern::Var(n), rhs)],
                    body: Rc::new(body),
                })
            }),
            (patterns(), e.clone(), e.clone()).prop_map(|(p, rhs, body)| {
                Expr::new(ExprKind::Let {
                    recursive: false,
                    bindings: vec![(p, rhs)],
                    body: Rc::new(body),
                })
            }),
            (patterns(), e.clone()).prop_map(|(p, body)| {
                Expr::new(ExprKind::Fun {
                    param: p,
                    body: Rc::new(body),
                    env: Vec::new(),
                })
            }),
            prop::collection::vec(case.clone(), 1..3).prop_map(|cases| {
                Expr::new(ExprKind::Function {
                    cases,
                    env: Vec::new(),
                })
            }),
            (e.clone(), prop::collection::vec(case.clone(), 1..3))
                .prop_map(|(s, cases)| Expr::new(ExprKind::Match(Rc::new(s), cases))),
            (e.clone(), prop::collection::vec(case, 1..3))
                .prop_map(|(s, cases)| Expr::new(ExprKind::TryWith(Rc::new(s), cases))),
            (e.clone(), e.clone())
                .prop_map(|(f, a)| Expr::app(f, a)),
            (e.clone(), e.clone())
                .prop_map(|(a, b)| Expr::new(ExprKind::Seq(Rc::new(a), Rc::new(b)))),
            (e.clone(), e.clone()).prop_map(|(g, b)| {
                Expr::new(ExprKind::While {
                    guard: Rc::new(g.clone()),
                    body: Rc::new(b.clone()),
                    guard_copy: Rc::new(g),
                    body_copy: Rc::new(b),
                })
            }),
            (names(), e.clone(), any::<bool>(), e.clone(), e.clone()).prop_map(
                |(v, from, up, to, body)| {
                    use stepdbg::syntax::ForDir;
                    Expr::new(ExprKind::For {
                        var: v,
                        from: Rc::new(from),
                        dir: if up { ForDir::UpTo } else { ForDir::DownTo },
                        to: Rc::new(to),
                        body: Rc::new(body.clone()),
                        body_copy: Rc::new(body),
                    })
                }
            ),
            (e.clone(), names()).prop_map(|(x, n)| Expr::new(ExprKind::Field(Rc::new(x), n))),
            (e.clone(), names(), e.clone()).prop_map(|(x, n, v)| {
                Expr::new(ExprKind::SetField(Rc::new(x), n, Rc::new(v)))
            }),
            prop::option::of(e.clone()).prop_map(|p| {
                Expr::new(ExprKind::Raise("Exit".into(), p.map(Rc::new)))
            }),
            (e.clone(), e.clone()).prop_map(|(a, b)| {
                Expr::app(Expr::app(Expr::var(":="), a), b)
            }),
            (e.clone(), e.clone()).prop_map(|(a, b)| {
                Expr::app(Expr::app(Expr::var("@"), a), b)
            }),
            e.prop_map(|a| Expr::app(Expr::var("!"), a)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    // rendering any expression and parsing it back gives the same tree
    #[test]
    fn render_parse_round_trip(e in exprs()) {
        let text = render_expr(&e, None, &RenderOpts { use_print_as: false, ..Default::default() }).text;
        let reparsed = parse_expr(&text)
            .unwrap_or_else(|err| panic!("unparseable rendering {text:?}: {err}"));
        prop_assert!(
            structural_eq(&e, &reparsed),
            "round trip changed the tree:\n  text: {text}\n  orig: {e:?}\n  back: {reparsed:?}"
        );
    }

    // wrapping inserts only layout; joining continuation lines restores
    // the unwrapped text
    #[test]
    fn wrapping_is_layout_only(e in exprs(), width in 16usize..60) {
        let flat = render_expr(&e, None, &RenderOpts { use_print_as: false, ..Default::default() }).text;
        let wrapped = render_expr(
            &e,
            None,
            &RenderOpts { width, use_print_as: false, ..Default::default() },
        ).text;
        prop_assert_eq!(wrapped.replace("\n  ", " "), flat);
    }

    #[test]
    fn free_vars_agrees_with_name_scan(e in exprs()) {
        prop_assert_eq!(free_vars(&e), naive_free(&e));
    }
}

// an independent free-variable scan: all names used, minus names bound
// by any enclosing binder
fn naive_free(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    scan(e, &BTreeSet::new(), &mut out);
    out
}

fn scan(e: &Expr, bound: &BTreeSet<String>, out: &mut BTreeSet<String>) {
    let extend = |bound: &BTreeSet<String>, names: Vec<String>| -> BTreeSet<String> {
        let mut b = bound.clone();
        b.extend(names);
        b
    };
    match &e.kind {
        ExprKind::Var(n) => {
            if !bound.contains(n) {
                out.insert(n.clone());
            }
        }
        ExprKind::Let {
            recursive,
            bindings,
            body,
        } => {
            let names: Vec<String> = bindings.iter().flat_map(|(p, _)| p.bound_names()).collect();
            let inner = extend(bound, names);
            let rhs_scope = if *recursive { &inner } else { bound };
            for (_, rhs) in bindings {
                scan(rhs, rhs_scope, out);
            }
            scan(body, &inner, out);
        }
        ExprKind::Fun { param, body, env } => {
            for (_, v) in env {
                scan(v, bound, out);
            }
            let mut names = param.bound_names();
            names.extend(env.iter().map(|(n, _)| n.clone()));
            scan(body, &extend(bound, names), out);
        }
        ExprKind::Function { cases, env } => {
            for (_, v) in env {
                scan(v, bound, out);
            }
            let env_names: Vec<String> = env.iter().map(|(n, _)| n.clone()).collect();
            let outer = extend(bound, env_names);
            for c in cases {
                let inner = extend(&outer, c.pattern.bound_names());
                if let Some(g) = &c.guard {
                    scan(g, &inner, out);
                }
                scan(&c.rhs, &inner, out);
            }
        }
        ExprKind::Match(s, cases) | ExprKind::TryWith(s, cases) => {
            scan(s, bound, out);
            for c in cases {
                let inner = extend(bound, c.pattern.bound_names());
                if let Some(g) = &c.guard {
                    scan(g, &inner, out);
                }
                scan(&c.rhs, &inner, out);
            }
        }
        ExprKind::For {
            var,
            from,
            to,
            body,
            body_copy,
            ..
        } => {
            scan(from, bound, out);
            scan(to, bound, out);
            let inner = extend(bound, vec![var.clone()]);
            scan(body, &inner, out);
            scan(body_copy, &inner, out);
        }
        _ => {
            e.for_each_child(&mut |c| scan(c, bound, out));
        }
    }
}

#[test]
fn spec_free_vars_examples() {
    assert_eq!(
        free_vars(&Expr::var("x")),
        BTreeSet::from(["x".to_string()])
    );
    let e = parse_expr("let x = 1 in x + y").unwrap();
    assert_eq!(free_vars(&e), BTreeSet::from(["y".to_string()]));
    let fact =
        parse_expr("let rec factorial n = if n = 1 then 1 else n * factorial (n - 1) in factorial 4")
            .unwrap();
    assert!(free_vars(&fact).is_empty());
}

#[test]
fn corpus_round_trips() {
    for name in common::CORPUS {
        let source = common::load_corpus(name);
        let program = parse_program(&source).unwrap();
        let e = program.to_expr();
        let rendered = render_expr(&e, None, &RenderOpts::default()).text;
        // constructor declarations live outside expressions; re-attach
        // them so the rendered text parses in the same namespace
        let decls: String = source
            .lines()
            .filter(|l| l.trim_start().starts_with("constr"))
            .map(|l| format!("{l}\n"))
            .collect();
        let back = parse_program(&format!("{decls}{rendered}"))
            .unwrap_or_else(|err| panic!("{name}: reparse failed: {err}\n{rendered}"))
            .to_expr();
        assert!(
            structural_eq(&e, &back),
            "{name}: round trip changed the program"
        );
    }
}

#[test]
fn loop_copies_survive_round_trip() {
    let source = "for y = 0 + 1 to 6 - 1 do print_int y done";
    let e = parse_expr(source).unwrap();
    match &e.kind {
        ExprKind::For {
            body, body_copy, ..
        } => assert_eq!(body, body_copy),
        _ => unreachable!(),
    }
    let text = render_expr(&e, None, &RenderOpts::default()).text;
    let back = parse_expr(&text).unwrap();
    match &back.kind {
        ExprKind::For {
            body, body_copy, ..
        } => assert_eq!(body, body_copy),
        _ => unreachable!(),
    }
}
