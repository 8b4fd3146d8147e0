//! Concrete syntax, lexer, parser and the shared abstract-syntax/value
//! representation for MiniML.
//!
//! An expression doubles as the value representation: a value is an
//! expression in normal form. Every node carries an optional `print_as`
//! label which, when set, is rendered verbatim in place of the node.

mod lexer;
mod parser;

pub use lexer::{Lexer, Token, TokenKind};
pub use parser::{parse_expr, parse_program, SyntaxError};

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Eq,
    Gt,
    LtEq,
    GtEq,
    NotEq,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Lt => "<",
            CmpOp::Eq => "=",
            CmpOp::Gt => ">",
            CmpOp::LtEq => "<=",
            CmpOp::GtEq => ">=",
            CmpOp::NotEq => "<>",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForDir {
    UpTo,
    DownTo,
}

/// A mutable record field cell. Shared on clone, so a looked-up record
/// aliases the original binding's cells.
pub type FieldCell = Rc<RefCell<Expr>>;

/// Host function backing a builtin. Receives the collected argument
/// values and an output sink for `print_*`-style effects.
#[derive(Clone)]
pub struct HostFn(pub Rc<dyn Fn(&[Expr], &mut dyn std::io::Write) -> Result<Expr, String>>);

impl fmt::Debug for HostFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<host fn>")
    }
}

impl PartialEq for HostFn {
    // builtins are identified by name and arity; the host code itself
    // does not take part in structural equality
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

/// Value bindings captured by a closure. These bind values only.
pub type ClosureEnv = Vec<(String, Expr)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub print_as: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Unit,
    Int(i64),
    Bool(bool),
    Char(char),
    Str(String),
    Tuple(Vec<Expr>),
    Nil,
    Cons(Rc<Expr>, Rc<Expr>),
    Record(Vec<(String, FieldCell)>),
    Constr(u32, String, Option<Rc<Expr>>),
    Var(String),
    Op(ArithOp, Rc<Expr>, Rc<Expr>),
    Cmp(CmpOp, Rc<Expr>, Rc<Expr>),
    And(Rc<Expr>, Rc<Expr>),
    Or(Rc<Expr>, Rc<Expr>),
    If(Rc<Expr>, Rc<Expr>, Option<Rc<Expr>>),
    Let {
        recursive: bool,
        bindings: Vec<(Pattern, Expr)>,
        body: Rc<Expr>,
    },
    Fun {
        param: Pattern,
        body: Rc<Expr>,
        env: ClosureEnv,
    },
    Function {
        cases: Vec<Case>,
        env: ClosureEnv,
    },
    App(Rc<Expr>, Rc<Expr>),
    Seq(Rc<Expr>, Rc<Expr>),
    While {
        guard: Rc<Expr>,
        body: Rc<Expr>,
        guard_copy: Rc<Expr>,
        body_copy: Rc<Expr>,
    },
    For {
        var: String,
        from: Rc<Expr>,
        dir: ForDir,
        to: Rc<Expr>,
        body: Rc<Expr>,
        body_copy: Rc<Expr>,
    },
    Field(Rc<Expr>, String),
    SetField(Rc<Expr>, String, Rc<Expr>),
    Raise(String, Option<Rc<Expr>>),
    Match(Rc<Expr>, Vec<Case>),
    TryWith(Rc<Expr>, Vec<Case>),
    Builtin {
        name: String,
        arity: usize,
        args: Vec<Expr>,
        func: HostFn,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    Any,
    Var(String),
    Int(i64),
    Bool(bool),
    Char(char),
    CharRange(char, char),
    Str(String),
    Unit,
    Tuple(Vec<Pattern>),
    Nil,
    Cons(Box<Pattern>, Box<Pattern>),
    Constr(String, Option<Box<Pattern>>),
    Record(Vec<(String, Pattern)>),
    Alias(String, Box<Pattern>),
    Or(Box<Pattern>, Box<Pattern>),
}

/// A match case: pattern, optional guard, right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub pattern: Pattern,
    pub guard: Option<Expr>,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    LetDef {
        recursive: bool,
        bindings: Vec<(Pattern, Expr)>,
    },
    ExceptionDef {
        name: String,
        has_payload: bool,
    },
    /// The one `constr A | B of _ | ...` variant declaration a program may
    /// carry. Nullary constructors are tagged 0,1,... in declaration order
    /// and payload-carrying ones 0,1,... separately.
    ConstrDef(Vec<(String, bool)>),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub items: Vec<Item>,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr { kind, print_as: None }
    }

    pub fn unit() -> Expr {
        Expr::new(ExprKind::Unit)
    }

    pub fn int(i: i64) -> Expr {
        Expr::new(ExprKind::Int(i))
    }

    pub fn bool(b: bool) -> Expr {
        Expr::new(ExprKind::Bool(b))
    }

    pub fn str(s: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Str(s.into()))
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Var(name.into()))
    }

    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::new(ExprKind::App(Rc::new(f), Rc::new(a)))
    }

    pub fn op(op: ArithOp, a: Expr, b: Expr) -> Expr {
        Expr::new(ExprKind::Op(op, Rc::new(a), Rc::new(b)))
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::new(ExprKind::Cmp(op, Rc::new(a), Rc::new(b)))
    }

    pub fn record(fields: Vec<(String, Expr)>) -> Expr {
        Expr::new(ExprKind::Record(
            fields
                .into_iter()
                .map(|(n, e)| (n, Rc::new(RefCell::new(e))))
                .collect(),
        ))
    }

    pub fn with_print_as(mut self, label: impl Into<String>) -> Expr {
        self.print_as = Some(label.into());
        self
    }

    /// A deep copy that regenerates record cells, so the copy shares no
    /// mutable state with the original. Used when a loop body copy is
    /// moved into place.
    pub fn deep_copy(&self) -> Expr {
        let kind = match &self.kind {
            ExprKind::Record(fields) => ExprKind::Record(
                fields
                    .iter()
                    .map(|(n, c)| (n.clone(), Rc::new(RefCell::new(c.borrow().deep_copy()))))
                    .collect(),
            ),
            ExprKind::Tuple(es) => ExprKind::Tuple(es.iter().map(|e| e.deep_copy()).collect()),
            ExprKind::Cons(h, t) => {
                ExprKind::Cons(Rc::new(h.deep_copy()), Rc::new(t.deep_copy()))
            }
            ExprKind::Constr(tag, name, payload) => ExprKind::Constr(
                *tag,
                name.clone(),
                payload.as_ref().map(|p| Rc::new(p.deep_copy())),
            ),
            ExprKind::Op(op, a, b) => {
                ExprKind::Op(*op, Rc::new(a.deep_copy()), Rc::new(b.deep_copy()))
            }
            ExprKind::Cmp(op, a, b) => {
                ExprKind::Cmp(*op, Rc::new(a.deep_copy()), Rc::new(b.deep_copy()))
            }
            ExprKind::And(a, b) => {
                ExprKind::And(Rc::new(a.deep_copy()), Rc::new(b.deep_copy()))
            }
            ExprKind::Or(a, b) => ExprKind::Or(Rc::new(a.deep_copy()), Rc::new(b.deep_copy())),
            ExprKind::If(c, t, e) => ExprKind::If(
                Rc::new(c.deep_copy()),
                Rc::new(t.deep_copy()),
                e.as_ref().map(|e| Rc::new(e.deep_copy())),
            ),
            ExprKind::Let {
                recursive,
                bindings,
                body,
            } => ExprKind::Let {
                recursive: *recursive,
                bindings: bindings
                    .iter()
                    .map(|(p, e)| (p.clone(), e.deep_copy()))
                    .collect(),
                body: Rc::new(body.deep_copy()),
            },
            ExprKind::Fun { param, body, env } => ExprKind::Fun {
                param: param.clone(),
                body: Rc::new(body.deep_copy()),
                env: env.iter().map(|(n, e)| (n.clone(), e.deep_copy())).collect(),
            },
            ExprKind::Function { cases, env } => ExprKind::Function {
                cases: cases
                    .iter()
                    .map(|c| Case {
                        pattern: c.pattern.clone(),
                        guard: c.guard.as_ref().map(|g| g.deep_copy()),
                        rhs: c.rhs.deep_copy(),
                    })
                    .collect(),
                env: env.iter().map(|(n, e)| (n.clone(), e.deep_copy())).collect(),
            },
            ExprKind::App(f, a) => {
                ExprKind::App(Rc::new(f.deep_copy()), Rc::new(a.deep_copy()))
            }
            ExprKind::Seq(a, b) => {
                ExprKind::Seq(Rc::new(a.deep_copy()), Rc::new(b.deep_copy()))
            }
            ExprKind::While {
                guard,
                body,
                guard_copy,
                body_copy,
            } => ExprKind::While {
                guard: Rc::new(guard.deep_copy()),
                body: Rc::new(body.deep_copy()),
                guard_copy: Rc::new(guard_copy.deep_copy()),
                body_copy: Rc::new(body_copy.deep_copy()),
            },
            ExprKind::For {
                var,
                from,
                dir,
                to,
                body,
                body_copy,
            } => ExprKind::For {
                var: var.clone(),
                from: Rc::new(from.deep_copy()),
                dir: *dir,
                to: Rc::new(to.deep_copy()),
                body: Rc::new(body.deep_copy()),
                body_copy: Rc::new(body_copy.deep_copy()),
            },
            ExprKind::Field(e, n) => ExprKind::Field(Rc::new(e.deep_copy()), n.clone()),
            ExprKind::SetField(e, n, v) => {
                ExprKind::SetField(Rc::new(e.deep_copy()), n.clone(), Rc::new(v.deep_copy()))
            }
            ExprKind::Raise(n, p) => {
                ExprKind::Raise(n.clone(), p.as_ref().map(|p| Rc::new(p.deep_copy())))
            }
            ExprKind::Match(s, cases) => ExprKind::Match(
                Rc::new(s.deep_copy()),
                cases
                    .iter()
                    .map(|c| Case {
                        pattern: c.pattern.clone(),
                        guard: c.guard.as_ref().map(|g| g.deep_copy()),
                        rhs: c.rhs.deep_copy(),
                    })
                    .collect(),
            ),
            ExprKind::TryWith(b, cases) => ExprKind::TryWith(
                Rc::new(b.deep_copy()),
                cases
                    .iter()
                    .map(|c| Case {
                        pattern: c.pattern.clone(),
                        guard: c.guard.as_ref().map(|g| g.deep_copy()),
                        rhs: c.rhs.deep_copy(),
                    })
                    .collect(),
            ),
            ExprKind::Builtin {
                name,
                arity,
                args,
                func,
            } => ExprKind::Builtin {
                name: name.clone(),
                arity: *arity,
                args: args.iter().map(|a| a.deep_copy()).collect(),
                func: func.clone(),
            },
            k => k.clone(),
        };
        Expr {
            kind,
            print_as: self.print_as.clone(),
        }
    }

    /// Does any record (mutable cell) occur in this expression?
    pub fn contains_record(&self) -> bool {
        if let ExprKind::Record(_) = self.kind {
            return true;
        }
        let mut found = false;
        self.for_each_child(&mut |c| {
            if c.contains_record() {
                found = true;
            }
        });
        found
    }

    /// Calls `f` on every direct child expression (record field contents
    /// included).
    pub fn for_each_child(&self, f: &mut dyn FnMut(&Expr)) {
        match &self.kind {
            ExprKind::Unit
            | ExprKind::Int(_)
            | ExprKind::Bool(_)
            | ExprKind::Char(_)
            | ExprKind::Str(_)
            | ExprKind::Nil
            | ExprKind::Var(_) => {}
            ExprKind::Tuple(es) => es.iter().for_each(&mut *f),
            ExprKind::Cons(h, t) => {
                f(h);
                f(t);
            }
            ExprKind::Record(fields) => {
                for (_, c) in fields {
                    f(&c.borrow());
                }
            }
            ExprKind::Constr(_, _, payload) => {
                if let Some(p) = payload {
                    f(p);
                }
            }
            ExprKind::Op(_, a, b) | ExprKind::Cmp(_, a, b) | ExprKind::And(a, b) | ExprKind::Or(a, b) => {
                f(a);
                f(b);
            }
            ExprKind::If(c, t, e) => {
                f(c);
                f(t);
                if let Some(e) = e {
                    f(e);
                }
            }
            ExprKind::Let { bindings, body, .. } => {
                for (_, e) in bindings {
                    f(e);
                }
                f(body);
            }
            ExprKind::Fun { body, env, .. } => {
                f(body);
                for (_, e) in env {
                    f(e);
                }
            }
            ExprKind::Function { cases, env } => {
                for c in cases {
                    if let Some(g) = &c.guard {
                        f(g);
                    }
                    f(&c.rhs);
                }
                for (_, e) in env {
                    f(e);
                }
            }
            ExprKind::App(a, b) | ExprKind::Seq(a, b) => {
                f(a);
                f(b);
            }
            ExprKind::While {
                guard,
                body,
                guard_copy,
                body_copy,
            } => {
                f(guard);
                f(body);
                f(guard_copy);
                f(body_copy);
            }
            ExprKind::For {
                from,
                to,
                body,
                body_copy,
                ..
            } => {
                f(from);
                f(to);
                f(body);
                f(body_copy);
            }
            ExprKind::Field(e, _) => f(e),
            ExprKind::SetField(e, _, v) => {
                f(e);
                f(v);
            }
            ExprKind::Raise(_, p) => {
                if let Some(p) = p {
                    f(p);
                }
            }
            ExprKind::Match(s, cases) | ExprKind::TryWith(s, cases) => {
                f(s);
                for c in cases {
                    if let Some(g) = &c.guard {
                        f(g);
                    }
                    f(&c.rhs);
                }
            }
            ExprKind::Builtin { args, .. } => args.iter().for_each(&mut *f),
        }
    }
}

impl Pattern {
    /// Names bound by this pattern, in left-to-right binding order.
    pub fn bound_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_bound(&mut out);
        out
    }

    fn collect_bound(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Var(n) => out.push(n.clone()),
            Pattern::Tuple(ps) => ps.iter().for_each(|p| p.collect_bound(out)),
            Pattern::Cons(h, t) => {
                h.collect_bound(out);
                t.collect_bound(out);
            }
            Pattern::Constr(_, Some(p)) => p.collect_bound(out),
            Pattern::Record(fields) => fields.iter().for_each(|(_, p)| p.collect_bound(out)),
            Pattern::Alias(n, p) => {
                out.push(n.clone());
                p.collect_bound(out);
            }
            // the parser checks both sides bind the same names
            Pattern::Or(a, _) => a.collect_bound(out),
            _ => {}
        }
    }
}

/// The set of names occurring free in `e` under the standard binding
/// rules: `Let`, `Fun`, `Function`, `Match`/`TryWith` cases and `For`
/// bind names.
pub fn free_vars(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_free(e, &mut Vec::new(), &mut out);
    out
}

fn collect_free(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match &e.kind {
        ExprKind::Var(n) => {
            if !bound.iter().any(|b| b == n) {
                out.insert(n.clone());
            }
        }
        ExprKind::Let {
            recursive,
            bindings,
            body,
        } => {
            let names: Vec<String> = bindings
                .iter()
                .flat_map(|(p, _)| p.bound_names())
                .collect();
            if *recursive {
                bound.extend(names.iter().cloned());
                for (_, rhs) in bindings {
                    collect_free(rhs, bound, out);
                }
                collect_free(body, bound, out);
                bound.truncate(bound.len() - names.len());
            } else {
                for (_, rhs) in bindings {
                    collect_free(rhs, bound, out);
                }
                bound.extend(names.iter().cloned());
                collect_free(body, bound, out);
                bound.truncate(bound.len() - names.len());
            }
        }
        ExprKind::Fun { param, body, env } => {
            for (_, v) in env {
                collect_free(v, bound, out);
            }
            let names = param.bound_names();
            let env_names: Vec<&String> = env.iter().map(|(n, _)| n).collect();
            bound.extend(names.iter().cloned());
            bound.extend(env_names.iter().map(|s| s.to_string()));
            collect_free(body, bound, out);
            bound.truncate(bound.len() - names.len() - env_names.len());
        }
        ExprKind::Function { cases, env } => {
            for (_, v) in env {
                collect_free(v, bound, out);
            }
            let env_names: Vec<String> = env.iter().map(|(n, _)| n.clone()).collect();
            bound.extend(env_names.iter().cloned());
            for c in cases {
                collect_case_free(c, bound, out);
            }
            bound.truncate(bound.len() - env_names.len());
        }
        ExprKind::Match(s, cases) => {
            collect_free(s, bound, out);
            for c in cases {
                collect_case_free(c, bound, out);
            }
        }
        ExprKind::TryWith(b, cases) => {
            collect_free(b, bound, out);
            for c in cases {
                collect_case_free(c, bound, out);
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
            collect_free(from, bound, out);
            collect_free(to, bound, out);
            bound.push(var.clone());
            collect_free(body, bound, out);
            collect_free(body_copy, bound, out);
            bound.pop();
        }
        _ => {
            e.for_each_child(&mut |c| collect_free(c, bound, out));
        }
    }
}

fn collect_case_free(c: &Case, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    let names = c.pattern.bound_names();
    bound.extend(names.iter().cloned());
    if let Some(g) = &c.guard {
        collect_free(g, bound, out);
    }
    collect_free(&c.rhs, bound, out);
    bound.truncate(bound.len() - names.len());
}

/// Structural equality for test oracles: ignores `print_as` labels and
/// closure environments, and treats a `Builtin` as equal to a `Var` of
/// the same name applied to the collected arguments (a builtin's
/// parseable rendering is its name).
pub fn structural_eq(a: &Expr, b: &Expr) -> bool {
    use ExprKind::*;
    // a builtin with collected arguments reparses as an application
    // chain headed by its name
    fn uncurry_builtin(e: &Expr) -> Option<Expr> {
        match &e.kind {
            Builtin { name, args, .. } if !args.is_empty() => {
                let mut acc = Expr::var(name.clone());
                for a in args {
                    acc = Expr::app(acc, a.clone());
                }
                Some(acc)
            }
            _ => None,
        }
    }
    if let Some(ua) = uncurry_builtin(a) {
        return structural_eq(&ua, b);
    }
    if let Some(ub) = uncurry_builtin(b) {
        return structural_eq(a, &ub);
    }
    match (&a.kind, &b.kind) {
        (Builtin { name, args, .. }, Var(v)) | (Var(v), Builtin { name, args, .. }) => {
            args.is_empty() && name == v
        }
        (Unit, Unit) | (Nil, Nil) => true,
        (Int(x), Int(y)) => x == y,
        (Bool(x), Bool(y)) => x == y,
        (Char(x), Char(y)) => x == y,
        (Str(x), Str(y)) => x == y,
        (Var(x), Var(y)) => x == y,
        (Tuple(xs), Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| structural_eq(x, y))
        }
        (Cons(h1, t1), Cons(h2, t2)) => structural_eq(h1, h2) && structural_eq(t1, t2),
        (Record(f1), Record(f2)) => {
            f1.len() == f2.len()
                && f1.iter().zip(f2).all(|((n1, c1), (n2, c2))| {
                    n1 == n2 && structural_eq(&c1.borrow(), &c2.borrow())
                })
        }
        (Constr(t1, n1, p1), Constr(t2, n2, p2)) => {
            t1 == t2
                && n1 == n2
                && match (p1, p2) {
                    (None, None) => true,
                    (Some(x), Some(y)) => structural_eq(x, y),
                    _ => false,
                }
        }
        (Op(o1, a1, b1), Op(o2, a2, b2)) => {
            o1 == o2 && structural_eq(a1, a2) && structural_eq(b1, b2)
        }
        (Cmp(o1, a1, b1), Cmp(o2, a2, b2)) => {
            o1 == o2 && structural_eq(a1, a2) && structural_eq(b1, b2)
        }
        (And(a1, b1), And(a2, b2)) | (Or(a1, b1), Or(a2, b2)) => {
            structural_eq(a1, a2) && structural_eq(b1, b2)
        }
        (If(c1, t1, e1), If(c2, t2, e2)) => {
            structural_eq(c1, c2)
                && structural_eq(t1, t2)
                && match (e1, e2) {
                    (None, None) => true,
                    (Some(x), Some(y)) => structural_eq(x, y),
                    _ => false,
                }
        }
        (
            Let {
                recursive: r1,
                bindings: b1,
                body: e1,
            },
            Let {
                recursive: r2,
                bindings: b2,
                body: e2,
            },
        ) => {
            r1 == r2
                && b1.len() == b2.len()
                && b1
                    .iter()
                    .zip(b2)
                    .all(|((p1, x1), (p2, x2))| p1 == p2 && structural_eq(x1, x2))
                && structural_eq(e1, e2)
        }
        (
            Fun {
                param: p1,
                body: e1,
                ..
            },
            Fun {
                param: p2,
                body: e2,
                ..
            },
        ) => p1 == p2 && structural_eq(e1, e2),
        (Function { cases: c1, .. }, Function { cases: c2, .. }) => cases_eq(c1, c2),
        (App(f1, a1), App(f2, a2)) | (Seq(f1, a1), Seq(f2, a2)) => {
            structural_eq(f1, f2) && structural_eq(a1, a2)
        }
        (
            While {
                guard: g1,
                body: b1,
                ..
            },
            While {
                guard: g2,
                body: b2,
                ..
            },
        ) => structural_eq(g1, g2) && structural_eq(b1, b2),
        (
            For {
                var: v1,
                from: f1,
                dir: d1,
                to: t1,
                body: b1,
                ..
            },
            For {
                var: v2,
                from: f2,
                dir: d2,
                to: t2,
                body: b2,
                ..
            },
        ) => {
            v1 == v2
                && d1 == d2
                && structural_eq(f1, f2)
                && structural_eq(t1, t2)
                && structural_eq(b1, b2)
        }
        (Field(e1, n1), Field(e2, n2)) => n1 == n2 && structural_eq(e1, e2),
        (SetField(e1, n1, v1), SetField(e2, n2, v2)) => {
            n1 == n2 && structural_eq(e1, e2) && structural_eq(v1, v2)
        }
        (Raise(n1, p1), Raise(n2, p2)) => {
            n1 == n2
                && match (p1, p2) {
                    (None, None) => true,
                    (Some(x), Some(y)) => structural_eq(x, y),
                    _ => false,
                }
        }
        (Match(s1, c1), Match(s2, c2)) | (TryWith(s1, c1), TryWith(s2, c2)) => {
            structural_eq(s1, s2) && cases_eq(c1, c2)
        }
        (
            Builtin {
                name: n1, args: a1, ..
            },
            Builtin {
                name: n2, args: a2, ..
            },
        ) => n1 == n2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| structural_eq(x, y)),
        _ => false,
    }
}

fn cases_eq(a: &[Case], b: &[Case]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.pattern == y.pattern
                && match (&x.guard, &y.guard) {
                    (None, None) => true,
                    (Some(g1), Some(g2)) => structural_eq(g1, g2),
                    _ => false,
                }
                && structural_eq(&x.rhs, &y.rhs)
        })
}

impl Program {
    /// Folds the program's items into a single expression: `let`
    /// definitions nest around the remainder, bare expressions sequence,
    /// and the last bare expression's value is the program's value.
    /// Exception and constructor declarations contribute nothing to the
    /// folded expression.
    pub fn to_expr(&self) -> Expr {
        fn fold(items: &[Item]) -> Expr {
            match items.split_first() {
                None => Expr::unit(),
                Some((item, rest)) => match item {
                    Item::LetDef {
                        recursive,
                        bindings,
                    } => Expr::new(ExprKind::Let {
                        recursive: *recursive,
                        bindings: bindings.clone(),
                        body: Rc::new(fold(rest)),
                    }),
                    Item::ExceptionDef { .. } | Item::ConstrDef(_) => fold(rest),
                    Item::Expr(e) => {
                        if rest.is_empty() {
                            e.clone()
                        } else {
                            Expr::new(ExprKind::Seq(Rc::new(e.clone()), Rc::new(fold(rest))))
                        }
                    }
                },
            }
        }
        fold(&self.items)
    }
}
