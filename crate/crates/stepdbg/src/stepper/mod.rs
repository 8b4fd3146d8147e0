//! The single-step reduction engine: finds the redex, performs exactly
//! one reduction, and supports peeking (classifying the next reduction
//! without performing it or triggering effects).

mod builtins;
mod compare;
mod matches;

pub use builtins::{arith_result, prelude, BuiltinTable, DuplicateBuiltin};
pub use compare::{check_same_type, poly_compare, CompareFunction};
pub use matches::{matches, wrap_bindings};

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::io::Write;
use std::rc::Rc;

use crate::syntax::{free_vars, Case, ClosureEnv, CmpOp, Expr, ExprKind, ForDir, Pattern};

/// What kind of reduction a step performed, or (under peeking) would
/// perform. Drives trace elision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LastOp {
    Arith,
    Boolean,
    Comparison,
    IfBool,
    InsideBuiltIn,
    VarLookup,
    Other(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Next(Expr, LastOp),
    AlreadyValue,
    Uncaught(String, Option<Expr>),
    RunTimeTypeError(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    PeekOnValue,
    StepLimitExceeded,
    Internal(String),
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalError::PeekOnValue => f.write_str("peek on a value"),
            EvalError::StepLimitExceeded => f.write_str("step limit exceeded"),
            EvalError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for EvalError {}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub fast_curry: bool,
    pub fast_for: bool,
    pub no_typecheck: bool,
    pub max_steps: Option<u64>,
}

/// An environment: pre-existing binding groups (innermost first) plus
/// the builtins table.
#[derive(Clone, Default)]
pub struct Env {
    pub items: Vec<EnvItem>,
    builtins: BuiltinTable,
}

#[derive(Clone)]
pub struct EnvItem {
    pub recursive: bool,
    pub bindings: Vec<(Pattern, Expr)>,
}

impl Env {
    /// An environment holding the fixed builtin prelude.
    pub fn with_prelude() -> Env {
        Env {
            items: Vec::new(),
            builtins: prelude(),
        }
    }

    pub fn builtins(&self) -> &BuiltinTable {
        &self.builtins
    }

    pub fn builtins_mut(&mut self) -> &mut BuiltinTable {
        &mut self.builtins
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Value(Expr),
    Uncaught(String, Option<Expr>),
    RunTimeTypeError(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalOutcome {
    pub outcome: Outcome,
    pub steps: u64,
}

/// Is this expression in normal form? `Raise` is not a value; a
/// partially applied builtin is.
pub fn is_value(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Unit
        | ExprKind::Int(_)
        | ExprKind::Bool(_)
        | ExprKind::Char(_)
        | ExprKind::Str(_)
        | ExprKind::Nil
        | ExprKind::Fun { .. }
        | ExprKind::Function { .. } => true,
        ExprKind::Tuple(es) => es.iter().all(is_value),
        ExprKind::Cons(h, t) => is_value(h) && is_value(t),
        ExprKind::Record(fields) => fields.iter().all(|(_, c)| is_value(&c.borrow())),
        ExprKind::Constr(_, _, payload) => payload.as_ref().is_none_or(|p| is_value(p)),
        ExprKind::Builtin { arity, args, .. } => args.len() < *arity,
        _ => false,
    }
}

/// Replaces operator variables (`!`, `:=`, `@` and the section forms of
/// the arithmetic operators) with their builtins. These names cannot be
/// shadowed by the grammar, so resolution at load time is sound.
pub fn resolve_operators(e: &mut Expr, builtins: &BuiltinTable) {
    if let ExprKind::Var(n) = &e.kind {
        if matches!(n.as_str(), "!" | ":=" | "@" | "+" | "-" | "*" | "/") {
            if let Some(b) = builtins.lookup(n) {
                e.kind = b.kind.clone();
            }
            return;
        }
    }
    match &mut e.kind {
        ExprKind::Tuple(es) | ExprKind::Builtin { args: es, .. } => {
            es.iter_mut().for_each(|x| resolve_operators(x, builtins))
        }
        ExprKind::Cons(a, b)
        | ExprKind::Op(_, a, b)
        | ExprKind::Cmp(_, a, b)
        | ExprKind::And(a, b)
        | ExprKind::Or(a, b)
        | ExprKind::App(a, b)
        | ExprKind::Seq(a, b) => {
            resolve_operators(Rc::make_mut(a), builtins);
            resolve_operators(Rc::make_mut(b), builtins);
        }
        ExprKind::Record(fields) => {
            for (_, c) in fields.iter() {
                resolve_operators(&mut c.borrow_mut(), builtins);
            }
        }
        ExprKind::Constr(_, _, Some(p)) => resolve_operators(Rc::make_mut(p), builtins),
        ExprKind::If(c, t, els) => {
            resolve_operators(Rc::make_mut(c), builtins);
            resolve_operators(Rc::make_mut(t), builtins);
            if let Some(els) = els {
                resolve_operators(Rc::make_mut(els), builtins);
            }
        }
        ExprKind::Let { bindings, body, .. } => {
            for (_, rhs) in bindings {
                resolve_operators(rhs, builtins);
            }
            resolve_operators(Rc::make_mut(body), builtins);
        }
        ExprKind::Fun { body, env, .. } => {
            resolve_operators(Rc::make_mut(body), builtins);
            for (_, v) in env {
                resolve_operators(v, builtins);
            }
        }
        ExprKind::Function { cases, env } => {
            for c in cases {
                if let Some(g) = &mut c.guard {
                    resolve_operators(g, builtins);
                }
                resolve_operators(&mut c.rhs, builtins);
            }
            for (_, v) in env {
                resolve_operators(v, builtins);
            }
        }
        ExprKind::While {
            guard,
            body,
            guard_copy,
            body_copy,
        } => {
            resolve_operators(Rc::make_mut(guard), builtins);
            resolve_operators(Rc::make_mut(body), builtins);
            resolve_operators(Rc::make_mut(guard_copy), builtins);
            resolve_operators(Rc::make_mut(body_copy), builtins);
        }
        ExprKind::For {
            from,
            to,
            body,
            body_copy,
            ..
        } => {
            resolve_operators(Rc::make_mut(from), builtins);
            resolve_operators(Rc::make_mut(to), builtins);
            resolve_operators(Rc::make_mut(body), builtins);
            resolve_operators(Rc::make_mut(body_copy), builtins);
        }
        ExprKind::Field(x, _) => resolve_operators(Rc::make_mut(x), builtins),
        ExprKind::SetField(x, _, v) => {
            resolve_operators(Rc::make_mut(x), builtins);
            resolve_operators(Rc::make_mut(v), builtins);
        }
        ExprKind::Raise(_, Some(p)) => resolve_operators(Rc::make_mut(p), builtins),
        ExprKind::Match(s, cases) | ExprKind::TryWith(s, cases) => {
            resolve_operators(Rc::make_mut(s), builtins);
            for c in cases {
                if let Some(g) = &mut c.guard {
                    resolve_operators(g, builtins);
                }
                resolve_operators(&mut c.rhs, builtins);
            }
        }
        _ => {}
    }
}

// ---- the engine ----

enum Frame<'a> {
    Group {
        recursive: bool,
        bindings: &'a [(Pattern, Expr)],
    },
    Loop {
        name: &'a str,
        value: Expr,
    },
}

struct Reduced<'a> {
    expr: Expr,
    op: LastOp,
    redex: &'a Expr,
}

impl<'a> Reduced<'a> {
    fn map(self, f: impl FnOnce(Expr) -> Expr) -> Reduced<'a> {
        Reduced {
            expr: f(self.expr),
            op: self.op,
            redex: self.redex,
        }
    }
}

enum Signal<'a> {
    Raised(String, Option<Expr>, Option<&'a Expr>),
    TypeError(String, Option<&'a Expr>),
    Internal(String),
    Limit,
}

struct Ctx<'c> {
    opts: &'c EvalOptions,
    builtins: &'c BuiltinTable,
    sink: &'c mut dyn Write,
    perform: bool,
    micro: u64,
}

impl Ctx<'_> {
    fn tick(&mut self) -> Result<(), ()> {
        self.micro += 1;
        match self.opts.max_steps {
            Some(max) if self.micro > max => Err(()),
            _ => Ok(()),
        }
    }

    fn ill_typed<'a>(&self, msg: &str, redex: &'a Expr) -> Signal<'a> {
        if self.opts.no_typecheck {
            Signal::TypeError(msg.to_string(), Some(redex))
        } else {
            let shown = crate::trace::render_expr(redex, None, &Default::default()).text;
            Signal::Internal(format!("{msg} (redex: {shown})"))
        }
    }
}

fn frames_from_env(env: &Env) -> Vec<Frame<'_>> {
    // env items are innermost first; the frame stack is outermost first
    env.items
        .iter()
        .rev()
        .map(|item| Frame::Group {
            recursive: item.recursive,
            bindings: &item.bindings,
        })
        .collect()
}

struct Found {
    value: Expr,
    frame_idx: Option<usize>,
}

fn lookup_frames(frames: &[Frame<'_>], name: &str) -> Option<Found> {
    for (i, frame) in frames.iter().enumerate().rev() {
        match frame {
            Frame::Loop { name: n, value } => {
                if *n == name {
                    return Some(Found {
                        value: value.clone(),
                        frame_idx: Some(i),
                    });
                }
            }
            Frame::Group { bindings, .. } => {
                for (pat, rhs) in bindings.iter() {
                    if let Pattern::Var(n) = pat {
                        if n == name {
                            return Some(Found {
                                value: rhs.clone(),
                                frame_idx: Some(i),
                            });
                        }
                    }
                }
            }
        }
    }
    None
}

fn lookup(frames: &[Frame<'_>], builtins: &BuiltinTable, name: &str) -> Option<Found> {
    lookup_frames(frames, name).or_else(|| {
        builtins.lookup(name).map(|b| Found {
            value: b.clone(),
            frame_idx: None,
        })
    })
}

/// Gives every closure inside `value` the bindings it needs from the
/// frames enclosing its binding site. Closure environments bind values
/// only.
fn capture_closures(value: &mut Expr, frames: &[Frame<'_>]) {
    let is_uncaptured_closure = matches!(
        &value.kind,
        ExprKind::Fun { env, .. } | ExprKind::Function { env, .. } if env.is_empty()
    );
    if is_uncaptured_closure {
        let needed = free_vars(value);
        let captured = capture_names(&needed, frames);
        match &mut value.kind {
            ExprKind::Fun { env, .. } | ExprKind::Function { env, .. } => *env = captured,
            _ => unreachable!(),
        }
        return;
    }
    match &mut value.kind {
        ExprKind::Tuple(es) | ExprKind::Builtin { args: es, .. } => {
            es.iter_mut().for_each(|x| capture_closures(x, frames))
        }
        ExprKind::Cons(a, b) => {
            capture_closures(Rc::make_mut(a), frames);
            capture_closures(Rc::make_mut(b), frames);
        }
        ExprKind::Record(fields) => {
            for (_, c) in fields.iter() {
                capture_closures(&mut c.borrow_mut(), frames);
            }
        }
        ExprKind::Constr(_, _, Some(p)) => capture_closures(Rc::make_mut(p), frames),
        _ => {}
    }
}

fn capture_names(needed: &BTreeSet<String>, frames: &[Frame<'_>]) -> ClosureEnv {
    let mut out = Vec::new();
    for name in needed {
        for (i, frame) in frames.iter().enumerate().rev() {
            match frame {
                Frame::Loop { name: n, value } => {
                    if n == name {
                        out.push((name.clone(), value.clone()));
                        break;
                    }
                }
                Frame::Group {
                    recursive,
                    bindings,
                } => {
                    let hit = bindings.iter().find_map(|(pat, rhs)| match pat {
                        Pattern::Var(n) if n == name => Some(rhs),
                        _ => None,
                    });
                    if let Some(rhs) = hit {
                        // recursive bindings resolve through the
                        // expression tree, which keeps them in place
                        if !recursive && is_value(rhs) {
                            let mut v = rhs.clone();
                            capture_closures(&mut v, &frames[..i]);
                            out.push((name.clone(), v));
                        }
                        break;
                    }
                }
            }
        }
    }
    out
}

/// Wraps `body` in lets for the captured bindings it actually uses.
fn wrap_cenv(cenv: &[(String, Expr)], body: Expr) -> Expr {
    if cenv.is_empty() {
        return body;
    }
    let free = free_vars(&body);
    let used: Vec<(String, Expr)> = cenv
        .iter()
        .filter(|(n, _)| free.contains(n))
        .cloned()
        .collect();
    wrap_bindings(used, body)
}

/// Closes `e` over the current frames, wrapping it in lets so it can be
/// evaluated standalone (used for guards and collapsed loop bodies).
fn close_over(mut e: Expr, frames: &[Frame<'_>]) -> Expr {
    let mut needed = free_vars(&e);
    for frame in frames.iter().rev() {
        match frame {
            Frame::Loop { name, value } => {
                if needed.remove(*name) {
                    e = Expr::new(ExprKind::Let {
                        recursive: false,
                        bindings: vec![(Pattern::Var(name.to_string()), value.clone())],
                        body: Rc::new(e),
                    });
                }
            }
            Frame::Group {
                recursive,
                bindings,
            } => {
                let group_names: Vec<&String> = bindings
                    .iter()
                    .filter_map(|(p, _)| match p {
                        Pattern::Var(n) => Some(n),
                        _ => None,
                    })
                    .collect();
                // within a recursive group, one needed name can pull in
                // its siblings
                let mut used: Vec<(Pattern, Expr)> = Vec::new();
                loop {
                    let mut grew = false;
                    for (pat, rhs) in bindings.iter() {
                        if let Pattern::Var(n) = pat {
                            if needed.contains(n) && !used.iter().any(|(p, _)| p == pat) {
                                used.push((pat.clone(), rhs.clone()));
                                needed.remove(n);
                                let mut frees = free_vars(rhs);
                                for g in &group_names {
                                    frees.remove(*g);
                                }
                                needed.extend(frees);
                                grew = true;
                            }
                        }
                    }
                    if !grew || !*recursive {
                        break;
                    }
                }
                if !used.is_empty() {
                    e = Expr::new(ExprKind::Let {
                        recursive: *recursive,
                        bindings: used,
                        body: Rc::new(e),
                    });
                }
            }
        }
    }
    e
}

/// Pushes a spent binding group inside every closure of a value that
/// still refers to it, so the value can leave the let's scope.
fn embed_group(v: &Expr, recursive: bool, bindings: &[(Pattern, Expr)], names: &[String]) -> Expr {
    let uses = |e: &Expr| {
        let free = free_vars(e);
        names.iter().any(|n| free.contains(n))
    };
    let wrap = |body: Expr| {
        Expr::new(ExprKind::Let {
            recursive,
            bindings: bindings.to_vec(),
            body: Rc::new(body),
        })
    };
    let kind = match &v.kind {
        ExprKind::Fun { param, body, env } if uses(v) => ExprKind::Fun {
            param: param.clone(),
            body: Rc::new(wrap((**body).clone())),
            env: env.clone(),
        },
        ExprKind::Function { cases, env } if uses(v) => ExprKind::Function {
            cases: cases
                .iter()
                .map(|c| {
                    let case_uses = uses(&c.rhs) || c.guard.as_ref().is_some_and(&uses);
                    if case_uses {
                        Case {
                            pattern: c.pattern.clone(),
                            guard: c.guard.as_ref().map(|g| wrap(g.clone())),
                            rhs: wrap(c.rhs.clone()),
                        }
                    } else {
                        c.clone()
                    }
                })
                .collect(),
            env: env.clone(),
        },
        ExprKind::Tuple(es) => ExprKind::Tuple(
            es.iter()
                .map(|x| embed_group(x, recursive, bindings, names))
                .collect(),
        ),
        ExprKind::Cons(h, t) => ExprKind::Cons(
            Rc::new(embed_group(h, recursive, bindings, names)),
            Rc::new(embed_group(t, recursive, bindings, names)),
        ),
        ExprKind::Constr(tag, name, Some(p)) => ExprKind::Constr(
            *tag,
            name.clone(),
            Some(Rc::new(embed_group(p, recursive, bindings, names))),
        ),
        ExprKind::Record(fields) => ExprKind::Record(
            fields
                .iter()
                .map(|(n, c)| {
                    let nv = embed_group(&c.borrow(), recursive, bindings, names);
                    (n.clone(), Rc::new(RefCell::new(nv)))
                })
                .collect(),
        ),
        _ => return v.clone(),
    };
    Expr {
        kind,
        print_as: v.print_as.clone(),
    }
}

fn re(e: &Expr, kind: ExprKind) -> Expr {
    Expr {
        kind,
        print_as: e.print_as.clone(),
    }
}

fn applicable(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Fun { .. } | ExprKind::Function { .. } | ExprKind::Builtin { .. }
    )
}

fn step<'a>(
    ctx: &mut Ctx<'_>,
    frames: &mut Vec<Frame<'a>>,
    e: &'a Expr,
) -> Result<Reduced<'a>, Signal<'a>> {
    use ExprKind::*;
    match &e.kind {
        Var(name) => match lookup(frames, ctx.builtins, name) {
            Some(found) => {
                let mut v = found.value;
                if let Some(i) = found.frame_idx {
                    capture_closures(&mut v, &frames[..i]);
                }
                if applicable(&v) && v.print_as.is_none() {
                    v.print_as = Some(name.clone());
                }
                Ok(Reduced {
                    expr: v,
                    op: LastOp::VarLookup,
                    redex: e,
                })
            }
            None => Err(Signal::Internal(format!("unbound variable {name}"))),
        },

        Op(op, a, b) => {
            if !is_value(a) {
                let r = step(ctx, frames, a)?;
                return Ok(r.map(|x| re(e, Op(*op, Rc::new(x), b.clone()))));
            }
            if !is_value(b) {
                let r = step(ctx, frames, b)?;
                return Ok(r.map(|x| re(e, Op(*op, a.clone(), Rc::new(x)))));
            }
            match (&a.kind, &b.kind) {
                (Int(x), Int(y)) => Ok(Reduced {
                    expr: arith_result(*op, *x, *y),
                    op: LastOp::Arith,
                    redex: e,
                }),
                _ => Err(ctx.ill_typed("Arithmetic operator applied to non-integer values", e)),
            }
        }

        // the right-hand side of a comparison evaluates first
        Cmp(op, a, b) => {
            if !is_value(b) {
                let r = step(ctx, frames, b)?;
                return Ok(r.map(|x| re(e, Cmp(*op, a.clone(), Rc::new(x)))));
            }
            if !is_value(a) {
                let r = step(ctx, frames, a)?;
                return Ok(r.map(|x| re(e, Cmp(*op, Rc::new(x), b.clone()))));
            }
            if !check_same_type(a, b) {
                return Err(ctx.ill_typed("Comparison between values of differing types", e));
            }
            match poly_compare(a, b) {
                Ok(ord) => {
                    let truth = match op {
                        CmpOp::Lt => ord.is_lt(),
                        CmpOp::Eq => ord.is_eq(),
                        CmpOp::Gt => ord.is_gt(),
                        CmpOp::LtEq => ord.is_le(),
                        CmpOp::GtEq => ord.is_ge(),
                        CmpOp::NotEq => ord.is_ne(),
                    };
                    Ok(Reduced {
                        expr: Expr::bool(truth),
                        op: LastOp::Comparison,
                        redex: e,
                    })
                }
                Err(CompareFunction) => Err(Signal::Raised(
                    "Invalid_argument".into(),
                    Some(Expr::str("compare: functional value")),
                    Some(e),
                )),
            }
        }

        And(a, b) => {
            if !is_value(a) {
                let r = step(ctx, frames, a)?;
                return Ok(r.map(|x| re(e, And(Rc::new(x), b.clone()))));
            }
            match a.kind {
                Bool(false) => Ok(Reduced {
                    expr: Expr::bool(false),
                    op: LastOp::Boolean,
                    redex: e,
                }),
                Bool(true) => Ok(Reduced {
                    expr: (**b).clone(),
                    op: LastOp::Boolean,
                    redex: e,
                }),
                _ => Err(ctx.ill_typed("Boolean operator applied to a non-boolean value", e)),
            }
        }

        Or(a, b) => {
            if !is_value(a) {
                let r = step(ctx, frames, a)?;
                return Ok(r.map(|x| re(e, Or(Rc::new(x), b.clone()))));
            }
            match a.kind {
                Bool(true) => Ok(Reduced {
                    expr: Expr::bool(true),
                    op: LastOp::Boolean,
                    redex: e,
                }),
                Bool(false) => Ok(Reduced {
                    expr: (**b).clone(),
                    op: LastOp::Boolean,
                    redex: e,
                }),
                _ => Err(ctx.ill_typed("Boolean operator applied to a non-boolean value", e)),
            }
        }

        If(c, t, els) => {
            if !is_value(c) {
                let r = step(ctx, frames, c)?;
                return Ok(r.map(|x| re(e, If(Rc::new(x), t.clone(), els.clone()))));
            }
            match c.kind {
                Bool(true) => Ok(Reduced {
                    expr: (**t).clone(),
                    op: LastOp::IfBool,
                    redex: e,
                }),
                Bool(false) => Ok(Reduced {
                    expr: els
                        .as_ref()
                        .map(|x| (**x).clone())
                        .unwrap_or_else(Expr::unit),
                    op: LastOp::IfBool,
                    redex: e,
                }),
                _ => Err(ctx.ill_typed("The condition of an if must be a boolean", e)),
            }
        }

        Let {
            recursive,
            bindings,
            body,
        } => step_let(ctx, frames, e, *recursive, bindings, body),

        App(_, _) => step_app(ctx, frames, e),

        Seq(a, b) => {
            if !is_value(a) {
                let r = step(ctx, frames, a)?;
                return Ok(r.map(|x| re(e, Seq(Rc::new(x), b.clone()))));
            }
            Ok(Reduced {
                expr: (**b).clone(),
                op: LastOp::Other("seq"),
                redex: e,
            })
        }

        Cons(h, t) => {
            if !is_value(h) {
                let r = step(ctx, frames, h)?;
                cons_check(ctx, &r.expr, t, e)?;
                return Ok(r.map(|x| re(e, Cons(Rc::new(x), t.clone()))));
            }
            let r = step(ctx, frames, t)?;
            cons_check(ctx, h, &r.expr, e)?;
            Ok(r.map(|x| re(e, Cons(h.clone(), Rc::new(x)))))
        }

        Tuple(es) => {
            let idx = es
                .iter()
                .position(|x| !is_value(x))
                .expect("non-value tuple");
            let r = step(ctx, frames, &es[idx])?;
            Ok(r.map(|x| {
                let mut nes = es.clone();
                nes[idx] = x;
                re(e, Tuple(nes))
            }))
        }

        // a record literal's field runs to a value in one visible step
        Record(fields) => {
            let idx = fields
                .iter()
                .position(|(_, c)| !is_value(&c.borrow()))
                .expect("non-value record");
            if !ctx.perform {
                return Ok(Reduced {
                    expr: Expr::unit(),
                    op: LastOp::Other("record"),
                    redex: e,
                });
            }
            let content = fields[idx].1.borrow().clone();
            let closed = close_over(content, frames);
            let v = run_to_value(ctx, closed)?;
            let mut nf = fields.clone();
            nf[idx] = (fields[idx].0.clone(), Rc::new(RefCell::new(v)));
            Ok(Reduced {
                expr: re(e, Record(nf)),
                op: LastOp::Other("record"),
                redex: e,
            })
        }

        Constr(tag, name, Some(p)) => {
            let r = step(ctx, frames, p)?;
            Ok(r.map(|x| re(e, Constr(*tag, name.clone(), Some(Rc::new(x))))))
        }

        Match(subject, cases) => {
            if !is_value(subject) {
                let r = step(ctx, frames, subject)?;
                return Ok(r.map(|x| re(e, Match(Rc::new(x), cases.clone()))));
            }
            if !ctx.perform {
                return Ok(Reduced {
                    expr: Expr::unit(),
                    op: LastOp::Other("match"),
                    redex: e,
                });
            }
            match cases.split_first() {
                None => Ok(Reduced {
                    expr: Expr::new(Raise("Match_failure".into(), None)),
                    op: LastOp::Other("match"),
                    redex: e,
                }),
                Some((case, rest)) => match select_case(ctx, frames, subject, case, &[])? {
                    Some(rhs) => Ok(Reduced {
                        expr: rhs,
                        op: LastOp::Other("match"),
                        redex: e,
                    }),
                    None => {
                        // drop the leading non-matching case
                        let expr = if rest.is_empty() {
                            Expr::new(Raise("Match_failure".into(), None))
                        } else {
                            re(e, Match(subject.clone(), rest.to_vec()))
                        };
                        Ok(Reduced {
                            expr,
                            op: LastOp::Other("match"),
                            redex: e,
                        })
                    }
                },
            }
        }

        TryWith(body, cases) => {
            if is_value(body) {
                return Ok(Reduced {
                    expr: (**body).clone(),
                    op: LastOp::Other("try"),
                    redex: e,
                });
            }
            match step(ctx, frames, body) {
                Ok(r) => Ok(r.map(|x| re(e, TryWith(Rc::new(x), cases.clone())))),
                Err(Signal::Raised(name, payload, redex)) => {
                    if !ctx.perform {
                        return Ok(Reduced {
                            expr: Expr::unit(),
                            op: LastOp::Other("raise"),
                            redex: redex.unwrap_or(e),
                        });
                    }
                    match match_exception(ctx, frames, &name, &payload, cases)? {
                        Some(rhs) => Ok(Reduced {
                            expr: rhs,
                            op: LastOp::Other("raise"),
                            redex: redex.unwrap_or(e),
                        }),
                        None => Err(Signal::Raised(name, payload, redex)),
                    }
                }
                Err(other) => Err(other),
            }
        }

        Raise(name, payload) => match payload {
            Some(p) if !is_value(p) => {
                let r = step(ctx, frames, p)?;
                Ok(r.map(|x| re(e, Raise(name.clone(), Some(Rc::new(x))))))
            }
            _ => Err(Signal::Raised(
                name.clone(),
                payload.as_ref().map(|p| (**p).clone()),
                Some(e),
            )),
        },

        While {
            guard,
            body,
            guard_copy,
            body_copy,
        } => {
            let rebuild = |guard: Expr, body: Expr| {
                re(
                    e,
                    While {
                        guard: Rc::new(guard),
                        body: Rc::new(body),
                        guard_copy: guard_copy.clone(),
                        body_copy: body_copy.clone(),
                    },
                )
            };
            if !is_value(guard) {
                let r = step(ctx, frames, guard)?;
                return Ok(r.map(|x| rebuild(x, (**body).clone())));
            }
            match guard.kind {
                Bool(false) => Ok(Reduced {
                    expr: Expr::unit(),
                    op: LastOp::Other("while"),
                    redex: e,
                }),
                Bool(true) => {
                    if is_value(body) {
                        Ok(Reduced {
                            expr: rebuild(guard_copy.deep_copy(), body_copy.deep_copy()),
                            op: LastOp::Other("while"),
                            redex: e,
                        })
                    } else {
                        let r = step(ctx, frames, body)?;
                        Ok(r.map(|x| rebuild((**guard).clone(), x)))
                    }
                }
                _ => Err(ctx.ill_typed("The condition of a while loop must be a boolean", e)),
            }
        }

        For {
            var,
            from,
            dir,
            to,
            body,
            body_copy,
        } => step_for(ctx, frames, e, var, from, *dir, to, body, body_copy),

        Field(x, name) => {
            if !is_value(x) {
                let r = step(ctx, frames, x)?;
                return Ok(r.map(|y| re(e, Field(Rc::new(y), name.clone()))));
            }
            match &x.kind {
                Record(fields) => match fields.iter().find(|(n, _)| n == name) {
                    Some((_, cell)) => Ok(Reduced {
                        expr: cell.borrow().clone(),
                        op: LastOp::Other("field"),
                        redex: e,
                    }),
                    None => Err(ctx.ill_typed("No such field in this record", e)),
                },
                _ => Err(ctx.ill_typed("Field access on a non-record value", e)),
            }
        }

        SetField(x, name, v) => {
            if !is_value(x) {
                let r = step(ctx, frames, x)?;
                return Ok(r.map(|y| re(e, SetField(Rc::new(y), name.clone(), v.clone()))));
            }
            if !is_value(v) {
                let r = step(ctx, frames, v)?;
                return Ok(r.map(|y| re(e, SetField(x.clone(), name.clone(), Rc::new(y)))));
            }
            match &x.kind {
                Record(fields) => match fields.iter().find(|(n, _)| n == name) {
                    Some((_, cell)) => {
                        if ctx.perform {
                            *cell.borrow_mut() = (**v).clone();
                        }
                        Ok(Reduced {
                            expr: Expr::unit(),
                            op: LastOp::Other("set-field"),
                            redex: e,
                        })
                    }
                    None => Err(ctx.ill_typed("No such field in this record", e)),
                },
                _ => Err(ctx.ill_typed("Field assignment on a non-record value", e)),
            }
        }

        Builtin { .. } => Err(Signal::Internal(
            "a saturated builtin escaped application".into(),
        )),

        Unit | Int(_) | Bool(_) | Char(_) | Str(_) | Nil | Fun { .. } | Function { .. }
        | Constr(_, _, None) => Err(Signal::Internal("step called on a value".into())),
    }
}

fn cons_check<'a>(ctx: &Ctx<'_>, h: &Expr, t: &Expr, whole: &'a Expr) -> Result<(), Signal<'a>> {
    if !ctx.opts.no_typecheck || !is_value(h) || !is_value(t) {
        return Ok(());
    }
    match &t.kind {
        ExprKind::Nil => Ok(()),
        ExprKind::Cons(h2, _) => {
            if check_same_type(h, h2) {
                Ok(())
            } else {
                Err(Signal::TypeError(
                    "Cannot cons onto this list: differing element types".into(),
                    Some(whole),
                ))
            }
        }
        _ => Err(Signal::TypeError(
            "Attempt to cons onto non-list".into(),
            Some(whole),
        )),
    }
}

fn step_let<'a>(
    ctx: &mut Ctx<'_>,
    frames: &mut Vec<Frame<'a>>,
    e: &'a Expr,
    recursive: bool,
    bindings: &'a [(Pattern, Expr)],
    body: &'a Expr,
) -> Result<Reduced<'a>, Signal<'a>> {
    // reduce the first non-value right-hand side
    if let Some(idx) = bindings.iter().position(|(_, rhs)| !is_value(rhs)) {
        if recursive {
            frames.push(Frame::Group {
                recursive: true,
                bindings,
            });
        }
        let result = step(ctx, frames, &bindings[idx].1);
        if recursive {
            frames.pop();
        }
        let r = result?;
        return Ok(r.map(|x| {
            let mut nb = bindings.to_vec();
            nb[idx].1 = x;
            re(
                e,
                ExprKind::Let {
                    recursive,
                    bindings: nb,
                    body: Rc::new(body.clone()),
                },
            )
        }));
    }

    // destructure pattern bindings now the right-hand side is a value
    if bindings.len() == 1 && !matches!(bindings[0].0, Pattern::Var(_)) {
        let (pat, v) = &bindings[0];
        let expr = match matches(v, pat, body) {
            Some(bound) => bound,
            None => Expr::new(ExprKind::Raise("Match_failure".into(), None)),
        };
        return Ok(Reduced {
            expr,
            op: LastOp::Other("bind"),
            redex: e,
        });
    }
    if bindings.len() > 1 && bindings.iter().any(|(p, _)| !matches!(p, Pattern::Var(_))) {
        // split a mixed group so each pattern destructures on its own
        let expr = bindings.iter().rev().fold(body.clone(), |acc, (p, v)| {
            Expr::new(ExprKind::Let {
                recursive,
                bindings: vec![(p.clone(), v.clone())],
                body: Rc::new(acc),
            })
        });
        return Ok(Reduced {
            expr,
            op: LastOp::Other("bind"),
            redex: e,
        });
    }

    if is_value(body) {
        let names: Vec<String> = bindings.iter().flat_map(|(p, _)| p.bound_names()).collect();
        let free = free_vars(body);
        let expr = if names.iter().any(|n| free.contains(n)) {
            embed_group(body, recursive, bindings, &names)
        } else {
            body.clone()
        };
        return Ok(Reduced {
            expr,
            op: LastOp::Other("let"),
            redex: e,
        });
    }

    frames.push(Frame::Group {
        recursive,
        bindings,
    });
    let result = step(ctx, frames, body);
    frames.pop();
    let r = result?;
    Ok(r.map(|x| {
        re(
            e,
            ExprKind::Let {
                recursive,
                bindings: bindings.to_vec(),
                body: Rc::new(x),
            },
        )
    }))
}

// the spine of nested applications: f a1 a2 ... an
fn spine(e: &Expr) -> (&Expr, Vec<&Expr>) {
    let mut args = Vec::new();
    let mut cur = e;
    while let ExprKind::App(f, a) = &cur.kind {
        args.push(&**a);
        cur = f;
    }
    args.reverse();
    (cur, args)
}

fn fun_chain_depth(e: &Expr) -> usize {
    let mut depth = 0;
    let mut cur = e;
    while let ExprKind::Fun { body, .. } = &cur.kind {
        depth += 1;
        cur = body;
    }
    depth
}

fn resolve_head(
    ctx: &Ctx<'_>,
    frames: &[Frame<'_>],
    head: &Expr,
) -> Option<Result<Expr, ()>> {
    if is_value(head) {
        return Some(Ok(head.clone()));
    }
    if let ExprKind::Var(n) = &head.kind {
        return match lookup(frames, ctx.builtins, n) {
            Some(found) => {
                let mut v = found.value;
                if let Some(i) = found.frame_idx {
                    capture_closures(&mut v, &frames[..i]);
                }
                Some(Ok(v))
            }
            None => Some(Err(())),
        };
    }
    None
}

fn step_app<'a>(
    ctx: &mut Ctx<'_>,
    frames: &mut Vec<Frame<'a>>,
    e: &'a Expr,
) -> Result<Reduced<'a>, Signal<'a>> {
    let (f, a) = match &e.kind {
        ExprKind::App(f, a) => (&**f, &**a),
        _ => unreachable!(),
    };

    // under fast-curry, syntactically adjacent value arguments are all
    // consumed at once
    if ctx.opts.fast_curry {
        let (head, args) = spine(e);
        if args.len() > 1 && args.iter().all(|x| is_value(x)) {
            if let Some(Ok(hv)) = resolve_head(ctx, frames, head) {
                let depth = fun_chain_depth(&hv);
                if depth >= args.len() {
                    let cenv = match &hv.kind {
                        ExprKind::Fun { env, .. } => env.clone(),
                        _ => Vec::new(),
                    };
                    let mut params = Vec::new();
                    let mut body = &hv;
                    for _ in 0..args.len() {
                        if let ExprKind::Fun { param, body: b, .. } = &body.kind {
                            params.push(param.clone());
                            body = b;
                        }
                    }
                    let mut expr = wrap_cenv(&cenv, body.clone());
                    for (p, arg) in params.into_iter().zip(args.iter()).rev() {
                        expr = Expr::new(ExprKind::Let {
                            recursive: false,
                            bindings: vec![(p, (*arg).clone())],
                            body: Rc::new(expr),
                        });
                    }
                    return Ok(Reduced {
                        expr,
                        op: LastOp::Other("apply"),
                        redex: e,
                    });
                }
            }
        }
    }

    // resolve the head: a function value in place, or a variable naming
    // one (applied without a separate lookup step)
    match resolve_head(ctx, frames, f) {
        Some(Err(())) => {
            let name = match &f.kind {
                ExprKind::Var(n) => n.clone(),
                _ => unreachable!(),
            };
            Err(Signal::Internal(format!("unbound variable {name}")))
        }
        Some(Ok(fv)) if applicable(&fv) => {
            if !is_value(a) {
                let r = step(ctx, frames, a)?;
                return Ok(r.map(|x| re(e, ExprKind::App(Rc::new(f.clone()), Rc::new(x)))));
            }
            apply(ctx, frames, e, fv, a)
        }
        Some(Ok(_)) => {
            if is_value(f) {
                Err(ctx.ill_typed("This expression is not a function; it cannot be applied", e))
            } else {
                // a variable naming a non-function: look it up as a step,
                // the failure will surface on the next one
                let r = step(ctx, frames, f)?;
                Ok(r.map(|x| re(e, ExprKind::App(Rc::new(x), Rc::new(a.clone())))))
            }
        }
        None => {
            let r = step(ctx, frames, f)?;
            Ok(r.map(|x| re(e, ExprKind::App(Rc::new(x), Rc::new(a.clone())))))
        }
    }
}

fn apply<'a>(
    ctx: &mut Ctx<'_>,
    frames: &mut Vec<Frame<'a>>,
    e: &'a Expr,
    fv: Expr,
    arg: &'a Expr,
) -> Result<Reduced<'a>, Signal<'a>> {
    match fv.kind {
        ExprKind::Fun { param, body, env } => {
            let inner = wrap_cenv(&env, (*body).clone());
            Ok(Reduced {
                expr: Expr::new(ExprKind::Let {
                    recursive: false,
                    bindings: vec![(param, arg.clone())],
                    body: Rc::new(inner),
                }),
                op: LastOp::Other("apply"),
                redex: e,
            })
        }
        ExprKind::Function { cases, env } => {
            if !ctx.perform {
                return Ok(Reduced {
                    expr: Expr::unit(),
                    op: LastOp::Other("match"),
                    redex: e,
                });
            }
            match cases.split_first() {
                None => Ok(Reduced {
                    expr: Expr::new(ExprKind::Raise("Match_failure".into(), None)),
                    op: LastOp::Other("match"),
                    redex: e,
                }),
                Some((case, rest)) => match select_case(ctx, frames, arg, case, &env)? {
                    Some(rhs) => Ok(Reduced {
                        expr: rhs,
                        op: LastOp::Other("match"),
                        redex: e,
                    }),
                    None => {
                        let expr = if rest.is_empty() {
                            Expr::new(ExprKind::Raise("Match_failure".into(), None))
                        } else {
                            let f2 = Expr::new(ExprKind::Function {
                                cases: rest.to_vec(),
                                env,
                            });
                            Expr::new(ExprKind::App(Rc::new(f2), Rc::new(arg.clone())))
                        };
                        Ok(Reduced {
                            expr,
                            op: LastOp::Other("match"),
                            redex: e,
                        })
                    }
                },
            }
        }
        ExprKind::Builtin {
            name,
            arity,
            mut args,
            func,
        } => {
            args.push(arg.clone());
            if args.len() < arity {
                let print_as = match name.as_str() {
                    "+" | "-" | "*" | "/" => {
                        let shown =
                            crate::trace::render_expr(args.last().unwrap(), None, &Default::default())
                                .text;
                        Some(format!("(( {name} ) {shown})"))
                    }
                    _ => None,
                };
                Ok(Reduced {
                    expr: Expr {
                        kind: ExprKind::Builtin {
                            name,
                            arity,
                            args,
                            func,
                        },
                        print_as,
                    },
                    op: LastOp::Other("apply"),
                    redex: e,
                })
            } else {
                if !ctx.perform {
                    return Ok(Reduced {
                        expr: Expr::unit(),
                        op: LastOp::InsideBuiltIn,
                        redex: e,
                    });
                }
                match (func.0)(&args, ctx.sink) {
                    Ok(result) => Ok(Reduced {
                        expr: result,
                        op: LastOp::InsideBuiltIn,
                        redex: e,
                    }),
                    Err(msg) => Err(ctx.ill_typed(&format!("{name}: {msg}"), e)),
                }
            }
        }
        _ => Err(Signal::Internal("apply on a non-function".into())),
    }
}

/// Tries one case against a value subject: pattern then guard. The
/// guard runs to completion invisibly. Returns the bound right-hand
/// side on success.
fn select_case<'a>(
    ctx: &mut Ctx<'_>,
    frames: &[Frame<'_>],
    subject: &Expr,
    case: &Case,
    cenv: &[(String, Expr)],
) -> Result<Option<Expr>, Signal<'a>> {
    let bound_rhs = match matches(subject, &case.pattern, &case.rhs) {
        Some(b) => b,
        None => return Ok(None),
    };
    if let Some(guard) = &case.guard {
        let g = matches(subject, &case.pattern, guard).expect("pattern re-match");
        let g = wrap_cenv(cenv, g);
        let g = close_over(g, frames);
        let v = run_to_value(ctx, g)?;
        match v.kind {
            ExprKind::Bool(true) => {}
            ExprKind::Bool(false) => return Ok(None),
            _ => {
                return Err(Signal::TypeError(
                    "Match guard must evaluate to a boolean".into(),
                    None,
                ))
            }
        }
    }
    Ok(Some(wrap_cenv(cenv, bound_rhs)))
}

/// Exception interception for `try ... with`.
fn match_exception<'a>(
    ctx: &mut Ctx<'_>,
    frames: &[Frame<'_>],
    name: &str,
    payload: &Option<Expr>,
    cases: &[Case],
) -> Result<Option<Expr>, Signal<'a>> {
    for case in cases {
        if let Some(bound) = match_exception_pattern(name, payload, &case.pattern, &case.rhs) {
            if let Some(guard) = &case.guard {
                let g = match_exception_pattern(name, payload, &case.pattern, guard)
                    .expect("pattern re-match");
                let g = close_over(g, frames);
                let v = run_to_value(ctx, g)?;
                match v.kind {
                    ExprKind::Bool(true) => {}
                    ExprKind::Bool(false) => continue,
                    _ => {
                        return Err(Signal::TypeError(
                            "Match guard must evaluate to a boolean".into(),
                            None,
                        ))
                    }
                }
            }
            return Ok(Some(bound));
        }
    }
    Ok(None)
}

fn match_exception_pattern(
    name: &str,
    payload: &Option<Expr>,
    pat: &Pattern,
    rhs: &Expr,
) -> Option<Expr> {
    match pat {
        Pattern::Any => Some(rhs.clone()),
        Pattern::Constr(want, ppat) => {
            if want != name {
                return None;
            }
            match (ppat, payload) {
                (None, None) => Some(rhs.clone()),
                (Some(p), Some(v)) => matches(v, p, rhs),
                _ => None,
            }
        }
        Pattern::Or(a, b) => match_exception_pattern(name, payload, a, rhs)
            .or_else(|| match_exception_pattern(name, payload, b, rhs)),
        _ => None,
    }
}

/// Evaluates a closed expression to a value without reporting steps.
/// Effects run; exceptions propagate.
fn run_to_value<'a>(ctx: &mut Ctx<'_>, mut e: Expr) -> Result<Expr, Signal<'a>> {
    loop {
        if is_value(&e) {
            return Ok(e);
        }
        if ctx.tick().is_err() {
            return Err(Signal::Limit);
        }
        let mut frames = Vec::new();
        let r = match step(ctx, &mut frames, &e) {
            Ok(r) => r,
            // detach signal lifetimes from the local expression
            Err(Signal::Raised(n, p, _)) => return Err(Signal::Raised(n, p, None)),
            Err(Signal::TypeError(m, _)) => return Err(Signal::TypeError(m, None)),
            Err(Signal::Internal(m)) => return Err(Signal::Internal(m)),
            Err(Signal::Limit) => return Err(Signal::Limit),
        };
        e = prune_lets(&r.expr);
    }
}

#[allow(clippy::too_many_arguments)]
fn step_for<'a>(
    ctx: &mut Ctx<'_>,
    frames: &mut Vec<Frame<'a>>,
    e: &'a Expr,
    var: &'a str,
    from: &'a Expr,
    dir: ForDir,
    to: &'a Expr,
    body: &'a Expr,
    body_copy: &'a Expr,
) -> Result<Reduced<'a>, Signal<'a>> {
    let rebuild = |from: Expr, to: Expr, body: Expr, body_copy: Expr| {
        re(
            e,
            ExprKind::For {
                var: var.to_string(),
                from: Rc::new(from),
                dir,
                to: Rc::new(to),
                body: Rc::new(body),
                body_copy: Rc::new(body_copy),
            },
        )
    };
    if !is_value(from) {
        let r = step(ctx, frames, from)?;
        return Ok(r.map(|x| rebuild(x, to.clone(), body.clone(), body_copy.clone())));
    }
    if !is_value(to) {
        let r = step(ctx, frames, to)?;
        return Ok(r.map(|x| rebuild(from.clone(), x, body.clone(), body_copy.clone())));
    }
    let (x, y) = match (&from.kind, &to.kind) {
        (ExprKind::Int(x), ExprKind::Int(y)) => (*x, *y),
        _ => return Err(ctx.ill_typed("For-loop bounds must be integers", e)),
    };
    let ended = match dir {
        ForDir::UpTo => x > y,
        ForDir::DownTo => y > x,
    };
    if ended {
        return Ok(Reduced {
            expr: Expr::unit(),
            op: LastOp::Other("for"),
            redex: e,
        });
    }
    let next_from = match dir {
        ForDir::UpTo => x + 1,
        ForDir::DownTo => x - 1,
    };
    if is_value(body) {
        // advance the loop by moving the spare copy into place
        return Ok(Reduced {
            expr: rebuild(
                Expr::int(next_from),
                to.clone(),
                body_copy.deep_copy(),
                body_copy.clone(),
            ),
            op: LastOp::Other("for"),
            redex: e,
        });
    }
    if ctx.opts.fast_for {
        // run the whole body for this iteration in one visible step
        if !ctx.perform {
            return Ok(Reduced {
                expr: Expr::unit(),
                op: LastOp::Other("for"),
                redex: e,
            });
        }
        let closed = close_over(
            Expr::new(ExprKind::Let {
                recursive: false,
                bindings: vec![(Pattern::Var(var.to_string()), Expr::int(x))],
                body: Rc::new(body.clone()),
            }),
            frames,
        );
        run_to_value(ctx, closed)?;
        return Ok(Reduced {
            expr: rebuild(
                Expr::int(next_from),
                to.clone(),
                body_copy.deep_copy(),
                body_copy.clone(),
            ),
            op: LastOp::Other("for"),
            redex: e,
        });
    }
    frames.push(Frame::Loop {
        name: var,
        value: Expr::int(x),
    });
    let result = step(ctx, frames, body);
    frames.pop();
    let r = result?;
    Ok(r.map(|b| rebuild(from.clone(), to.clone(), b, body_copy.clone())))
}

/// Removes spent let bindings: groups whose right-hand sides are all
/// values, bind no name still free in the body, and carry no mutable
/// record (reference cells stay visible in the trace).
pub fn prune_lets(e: &Expr) -> Expr {
    match prune(e) {
        Some(pruned) => pruned,
        None => e.clone(),
    }
}

// one bottom-up pass; None means unchanged, so unaffected subtrees are
// never rebuilt
fn prune(e: &Expr) -> Option<Expr> {
    let rebuild = |ne: Option<Expr>, orig: &Expr| ne.unwrap_or_else(|| orig.clone());
    match &e.kind {
        ExprKind::Let {
            recursive,
            bindings,
            body,
        } => {
            let pruned_rhs: Vec<Option<Expr>> = bindings.iter().map(|(_, r)| prune(r)).collect();
            let pruned_body = prune(body);
            let final_body = pruned_body.as_ref().unwrap_or(body);
            let removable = bindings
                .iter()
                .zip(&pruned_rhs)
                .all(|((_, orig), nr)| is_value(nr.as_ref().unwrap_or(orig)))
                && !bindings
                    .iter()
                    .zip(&pruned_rhs)
                    .any(|((_, orig), nr)| nr.as_ref().unwrap_or(orig).contains_record())
                && {
                    let free = free_vars(final_body);
                    !bindings
                        .iter()
                        .flat_map(|(p, _)| p.bound_names())
                        .any(|n| free.contains(&n))
                };
            if removable {
                return Some(final_body.clone());
            }
            if pruned_rhs.iter().all(|x| x.is_none()) && pruned_body.is_none() {
                return None;
            }
            let nb = bindings
                .iter()
                .zip(pruned_rhs)
                .map(|((p, orig), nr)| (p.clone(), rebuild(nr, orig)))
                .collect();
            Some(re(
                e,
                ExprKind::Let {
                    recursive: *recursive,
                    bindings: nb,
                    body: Rc::new(rebuild(pruned_body, body)),
                },
            ))
        }
        ExprKind::Tuple(es) => {
            let pruned: Vec<Option<Expr>> = es.iter().map(prune).collect();
            if pruned.iter().all(|x| x.is_none()) {
                return None;
            }
            Some(re(
                e,
                ExprKind::Tuple(
                    es.iter()
                        .zip(pruned)
                        .map(|(orig, p)| rebuild(p, orig))
                        .collect(),
                ),
            ))
        }
        ExprKind::Cons(a, b) => prune2(e, a, b, |x, y| ExprKind::Cons(Rc::new(x), Rc::new(y))),
        ExprKind::Op(op, a, b) => {
            let op = *op;
            prune2(e, a, b, move |x, y| ExprKind::Op(op, Rc::new(x), Rc::new(y)))
        }
        ExprKind::Cmp(op, a, b) => {
            let op = *op;
            prune2(e, a, b, move |x, y| {
                ExprKind::Cmp(op, Rc::new(x), Rc::new(y))
            })
        }
        ExprKind::And(a, b) => prune2(e, a, b, |x, y| ExprKind::And(Rc::new(x), Rc::new(y))),
        ExprKind::Or(a, b) => prune2(e, a, b, |x, y| ExprKind::Or(Rc::new(x), Rc::new(y))),
        ExprKind::App(a, b) => prune2(e, a, b, |x, y| ExprKind::App(Rc::new(x), Rc::new(y))),
        ExprKind::Seq(a, b) => prune2(e, a, b, |x, y| ExprKind::Seq(Rc::new(x), Rc::new(y))),
        ExprKind::Constr(tag, name, Some(p)) => {
            let np = prune(p)?;
            Some(re(
                e,
                ExprKind::Constr(*tag, name.clone(), Some(Rc::new(np))),
            ))
        }
        ExprKind::If(c, t, els) => {
            let (nc, nt) = (prune(c), prune(t));
            let nels = els.as_ref().map(|x| prune(x));
            if nc.is_none() && nt.is_none() && !matches!(nels, Some(Some(_))) {
                return None;
            }
            Some(re(
                e,
                ExprKind::If(
                    Rc::new(rebuild(nc, c)),
                    Rc::new(rebuild(nt, t)),
                    els.as_ref()
                        .map(|x| Rc::new(rebuild(nels.flatten(), x))),
                ),
            ))
        }
        ExprKind::While {
            guard,
            body,
            guard_copy,
            body_copy,
        } => {
            let (ng, nb) = (prune(guard), prune(body));
            if ng.is_none() && nb.is_none() {
                return None;
            }
            Some(re(
                e,
                ExprKind::While {
                    guard: Rc::new(rebuild(ng, guard)),
                    body: Rc::new(rebuild(nb, body)),
                    guard_copy: guard_copy.clone(),
                    body_copy: body_copy.clone(),
                },
            ))
        }
        ExprKind::For {
            var,
            from,
            dir,
            to,
            body,
            body_copy,
        } => {
            let (nf, nt, nb) = (prune(from), prune(to), prune(body));
            if nf.is_none() && nt.is_none() && nb.is_none() {
                return None;
            }
            Some(re(
                e,
                ExprKind::For {
                    var: var.clone(),
                    from: Rc::new(rebuild(nf, from)),
                    dir: *dir,
                    to: Rc::new(rebuild(nt, to)),
                    body: Rc::new(rebuild(nb, body)),
                    body_copy: body_copy.clone(),
                },
            ))
        }
        ExprKind::Field(x, n) => {
            let nx = prune(x)?;
            Some(re(e, ExprKind::Field(Rc::new(nx), n.clone())))
        }
        ExprKind::SetField(x, n, v) => {
            let (nx, nv) = (prune(x), prune(v));
            if nx.is_none() && nv.is_none() {
                return None;
            }
            Some(re(
                e,
                ExprKind::SetField(Rc::new(rebuild(nx, x)), n.clone(), Rc::new(rebuild(nv, v))),
            ))
        }
        ExprKind::Raise(n, Some(p)) => {
            let np = prune(p)?;
            Some(re(e, ExprKind::Raise(n.clone(), Some(Rc::new(np)))))
        }
        ExprKind::Match(s, cases) => prune_with_cases(e, s, cases, true),
        ExprKind::TryWith(s, cases) => prune_with_cases(e, s, cases, false),
        _ => None,
    }
}

fn prune2(
    e: &Expr,
    a: &Expr,
    b: &Expr,
    mk: impl FnOnce(Expr, Expr) -> ExprKind,
) -> Option<Expr> {
    let (na, nb) = (prune(a), prune(b));
    if na.is_none() && nb.is_none() {
        return None;
    }
    Some(re(
        e,
        mk(
            na.unwrap_or_else(|| a.clone()),
            nb.unwrap_or_else(|| b.clone()),
        ),
    ))
}

fn prune_with_cases(e: &Expr, s: &Expr, cases: &[Case], is_match: bool) -> Option<Expr> {
    let ns = prune(s);
    let ncases: Vec<(Option<Expr>, Option<Expr>)> = cases
        .iter()
        .map(|c| (c.guard.as_ref().and_then(prune), prune(&c.rhs)))
        .collect();
    if ns.is_none() && ncases.iter().all(|(g, r)| g.is_none() && r.is_none()) {
        return None;
    }
    let built: Vec<Case> = cases
        .iter()
        .zip(ncases)
        .map(|(c, (g, r))| Case {
            pattern: c.pattern.clone(),
            guard: match (c.guard.as_ref(), g) {
                (Some(orig), ng) => Some(ng.unwrap_or_else(|| orig.clone())),
                (None, _) => None,
            },
            rhs: r.unwrap_or_else(|| c.rhs.clone()),
        })
        .collect();
    let subject = Rc::new(ns.unwrap_or_else(|| s.clone()));
    let kind = if is_match {
        ExprKind::Match(subject, built)
    } else {
        ExprKind::TryWith(subject, built)
    };
    Some(re(e, kind))
}

// ---- public driver surface ----

/// Performs a single reduction. Values report `AlreadyValue`; an
/// uncaught exception or (under `no_typecheck`) an ill-typed redex
/// surface as outcomes rather than errors.
pub fn eval_step(
    env: &Env,
    e: &Expr,
    opts: &EvalOptions,
    sink: &mut dyn Write,
) -> Result<StepOutcome, EvalError> {
    if is_value(e) {
        return Ok(StepOutcome::AlreadyValue);
    }
    let mut ctx = Ctx {
        opts,
        builtins: &env.builtins,
        sink,
        perform: true,
        micro: 0,
    };
    let mut frames = frames_from_env(env);
    match step(&mut ctx, &mut frames, e) {
        Ok(r) => Ok(StepOutcome::Next(prune_lets(&r.expr), r.op)),
        Err(Signal::Raised(n, p, _)) => Ok(StepOutcome::Uncaught(n, p)),
        Err(Signal::TypeError(m, _)) => Ok(StepOutcome::RunTimeTypeError(m)),
        Err(Signal::Internal(m)) => Err(EvalError::Internal(m)),
        Err(Signal::Limit) => Err(EvalError::StepLimitExceeded),
    }
}

/// Classifies the next reduction without performing it: no builtin is
/// invoked and no mutation happens.
pub fn peek(env: &Env, e: &Expr) -> Result<LastOp, EvalError> {
    find_redex(env, e, &EvalOptions::default()).map(|(op, _)| op)
}

/// Like [`peek`], but with explicit options and the redex subterm.
pub fn find_redex<'a>(
    env: &'a Env,
    e: &'a Expr,
    opts: &EvalOptions,
) -> Result<(LastOp, &'a Expr), EvalError> {
    if is_value(e) {
        return Err(EvalError::PeekOnValue);
    }
    let mut sink = std::io::sink();
    let mut ctx = Ctx {
        opts,
        builtins: &env.builtins,
        sink: &mut sink,
        perform: false,
        micro: 0,
    };
    let mut frames = frames_from_env(env);
    match step(&mut ctx, &mut frames, e) {
        Ok(r) => Ok((r.op, r.redex)),
        Err(Signal::Raised(_, _, redex)) => Ok((LastOp::Other("raise"), redex.unwrap_or(e))),
        Err(Signal::TypeError(_, redex)) => Ok((LastOp::Other("error"), redex.unwrap_or(e))),
        Err(Signal::Internal(m)) => Err(EvalError::Internal(m)),
        Err(Signal::Limit) => Err(EvalError::StepLimitExceeded),
    }
}

/// A resumable evaluation: one state at a time, with peeking.
pub struct Stepper<'e> {
    env: &'e Env,
    opts: EvalOptions,
    current: Expr,
    steps: u64,
    micro: u64,
}

impl<'e> Stepper<'e> {
    pub fn new(env: &'e Env, e: Expr, opts: EvalOptions) -> Stepper<'e> {
        Stepper {
            env,
            opts,
            current: e,
            steps: 0,
            micro: 0,
        }
    }

    pub fn current(&self) -> &Expr {
        &self.current
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        is_value(&self.current)
    }

    pub fn options(&self) -> &EvalOptions {
        &self.opts
    }

    pub fn find_redex(&self) -> Result<(LastOp, &Expr), EvalError> {
        find_redex(self.env, &self.current, &self.opts)
    }

    /// One reduction. The sink receives builtin output as it happens.
    pub fn advance(&mut self, sink: &mut dyn Write) -> Result<StepOutcome, EvalError> {
        if is_value(&self.current) {
            return Ok(StepOutcome::AlreadyValue);
        }
        if let Some(max) = self.opts.max_steps {
            if self.micro >= max {
                return Err(EvalError::StepLimitExceeded);
            }
        }
        let mut ctx = Ctx {
            opts: &self.opts,
            builtins: &self.env.builtins,
            sink,
            perform: true,
            micro: self.micro + 1,
        };
        let mut frames = frames_from_env(self.env);
        let result = step(&mut ctx, &mut frames, &self.current);
        drop(frames);
        self.micro = ctx.micro;
        match result {
            Ok(r) => {
                let op = r.op.clone();
                self.current = prune_lets(&r.expr);
                self.steps += 1;
                Ok(StepOutcome::Next(self.current.clone(), op))
            }
            Err(Signal::Raised(n, p, _)) => {
                self.steps += 1;
                Ok(StepOutcome::Uncaught(n, p))
            }
            Err(Signal::TypeError(m, _)) => {
                self.steps += 1;
                Ok(StepOutcome::RunTimeTypeError(m))
            }
            Err(Signal::Internal(m)) => Err(EvalError::Internal(m)),
            Err(Signal::Limit) => Err(EvalError::StepLimitExceeded),
        }
    }
}

/// Iterates `eval_step` to completion, invoking the observer with
/// (pre-state, op, post-state) after every step.
pub fn run(
    env: &Env,
    e: &Expr,
    observer: &mut dyn FnMut(&Expr, &LastOp, &Expr),
    opts: &EvalOptions,
    sink: &mut dyn Write,
) -> Result<FinalOutcome, EvalError> {
    let mut stepper = Stepper::new(env, e.clone(), opts.clone());
    loop {
        if stepper.is_done() {
            return Ok(FinalOutcome {
                outcome: Outcome::Value(stepper.current.clone()),
                steps: stepper.steps,
            });
        }
        let pre = stepper.current.clone();
        match stepper.advance(sink)? {
            StepOutcome::Next(post, op) => observer(&pre, &op, &post),
            StepOutcome::Uncaught(n, p) => {
                return Ok(FinalOutcome {
                    outcome: Outcome::Uncaught(n, p),
                    steps: stepper.steps,
                })
            }
            StepOutcome::RunTimeTypeError(m) => {
                return Ok(FinalOutcome {
                    outcome: Outcome::RunTimeTypeError(m),
                    steps: stepper.steps,
                })
            }
            StepOutcome::AlreadyValue => unreachable!(),
        }
    }
}
