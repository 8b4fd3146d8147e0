//! Pattern matching. A successful match wraps the right-hand side in
//! non-recursive lets binding the matched variables, the first-bound
//! variable outermost.

use std::rc::Rc;

use crate::syntax::{Expr, ExprKind, Pattern};

/// Matches `subject` (a value) against `pat`. On success returns `rhs`
/// wrapped in a let for each bound variable; on failure returns `None`.
/// Guards are evaluated by the caller, not here.
pub fn matches(subject: &Expr, pat: &Pattern, rhs: &Expr) -> Option<Expr> {
    let mut bindings = Vec::new();
    if match_collect(subject, pat, &mut bindings) {
        Some(wrap_bindings(bindings, rhs.clone()))
    } else {
        None
    }
}

/// Wraps `rhs` in single-binding lets, first binding outermost.
pub fn wrap_bindings(bindings: Vec<(String, Expr)>, rhs: Expr) -> Expr {
    bindings.into_iter().rev().fold(rhs, |acc, (name, value)| {
        Expr::new(ExprKind::Let {
            recursive: false,
            bindings: vec![(Pattern::Var(name), value)],
            body: Rc::new(acc),
        })
    })
}

fn match_collect(subject: &Expr, pat: &Pattern, out: &mut Vec<(String, Expr)>) -> bool {
    match (pat, &subject.kind) {
        (Pattern::Any, _) => true,
        (Pattern::Var(name), _) => {
            out.push((name.clone(), subject.clone()));
            true
        }
        (Pattern::Unit, ExprKind::Unit) => true,
        (Pattern::Bool(want), ExprKind::Bool(b)) => want == b,
        (Pattern::Int(want), ExprKind::Int(i)) => want == i,
        (Pattern::Str(want), ExprKind::Str(s)) => want == s,
        (Pattern::Char(want), ExprKind::Char(c)) => want == c,
        (Pattern::CharRange(lo, hi), ExprKind::Char(c)) => lo <= c && c <= hi,
        (Pattern::Nil, ExprKind::Nil) => true,
        (Pattern::Cons(ph, pt), ExprKind::Cons(h, t)) => {
            match_collect(h, ph, out) && match_collect(t, pt, out)
        }
        (Pattern::Tuple(ps), ExprKind::Tuple(es)) => {
            ps.len() == es.len()
                && es
                    .iter()
                    .zip(ps)
                    .all(|(e, p)| match_collect(e, p, out))
        }
        (Pattern::Record(pfields), ExprKind::Record(fields)) => {
            pfields.iter().all(|(name, p)| {
                fields
                    .iter()
                    .find(|(fname, _)| fname == name)
                    .is_some_and(|(_, cell)| match_collect(&cell.borrow(), p, out))
            })
        }
        (Pattern::Alias(name, sub), _) => {
            // the sub-pattern's binders end up outside the alias binding
            if match_collect(subject, sub, out) {
                out.push((name.clone(), subject.clone()));
                true
            } else {
                false
            }
        }
        (Pattern::Or(a, b), _) => {
            let mark = out.len();
            if match_collect(subject, a, out) {
                true
            } else {
                out.truncate(mark);
                match_collect(subject, b, out)
            }
        }
        (Pattern::Constr(want, ppayload), ExprKind::Constr(_, name, payload)) => {
            want == name
                && match (ppayload, payload) {
                    (None, None) => true,
                    (Some(p), Some(v)) => match_collect(v, p, out),
                    _ => false,
                }
        }
        _ => false,
    }
}
