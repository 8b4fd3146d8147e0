//! Structural polymorphic comparison over values, mirroring what a
//! runtime does by traversing heap representations.

use std::cmp::Ordering;

use crate::syntax::{Expr, ExprKind};

/// Comparison failed because a functional value was encountered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareFunction;

impl std::fmt::Display for CompareFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("compare: functional value")
    }
}

// rank for cross-shape comparisons, so the order stays total even on
// values a typechecker would reject
fn rank(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Unit => 0,
        ExprKind::Bool(_) => 1,
        ExprKind::Int(_) => 2,
        ExprKind::Char(_) => 3,
        ExprKind::Str(_) => 4,
        ExprKind::Nil | ExprKind::Cons(_, _) => 5,
        ExprKind::Tuple(_) => 6,
        ExprKind::Record(_) => 7,
        ExprKind::Constr(_, _, _) => 8,
        _ => 9,
    }
}

/// Structural lexicographic comparison of two values. Functions may not
/// be compared.
pub fn poly_compare(a: &Expr, b: &Expr) -> Result<Ordering, CompareFunction> {
    use ExprKind::*;
    match (&a.kind, &b.kind) {
        (Fun { .. } | Function { .. } | Builtin { .. }, _)
        | (_, Fun { .. } | Function { .. } | Builtin { .. }) => Err(CompareFunction),
        (Unit, Unit) => Ok(Ordering::Equal),
        (Bool(x), Bool(y)) => Ok(x.cmp(y)),
        (Int(x), Int(y)) => Ok(x.cmp(y)),
        (Char(x), Char(y)) => Ok(x.cmp(y)),
        (Str(x), Str(y)) => Ok(x.cmp(y)),
        (Nil, Nil) => Ok(Ordering::Equal),
        (Nil, Cons(_, _)) => Ok(Ordering::Less),
        (Cons(_, _), Nil) => Ok(Ordering::Greater),
        (Cons(h1, t1), Cons(h2, t2)) => match poly_compare(h1, h2)? {
            Ordering::Equal => poly_compare(t1, t2),
            o => Ok(o),
        },
        (Tuple(xs), Tuple(ys)) => compare_seq(xs.iter(), ys.iter()),
        (Record(xs), Record(ys)) => {
            let xs: Vec<Expr> = xs.iter().map(|(_, c)| c.borrow().clone()).collect();
            let ys: Vec<Expr> = ys.iter().map(|(_, c)| c.borrow().clone()).collect();
            compare_seq(xs.iter(), ys.iter())
        }
        (Constr(t1, _, p1), Constr(t2, _, p2)) => {
            // nullary constructors order below payload-carrying ones,
            // then by tag, then by payload
            let k1 = p1.is_some() as u8;
            let k2 = p2.is_some() as u8;
            match k1.cmp(&k2).then(t1.cmp(t2)) {
                Ordering::Equal => match (p1, p2) {
                    (Some(x), Some(y)) => poly_compare(x, y),
                    _ => Ok(Ordering::Equal),
                },
                o => Ok(o),
            }
        }
        _ => Ok(rank(a).cmp(&rank(b))),
    }
}

fn compare_seq<'a>(
    xs: impl ExactSizeIterator<Item = &'a Expr>,
    ys: impl ExactSizeIterator<Item = &'a Expr>,
) -> Result<Ordering, CompareFunction> {
    let len_order = xs.len().cmp(&ys.len());
    for (x, y) in xs.zip(ys) {
        match poly_compare(x, y)? {
            Ordering::Equal => {}
            o => return Ok(o),
        }
    }
    Ok(len_order)
}

/// A "same type" approximation over values, one structural level deep.
/// Functions are excepted: any two functional values pass.
pub fn check_same_type(a: &Expr, b: &Expr) -> bool {
    same_class(a, b, 1)
}

fn same_class(a: &Expr, b: &Expr, depth: u8) -> bool {
    use ExprKind::*;
    match (&a.kind, &b.kind) {
        (Unit, Unit)
        | (Bool(_), Bool(_))
        | (Int(_), Int(_))
        | (Char(_), Char(_))
        | (Str(_), Str(_)) => true,
        (Nil | Cons(_, _), Nil | Cons(_, _)) => true,
        (Fun { .. } | Function { .. } | Builtin { .. }, Fun { .. } | Function { .. } | Builtin { .. }) => {
            true
        }
        (Tuple(xs), Tuple(ys)) => {
            xs.len() == ys.len()
                && (depth == 0
                    || xs
                        .iter()
                        .zip(ys)
                        .all(|(x, y)| same_class(x, y, depth - 1)))
        }
        (Record(xs), Record(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|((n1, _), (n2, _))| n1 == n2)
        }
        (Constr(_, _, _), Constr(_, _, _)) => true,
        _ => false,
    }
}
