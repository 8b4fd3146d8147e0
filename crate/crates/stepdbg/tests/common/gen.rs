//! Random well-typed program generation for cross-engine checks.

use std::rc::Rc;

use rand::prelude::*;

use stepdbg::bytecode::CoreProg;
use stepdbg::syntax::{ArithOp, Case, CmpOp, Expr, ExprKind, Pattern};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ty {
    Int,
    Bool,
    IntList,
    IntFun,
}

const NAMES: &[&str] = &["a", "b", "c", "d", "f", "g"];

pub struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    /// in-scope variables, innermost last
    scope: Vec<(String, Ty)>,
}

impl<'r, R: Rng> Gen<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        Gen {
            rng,
            scope: Vec::new(),
        }
    }

    /// A closed program of integer type.
    pub fn program(&mut self, depth: u32) -> Expr {
        self.expr(Ty::Int, depth)
    }

    fn pick_var(&mut self, ty: Ty) -> Option<Expr> {
        let candidates: Vec<&String> = self
            .scope
            .iter()
            .rev()
            .filter(|(_, t)| *t == ty)
            .map(|(n, _)| n)
            .collect();
        // shadowed names resolve innermost; only offer the visible ones
        let visible: Vec<&String> = candidates
            .into_iter()
            .filter(|n| {
                self.scope
                    .iter()
                    .rev()
                    .find(|(m, _)| m == *n)
                    .map(|(_, t)| *t == ty)
                    .unwrap_or(false)
            })
            .collect();
        if visible.is_empty() {
            return None;
        }
        let i = self.rng.gen_range(0..visible.len());
        Some(Expr::var(visible[i].clone()))
    }

    fn fresh_name(&mut self) -> String {
        NAMES[self.rng.gen_range(0..NAMES.len())].to_string()
    }

    pub fn expr(&mut self, ty: Ty, depth: u32) -> Expr {
        if depth == 0 {
            return self.leaf(ty);
        }
        let roll = self.rng.gen_range(0..100);
        match ty {
            Ty::Int => match roll {
                0..=14 => self.leaf(ty),
                15..=38 => {
                    let op = *[ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]
                        .choose(self.rng)
                        .unwrap();
                    Expr::op(op, self.expr(Ty::Int, depth - 1), self.expr(Ty::Int, depth - 1))
                }
                39..=50 => self.if_expr(ty, depth),
                51..=66 => self.let_expr(ty, depth),
                67..=74 => {
                    let f = self.expr(Ty::IntFun, depth - 1);
                    let a = self.expr(Ty::Int, depth - 1);
                    Expr::app(f, a)
                }
                75..=82 => self.match_list(ty, depth),
                83..=88 => self.try_expr(ty, depth),
                89..=93 => {
                    // effects interleave with the computation
                    let printed = self.expr(Ty::Int, depth - 1);
                    let rest = self.expr(Ty::Int, depth - 1);
                    Expr::new(ExprKind::Seq(
                        Rc::new(Expr::app(Expr::var("print_int"), printed)),
                        Rc::new(rest),
                    ))
                }
                _ => self.leaf(ty),
            },
            Ty::Bool => match roll {
                0..=19 => self.leaf(ty),
                20..=49 => {
                    let op = *[
                        CmpOp::Lt,
                        CmpOp::Eq,
                        CmpOp::Gt,
                        CmpOp::LtEq,
                        CmpOp::GtEq,
                        CmpOp::NotEq,
                    ]
                    .choose(self.rng)
                    .unwrap();
                    Expr::cmp(op, self.expr(Ty::Int, depth - 1), self.expr(Ty::Int, depth - 1))
                }
                50..=64 => Expr::new(ExprKind::And(
                    Rc::new(self.expr(Ty::Bool, depth - 1)),
                    Rc::new(self.expr(Ty::Bool, depth - 1)),
                )),
                65..=79 => Expr::new(ExprKind::Or(
                    Rc::new(self.expr(Ty::Bool, depth - 1)),
                    Rc::new(self.expr(Ty::Bool, depth - 1)),
                )),
                80..=89 => self.if_expr(ty, depth),
                _ => self.let_expr(ty, depth),
            },
            Ty::IntList => match roll {
                0..=24 => self.leaf(ty),
                25..=49 => Expr::new(ExprKind::Cons(
                    Rc::new(self.expr(Ty::Int, depth - 1)),
                    Rc::new(self.expr(Ty::IntList, depth - 1)),
                )),
                50..=64 => {
                    let a = self.expr(Ty::IntList, depth - 1);
                    let b = self.expr(Ty::IntList, depth - 1);
                    Expr::app(Expr::app(Expr::var("@"), a), b)
                }
                65..=79 => self.if_expr(ty, depth),
                _ => self.let_expr(ty, depth),
            },
            Ty::IntFun => match roll {
                0..=39 => self.leaf(ty),
                _ => self.let_expr(ty, depth),
            },
        }
    }

    fn leaf(&mut self, ty: Ty) -> Expr {
        if self.rng.gen_bool(0.4) {
            if let Some(v) = self.pick_var(ty) {
                return v;
            }
        }
        match ty {
            Ty::Int => Expr::int(self.rng.gen_range(-9..50)),
            Ty::Bool => Expr::bool(self.rng.gen_bool(0.5)),
            Ty::IntList => {
                let n = self.rng.gen_range(0..4);
                let mut list = Expr::new(ExprKind::Nil);
                for _ in 0..n {
                    list = Expr::new(ExprKind::Cons(
                        Rc::new(Expr::int(self.rng.gen_range(0..20))),
                        Rc::new(list),
                    ));
                }
                list
            }
            Ty::IntFun => {
                let name = self.fresh_name();
                self.scope.push((name.clone(), Ty::Int));
                let body = self.expr(Ty::Int, 2);
                self.scope.pop();
                Expr::new(ExprKind::Fun {
                    param: Pattern::Var(name),
                    body: Rc::new(body),
                    env: Vec::new(),
                })
            }
        }
    }

    fn if_expr(&mut self, ty: Ty, depth: u32) -> Expr {
        Expr::new(ExprKind::If(
            Rc::new(self.expr(Ty::Bool, depth - 1)),
            Rc::new(self.expr(ty, depth - 1)),
            Some(Rc::new(self.expr(ty, depth - 1))),
        ))
    }

    fn let_expr(&mut self, ty: Ty, depth: u32) -> Expr {
        let bound_ty = *[Ty::Int, Ty::Bool, Ty::IntList, Ty::IntFun]
            .choose(self.rng)
            .unwrap();
        let rhs = self.expr(bound_ty, depth - 1);
        let name = self.fresh_name();
        self.scope.push((name.clone(), bound_ty));
        let body = self.expr(ty, depth - 1);
        self.scope.pop();
        Expr::new(ExprKind::Let {
            recursive: false,
            bindings: vec![(Pattern::Var(name), rhs)],
            body: Rc::new(body),
        })
    }

    fn match_list(&mut self, ty: Ty, depth: u32) -> Expr {
        let subject = self.expr(Ty::IntList, depth - 1);
        let nil_rhs = self.expr(ty, depth - 1);
        let h = self.fresh_name();
        let t = format!("{h}s");
        self.scope.push((h.clone(), Ty::Int));
        self.scope.push((t.clone(), Ty::IntList));
        let guard = if self.rng.gen_bool(0.3) {
            Some(Expr::cmp(
                CmpOp::Lt,
                Expr::var(h.clone()),
                Expr::int(self.rng.gen_range(0..30)),
            ))
        } else {
            None
        };
        let cons_rhs = self.expr(ty, depth - 1);
        self.scope.pop();
        self.scope.pop();
        let mut cases = vec![
            Case {
                pattern: Pattern::Nil,
                guard: None,
                rhs: nil_rhs,
            },
            Case {
                pattern: Pattern::Cons(
                    Box::new(Pattern::Var(h)),
                    Box::new(Pattern::Var(t)),
                ),
                guard,
                rhs: cons_rhs,
            },
        ];
        if cases[1].guard.is_some() {
            // a guarded cons case needs a fallback
            cases.push(Case {
                pattern: Pattern::Any,
                guard: None,
                rhs: self.expr(ty, 0),
            });
        }
        Expr::new(ExprKind::Match(Rc::new(subject), cases))
    }

    fn try_expr(&mut self, ty: Ty, depth: u32) -> Expr {
        let body = if self.rng.gen_bool(0.5) {
            // raise somewhere inside
            Expr::new(ExprKind::Seq(
                Rc::new(Expr::new(ExprKind::Raise(
                    "Exit".into(),
                    None,
                ))),
                Rc::new(self.expr(ty, depth - 1)),
            ))
        } else {
            self.expr(ty, depth - 1)
        };
        Expr::new(ExprKind::TryWith(
            Rc::new(body),
            vec![Case {
                pattern: Pattern::Constr("Exit".into(), None),
                guard: None,
                rhs: self.expr(ty, depth - 1),
            }],
        ))
    }

    /// A random data value (no functions), for comparison laws.
    pub fn data_value(&mut self, depth: u32) -> Expr {
        let roll = if depth == 0 {
            self.rng.gen_range(0..5)
        } else {
            self.rng.gen_range(0..9)
        };
        match roll {
            0 => Expr::unit(),
            1 => Expr::int(self.rng.gen_range(-5..6)),
            2 => Expr::bool(self.rng.gen_bool(0.5)),
            3 => Expr::new(ExprKind::Char(
                char::from_u32(self.rng.gen_range(97..110)).unwrap(),
            )),
            4 => Expr::str(
                ["", "a", "ab", "zz"][self.rng.gen_range(0..4)].to_string(),
            ),
            5 => {
                let n = self.rng.gen_range(0..3);
                let mut list = Expr::new(ExprKind::Nil);
                for _ in 0..n {
                    list = Expr::new(ExprKind::Cons(
                        Rc::new(self.data_value(depth - 1)),
                        Rc::new(list),
                    ));
                }
                list
            }
            6 => {
                let n = self.rng.gen_range(2..4);
                Expr::new(ExprKind::Tuple(
                    (0..n).map(|_| self.data_value(depth - 1)).collect(),
                ))
            }
            7 => Expr::record(vec![("contents".into(), self.data_value(depth - 1))]),
            _ => {
                let (tag, name, has_payload) = *[
                    (0u32, "A", false),
                    (1u32, "B", false),
                    (0u32, "C", true),
                ]
                .choose(self.rng)
                .unwrap();
                let payload = if has_payload {
                    Some(Rc::new(self.data_value(depth - 1)))
                } else {
                    None
                };
                Expr::new(ExprKind::Constr(tag, name.to_string(), payload))
            }
        }
    }

    /// A random well-typed core program for the bytecode route.
    pub fn core_program(&mut self, depth: u32) -> CoreProg {
        self.core(CoreTy::Int, depth, &mut Vec::new())
    }

    fn core(&mut self, ty: CoreTy, depth: u32, binders: &mut Vec<(String, CoreTy)>) -> CoreProg {
        if depth == 0 {
            return self.core_leaf(ty, binders);
        }
        let roll = self.rng.gen_range(0..100);
        match ty {
            CoreTy::Int => match roll {
                0..=19 => self.core_leaf(ty, binders),
                20..=44 => {
                    let op = *[ArithOp::Add, ArithOp::Sub, ArithOp::Mul]
                        .choose(self.rng)
                        .unwrap();
                    CoreProg::Op(
                        op,
                        Rc::new(self.core(CoreTy::Int, depth - 1, binders)),
                        Rc::new(self.core(CoreTy::Int, depth - 1, binders)),
                    )
                }
                45..=64 => {
                    let name = self.fresh_name();
                    let rhs = self.core(CoreTy::Int, depth - 1, binders);
                    binders.push((name.clone(), CoreTy::Int));
                    let body = self.core(CoreTy::Int, depth - 1, binders);
                    binders.pop();
                    CoreProg::Let(name, Rc::new(rhs), Rc::new(body))
                }
                65..=79 => CoreProg::If(
                    Rc::new(self.core(CoreTy::Bool, depth - 1, binders)),
                    Rc::new(self.core(CoreTy::Int, depth - 1, binders)),
                    Rc::new(self.core(CoreTy::Int, depth - 1, binders)),
                ),
                _ => {
                    let name = self.fresh_name();
                    binders.push((name.clone(), CoreTy::Int));
                    let body = self.core(CoreTy::Int, depth - 1, binders);
                    binders.pop();
                    let arg = self.core(CoreTy::Int, depth - 1, binders);
                    CoreProg::Apply(
                        Rc::new(CoreProg::Lambda(name, Rc::new(body))),
                        Rc::new(arg),
                    )
                }
            },
            CoreTy::Bool => match roll {
                0..=29 => self.core_leaf(ty, binders),
                _ => CoreProg::Eq(
                    Rc::new(self.core(CoreTy::Int, depth - 1, binders)),
                    Rc::new(self.core(CoreTy::Int, depth - 1, binders)),
                ),
            },
        }
    }

    fn core_leaf(&mut self, ty: CoreTy, binders: &[(String, CoreTy)]) -> CoreProg {
        match ty {
            CoreTy::Int => {
                let vars: Vec<(usize, &String)> = binders
                    .iter()
                    .rev()
                    .enumerate()
                    .filter(|(_, (_, t))| *t == CoreTy::Int)
                    .map(|(i, (n, _))| (i + 1, n))
                    .collect();
                // a shadowed name must resolve to its innermost binder
                let visible: Vec<(usize, &String)> = vars
                    .iter()
                    .filter(|(idx, n)| {
                        binders
                            .iter()
                            .rev()
                            .position(|(m, _)| m == *n)
                            .map(|i| i + 1 == *idx)
                            .unwrap_or(false)
                    })
                    .cloned()
                    .collect();
                if !visible.is_empty() && self.rng.gen_bool(0.5) {
                    let (idx, name) = visible[self.rng.gen_range(0..visible.len())];
                    CoreProg::Var(name.clone(), idx)
                } else {
                    CoreProg::Int(self.rng.gen_range(-9..20))
                }
            }
            CoreTy::Bool => CoreProg::Bool(self.rng.gen_bool(0.5)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CoreTy {
    Int,
    Bool,
}
