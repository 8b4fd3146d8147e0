//! The builtins bridge: named host functions exposed to programs as
//! curried values, invoked only at saturation.

use std::collections::HashMap;
use std::rc::Rc;

use crate::syntax::{ArithOp, Expr, ExprKind, HostFn};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateBuiltin(pub String);

impl std::fmt::Display for DuplicateBuiltin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "builtin {} is already registered", self.0)
    }
}

#[derive(Clone, Default)]
pub struct BuiltinTable {
    map: HashMap<String, Expr>,
}

impl BuiltinTable {
    pub fn new() -> BuiltinTable {
        BuiltinTable::default()
    }

    /// Registers a builtin of the given arity. Partial application is
    /// permitted; the host function runs only on the final argument.
    pub fn register<F>(&mut self, name: &str, arity: usize, f: F) -> Result<(), DuplicateBuiltin>
    where
        F: Fn(&[Expr], &mut dyn std::io::Write) -> Result<Expr, String> + 'static,
    {
        assert!(arity >= 1, "builtins take at least one argument");
        if self.map.contains_key(name) {
            return Err(DuplicateBuiltin(name.to_string()));
        }
        let b = Expr::new(ExprKind::Builtin {
            name: name.to_string(),
            arity,
            args: Vec::new(),
            func: HostFn(Rc::new(f)),
        });
        self.map.insert(name.to_string(), b);
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&Expr> {
        self.map.get(name)
    }
}

fn int_arg(e: &Expr) -> Result<i64, String> {
    match e.kind {
        ExprKind::Int(i) => Ok(i),
        _ => Err("expected an integer".into()),
    }
}

fn str_arg(e: &Expr) -> Result<&str, String> {
    match &e.kind {
        ExprKind::Str(s) => Ok(s),
        _ => Err("expected a string".into()),
    }
}

fn write_out(out: &mut dyn std::io::Write, text: &str) -> Result<(), String> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| format!("write failed: {e}"))
}

/// The fixed prelude: `print_int`, `print_string`, `print_char`, `ref`,
/// `!`, `:=`, `failwith`, `invalid_arg`, list append `@`, and the four
/// arithmetic operators in section form.
pub fn prelude() -> BuiltinTable {
    let mut t = BuiltinTable::new();

    t.register("print_int", 1, |args, out| {
        let i = int_arg(&args[0])?;
        write_out(out, &i.to_string())?;
        Ok(Expr::unit())
    })
    .unwrap();

    t.register("print_string", 1, |args, out| {
        write_out(out, str_arg(&args[0])?)?;
        Ok(Expr::unit())
    })
    .unwrap();

    t.register("print_char", 1, |args, out| {
        match args[0].kind {
            ExprKind::Char(c) => write_out(out, &c.to_string())?,
            _ => return Err("expected a character".into()),
        }
        Ok(Expr::unit())
    })
    .unwrap();

    t.register("ref", 1, |args, _| Ok(Expr::record(vec![("contents".into(), args[0].clone())])))
        .unwrap();

    t.register("!", 1, |args, _| match &args[0].kind {
        ExprKind::Record(fields) => fields
            .iter()
            .find(|(n, _)| n == "contents")
            .map(|(_, cell)| cell.borrow().clone())
            .ok_or_else(|| "dereference of a non-reference".into()),
        _ => Err("dereference of a non-reference".into()),
    })
    .unwrap();

    t.register(":=", 2, |args, _| match &args[0].kind {
        ExprKind::Record(fields) => {
            let cell = fields
                .iter()
                .find(|(n, _)| n == "contents")
                .map(|(_, cell)| cell)
                .ok_or_else(|| String::from("assignment to a non-reference"))?;
            *cell.borrow_mut() = args[1].clone();
            Ok(Expr::unit())
        }
        _ => Err("assignment to a non-reference".into()),
    })
    .unwrap();

    t.register("failwith", 1, |args, _| {
        str_arg(&args[0])?;
        Ok(Expr::new(ExprKind::Raise(
            "Failure".into(),
            Some(Rc::new(args[0].clone())),
        )))
    })
    .unwrap();

    t.register("invalid_arg", 1, |args, _| {
        str_arg(&args[0])?;
        Ok(Expr::new(ExprKind::Raise(
            "Invalid_argument".into(),
            Some(Rc::new(args[0].clone())),
        )))
    })
    .unwrap();

    t.register("@", 2, |args, _| {
        // collect the first list's elements, then re-cons onto the second
        let mut elems = Vec::new();
        let mut cur = &args[0];
        loop {
            match &cur.kind {
                ExprKind::Nil => break,
                ExprKind::Cons(h, t) => {
                    elems.push((**h).clone());
                    cur = t;
                }
                _ => return Err("append of a non-list".into()),
            }
        }
        let mut out = args[1].clone();
        for h in elems.into_iter().rev() {
            out = Expr::new(ExprKind::Cons(Rc::new(h), Rc::new(out)));
        }
        Ok(out)
    })
    .unwrap();

    for op in [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div] {
        t.register(&op.to_string(), 2, move |args, _| {
            let a = int_arg(&args[0])?;
            let b = int_arg(&args[1])?;
            Ok(arith_result(op, a, b))
        })
        .unwrap();
    }

    t
}

/// Shared arithmetic: host integers with wraparound; division by zero
/// freezes into a `Raise` node.
pub fn arith_result(op: ArithOp, a: i64, b: i64) -> Expr {
    match op {
        ArithOp::Add => Expr::int(a.wrapping_add(b)),
        ArithOp::Sub => Expr::int(a.wrapping_sub(b)),
        ArithOp::Mul => Expr::int(a.wrapping_mul(b)),
        ArithOp::Div => {
            if b == 0 {
                Expr::new(ExprKind::Raise("Division_by_zero".into(), None))
            } else {
                Expr::int(a.wrapping_div(b))
            }
        }
    }
}
