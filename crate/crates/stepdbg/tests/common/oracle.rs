//! An independent big-step reference evaluator, used only to
//! cross-check the single-step engine. It keeps its own value
//! representation, environment, pattern matcher, comparison and builtin
//! implementations, sharing nothing with the stepper's reduction path.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::rc::Rc;

use stepdbg::syntax::{ArithOp, Case, CmpOp, Expr, ExprKind, ForDir, Pattern};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Unit,
    Int(i64),
    Bool(bool),
    Char(char),
    Str(String),
    Tuple(Vec<Value>),
    List(Vec<Value>),
    Record(Rc<RefCell<Vec<(String, Value)>>>),
    Constr(u32, String, Option<Box<Value>>),
    Closure {
        param: Pattern,
        body: Expr,
        env: OEnv,
    },
    Cases {
        cases: Vec<Case>,
        env: OEnv,
    },
    Partial {
        name: String,
        arity: usize,
        args: Vec<Value>,
    },
}

impl Value {
    pub fn is_function(&self) -> bool {
        matches!(
            self,
            Value::Closure { .. } | Value::Cases { .. } | Value::Partial { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Exn {
    Raised(String, Option<Value>),
    Error(String),
}

type Res = Result<Value, Exn>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OEnv(Option<Rc<Entry>>);

#[derive(Debug, PartialEq)]
enum Entry {
    Plain(String, Value, OEnv),
    Rec(Rc<Vec<(String, Expr)>>, OEnv),
}

impl OEnv {
    fn bind(&self, name: String, value: Value) -> OEnv {
        OEnv(Some(Rc::new(Entry::Plain(name, value, self.clone()))))
    }

    fn bind_rec(&self, group: Rc<Vec<(String, Expr)>>) -> OEnv {
        OEnv(Some(Rc::new(Entry::Rec(group, self.clone()))))
    }

    fn lookup(&self, name: &str, out: &mut Vec<u8>) -> Option<Res> {
        let mut cur = self;
        loop {
            match cur.0.as_deref() {
                None => return None,
                Some(Entry::Plain(n, v, next)) => {
                    if n == name {
                        return Some(Ok(v.clone()));
                    }
                    cur = next;
                }
                Some(Entry::Rec(group, next)) => {
                    if let Some((_, rhs)) = group.iter().find(|(n, _)| n == name) {
                        // re-enter the definition under an environment
                        // containing the whole group
                        let env = cur.clone();
                        return Some(eval(&env, rhs, out));
                    }
                    cur = next;
                }
            }
        }
    }
}

const BUILTIN_ARITIES: &[(&str, usize)] = &[
    ("print_int", 1),
    ("print_string", 1),
    ("print_char", 1),
    ("ref", 1),
    ("!", 1),
    (":=", 2),
    ("failwith", 1),
    ("invalid_arg", 1),
    ("@", 2),
    ("+", 2),
    ("-", 2),
    ("*", 2),
    ("/", 2),
];

fn builtin(name: &str) -> Option<Value> {
    BUILTIN_ARITIES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, arity)| Value::Partial {
            name: n.to_string(),
            arity: *arity,
            args: Vec::new(),
        })
}

pub fn eval(env: &OEnv, e: &Expr, out: &mut Vec<u8>) -> Res {
    match &e.kind {
        ExprKind::Unit => Ok(Value::Unit),
        ExprKind::Int(i) => Ok(Value::Int(*i)),
        ExprKind::Bool(b) => Ok(Value::Bool(*b)),
        ExprKind::Char(c) => Ok(Value::Char(*c)),
        ExprKind::Str(s) => Ok(Value::Str(s.clone())),
        ExprKind::Var(n) => match env.lookup(n, out) {
            Some(v) => v,
            None => builtin(n).ok_or_else(|| Exn::Error(format!("unbound variable {n}"))),
        },
        ExprKind::Tuple(es) => {
            let mut vs = Vec::new();
            for x in es {
                vs.push(eval(env, x, out)?);
            }
            Ok(Value::Tuple(vs))
        }
        ExprKind::Nil => Ok(Value::List(Vec::new())),
        ExprKind::Cons(h, t) => {
            let hv = eval(env, h, out)?;
            match eval(env, t, out)? {
                Value::List(mut vs) => {
                    vs.insert(0, hv);
                    Ok(Value::List(vs))
                }
                _ => Err(Exn::Error("cons onto a non-list".into())),
            }
        }
        ExprKind::Record(fields) => {
            let mut vs = Vec::new();
            for (n, cell) in fields {
                vs.push((n.clone(), eval(env, &cell.borrow(), out)?));
            }
            Ok(Value::Record(Rc::new(RefCell::new(vs))))
        }
        ExprKind::Constr(tag, name, payload) => {
            let p = match payload {
                Some(p) => Some(Box::new(eval(env, p, out)?)),
                None => None,
            };
            Ok(Value::Constr(*tag, name.clone(), p))
        }
        ExprKind::Op(op, a, b) => {
            let av = eval(env, a, out)?;
            let bv = eval(env, b, out)?;
            arith(*op, &av, &bv)
        }
        // the right operand of a comparison evaluates first
        ExprKind::Cmp(op, a, b) => {
            let bv = eval(env, b, out)?;
            let av = eval(env, a, out)?;
            let ord = compare(&av, &bv)?;
            let truth = match op {
                CmpOp::Lt => ord.is_lt(),
                CmpOp::Eq => ord.is_eq(),
                CmpOp::Gt => ord.is_gt(),
                CmpOp::LtEq => ord.is_le(),
                CmpOp::GtEq => ord.is_ge(),
                CmpOp::NotEq => ord.is_ne(),
            };
            Ok(Value::Bool(truth))
        }
        ExprKind::And(a, b) => match eval(env, a, out)? {
            Value::Bool(false) => Ok(Value::Bool(false)),
            Value::Bool(true) => eval(env, b, out),
            _ => Err(Exn::Error("&& on a non-boolean".into())),
        },
        ExprKind::Or(a, b) => match eval(env, a, out)? {
            Value::Bool(true) => Ok(Value::Bool(true)),
            Value::Bool(false) => eval(env, b, out),
            _ => Err(Exn::Error("|| on a non-boolean".into())),
        },
        ExprKind::If(c, t, els) => match eval(env, c, out)? {
            Value::Bool(true) => eval(env, t, out),
            Value::Bool(false) => match els {
                Some(e) => eval(env, e, out),
                None => Ok(Value::Unit),
            },
            _ => Err(Exn::Error("if on a non-boolean".into())),
        },
        ExprKind::Let {
            recursive: false,
            bindings,
            body,
        } => {
            let mut new_env = env.clone();
            for (pat, rhs) in bindings {
                let v = eval(env, rhs, out)?;
                match match_pattern(&v, pat) {
                    Some(bound) => {
                        for (n, bv) in bound {
                            new_env = new_env.bind(n, bv);
                        }
                    }
                    None => return Err(Exn::Raised("Match_failure".into(), None)),
                }
            }
            eval(&new_env, body, out)
        }
        ExprKind::Let {
            recursive: true,
            bindings,
            body,
        } => {
            let group: Vec<(String, Expr)> = bindings
                .iter()
                .map(|(p, rhs)| match p {
                    Pattern::Var(n) => Ok((n.clone(), rhs.clone())),
                    _ => Err(Exn::Error("let rec needs plain names".into())),
                })
                .collect::<Result<_, _>>()?;
            let new_env = env.bind_rec(Rc::new(group));
            eval(&new_env, body, out)
        }
        ExprKind::Fun { param, body, .. } => Ok(Value::Closure {
            param: param.clone(),
            body: (**body).clone(),
            env: env.clone(),
        }),
        ExprKind::Function { cases, .. } => Ok(Value::Cases {
            cases: cases.clone(),
            env: env.clone(),
        }),
        ExprKind::App(f, a) => {
            let fv = eval(env, f, out)?;
            let av = eval(env, a, out)?;
            apply(fv, av, out)
        }
        ExprKind::Seq(a, b) => {
            eval(env, a, out)?;
            eval(env, b, out)
        }
        ExprKind::While { guard, body, .. } => loop {
            match eval(env, guard, out)? {
                Value::Bool(false) => return Ok(Value::Unit),
                Value::Bool(true) => {
                    eval(env, body, out)?;
                }
                _ => return Err(Exn::Error("while on a non-boolean".into())),
            }
        },
        ExprKind::For {
            var,
            from,
            dir,
            to,
            body,
            ..
        } => {
            let f = match eval(env, from, out)? {
                Value::Int(i) => i,
                _ => return Err(Exn::Error("for bound not an integer".into())),
            };
            let t = match eval(env, to, out)? {
                Value::Int(i) => i,
                _ => return Err(Exn::Error("for bound not an integer".into())),
            };
            let mut i = f;
            loop {
                let done = match dir {
                    ForDir::UpTo => i > t,
                    ForDir::DownTo => i < t,
                };
                if done {
                    return Ok(Value::Unit);
                }
                let inner = env.bind(var.clone(), Value::Int(i));
                eval(&inner, body, out)?;
                i = match dir {
                    ForDir::UpTo => i + 1,
                    ForDir::DownTo => i - 1,
                };
            }
        }
        ExprKind::Field(x, name) => match eval(env, x, out)? {
            Value::Record(fields) => fields
                .borrow()
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Exn::Error("no such field".into())),
            _ => Err(Exn::Error("field access on a non-record".into())),
        },
        ExprKind::SetField(x, name, v) => {
            let rec = eval(env, x, out)?;
            let val = eval(env, v, out)?;
            match rec {
                Value::Record(fields) => {
                    let mut fields = fields.borrow_mut();
                    match fields.iter_mut().find(|(n, _)| n == name) {
                        Some((_, slot)) => {
                            *slot = val;
                            Ok(Value::Unit)
                        }
                        None => Err(Exn::Error("no such field".into())),
                    }
                }
                _ => Err(Exn::Error("field assignment on a non-record".into())),
            }
        }
        ExprKind::Raise(name, payload) => {
            let p = match payload {
                Some(p) => Some(eval(env, p, out)?),
                None => None,
            };
            Err(Exn::Raised(name.clone(), p))
        }
        ExprKind::Match(subject, cases) => {
            let v = eval(env, subject, out)?;
            run_cases(env, &v, cases, out)
        }
        ExprKind::TryWith(body, cases) => match eval(env, body, out) {
            Ok(v) => Ok(v),
            Err(Exn::Raised(name, payload)) => {
                match catch(env, &name, &payload, cases, out)? {
                    Some(v) => Ok(v),
                    None => Err(Exn::Raised(name, payload)),
                }
            }
            Err(e) => Err(e),
        },
        ExprKind::Builtin { name, args, .. } => {
            // a pre-resolved builtin node: dispatch by name
            let mut v = builtin(name)
                .ok_or_else(|| Exn::Error(format!("unknown builtin {name}")))?;
            for a in args {
                let av = eval(env, a, out)?;
                v = apply(v, av, out)?;
            }
            Ok(v)
        }
    }
}

fn run_cases(env: &OEnv, subject: &Value, cases: &[Case], out: &mut Vec<u8>) -> Res {
    for case in cases {
        if let Some(bound) = match_pattern(subject, &case.pattern) {
            let mut inner = env.clone();
            for (n, v) in bound {
                inner = inner.bind(n, v);
            }
            if let Some(guard) = &case.guard {
                match eval(&inner, guard, out)? {
                    Value::Bool(true) => {}
                    Value::Bool(false) => continue,
                    _ => return Err(Exn::Error("guard not a boolean".into())),
                }
            }
            return eval(&inner, &case.rhs, out);
        }
    }
    Err(Exn::Raised("Match_failure".into(), None))
}

fn catch(
    env: &OEnv,
    name: &str,
    payload: &Option<Value>,
    cases: &[Case],
    out: &mut Vec<u8>,
) -> Result<Option<Value>, Exn> {
    for case in cases {
        if let Some(bound) = match_exn(name, payload, &case.pattern) {
            let mut inner = env.clone();
            for (n, v) in bound {
                inner = inner.bind(n, v);
            }
            if let Some(guard) = &case.guard {
                match eval(&inner, guard, out)? {
                    Value::Bool(true) => {}
                    Value::Bool(false) => continue,
                    _ => return Err(Exn::Error("guard not a boolean".into())),
                }
            }
            return eval(&inner, &case.rhs, out).map(Some);
        }
    }
    Ok(None)
}

fn match_exn(name: &str, payload: &Option<Value>, pat: &Pattern) -> Option<Vec<(String, Value)>> {
    match pat {
        Pattern::Any => Some(Vec::new()),
        Pattern::Constr(want, ppat) if want == name => match (ppat, payload) {
            (None, None) => Some(Vec::new()),
            (Some(p), Some(v)) => match_pattern(v, p),
            _ => None,
        },
        Pattern::Or(a, b) => {
            match_exn(name, payload, a).or_else(|| match_exn(name, payload, b))
        }
        _ => None,
    }
}

pub fn match_pattern(v: &Value, pat: &Pattern) -> Option<Vec<(String, Value)>> {
    let mut out = Vec::new();
    if go(v, pat, &mut out) {
        Some(out)
    } else {
        None
    }
}

fn go(v: &Value, pat: &Pattern, out: &mut Vec<(String, Value)>) -> bool {
    match (pat, v) {
        (Pattern::Any, _) => true,
        (Pattern::Var(n), _) => {
            out.push((n.clone(), v.clone()));
            true
        }
        (Pattern::Unit, Value::Unit) => true,
        (Pattern::Int(want), Value::Int(i)) => want == i,
        (Pattern::Bool(want), Value::Bool(b)) => want == b,
        (Pattern::Char(want), Value::Char(c)) => want == c,
        (Pattern::CharRange(lo, hi), Value::Char(c)) => lo <= c && c <= hi,
        (Pattern::Str(want), Value::Str(s)) => want == s,
        (Pattern::Nil, Value::List(vs)) => vs.is_empty(),
        (Pattern::Cons(ph, pt), Value::List(vs)) => {
            if vs.is_empty() {
                return false;
            }
            let tail = Value::List(vs[1..].to_vec());
            go(&vs[0], ph, out) && go(&tail, pt, out)
        }
        (Pattern::Tuple(ps), Value::Tuple(vs)) => {
            ps.len() == vs.len() && vs.iter().zip(ps).all(|(v, p)| go(v, p, out))
        }
        (Pattern::Record(pfields), Value::Record(fields)) => {
            let fields = fields.borrow();
            pfields.iter().all(|(name, p)| {
                fields
                    .iter()
                    .find(|(n, _)| n == name)
                    .is_some_and(|(_, v)| go(v, p, out))
            })
        }
        (Pattern::Alias(n, sub), _) => {
            if go(v, sub, out) {
                out.push((n.clone(), v.clone()));
                true
            } else {
                false
            }
        }
        (Pattern::Or(a, b), _) => {
            let mark = out.len();
            if go(v, a, out) {
                true
            } else {
                out.truncate(mark);
                go(v, b, out)
            }
        }
        (Pattern::Constr(want, ppat), Value::Constr(_, name, payload)) => {
            want == name
                && match (ppat, payload) {
                    (None, None) => true,
                    (Some(p), Some(v)) => go(v, p, out),
                    _ => false,
                }
        }
        _ => false,
    }
}

fn arith(op: ArithOp, a: &Value, b: &Value) -> Res {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => match op {
            ArithOp::Add => Ok(Value::Int(x.wrapping_add(*y))),
            ArithOp::Sub => Ok(Value::Int(x.wrapping_sub(*y))),
            ArithOp::Mul => Ok(Value::Int(x.wrapping_mul(*y))),
            ArithOp::Div => {
                if *y == 0 {
                    Err(Exn::Raised("Division_by_zero".into(), None))
                } else {
                    Ok(Value::Int(x.wrapping_div(*y)))
                }
            }
        },
        _ => Err(Exn::Error("arithmetic on non-integers".into())),
    }
}

/// The oracle's own structural comparison.
pub fn compare(a: &Value, b: &Value) -> Result<Ordering, Exn> {
    if a.is_function() || b.is_function() {
        return Err(Exn::Raised(
            "Invalid_argument".into(),
            Some(Value::Str("compare: functional value".into())),
        ));
    }
    let ord = match (a, b) {
        (Value::Unit, Value::Unit) => Ordering::Equal,
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Char(x), Value::Char(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::List(xs), Value::List(ys)) => {
            for (x, y) in xs.iter().zip(ys) {
                match compare(x, y)? {
                    Ordering::Equal => {}
                    o => return Ok(o),
                }
            }
            xs.len().cmp(&ys.len())
        }
        (Value::Tuple(xs), Value::Tuple(ys)) => {
            for (x, y) in xs.iter().zip(ys) {
                match compare(x, y)? {
                    Ordering::Equal => {}
                    o => return Ok(o),
                }
            }
            xs.len().cmp(&ys.len())
        }
        (Value::Record(xs), Value::Record(ys)) => {
            let xs = xs.borrow();
            let ys = ys.borrow();
            for ((_, x), (_, y)) in xs.iter().zip(ys.iter()) {
                match compare(x, y)? {
                    Ordering::Equal => {}
                    o => return Ok(o),
                }
            }
            xs.len().cmp(&ys.len())
        }
        (Value::Constr(t1, _, p1), Value::Constr(t2, _, p2)) => {
            let k1 = p1.is_some() as u8;
            let k2 = p2.is_some() as u8;
            match k1.cmp(&k2).then(t1.cmp(t2)) {
                Ordering::Equal => match (p1, p2) {
                    (Some(x), Some(y)) => return compare(x, y),
                    _ => Ordering::Equal,
                },
                o => o,
            }
        }
        _ => return Err(Exn::Error("comparison of differing shapes".into())),
    };
    Ok(ord)
}

fn apply(f: Value, arg: Value, out: &mut Vec<u8>) -> Res {
    match f {
        Value::Closure { param, body, env } => match match_pattern(&arg, &param) {
            Some(bound) => {
                let mut inner = env;
                for (n, v) in bound {
                    inner = inner.bind(n, v);
                }
                eval(&inner, &body, out)
            }
            None => Err(Exn::Raised("Match_failure".into(), None)),
        },
        Value::Cases { cases, env } => run_cases(&env, &arg, &cases, out),
        Value::Partial {
            name,
            arity,
            mut args,
        } => {
            args.push(arg);
            if args.len() < arity {
                Ok(Value::Partial { name, arity, args })
            } else {
                host(&name, &args, out)
            }
        }
        _ => Err(Exn::Error("apply of a non-function".into())),
    }
}

fn host(name: &str, args: &[Value], out: &mut Vec<u8>) -> Res {
    match (name, args) {
        ("print_int", [Value::Int(i)]) => {
            out.extend_from_slice(i.to_string().as_bytes());
            Ok(Value::Unit)
        }
        ("print_string", [Value::Str(s)]) => {
            out.extend_from_slice(s.as_bytes());
            Ok(Value::Unit)
        }
        ("print_char", [Value::Char(c)]) => {
            out.extend_from_slice(c.to_string().as_bytes());
            Ok(Value::Unit)
        }
        ("ref", [v]) => Ok(Value::Record(Rc::new(RefCell::new(vec![(
            "contents".into(),
            v.clone(),
        )])))),
        ("!", [Value::Record(fields)]) => fields
            .borrow()
            .iter()
            .find(|(n, _)| n == "contents")
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Exn::Error("dereference of a non-reference".into())),
        (":=", [Value::Record(fields), v]) => {
            let mut fields = fields.borrow_mut();
            match fields.iter_mut().find(|(n, _)| n == "contents") {
                Some((_, slot)) => {
                    *slot = v.clone();
                    Ok(Value::Unit)
                }
                None => Err(Exn::Error("assignment to a non-reference".into())),
            }
        }
        ("failwith", [Value::Str(s)]) => {
            Err(Exn::Raised("Failure".into(), Some(Value::Str(s.clone()))))
        }
        ("invalid_arg", [Value::Str(s)]) => Err(Exn::Raised(
            "Invalid_argument".into(),
            Some(Value::Str(s.clone())),
        )),
        ("@", [Value::List(a), Value::List(b)]) => {
            let mut vs = a.clone();
            vs.extend(b.iter().cloned());
            Ok(Value::List(vs))
        }
        ("+" | "-" | "*" | "/", [a, b]) => {
            let op = match name {
                "+" => ArithOp::Add,
                "-" => ArithOp::Sub,
                "*" => ArithOp::Mul,
                _ => ArithOp::Div,
            };
            arith(op, a, b)
        }
        _ => Err(Exn::Error(format!("builtin {name} on bad arguments"))),
    }
}

/// The final outcome of running a whole program under the oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Value(Value),
    Uncaught(String, Option<Value>),
    Error(String),
}

pub fn run_program(e: &Expr) -> (OracleOutcome, Vec<u8>) {
    let mut out = Vec::new();
    let outcome = match eval(&OEnv::default(), e, &mut out) {
        Ok(v) => OracleOutcome::Value(v),
        Err(Exn::Raised(n, p)) => OracleOutcome::Uncaught(n, p),
        Err(Exn::Error(m)) => OracleOutcome::Error(m),
    };
    (outcome, out)
}

/// Converts a stepper value (an expression in normal form) to an oracle
/// value for comparison. Functions all convert to the same marker.
pub fn value_of_expr(e: &Expr) -> Option<Value> {
    match &e.kind {
        ExprKind::Unit => Some(Value::Unit),
        ExprKind::Int(i) => Some(Value::Int(*i)),
        ExprKind::Bool(b) => Some(Value::Bool(*b)),
        ExprKind::Char(c) => Some(Value::Char(*c)),
        ExprKind::Str(s) => Some(Value::Str(s.clone())),
        ExprKind::Tuple(es) => es
            .iter()
            .map(value_of_expr)
            .collect::<Option<Vec<_>>>()
            .map(Value::Tuple),
        ExprKind::Nil => Some(Value::List(Vec::new())),
        ExprKind::Cons(h, t) => {
            let hv = value_of_expr(h)?;
            match value_of_expr(t)? {
                Value::List(mut vs) => {
                    vs.insert(0, hv);
                    Some(Value::List(vs))
                }
                _ => None,
            }
        }
        ExprKind::Record(fields) => {
            let vs = fields
                .iter()
                .map(|(n, c)| value_of_expr(&c.borrow()).map(|v| (n.clone(), v)))
                .collect::<Option<Vec<_>>>()?;
            Some(Value::Record(Rc::new(RefCell::new(vs))))
        }
        ExprKind::Constr(tag, name, payload) => {
            let p = match payload {
                Some(p) => Some(Box::new(value_of_expr(p)?)),
                None => None,
            };
            Some(Value::Constr(*tag, name.clone(), p))
        }
        ExprKind::Fun { .. } | ExprKind::Function { .. } | ExprKind::Builtin { .. } => {
            Some(Value::Partial {
                name: "<function>".into(),
                arity: usize::MAX,
                args: Vec::new(),
            })
        }
        _ => None,
    }
}

/// Compares a stepper value with an oracle value; any two functions are
/// considered equal.
pub fn values_agree(stepper_value: &Expr, oracle_value: &Value) -> bool {
    match value_of_expr(stepper_value) {
        Some(v) => loose_eq(&v, oracle_value),
        None => false,
    }
}

fn loose_eq(a: &Value, b: &Value) -> bool {
    if a.is_function() && b.is_function() {
        return true;
    }
    match (a, b) {
        (Value::Tuple(xs), Value::Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| loose_eq(x, y))
        }
        (Value::List(xs), Value::List(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| loose_eq(x, y))
        }
        (Value::Record(xs), Value::Record(ys)) => {
            let xs = xs.borrow();
            let ys = ys.borrow();
            xs.len() == ys.len()
                && xs
                    .iter()
                    .zip(ys.iter())
                    .all(|((n1, x), (n2, y))| n1 == n2 && loose_eq(x, y))
        }
        (Value::Constr(t1, n1, p1), Value::Constr(t2, n2, p2)) => {
            t1 == t2
                && n1 == n2
                && match (p1, p2) {
                    (None, None) => true,
                    (Some(x), Some(y)) => loose_eq(x, y),
                    _ => false,
                }
        }
        _ => a == b,
    }
}
