//! The debuggable-bytecode route: lower a core subset to a ZINC-style
//! instruction list, run the abstract machine, decompile any designated
//! state back to source, and emit interesting-step traces.

use std::fmt;
use std::rc::Rc;

use crate::syntax::{ArithOp, CmpOp, Expr, ExprKind, Pattern};

/// The core language the bytecode route supports. Variables carry a de
/// Bruijn index (innermost binder is 1); names are retained solely for
/// decompilation.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreProg {
    Int(i64),
    Bool(bool),
    Var(String, usize),
    Eq(Rc<CoreProg>, Rc<CoreProg>),
    Op(ArithOp, Rc<CoreProg>, Rc<CoreProg>),
    Apply(Rc<CoreProg>, Rc<CoreProg>),
    Lambda(String, Rc<CoreProg>),
    Let(String, Rc<CoreProg>, Rc<CoreProg>),
    If(Rc<CoreProg>, Rc<CoreProg>, Rc<CoreProg>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instr {
    Empty,
    Int(i64),
    Bool(bool),
    Opr(ArithOp),
    Eqi,
    Access(String, usize),
    Closure(String, Vec<Instr>),
    Leti(String),
    Endlet,
    Apply,
    Return,
    Ifi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnsupportedConstruct(pub String);

impl fmt::Display for UnsupportedConstruct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not in the bytecode core: {}", self.0)
    }
}

impl std::error::Error for UnsupportedConstruct {}

/// Translates a supported expression into the core, computing de
/// Bruijn indices. Anything outside the core is rejected.
pub fn lower(e: &Expr) -> Result<CoreProg, UnsupportedConstruct> {
    fn go(e: &Expr, binders: &mut Vec<String>) -> Result<CoreProg, UnsupportedConstruct> {
        match &e.kind {
            ExprKind::Int(i) => Ok(CoreProg::Int(*i)),
            ExprKind::Bool(b) => Ok(CoreProg::Bool(*b)),
            ExprKind::Var(n) => match binders.iter().rev().position(|b| b == n) {
                Some(i) => Ok(CoreProg::Var(n.clone(), i + 1)),
                None => Err(UnsupportedConstruct(format!("unbound variable {n}"))),
            },
            ExprKind::Cmp(CmpOp::Eq, a, b) => Ok(CoreProg::Eq(
                Rc::new(go(a, binders)?),
                Rc::new(go(b, binders)?),
            )),
            ExprKind::Cmp(_, _, _) => {
                Err(UnsupportedConstruct("comparison other than =".into()))
            }
            ExprKind::Op(op, a, b) => Ok(CoreProg::Op(
                *op,
                Rc::new(go(a, binders)?),
                Rc::new(go(b, binders)?),
            )),
            ExprKind::App(f, a) => Ok(CoreProg::Apply(
                Rc::new(go(f, binders)?),
                Rc::new(go(a, binders)?),
            )),
            ExprKind::Fun { param, body, .. } => match param {
                Pattern::Var(n) => {
                    binders.push(n.clone());
                    let b = go(body, binders);
                    binders.pop();
                    Ok(CoreProg::Lambda(n.clone(), Rc::new(b?)))
                }
                _ => Err(UnsupportedConstruct("function with a pattern parameter".into())),
            },
            ExprKind::Let {
                recursive: false,
                bindings,
                body,
            } if bindings.len() == 1 => match &bindings[0] {
                (Pattern::Var(n), rhs) => {
                    let r = go(rhs, binders)?;
                    binders.push(n.clone());
                    let b = go(body, binders);
                    binders.pop();
                    Ok(CoreProg::Let(n.clone(), Rc::new(r), Rc::new(b?)))
                }
                _ => Err(UnsupportedConstruct("let with a pattern binding".into())),
            },
            ExprKind::If(c, t, Some(els)) => Ok(CoreProg::If(
                Rc::new(go(c, binders)?),
                Rc::new(go(t, binders)?),
                Rc::new(go(els, binders)?),
            )),
            k => Err(UnsupportedConstruct(kind_name(k).to_string())),
        }
    }
    go(e, &mut Vec::new())
}

fn kind_name(k: &ExprKind) -> &'static str {
    match k {
        ExprKind::Unit => "unit",
        ExprKind::Char(_) => "character",
        ExprKind::Str(_) => "string",
        ExprKind::Tuple(_) => "tuple",
        ExprKind::Nil | ExprKind::Cons(_, _) => "list",
        ExprKind::Record(_) => "record",
        ExprKind::Constr(_, _, _) => "constructor",
        ExprKind::And(_, _) | ExprKind::Or(_, _) => "boolean operator",
        ExprKind::If(_, _, None) => "if without else",
        ExprKind::Let { .. } => "let",
        ExprKind::Function { .. } => "function",
        ExprKind::Seq(_, _) => "sequence",
        ExprKind::While { .. } => "while",
        ExprKind::For { .. } => "for",
        ExprKind::Field(_, _) | ExprKind::SetField(_, _, _) => "record field",
        ExprKind::Raise(_, _) => "raise",
        ExprKind::Match(_, _) => "match",
        ExprKind::TryWith(_, _) => "try",
        ExprKind::Builtin { .. } => "builtin",
        _ => "expression",
    }
}

/// The core program as an ordinary expression, for rendering.
pub fn core_to_expr(p: &CoreProg) -> Expr {
    match p {
        CoreProg::Int(i) => Expr::int(*i),
        CoreProg::Bool(b) => Expr::bool(*b),
        CoreProg::Var(n, _) => Expr::var(n.clone()),
        CoreProg::Eq(a, b) => Expr::cmp(CmpOp::Eq, core_to_expr(a), core_to_expr(b)),
        CoreProg::Op(op, a, b) => Expr::op(*op, core_to_expr(a), core_to_expr(b)),
        CoreProg::Apply(f, a) => Expr::app(core_to_expr(f), core_to_expr(a)),
        CoreProg::Lambda(n, b) => Expr::new(ExprKind::Fun {
            param: Pattern::Var(n.clone()),
            body: Rc::new(core_to_expr(b)),
            env: Vec::new(),
        }),
        CoreProg::Let(n, a, b) => Expr::new(ExprKind::Let {
            recursive: false,
            bindings: vec![(Pattern::Var(n.clone()), core_to_expr(a))],
            body: Rc::new(core_to_expr(b)),
        }),
        CoreProg::If(c, t, e) => Expr::new(ExprKind::If(
            Rc::new(core_to_expr(c)),
            Rc::new(core_to_expr(t)),
            Some(Rc::new(core_to_expr(e))),
        )),
    }
}

pub fn render_core(p: &CoreProg) -> String {
    crate::trace::render_expr(&core_to_expr(p), None, &Default::default()).text
}

/// Compiles a core program, appending the terminating `EMPTY`.
pub fn compile(p: &CoreProg) -> Vec<Instr> {
    let mut out = Vec::new();
    compile_into(p, &mut out);
    out.push(Instr::Empty);
    out
}

fn compile_into(p: &CoreProg, out: &mut Vec<Instr>) {
    match p {
        CoreProg::Int(i) => out.push(Instr::Int(*i)),
        CoreProg::Bool(b) => out.push(Instr::Bool(*b)),
        CoreProg::Op(op, a, b) => {
            compile_into(a, out);
            compile_into(b, out);
            out.push(Instr::Opr(*op));
        }
        CoreProg::Eq(a, b) => {
            compile_into(a, out);
            compile_into(b, out);
            out.push(Instr::Eqi);
        }
        CoreProg::Var(n, i) => out.push(Instr::Access(n.clone(), *i)),
        CoreProg::Lambda(n, a) => {
            let mut body = Vec::new();
            compile_into(a, &mut body);
            body.push(Instr::Return);
            out.push(Instr::Closure(n.clone(), body));
        }
        CoreProg::Let(n, a, b) => {
            compile_into(a, out);
            out.push(Instr::Leti(n.clone()));
            compile_into(b, out);
            out.push(Instr::Endlet);
        }
        CoreProg::Apply(a, b) => {
            compile_into(a, out);
            compile_into(b, out);
            out.push(Instr::Apply);
        }
        // branches compile as closures; the then-branch is pushed first
        CoreProg::If(a, b, c) => {
            let mut then_code = Vec::new();
            compile_into(b, &mut then_code);
            then_code.push(Instr::Return);
            out.push(Instr::Closure(String::new(), then_code));
            let mut else_code = Vec::new();
            compile_into(c, &mut else_code);
            else_code.push(Instr::Return);
            out.push(Instr::Closure(String::new(), else_code));
            compile_into(a, out);
            out.push(Instr::Ifi);
        }
    }
}

/// The instruction listing, one per line, closure bodies indented two
/// spaces per level.
pub fn dump_code(code: &[Instr]) -> String {
    let mut out = String::new();
    fn go(code: &[Instr], indent: usize, out: &mut String) {
        for instr in code {
            for _ in 0..indent {
                out.push_str("  ");
            }
            match instr {
                Instr::Empty => out.push_str("EMPTY"),
                Instr::Int(i) => out.push_str(&format!("INT {i}")),
                Instr::Bool(b) => out.push_str(&format!("BOOL {b}")),
                Instr::Opr(op) => out.push_str(&format!("OP {op}")),
                Instr::Eqi => out.push_str("EQ"),
                Instr::Access(_, i) => out.push_str(&format!("ACCESS {i}")),
                Instr::Closure(_, body) => {
                    out.push_str("CLOSURE\n");
                    go(body, indent + 1, out);
                    continue;
                }
                Instr::Leti(_) => out.push_str("LET"),
                Instr::Endlet => out.push_str("ENDLET"),
                Instr::Apply => out.push_str("APPLY"),
                Instr::Return => out.push_str("RETURN"),
                Instr::Ifi => out.push_str("IF"),
            }
            out.push('\n');
        }
    }
    go(code, 0, &mut out);
    out
}

// ---- the machine ----

pub type MEnv = Vec<MachineValue>;

#[derive(Debug, Clone, PartialEq)]
pub enum MachineValue {
    Int(i64),
    Bool(bool),
    Closure {
        name: String,
        code: Vec<Instr>,
        env: MEnv,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum StackItem {
    Value(MachineValue),
    SavedCode(Vec<Instr>),
    SavedEnv(MEnv),
}

/// A machine state: code yet to run, environment, and stack.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    pub code: Vec<Instr>,
    pub env: MEnv,
    pub stack: Vec<StackItem>,
}

impl MachineState {
    pub fn load(code: Vec<Instr>) -> MachineState {
        MachineState {
            code,
            env: Vec::new(),
            stack: Vec::new(),
        }
    }

    pub fn at_end(&self) -> bool {
        matches!(self.code.first(), Some(Instr::Empty) | None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineStuck(pub String);

impl fmt::Display for MachineStuck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "machine stuck: {}", self.0)
    }
}

impl std::error::Error for MachineStuck {}

fn pop_value(stack: &mut Vec<StackItem>, what: &str) -> Result<MachineValue, MachineStuck> {
    match stack.pop() {
        Some(StackItem::Value(v)) => Ok(v),
        other => Err(MachineStuck(format!("expected {what}, found {other:?}"))),
    }
}

fn pop_int(stack: &mut Vec<StackItem>, what: &str) -> Result<i64, MachineStuck> {
    match pop_value(stack, what)? {
        MachineValue::Int(i) => Ok(i),
        v => Err(MachineStuck(format!("expected {what}, found {v:?}"))),
    }
}

/// Exactly one machine transition. The stack in these notes is written
/// top first.
pub fn machine_step(s: &MachineState) -> Result<MachineState, MachineStuck> {
    let mut code = s.code.clone();
    let mut env = s.env.clone();
    let mut stack = s.stack.clone();
    let instr = if code.is_empty() {
        return Err(MachineStuck("no code".into()));
    } else {
        code.remove(0)
    };
    match instr {
        Instr::Empty => return Err(MachineStuck("step at EMPTY".into())),
        Instr::Int(i) => stack.push(StackItem::Value(MachineValue::Int(i))),
        Instr::Bool(b) => stack.push(StackItem::Value(MachineValue::Bool(b))),
        Instr::Opr(op) => {
            let b = pop_int(&mut stack, "an integer")?;
            let a = pop_int(&mut stack, "an integer")?;
            let r = match op {
                ArithOp::Add => a.wrapping_add(b),
                ArithOp::Sub => a.wrapping_sub(b),
                ArithOp::Mul => a.wrapping_mul(b),
                ArithOp::Div => {
                    if b == 0 {
                        return Err(MachineStuck("division by zero".into()));
                    }
                    a.wrapping_div(b)
                }
            };
            stack.push(StackItem::Value(MachineValue::Int(r)));
        }
        Instr::Eqi => {
            let b = pop_value(&mut stack, "a value")?;
            let a = pop_value(&mut stack, "a value")?;
            let eq = match (&a, &b) {
                (MachineValue::Int(x), MachineValue::Int(y)) => x == y,
                (MachineValue::Bool(x), MachineValue::Bool(y)) => x == y,
                _ => return Err(MachineStuck("EQ on incomparable values".into())),
            };
            stack.push(StackItem::Value(MachineValue::Bool(eq)));
        }
        Instr::Access(name, idx) => {
            let v = env
                .get(idx.wrapping_sub(1))
                .ok_or_else(|| MachineStuck(format!("ACCESS {name} {idx} out of range")))?;
            stack.push(StackItem::Value(v.clone()));
        }
        Instr::Closure(name, body) => {
            stack.push(StackItem::Value(MachineValue::Closure {
                name,
                code: body,
                env: env.clone(),
            }));
        }
        Instr::Leti(_) => {
            let v = pop_value(&mut stack, "a bound value")?;
            env.insert(0, v);
        }
        Instr::Endlet => {
            if env.is_empty() {
                return Err(MachineStuck("ENDLET with empty environment".into()));
            }
            env.remove(0);
        }
        Instr::Apply => {
            let arg = pop_value(&mut stack, "an argument")?;
            match pop_value(&mut stack, "a closure")? {
                MachineValue::Closure {
                    code: body,
                    env: cenv,
                    ..
                } => {
                    stack.push(StackItem::SavedEnv(env));
                    stack.push(StackItem::SavedCode(code));
                    let mut new_env = cenv;
                    new_env.insert(0, arg);
                    return Ok(MachineState {
                        code: body,
                        env: new_env,
                        stack,
                    });
                }
                v => return Err(MachineStuck(format!("APPLY to {v:?}"))),
            }
        }
        Instr::Return => {
            let v = pop_value(&mut stack, "a return value")?;
            let saved_code = match stack.pop() {
                Some(StackItem::SavedCode(c)) => c,
                other => return Err(MachineStuck(format!("RETURN found {other:?}"))),
            };
            let saved_env = match stack.pop() {
                Some(StackItem::SavedEnv(e)) => e,
                other => return Err(MachineStuck(format!("RETURN found {other:?}"))),
            };
            stack.push(StackItem::Value(v));
            return Ok(MachineState {
                code: saved_code,
                env: saved_env,
                stack,
            });
        }
        // a true condition selects the deeper of the two stacked
        // closures (the then-branch, pushed first by the compiler)
        Instr::Ifi => {
            let cond = match pop_value(&mut stack, "a condition")? {
                MachineValue::Bool(b) => b,
                v => return Err(MachineStuck(format!("IF on {v:?}"))),
            };
            let else_clo = pop_value(&mut stack, "a closure")?;
            let then_clo = pop_value(&mut stack, "a closure")?;
            let selected = if cond { then_clo } else { else_clo };
            match selected {
                MachineValue::Closure {
                    code: body,
                    env: cenv,
                    ..
                } => {
                    stack.push(StackItem::SavedEnv(env));
                    stack.push(StackItem::SavedCode(code));
                    return Ok(MachineState {
                        code: body,
                        env: cenv,
                        stack,
                    });
                }
                v => return Err(MachineStuck(format!("IF branch is not a closure: {v:?}"))),
            }
        }
    }
    Ok(MachineState { code, env, stack })
}

/// Runs compiled code to `EMPTY` and returns the sole remaining stack
/// value.
pub fn machine_run(code: Vec<Instr>) -> Result<MachineValue, MachineStuck> {
    let mut state = MachineState::load(code);
    while !state.at_end() {
        state = machine_step(&state)?;
    }
    match (state.stack.len(), state.stack.pop()) {
        (1, Some(StackItem::Value(v))) => Ok(v),
        (n, top) => Err(MachineStuck(format!(
            "finished with {n} stack items, top {top:?}"
        ))),
    }
}

// ---- decompilation ----

#[derive(Debug, Clone, PartialEq)]
pub struct DecompileStuck(pub String);

impl fmt::Display for DecompileStuck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "decompile stuck: {}", self.0)
    }
}

impl std::error::Error for DecompileStuck {}

#[derive(Debug, Clone)]
enum DItem {
    Frag(CoreProg),
    CloFrame { name: String, code: Vec<Instr> },
    SavedCode(Vec<Instr>),
    SavedEnv,
}

fn to_ditems(stack: &[StackItem]) -> Vec<DItem> {
    stack
        .iter()
        .map(|item| match item {
            StackItem::Value(MachineValue::Int(i)) => DItem::Frag(CoreProg::Int(*i)),
            StackItem::Value(MachineValue::Bool(b)) => DItem::Frag(CoreProg::Bool(*b)),
            StackItem::Value(MachineValue::Closure { name, code, .. }) => DItem::CloFrame {
                name: name.clone(),
                code: code.clone(),
            },
            StackItem::SavedCode(c) => DItem::SavedCode(c.clone()),
            StackItem::SavedEnv(_) => DItem::SavedEnv,
        })
        .collect()
}

/// Decompiles a (code, stack) pair: a freshly compiled program with an
/// empty stack, or an intermediate machine state at an instruction
/// boundary the scheme is defined for.
pub fn decompile(code: &[Instr], stack: &[StackItem]) -> Result<CoreProg, DecompileStuck> {
    decomp(code, to_ditems(stack)).map(|(p, _)| p)
}

/// Decompiles a live machine state.
pub fn decompile_state(state: &MachineState) -> Result<CoreProg, DecompileStuck> {
    decompile(&state.code, &state.stack)
}

fn pop_frag(stack: &mut Vec<DItem>, what: &str) -> Result<CoreProg, DecompileStuck> {
    match stack.pop() {
        Some(DItem::Frag(p)) => Ok(p),
        other => Err(DecompileStuck(format!("expected {what}, found {other:?}"))),
    }
}

fn branch(item: DItem) -> Result<CoreProg, DecompileStuck> {
    match item {
        DItem::CloFrame { code, .. } => decomp(&code, Vec::new()).map(|(p, _)| p),
        DItem::Frag(p) => Ok(p),
        other => Err(DecompileStuck(format!("bad IF branch: {other:?}"))),
    }
}

fn decomp(code: &[Instr], mut stack: Vec<DItem>) -> Result<(CoreProg, Vec<DItem>), DecompileStuck> {
    let mut i = 0usize;
    while i < code.len() {
        let instr = &code[i];
        i += 1;
        match instr {
            Instr::Empty => break,
            Instr::Int(n) => stack.push(DItem::Frag(CoreProg::Int(*n))),
            Instr::Bool(b) => stack.push(DItem::Frag(CoreProg::Bool(*b))),
            Instr::Opr(op) => {
                let b = pop_frag(&mut stack, "an operand")?;
                let a = pop_frag(&mut stack, "an operand")?;
                stack.push(DItem::Frag(CoreProg::Op(*op, Rc::new(a), Rc::new(b))));
            }
            Instr::Eqi => {
                let b = pop_frag(&mut stack, "an operand")?;
                let a = pop_frag(&mut stack, "an operand")?;
                stack.push(DItem::Frag(CoreProg::Eq(Rc::new(a), Rc::new(b))));
            }
            Instr::Access(n, l) => stack.push(DItem::Frag(CoreProg::Var(n.clone(), *l))),
            Instr::Closure(n, c) => stack.push(DItem::CloFrame {
                name: n.clone(),
                code: c.clone(),
            }),
            Instr::Leti(n) => {
                let v = pop_frag(&mut stack, "a bound value")?;
                let (body, rest) = decomp(&code[i..], stack)?;
                return Ok((
                    CoreProg::Let(n.clone(), Rc::new(v), Rc::new(body)),
                    rest,
                ));
            }
            Instr::Endlet => {}
            Instr::Apply => {
                let v = pop_frag(&mut stack, "an argument")?;
                match stack.pop() {
                    Some(DItem::CloFrame { name, code: c }) => {
                        let (lam_body, _) = decomp(&c, Vec::new())?;
                        stack.push(DItem::Frag(CoreProg::Apply(
                            Rc::new(CoreProg::Lambda(name, Rc::new(lam_body))),
                            Rc::new(v),
                        )));
                    }
                    other => {
                        return Err(DecompileStuck(format!("APPLY to {other:?}")))
                    }
                }
            }
            Instr::Return => {
                // a return value above a saved frame resumes the saved
                // code; otherwise the instruction is skipped
                let resumable = matches!(
                    (stack.last(), stack.get(stack.len().wrapping_sub(2))),
                    (Some(DItem::Frag(_)), Some(DItem::SavedCode(_)))
                );
                if resumable {
                    let v = pop_frag(&mut stack, "a value")?;
                    let saved = match stack.pop() {
                        Some(DItem::SavedCode(c)) => c,
                        _ => unreachable!(),
                    };
                    if matches!(stack.last(), Some(DItem::SavedEnv)) {
                        stack.pop();
                    }
                    stack.push(DItem::Frag(v));
                    return decomp(&saved, stack);
                }
            }
            Instr::Ifi => {
                let cond = pop_frag(&mut stack, "a condition")?;
                let else_item = stack
                    .pop()
                    .ok_or_else(|| DecompileStuck("IF with empty stack".into()))?;
                let then_item = stack
                    .pop()
                    .ok_or_else(|| DecompileStuck("IF with empty stack".into()))?;
                let t = branch(then_item)?;
                let f = branch(else_item)?;
                stack.push(DItem::Frag(CoreProg::If(
                    Rc::new(cond),
                    Rc::new(t),
                    Rc::new(f),
                )));
            }
        }
    }
    match stack.pop() {
        Some(DItem::Frag(p)) => Ok((p, stack)),
        other => Err(DecompileStuck(format!(
            "no program on the stack at the end: {other:?}"
        ))),
    }
}

/// A step is interesting if it follows immediately the execution of an
/// ACCESS, IF, OP or EQ instruction.
pub fn is_interesting(prev: &Instr) -> bool {
    matches!(
        prev,
        Instr::Access(_, _) | Instr::Ifi | Instr::Opr(_) | Instr::Eqi
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum BytecodeError {
    Machine(MachineStuck),
    Decompile(DecompileStuck),
}

impl fmt::Display for BytecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BytecodeError::Machine(e) => e.fmt(f),
            BytecodeError::Decompile(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for BytecodeError {}

/// Compiles, then runs one instruction at a time, decompiling after
/// each interesting step: the source line, then each changed rendering
/// down to the final value.
pub fn bytecode_trace(p: &CoreProg) -> Result<Vec<String>, BytecodeError> {
    let code = compile(p);
    let mut lines = vec![render_core(p)];
    let mut state = MachineState::load(code);
    while !state.at_end() {
        let prev = state.code[0].clone();
        state = machine_step(&state).map_err(BytecodeError::Machine)?;
        if is_interesting(&prev) {
            let decompiled = decompile_state(&state).map_err(BytecodeError::Decompile)?;
            let line = render_core(&decompiled);
            if lines.last() != Some(&line) {
                lines.push(line);
            }
        }
    }
    Ok(lines)
}
