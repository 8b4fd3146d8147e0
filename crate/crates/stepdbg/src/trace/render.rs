//! Prettyprinting of expressions with minimal parentheses, redex span
//! tracking, optional print-as substitution, and width-based wrapping.

use std::ops::Range;

use crate::syntax::{Case, Expr, ExprKind, ForDir, Pattern};

// precedence levels, loosest first; open forms (let, fun, function,
// match, try) sit below everything and parenthesize except in tail
// positions
const OPEN: u8 = 0;
const SEQ: u8 = 1;
const IF: u8 = 2;
const ASSIGN: u8 = 3;
const OR: u8 = 4;
const AND: u8 = 5;
const CMP: u8 = 6;
const CONS: u8 = 7;
const ADD: u8 = 8;
const MUL: u8 = 9;
const PREFIX: u8 = 10;
const APP: u8 = 11;
const FIELD: u8 = 12;
const ATOM: u8 = 13;

#[derive(Debug, Clone)]
pub struct RenderOpts {
    /// Wrap lines longer than this; 0 disables wrapping.
    pub width: usize,
    /// Honor `print_as` labels.
    pub use_print_as: bool,
    /// Strip outermost recursive-function definitions from display.
    pub remove_rec_all: bool,
}

impl Default for RenderOpts {
    fn default() -> Self {
        RenderOpts {
            width: 0,
            use_print_as: true,
            remove_rec_all: false,
        }
    }
}

/// Plain rendering plus the spans needed for styling.
#[derive(Debug, Clone, Default)]
pub struct Rendering {
    pub text: String,
    pub redex_span: Option<Range<usize>>,
    pub keyword_spans: Vec<Range<usize>>,
    /// Byte ranges that must not be broken when wrapping (string and
    /// character literal bodies).
    pub no_break_spans: Vec<Range<usize>>,
}

struct Ctx<'a> {
    out: String,
    redex: Option<*const Expr>,
    redex_span: Option<Range<usize>>,
    keyword_spans: Vec<Range<usize>>,
    no_break_spans: Vec<Range<usize>>,
    use_print_as: bool,
    _marker: std::marker::PhantomData<&'a Expr>,
}

pub fn render_expr(e: &Expr, redex: Option<&Expr>, opts: &RenderOpts) -> Rendering {
    let mut shown = e;
    if opts.remove_rec_all {
        shown = strip_rec_lets(shown);
    }
    let mut ctx = Ctx {
        out: String::new(),
        redex: redex.map(|r| r as *const Expr),
        redex_span: None,
        keyword_spans: Vec::new(),
        no_break_spans: Vec::new(),
        use_print_as: opts.use_print_as,
        _marker: std::marker::PhantomData,
    };
    ctx.expr(shown, OPEN, true);
    let mut rendering = Rendering {
        text: ctx.out,
        redex_span: ctx.redex_span,
        keyword_spans: ctx.keyword_spans,
        no_break_spans: ctx.no_break_spans,
    };
    if opts.width > 0 {
        rendering = wrap(rendering, opts.width);
    }
    rendering
}

/// Renders a pattern alone.
pub fn render_pattern(p: &Pattern) -> String {
    let mut ctx = Ctx {
        out: String::new(),
        redex: None,
        redex_span: None,
        keyword_spans: Vec::new(),
        no_break_spans: Vec::new(),
        use_print_as: false,
        _marker: std::marker::PhantomData,
    };
    ctx.pattern(p, false);
    ctx.out
}

/// Strips outermost recursive-function `let`s for display, leaving the
/// underlying expression untouched.
pub fn strip_rec_lets(e: &Expr) -> &Expr {
    let mut cur = e;
    loop {
        match &cur.kind {
            ExprKind::Let {
                recursive: true,
                bindings,
                body,
            } if bindings
                .iter()
                .all(|(_, rhs)| matches!(rhs.kind, ExprKind::Fun { .. } | ExprKind::Function { .. })) =>
            {
                cur = body;
            }
            _ => return cur,
        }
    }
}

impl Ctx<'_> {
    fn expr(&mut self, e: &Expr, req: u8, tail: bool) {
        let start = self.out.len();
        let is_redex = self.redex.map(|r| std::ptr::eq(r, e)) == Some(true);

        if self.use_print_as {
            if let Some(label) = &e.print_as {
                self.out.push_str(label);
                if is_redex {
                    self.redex_span = Some(start..self.out.len());
                }
                return;
            }
        }

        let prec = self.prec_of(e);
        // open forms swallow everything rightward: they print bare only
        // in positions delimited by an unabsorbable token
        let parens = if prec == OPEN { !tail } else { prec < req };
        if parens {
            self.out.push('(');
        }
        let inner_start = self.out.len();
        // inside parentheses everything up to the closing one is ours
        self.node(e, tail || parens);
        if is_redex {
            self.redex_span = Some(inner_start..self.out.len());
        }
        if parens {
            self.out.push(')');
        }
    }

    fn prec_of(&self, e: &Expr) -> u8 {
        match &e.kind {
            ExprKind::Let { .. }
            | ExprKind::Fun { .. }
            | ExprKind::Function { .. }
            | ExprKind::Match(_, _)
            | ExprKind::TryWith(_, _) => OPEN,
            ExprKind::Seq(_, _) => SEQ,
            ExprKind::If(_, _, _) => IF,
            ExprKind::SetField(_, _, _) => ASSIGN,
            ExprKind::Or(_, _) => OR,
            ExprKind::And(_, _) => AND,
            ExprKind::Cmp(_, _, _) => CMP,
            ExprKind::Cons(h, t) => {
                if proper_list(e).is_some() {
                    ATOM
                } else {
                    let _ = (h, t);
                    CONS
                }
            }
            ExprKind::Op(op, _, _) => match op {
                crate::syntax::ArithOp::Add | crate::syntax::ArithOp::Sub => ADD,
                crate::syntax::ArithOp::Mul | crate::syntax::ArithOp::Div => MUL,
            },
            ExprKind::App(f, _) => {
                if Self::op_head(f) == Some("!") {
                    PREFIX
                } else if let ExprKind::App(g, _) = &f.kind {
                    match Self::op_head(g) {
                        Some(":=") => ASSIGN,
                        Some("@") => CONS,
                        _ => APP,
                    }
                } else {
                    match Self::collected_infix(f) {
                        Some((":=", _)) => ASSIGN,
                        Some(("@", _)) => CONS,
                        _ => APP,
                    }
                }
            }
            ExprKind::Raise(_, _) => APP,
            ExprKind::Constr(_, _, Some(_)) => APP,
            ExprKind::Field(_, _) => FIELD,
            ExprKind::Builtin { args, .. } if !args.is_empty() => APP,
            ExprKind::Int(i) if *i < 0 => PREFIX,
            _ => ATOM,
        }
    }

    // a two-argument operator builtin that has collected its first
    // argument renders infix: that argument is the left operand
    fn collected_infix(e: &Expr) -> Option<(&str, &Expr)> {
        match &e.kind {
            ExprKind::Builtin { name, args, .. }
                if args.len() == 1 && matches!(name.as_str(), ":=" | "@") =>
            {
                Some((name.as_str(), &args[0]))
            }
            _ => None,
        }
    }

    // the operator spelling if this expression is an operator head
    // (a variable or uncollected builtin named like an operator)
    fn op_head(e: &Expr) -> Option<&str> {
        let name: &str = match &e.kind {
            ExprKind::Var(n) => n,
            ExprKind::Builtin { name, args, .. } if args.is_empty() => name,
            _ => return None,
        };
        match name {
            "!" | ":=" | "@" | "+" | "-" | "*" | "/" => Some(name),
            _ => None,
        }
    }

    fn kw(&mut self, word: &str) {
        let start = self.out.len();
        self.out.push_str(word);
        self.keyword_spans.push(start..self.out.len());
    }

    fn node(&mut self, e: &Expr, tail: bool) {
        match &e.kind {
            ExprKind::Unit => self.out.push_str("()"),
            ExprKind::Int(i) => self.out.push_str(&i.to_string()),
            ExprKind::Bool(b) => self.kw(if *b { "true" } else { "false" }),
            ExprKind::Char(c) => {
                let start = self.out.len();
                self.out.push('\'');
                push_char_escaped(&mut self.out, *c, '\'');
                self.out.push('\'');
                self.no_break_spans.push(start..self.out.len());
            }
            ExprKind::Str(s) => {
                let start = self.out.len();
                self.out.push('"');
                for c in s.chars() {
                    push_char_escaped(&mut self.out, c, '"');
                }
                self.out.push('"');
                self.no_break_spans.push(start..self.out.len());
            }
            ExprKind::Var(n) => self.var_name(n),
            ExprKind::Tuple(es) => {
                self.out.push('(');
                for (i, el) in es.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(el, SEQ, true);
                }
                self.out.push(')');
            }
            ExprKind::Nil => self.out.push_str("[]"),
            ExprKind::Cons(h, t) => {
                if let Some(elems) = proper_list(e) {
                    self.out.push('[');
                    for (i, el) in elems.iter().enumerate() {
                        if i > 0 {
                            self.out.push_str("; ");
                        }
                        self.expr(el, IF, false);
                    }
                    self.out.push(']');
                } else {
                    self.expr(h, ADD, false);
                    self.out.push_str("::");
                    self.expr(t, CONS, false);
                }
            }
            ExprKind::Record(fields) => {
                self.out.push('{');
                for (i, (name, cell)) in fields.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str("; ");
                    }
                    self.out.push_str(name);
                    self.out.push_str(" = ");
                    self.expr(&cell.borrow(), IF, false);
                }
                self.out.push('}');
            }
            ExprKind::Constr(_, name, payload) => {
                self.out.push_str(name);
                if let Some(p) = payload {
                    self.out.push(' ');
                    self.expr(p, APP + 1, false);
                }
            }
            ExprKind::Op(op, a, b) => {
                let prec = self.prec_of(e);
                self.expr(a, prec, false);
                self.out.push(' ');
                self.out.push_str(&op.to_string());
                self.out.push(' ');
                self.expr(b, prec + 1, false);
            }
            ExprKind::Cmp(op, a, b) => {
                self.expr(a, CMP, false);
                self.out.push(' ');
                self.out.push_str(&op.to_string());
                self.out.push(' ');
                self.expr(b, CMP + 1, false);
            }
            ExprKind::And(a, b) => {
                self.expr(a, AND + 1, false);
                self.out.push_str(" && ");
                self.expr(b, AND, false);
            }
            ExprKind::Or(a, b) => {
                self.expr(a, OR + 1, false);
                self.out.push_str(" || ");
                self.expr(b, OR, false);
            }
            ExprKind::If(c, t, els) => {
                self.kw("if");
                self.out.push(' ');
                self.expr(c, IF, true);
                self.out.push(' ');
                self.kw("then");
                self.out.push(' ');
                // an else-less if as the then-branch would steal the else
                if els.is_some() && ends_in_bare_if(t) {
                    self.expr(t, ATOM, false);
                } else {
                    self.expr(t, IF, els.is_some() || tail);
                }
                if let Some(els) = els {
                    self.out.push(' ');
                    self.kw("else");
                    self.out.push(' ');
                    self.expr(els, IF, tail);
                }
            }
            ExprKind::Let {
                recursive,
                bindings,
                body,
            } => {
                self.kw("let");
                if *recursive {
                    self.out.push(' ');
                    self.kw("rec");
                }
                for (i, (pat, rhs)) in bindings.iter().enumerate() {
                    if i > 0 {
                        self.out.push(' ');
                        self.kw("and");
                    }
                    self.out.push(' ');
                    self.binding(pat, rhs);
                }
                self.out.push(' ');
                self.kw("in");
                self.out.push(' ');
                self.expr(body, OPEN, tail);
            }
            ExprKind::Fun { param, body, .. } => {
                self.kw("fun");
                self.out.push(' ');
                self.pattern(param, true);
                let mut b: &Expr = body;
                // fun x -> fun y -> e prints as fun x y -> e
                while let ExprKind::Fun { param, body, .. } = &b.kind {
                    if b.print_as.is_some() && self.use_print_as {
                        break;
                    }
                    self.out.push(' ');
                    self.pattern(param, true);
                    b = body;
                }
                self.out.push(' ');
                self.out.push_str("-> ");
                self.expr(b, OPEN, tail);
            }
            ExprKind::Function { cases, .. } => {
                self.kw("function");
                self.out.push(' ');
                self.cases(cases, tail);
            }
            ExprKind::Match(subject, cases) => {
                self.kw("match");
                self.out.push(' ');
                if ends_in_cases(subject) {
                    self.expr(subject, ATOM, false);
                } else {
                    self.expr(subject, IF, true);
                }
                self.out.push(' ');
                self.kw("with");
                self.out.push(' ');
                self.cases(cases, tail);
            }
            ExprKind::TryWith(body, cases) => {
                self.kw("try");
                self.out.push(' ');
                if ends_in_cases(body) {
                    self.expr(body, ATOM, false);
                } else {
                    self.expr(body, IF, true);
                }
                self.out.push(' ');
                self.kw("with");
                self.out.push(' ');
                self.cases(cases, tail);
            }
            ExprKind::App(f, a) => match Self::op_head(f) {
                Some("!") => {
                    self.out.push('!');
                    // a dereference operand parses at postfix level
                    if matches!(a.kind, ExprKind::Raise(_, _)) {
                        self.expr(a, ATOM, false);
                    } else {
                        self.expr(a, FIELD, false);
                    }
                }
                _ => {
                    if let ExprKind::App(g, x) = &f.kind {
                        match Self::op_head(g) {
                            Some(":=") => {
                                self.expr(x, ASSIGN + 1, false);
                                self.out.push_str(" := ");
                                self.expr(a, ASSIGN, false);
                                return;
                            }
                            Some("@") => {
                                self.expr(x, CONS + 1, false);
                                self.out.push_str(" @ ");
                                self.expr(a, CONS, false);
                                return;
                            }
                            _ => {}
                        }
                    }
                    if let Some((op, x)) = Self::collected_infix(f) {
                        let (spelling, prec) = match op {
                            ":=" => (" := ", ASSIGN),
                            _ => (" @ ", CONS),
                        };
                        self.expr(x, prec + 1, false);
                        self.out.push_str(spelling);
                        self.expr(a, prec, false);
                        return;
                    }
                    // a raise form cannot head an application bare
                    let f_req = if matches!(f.kind, ExprKind::Raise(_, _)) {
                        ATOM
                    } else {
                        APP
                    };
                    self.expr(f, f_req, false);
                    self.out.push(' ');
                    self.expr(a, APP + 1, false);
                }
            },
            ExprKind::Seq(a, b) => {
                self.expr(a, SEQ + 1, false);
                self.out.push_str("; ");
                self.expr(b, SEQ, tail);
            }
            ExprKind::While { guard, body, .. } => {
                self.kw("while");
                self.out.push(' ');
                self.expr(guard, SEQ, true);
                self.out.push(' ');
                self.kw("do");
                self.out.push(' ');
                self.expr(body, SEQ, true);
                self.out.push(' ');
                self.kw("done");
            }
            ExprKind::For {
                var,
                from,
                dir,
                to,
                body,
                ..
            } => {
                self.kw("for");
                self.out.push(' ');
                self.out.push_str(var);
                self.out.push_str(" = ");
                self.expr(from, IF, true);
                self.out.push(' ');
                self.kw(match dir {
                    ForDir::UpTo => "to",
                    ForDir::DownTo => "downto",
                });
                self.out.push(' ');
                self.expr(to, IF, true);
                self.out.push(' ');
                self.kw("do");
                self.out.push(' ');
                self.expr(body, SEQ, true);
                self.out.push(' ');
                self.kw("done");
            }
            ExprKind::Field(e, name) => {
                self.expr(e, FIELD, false);
                self.out.push('.');
                self.out.push_str(name);
            }
            ExprKind::SetField(e, name, v) => {
                self.expr(e, FIELD, false);
                self.out.push('.');
                self.out.push_str(name);
                self.out.push_str(" <- ");
                self.expr(v, ASSIGN, false);
            }
            ExprKind::Raise(name, payload) => {
                self.kw("raise");
                self.out.push(' ');
                match payload {
                    None => self.out.push_str(name),
                    Some(p) => {
                        self.out.push('(');
                        self.out.push_str(name);
                        self.out.push(' ');
                        self.expr(p, APP + 1, false);
                        self.out.push(')');
                    }
                }
            }
            ExprKind::Builtin { name, args, .. } => {
                if args.is_empty() {
                    self.var_name(name);
                } else {
                    for _ in 0..args.len() {
                        self.out.push('(');
                    }
                    self.var_name(name);
                    for (i, a) in args.iter().enumerate() {
                        self.out.push(' ');
                        self.expr(a, APP + 1, false);
                        if i < args.len() {
                            self.out.push(')');
                        }
                    }
                }
            }
        }
    }

    // operator-named variables render in their section form: ( + )
    fn var_name(&mut self, name: &str) {
        if name.chars().next().is_some_and(|c| !c.is_alphanumeric() && c != '_') {
            self.out.push_str("( ");
            self.out.push_str(name);
            self.out.push_str(" )");
        } else {
            self.out.push_str(name);
        }
    }

    fn binding(&mut self, pat: &Pattern, rhs: &Expr) {
        // let f x y = e sugar for function right-hand sides
        if let Pattern::Var(name) = pat {
            let skip_label = rhs.print_as.as_deref() == Some(name.as_str());
            if (skip_label || rhs.print_as.is_none() || !self.use_print_as)
                && matches!(rhs.kind, ExprKind::Fun { .. })
            {
                self.out.push_str(name);
                let mut b = rhs;
                while let ExprKind::Fun { param, body, .. } = &b.kind {
                    self.out.push(' ');
                    self.pattern(param, true);
                    b = body;
                }
                self.out.push_str(" = ");
                self.expr(b, OPEN, true);
                return;
            }
        }
        self.pattern(pat, false);
        self.out.push_str(" = ");
        self.expr(rhs, OPEN, true);
    }

    fn cases(&mut self, cases: &[Case], tail: bool) {
        for (i, case) in cases.iter().enumerate() {
            if i > 0 {
                self.out.push_str(" | ");
            }
            self.pattern(&case.pattern, false);
            if let Some(guard) = &case.guard {
                self.out.push(' ');
                self.kw("when");
                self.out.push(' ');
                self.expr(guard, IF, false);
            }
            self.out.push_str(" -> ");
            let last = i + 1 == cases.len();
            // an inner case-bearing form would swallow our later cases
            if !last && ends_in_cases(&case.rhs) {
                self.expr(&case.rhs, ATOM, false);
            } else if last {
                self.expr(&case.rhs, OPEN, tail);
            } else {
                self.expr(&case.rhs, OPEN, true);
            }
        }
    }

    fn pattern(&mut self, p: &Pattern, atomic: bool) {
        match p {
            Pattern::Any => self.out.push('_'),
            Pattern::Var(n) => self.out.push_str(n),
            Pattern::Int(i) => {
                if *i < 0 && atomic {
                    self.out.push('(');
                    self.out.push_str(&i.to_string());
                    self.out.push(')');
                } else {
                    self.out.push_str(&i.to_string());
                }
            }
            Pattern::Bool(b) => self.kw(if *b { "true" } else { "false" }),
            Pattern::Char(c) => {
                self.out.push('\'');
                push_char_escaped(&mut self.out, *c, '\'');
                self.out.push('\'');
            }
            Pattern::CharRange(lo, hi) => {
                self.out.push('\'');
                push_char_escaped(&mut self.out, *lo, '\'');
                self.out.push_str("'..'");
                push_char_escaped(&mut self.out, *hi, '\'');
                self.out.push('\'');
            }
            Pattern::Str(s) => {
                self.out.push('"');
                for c in s.chars() {
                    push_char_escaped(&mut self.out, c, '"');
                }
                self.out.push('"');
            }
            Pattern::Unit => self.out.push_str("()"),
            Pattern::Tuple(ps) => {
                self.out.push('(');
                for (i, sub) in ps.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.pattern(sub, false);
                }
                self.out.push(')');
            }
            Pattern::Nil => self.out.push_str("[]"),
            Pattern::Cons(h, t) => {
                let parens = atomic;
                if parens {
                    self.out.push('(');
                }
                self.pattern_cons_operand(h);
                self.out.push_str("::");
                match &**t {
                    Pattern::Cons(_, _) => self.pattern(t, false),
                    _ => self.pattern_cons_operand(t),
                }
                if parens {
                    self.out.push(')');
                }
            }
            Pattern::Constr(name, payload) => {
                let parens = atomic && payload.is_some();
                if parens {
                    self.out.push('(');
                }
                self.out.push_str(name);
                if let Some(p) = payload {
                    self.out.push(' ');
                    self.pattern(p, true);
                }
                if parens {
                    self.out.push(')');
                }
            }
            Pattern::Record(fields) => {
                self.out.push('{');
                for (i, (name, sub)) in fields.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str("; ");
                    }
                    self.out.push_str(name);
                    self.out.push_str(" = ");
                    self.pattern(sub, false);
                }
                self.out.push('}');
            }
            Pattern::Alias(name, sub) => {
                let parens = atomic;
                if parens {
                    self.out.push('(');
                }
                self.pattern(sub, false);
                self.out.push(' ');
                self.kw("as");
                self.out.push(' ');
                self.out.push_str(name);
                if parens {
                    self.out.push(')');
                }
            }
            Pattern::Or(a, b) => {
                let parens = atomic;
                if parens {
                    self.out.push('(');
                }
                self.pattern(a, false);
                self.out.push_str(" | ");
                match &**b {
                    Pattern::Or(_, _) => self.pattern(b, false),
                    _ => self.pattern_or_operand(b),
                }
                if parens {
                    self.out.push(')');
                }
            }
        }
    }

    fn pattern_cons_operand(&mut self, p: &Pattern) {
        match p {
            Pattern::Cons(_, _) | Pattern::Or(_, _) | Pattern::Alias(_, _) => {
                self.out.push('(');
                self.pattern(p, false);
                self.out.push(')');
            }
            _ => self.pattern(p, false),
        }
    }

    fn pattern_or_operand(&mut self, p: &Pattern) {
        match p {
            Pattern::Alias(_, _) => {
                self.out.push('(');
                self.pattern(p, false);
                self.out.push(')');
            }
            _ => self.pattern(p, false),
        }
    }
}

/// The elements of a cons chain ending in `Nil`, if this is one.
fn proper_list(e: &Expr) -> Option<Vec<&Expr>> {
    let mut out = Vec::new();
    let mut cur = e;
    loop {
        match &cur.kind {
            ExprKind::Cons(h, t) if cur.print_as.is_none() => {
                out.push(&**h);
                cur = t;
            }
            ExprKind::Nil if cur.print_as.is_none() => return Some(out),
            _ => return None,
        }
    }
}

// does the rightmost open spine end in an else-less if?
fn ends_in_bare_if(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::If(_, _, None) => true,
        ExprKind::If(_, _, Some(els)) => ends_in_bare_if(els),
        ExprKind::Let { body, .. } => ends_in_bare_if(body),
        ExprKind::Fun { body, .. } => ends_in_bare_if(body),
        ExprKind::Seq(_, b) => ends_in_bare_if(b),
        _ => false,
    }
}

// does the rightmost open spine end in a case-bearing form whose case
// list could swallow a following '|'?
fn ends_in_cases(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Function { .. } | ExprKind::Match(_, _) | ExprKind::TryWith(_, _) => true,
        ExprKind::Let { body, .. } => ends_in_cases(body),
        ExprKind::Fun { body, .. } => ends_in_cases(body),
        ExprKind::Seq(_, b) => ends_in_cases(b),
        ExprKind::If(_, t, els) => match els {
            Some(els) => ends_in_cases(els),
            None => ends_in_cases(t),
        },
        _ => false,
    }
}

fn push_char_escaped(out: &mut String, c: char, quote: char) {
    match c {
        '\n' => out.push_str("\\n"),
        '\t' => out.push_str("\\t"),
        '\r' => out.push_str("\\r"),
        '\\' => out.push_str("\\\\"),
        c if c == quote => {
            out.push('\\');
            out.push(c);
        }
        c => out.push(c),
    }
}

/// Greedy wrapping at breakable spaces, re-mapping spans (byte
/// offsets). Continuation lines are indented by two spaces.
fn wrap(r: Rendering, width: usize) -> Rendering {
    if r.text.chars().count() <= width {
        return r;
    }
    let chars: Vec<(usize, char)> = r.text.char_indices().collect();
    let unbreakable = |byte: usize| r.no_break_spans.iter().any(|s| s.contains(&byte));
    let mut out = String::new();
    // one (old byte, new byte) pair per emitted char, in old order
    let mut map: Vec<(usize, usize)> = Vec::with_capacity(chars.len());
    let mut line_len = 0usize;
    let mut line_start = 0usize; // char index of current line start
    let mut i = 0usize;
    while i < chars.len() {
        if line_len >= width {
            if let Some(break_at) = (line_start..i)
                .rev()
                .find(|&j| chars[j].1 == ' ' && !unbreakable(chars[j].0))
            {
                out.truncate(map[break_at].1);
                map.truncate(break_at);
                let nl_pos = out.len();
                out.push('\n');
                out.push_str("  ");
                // the removed space maps to the newline
                map.push((chars[break_at].0, nl_pos));
                line_len = 2;
                line_start = break_at + 1;
                i = break_at + 1;
                continue;
            }
        }
        map.push((chars[i].0, out.len()));
        out.push(chars[i].1);
        line_len += 1;
        i += 1;
    }
    let end = out.len();
    let lookup = |old: usize| -> usize {
        match map.binary_search_by_key(&old, |(o, _)| *o) {
            Ok(k) => map[k].1,
            Err(k) if k < map.len() => map[k].1,
            Err(_) => end,
        }
    };
    let remap = |range: &Range<usize>| -> Range<usize> { lookup(range.start)..lookup(range.end) };
    Rendering {
        redex_span: r.redex_span.as_ref().map(&remap),
        keyword_spans: r.keyword_spans.iter().map(&remap).collect(),
        no_break_spans: r.no_break_spans.iter().map(&remap).collect(),
        text: out,
    }
}
