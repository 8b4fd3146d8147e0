//! Recursive-descent parser with precedence climbing for MiniML.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use super::lexer::{LexError, Lexer, Token, TokenKind};
use super::{ArithOp, Case, CmpOp, Expr, ExprKind, ForDir, Item, Pattern, Program};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for SyntaxError {}

impl From<LexError> for SyntaxError {
    fn from(e: LexError) -> SyntaxError {
        SyntaxError {
            line: e.line,
            col: e.col,
            message: e.message,
        }
    }
}

/// Parses a single expression.
pub fn parse_expr(source: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(source)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parses a whole program: top-level `let` definitions, `exception` and
/// `constr` declarations, and bare expressions.
pub fn parse_program(source: &str) -> Result<Program, SyntaxError> {
    let mut p = Parser::new(source)?;
    let mut items = Vec::new();
    while !p.at_eof() {
        items.push(p.item()?);
    }
    Ok(Program { items })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    constrs: HashMap<String, (u32, bool)>,
}

impl Parser {
    fn new(source: &str) -> Result<Parser, SyntaxError> {
        Ok(Parser {
            toks: Lexer::tokenize(source)?,
            pos: 0,
            constrs: HashMap::new(),
        })
    }

    fn peek(&self) -> &TokenKind {
        &self.toks[self.pos].kind
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].kind
    }

    fn bump(&mut self) -> TokenKind {
        let t = self.toks[self.pos].kind.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        *self.peek() == TokenKind::Eof
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        let (line, col) = self.here();
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }

    fn unexpected(&self, wanted: &str) -> SyntaxError {
        self.error(format!("expected {wanted}, found '{}'", self.peek()))
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if matches!(self.peek(), TokenKind::Op(o) if *o == op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), TokenKind::Keyword(k) if *k == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), SyntaxError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{op}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{kw}'")))
        }
    }

    fn expect_eof(&self) -> Result<(), SyntaxError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            TokenKind::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    // ---- program items ----

    fn item(&mut self) -> Result<Item, SyntaxError> {
        match self.peek() {
            TokenKind::Keyword("exception") => {
                self.bump();
                let name = match self.bump() {
                    TokenKind::UIdent(n) => n,
                    _ => return Err(self.unexpected("an exception name")),
                };
                let has_payload = if self.eat_kw("of") {
                    self.expect_op("_")?;
                    true
                } else {
                    false
                };
                Ok(Item::ExceptionDef { name, has_payload })
            }
            TokenKind::Keyword("constr") => {
                self.bump();
                let mut decls = Vec::new();
                let mut nullary = 0u32;
                let mut payload = 0u32;
                loop {
                    let name = match self.bump() {
                        TokenKind::UIdent(n) => n,
                        _ => return Err(self.unexpected("a constructor name")),
                    };
                    let has_payload = if self.eat_kw("of") {
                        self.expect_op("_")?;
                        true
                    } else {
                        false
                    };
                    let tag = if has_payload {
                        let t = payload;
                        payload += 1;
                        t
                    } else {
                        let t = nullary;
                        nullary += 1;
                        t
                    };
                    self.constrs.insert(name.clone(), (tag, has_payload));
                    decls.push((name, has_payload));
                    if !self.eat_op("|") {
                        break;
                    }
                }
                Ok(Item::ConstrDef(decls))
            }
            TokenKind::Keyword("let") => {
                self.bump();
                let recursive = self.eat_kw("rec");
                let bindings = self.bindings()?;
                if self.eat_kw("in") {
                    let body = self.expr()?;
                    Ok(Item::Expr(Expr::new(ExprKind::Let {
                        recursive,
                        bindings,
                        body: Rc::new(body),
                    })))
                } else {
                    Ok(Item::LetDef {
                        recursive,
                        bindings,
                    })
                }
            }
            _ => Ok(Item::Expr(self.expr()?)),
        }
    }

    // `p1 = e1 and p2 = e2 and ...`, with the `let f x y = e` function sugar
    fn bindings(&mut self) -> Result<Vec<(Pattern, Expr)>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            let fun_sugar =
                matches!(self.peek(), TokenKind::Ident(_)) && self.starts_pattern_atom_at(1);
            if fun_sugar {
                let name = self.ident()?;
                let mut params = vec![self.pattern_atom()?];
                while self.starts_pattern_atom() {
                    params.push(self.pattern_atom()?);
                }
                self.expect_op("=")?;
                let mut rhs = self.expr()?;
                for p in params.into_iter().rev() {
                    rhs = Expr::new(ExprKind::Fun {
                        param: p,
                        body: Rc::new(rhs),
                        env: Vec::new(),
                    });
                }
                out.push((Pattern::Var(name), rhs));
            } else {
                let pat = self.pattern()?;
                self.expect_op("=")?;
                let rhs = self.expr()?;
                out.push((pat, rhs));
            }
            if !self.eat_kw("and") {
                break;
            }
        }
        Ok(out)
    }

    // ---- expressions, loosest level first ----

    pub fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.seq_expr()
    }

    fn seq_expr(&mut self) -> Result<Expr, SyntaxError> {
        let first = self.open_or(Self::if_expr)?;
        if self.eat_op(";") {
            let rest = self.seq_expr()?;
            Ok(Expr::new(ExprKind::Seq(Rc::new(first), Rc::new(rest))))
        } else {
            Ok(first)
        }
    }

    /// Open forms (`let`, `fun`, `function`, `match`, `try`) absorb
    /// everything to their right; anything else parses at `next`.
    fn open_or(
        &mut self,
        next: fn(&mut Self) -> Result<Expr, SyntaxError>,
    ) -> Result<Expr, SyntaxError> {
        match self.peek() {
            TokenKind::Keyword("let") => {
                self.bump();
                let recursive = self.eat_kw("rec");
                let bindings = self.bindings()?;
                self.expect_kw("in")?;
                let body = self.expr()?;
                Ok(Expr::new(ExprKind::Let {
                    recursive,
                    bindings,
                    body: Rc::new(body),
                }))
            }
            TokenKind::Keyword("fun") => {
                self.bump();
                let mut params = vec![self.pattern_atom()?];
                while self.starts_pattern_atom() {
                    params.push(self.pattern_atom()?);
                }
                self.expect_op("->")?;
                let mut body = self.expr()?;
                for p in params.into_iter().rev() {
                    body = Expr::new(ExprKind::Fun {
                        param: p,
                        body: Rc::new(body),
                        env: Vec::new(),
                    });
                }
                Ok(body)
            }
            TokenKind::Keyword("function") => {
                self.bump();
                let cases = self.cases()?;
                Ok(Expr::new(ExprKind::Function {
                    cases,
                    env: Vec::new(),
                }))
            }
            TokenKind::Keyword("match") => {
                self.bump();
                let subject = self.expr()?;
                self.expect_kw("with")?;
                let cases = self.cases()?;
                Ok(Expr::new(ExprKind::Match(Rc::new(subject), cases)))
            }
            TokenKind::Keyword("try") => {
                self.bump();
                let body = self.expr()?;
                self.expect_kw("with")?;
                let cases = self.cases()?;
                Ok(Expr::new(ExprKind::TryWith(Rc::new(body), cases)))
            }
            _ => next(self),
        }
    }

    fn cases(&mut self) -> Result<Vec<Case>, SyntaxError> {
        self.eat_op("|");
        let mut cases = Vec::new();
        loop {
            let pattern = self.pattern()?;
            let guard = if self.eat_kw("when") {
                Some(self.if_expr()?)
            } else {
                None
            };
            self.expect_op("->")?;
            let rhs = self.expr()?;
            cases.push(Case {
                pattern,
                guard,
                rhs,
            });
            if !self.eat_op("|") {
                break;
            }
        }
        Ok(cases)
    }

    fn if_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_kw("if") {
            let cond = self.open_or(Self::if_expr)?;
            self.expect_kw("then")?;
            let then = self.open_or(Self::if_expr)?;
            let els = if self.eat_kw("else") {
                Some(Rc::new(self.open_or(Self::if_expr)?))
            } else {
                None
            };
            Ok(Expr::new(ExprKind::If(Rc::new(cond), Rc::new(then), els)))
        } else {
            self.assign_expr()
        }
    }

    fn assign_expr(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.or_expr()?;
        if self.eat_op(":=") {
            let rhs = self.open_or(Self::assign_expr)?;
            Ok(Expr::app(Expr::app(Expr::var(":="), lhs), rhs))
        } else if self.eat_op("<-") {
            match lhs.kind {
                ExprKind::Field(e, name) => {
                    let rhs = self.open_or(Self::assign_expr)?;
                    Ok(Expr::new(ExprKind::SetField(e, name, Rc::new(rhs))))
                }
                _ => Err(self.error("only a record field may be assigned with '<-'")),
            }
        } else {
            Ok(lhs)
        }
    }

    fn or_expr(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.and_expr()?;
        if self.eat_op("||") {
            let rhs = self.open_or(Self::or_expr)?;
            Ok(Expr::new(ExprKind::Or(Rc::new(lhs), Rc::new(rhs))))
        } else {
            Ok(lhs)
        }
    }

    fn and_expr(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.cmp_expr()?;
        if self.eat_op("&&") {
            let rhs = self.open_or(Self::and_expr)?;
            Ok(Expr::new(ExprKind::And(Rc::new(lhs), Rc::new(rhs))))
        } else {
            Ok(lhs)
        }
    }

    fn cmp_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.cons_expr()?;
        loop {
            let op = match self.peek() {
                TokenKind::Op("=") => CmpOp::Eq,
                TokenKind::Op("<") => CmpOp::Lt,
                TokenKind::Op(">") => CmpOp::Gt,
                TokenKind::Op("<=") => CmpOp::LtEq,
                TokenKind::Op(">=") => CmpOp::GtEq,
                TokenKind::Op("<>") => CmpOp::NotEq,
                _ => break,
            };
            self.bump();
            let rhs = self.cons_expr()?;
            lhs = Expr::cmp(op, lhs, rhs);
        }
        Ok(lhs)
    }

    // `::` and `@` share a level and associate right
    fn cons_expr(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.add_expr()?;
        if self.eat_op("::") {
            let rhs = self.cons_expr()?;
            Ok(Expr::new(ExprKind::Cons(Rc::new(lhs), Rc::new(rhs))))
        } else if self.eat_op("@") {
            let rhs = self.cons_expr()?;
            Ok(Expr::app(Expr::app(Expr::var("@"), lhs), rhs))
        } else {
            Ok(lhs)
        }
    }

    fn add_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                TokenKind::Op("+") => ArithOp::Add,
                TokenKind::Op("-") => ArithOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::op(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.app_expr()?;
        loop {
            let op = match self.peek() {
                TokenKind::Op("*") => ArithOp::Mul,
                TokenKind::Op("/") => ArithOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.app_expr()?;
            lhs = Expr::op(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn app_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_kw("raise") {
            return self.raise_form();
        }
        // constructor application: a capitalised head takes one payload atom
        if let TokenKind::UIdent(name) = self.peek().clone() {
            self.bump();
            let payload = if self.starts_atom() {
                Some(Rc::new(self.prefix_expr()?))
            } else {
                None
            };
            return self.constr_use(name, payload);
        }
        let mut head = self.prefix_expr()?;
        while self.starts_atom() {
            let arg = self.prefix_expr()?;
            head = Expr::app(head, arg);
        }
        Ok(head)
    }

    fn raise_form(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            TokenKind::UIdent(name) => {
                self.bump();
                Ok(Expr::new(ExprKind::Raise(name, None)))
            }
            TokenKind::Op("(") => {
                self.bump();
                let name = match self.bump() {
                    TokenKind::UIdent(n) => n,
                    _ => return Err(self.unexpected("an exception name")),
                };
                let payload = if *self.peek() == TokenKind::Op(")") {
                    None
                } else {
                    Some(Rc::new(self.expr()?))
                };
                self.expect_op(")")?;
                Ok(Expr::new(ExprKind::Raise(name, payload)))
            }
            _ => Err(self.unexpected("an exception name after 'raise'")),
        }
    }

    fn constr_use(
        &mut self,
        name: String,
        payload: Option<Rc<Expr>>,
    ) -> Result<Expr, SyntaxError> {
        match self.constrs.get(&name) {
            Some((tag, has_payload)) => {
                if *has_payload != payload.is_some() {
                    return Err(self.error(format!(
                        "constructor {name} {} a payload",
                        if *has_payload { "needs" } else { "does not take" }
                    )));
                }
                Ok(Expr::new(ExprKind::Constr(*tag, name, payload)))
            }
            None => Err(self.error(format!("unknown constructor {name}"))),
        }
    }

    fn prefix_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_op("!") {
            let operand = self.prefix_expr()?;
            Ok(Expr::app(Expr::var("!"), operand))
        } else {
            self.postfix_expr()
        }
    }

    fn postfix_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.atom()?;
        while self.eat_op(".") {
            let name = self.ident()?;
            e = Expr::new(ExprKind::Field(Rc::new(e), name));
        }
        Ok(e)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            TokenKind::Int(_)
                | TokenKind::Ident(_)
                | TokenKind::UIdent(_)
                | TokenKind::Str(_)
                | TokenKind::Char(_)
                | TokenKind::Op("(")
                | TokenKind::Op("[")
                | TokenKind::Op("{")
                | TokenKind::Op("!")
                | TokenKind::Keyword("true")
                | TokenKind::Keyword("false")
                | TokenKind::Keyword("begin")
                | TokenKind::Keyword("for")
                | TokenKind::Keyword("while")
        )
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            TokenKind::Int(i) => {
                self.bump();
                Ok(Expr::int(i))
            }
            TokenKind::Str(s) => {
                self.bump();
                Ok(Expr::str(s))
            }
            TokenKind::Char(c) => {
                self.bump();
                Ok(Expr::new(ExprKind::Char(c)))
            }
            TokenKind::Keyword("true") => {
                self.bump();
                Ok(Expr::bool(true))
            }
            TokenKind::Keyword("false") => {
                self.bump();
                Ok(Expr::bool(false))
            }
            TokenKind::Ident(name) => {
                self.bump();
                Ok(Expr::var(name))
            }
            TokenKind::UIdent(name) => {
                self.bump();
                self.constr_use(name, None)
            }
            TokenKind::Keyword("for") => {
                self.bump();
                let var = self.ident()?;
                self.expect_op("=")?;
                let from = self.expr()?;
                let dir = if self.eat_kw("to") {
                    ForDir::UpTo
                } else if self.eat_kw("downto") {
                    ForDir::DownTo
                } else {
                    return Err(self.unexpected("'to' or 'downto'"));
                };
                let to = self.expr()?;
                self.expect_kw("do")?;
                let body = self.expr()?;
                self.expect_kw("done")?;
                let body_copy = Rc::new(body.deep_copy());
                Ok(Expr::new(ExprKind::For {
                    var,
                    from: Rc::new(from),
                    dir,
                    to: Rc::new(to),
                    body: Rc::new(body),
                    body_copy,
                }))
            }
            TokenKind::Keyword("while") => {
                self.bump();
                let guard = self.expr()?;
                self.expect_kw("do")?;
                let body = self.expr()?;
                self.expect_kw("done")?;
                let guard_copy = Rc::new(guard.deep_copy());
                let body_copy = Rc::new(body.deep_copy());
                Ok(Expr::new(ExprKind::While {
                    guard: Rc::new(guard),
                    body: Rc::new(body),
                    guard_copy,
                    body_copy,
                }))
            }
            TokenKind::Keyword("begin") => {
                self.bump();
                let e = self.expr()?;
                self.expect_kw("end")?;
                Ok(e)
            }
            TokenKind::Op("[") => {
                self.bump();
                if self.eat_op("]") {
                    return Ok(Expr::new(ExprKind::Nil));
                }
                let mut elems = vec![self.open_or(Self::if_expr)?];
                while self.eat_op(";") {
                    elems.push(self.open_or(Self::if_expr)?);
                }
                self.expect_op("]")?;
                let mut list = Expr::new(ExprKind::Nil);
                for e in elems.into_iter().rev() {
                    list = Expr::new(ExprKind::Cons(Rc::new(e), Rc::new(list)));
                }
                Ok(list)
            }
            TokenKind::Op("{") => {
                self.bump();
                let mut fields = Vec::new();
                loop {
                    let name = self.ident()?;
                    self.expect_op("=")?;
                    let value = self.open_or(Self::if_expr)?;
                    fields.push((name, value));
                    if !self.eat_op(";") {
                        break;
                    }
                }
                self.expect_op("}")?;
                Ok(Expr::record(fields))
            }
            TokenKind::Op("(") => {
                self.bump();
                if self.eat_op(")") {
                    return Ok(Expr::unit());
                }
                // an operator section such as ( + )
                if let TokenKind::Op(op @ ("+" | "-" | "*" | "/")) = self.peek().clone() {
                    if *self.peek_at(1) == TokenKind::Op(")") {
                        self.bump();
                        self.bump();
                        return Ok(Expr::var(op));
                    }
                }
                let first = self.expr()?;
                if self.eat_op(",") {
                    let mut elems = vec![first];
                    loop {
                        elems.push(self.expr()?);
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    self.expect_op(")")?;
                    Ok(Expr::new(ExprKind::Tuple(elems)))
                } else {
                    self.expect_op(")")?;
                    Ok(first)
                }
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    // ---- patterns ----

    fn pattern(&mut self) -> Result<Pattern, SyntaxError> {
        let mut p = self.pattern_or()?;
        while self.eat_kw("as") {
            let name = self.ident()?;
            p = Pattern::Alias(name, Box::new(p));
        }
        Ok(p)
    }

    fn pattern_or(&mut self) -> Result<Pattern, SyntaxError> {
        let mut lhs = self.pattern_cons()?;
        while self.eat_op("|") {
            let rhs = self.pattern_cons()?;
            let mut left_names = lhs.bound_names();
            let mut right_names = rhs.bound_names();
            left_names.sort();
            right_names.sort();
            if left_names != right_names {
                return Err(self.error("both sides of an or-pattern must bind the same names"));
            }
            lhs = Pattern::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn pattern_cons(&mut self) -> Result<Pattern, SyntaxError> {
        let head = self.pattern_app()?;
        if self.eat_op("::") {
            let tail = self.pattern_cons()?;
            Ok(Pattern::Cons(Box::new(head), Box::new(tail)))
        } else {
            Ok(head)
        }
    }

    fn pattern_app(&mut self) -> Result<Pattern, SyntaxError> {
        if let TokenKind::UIdent(name) = self.peek().clone() {
            self.bump();
            let payload = if self.starts_pattern_atom() {
                Some(Box::new(self.pattern_atom()?))
            } else {
                None
            };
            return Ok(Pattern::Constr(name, payload));
        }
        self.pattern_atom()
    }

    fn starts_pattern_atom(&self) -> bool {
        self.starts_pattern_atom_at(0)
    }

    fn starts_pattern_atom_at(&self, n: usize) -> bool {
        matches!(
            self.peek_at(n),
            TokenKind::Int(_)
                | TokenKind::Ident(_)
                | TokenKind::UIdent(_)
                | TokenKind::Str(_)
                | TokenKind::Char(_)
                | TokenKind::Op("(")
                | TokenKind::Op("[")
                | TokenKind::Op("{")
                | TokenKind::Op("_")
                | TokenKind::Keyword("true")
                | TokenKind::Keyword("false")
        )
    }

    fn pattern_atom(&mut self) -> Result<Pattern, SyntaxError> {
        match self.peek().clone() {
            TokenKind::Op("_") => {
                self.bump();
                Ok(Pattern::Any)
            }
            TokenKind::Ident(name) => {
                self.bump();
                Ok(Pattern::Var(name))
            }
            TokenKind::UIdent(name) => {
                self.bump();
                Ok(Pattern::Constr(name, None))
            }
            TokenKind::Int(i) => {
                self.bump();
                Ok(Pattern::Int(i))
            }
            TokenKind::Str(s) => {
                self.bump();
                Ok(Pattern::Str(s))
            }
            TokenKind::Char(c) => {
                self.bump();
                if self.eat_op("..") {
                    let hi = match self.bump() {
                        TokenKind::Char(h) => h,
                        _ => return Err(self.unexpected("a character")),
                    };
                    if c > hi {
                        return Err(self.error("empty character range"));
                    }
                    Ok(Pattern::CharRange(c, hi))
                } else {
                    Ok(Pattern::Char(c))
                }
            }
            TokenKind::Keyword("true") => {
                self.bump();
                Ok(Pattern::Bool(true))
            }
            TokenKind::Keyword("false") => {
                self.bump();
                Ok(Pattern::Bool(false))
            }
            TokenKind::Op("[") => {
                self.bump();
                if self.eat_op("]") {
                    return Ok(Pattern::Nil);
                }
                let mut elems = vec![self.pattern()?];
                while self.eat_op(";") {
                    elems.push(self.pattern()?);
                }
                self.expect_op("]")?;
                let mut list = Pattern::Nil;
                for p in elems.into_iter().rev() {
                    list = Pattern::Cons(Box::new(p), Box::new(list));
                }
                Ok(list)
            }
            TokenKind::Op("{") => {
                self.bump();
                let mut fields = Vec::new();
                loop {
                    let name = self.ident()?;
                    self.expect_op("=")?;
                    let p = self.pattern()?;
                    fields.push((name, p));
                    if !self.eat_op(";") {
                        break;
                    }
                }
                self.expect_op("}")?;
                Ok(Pattern::Record(fields))
            }
            TokenKind::Op("(") => {
                self.bump();
                if self.eat_op(")") {
                    return Ok(Pattern::Unit);
                }
                let first = self.pattern()?;
                if self.eat_op(",") {
                    let mut elems = vec![first];
                    loop {
                        elems.push(self.pattern()?);
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    self.expect_op(")")?;
                    Ok(Pattern::Tuple(elems))
                } else {
                    self.expect_op(")")?;
                    Ok(first)
                }
            }
            _ => Err(self.unexpected("a pattern")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{ArithOp, CmpOp, ExprKind};

    #[test]
    fn comparison_of_sums() {
        let e = parse_expr("1 + 2 > 3 + 4").unwrap();
        match &e.kind {
            ExprKind::Cmp(CmpOp::Gt, a, b) => {
                assert!(matches!(a.kind, ExprKind::Op(ArithOp::Add, _, _)));
                assert!(matches!(b.kind, ExprKind::Op(ArithOp::Add, _, _)));
            }
            k => panic!("unexpected parse: {k:?}"),
        }
    }

    #[test]
    fn unit_literal() {
        assert_eq!(parse_expr("()").unwrap().kind, ExprKind::Unit);
    }

    #[test]
    fn let_rec_factorial_shape() {
        let e = parse_expr(
            "let rec factorial n = if n = 1 then 1 else n * factorial (n - 1) in factorial 4",
        )
        .unwrap();
        match &e.kind {
            ExprKind::Let {
                recursive,
                bindings,
                body,
            } => {
                assert!(*recursive);
                assert_eq!(bindings.len(), 1);
                assert_eq!(bindings[0].0, Pattern::Var("factorial".into()));
                assert!(matches!(bindings[0].1.kind, ExprKind::Fun { .. }));
                match &body.kind {
                    ExprKind::App(f, a) => {
                        assert_eq!(f.kind, ExprKind::Var("factorial".into()));
                        assert_eq!(a.kind, ExprKind::Int(4));
                    }
                    k => panic!("unexpected body: {k:?}"),
                }
            }
            k => panic!("unexpected parse: {k:?}"),
        }
    }

    #[test]
    fn comparisons_associate_left() {
        let e = parse_expr("1 < 2 < 3").unwrap();
        match &e.kind {
            ExprKind::Cmp(CmpOp::Lt, a, b) => {
                assert!(matches!(a.kind, ExprKind::Cmp(CmpOp::Lt, _, _)));
                assert_eq!(b.kind, ExprKind::Int(3));
            }
            k => panic!("unexpected parse: {k:?}"),
        }
    }

    #[test]
    fn program_with_three_defs() {
        let p = parse_program("let x = 1 + 2\nlet y = x + x\nlet z = 1 + y").unwrap();
        assert_eq!(p.items.len(), 3);
        assert!(p
            .items
            .iter()
            .all(|i| matches!(i, Item::LetDef { recursive: false, .. })));
    }

    #[test]
    fn empty_program() {
        assert_eq!(parse_program("").unwrap().items.len(), 0);
    }

    #[test]
    fn loop_copies_equal_originals() {
        let e = parse_expr("for y = 0 + 1 to 6 - 1 do print_int y done").unwrap();
        match &e.kind {
            ExprKind::For {
                body, body_copy, ..
            } => assert_eq!(body, body_copy),
            k => panic!("unexpected parse: {k:?}"),
        }
        let w = parse_expr("while !x < 5 do x := !x + 1 done").unwrap();
        match &w.kind {
            ExprKind::While {
                guard,
                guard_copy,
                body,
                body_copy,
            } => {
                assert_eq!(guard, guard_copy);
                assert_eq!(body, body_copy);
            }
            k => panic!("unexpected parse: {k:?}"),
        }
    }

    #[test]
    fn or_pattern_name_sets_checked() {
        assert!(parse_expr("match x with (a, 0) | (0, a) -> a | _ -> 0").is_ok());
        assert!(parse_expr("match x with (a, 0) | (0, b) -> a | _ -> 0").is_err());
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_expr("let x = ").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.col >= 9);
    }

    #[test]
    fn sequence_extends_let_body() {
        let e = parse_expr("let t = 1 in x := 2; y := t").unwrap();
        match &e.kind {
            ExprKind::Let { body, .. } => assert!(matches!(body.kind, ExprKind::Seq(_, _))),
            k => panic!("unexpected parse: {k:?}"),
        }
    }

    #[test]
    fn constr_declaration_assigns_tags() {
        let p = parse_program("constr Lf | Br of _\nlet t = Br (Lf, 1, Lf)").unwrap();
        match &p.items[1] {
            Item::LetDef { bindings, .. } => match &bindings[0].1.kind {
                ExprKind::Constr(0, name, Some(payload)) => {
                    assert_eq!(name, "Br");
                    match &payload.kind {
                        ExprKind::Tuple(es) => {
                            assert_eq!(es.len(), 3);
                            assert_eq!(es[0].kind, ExprKind::Constr(0, "Lf".into(), None));
                        }
                        k => panic!("unexpected payload: {k:?}"),
                    }
                }
                k => panic!("unexpected rhs: {k:?}"),
            },
            i => panic!("unexpected item: {i:?}"),
        }
    }
}
