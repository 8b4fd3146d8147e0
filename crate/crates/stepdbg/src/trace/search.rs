//! Trace search: token-skipping patterns compiled to regular
//! expressions, and the stateful after/until window filter.

use std::collections::VecDeque;
use std::ops::Range;

use regex::Regex;

use crate::syntax::{Lexer, TokenKind};

/// Everything the search flags configure.
#[derive(Debug, Clone, Default)]
pub struct SearchSpec {
    pub pattern: Option<String>,
    pub no_parens: bool,
    pub regexp_mode: bool,
    pub invert: bool,
    pub highlight: bool,
    pub upto: Option<usize>,
    pub limit_n: Option<usize>,
    pub after: Option<String>,
    pub until: Option<String>,
    pub after_any: Option<String>,
    pub until_any: Option<String>,
    pub invert_after: bool,
    pub invert_until: bool,
    pub stop: bool,
    pub repeat: bool,
}

impl SearchSpec {
    pub fn is_default(&self) -> bool {
        self.pattern.is_none()
            && self.after.is_none()
            && self.until.is_none()
            && self.after_any.is_none()
            && self.until_any.is_none()
            && self.limit_n.is_none()
            && !self.stop
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSyntaxError(pub String);

impl std::fmt::Display for SearchSyntaxError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "bad search pattern: {}", self.0)
    }
}

impl std::error::Error for SearchSyntaxError {}

/// A compiled matcher over rendered step text.
#[derive(Debug, Clone)]
pub struct StepMatcher {
    regex: Regex,
}

// one arbitrary token, for the `_` wildcard
const TOKEN_RE: &str = r#"(?:[A-Za-z_][A-Za-z0-9_']*|[0-9]+|"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)'|[(){}\[\]]|[^\sA-Za-z0-9_(){}\[\]]+)"#;

/// Compiles a search pattern. In token mode the pattern is lexed, any
/// amount of whitespace is allowed between tokens (plus parentheses
/// when `no_parens` is set), and `_` stands for exactly one token. In
/// regexp mode the pattern is a raw regular expression.
pub fn compile_search(spec: &SearchSpec) -> Result<StepMatcher, SearchSyntaxError> {
    let pattern = spec
        .pattern
        .as_deref()
        .ok_or_else(|| SearchSyntaxError("empty pattern".into()))?;
    compile_pattern(pattern, spec.no_parens, spec.regexp_mode)
}

pub fn compile_pattern(
    pattern: &str,
    no_parens: bool,
    regexp_mode: bool,
) -> Result<StepMatcher, SearchSyntaxError> {
    if regexp_mode {
        return Regex::new(pattern)
            .map(|regex| StepMatcher { regex })
            .map_err(|e| SearchSyntaxError(e.to_string()));
    }
    let tokens = Lexer::tokenize(pattern).map_err(|e| SearchSyntaxError(e.message))?;
    let gap = if no_parens { r"[\s()]*" } else { r"\s*" };
    let mut out = String::new();
    let mut first = true;
    for tok in tokens {
        let piece = match &tok.kind {
            TokenKind::Eof => break,
            TokenKind::Op("_") => TOKEN_RE.to_string(),
            TokenKind::Op(o) => {
                if no_parens && (*o == "(" || *o == ")") {
                    continue;
                }
                regex::escape(o)
            }
            TokenKind::Int(i) => with_boundaries(&i.to_string()),
            TokenKind::Ident(s) | TokenKind::UIdent(s) => with_boundaries(s),
            TokenKind::Keyword(k) => with_boundaries(k),
            TokenKind::Str(s) => regex::escape(&format!("{s:?}")),
            TokenKind::Char(c) => regex::escape(&format!("'{c}'")),
        };
        if !first {
            out.push_str(gap);
        }
        out.push_str(&piece);
        first = false;
    }
    if first {
        return Err(SearchSyntaxError("empty pattern".into()));
    }
    Regex::new(&out)
        .map(|regex| StepMatcher { regex })
        .map_err(|e| SearchSyntaxError(e.to_string()))
}

fn with_boundaries(text: &str) -> String {
    let escaped = regex::escape(text);
    let starts_word = text
        .chars()
        .next()
        .is_some_and(|c| c.is_alphanumeric() || c == '_');
    let ends_word = text
        .chars()
        .last()
        .is_some_and(|c| c.is_alphanumeric() || c == '_');
    format!(
        "{}{}{}",
        if starts_word { r"\b" } else { "" },
        escaped,
        if ends_word { r"\b" } else { "" }
    )
}

impl StepMatcher {
    pub fn is_match(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }

    pub fn find_spans(&self, text: &str) -> Vec<Range<usize>> {
        self.regex.find_iter(text).map(|m| m.range()).collect()
    }
}

/// What to do with an offered step.
#[derive(Debug, Clone, PartialEq)]
pub struct Offer<T> {
    /// Payloads to emit now (context lines first).
    pub emit: Vec<T>,
    /// Evaluation should stop after this step.
    pub stop: bool,
}

enum Gate {
    Open,
    Closed,
    Done,
}

/// The stateful search pipeline over a step stream: an after/until
/// window, the match filter with inversion, result limits, and context
/// lines. Holds per-stream state; confine to one consumer.
pub struct TraceFilter {
    pattern: Option<StepMatcher>,
    invert: bool,
    after: Option<(StepMatcher, bool, bool)>, // matcher, any-step, invert
    until: Option<(StepMatcher, bool, bool)>,
    upto: usize,
    limit: Option<usize>,
    stop: bool,
    repeat: bool,
    pub highlight: bool,
    gate: Gate,
    results: usize,
    context: VecDeque<Box<dyn FnOnce() -> String>>,
}

impl TraceFilter {
    pub fn new(spec: &SearchSpec) -> Result<TraceFilter, SearchSyntaxError> {
        let pattern = match &spec.pattern {
            Some(_) => Some(compile_search(spec)?),
            None => None,
        };
        let window = |pat: &Option<String>, pat_any: &Option<String>, invert: bool| {
            let (text, any) = match (pat, pat_any) {
                (Some(p), _) => (Some(p.clone()), false),
                (None, Some(p)) => (Some(p.clone()), true),
                (None, None) => (None, false),
            };
            text.map(|t| {
                compile_pattern(&t, spec.no_parens, spec.regexp_mode)
                    .map(|m| (m, any, invert))
            })
            .transpose()
        };
        let after = window(&spec.after, &spec.after_any, spec.invert_after)?;
        let until = window(&spec.until, &spec.until_any, spec.invert_until)?;
        let gate = if after.is_some() {
            Gate::Closed
        } else {
            Gate::Open
        };
        Ok(TraceFilter {
            pattern,
            invert: spec.invert,
            after,
            until,
            upto: spec.upto.unwrap_or(0),
            limit: spec.limit_n,
            stop: spec.stop,
            repeat: spec.repeat,
            highlight: spec.highlight,
            gate,
            results: 0,
            context: VecDeque::new(),
        })
    }

    /// An identity filter: every elision-shown step passes through.
    pub fn identity() -> TraceFilter {
        TraceFilter::new(&SearchSpec::default()).unwrap()
    }

    pub fn pattern_spans(&self, text: &str) -> Vec<Range<usize>> {
        match &self.pattern {
            Some(m) => m.find_spans(text),
            None => Vec::new(),
        }
    }

    /// Offers one step: its plain text, whether elision shows it, and a
    /// thunk producing the formatted output. Returns what to emit and
    /// whether evaluation should halt.
    pub fn offer(
        &mut self,
        plain: &str,
        shown: bool,
        payload: Box<dyn FnOnce() -> String>,
    ) -> Offer<String> {
        let mut emit = Vec::new();
        let mut halt = false;

        if let Gate::Closed = self.gate {
            if let Some((m, any, invert)) = &self.after {
                let consult = *any || shown;
                if consult && (m.is_match(plain) ^ invert) {
                    self.gate = Gate::Open;
                }
            }
        }

        if let Gate::Open = self.gate {
            if shown {
                let is_hit = match &self.pattern {
                    Some(m) => m.is_match(plain) ^ self.invert,
                    None => !self.invert,
                };
                let within_limit = self.limit.is_none_or(|n| self.results < n);
                if is_hit && within_limit {
                    while let Some(ctx) = self.context.pop_front() {
                        emit.push(ctx());
                    }
                    emit.push(payload());
                    self.results += 1;
                    if self.limit == Some(self.results) && self.stop {
                        halt = true;
                    }
                } else if self.upto > 0 {
                    self.context.push_back(payload);
                    while self.context.len() > self.upto {
                        self.context.pop_front();
                    }
                }
            }
            if let Some((m, any, invert)) = &self.until {
                let consult = *any || shown;
                if consult && (m.is_match(plain) ^ invert) {
                    if self.repeat {
                        self.gate = Gate::Closed;
                        if self.after.is_none() {
                            // no after condition to reopen it
                            self.gate = Gate::Done;
                        }
                    } else {
                        self.gate = Gate::Done;
                    }
                    if matches!(self.gate, Gate::Done) && self.stop {
                        halt = true;
                    }
                }
            }
        }

        Offer { emit, stop: halt }
    }
}
