//! Lexer for MiniML source text. `--` starts a comment running to the
//! end of the line.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Int(i64),
    Ident(String),
    UIdent(String),
    Str(String),
    Char(char),
    Keyword(&'static str),
    // operators and punctuation, by spelling
    Op(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Int(i) => write!(f, "{i}"),
            TokenKind::Ident(s) | TokenKind::UIdent(s) => write!(f, "{s}"),
            TokenKind::Str(s) => write!(f, "{s:?}"),
            TokenKind::Char(c) => write!(f, "'{c}'"),
            TokenKind::Keyword(k) => write!(f, "{k}"),
            TokenKind::Op(o) => write!(f, "{o}"),
            TokenKind::Eof => write!(f, "<end of input>"),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "let", "rec", "in", "if", "then", "else", "fun", "function", "match", "with", "try", "raise",
    "for", "to", "downto", "do", "done", "while", "begin", "end", "and", "when", "as", "true",
    "false", "exception", "constr", "of", "not",
];

pub struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
    prev_ends_operand: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
            prev_ends_operand: false,
        }
    }

    pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
        let mut lx = Lexer::new(src);
        let mut out = Vec::new();
        loop {
            let t = lx.next_token()?;
            let end = t.kind == TokenKind::Eof;
            out.push(t);
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(b' ') | Some(b'\t') | Some(b'\r') | Some(b'\n') => {
                    self.bump();
                }
                Some(b'-') if self.peek2() == Some(b'-') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn error(&self, message: impl Into<String>) -> LexError {
        LexError {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    pub fn next_token(&mut self) -> Result<Token, LexError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let mk = |kind, ends_operand: bool, lx: &mut Self| {
            lx.prev_ends_operand = ends_operand;
            Ok(Token { kind, line, col })
        };
        let c = match self.peek() {
            None => return mk(TokenKind::Eof, false, self),
            Some(c) => c,
        };
        match c {
            b'0'..=b'9' => {
                let n = self.lex_int()?;
                mk(TokenKind::Int(n), true, self)
            }
            // a minus directly before digits starts a negative literal,
            // unless the previous token could end an operand
            b'-' if !self.prev_ends_operand
                && self.peek2().map(|d| d.is_ascii_digit()) == Some(true) =>
            {
                self.bump();
                let n = self.lex_int()?;
                mk(TokenKind::Int(-n), true, self)
            }
            b'a'..=b'z' | b'_' | b'A'..=b'Z' => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == b'_' || c == b'\'' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let word = std::str::from_utf8(&self.src[start..self.pos])
                    .map_err(|_| self.error("invalid UTF-8 in identifier"))?
                    .to_string();
                if word == "_" {
                    mk(TokenKind::Op("_"), true, self)
                } else if let Some(kw) = KEYWORDS.iter().find(|k| **k == word) {
                    let ends = matches!(*kw, "true" | "false" | "end" | "done");
                    mk(TokenKind::Keyword(kw), ends, self)
                } else if word.as_bytes()[0].is_ascii_uppercase() {
                    mk(TokenKind::UIdent(word), true, self)
                } else {
                    mk(TokenKind::Ident(word), true, self)
                }
            }
            b'"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.error("unterminated string literal")),
                        Some(b'"') => break,
                        Some(b'\\') => s.push(self.lex_escape()?),
                        Some(c) => {
                            // re-assemble multi-byte UTF-8 sequences
                            if c < 0x80 {
                                s.push(c as char);
                            } else {
                                s.push(self.lex_utf8_tail(c)?);
                            }
                        }
                    }
                }
                mk(TokenKind::Str(s), true, self)
            }
            b'\'' => {
                self.bump();
                let ch = match self.bump() {
                    None => return Err(self.error("unterminated character literal")),
                    Some(b'\\') => self.lex_escape()?,
                    Some(c) if c < 0x80 => c as char,
                    Some(c) => self.lex_utf8_tail(c)?,
                };
                match self.bump() {
                    Some(b'\'') => {}
                    _ => return Err(self.error("unterminated character literal")),
                }
                mk(TokenKind::Char(ch), true, self)
            }
            _ => {
                let two: Option<&[u8]> = self.src.get(self.pos..self.pos + 2);
                let op2 = match two {
                    Some(b"&&") => Some("&&"),
                    Some(b"||") => Some("||"),
                    Some(b"<=") => Some("<="),
                    Some(b">=") => Some(">="),
                    Some(b"<>") => Some("<>"),
                    Some(b"::") => Some("::"),
                    Some(b":=") => Some(":="),
                    Some(b"->") => Some("->"),
                    Some(b"<-") => Some("<-"),
                    Some(b"..") => Some(".."),
                    _ => None,
                };
                if let Some(op) = op2 {
                    self.bump();
                    self.bump();
                    return mk(TokenKind::Op(op), false, self);
                }
                let op1 = match c {
                    b'+' => "+",
                    b'-' => "-",
                    b'*' => "*",
                    b'/' => "/",
                    b'=' => "=",
                    b'<' => "<",
                    b'>' => ">",
                    b'(' => "(",
                    b')' => ")",
                    b'[' => "[",
                    b']' => "]",
                    b'{' => "{",
                    b'}' => "}",
                    b';' => ";",
                    b',' => ",",
                    b'.' => ".",
                    b'|' => "|",
                    b'!' => "!",
                    b'@' => "@",
                    _ => return Err(self.error(format!("unexpected character '{}'", c as char))),
                };
                self.bump();
                let ends = matches!(op1, ")" | "]" | "}");
                mk(TokenKind::Op(op1), ends, self)
            }
        }
    }

    fn lex_int(&mut self) -> Result<i64, LexError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        let text: String = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .chars()
            .filter(|c| *c != '_')
            .collect();
        // machine integers with wraparound: overflow wraps
        text.parse::<i64>()
            .or_else(|_| text.parse::<u64>().map(|u| u as i64))
            .map_err(|_| self.error("integer literal out of range"))
    }

    fn lex_escape(&mut self) -> Result<char, LexError> {
        match self.bump() {
            Some(b'n') => Ok('\n'),
            Some(b't') => Ok('\t'),
            Some(b'r') => Ok('\r'),
            Some(b'\\') => Ok('\\'),
            Some(b'"') => Ok('"'),
            Some(b'\'') => Ok('\''),
            Some(b'0') => Ok('\0'),
            _ => Err(self.error("unknown escape sequence")),
        }
    }

    fn lex_utf8_tail(&mut self, first: u8) -> Result<char, LexError> {
        let need = if first >= 0xF0 {
            3
        } else if first >= 0xE0 {
            2
        } else {
            1
        };
        let mut buf = vec![first];
        for _ in 0..need {
            match self.bump() {
                Some(c) => buf.push(c),
                None => return Err(self.error("truncated UTF-8 sequence")),
            }
        }
        std::str::from_utf8(&buf)
            .ok()
            .and_then(|s| s.chars().next())
            .ok_or_else(|| self.error("invalid UTF-8 sequence"))
    }
}
