//! Tokenizer shared by the scenario and specification parsers.

use std::fmt;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(f64),
    Ident(String),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    NotEq,
    Arrow,
    Newline,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Assign => f.write_str("`=`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Ge => f.write_str("`>=`"),
            Tok::EqEq => f.write_str("`==`"),
            Tok::NotEq => f.write_str("`!=`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Newline => f.write_str("end of line"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

/// Splits `src` into tokens. `#` starts a comment running to end of line.
///
/// Newlines are emitted as tokens only when `newlines` is set; inside any
/// bracket pair they are always suppressed so that long distribution
/// literals may span several lines.
pub fn tokenize(src: &str, newlines: bool) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut line = 1;
    let mut col = 1;
    let mut chars = src.chars().peekable();

    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let ch = chars.next();
            col += 1;
            ch
        };
        match c {
            '\n' => {
                chars.next();
                if newlines && depth == 0 && !matches!(out.last(), Some(Token { tok: Tok::Newline, .. }) | None) {
                    out.push(Token { tok: Tok::Newline, pos });
                }
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                bump(&mut chars);
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
            }
            '0'..='9' | '.' => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    let exp_sign = (c == '-' || c == '+') && text.ends_with(['e', 'E']);
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                        text.push(c);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                let value: f64 = text.parse().map_err(|_| LexError {
                    pos,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push(Token { tok: Tok::Num(value), pos });
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        text.push(c);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                out.push(Token { tok: Tok::Ident(text), pos });
            }
            '"' => {
                bump(&mut chars);
                let mut text = String::new();
                loop {
                    match bump(&mut chars) {
                        Some('"') => break,
                        Some('\n') | None => {
                            return Err(LexError {
                                pos,
                                message: "unterminated string literal".into(),
                            })
                        }
                        Some(c) => text.push(c),
                    }
                }
                out.push(Token { tok: Tok::Str(text), pos });
            }
            _ => {
                bump(&mut chars);
                let next = chars.peek().copied();
                let (tok, two) = match (c, next) {
                    ('<', Some('=')) => (Tok::Le, true),
                    ('>', Some('=')) => (Tok::Ge, true),
                    ('=', Some('=')) => (Tok::EqEq, true),
                    ('!', Some('=')) => (Tok::NotEq, true),
                    ('-', Some('>')) => (Tok::Arrow, true),
                    ('<', _) => (Tok::Lt, false),
                    ('>', _) => (Tok::Gt, false),
                    ('=', _) => (Tok::Assign, false),
                    ('+', _) => (Tok::Plus, false),
                    ('-', _) => (Tok::Minus, false),
                    ('*', _) => (Tok::Star, false),
                    ('/', _) => (Tok::Slash, false),
                    (',', _) => (Tok::Comma, false),
                    (':', _) => (Tok::Colon, false),
                    ('(', _) => (Tok::LParen, false),
                    (')', _) => (Tok::RParen, false),
                    ('{', _) => (Tok::LBrace, false),
                    ('}', _) => (Tok::RBrace, false),
                    ('[', _) => (Tok::LBracket, false),
                    (']', _) => (Tok::RBracket, false),
                    _ => {
                        return Err(LexError {
                            pos,
                            message: format!("unexpected character `{c}`"),
                        })
                    }
                };
                if two {
                    bump(&mut chars);
                }
                match tok {
                    Tok::LParen | Tok::LBrace | Tok::LBracket => depth += 1,
                    Tok::RParen | Tok::RBrace | Tok::RBracket => depth = depth.saturating_sub(1),
                    _ => {}
                }
                out.push(Token { tok, pos });
            }
        }
    }
    if newlines && !matches!(out.last(), Some(Token { tok: Tok::Newline, .. }) | None) {
        out.push(Token { tok: Tok::Newline, pos: Pos { line, col } });
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}

/// Cursor over a token vector with the usual peek/expect helpers.
pub struct Cursor {
    toks: Vec<Token>,
    at: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Self { toks, at: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    pub fn mark(&self) -> usize {
        self.at
    }

    pub fn reset(&mut self, mark: usize) {
        self.at = mark;
    }

    pub fn next(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }
}
