//! Tokenizer for system files, aspect files and bare process terms.
//! `--` starts a line comment; identifiers may contain `_` and `$`.

use std::fmt;

use thiserror::Error;

/// A syntax error with a position in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn at(src: &str, byte: usize, message: impl Into<String>) -> Self {
        let upto = &src[..byte.min(src.len())];
        let line = upto.bytes().filter(|b| *b == b'\n').count() + 1;
        let col = upto.len() - upto.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
        ParseError { line, col, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Let,
    In,
    Out,
    Read,
    Eval,
    Newloc,
    Case,
    Break,
    Proceed,
    Test,
    Exists,
    Forall,
    Set,
    Empty,
    Free,
}

impl Kw {
    fn of(word: &str) -> Option<Kw> {
        Some(match word {
            "let" => Kw::Let,
            "in" => Kw::In,
            "out" => Kw::Out,
            "read" => Kw::Read,
            "eval" => Kw::Eval,
            "newloc" => Kw::Newloc,
            "case" => Kw::Case,
            "break" => Kw::Break,
            "proceed" => Kw::Proceed,
            "test" => Kw::Test,
            "exists" => Kw::Exists,
            "forall" => Kw::Forall,
            "set" => Kw::Set,
            "empty" => Kw::Empty,
            "free" => Kw::Free,
            _ => return None,
        })
    }

    pub fn text(self) -> &'static str {
        match self {
            Kw::Let => "let",
            Kw::In => "in",
            Kw::Out => "out",
            Kw::Read => "read",
            Kw::Eval => "eval",
            Kw::Newloc => "newloc",
            Kw::Case => "case",
            Kw::Break => "break",
            Kw::Proceed => "proceed",
            Kw::Test => "test",
            Kw::Exists => "exists",
            Kw::Forall => "forall",
            Kw::Set => "set",
            Kw::Empty => "empty",
            Kw::Free => "free",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Kw(Kw),
    /// The symbolic set of all variables, `LVar*`.
    LVarStar,
    Zero,
    Bang,
    Underscore,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    LAngle,
    RAngle,
    Comma,
    Dot,
    At,
    ColonColon,
    Colon,
    Semi,
    Pipe,
    DPipe,
    Plus,
    Star,
    Eq,
    Amp,
    Tilde,
    AndOp,
    OrOp,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Kw(k) => write!(f, "`{}`", k.text()),
            Tok::LVarStar => f.write_str("`LVar*`"),
            Tok::Zero => f.write_str("`0`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Underscore => f.write_str("`_`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LAngle => f.write_str("`<`"),
            Tok::RAngle => f.write_str("`>`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::At => f.write_str("`@`"),
            Tok::ColonColon => f.write_str("`::`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::DPipe => f.write_str("`||`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Tilde => f.write_str("`~`"),
            Tok::AndOp => f.write_str("`/\\`"),
            Tok::OrOp => f.write_str("`\\/`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'A'..=b'Z' | b'a'..=b'z' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$')
                {
                    i += 1;
                }
                let word = &src[start..i];
                if word == "LVar" && bytes.get(i) == Some(&b'*') {
                    i += 1;
                    toks.push(Token { tok: Tok::LVarStar, start, end: i });
                } else {
                    let tok = Kw::of(word)
                        .map(Tok::Kw)
                        .unwrap_or_else(|| Tok::Ident(word.to_string()));
                    toks.push(Token { tok, start, end: i });
                }
            }
            b'0' if bytes.get(i + 1).is_none_or(|c| !c.is_ascii_alphanumeric()) => {
                toks.push(Token { tok: Tok::Zero, start: i, end: i + 1 });
                i += 1;
            }
            b'/' if bytes.get(i + 1) == Some(&b'\\') => {
                toks.push(Token { tok: Tok::AndOp, start: i, end: i + 2 });
                i += 2;
            }
            b'\\' if bytes.get(i + 1) == Some(&b'/') => {
                toks.push(Token { tok: Tok::OrOp, start: i, end: i + 2 });
                i += 2;
            }
            b':' if bytes.get(i + 1) == Some(&b':') => {
                toks.push(Token { tok: Tok::ColonColon, start: i, end: i + 2 });
                i += 2;
            }
            b'|' if bytes.get(i + 1) == Some(&b'|') => {
                toks.push(Token { tok: Tok::DPipe, start: i, end: i + 2 });
                i += 2;
            }
            _ => {
                let one = match b {
                    b'!' => Some(Tok::Bang),
                    b'_' => Some(Tok::Underscore),
                    b'(' => Some(Tok::LParen),
                    b')' => Some(Tok::RParen),
                    b'[' => Some(Tok::LBracket),
                    b']' => Some(Tok::RBracket),
                    b'{' => Some(Tok::LBrace),
                    b'}' => Some(Tok::RBrace),
                    b'<' => Some(Tok::LAngle),
                    b'>' => Some(Tok::RAngle),
                    b',' => Some(Tok::Comma),
                    b'.' => Some(Tok::Dot),
                    b'@' => Some(Tok::At),
                    b':' => Some(Tok::Colon),
                    b';' => Some(Tok::Semi),
                    b'|' => Some(Tok::Pipe),
                    b'+' => Some(Tok::Plus),
                    b'*' => Some(Tok::Star),
                    b'=' => Some(Tok::Eq),
                    b'&' => Some(Tok::Amp),
                    b'~' => Some(Tok::Tilde),
                    _ => None,
                };
                match one {
                    Some(tok) => {
                        toks.push(Token { tok, start: i, end: i + 1 });
                        i += 1;
                    }
                    None => {
                        return Err(ParseError::at(
                            src,
                            i,
                            format!("unexpected character `{}`", &src[i..i + utf8_len(b)]),
                        ))
                    }
                }
            }
        }
    }
    Ok(toks)
}

fn utf8_len(b: u8) -> usize {
    match b {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}
