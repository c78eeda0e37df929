use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::QueryError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Num(f64),
    Kw(Kw),
    LParen,
    RParen,
    Comma,
    Star,
    Plus,
    Minus,
    Slash,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kw {
    Select,
    From,
    Where,
    Group,
    By,
    And,
    Or,
    Not,
    As,
    Null,
}

const KEYWORDS: [(&str, Kw); 10] = [
    ("SELECT", Kw::Select),
    ("FROM", Kw::From),
    ("WHERE", Kw::Where),
    ("GROUP", Kw::Group),
    ("BY", Kw::By),
    ("AND", Kw::And),
    ("OR", Kw::Or),
    ("NOT", Kw::Not),
    ("AS", Kw::As),
    ("NULL", Kw::Null),
];

/// Tokens paired with their byte offset in the source.
pub(crate) fn lex(src: &str) -> Result<Vec<(usize, Tok)>, QueryError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'*' => Tok::Star,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'/' => Tok::Slash,
            b'=' => Tok::Eq,
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 1;
                Tok::Ne
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 1;
                    Tok::Le
                }
                Some(b'>') => {
                    i += 1;
                    Tok::Ne
                }
                _ => Tok::Lt,
            },
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            b'0'..=b'9' | b'.' => {
                let end = number_end(bytes, i);
                let text = &src[i..end];
                let v: f64 = text.parse().map_err(|_| QueryError::Syntax {
                    pos: start,
                    message: alloc::format!("bad number `{text}`"),
                })?;
                i = end;
                out.push((start, Tok::Num(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = i;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                let word = &src[i..end];
                i = end;
                let tok = KEYWORDS
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case(word))
                    .map_or_else(|| Tok::Ident(word.to_string()), |(_, kw)| Tok::Kw(*kw));
                out.push((start, tok));
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(QueryError::Syntax {
                    pos: start,
                    message: alloc::format!("unexpected character `{ch}`"),
                });
            }
        };
        i += 1;
        out.push((start, tok));
    }
    out.push((src.len(), Tok::Eof));
    Ok(out)
}

fn number_end(b: &[u8], mut i: usize) -> usize {
    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
        i += 1;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            i = j;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}
