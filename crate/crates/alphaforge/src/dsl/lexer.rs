use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character of the lexeme.
    pub offset: usize,
    /// The source slice the token was produced from.
    pub lexeme: String,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'(' | b')' | b',' | b'+' | b'-' | b'*' | b'/' => {
                let kind = match b {
                    b'(' => TokenKind::LParen,
                    b')' => TokenKind::RParen,
                    b',' => TokenKind::Comma,
                    b'+' => TokenKind::Plus,
                    b'-' => TokenKind::Minus,
                    b'*' => TokenKind::Star,
                    _ => TokenKind::Slash,
                };
                tokens.push(Token { kind, offset: i, lexeme: (b as char).to_string() });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                let mut saw_dot = false;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit() || (bytes[i] == b'.' && !saw_dot))
                {
                    if bytes[i] == b'.' {
                        saw_dot = true;
                    }
                    i += 1;
                }
                // Exponent suffix, e.g. 1e-7 (produced by the canonical printer
                // only for extreme magnitudes, but accepted on input).
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        saw_dot = true; // exponent forms are always floats
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lexeme = &text[start..i];
                let kind = if saw_dot {
                    TokenKind::Float(lexeme.parse().map_err(|_| Error::Syntax {
                        offset: start,
                        message: format!("malformed number `{lexeme}`"),
                    })?)
                } else {
                    TokenKind::Int(lexeme.parse().map_err(|_| Error::Syntax {
                        offset: start,
                        message: format!("malformed number `{lexeme}`"),
                    })?)
                };
                tokens.push(Token { kind, offset: start, lexeme: lexeme.to_string() });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let lexeme = &text[start..i];
                tokens.push(Token {
                    kind: TokenKind::Ident(lexeme.to_string()),
                    offset: start,
                    lexeme: lexeme.to_string(),
                });
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("illegal character `{}`", text[i..].chars().next().unwrap()),
                })
            }
        }
    }
    Ok(tokens)
}
