use std::fmt;

use super::QueryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Select,
    From,
    Where,
    Group,
    By,
    Order,
    Asc,
    Desc,
    Limit,
    And,
    Or,
    Not,
    As,
    Xmatch,
    With,
}

impl Keyword {
    fn lookup(word: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match word.to_ascii_uppercase().as_str() {
            "SELECT" => Select,
            "FROM" => From,
            "WHERE" => Where,
            "GROUP" => Group,
            "BY" => By,
            "ORDER" => Order,
            "ASC" => Asc,
            "DESC" => Desc,
            "LIMIT" => Limit,
            "AND" => And,
            "OR" => Or,
            "NOT" => Not,
            "AS" => As,
            "XMATCH" => Xmatch,
            "WITH" => With,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        use Keyword::*;
        match self {
            Select => "SELECT",
            From => "FROM",
            Where => "WHERE",
            Group => "GROUP",
            By => "BY",
            Order => "ORDER",
            Asc => "ASC",
            Desc => "DESC",
            Limit => "LIMIT",
            And => "AND",
            Or => "OR",
            Not => "NOT",
            As => "AS",
            Xmatch => "XMATCH",
            With => "WITH",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Slash,
    Eq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => f.write_str(k.as_str()),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Int(i) => write!(f, "integer {i}"),
            TokenKind::Float(x) => write!(f, "number {x:?}"),
            TokenKind::Str(s) => write!(f, "string '{s}'"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Dot => f.write_str("`.`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Star => f.write_str("`*`"),
            TokenKind::Plus => f.write_str("`+`"),
            TokenKind::Minus => f.write_str("`-`"),
            TokenKind::Slash => f.write_str("`/`"),
            TokenKind::Eq => f.write_str("`=`"),
            TokenKind::NotEq => f.write_str("`!=`"),
            TokenKind::Lt => f.write_str("`<`"),
            TokenKind::Le => f.write_str("`<=`"),
            TokenKind::Gt => f.write_str("`>`"),
            TokenKind::Ge => f.write_str("`>=`"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character.
    pub offset: usize,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, QueryError> {
    if text.len() > super::MAX_QUERY_BYTES {
        return Err(QueryError::TooLarge {
            size: text.len(),
            limit: super::MAX_QUERY_BYTES,
        });
    }
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let lex_err = |offset: usize, message: String| QueryError::Lex { offset, message };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = |kind: TokenKind| Token {
            kind,
            offset: start,
        };
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b',' => tokens.push(single(TokenKind::Comma)),
            b'(' => tokens.push(single(TokenKind::LParen)),
            b')' => tokens.push(single(TokenKind::RParen)),
            b'*' => tokens.push(single(TokenKind::Star)),
            b'+' => tokens.push(single(TokenKind::Plus)),
            b'-' => tokens.push(single(TokenKind::Minus)),
            b'/' => tokens.push(single(TokenKind::Slash)),
            b'=' => tokens.push(single(TokenKind::Eq)),
            b'<' => {
                let kind = match bytes.get(i + 1) {
                    Some(b'=') => {
                        i += 1;
                        TokenKind::Le
                    }
                    Some(b'>') => {
                        i += 1;
                        TokenKind::NotEq
                    }
                    _ => TokenKind::Lt,
                };
                tokens.push(single(kind));
            }
            b'>' => {
                let kind = if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    TokenKind::Ge
                } else {
                    TokenKind::Gt
                };
                tokens.push(single(kind));
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 1;
                tokens.push(single(TokenKind::NotEq));
            }
            b'\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err(lex_err(start, "unterminated string literal".into())),
                        Some(b'\'') if bytes.get(i + 1) == Some(&b'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some(b'\'') => break,
                        Some(_) => {
                            let ch = text[i..].chars().next().expect("in bounds");
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                tokens.push(single(TokenKind::Str(s)));
            }
            b'0'..=b'9' | b'.' if c != b'.' || bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let mut end = i;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
                let mut is_float = false;
                if end < bytes.len() && bytes[end] == b'.' {
                    is_float = true;
                    end += 1;
                    while end < bytes.len() && bytes[end].is_ascii_digit() {
                        end += 1;
                    }
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut exp = end + 1;
                    if exp < bytes.len() && (bytes[exp] == b'+' || bytes[exp] == b'-') {
                        exp += 1;
                    }
                    if exp < bytes.len() && bytes[exp].is_ascii_digit() {
                        while exp < bytes.len() && bytes[exp].is_ascii_digit() {
                            exp += 1;
                        }
                        is_float = true;
                        end = exp;
                    }
                }
                let lit = &text[i..end];
                let kind = if is_float {
                    let x: f64 = lit
                        .parse()
                        .map_err(|_| lex_err(start, format!("invalid number {lit}")))?;
                    if !x.is_finite() {
                        return Err(lex_err(start, format!("number out of range: {lit}")));
                    }
                    TokenKind::Float(x)
                } else {
                    TokenKind::Int(
                        lit.parse()
                            .map_err(|_| lex_err(start, format!("integer out of range: {lit}")))?,
                    )
                };
                tokens.push(single(kind));
                i = end;
                continue;
            }
            b'.' => tokens.push(single(TokenKind::Dot)),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = i;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                let word = &text[i..end];
                let kind = match Keyword::lookup(word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(word.to_owned()),
                };
                tokens.push(single(kind));
                i = end;
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().expect("in bounds");
                return Err(lex_err(start, format!("illegal character {ch:?}")));
            }
        }
        i += 1;
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        offset: text.len(),
    });
    Ok(tokens)
}
