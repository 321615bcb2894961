use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    /// Decimal literal text, kept verbatim for exact parsing.
    Number(String),
    /// Duration literal normalized to whole seconds.
    Duration(u64),
    Bring,
    Let,
    New,
    Inflight,
    If,
    Else,
    Return,
    True,
    False,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Arrow,
    Eq,
    Question,
    Minus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "identifier `{name}`"),
            Tok::Str(_) => "string literal",
            Tok::Number(n) => return write!(f, "number `{n}`"),
            Tok::Duration(_) => "duration literal",
            Tok::Bring => "`bring`",
            Tok::Let => "`let`",
            Tok::New => "`new`",
            Tok::Inflight => "`inflight`",
            Tok::If => "`if`",
            Tok::Else => "`else`",
            Tok::Return => "`return`",
            Tok::True => "`true`",
            Tok::False => "`false`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Comma => "`,`",
            Tok::Semi => "`;`",
            Tok::Colon => "`:`",
            Tok::Dot => "`.`",
            Tok::Arrow => "`=>`",
            Tok::Eq => "`=`",
            Tok::Question => "`?`",
            Tok::Minus => "`-`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

/// Raw lexer failure; converted to a `ParseError` with positions by the caller.
#[derive(Debug)]
pub struct LexError {
    pub start: usize,
    pub end: usize,
    pub expected: String,
    pub found: String,
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError::raw(e.start, e.end, e.expected, e.found)
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let close = text[i + 2..].find("*/").ok_or(LexError {
                start: i,
                end: text.len(),
                expected: "`*/`".into(),
                found: "end of input".into(),
            })?;
            i += close + 4;
            continue;
        }
        let start = i;
        let tok = match b {
            b'(' => single(&mut i, Tok::LParen),
            b')' => single(&mut i, Tok::RParen),
            b'{' => single(&mut i, Tok::LBrace),
            b'}' => single(&mut i, Tok::RBrace),
            b'[' => single(&mut i, Tok::LBracket),
            b']' => single(&mut i, Tok::RBracket),
            b',' => single(&mut i, Tok::Comma),
            b';' => single(&mut i, Tok::Semi),
            b':' => single(&mut i, Tok::Colon),
            b'.' => single(&mut i, Tok::Dot),
            b'?' => single(&mut i, Tok::Question),
            b'-' => single(&mut i, Tok::Minus),
            b'=' if bytes.get(i + 1) == Some(&b'>') => {
                i += 2;
                Tok::Arrow
            }
            b'=' => single(&mut i, Tok::Eq),
            b'"' => lex_string(text, &mut i)?,
            b'0'..=b'9' => lex_number(text, &mut i)?,
            b if b.is_ascii_alphabetic() || b == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                keyword_or_ident(&text[start..i])
            }
            _ => {
                let c = text[i..].chars().next().unwrap_or('\u{FFFD}');
                return Err(LexError {
                    start: i,
                    end: i + c.len_utf8(),
                    expected: "a token".into(),
                    found: format!("character `{c}`"),
                });
            }
        };
        tokens.push(Token { tok, start, end: i });
    }
    tokens.push(Token { tok: Tok::Eof, start: text.len(), end: text.len() });
    Ok(tokens)
}

fn single(i: &mut usize, tok: Tok) -> Tok {
    *i += 1;
    tok
}

fn keyword_or_ident(word: &str) -> Tok {
    match word {
        "bring" => Tok::Bring,
        "let" => Tok::Let,
        "new" => Tok::New,
        "inflight" => Tok::Inflight,
        "if" => Tok::If,
        "else" => Tok::Else,
        "return" => Tok::Return,
        "true" => Tok::True,
        "false" => Tok::False,
        _ => Tok::Ident(word.to_string()),
    }
}

fn lex_string(text: &str, i: &mut usize) -> Result<Tok, LexError> {
    let start = *i;
    let mut out = String::new();
    let mut chars = text[start + 1..].char_indices();
    while let Some((off, c)) = chars.next() {
        match c {
            '"' => {
                *i = start + 1 + off + 1;
                return Ok(Tok::Str(out));
            }
            '\\' => {
                let Some((eoff, esc)) = chars.next() else { break };
                let replacement = match esc {
                    'n' => '\n',
                    't' => '\t',
                    'r' => '\r',
                    '"' => '"',
                    '\\' => '\\',
                    '{' => '{',
                    '}' => '}',
                    other => {
                        let at = start + 1 + eoff;
                        return Err(LexError {
                            start: at - 1,
                            end: at + other.len_utf8(),
                            expected: "a valid escape sequence".into(),
                            found: format!("`\\{other}`"),
                        });
                    }
                };
                out.push(replacement);
            }
            c => out.push(c),
        }
    }
    Err(LexError {
        start,
        end: text.len(),
        expected: "closing `\"`".into(),
        found: "end of input".into(),
    })
}

fn lex_number(text: &str, i: &mut usize) -> Result<Tok, LexError> {
    let bytes = text.as_bytes();
    let start = *i;
    while *i < bytes.len() && bytes[*i].is_ascii_digit() {
        *i += 1;
    }
    if *i + 1 < bytes.len() && bytes[*i] == b'.' && bytes[*i + 1].is_ascii_digit() {
        *i += 1;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
    }
    let number_end = *i;
    let suffix_end = {
        let mut j = *i;
        while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
            j += 1;
        }
        j
    };
    let digits = &text[start..number_end];
    if suffix_end == number_end {
        return Ok(Tok::Number(digits.to_string()));
    }
    let suffix = &text[number_end..suffix_end];
    let factor: u64 = match suffix {
        "s" => 1,
        "m" => 60,
        "h" => 3600,
        "d" => 86_400,
        _ => {
            return Err(LexError {
                start,
                end: suffix_end,
                expected: "a duration unit (s, m, h, d)".into(),
                found: format!("`{}`", &text[start..suffix_end]),
            })
        }
    };
    *i = suffix_end;
    let value = crate::num::parse_decimal(digits)
        .map(|v| v * crate::num::int(factor as i64))
        .filter(|v| v.is_integer())
        .and_then(|v| num_traits::ToPrimitive::to_u64(&v.to_integer()));
    match value {
        Some(secs) => Ok(Tok::Duration(secs)),
        None => Err(LexError {
            start,
            end: suffix_end,
            expected: "a duration of whole seconds".into(),
            found: format!("`{}`", &text[start..suffix_end]),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn durations_normalize_to_seconds() {
        assert_eq!(toks("2m 1s 1.5m 1h"), vec![
            Tok::Duration(120),
            Tok::Duration(1),
            Tok::Duration(90),
            Tok::Duration(3600),
            Tok::Eof
        ]);
    }

    #[test]
    fn fractional_seconds_are_rejected() {
        assert!(tokenize("1.5s").is_err());
        assert!(tokenize("500ms").is_err());
    }

    #[test]
    fn comments_and_strings() {
        assert_eq!(toks("// hi\n\"a\\\"b\" /* x */ =>"), vec![
            Tok::Str("a\"b".into()),
            Tok::Arrow,
            Tok::Eof
        ]);
        assert!(tokenize("\"open").is_err());
        assert!(tokenize("/* open").is_err());
    }
}
