use num_bigint::BigInt;

use super::{GrammarError, GrammarErrorKind, Span};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(BigInt),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest first so that `::=` wins over `:` and `==` over `=`.
const PUNCTS: &[&str] = &[
    "::=", "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", "[", "]", ";", ":", ",", ".", "=",
    "<", ">", "+", "-", "*", "/", "!", "|",
];

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, GrammarError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    let span = |l: u32, c: u32, el: u32, ec: u32| Span { line: l, col: c, end_line: el, end_col: ec };

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token { tok: Tok::Ident(s), span: span(start_line, start_col, line, col) });
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            let n: BigInt = s.parse().expect("digits");
            out.push(Token { tok: Tok::Int(n), span: span(start_line, start_col, line, col) });
        } else if c == '"' {
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(GrammarError::new(
                            GrammarErrorKind::Syntax("unterminated string literal".into()),
                            span(start_line, start_col, line, col),
                        ))
                    }
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => {
                                return Err(GrammarError::new(
                                    GrammarErrorKind::Syntax("bad escape in string literal".into()),
                                    span(line, col, line, col + 2),
                                ))
                            }
                        };
                        s.push(esc);
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), span: span(start_line, start_col, line, col) });
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) else {
                return Err(GrammarError::new(
                    GrammarErrorKind::Syntax(format!("unexpected character {c:?}")),
                    span(line, col, line, col + 1),
                ));
            };
            let n = p.chars().count();
            i += n;
            col += n as u32;
            out.push(Token { tok: Tok::Punct(p), span: span(start_line, start_col, line, col) });
        }
    }
    out.push(Token { tok: Tok::Eof, span: span(line, col, line, col) });
    Ok(out)
}
