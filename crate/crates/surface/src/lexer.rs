//! Tokens of the surface language. Comments run from `--` to the end of the line.

use codata_core::decl::Span;

use crate::SurfaceError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    // keywords
    Data,
    Codata,
    Def,
    Codef,
    Let,
    Match,
    Comatch,
    As,
    Return,
    Absurd,
    Implicit,
    Type,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Semi,
    Dot,
    FatArrow,
    Arrow,
    ColonEq,
    Backslash,
    Underscore,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        let s = match self {
            Tok::Ident(n) => return format!("identifier `{n}`"),
            Tok::Int(n) => return format!("number `{n}`"),
            Tok::Data => "data",
            Tok::Codata => "codata",
            Tok::Def => "def",
            Tok::Codef => "codef",
            Tok::Let => "let",
            Tok::Match => "match",
            Tok::Comatch => "comatch",
            Tok::As => "as",
            Tok::Return => "return",
            Tok::Absurd => "absurd",
            Tok::Implicit => "implicit",
            Tok::Type => "Type",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Dot => ".",
            Tok::FatArrow => "=>",
            Tok::Arrow => "->",
            Tok::ColonEq => ":=",
            Tok::Backslash => "\\",
            Tok::Underscore => "_",
            Tok::Eof => return "end of input".to_string(),
        };
        format!("`{s}`")
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "data" => Tok::Data,
        "codata" => Tok::Codata,
        "def" => Tok::Def,
        "codef" => Tok::Codef,
        "let" => Tok::Let,
        "match" => Tok::Match,
        "comatch" => Tok::Comatch,
        "as" => Tok::As,
        "return" => Tok::Return,
        "absurd" => Tok::Absurd,
        "implicit" => Tok::Implicit,
        "Type" => Tok::Type,
        "_" => Tok::Underscore,
        _ => return None,
    })
}

fn ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(file: u32, src: &str) -> Result<Vec<Token>, SurfaceError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    let span = |start: usize, end: usize| Span { file, start: start as u32, end: end as u32 };
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '-' && src[i..].starts_with("--") {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        if ident_start(c) {
            let mut end = i;
            while let Some(&(j, c)) = chars.peek() {
                if !ident_continue(c) {
                    break;
                }
                end = j + c.len_utf8();
                chars.next();
            }
            let word = &src[i..end];
            let tok = keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string()));
            out.push(Token { tok, span: span(i, end) });
            continue;
        }
        if c.is_ascii_digit() {
            let mut end = i;
            while let Some(&(j, c)) = chars.peek() {
                if !c.is_ascii_digit() {
                    break;
                }
                end = j + 1;
                chars.next();
            }
            let n: u64 = src[i..end]
                .parse()
                .map_err(|_| SurfaceError::new("parse.number", span(i, end), "number literal too large"))?;
            out.push(Token { tok: Tok::Int(n), span: span(i, end) });
            continue;
        }
        chars.next();
        let two = |chars: &mut std::iter::Peekable<std::str::CharIndices>, next: char| {
            if chars.peek().map(|&(_, c)| c) == Some(next) {
                chars.next();
                true
            } else {
                false
            }
        };
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            ',' => (Tok::Comma, 1),
            ';' => (Tok::Semi, 1),
            '.' => (Tok::Dot, 1),
            '\\' => (Tok::Backslash, 1),
            ':' if two(&mut chars, '=') => (Tok::ColonEq, 2),
            ':' => (Tok::Colon, 1),
            '=' if two(&mut chars, '>') => (Tok::FatArrow, 2),
            '-' if two(&mut chars, '>') => (Tok::Arrow, 2),
            _ => {
                return Err(SurfaceError::new(
                    "parse.char",
                    span(i, i + c.len_utf8()),
                    format!("unexpected character `{c}`"),
                ))
            }
        };
        out.push(Token { tok, span: span(i, i + len) });
    }
    out.push(Token { tok: Tok::Eof, span: span(src.len(), src.len()) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(0, s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn keywords_and_punctuation() {
        assert_eq!(
            toks("data Bool { T, F } -- trailing comment"),
            vec![
                Tok::Data,
                Tok::Ident("Bool".into()),
                Tok::LBrace,
                Tok::Ident("T".into()),
                Tok::Comma,
                Tok::Ident("F".into()),
                Tok::RBrace,
                Tok::Eof
            ]
        );
        assert_eq!(toks("a:=b => -> : _ x'"), vec![
            Tok::Ident("a".into()),
            Tok::ColonEq,
            Tok::Ident("b".into()),
            Tok::FatArrow,
            Tok::Arrow,
            Tok::Colon,
            Tok::Underscore,
            Tok::Ident("x'".into()),
            Tok::Eof
        ]);
    }

    #[test]
    fn spans_are_byte_offsets() {
        let t = lex(3, "  foo 12").unwrap();
        assert_eq!(t[0].span, Span { file: 3, start: 2, end: 5 });
        assert_eq!(t[1].tok, Tok::Int(12));
    }

    #[test]
    fn stray_character_is_an_error() {
        assert!(lex(0, "a # b").is_err());
    }
}
