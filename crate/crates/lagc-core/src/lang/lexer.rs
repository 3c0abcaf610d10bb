//! Hand-rolled lexer for the unified surface language.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Tok {
    Ident(String),
    Int(i64),
    // keywords
    Skip,
    If,
    Fi,
    Else,
    While,
    Do,
    Od,
    Co,
    Oc,
    Atomic,
    Input,
    Call,
    Send,
    Receive,
    Spawn,
    New,
    Await,
    Get,
    Return,
    Label,
    Goto,
    Break,
    Chan,
    Proctype,
    Class,
    Method,
    Main,
    This,
    True,
    False,
    // symbols
    Assign,    // :=
    ColonColon, // ::
    Colon,
    Semi,
    Comma,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Bar2, // ||
    Bang, // !
    Quest, // ?
    Plus,
    Minus,
    StarSym,
    Slash,
    EqEq,
    NotEq,
    Lt,
    Leq,
    Gt,
    Geq,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Eof => write!(f, "end of input"),
            other => {
                let s = match other {
                    Tok::Skip => "skip",
                    Tok::If => "if",
                    Tok::Fi => "fi",
                    Tok::Else => "else",
                    Tok::While => "while",
                    Tok::Do => "do",
                    Tok::Od => "od",
                    Tok::Co => "co",
                    Tok::Oc => "oc",
                    Tok::Atomic => "atomic",
                    Tok::Input => "input",
                    Tok::Call => "call",
                    Tok::Send => "send",
                    Tok::Receive => "receive",
                    Tok::Spawn => "spawn",
                    Tok::New => "new",
                    Tok::Await => "await",
                    Tok::Get => "get",
                    Tok::Return => "return",
                    Tok::Label => "label",
                    Tok::Goto => "goto",
                    Tok::Break => "break",
                    Tok::Chan => "chan",
                    Tok::Proctype => "proctype",
                    Tok::Class => "class",
                    Tok::Method => "method",
                    Tok::Main => "main",
                    Tok::This => "this",
                    Tok::True => "tt",
                    Tok::False => "ff",
                    Tok::Assign => ":=",
                    Tok::ColonColon => "::",
                    Tok::Colon => ":",
                    Tok::Semi => ";",
                    Tok::Comma => ",",
                    Tok::Dot => ".",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::Bar2 => "||",
                    Tok::Bang => "!",
                    Tok::Quest => "?",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::StarSym => "*",
                    Tok::Slash => "/",
                    Tok::EqEq => "==",
                    Tok::NotEq => "!=",
                    Tok::Lt => "<",
                    Tok::Leq => "<=",
                    Tok::Gt => ">",
                    Tok::Geq => ">=",
                    _ => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

/// A token paired with its source position (1-based line and column).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LexError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "skip" => Tok::Skip,
        "if" => Tok::If,
        "fi" => Tok::Fi,
        "else" => Tok::Else,
        "while" => Tok::While,
        "do" => Tok::Do,
        "od" => Tok::Od,
        "co" => Tok::Co,
        "oc" => Tok::Oc,
        "atomic" => Tok::Atomic,
        "input" => Tok::Input,
        "call" => Tok::Call,
        "send" => Tok::Send,
        "receive" => Tok::Receive,
        "spawn" => Tok::Spawn,
        "new" => Tok::New,
        "await" => Tok::Await,
        "get" => Tok::Get,
        "return" => Tok::Return,
        "label" => Tok::Label,
        "goto" => Tok::Goto,
        "break" => Tok::Break,
        "chan" => Tok::Chan,
        "proctype" => Tok::Proctype,
        "class" => Tok::Class,
        "method" => Tok::Method,
        "main" => Tok::Main,
        "this" => Tok::This,
        "tt" => Tok::True,
        "ff" => Tok::False,
        _ => return None,
    })
}

/// Lex a source text. Comments run from `//` to end of line.
pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    macro_rules! push {
        ($tok:expr, $len:expr, $l:expr, $c:expr) => {{
            out.push(Token {
                tok: $tok,
                line: $l,
                col: $c,
            });
            i += $len;
            col += $len as u32;
        }};
    }
    while i < bytes.len() {
        let c = bytes[i] as char;
        let (l0, c0) = (line, col);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text = &src[start..i];
                let n: i64 = text.parse().map_err(|_| LexError {
                    line: l0,
                    col: c0,
                    msg: alloc::format!("integer literal `{text}` out of range"),
                })?;
                col += (i - start) as u32;
                out.push(Token {
                    tok: Tok::Int(n),
                    line: l0,
                    col: c0,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'')
                {
                    i += 1;
                }
                let text = &src[start..i];
                col += (i - start) as u32;
                let tok = keyword(text).unwrap_or_else(|| Tok::Ident(String::from(text)));
                out.push(Token {
                    tok,
                    line: l0,
                    col: c0,
                });
            }
            ':' => match bytes.get(i + 1) {
                Some(b'=') => push!(Tok::Assign, 2, l0, c0),
                Some(b':') => push!(Tok::ColonColon, 2, l0, c0),
                _ => push!(Tok::Colon, 1, l0, c0),
            },
            ';' => push!(Tok::Semi, 1, l0, c0),
            ',' => push!(Tok::Comma, 1, l0, c0),
            '.' => push!(Tok::Dot, 1, l0, c0),
            '(' => push!(Tok::LParen, 1, l0, c0),
            ')' => push!(Tok::RParen, 1, l0, c0),
            '{' => push!(Tok::LBrace, 1, l0, c0),
            '}' => push!(Tok::RBrace, 1, l0, c0),
            '|' if bytes.get(i + 1) == Some(&b'|') => push!(Tok::Bar2, 2, l0, c0),
            '!' => match bytes.get(i + 1) {
                Some(b'=') => push!(Tok::NotEq, 2, l0, c0),
                _ => push!(Tok::Bang, 1, l0, c0),
            },
            '?' => push!(Tok::Quest, 1, l0, c0),
            '+' => push!(Tok::Plus, 1, l0, c0),
            '-' => push!(Tok::Minus, 1, l0, c0),
            '*' => push!(Tok::StarSym, 1, l0, c0),
            '/' => push!(Tok::Slash, 1, l0, c0),
            '=' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::EqEq, 2, l0, c0),
            '<' => match bytes.get(i + 1) {
                Some(b'=') => push!(Tok::Leq, 2, l0, c0),
                _ => push!(Tok::Lt, 1, l0, c0),
            },
            '>' => match bytes.get(i + 1) {
                Some(b'=') => push!(Tok::Geq, 2, l0, c0),
                _ => push!(Tok::Gt, 1, l0, c0),
            },
            other => {
                return Err(LexError {
                    line: l0,
                    col: c0,
                    msg: alloc::format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_statements_and_tracks_positions() {
        let toks = lex("x := 1;\ny := x + 1 // trailing\n").unwrap();
        let kinds: Vec<&Tok> = toks.iter().map(|t| &t.tok).collect();
        assert_eq!(
            kinds,
            alloc::vec![
                &Tok::Ident(String::from("x")),
                &Tok::Assign,
                &Tok::Int(1),
                &Tok::Semi,
                &Tok::Ident(String::from("y")),
                &Tok::Assign,
                &Tok::Ident(String::from("x")),
                &Tok::Plus,
                &Tok::Int(1),
                &Tok::Eof,
            ]
        );
        assert_eq!((toks[4].line, toks[4].col), (2, 1));
    }

    #[test]
    fn distinguishes_colon_forms() {
        let toks = lex(":: : :=").unwrap();
        assert_eq!(toks[0].tok, Tok::ColonColon);
        assert_eq!(toks[1].tok, Tok::Colon);
        assert_eq!(toks[2].tok, Tok::Assign);
    }

    #[test]
    fn rejects_stray_characters() {
        assert!(lex("x := @").is_err());
    }
}
