use std::fmt;

use super::{Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Semi,
    Colon,
    Comma,
    Dot,
    At,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    /// `-`, also the opening dash of `-edge->`.
    Minus,
    /// `->`
    Arrow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Int(i) => return write!(f, "`{i}`"),
            Tok::Float(x) => return write!(f, "`{x}`"),
            Tok::Str(s) => return write!(f, "{s:?}"),
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::At => "@",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Minus => "-",
            Tok::Arrow => "->",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Eof => return f.write_str("end of file"),
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
    /// Span just past the token's last character.
    pub end: Span,
}

struct Cursor<'a> {
    file: &'a str,
    chars: Vec<(usize, char)>,
    i: usize,
    line: u32,
    col: u32,
    len: usize,
}

impl Cursor<'_> {
    fn span(&self) -> Span {
        Span {
            file: self.file.to_string(),
            line: self.line,
            col: self.col,
            offset: self.chars.get(self.i).map(|c| c.0).unwrap_or(self.len),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).map(|c| c.1)
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.i + 1).map(|c| c.1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

/// Splits source text into tokens; lexical errors are collected and the
/// offending characters skipped.
pub fn lex(text: &str, file: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor {
        file,
        chars: text.char_indices().collect(),
        i: 0,
        line: 1,
        col: 1,
        len: text.len(),
    };
    let mut out = Vec::new();
    let mut diags = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '/' && cur.peek2() == Some('/') {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
            } else {
                break;
            }
        }
        let span = cur.span();
        let Some(c) = cur.bump() else {
            out.push(Token {
                tok: Tok::Eof,
                end: span.clone(),
                span,
            });
            break;
        };
        let tok = match c {
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '@' => Tok::At,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '=' => {
                if cur.peek() == Some('=') {
                    cur.bump();
                }
                Tok::Eq
            }
            '-' if cur.peek() == Some('>') => {
                cur.bump();
                Tok::Arrow
            }
            '-' => Tok::Minus,
            '!' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Ne
            }
            '<' | '>' => {
                let eq = cur.peek() == Some('=');
                if eq {
                    cur.bump();
                }
                match (c, eq) {
                    ('<', false) => Tok::Lt,
                    ('<', true) => Tok::Le,
                    ('>', false) => Tok::Gt,
                    _ => Tok::Ge,
                }
            }
            '"' => {
                let mut s = String::new();
                let mut closed = false;
                while let Some(c) = cur.bump() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match cur.bump() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(c @ ('"' | '\\')) => s.push(c),
                            other => {
                                diags.push(Diagnostic::error(
                                    "syntax",
                                    format!("invalid escape `\\{}`", other.map(String::from).unwrap_or_default()),
                                    Some(span.clone()),
                                ));
                            }
                        },
                        '\n' => break,
                        c => s.push(c),
                    }
                }
                if !closed {
                    diags.push(Diagnostic::error(
                        "syntax",
                        "unterminated string literal",
                        Some(span.clone()),
                    ));
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() => {
                let mut s = String::from(c);
                let mut float = false;
                while let Some(d) = cur.peek() {
                    if d.is_ascii_digit() || d == '_' {
                        cur.bump();
                        if d != '_' {
                            s.push(d);
                        }
                    } else if d == '.' && !float && cur.peek2().is_some_and(|x| x.is_ascii_digit()) {
                        float = true;
                        cur.bump();
                        s.push('.');
                    } else if (d == 'e' || d == 'E')
                        && (cur.peek2().is_some_and(|x| x.is_ascii_digit() || x == '-' || x == '+'))
                    {
                        float = true;
                        cur.bump();
                        s.push('e');
                        if let Some(sign @ ('-' | '+')) = cur.peek() {
                            cur.bump();
                            s.push(sign);
                        }
                    } else {
                        break;
                    }
                }
                if float {
                    match s.parse() {
                        Ok(x) => Tok::Float(x),
                        Err(_) => {
                            diags.push(Diagnostic::error(
                                "syntax",
                                format!("malformed number `{s}`"),
                                Some(span.clone()),
                            ));
                            Tok::Float(0.0)
                        }
                    }
                } else {
                    match s.parse() {
                        Ok(i) => Tok::Int(i),
                        Err(_) => {
                            diags.push(Diagnostic::error(
                                "syntax",
                                format!("integer `{s}` out of range"),
                                Some(span.clone()),
                            ));
                            Tok::Int(0)
                        }
                    }
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::from(c);
                while let Some(d) = cur.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        cur.bump();
                        s.push(d);
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => {
                diags.push(Diagnostic::error(
                    "syntax",
                    format!("unexpected character `{other}`"),
                    Some(span),
                ));
                continue;
            }
        };
        out.push(Token {
            tok,
            span,
            end: cur.span(),
        });
    }
    (out, diags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        let (t, d) = lex(s, "t.adm");
        assert!(d.is_empty(), "{d:?}");
        t.into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn edge_and_comparisons() {
        assert_eq!(
            toks("a -deployedOn-> b <= 1.5 != \"x\" // gone"),
            vec![
                Tok::Ident("a".into()),
                Tok::Minus,
                Tok::Ident("deployedOn".into()),
                Tok::Arrow,
                Tok::Ident("b".into()),
                Tok::Le,
                Tok::Float(1.5),
                Tok::Ne,
                Tok::Str("x".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let (t, _) = lex("a\n  b", "f");
        assert_eq!((t[1].span.line, t[1].span.col), (2, 3));
    }

    #[test]
    fn bad_character_reported() {
        let (t, d) = lex("a # b", "f");
        assert_eq!(t.len(), 3);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].span.as_ref().unwrap().col, 3);
    }
}
