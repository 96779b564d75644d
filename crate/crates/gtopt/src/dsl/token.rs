//! Tokens and lexer for `.gspec` files. `//` starts a line comment.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span {
    /// 1-based line.
    pub line: u32,
    /// 1-based column (in characters).
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    // keywords
    Pattern,
    Rule,
    Lhs,
    Do,
    Create,
    Delete,
    Set,
    Require,
    Mapping,
    To,
    Constraint,
    ForEach,
    Minimize,
    Maximize,
    Sum,
    Where,
    Ctx,
    Min,
    Max,
    True,
    False,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    Colon,
    Assign, // :=
    Dot,
    Arrow, // ->
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Eq,   // =
    EqEq, // ==
    Ne,   // !=
    Ge,
    Gt,
    AndAnd,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Real(v) => write!(f, "`{v}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Eof => write!(f, "end of input"),
            other => {
                let s = match other {
                    Tok::Pattern => "pattern",
                    Tok::Rule => "rule",
                    Tok::Lhs => "lhs",
                    Tok::Do => "do",
                    Tok::Create => "create",
                    Tok::Delete => "delete",
                    Tok::Set => "set",
                    Tok::Require => "require",
                    Tok::Mapping => "mapping",
                    Tok::To => "to",
                    Tok::Constraint => "constraint",
                    Tok::ForEach => "forEach",
                    Tok::Minimize => "minimize",
                    Tok::Maximize => "maximize",
                    Tok::Sum => "sum",
                    Tok::Where => "where",
                    Tok::Ctx => "ctx",
                    Tok::Min => "min",
                    Tok::Max => "max",
                    Tok::True => "true",
                    Tok::False => "false",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::Semi => ";",
                    Tok::Comma => ",",
                    Tok::Colon => ":",
                    Tok::Assign => ":=",
                    Tok::Dot => ".",
                    Tok::Arrow => "->",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::Star => "*",
                    Tok::Slash => "/",
                    Tok::Lt => "<",
                    Tok::Le => "<=",
                    Tok::Eq => "=",
                    Tok::EqEq => "==",
                    Tok::Ne => "!=",
                    Tok::Ge => ">=",
                    Tok::Gt => ">",
                    Tok::AndAnd => "&&",
                    _ => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

pub fn lex(text: &str) -> (Vec<Token>, Vec<LexError>) {
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $span:expr) => {
            tokens.push(Token {
                tok: $tok,
                span: $span,
            })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        let advance = |i: &mut usize, col: &mut u32, n: usize| {
            *i += n;
            *col += n as u32;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => advance(&mut i, &mut col, 1),
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '{' => {
                push!(Tok::LBrace, span);
                advance(&mut i, &mut col, 1);
            }
            '}' => {
                push!(Tok::RBrace, span);
                advance(&mut i, &mut col, 1);
            }
            '(' => {
                push!(Tok::LParen, span);
                advance(&mut i, &mut col, 1);
            }
            ')' => {
                push!(Tok::RParen, span);
                advance(&mut i, &mut col, 1);
            }
            ';' => {
                push!(Tok::Semi, span);
                advance(&mut i, &mut col, 1);
            }
            ',' => {
                push!(Tok::Comma, span);
                advance(&mut i, &mut col, 1);
            }
            '.' => {
                push!(Tok::Dot, span);
                advance(&mut i, &mut col, 1);
            }
            '+' => {
                push!(Tok::Plus, span);
                advance(&mut i, &mut col, 1);
            }
            '*' => {
                push!(Tok::Star, span);
                advance(&mut i, &mut col, 1);
            }
            '/' => {
                push!(Tok::Slash, span);
                advance(&mut i, &mut col, 1);
            }
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    push!(Tok::Arrow, span);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Minus, span);
                    advance(&mut i, &mut col, 1);
                }
            }
            ':' => {
                if chars.get(i + 1) == Some(&'=') {
                    push!(Tok::Assign, span);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Colon, span);
                    advance(&mut i, &mut col, 1);
                }
            }
            '<' => {
                if chars.get(i + 1) == Some(&'=') {
                    push!(Tok::Le, span);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Lt, span);
                    advance(&mut i, &mut col, 1);
                }
            }
            '>' => {
                if chars.get(i + 1) == Some(&'=') {
                    push!(Tok::Ge, span);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Gt, span);
                    advance(&mut i, &mut col, 1);
                }
            }
            '=' => {
                if chars.get(i + 1) == Some(&'=') {
                    push!(Tok::EqEq, span);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Eq, span);
                    advance(&mut i, &mut col, 1);
                }
            }
            '!' => {
                if chars.get(i + 1) == Some(&'=') {
                    push!(Tok::Ne, span);
                    advance(&mut i, &mut col, 2);
                } else {
                    errors.push(LexError {
                        span,
                        message: "unexpected `!`".into(),
                    });
                    advance(&mut i, &mut col, 1);
                }
            }
            '&' => {
                if chars.get(i + 1) == Some(&'&') {
                    push!(Tok::AndAnd, span);
                    advance(&mut i, &mut col, 2);
                } else {
                    errors.push(LexError {
                        span,
                        message: "unexpected `&`".into(),
                    });
                    advance(&mut i, &mut col, 1);
                }
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < chars.len() {
                    match chars[j] {
                        '"' => {
                            closed = true;
                            j += 1;
                            break;
                        }
                        '\\' if j + 1 < chars.len() => {
                            let esc = chars[j + 1];
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                            j += 2;
                        }
                        '\n' => break,
                        other => {
                            s.push(other);
                            j += 1;
                        }
                    }
                }
                if !closed {
                    errors.push(LexError {
                        span,
                        message: "unterminated string literal".into(),
                    });
                }
                col += (j - i) as u32;
                i = j;
                push!(Tok::Str(s), span);
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let mut is_real = false;
                if i < chars.len()
                    && chars[i] == '.'
                    && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())
                {
                    is_real = true;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let raw: String = chars[start..i].iter().collect();
                col += (i - start) as u32;
                if is_real {
                    match raw.parse::<f64>() {
                        Ok(v) => push!(Tok::Real(v), span),
                        Err(_) => errors.push(LexError {
                            span,
                            message: format!("bad number `{raw}`"),
                        }),
                    }
                } else {
                    match raw.parse::<i64>() {
                        Ok(v) => push!(Tok::Int(v), span),
                        Err(_) => errors.push(LexError {
                            span,
                            message: format!("bad number `{raw}`"),
                        }),
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += (i - start) as u32;
                let tok = match word.as_str() {
                    "pattern" => Tok::Pattern,
                    "rule" => Tok::Rule,
                    "lhs" => Tok::Lhs,
                    "do" => Tok::Do,
                    "create" => Tok::Create,
                    "delete" => Tok::Delete,
                    "set" => Tok::Set,
                    "require" => Tok::Require,
                    "mapping" => Tok::Mapping,
                    "to" => Tok::To,
                    "constraint" => Tok::Constraint,
                    "forEach" => Tok::ForEach,
                    "minimize" => Tok::Minimize,
                    "maximize" => Tok::Maximize,
                    "sum" => Tok::Sum,
                    "where" => Tok::Where,
                    "ctx" => Tok::Ctx,
                    "min" => Tok::Min,
                    "max" => Tok::Max,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word),
                };
                push!(tok, span);
            }
            other => {
                errors.push(LexError {
                    span,
                    message: format!("unexpected character `{other}`"),
                });
                advance(&mut i, &mut col, 1);
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    (tokens, errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_edge_and_compare_tokens() {
        let (toks, errs) = lex("a -serves-> b; require x.up >= 10 // tail");
        assert!(errs.is_empty());
        let kinds: Vec<&Tok> = toks.iter().map(|t| &t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                &Tok::Ident("a".into()),
                &Tok::Minus,
                &Tok::Ident("serves".into()),
                &Tok::Arrow,
                &Tok::Ident("b".into()),
                &Tok::Semi,
                &Tok::Require,
                &Tok::Ident("x".into()),
                &Tok::Dot,
                &Tok::Ident("up".into()),
                &Tok::Ge,
                &Tok::Int(10),
                &Tok::Eof,
            ]
        );
    }

    #[test]
    fn tracks_line_and_column() {
        let (toks, _) = lex("ab\n  cd");
        assert_eq!(toks[0].span, Span { line: 1, col: 1 });
        assert_eq!(toks[1].span, Span { line: 2, col: 3 });
    }

    #[test]
    fn reals_and_ints_are_distinct() {
        let (toks, _) = lex("1 2.5");
        assert_eq!(toks[0].tok, Tok::Int(1));
        assert_eq!(toks[1].tok, Tok::Real(2.5));
    }
}
