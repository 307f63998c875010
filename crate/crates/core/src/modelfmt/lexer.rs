use super::{ParseError, ParseErrorKind};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const PUNCTS: &[&str] = &[
    "->", "==", "!=", "<=", ">=", "&&", "||", ":=", "..", "{", "}", "(", ")", "[", "]", ",", ";", ":", ".", "<", ">",
    "!", "+", "-", "*", "|", "\\", "/", "?", "=", "@",
];

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '@' | '#' | '\'')
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<i64>().map_err(|_| ParseError {
                kind: ParseErrorKind::Syntax,
                line: l0,
                col: c0,
                message: format!("integer literal {text} is out of range"),
                expected: Vec::new(),
            })?;
            out.push(Token {
                tok: Tok::Int(v),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, 1);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => {
                        return Err(ParseError {
                            kind: ParseErrorKind::Syntax,
                            line: l0,
                            col: c0,
                            message: "unterminated string".into(),
                            expected: vec!["`\"`".into()],
                        })
                    }
                    Some('"') => {
                        advance(&mut i, &mut line, &mut col, 1);
                        break;
                    }
                    Some('\\') if i + 1 < chars.len() => {
                        s.push(chars[i + 1]);
                        advance(&mut i, &mut line, &mut col, 2);
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                line: l0,
                col: c0,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(*p)) {
            Some(p) => {
                advance(&mut i, &mut line, &mut col, p.len());
                out.push(Token {
                    tok: Tok::Punct(p),
                    line: l0,
                    col: c0,
                });
            }
            None => {
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax,
                    line: l0,
                    col: c0,
                    message: format!("unexpected character {c:?}"),
                    expected: Vec::new(),
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

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn identifiers_keep_marks() {
        assert_eq!(
            toks("x@1 z#0 Spec' # note\n t1 @ a"),
            vec![
                Tok::Ident("x@1".into()),
                Tok::Ident("z#0".into()),
                Tok::Ident("Spec'".into()),
                Tok::Ident("t1".into()),
                Tok::Punct("@"),
                Tok::Ident("a".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn ranges_and_operators() {
        assert_eq!(
            toks("0..2 x:=y->z"),
            vec![
                Tok::Int(0),
                Tok::Punct(".."),
                Tok::Int(2),
                Tok::Ident("x".into()),
                Tok::Punct(":="),
                Tok::Ident("y".into()),
                Tok::Punct("->"),
                Tok::Ident("z".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("a\n  b").unwrap();
        assert_eq!((t[1].line, t[1].col), (2, 3));
    }
}
