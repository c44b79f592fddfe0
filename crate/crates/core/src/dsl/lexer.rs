use super::{ErrorKind, ParseError, SourceSpan};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Equals,
    Dot,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

/// One physical line: its tokens and an optional trailing `#` comment.
#[derive(Clone, Debug, Default)]
pub(crate) struct Line {
    pub number: usize,
    pub start: usize,
    pub end: usize,
    pub tokens: Vec<Token>,
    pub comment: Option<String>,
}

impl Line {
    pub fn span(&self, statement: usize, start: usize, end: usize, text: &str) -> SourceSpan {
        let column = text[self.start..start.max(self.start)].chars().count() + 1;
        SourceSpan { statement, start, end: end.max(start), line: self.number, column }
    }
}

fn comment_text(raw: &str) -> String {
    let body = &raw[1..];
    body.strip_prefix(' ').unwrap_or(body).to_string()
}

fn number_end(b: &[u8], mut i: usize) -> usize {
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

/// Splits text into lines of tokens. Lexical errors are reported per line
/// and the offending line is returned without tokens.
pub(crate) fn lex(text: &str, errors: &mut Vec<(usize, ParseError)>) -> Vec<Line> {
    let mut lines = Vec::new();
    let mut offset = 0;
    for (n, raw) in text.split('\n').enumerate() {
        let start = offset;
        offset += raw.len() + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let mut line = Line { number: n + 1, start, end: start + raw.len(), ..Default::default() };
        let b = raw.as_bytes();
        let mut i = 0;
        let mut failed = false;
        while i < b.len() {
            let c = b[i];
            let at = start + i;
            let single = match c {
                b'(' => Some(Tok::LParen),
                b')' => Some(Tok::RParen),
                b'[' => Some(Tok::LBracket),
                b']' => Some(Tok::RBracket),
                b',' => Some(Tok::Comma),
                b'=' => Some(Tok::Equals),
                _ => None,
            };
            if let Some(tok) = single {
                line.tokens.push(Token { tok, start: at, end: at + 1 });
                i += 1;
                continue;
            }
            if c == b' ' || c == b'\t' {
                i += 1;
            } else if c == b'#' {
                line.comment = Some(comment_text(&raw[i..]));
                break;
            } else if c.is_ascii_alphabetic() || c == b'_' {
                let s = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                line.tokens.push(Token { tok: Tok::Ident(raw[s..i].to_string()), start: start + s, end: start + i });
            } else if c.is_ascii_digit()
                || ((c == b'-' || c == b'+' || c == b'.') && b.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == b'.'))
            {
                let e = number_end(b, i);
                let lexeme = &raw[i..e];
                match lexeme.parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        line.tokens.push(Token { tok: Tok::Num(v), start: at, end: start + e });
                        i = e;
                    }
                    _ => {
                        let span = line.span(0, at, start + e.max(i + 1), text);
                        errors.push((n, ParseError::new(ErrorKind::Lexical, span, format!("malformed number `{lexeme}`"))));
                        failed = true;
                        break;
                    }
                }
            } else if c == b'.' {
                line.tokens.push(Token { tok: Tok::Dot, start: at, end: at + 1 });
                i += 1;
            } else {
                let ch = raw[i..].chars().next().unwrap();
                let span = line.span(0, at, at + ch.len_utf8(), text);
                errors.push((n, ParseError::new(ErrorKind::Lexical, span, format!("unexpected character `{ch}`"))));
                failed = true;
                break;
            }
        }
        if failed {
            line.tokens.clear();
        }
        lines.push(line);
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        let mut e = Vec::new();
        let lines = lex(s, &mut e);
        assert!(e.is_empty(), "{e:?}");
        lines.into_iter().flat_map(|l| l.tokens).map(|t| t.tok).collect()
    }

    #[test]
    fn numbers() {
        assert_eq!(toks("1 -2.5 0. .25 1e-3 -4E2"), [1.0, -2.5, 0.0, 0.25, 1e-3, -400.0].map(Tok::Num).to_vec());
    }

    #[test]
    fn call_with_member() {
        let t = toks("make_coincident(Line0.end, (0, 0))");
        assert_eq!(t[0], Tok::Ident("make_coincident".into()));
        assert_eq!(t[3], Tok::Dot);
        assert_eq!(t.len(), 12);
    }

    #[test]
    fn comments_keep_text() {
        let mut e = Vec::new();
        let l = lex("#  two spaces\nx = [] # tail", &mut e);
        assert_eq!(l[0].comment.as_deref(), Some(" two spaces"));
        assert_eq!(l[1].comment.as_deref(), Some("tail"));
    }

    #[test]
    fn stray_character_is_lexical() {
        let mut e = Vec::new();
        lex("a = add_line((0,0),(1,0)) $", &mut e);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].1.kind, ErrorKind::Lexical);
        assert_eq!(e[0].1.span.start, 26);
    }
}
