//! Minimal S-expression reader for prefix expressions and SMT-LIB solver
//! responses.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            Sexp::Atom(_) => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SexpError {
    #[error("unexpected end of input")]
    Eof,
    #[error("unbalanced `)` at byte {0}")]
    Unbalanced(usize),
    #[error("trailing input at byte {0}")]
    Trailing(usize),
}

/// Parses every top-level S-expression in `text`. `;` starts a line
/// comment; `"..."` and `|...|` are kept as single atoms.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut out = Vec::new();
    loop {
        skip_ws(bytes, &mut pos);
        if pos >= bytes.len() {
            return Ok(out);
        }
        out.push(parse_at(text, &mut pos)?);
    }
}

/// Parses exactly one S-expression.
pub fn parse_one(text: &str) -> Result<Sexp, SexpError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    skip_ws(bytes, &mut pos);
    let s = parse_at(text, &mut pos)?;
    skip_ws(bytes, &mut pos);
    if pos < bytes.len() {
        return Err(SexpError::Trailing(pos));
    }
    Ok(s)
}

fn skip_ws(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b' ' | b'\t' | b'\n' | b'\r' => *pos += 1,
            b';' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            _ => break,
        }
    }
}

fn parse_at(text: &str, pos: &mut usize) -> Result<Sexp, SexpError> {
    let bytes = text.as_bytes();
    skip_ws(bytes, pos);
    match bytes.get(*pos) {
        None => Err(SexpError::Eof),
        Some(b'(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(bytes, pos);
                match bytes.get(*pos) {
                    None => return Err(SexpError::Eof),
                    Some(b')') => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(parse_at(text, pos)?),
                }
            }
        }
        Some(b')') => Err(SexpError::Unbalanced(*pos)),
        Some(&q @ (b'"' | b'|')) => {
            let start = *pos;
            *pos += 1;
            while *pos < bytes.len() {
                if bytes[*pos] == q {
                    // "" is an escaped quote inside SMT-LIB strings
                    if q == b'"' && bytes.get(*pos + 1) == Some(&b'"') {
                        *pos += 2;
                        continue;
                    }
                    *pos += 1;
                    return Ok(Sexp::Atom(text[start..*pos].to_string()));
                }
                *pos += 1;
            }
            Err(SexpError::Eof)
        }
        Some(_) => {
            let start = *pos;
            while *pos < bytes.len()
                && !matches!(
                    bytes[*pos],
                    b' ' | b'\t' | b'\n' | b'\r' | b'(' | b')' | b';'
                )
            {
                *pos += 1;
            }
            Ok(Sexp::Atom(text[start..*pos].to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_lists_and_comments() {
        let all = parse_all("sat ; verdict\n((x (- 5)) (b true))").unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0], Sexp::Atom("sat".into()));
        assert_eq!(all[1].to_string(), "((x (- 5)) (b true))");
    }

    #[test]
    fn strings_keep_parentheses() {
        let s = parse_one(r#"(error "line 3: (oops) ""quoted""")"#).unwrap();
        assert_eq!(s.as_list().unwrap().len(), 2);
    }

    #[test]
    fn truncated_input_is_eof() {
        assert_eq!(parse_one("(+ x"), Err(SexpError::Eof));
        assert!(matches!(parse_one("x)"), Err(SexpError::Trailing(_))));
    }
}
