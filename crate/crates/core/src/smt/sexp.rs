use std::fmt;

use thiserror::Error;

/// A solver response term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Symbol(String),
    Str(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn symbol(&self) -> Option<&str> {
        match self {
            Sexp::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn head(&self) -> Option<&str> {
        self.list()?.first()?.symbol()
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Symbol(s) => f.write_str(s),
            Sexp::Str(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SexpError {
    #[error("unbalanced `)` at byte {0}")]
    UnexpectedClose(usize),
    #[error("unterminated list")]
    UnterminatedList,
    #[error("unterminated string literal")]
    UnterminatedString,
    #[error("unterminated quoted symbol")]
    UnterminatedSymbol,
}

/// Parses a sequence of top-level terms. Comments run from `;` to end of line.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let bytes: Vec<char> = text.chars().collect();
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ';' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                stack.push(Vec::new());
                i += 1;
            }
            ')' => {
                if stack.len() < 2 {
                    return Err(SexpError::UnexpectedClose(i));
                }
                let done = stack.pop().expect("checked depth");
                stack.last_mut().expect("checked depth").push(Sexp::List(done));
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err(SexpError::UnterminatedString),
                        Some('"') if bytes.get(i + 1) == Some(&'"') => {
                            s.push('"');
                            i += 2;
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some(ch) => {
                            s.push(*ch);
                            i += 1;
                        }
                    }
                }
                stack.last_mut().expect("root frame").push(Sexp::Str(s));
            }
            '|' => {
                let start = i + 1;
                let end = bytes[start..]
                    .iter()
                    .position(|ch| *ch == '|')
                    .ok_or(SexpError::UnterminatedSymbol)?;
                let s: String = bytes[start..start + end].iter().collect();
                stack.last_mut().expect("root frame").push(Sexp::Symbol(s));
                i = start + end + 1;
            }
            c if c.is_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_whitespace() && !"();\"|".contains(bytes[i]) {
                    i += 1;
                }
                let s: String = bytes[start..i].iter().collect();
                stack.last_mut().expect("root frame").push(Sexp::Symbol(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SexpError::UnterminatedList);
    }
    Ok(stack.pop().expect("root frame"))
}
