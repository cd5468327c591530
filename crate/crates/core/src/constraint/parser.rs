//! Recursive-descent parser for the constraint language.
//!
//! Precedence, loosest first: quantifier bodies (extend maximally right),
//! `=>` (right-associative), `||`, `&&`, `!`.

use std::fmt;

use thiserror::Error;

use super::ast::{Atom, CmpOp, Constraint, Expr, Navigation, Quantifier, SetExpr, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Forall,
    Exists,
    In,
    True,
    False,
    Colon,
    Dot,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
    Cmp(CmpOp),
    LParen,
    RParen,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(i) => write!(f, "integer {i}"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Forall => f.write_str("`forall`"),
            Tok::Exists => f.write_str("`exists`"),
            Tok::In => f.write_str("`in`"),
            Tok::True => f.write_str("`true`"),
            Tok::False => f.write_str("`false`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::AndAnd => f.write_str("`&&`"),
            Tok::OrOr => f.write_str("`||`"),
            Tok::Arrow => f.write_str("`=>`"),
            Tok::Cmp(op) => write!(f, "`{}`", op.symbol()),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: expected {}, found {found}", .expected.join(" or "))]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, expected: &str, found: String| SyntaxError {
        line,
        column,
        expected: vec![expected.to_string()],
        found,
    };
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
        let (start_line, start_col) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            *i += n;
            col += n;
        };
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(1, &mut i);
            }
            let word: String = chars[start..i].iter().collect();
            match word.as_str() {
                "forall" => Tok::Forall,
                "exists" => Tok::Exists,
                "in" => Tok::In,
                "true" => Tok::True,
                "false" => Tok::False,
                _ => Tok::Ident(word),
            }
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            advance(1, &mut i);
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(1, &mut i);
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits
                .parse::<i64>()
                .map_err(|_| err(start_line, start_col, "64-bit integer", digits.clone()))?;
            Tok::Int(value)
        } else if c == '"' {
            advance(1, &mut i);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(err(start_line, start_col, "closing `\"`", "end of line".into()));
                    }
                    Some('"') => {
                        advance(1, &mut i);
                        break;
                    }
                    Some('\\') => {
                        let escaped = match chars.get(i + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            other => {
                                return Err(err(
                                    line,
                                    col,
                                    "escape sequence",
                                    other.map(|c| c.to_string()).unwrap_or_default(),
                                ))
                            }
                        };
                        s.push(escaped);
                        advance(2, &mut i);
                    }
                    Some(&other) => {
                        s.push(other);
                        advance(1, &mut i);
                    }
                }
            }
            Tok::Str(s)
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, len) = match (c, next) {
                ('&', Some('&')) => (Tok::AndAnd, 2),
                ('|', Some('|')) => (Tok::OrOr, 2),
                ('=', Some('>')) => (Tok::Arrow, 2),
                ('!', Some('=')) => (Tok::Cmp(CmpOp::Ne), 2),
                ('<', Some('=')) => (Tok::Cmp(CmpOp::Le), 2),
                ('>', Some('=')) => (Tok::Cmp(CmpOp::Ge), 2),
                ('=', _) => (Tok::Cmp(CmpOp::Eq), 1),
                ('<', _) => (Tok::Cmp(CmpOp::Lt), 1),
                ('>', _) => (Tok::Cmp(CmpOp::Gt), 1),
                ('!', _) => (Tok::Bang, 1),
                (':', _) => (Tok::Colon, 1),
                ('.', _) => (Tok::Dot, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                _ => return Err(err(line, col, "token", format!("`{c}`"))),
            };
            advance(len, &mut i);
            tok
        };
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    allow_selected: bool,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let here = &self.toks[self.pos];
        SyntaxError {
            line: here.line,
            column: here.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: here.tok.to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[name]))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Tok::Ident(_) => match self.bump() {
                Tok::Ident(s) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn quant(&mut self) -> Result<Expr, SyntaxError> {
        let kind = match self.bump() {
            Tok::Forall => Quantifier::Forall,
            Tok::Exists => Quantifier::Exists,
            _ => unreachable!("caller checked for a quantifier keyword"),
        };
        let var = self.ident()?;
        self.expect(Tok::In, "`in`")?;
        let domain = self.set()?;
        self.expect(Tok::Colon, "`:`")?;
        let body = self.expr()?;
        Ok(Expr::Quant {
            kind,
            var,
            domain,
            body: Box::new(body),
        })
    }

    fn set(&mut self) -> Result<SetExpr, SyntaxError> {
        let head = self.ident()?;
        if *self.peek() != Tok::Dot {
            return Ok(SetExpr::Type(head));
        }
        let mut path = Vec::new();
        while *self.peek() == Tok::Dot {
            self.bump();
            path.push(self.ident()?);
        }
        Ok(SetExpr::Nav(Navigation { var: head, path }))
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.expr()?;
            return Ok(Expr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and()?;
            lhs = Expr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Expr::not(self.unary()?))
            }
            Tok::Forall | Tok::Exists => self.quant(),
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name)
                if self.allow_selected && name == "selected" && *self.peek_at(1) == Tok::LParen =>
            {
                self.bump();
                self.bump();
                let var = self.ident()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Selected(var))
            }
            Tok::True | Tok::False if !matches!(self.peek_at(1), Tok::Cmp(_)) => {
                let value = self.bump() == Tok::True;
                Ok(Expr::Const(value))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.term()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return Err(self.error(&["comparison operator"])),
        };
        self.bump();
        let rhs = self.term()?;
        Ok(Expr::Atom(Atom { op, lhs, rhs }))
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        match self.peek() {
            Tok::Int(_) => match self.bump() {
                Tok::Int(i) => Ok(Term::Int(i)),
                _ => unreachable!(),
            },
            Tok::Str(_) => match self.bump() {
                Tok::Str(s) => Ok(Term::Str(s)),
                _ => unreachable!(),
            },
            Tok::True => {
                self.bump();
                Ok(Term::Bool(true))
            }
            Tok::False => {
                self.bump();
                Ok(Term::Bool(false))
            }
            Tok::Ident(_) => {
                let var = self.ident()?;
                let mut path = Vec::new();
                while *self.peek() == Tok::Dot {
                    self.bump();
                    path.push(self.ident()?);
                }
                if path.last().map(String::as_str) == Some("size") {
                    path.pop();
                    Ok(Term::Size(Navigation { var, path }))
                } else {
                    Ok(Term::Nav(Navigation { var, path }))
                }
            }
            _ => Err(self.error(&["navigation", "literal"])),
        }
    }

    fn finish(&mut self) -> Result<(), SyntaxError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }
}

fn parser(text: &str, allow_selected: bool) -> Result<Parser, SyntaxError> {
    Ok(Parser {
        toks: lex(text)?,
        pos: 0,
        allow_selected,
    })
}

/// Parses a constraint. The start symbol is a quantification.
pub fn parse_constraint(text: &str) -> Result<Constraint, SyntaxError> {
    let mut p = parser(text, false)?;
    if !matches!(p.peek(), Tok::Forall | Tok::Exists) {
        return Err(p.error(&["`forall`", "`exists`"]));
    }
    let root = p.quant()?;
    p.finish()?;
    Ok(Constraint::new(root).expect("root is a quantifier"))
}

/// Parses an expression, optionally accepting `selected(v)` guards.
pub fn parse_expr(text: &str, allow_selected: bool) -> Result<Expr, SyntaxError> {
    let mut p = parser(text, allow_selected)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nav(var: &str, path: &[&str]) -> Navigation {
        Navigation::new(var, path.iter().copied())
    }

    #[test]
    fn uniqueness_constraint() {
        let c = parse_constraint(
            "forall f1 in FunctionDefinition: !exists f2 in FunctionDefinition: f1 != f2 && f1.funName = f2.funName",
        )
        .unwrap();
        let expected = Expr::forall(
            "f1",
            SetExpr::Type("FunctionDefinition".into()),
            Expr::not(Expr::exists(
                "f2",
                SetExpr::Type("FunctionDefinition".into()),
                Expr::and(
                    Expr::cmp(CmpOp::Ne, Term::Nav(nav("f1", &[])), Term::Nav(nav("f2", &[]))),
                    Expr::cmp(
                        CmpOp::Eq,
                        Term::Nav(nav("f1", &["funName"])),
                        Term::Nav(nav("f2", &["funName"])),
                    ),
                ),
            )),
        );
        assert_eq!(c.root(), &expected);
    }

    #[test]
    fn literal_true_body() {
        let c = parse_constraint("forall x in T: true").unwrap();
        assert_eq!(c.root(), &Expr::forall("x", SetExpr::Type("T".into()), Expr::Const(true)));
    }

    #[test]
    fn size_term_and_nav_set() {
        let c = parse_constraint("forall c in FunctionCall: c.args.size = 0").unwrap();
        assert_eq!(
            c.root(),
            &Expr::forall(
                "c",
                SetExpr::Type("FunctionCall".into()),
                Expr::cmp(CmpOp::Eq, Term::Size(nav("c", &["args"])), Term::Int(0))
            )
        );
        let c = parse_constraint("forall p in F.params: p.paramName = \"x\"").unwrap();
        match c.root() {
            Expr::Quant { domain, .. } => assert_eq!(domain, &SetExpr::Nav(nav("F", &["params"]))),
            _ => panic!(),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("a = 1 && b = 2 || c = 3 => d = 4 => e = 5", false).unwrap();
        let atom = |v: &str, i| Expr::cmp(CmpOp::Eq, Term::Nav(nav(v, &[])), Term::Int(i));
        let expected = Expr::implies(
            Expr::or(Expr::and(atom("a", 1), atom("b", 2)), atom("c", 3)),
            Expr::implies(atom("d", 4), atom("e", 5)),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn quantifier_body_extends_right() {
        let e = parse_expr("a = 1 && forall x in T: b = 2 || c = 3", false).unwrap();
        match e {
            Expr::And(_, rhs) => assert!(matches!(*rhs, Expr::Quant { .. })),
            _ => panic!("{e:?}"),
        }
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_constraint("forall x in T:\n  x.a = ").unwrap_err();
        assert_eq!((err.line, err.column), (2, 9));
        assert!(err.expected.contains(&"navigation".to_string()));
        let err = parse_constraint("x.a = 1").unwrap_err();
        assert_eq!(err.column, 1);
        assert!(parse_constraint("forall x in T: true extra").is_err());
        assert!(parse_constraint("forall x in T: selected(x)").is_err());
        assert!(parse_expr("selected(x) => true", true).is_ok());
    }

    #[test]
    fn string_escapes_and_negative_ints() {
        let c = parse_constraint(r#"forall x in T: x.s = "a\"b\\c" || x.n > -4"#).unwrap();
        let printed = c.to_string();
        assert_eq!(parse_constraint(&printed).unwrap(), c);
        assert!(printed.contains("-4"));
    }
}
