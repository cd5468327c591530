use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Forall,
    Exists,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
        }
    }
}

/// A variable followed by zero or more slot names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Navigation {
    pub var: String,
    pub path: Vec<String>,
}

impl Navigation {
    pub fn new<I, S>(var: impl Into<String>, path: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Navigation {
            var: var.into(),
            path: path.into_iter().map(Into::into).collect(),
        }
    }

    pub fn var(var: impl Into<String>) -> Self {
        Navigation {
            var: var.into(),
            path: Vec::new(),
        }
    }
}

impl fmt::Display for Navigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.var)?;
        for step in &self.path {
            write!(f, ".{step}")?;
        }
        Ok(())
    }
}

/// Quantification domain: all objects of a class, or a navigated list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SetExpr {
    Type(String),
    Nav(Navigation),
}

impl fmt::Display for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetExpr::Type(t) => f.write_str(t),
            SetExpr::Nav(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Nav(Navigation),
    Size(Navigation),
    Int(i64),
    Str(String),
    Bool(bool),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Nav(n) => write!(f, "{n}"),
            Term::Size(n) => write!(f, "{n}.size"),
            Term::Int(i) => write!(f, "{i}"),
            Term::Str(s) => write_string_literal(f, s),
            Term::Bool(b) => write!(f, "{b}"),
        }
    }
}

fn write_string_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_order(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub op: CmpOp,
    pub lhs: Term,
    pub rhs: Term,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

/// Constraint expressions. `Selected` only appears in lifted constraints.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(bool),
    Atom(Atom),
    Selected(String),
    Quant {
        kind: Quantifier,
        var: String,
        domain: SetExpr,
        body: Box<Expr>,
    },
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Implies(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn forall(var: impl Into<String>, domain: SetExpr, body: Expr) -> Expr {
        Expr::Quant {
            kind: Quantifier::Forall,
            var: var.into(),
            domain,
            body: Box::new(body),
        }
    }

    pub fn exists(var: impl Into<String>, domain: SetExpr, body: Expr) -> Expr {
        Expr::Quant {
            kind: Quantifier::Exists,
            var: var.into(),
            domain,
            body: Box::new(body),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::Implies(Box::new(a), Box::new(b))
    }

    pub fn cmp(op: CmpOp, lhs: Term, rhs: Term) -> Expr {
        Expr::Atom(Atom { op, lhs, rhs })
    }

    pub fn selected(var: impl Into<String>) -> Expr {
        Expr::Selected(var.into())
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Atom(_) | Expr::Selected(_) => {}
            Expr::Quant { body, .. } | Expr::Not(body) => body.visit(f),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Implies(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Quant { .. } => 0,
            Expr::Implies(..) => 1,
            Expr::Or(..) => 2,
            Expr::And(..) => 3,
            Expr::Not(_) => 4,
            Expr::Const(_) | Expr::Atom(_) | Expr::Selected(_) => 5,
        }
    }

    /// Renders the expression, returning whether the rendering ends in an
    /// unparenthesized quantifier (whose body would swallow anything
    /// appended to its right).
    fn render(&self, out: &mut String) -> bool {
        match self {
            Expr::Const(b) => {
                out.push_str(if *b { "true" } else { "false" });
                false
            }
            Expr::Atom(a) => {
                out.push_str(&a.to_string());
                false
            }
            Expr::Selected(v) => {
                out.push_str("selected(");
                out.push_str(v);
                out.push(')');
                false
            }
            Expr::Quant { kind, var, domain, body } => {
                out.push_str(kind.keyword());
                out.push(' ');
                out.push_str(var);
                out.push_str(" in ");
                out.push_str(&domain.to_string());
                out.push_str(": ");
                body.render(out);
                true
            }
            Expr::Not(inner) => {
                out.push('!');
                let paren = inner.precedence() < 4 && !matches!(**inner, Expr::Quant { .. });
                render_operand(inner, paren, out)
            }
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Implies(a, b) => {
                let (symbol, prec, right_assoc) = match self {
                    Expr::And(..) => ("&&", 3, false),
                    Expr::Or(..) => ("||", 2, false),
                    _ => ("=>", 1, true),
                };
                let mut left = String::new();
                let left_open = a.render(&mut left);
                let left_paren = a.precedence() < prec || (right_assoc && a.precedence() == prec) || left_open;
                if left_paren {
                    out.push('(');
                    out.push_str(&left);
                    out.push(')');
                } else {
                    out.push_str(&left);
                }
                out.push(' ');
                out.push_str(symbol);
                out.push(' ');
                let right_paren = !matches!(**b, Expr::Quant { .. })
                    && (b.precedence() < prec || (!right_assoc && b.precedence() == prec));
                render_operand(b, right_paren, out)
            }
        }
    }
}

fn render_operand(e: &Expr, paren: bool, out: &mut String) -> bool {
    if paren {
        out.push('(');
        e.render(out);
        out.push(')');
        false
    } else {
        e.render(out)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render(&mut s);
        f.write_str(&s)
    }
}

/// A constraint: its root is always a quantification.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    root: Expr,
}

impl Constraint {
    /// Returns `None` unless `root` is a quantifier.
    pub fn new(root: Expr) -> Option<Self> {
        matches!(root, Expr::Quant { .. }).then_some(Constraint { root })
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn into_root(self) -> Expr {
        self.root
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
