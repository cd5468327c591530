use std::fmt;

use thiserror::Error;

use super::ast::{Atom, CmpOp, Constraint, Expr, Navigation, SetExpr, Term};
use crate::meta::{is_basic_type, lookup_attribute, Attribute, BasicType, LookupError, Metamodel};

/// Semantic type of a single (non-list) value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueType {
    Int,
    Bool,
    Str,
    Object(String),
}

impl ValueType {
    fn of_target(target: &str) -> ValueType {
        match BasicType::from_name(target) {
            Some(BasicType::Int) => ValueType::Int,
            Some(BasicType::Bool) => ValueType::Bool,
            Some(BasicType::String) => ValueType::Str,
            None => ValueType::Object(target.to_string()),
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Int => f.write_str("int"),
            ValueType::Bool => f.write_str("bool"),
            ValueType::Str => f.write_str("string"),
            ValueType::Object(c) => f.write_str(c),
        }
    }
}

/// One resolved slot lookup along a navigation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NavStep {
    pub owner: String,
    pub attribute: String,
    pub declared: Attribute,
}

/// A navigation resolved against a metamodel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedNav {
    pub start: String,
    pub steps: Vec<NavStep>,
    /// Element type of the result.
    pub result: ValueType,
    /// True when the final step is a many-valued slot.
    pub many: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("quantifier domain `{0}` is not a declared class")]
    UnknownTypeInQuantifier(String),
    #[error("navigation `{nav}`: {reason}")]
    NavigationKindError { nav: String, reason: String },
    #[error("atom `{atom}` compares {lhs} with {rhs}")]
    AtomTypeMismatch { atom: String, lhs: String, rhs: String },
    #[error(transparent)]
    Lookup(#[from] LookupError),
}

/// Lexically scoped variable environment mapping variables to classes.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    frames: Vec<(String, String)>,
}

impl Scope {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, var: &str, class: &str) {
        self.frames.push((var.to_string(), class.to_string()));
    }

    pub fn pop(&mut self) {
        self.frames.pop();
    }

    pub fn lookup(&self, var: &str) -> Option<&str> {
        self.frames.iter().rev().find(|(v, _)| v == var).map(|(_, c)| c.as_str())
    }
}

/// Resolves a navigation. Paths may not step through many-valued slots.
pub fn resolve_navigation(mm: &Metamodel, scope: &Scope, nav: &Navigation) -> Result<ResolvedNav, TypeError> {
    let start = scope
        .lookup(&nav.var)
        .ok_or_else(|| TypeError::UnboundVariable(nav.var.clone()))?
        .to_string();
    let mut current = ValueType::Object(start.clone());
    let mut many = false;
    let mut steps = Vec::with_capacity(nav.path.len());
    for step in &nav.path {
        let owner = match (&current, many) {
            (_, true) => {
                return Err(TypeError::NavigationKindError {
                    nav: nav.to_string(),
                    reason: format!("cannot step `{step}` through a many-valued slot"),
                })
            }
            (ValueType::Object(c), false) => c.clone(),
            (basic, false) => {
                return Err(TypeError::NavigationKindError {
                    nav: nav.to_string(),
                    reason: format!("cannot step `{step}` through a value of basic type {basic}"),
                })
            }
        };
        let declared = lookup_attribute(mm, &owner, step)?.clone();
        current = ValueType::of_target(&declared.target);
        many = declared.is_many();
        steps.push(NavStep {
            owner,
            attribute: step.clone(),
            declared,
        });
    }
    Ok(ResolvedNav {
        start,
        steps,
        result: current,
        many,
    })
}

/// Quantified variables in binding order (pre-order over quantifiers).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedConstraint {
    constraint: Constraint,
    bindings: Vec<(String, String)>,
}

impl TypedConstraint {
    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn root(&self) -> &Expr {
        self.constraint.root()
    }

    pub fn bindings(&self) -> &[(String, String)] {
        &self.bindings
    }
}

/// The class ranged over by a quantifier domain.
pub fn domain_class(mm: &Metamodel, scope: &Scope, domain: &SetExpr) -> Result<String, TypeError> {
    match domain {
        SetExpr::Type(t) => {
            if is_basic_type(t) || !mm.is_class(t) {
                Err(TypeError::UnknownTypeInQuantifier(t.clone()))
            } else {
                Ok(t.clone())
            }
        }
        SetExpr::Nav(nav) => {
            let resolved = resolve_navigation(mm, scope, nav)?;
            match (resolved.many, resolved.result) {
                (true, ValueType::Object(c)) => Ok(c),
                _ => Err(TypeError::NavigationKindError {
                    nav: nav.to_string(),
                    reason: "a quantifier domain must end in a many-valued slot".into(),
                }),
            }
        }
    }
}

fn term_type(mm: &Metamodel, scope: &Scope, term: &Term) -> Result<ValueType, TypeError> {
    match term {
        Term::Int(_) => Ok(ValueType::Int),
        Term::Str(_) => Ok(ValueType::Str),
        Term::Bool(_) => Ok(ValueType::Bool),
        Term::Nav(nav) => {
            let r = resolve_navigation(mm, scope, nav)?;
            if r.many {
                return Err(TypeError::NavigationKindError {
                    nav: nav.to_string(),
                    reason: "a many-valued slot can only be compared through `.size`".into(),
                });
            }
            Ok(r.result)
        }
        Term::Size(nav) => {
            let r = resolve_navigation(mm, scope, nav)?;
            if !r.many {
                return Err(TypeError::NavigationKindError {
                    nav: nav.to_string(),
                    reason: "`.size` applies to many-valued slots only".into(),
                });
            }
            Ok(ValueType::Int)
        }
    }
}

fn check_atom(mm: &Metamodel, scope: &Scope, atom: &Atom) -> Result<(), TypeError> {
    let lhs = term_type(mm, scope, &atom.lhs)?;
    let rhs = term_type(mm, scope, &atom.rhs)?;
    let mismatch = || TypeError::AtomTypeMismatch {
        atom: atom.to_string(),
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
    };
    if lhs != rhs {
        return Err(mismatch());
    }
    if atom.op.is_order() && lhs != ValueType::Int {
        return Err(mismatch());
    }
    Ok(())
}

/// Type-checks an expression in `scope`, collecting quantifier bindings.
pub fn check_expr(
    mm: &Metamodel,
    scope: &mut Scope,
    expr: &Expr,
    bindings: &mut Vec<(String, String)>,
) -> Result<(), TypeError> {
    match expr {
        Expr::Const(_) => Ok(()),
        Expr::Atom(atom) => check_atom(mm, scope, atom),
        Expr::Selected(v) => scope
            .lookup(v)
            .map(|_| ())
            .ok_or_else(|| TypeError::UnboundVariable(v.clone())),
        Expr::Quant { var, domain, body, .. } => {
            let class = domain_class(mm, scope, domain)?;
            bindings.push((var.clone(), class.clone()));
            scope.push(var, &class);
            let result = check_expr(mm, scope, body, bindings);
            scope.pop();
            result
        }
        Expr::Not(e) => check_expr(mm, scope, e, bindings),
        Expr::And(a, b) | Expr::Or(a, b) | Expr::Implies(a, b) => {
            check_expr(mm, scope, a, bindings)?;
            check_expr(mm, scope, b, bindings)
        }
    }
}

pub fn typecheck_constraint(c: &Constraint, mm: &Metamodel) -> Result<TypedConstraint, TypeError> {
    let mut bindings = Vec::new();
    check_expr(mm, &mut Scope::new(), c.root(), &mut bindings)?;
    Ok(TypedConstraint {
        constraint: c.clone(),
        bindings,
    })
}

/// True for the comparison operators defined on `ty`.
pub fn op_supported(op: CmpOp, ty: &ValueType) -> bool {
    !op.is_order() || *ty == ValueType::Int
}
