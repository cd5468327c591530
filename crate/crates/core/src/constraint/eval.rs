//! Direct evaluation of constraints on a core model.
//!
//! Atoms follow these rules for the absent object NONE: two object-typed
//! operands compare by identity (NONE = NONE holds, NONE = o does not); any
//! other comparison with a NONE-valued operand is false.

use std::cmp::Ordering;

use super::ast::{Atom, CmpOp, Expr, Navigation, Quantifier, SetExpr, Term};
use super::typecheck::{resolve_navigation, Scope, TypedConstraint, ValueType};
use crate::meta::Metamodel;
use crate::model::{navigate, InstanceGraph, ObjectId, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Operand {
    Int(i64),
    Bool(bool),
    Str(String),
    Object(ObjectId),
    None,
}

struct Env<'a> {
    mm: &'a Metamodel,
    g: &'a InstanceGraph,
    selected: &'a dyn Fn(&ObjectId) -> bool,
    frames: Vec<(&'a str, ObjectId)>,
    scope: Scope,
}

impl<'a> Env<'a> {
    fn lookup(&self, var: &str) -> Option<&ObjectId> {
        self.frames.iter().rev().find(|(v, _)| *v == var).map(|(_, id)| id)
    }

    fn is_object_nav(&self, term: &Term) -> bool {
        match term {
            Term::Nav(nav) => matches!(
                resolve_navigation(self.mm, &self.scope, nav),
                Ok(r) if matches!(r.result, ValueType::Object(_))
            ),
            _ => false,
        }
    }
}

/// Evaluates a type-checked constraint on a core model.
///
/// `g` must type-check against `mm` (NONE references allowed).
pub fn evaluate(tc: &TypedConstraint, mm: &Metamodel, g: &InstanceGraph) -> bool {
    evaluate_expr(tc.root(), mm, g, &|_| true)
}

/// Evaluates a closed, type-checked expression. `selected` interprets
/// `selected(v)` guards.
pub fn evaluate_expr(expr: &Expr, mm: &Metamodel, g: &InstanceGraph, selected: &dyn Fn(&ObjectId) -> bool) -> bool {
    let mut env = Env {
        mm,
        g,
        selected,
        frames: Vec::new(),
        scope: Scope::new(),
    };
    eval(expr, &mut env)
}

fn eval<'a>(expr: &'a Expr, env: &mut Env<'a>) -> bool {
    match expr {
        Expr::Const(b) => *b,
        Expr::Atom(atom) => eval_atom(atom, env),
        Expr::Selected(v) => env.lookup(v).is_some_and(|id| (env.selected)(id)),
        Expr::Not(e) => !eval(e, env),
        Expr::And(a, b) => eval(a, env) && eval(b, env),
        Expr::Or(a, b) => eval(a, env) || eval(b, env),
        Expr::Implies(a, b) => !eval(a, env) || eval(b, env),
        Expr::Quant { kind, var, domain, body } => {
            let Some(class) = domain_class(domain, env) else {
                return *kind == Quantifier::Forall;
            };
            let members = domain_members(domain, env);
            env.scope.push(var, &class);
            let mut test = |id: ObjectId| {
                env.frames.push((var.as_str(), id));
                let holds = eval(body, env);
                env.frames.pop();
                holds
            };
            let holds = match kind {
                Quantifier::Forall => members.into_iter().all(&mut test),
                Quantifier::Exists => members.into_iter().any(&mut test),
            };
            env.scope.pop();
            holds
        }
    }
}

fn domain_class(domain: &SetExpr, env: &Env<'_>) -> Option<String> {
    match domain {
        SetExpr::Type(t) => Some(t.clone()),
        SetExpr::Nav(nav) => match resolve_navigation(env.mm, &env.scope, nav).ok()?.result {
            ValueType::Object(c) => Some(c),
            _ => None,
        },
    }
}

fn domain_members(domain: &SetExpr, env: &Env<'_>) -> Vec<ObjectId> {
    match domain {
        SetExpr::Type(t) => env.g.extent(t).to_vec(),
        SetExpr::Nav(nav) => match nav_value(nav, env) {
            Some(Value::List(ids)) => ids,
            _ => Vec::new(),
        },
    }
}

fn nav_value(nav: &Navigation, env: &Env<'_>) -> Option<Value> {
    let start = env.lookup(&nav.var)?;
    navigate(env.g, start, &nav.path).ok()
}

fn operand(term: &Term, env: &Env<'_>) -> Operand {
    match term {
        Term::Int(i) => Operand::Int(*i),
        Term::Bool(b) => Operand::Bool(*b),
        Term::Str(s) => Operand::Str(s.clone()),
        Term::Nav(nav) => match nav_value(nav, env) {
            Some(Value::Int(i)) => Operand::Int(i),
            Some(Value::Bool(b)) => Operand::Bool(b),
            Some(Value::Str(s)) => Operand::Str(s),
            Some(Value::Ref(Some(id))) => Operand::Object(id),
            _ => Operand::None,
        },
        Term::Size(nav) => match nav_value(nav, env) {
            Some(Value::List(ids)) => Operand::Int(ids.len() as i64),
            _ => Operand::None,
        },
    }
}

fn eval_atom(atom: &Atom, env: &Env<'_>) -> bool {
    let lhs = operand(&atom.lhs, env);
    let rhs = operand(&atom.rhs, env);
    if env.is_object_nav(&atom.lhs) || env.is_object_nav(&atom.rhs) {
        let equal = lhs == rhs;
        return match atom.op {
            CmpOp::Eq => equal,
            CmpOp::Ne => !equal,
            _ => false,
        };
    }
    let ordering = match (&lhs, &rhs) {
        (Operand::Int(a), Operand::Int(b)) => a.cmp(b),
        (Operand::Bool(a), Operand::Bool(b)) if !atom.op.is_order() => a.cmp(b),
        (Operand::Str(a), Operand::Str(b)) if !atom.op.is_order() => a.cmp(b),
        _ => return false,
    };
    match atom.op {
        CmpOp::Eq => ordering == Ordering::Equal,
        CmpOp::Ne => ordering != Ordering::Equal,
        CmpOp::Lt => ordering == Ordering::Less,
        CmpOp::Le => ordering != Ordering::Greater,
        CmpOp::Gt => ordering == Ordering::Greater,
        CmpOp::Ge => ordering != Ordering::Less,
    }
}
