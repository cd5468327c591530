//! The constraint language: quantified first-order formulas over navigations
//! with comparison atoms on integers, strings, booleans, object identity and
//! list sizes.

mod ast;
mod eval;
mod parser;
mod typecheck;

pub use ast::{Atom, CmpOp, Constraint, Expr, Navigation, Quantifier, SetExpr, Term};
pub use eval::{evaluate, evaluate_expr};
pub use parser::{parse_constraint, parse_expr, SyntaxError};
pub use typecheck::{
    check_expr, domain_class, op_supported, resolve_navigation, typecheck_constraint, NavStep, ResolvedNav, Scope,
    TypeError, TypedConstraint, ValueType,
};
