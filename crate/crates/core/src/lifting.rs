//! Lifting constraints from single variants to whole product lines.

use std::fmt;

use crate::binding::bind_symbolic;
use crate::constraint::{evaluate_expr, parse_expr, Expr, Quantifier, SetExpr, SyntaxError, TypedConstraint};
use crate::variability::{Configuration, ProductLine};

/// A constraint whose type quantifiers are guarded by `selected(v)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LiftedConstraint {
    root: Expr,
}

impl LiftedConstraint {
    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// Number of `selected` guards.
    pub fn guard_count(&self) -> usize {
        let mut n = 0;
        self.root.visit(&mut |e| {
            if matches!(e, Expr::Selected(_)) {
                n += 1;
            }
        });
        n
    }

    /// Removes the guards introduced by [`lift`].
    pub fn strip_guards(&self) -> Expr {
        strip(&self.root)
    }
}

impl fmt::Display for LiftedConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

fn lift_expr(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Atom(_) | Expr::Selected(_) => e.clone(),
        Expr::Quant { kind, var, domain, body } => {
            let body = lift_expr(body);
            let body = match (domain, kind) {
                (SetExpr::Type(_), Quantifier::Forall) => Expr::implies(Expr::selected(var), body),
                (SetExpr::Type(_), Quantifier::Exists) => Expr::and(Expr::selected(var), body),
                (SetExpr::Nav(_), _) => body,
            };
            Expr::Quant {
                kind: *kind,
                var: var.clone(),
                domain: domain.clone(),
                body: Box::new(body),
            }
        }
        Expr::Not(a) => Expr::not(lift_expr(a)),
        Expr::And(a, b) => Expr::and(lift_expr(a), lift_expr(b)),
        Expr::Or(a, b) => Expr::or(lift_expr(a), lift_expr(b)),
        Expr::Implies(a, b) => Expr::implies(lift_expr(a), lift_expr(b)),
    }
}

fn strip(e: &Expr) -> Expr {
    match e {
        Expr::Quant { kind, var, domain, body } => {
            let inner = match (domain, kind, body.as_ref()) {
                (SetExpr::Type(_), Quantifier::Forall, Expr::Implies(g, rest))
                | (SetExpr::Type(_), Quantifier::Exists, Expr::And(g, rest))
                    if **g == Expr::Selected(var.clone()) =>
                {
                    rest.as_ref()
                }
                _ => body.as_ref(),
            };
            Expr::Quant {
                kind: *kind,
                var: var.clone(),
                domain: domain.clone(),
                body: Box::new(strip(inner)),
            }
        }
        Expr::Not(a) => Expr::not(strip(a)),
        Expr::And(a, b) => Expr::and(strip(a), strip(b)),
        Expr::Or(a, b) => Expr::or(strip(a), strip(b)),
        Expr::Implies(a, b) => Expr::implies(strip(a), strip(b)),
        other => other.clone(),
    }
}

/// `c↑`: guards type quantifiers with `selected(v)`; navigation-set
/// quantifiers, connectives and atoms are rewritten homomorphically.
pub fn lift(c: &TypedConstraint) -> LiftedConstraint {
    LiftedConstraint {
        root: lift_expr(c.root()),
    }
}

/// Canonical text in the constraint syntax extended with `selected(v)`.
pub fn print_lifted(lc: &LiftedConstraint) -> String {
    lc.to_string()
}

/// Reads text produced by [`print_lifted`].
pub fn parse_lifted(text: &str) -> Result<LiftedConstraint, SyntaxError> {
    Ok(LiftedConstraint {
        root: parse_expr(text, true)?,
    })
}

/// Evaluates a lifted constraint on the product line itself for one
/// configuration: `selected(v)` reads the presence table and references to
/// deselected objects are treated as NONE.
pub fn evaluate_lifted(lc: &LiftedConstraint, pl: &ProductLine, k: &Configuration) -> bool {
    let g = bind_symbolic(pl, k);
    evaluate_expr(lc.root(), pl.metamodel(), &g, &|id| k.satisfies(pl.presence_of(id)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binding::bind;
    use crate::bundle::Bundle;
    use crate::constraint::{evaluate, parse_constraint, typecheck_constraint};
    use crate::variability::{enumerate_configurations, PresenceTable, DEFAULT_ENUMERATION_CAP};
    use std::path::Path;

    fn bundle(dir: &str) -> Bundle {
        Bundle::load_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(dir)).unwrap()
    }

    #[test]
    fn uniqueness_lifts_to_guarded_text() {
        let b = bundle("microl");
        let lc = lift(b.constraint("unique_function_names").unwrap());
        assert_eq!(
            print_lifted(&lc),
            "forall f1 in FunctionDefinition: selected(f1) => !exists f2 in FunctionDefinition: \
             selected(f2) && (f1 != f2 && f1.funName = f2.funName)"
        );
        assert_eq!(parse_lifted(&print_lifted(&lc)).unwrap(), lc);
        assert_eq!(lc.guard_count(), 2);
    }

    #[test]
    fn nav_set_quantifiers_stay_unguarded() {
        let b = bundle("microl");
        let tc = b.constraint("call_types_match").unwrap();
        let lc = lift(tc);
        assert_eq!(lc.guard_count(), 3);
        assert_eq!(&lc.strip_guards(), tc.root());

        let mm = b.product_line.metamodel();
        let only_nav = typecheck_constraint(
            &parse_constraint("forall c in FunctionCall: forall a in c.args: a.varName = \"x\"").unwrap(),
            mm,
        )
        .unwrap();
        let lifted = lift(&only_nav);
        assert_eq!(lifted.guard_count(), 1);
        let Expr::Quant { body, .. } = lifted.root() else { panic!() };
        let Expr::Implies(_, inner) = body.as_ref() else { panic!() };
        let Expr::Quant { body: nav_body, .. } = inner.as_ref() else { panic!() };
        assert!(matches!(nav_body.as_ref(), Expr::Atom(_)));
    }

    #[test]
    fn lifted_product_line_evaluation_matches_every_variant() {
        for dir in ["microl", "pen", "pen_faults/depl3_push", "pen_faults/depl4_twist", "pen_faults/screwhead_push"] {
            let b = bundle(dir);
            let pl = &b.product_line;
            for (name, tc) in &b.constraints {
                let lc = lift(tc);
                for k in enumerate_configurations(pl.feature_model(), DEFAULT_ENUMERATION_CAP).unwrap() {
                    let variant = bind(pl, &k);
                    assert_eq!(
                        evaluate_lifted(&lc, pl, &k),
                        evaluate(tc, pl.metamodel(), &variant.graph),
                        "{dir}/{name} at {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn trivial_presence_makes_lifting_transparent() {
        let b = bundle("microl");
        let pl = b.product_line.with_presence(PresenceTable::new()).unwrap();
        let k = enumerate_configurations(pl.feature_model(), DEFAULT_ENUMERATION_CAP).unwrap().remove(0);
        for (_, tc) in &b.constraints {
            assert_eq!(evaluate_lifted(&lift(tc), &pl, &k), evaluate(tc, pl.metamodel(), pl.model()));
        }
    }
}
