//! Synthetic product lines: small random ones for differential testing and
//! production-planning models at realistic scale.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraint::{
    parse_constraint, typecheck_constraint, CmpOp, Constraint, Expr, Navigation, SetExpr, Term, TypedConstraint,
};
use crate::meta::{Attribute, ClassBody, Metamodel};
use crate::model::{InstanceGraph, ModelObject, ObjectId, Value};
use crate::variability::{FeatureModel, PresenceTable, ProductLine, PropFormula};

/// Bounds for [`random_product_line`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomBounds {
    pub max_features: usize,
    pub max_objects: usize,
    pub max_classes: usize,
    pub max_depth: usize,
}

impl Default for RandomBounds {
    fn default() -> Self {
        RandomBounds {
            max_features: 8,
            max_objects: 30,
            max_classes: 3,
            max_depth: 4,
        }
    }
}

const STRINGS: &[&str] = &["a", "b", "", "q\"uote", "back\\slash", "\u{e9}t\u{e9}"];

/// Each class `Ck` has `n: int`, `s: string`, `f: bool`, `next: Cj` and
/// `items: Cj*`, with random targets.
fn random_metamodel(rng: &mut ChaCha8Rng, classes: usize) -> (Metamodel, Vec<(String, String, String)>) {
    let names: Vec<String> = (0..classes).map(|i| format!("C{i}")).collect();
    let mut mm = Metamodel::new();
    let mut schema = Vec::new();
    for name in &names {
        let next = names.choose(rng).expect("at least one class").clone();
        let items = names.choose(rng).expect("at least one class").clone();
        mm.insert_class(
            name.as_str(),
            ClassBody::new()
                .with("n", Attribute::one("int"))
                .with("s", Attribute::one("string"))
                .with("f", Attribute::one("bool"))
                .with("next", Attribute::one(next.as_str()))
                .with("items", Attribute::many(items.as_str())),
        );
        schema.push((name.clone(), next, items));
    }
    (mm, schema)
}

fn random_formula(rng: &mut ChaCha8Rng, features: &[String], depth: usize) -> PropFormula {
    if depth == 0 || rng.gen_bool(0.35) {
        return match rng.gen_range(0..12) {
            0 => PropFormula::True,
            1 => PropFormula::False,
            _ => PropFormula::var(features.choose(rng).expect("at least one feature").clone()),
        };
    }
    let a = random_formula(rng, features, depth - 1);
    match rng.gen_range(0..4) {
        0 => PropFormula::not(a),
        1 => PropFormula::and(a, random_formula(rng, features, depth - 1)),
        2 => PropFormula::or(a, random_formula(rng, features, depth - 1)),
        _ => PropFormula::implies(a, random_formula(rng, features, depth - 1)),
    }
}

/// A random product line within `bounds` plus a random constraint over it.
pub fn random_product_line(seed: u64, bounds: RandomBounds) -> (ProductLine, TypedConstraint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_count = rng.gen_range(1..=bounds.max_classes.max(1));
    let (mm, schema) = random_metamodel(&mut rng, class_count);

    let object_count = rng.gen_range(class_count..=bounds.max_objects.max(class_count));
    let mut ids_by_class: Vec<Vec<ObjectId>> = vec![Vec::new(); class_count];
    let mut order = Vec::with_capacity(object_count);
    for i in 0..object_count {
        // Every class gets at least one object so references are total.
        let class = if i < class_count { i } else { rng.gen_range(0..class_count) };
        let id = ObjectId::from(format!("o{i}"));
        ids_by_class[class].push(id.clone());
        order.push((class, id));
    }
    let class_index = |name: &str| schema.iter().position(|(c, _, _)| c == name).expect("known class");
    let mut g = InstanceGraph::new();
    for (class, id) in &order {
        let (name, next, items) = &schema[*class];
        let next_pool = &ids_by_class[class_index(next)];
        let items_pool = &ids_by_class[class_index(items)];
        let list_len = rng.gen_range(0..=3);
        let list: Vec<ObjectId> = (0..list_len)
            .map(|_| items_pool.choose(&mut rng).expect("non-empty extent").clone())
            .collect();
        g.insert(
            ModelObject::new(id.clone(), name.as_str())
                .with("n", Value::Int(rng.gen_range(-1..=2)))
                .with("s", Value::Str(STRINGS.choose(&mut rng).expect("non-empty").to_string()))
                .with("f", Value::Bool(rng.gen()))
                .with("next", Value::Ref(Some(next_pool.choose(&mut rng).expect("non-empty extent").clone())))
                .with("items", Value::List(list)),
        )
        .expect("fresh ids");
    }

    let feature_count = rng.gen_range(1..=bounds.max_features.max(1));
    let features: Vec<String> = (0..feature_count).map(|i| format!("F{i}")).collect();
    let conjuncts = rng.gen_range(0..=3);
    let formula = PropFormula::conjunction((0..conjuncts).map(|_| random_formula(&mut rng, &features, 2)));
    let fm = FeatureModel::new(features.clone(), formula).expect("generated names are valid");

    let mut presence = PresenceTable::new();
    for (_, id) in &order {
        if rng.gen_bool(0.6) {
            presence.insert(id.clone(), random_formula(&mut rng, &features, 2));
        }
    }
    let pl = ProductLine::new(mm, g, fm, presence).expect("generated product lines are well-formed");

    let mut gen = ConstraintGen {
        rng: &mut rng,
        schema: &schema,
        scope: Vec::new(),
        max_depth: bounds.max_depth,
    };
    let root = gen.quantifier(bounds.max_depth);
    let constraint = Constraint::new(root).expect("root is a quantifier");
    // Going through text also exercises the printer and parser.
    let reparsed = parse_constraint(&constraint.to_string()).expect("printed constraints parse");
    let typed = typecheck_constraint(&reparsed, pl.metamodel()).expect("generated constraints typecheck");
    (pl, typed)
}

struct ConstraintGen<'a> {
    rng: &'a mut ChaCha8Rng,
    schema: &'a [(String, String, String)],
    scope: Vec<(String, String)>,
    max_depth: usize,
}

impl ConstraintGen<'_> {
    fn next_of(&self, class: &str) -> &str {
        &self.schema.iter().find(|(c, _, _)| c == class).expect("known class").1
    }

    fn items_of(&self, class: &str) -> &str {
        &self.schema.iter().find(|(c, _, _)| c == class).expect("known class").2
    }

    /// All object navigations of up to two `next` steps from scope variables.
    fn object_navs(&self) -> Vec<(Navigation, String)> {
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (var, class) in self.scope.iter().rev() {
            // Shadowed variables are unreachable.
            if !seen.insert(var.clone()) {
                continue;
            }
            let mut path: Vec<String> = Vec::new();
            let mut current = class.clone();
            for _ in 0..3 {
                out.push((Navigation::new(var.clone(), path.clone()), current.clone()));
                path.push("next".into());
                current = self.next_of(&current).to_string();
            }
        }
        out
    }

    fn pick_nav(&mut self) -> Option<(Navigation, String)> {
        self.object_navs().choose(self.rng).cloned()
    }

    fn quantifier(&mut self, depth: usize) -> Expr {
        let nav_domain = if self.rng.gen_bool(0.4) {
            self.pick_nav().map(|(mut nav, class)| {
                nav.path.push("items".into());
                let target = self.items_of(&class).to_string();
                (SetExpr::Nav(nav), target)
            })
        } else {
            None
        };
        let (domain, class) = nav_domain.unwrap_or_else(|| {
            let class = self.schema.choose(self.rng).expect("non-empty schema").0.clone();
            (SetExpr::Type(class.clone()), class)
        });
        let var = ["x", "y", "z", "w"].choose(self.rng).expect("non-empty").to_string();
        self.scope.push((var.clone(), class));
        let body = self.expr(depth.saturating_sub(1));
        self.scope.pop();
        if self.rng.gen_bool(0.5) {
            Expr::forall(var, domain, body)
        } else {
            Expr::exists(var, domain, body)
        }
    }

    fn expr(&mut self, depth: usize) -> Expr {
        if depth == 0 {
            return self.leaf();
        }
        let quant_weight = if self.scope.len() < self.max_depth.min(3) { 3 } else { 0 };
        let choice = self.rng.gen_range(0..(9 + quant_weight));
        match choice {
            0 => Expr::not(self.expr(depth - 1)),
            1 | 2 => Expr::and(self.expr(depth - 1), self.expr(depth - 1)),
            3 | 4 => Expr::or(self.expr(depth - 1), self.expr(depth - 1)),
            5 | 6 => Expr::implies(self.expr(depth - 1), self.expr(depth - 1)),
            7 | 8 => self.leaf(),
            _ => self.quantifier(depth),
        }
    }

    fn leaf(&mut self) -> Expr {
        if self.rng.gen_range(0..10) == 0 {
            return Expr::Const(self.rng.gen());
        }
        match self.rng.gen_range(0..5) {
            0 | 1 => self.int_atom(),
            2 => {
                let op = *[CmpOp::Eq, CmpOp::Ne].choose(self.rng).expect("non-empty");
                let lhs = self.basic_term("s");
                let rhs = if self.rng.gen_bool(0.5) {
                    self.basic_term("s")
                } else {
                    Term::Str(STRINGS.choose(self.rng).expect("non-empty").to_string())
                };
                Expr::cmp(op, lhs, rhs)
            }
            3 => {
                let op = *[CmpOp::Eq, CmpOp::Ne].choose(self.rng).expect("non-empty");
                let lhs = self.basic_term("f");
                let rhs = if self.rng.gen_bool(0.5) { self.basic_term("f") } else { Term::Bool(self.rng.gen()) };
                Expr::cmp(op, lhs, rhs)
            }
            _ => self.object_atom(),
        }
    }

    fn basic_term(&mut self, attr: &str) -> Term {
        let (mut nav, _) = self.pick_nav().expect("leaves are generated inside quantifiers");
        nav.path.push(attr.into());
        Term::Nav(nav)
    }

    fn int_term(&mut self) -> Term {
        match self.rng.gen_range(0..3) {
            0 => Term::Int(self.rng.gen_range(-1..=3)),
            1 => self.basic_term("n"),
            _ => {
                let (mut nav, _) = self.pick_nav().expect("inside a quantifier");
                nav.path.push("items".into());
                Term::Size(nav)
            }
        }
    }

    fn int_atom(&mut self) -> Expr {
        let op = *CmpOp::ALL.choose(self.rng).expect("non-empty");
        let lhs = self.int_term();
        let rhs = self.int_term();
        Expr::cmp(op, lhs, rhs)
    }

    fn object_atom(&mut self) -> Expr {
        let navs = self.object_navs();
        let (lhs, class) = navs.choose(self.rng).expect("inside a quantifier").clone();
        let same: Vec<&Navigation> = navs.iter().filter(|(_, c)| *c == class).map(|(n, _)| n).collect();
        let rhs = (*same.choose(self.rng).expect("lhs itself qualifies")).clone();
        let op = *[CmpOp::Eq, CmpOp::Ne].choose(self.rng).expect("non-empty");
        Expr::cmp(op, Term::Nav(lhs), Term::Nav(rhs))
    }
}

/// Shape of a generated production-planning product line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SfitSize {
    /// Alternative groups; each contributes a mandatory parent feature and
    /// `alternatives` mutually exclusive optional features.
    pub groups: usize,
    pub alternatives: usize,
    /// Optional features outside any group.
    pub free_optional: usize,
    /// Variable parts per optional feature, each with its own step.
    pub parts_per_feature: usize,
    /// Non-variable part/step/deployment triples.
    pub common_parts: usize,
    pub machines: usize,
}

impl SfitSize {
    /// 28 features (21 optional), 1227 objects, 105 presence conditions.
    pub const TABLE_SCALE: SfitSize = SfitSize {
        groups: 6,
        alternatives: 3,
        free_optional: 3,
        parts_per_feature: 2,
        common_parts: 352,
        machines: 20,
    };

    /// 4 features (2 optional), 82 objects, 22 presence conditions.
    pub const PEN_SCALE: SfitSize = SfitSize {
        groups: 1,
        alternatives: 2,
        free_optional: 0,
        parts_per_feature: 5,
        common_parts: 13,
        machines: 4,
    };

    pub fn feature_count(&self) -> usize {
        1 + self.groups * (1 + self.alternatives) + self.free_optional
    }

    pub fn optional_count(&self) -> usize {
        self.groups * self.alternatives + self.free_optional
    }
}

pub const SFIT_CONSTRAINTS: [(&str, &str); 3] = [
    ("steps_deployed", "forall s in ProductionStep: exists d in Deployment: d.step = s"),
    (
        "parts_assembled",
        "forall prod in Product: forall part in prod.parts: exists step in ProductionStep: step.assembledPart = part",
    ),
    (
        "deployment_capability",
        "forall d in Deployment: forall s in ProductionStep: d.step = s => s.requiredOp.name = d.machine.providedOp.name \
         && (s.requiredOp.maxValue >= d.machine.providedOp.minValue || s.requiredOp.minValue <= d.machine.providedOp.maxValue)",
    ),
];

pub fn sfit_metamodel() -> Metamodel {
    Metamodel::new()
        .with_class(
            "Product",
            ClassBody::new()
                .with("name", Attribute::one("string"))
                .with("parts", Attribute::many("Part")),
        )
        .with_class("Part", ClassBody::new().with("name", Attribute::one("string")))
        .with_class(
            "ProductionStep",
            ClassBody::new()
                .with("name", Attribute::one("string"))
                .with("assembledPart", Attribute::one("Part"))
                .with("requiredOp", Attribute::one("Operation")),
        )
        .with_class(
            "Machine",
            ClassBody::new()
                .with("name", Attribute::one("string"))
                .with("providedOp", Attribute::one("Operation")),
        )
        .with_class(
            "Operation",
            ClassBody::new()
                .with("name", Attribute::one("string"))
                .with("minValue", Attribute::one("int"))
                .with("maxValue", Attribute::one("int")),
        )
        .with_class(
            "Deployment",
            ClassBody::new()
                .with("step", Attribute::one("ProductionStep"))
                .with("machine", Attribute::one("Machine")),
        )
}

/// A production-planning product line of the given size. With `valid`
/// false, one deployment's presence condition names a sibling alternative so
/// that a step goes undeployed in some variant.
pub fn sfit_product_line(size: SfitSize, seed: u64, valid: bool) -> (ProductLine, Vec<(String, TypedConstraint)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mm = sfit_metamodel();

    let mut features = vec!["Root".to_string()];
    let mut conjuncts = vec![PropFormula::var("Root")];
    let mut optional: Vec<(String, Vec<String>)> = Vec::new();
    for g in 0..size.groups {
        let parent = format!("Group{g}");
        features.push(parent.clone());
        conjuncts.push(PropFormula::implies(PropFormula::var(&parent), PropFormula::var("Root")));
        conjuncts.push(PropFormula::implies(PropFormula::var("Root"), PropFormula::var(&parent)));
        let alts: Vec<String> = (0..size.alternatives).map(|a| format!("G{g}Alt{a}")).collect();
        for alt in &alts {
            features.push(alt.clone());
            conjuncts.push(PropFormula::implies(PropFormula::var(alt), PropFormula::var(&parent)));
        }
        if let Some(any) = alts.iter().map(PropFormula::var).reduce(PropFormula::or) {
            conjuncts.push(PropFormula::implies(PropFormula::var(&parent), any));
        }
        for (i, a) in alts.iter().enumerate() {
            for b in &alts[i + 1..] {
                conjuncts.push(PropFormula::not(PropFormula::and(PropFormula::var(a), PropFormula::var(b))));
            }
        }
        for alt in &alts {
            let siblings = alts.iter().filter(|s| *s != alt).cloned().collect();
            optional.push((alt.clone(), siblings));
        }
    }
    for f in 0..size.free_optional {
        let name = format!("Option{f}");
        features.push(name.clone());
        conjuncts.push(PropFormula::implies(PropFormula::var(&name), PropFormula::var("Root")));
        optional.push((name, Vec::new()));
    }
    let fm = FeatureModel::new(features, PropFormula::conjunction(conjuncts)).expect("generated names are valid");

    let op_kinds = ["grasp", "screw", "press", "glue"];
    let mut g = InstanceGraph::new();
    let mut presence = PresenceTable::new();
    let mut part_ids = Vec::new();
    fn add(g: &mut InstanceGraph, o: ModelObject) {
        g.insert(o).expect("generated ids are unique");
    }

    let product = ModelObject::new("Product0", "Product").with("name", Value::Str("Product0".into()));
    let mut machines = Vec::new();
    for m in 0..size.machines {
        let kind = op_kinds[m % op_kinds.len()];
        let op = format!("Prov{m}");
        add(
            &mut g,
            ModelObject::new(op.as_str(), "Operation")
                .with("name", Value::Str(kind.into()))
                .with("minValue", Value::Int(0))
                .with("maxValue", Value::Int(10)),
        );
        let machine = format!("Machine{m}");
        add(
            &mut g,
            ModelObject::new(machine.as_str(), "Machine")
                .with("name", Value::Str(machine.clone()))
                .with("providedOp", Value::reference(op.as_str())),
        );
        machines.push((machine, kind));
    }
    let mut required_ops = Vec::new();
    for (i, kind) in op_kinds.iter().enumerate() {
        let op = format!("Req{i}");
        let low = rng.gen_range(1..=3);
        add(
            &mut g,
            ModelObject::new(op.as_str(), "Operation")
                .with("name", Value::Str(kind.to_string()))
                .with("minValue", Value::Int(low))
                .with("maxValue", Value::Int(low + rng.gen_range(1..=4))),
        );
        required_ops.push(op);
    }

    let triple = |g: &mut InstanceGraph,
                      presence: &mut PresenceTable,
                      rng: &mut ChaCha8Rng,
                      name: String,
                      pc: Option<(&str, bool)>,
                      deployment_pc: Option<PropFormula>| {
        let kind = rng.gen_range(0..op_kinds.len());
        let machine = machines
            .iter()
            .filter(|(_, k)| *k == op_kinds[kind])
            .map(|(m, _)| m.clone())
            .collect::<Vec<_>>()
            .choose(rng)
            .cloned()
            .expect("every operation kind has a machine");
        let part = format!("{name}Part");
        let step = format!("{name}Step");
        let depl = format!("{name}Depl");
        add(g, ModelObject::new(part.as_str(), "Part").with("name", Value::Str(part.clone())));
        add(
            g,
            ModelObject::new(step.as_str(), "ProductionStep")
                .with("name", Value::Str(step.clone()))
                .with("assembledPart", Value::reference(part.as_str()))
                .with("requiredOp", Value::reference(required_ops[kind].as_str())),
        );
        add(
            g,
            ModelObject::new(depl.as_str(), "Deployment")
                .with("step", Value::reference(step.as_str()))
                .with("machine", Value::reference(machine.as_str())),
        );
        if let Some((feature, _)) = pc {
            presence.insert(part.as_str(), PropFormula::var(feature));
            presence.insert(step.as_str(), PropFormula::var(feature));
        }
        if let Some(f) = deployment_pc {
            presence.insert(depl.as_str(), f);
        }
        part
    };

    for c in 0..size.common_parts {
        part_ids.push(triple(&mut g, &mut presence, &mut rng, format!("Common{c}"), None, None));
    }
    let mut faulted = valid;
    for (feature, siblings) in &optional {
        for p in 0..size.parts_per_feature {
            let deployment_pc = (p == 0).then(|| match siblings.first() {
                Some(sibling) if !faulted => {
                    faulted = true;
                    PropFormula::var(sibling)
                }
                _ => PropFormula::var(feature),
            });
            part_ids.push(triple(
                &mut g,
                &mut presence,
                &mut rng,
                format!("{feature}V{p}"),
                Some((feature, true)),
                deployment_pc,
            ));
        }
    }
    add(&mut g, product.with("parts", Value::list(part_ids)));

    let pl = ProductLine::new(mm, g, fm, presence).expect("generated product lines are well-formed");
    let constraints = SFIT_CONSTRAINTS
        .iter()
        .map(|(name, text)| {
            let c = parse_constraint(text).expect("fixed constraints parse");
            (name.to_string(), typecheck_constraint(&c, pl.metamodel()).expect("fixed constraints typecheck"))
        })
        .collect();
    (pl, constraints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{oracle_check, OracleVerdict};
    use std::collections::BTreeSet;

    fn productions(e: &Expr, out: &mut BTreeSet<String>) {
        e.visit(&mut |node| {
            let label = match node {
                Expr::Const(_) => "const".to_string(),
                Expr::Selected(_) => "selected".to_string(),
                Expr::Not(_) => "not".to_string(),
                Expr::And(..) => "and".to_string(),
                Expr::Or(..) => "or".to_string(),
                Expr::Implies(..) => "implies".to_string(),
                Expr::Quant { kind, domain, .. } => format!(
                    "{}-{}",
                    kind.keyword(),
                    if matches!(domain, SetExpr::Type(_)) { "type" } else { "nav" }
                ),
                Expr::Atom(a) => {
                    for t in [&a.lhs, &a.rhs] {
                        out.insert(
                            match t {
                                Term::Nav(n) if n.path.len() >= 2 => "term-nav-deep",
                                Term::Nav(n) if n.path.is_empty() => "term-var",
                                Term::Nav(_) => "term-nav",
                                Term::Size(_) => "term-size",
                                Term::Int(_) => "term-int",
                                Term::Str(_) => "term-str",
                                Term::Bool(_) => "term-bool",
                            }
                            .to_string(),
                        );
                    }
                    format!("op{}", a.op.symbol())
                }
            };
            out.insert(label);
        });
    }

    #[test]
    fn random_constraints_cover_the_grammar() {
        let mut seen = BTreeSet::new();
        for seed in 0..300 {
            let (_, c) = random_product_line(seed, RandomBounds::default());
            productions(c.root(), &mut seen);
        }
        for expected in [
            "const", "not", "and", "or", "implies", "forall-type", "exists-type", "forall-nav", "exists-nav", "op=",
            "op!=", "op<", "op<=", "op>", "op>=", "term-nav-deep", "term-var", "term-nav", "term-size", "term-int",
            "term-str", "term-bool",
        ] {
            assert!(seen.contains(expected), "missing {expected}");
        }
    }

    #[test]
    fn random_product_lines_respect_bounds() {
        for seed in 0..100 {
            let (pl, _) = random_product_line(seed, RandomBounds::default());
            assert!(pl.feature_model().features().len() <= 8);
            assert!(pl.model().len() <= 30);
            assert!(pl.metamodel().class_names().count() <= 3);
        }
        let a = random_product_line(7, RandomBounds::default());
        let b = random_product_line(7, RandomBounds::default());
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn table_scale_dimensions() {
        let (pl, constraints) = sfit_product_line(SfitSize::TABLE_SCALE, 1, true);
        assert_eq!(pl.feature_model().features().len(), 28);
        assert_eq!(SfitSize::TABLE_SCALE.optional_count(), 21);
        assert_eq!(pl.model().len(), 1227);
        assert_eq!(pl.presence().len(), 105);
        assert_eq!(constraints.len(), 3);
    }

    #[test]
    fn pen_scale_is_valid_and_its_fault_is_caught() {
        let (pl, constraints) = sfit_product_line(SfitSize::PEN_SCALE, 3, true);
        assert_eq!(pl.model().len(), 82);
        assert_eq!(pl.feature_model().features().len(), SfitSize::PEN_SCALE.feature_count());
        for (name, c) in &constraints {
            assert_eq!(oracle_check(&pl, c).unwrap().kind(), "all-variants-satisfy", "{name}");
        }
        let (bad, constraints) = sfit_product_line(SfitSize::PEN_SCALE, 3, false);
        assert!(matches!(oracle_check(&bad, &constraints[0].1).unwrap(), OracleVerdict::Violation(_)));
    }
}
