use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::symbols::{feature_symbols, SymbolTable};
use crate::constraint::{
    domain_class, op_supported, resolve_navigation, Atom, CmpOp, Expr, Navigation, Quantifier, Scope, SetExpr, Term,
    TypeError, ValueType,
};
use crate::lifting::LiftedConstraint;
use crate::meta::{BasicType, Metamodel};
use crate::model::{ObjectId, Value};
use crate::variability::{ProductLine, PropFormula};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    Features,
    Datatypes,
    Selection,
    Slots,
    /// Membership of every non-empty list slot, spelled out per element and
    /// triggered on `seq.contains`. Implied by the slot definitions.
    ListFacts,
    Constraint,
    Check,
}

impl Section {
    pub const ALL: [Section; 7] = [
        Section::Features,
        Section::Datatypes,
        Section::Selection,
        Section::Slots,
        Section::ListFacts,
        Section::Constraint,
        Section::Check,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Section::Features => "features",
            Section::Datatypes => "datatypes",
            Section::Selection => "selection",
            Section::Slots => "slots",
            Section::ListFacts => "list facts",
            Section::Constraint => "constraint",
            Section::Check => "check",
        }
    }
}

/// An SMT-LIB v2 script split into sections, one command per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtScript {
    sections: Vec<(Section, Vec<String>)>,
    features: Vec<(String, String)>,
}

impl SmtScript {
    pub fn section(&self, section: Section) -> &[String] {
        self.sections
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, lines)| lines.as_slice())
            .unwrap_or(&[])
    }

    /// The feature declarations and feature-model assertions.
    pub fn feature_block(&self) -> String {
        self.section(Section::Features).join("\n")
    }

    /// `(feature, symbol)` pairs in feature-model order.
    pub fn feature_symbols(&self) -> &[(String, String)] {
        &self.features
    }

    pub fn text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SmtScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (section, lines)) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "; {}", section.name())?;
            for line in lines {
                writeln!(f, "{line}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("unsupported atom `{atom}`: {reason}")]
    UnsupportedAtom { atom: String, reason: String },
    #[error("lifted constraint does not match the metamodel: {0}")]
    Type(#[from] TypeError),
}

/// Writes a string literal in SMT-LIB 2.6 syntax.
pub fn string_literal(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\"\""),
            '\\' => out.push_str("\\u{5c}"),
            ' '..='~' => out.push(c),
            other => out.push_str(&format!("\\u{{{:x}}}", other as u32)),
        }
    }
    out.push('"');
    out
}

pub fn int_literal(i: i64) -> String {
    if i < 0 {
        format!("(- {})", i.unsigned_abs())
    } else {
        i.to_string()
    }
}

struct Names {
    sort: HashMap<String, String>,
    none: HashMap<String, String>,
    selected: HashMap<String, String>,
    slot: HashMap<(String, String), String>,
    object: HashMap<ObjectId, String>,
}

impl Names {
    fn allocate(pl: &ProductLine, table: &mut SymbolTable) -> Names {
        let mm = pl.metamodel();
        let mut names = Names {
            sort: HashMap::new(),
            none: HashMap::new(),
            selected: HashMap::new(),
            slot: HashMap::new(),
            object: HashMap::new(),
        };
        for class in mm.class_names() {
            names.sort.insert(class.to_string(), table.fresh(class));
        }
        for class in mm.class_names() {
            names.none.insert(class.to_string(), table.fresh(&format!("NONE_{class}")));
        }
        for o in pl.model().objects() {
            names.object.insert(o.id.clone(), table.fresh(o.id.as_str()));
        }
        for class in mm.class_names() {
            names.selected.insert(class.to_string(), table.fresh(&format!("selected_{class}")));
        }
        for (class, body) in mm.classes() {
            for (attr, _) in body.attributes() {
                names
                    .slot
                    .insert((class.to_string(), attr.to_string()), table.fresh(&format!("{class}_{attr}")));
            }
        }
        names
    }

    fn slot(&self, class: &str, attr: &str) -> &str {
        &self.slot[&(class.to_string(), attr.to_string())]
    }
}

fn flatten<'a>(f: &'a PropFormula, same: &dyn Fn(&'a PropFormula) -> Option<(&'a PropFormula, &'a PropFormula)>, out: &mut Vec<&'a PropFormula>) {
    match same(f) {
        Some((a, b)) => {
            flatten(a, same, out);
            flatten(b, same, out);
        }
        None => out.push(f),
    }
}

fn formula(f: &PropFormula, features: &HashMap<&str, &str>) -> String {
    let nary = |op: &str, parts: Vec<&PropFormula>| {
        let inner: Vec<String> = parts.into_iter().map(|p| formula(p, features)).collect();
        format!("({op} {})", inner.join(" "))
    };
    match f {
        PropFormula::Var(v) => features[v.as_str()].to_string(),
        PropFormula::True => "true".into(),
        PropFormula::False => "false".into(),
        PropFormula::Not(a) => format!("(not {})", formula(a, features)),
        PropFormula::And(..) => {
            let mut parts = Vec::new();
            flatten(f, &|g| match g {
                PropFormula::And(a, b) => Some((a, b)),
                _ => None,
            }, &mut parts);
            nary("and", parts)
        }
        PropFormula::Or(..) => {
            let mut parts = Vec::new();
            flatten(f, &|g| match g {
                PropFormula::Or(a, b) => Some((a, b)),
                _ => None,
            }, &mut parts);
            nary("or", parts)
        }
        PropFormula::Implies(a, b) => format!("(=> {} {})", formula(a, features), formula(b, features)),
    }
}

fn sort_of(target: &str, names: &Names) -> String {
    match BasicType::from_name(target) {
        Some(BasicType::Int) => "Int".into(),
        Some(BasicType::Bool) => "Bool".into(),
        Some(BasicType::String) => "String".into(),
        None => names.sort[target].clone(),
    }
}

fn default_of(target: &str, many: bool, names: &Names) -> String {
    if many {
        return format!("(as seq.empty (Seq {}))", sort_of(target, names));
    }
    match BasicType::from_name(target) {
        Some(BasicType::Int) => "0".into(),
        Some(BasicType::Bool) => "false".into(),
        Some(BasicType::String) => "\"\"".into(),
        None => names.none[target].clone(),
    }
}

fn nary(op: &str, parts: Vec<String>, unit: &str) -> String {
    match parts.len() {
        0 => unit.to_string(),
        1 => parts.into_iter().next().expect("one part"),
        _ => format!("({op} {})", parts.join(" ")),
    }
}

/// Membership in the list `term` holding `ids`.
fn membership_fact(term: &str, target: &str, ids: &[ObjectId], names: &Names, elem: &str) -> String {
    let selected = &names.selected[target];
    let mut seen = Vec::new();
    for id in ids {
        if !seen.contains(&id) {
            seen.push(id);
        }
    }
    let members = seen
        .iter()
        .map(|id| {
            let sym = &names.object[*id];
            format!("(and ({selected} {sym}) (= {elem} {sym}))")
        })
        .collect();
    let contains = format!("(seq.contains {term} (seq.unit {elem}))");
    format!(
        "(assert (forall (({elem} {})) (! (= {contains} {}) :pattern ({contains}))))",
        names.sort[target],
        nary("or", members, "false")
    )
}

/// Translates a product line and a lifted constraint into an SMT-LIB script
/// whose satisfiability witnesses a violating configuration.
pub fn emit_smt(pl: &ProductLine, lc: &LiftedConstraint) -> Result<SmtScript, EmitError> {
    let mm = pl.metamodel();
    let g = pl.model();
    let mut table = SymbolTable::new();
    let features = feature_symbols(&mut table, pl.feature_model());
    let names = Names::allocate(pl, &mut table);
    let feature_map: HashMap<&str, &str> = features.iter().map(|(f, s)| (f.as_str(), s.as_str())).collect();

    let mut feature_lines: Vec<String> = features
        .iter()
        .map(|(_, s)| format!("(declare-const {s} Bool)"))
        .collect();
    for conjunct in pl.feature_model().formula().conjuncts() {
        feature_lines.push(match conjunct {
            PropFormula::Var(v) => format!("(assert (= {} true))", feature_map[v.as_str()]),
            other => format!("(assert {})", formula(other, &feature_map)),
        });
    }

    let mut datatypes = Vec::new();
    for class in mm.class_names() {
        let mut members: Vec<&str> = g.extent(class).iter().map(|id| names.object[id].as_str()).collect();
        members.push(&names.none[class]);
        datatypes.push(format!(
            "(declare-datatypes () (({} {})))",
            names.sort[class],
            members.join(" ")
        ));
    }

    let mut selection = Vec::new();
    for class in mm.class_names() {
        let sort = &names.sort[class];
        let selected = &names.selected[class];
        selection.push(format!("(declare-fun {selected} ({sort}) Bool)"));
        for id in g.extent(class) {
            selection.push(format!(
                "(assert (= ({selected} {}) {}))",
                names.object[id],
                formula(pl.presence_of(id), &feature_map)
            ));
        }
        selection.push(format!("(assert (= ({selected} {}) false))", names.none[class]));
    }

    let guarded = |target: &str, id: &ObjectId| {
        let sym = &names.object[id];
        format!("(ite ({} {sym}) {sym} {})", names.selected[target], names.none[target])
    };
    let elem = table.fresh("elem");
    let mut slots = Vec::new();
    let mut list_facts = Vec::new();
    for (class, body) in mm.classes() {
        let sort = &names.sort[class];
        for (attr, declared) in body.attributes() {
            let fun = names.slot(class, attr);
            let target = declared.target.as_str();
            let many = declared.is_many();
            let range = if many {
                format!("(Seq {})", sort_of(target, &names))
            } else {
                sort_of(target, &names)
            };
            slots.push(format!("(declare-fun {fun} ({sort}) {range})"));
            for id in g.extent(class) {
                let object = g.get(id.as_str()).expect("extent ids are registered");
                let rhs = match object.slot(attr) {
                    Some(Value::Int(i)) => int_literal(*i),
                    Some(Value::Bool(b)) => b.to_string(),
                    Some(Value::Str(s)) => string_literal(s),
                    Some(Value::Ref(Some(t))) => guarded(target, t),
                    Some(Value::List(ids)) => {
                        if !ids.is_empty() {
                            list_facts.push(membership_fact(&format!("({fun} {})", names.object[id]), target, ids, &names, &elem));
                        }
                        let empty = default_of(target, true, &names);
                        let units: Vec<String> = ids
                            .iter()
                            .map(|t| {
                                let sym = &names.object[t];
                                format!("(ite ({} {sym}) (seq.unit {sym}) {empty})", names.selected[target])
                            })
                            .collect();
                        match units.len() {
                            0 => empty,
                            1 => units.into_iter().next().expect("one element"),
                            _ => format!("(seq.++ {})", units.join(" ")),
                        }
                    }
                    Some(Value::Ref(None)) | None => default_of(target, many, &names),
                };
                slots.push(format!("(assert (= ({fun} {}) {rhs}))", names.object[id]));
            }
            slots.push(format!(
                "(assert (= ({fun} {}) {}))",
                names.none[class],
                default_of(target, many, &names)
            ));
        }
    }

    let mut translator = Translator {
        mm,
        names: &names,
        table: &mut table,
        scope: Scope::new(),
        vars: Vec::new(),
    };
    let body = translator.expr(lc.root())?;
    let constraint = vec![format!("(assert (not {body}))")];
    let check = vec!["(check-sat)".to_string(), "(get-model)".to_string()];

    Ok(SmtScript {
        sections: vec![
            (Section::Features, feature_lines),
            (Section::Datatypes, datatypes),
            (Section::Selection, selection),
            (Section::Slots, slots),
            (Section::ListFacts, list_facts),
            (Section::Constraint, constraint),
            (Section::Check, check),
        ],
        features,
    })
}

struct Translator<'a> {
    mm: &'a Metamodel,
    names: &'a Names,
    table: &'a mut SymbolTable,
    scope: Scope,
    vars: Vec<(String, String)>,
}

impl Translator<'_> {
    fn var(&self, name: &str) -> Result<&str, TypeError> {
        self.vars
            .iter()
            .rev()
            .find(|(v, _)| v == name)
            .map(|(_, s)| s.as_str())
            .ok_or_else(|| TypeError::UnboundVariable(name.to_string()))
    }

    fn expr(&mut self, e: &Expr) -> Result<String, EmitError> {
        Ok(match e {
            Expr::Const(b) => b.to_string(),
            Expr::Selected(v) => {
                let class = self
                    .scope
                    .lookup(v)
                    .ok_or_else(|| TypeError::UnboundVariable(v.clone()))?;
                format!("({} {})", self.names.selected[class], self.var(v)?)
            }
            Expr::Not(a) => format!("(not {})", self.expr(a)?),
            Expr::And(a, b) => format!("(and {} {})", self.expr(a)?, self.expr(b)?),
            Expr::Or(a, b) => format!("(or {} {})", self.expr(a)?, self.expr(b)?),
            Expr::Implies(a, b) => format!("(=> {} {})", self.expr(a)?, self.expr(b)?),
            Expr::Atom(atom) => self.atom(atom)?,
            Expr::Quant { kind, var, domain, body } => {
                let class = domain_class(self.mm, &self.scope, domain)?;
                let membership = match domain {
                    SetExpr::Type(_) => None,
                    SetExpr::Nav(nav) => Some(self.nav(nav)?.0),
                };
                let sym = self.table.fresh(var);
                self.scope.push(var, &class);
                self.vars.push((var.clone(), sym.clone()));
                let inner = self.expr(body);
                self.scope.pop();
                self.vars.pop();
                let inner = inner?;
                let sort = &self.names.sort[&class];
                let inner = match (membership, kind) {
                    (None, _) => inner,
                    (Some(list), Quantifier::Forall) => {
                        format!("(=> (seq.contains {list} (seq.unit {sym})) {inner})")
                    }
                    (Some(list), Quantifier::Exists) => {
                        format!("(and (seq.contains {list} (seq.unit {sym})) {inner})")
                    }
                };
                format!("({} (({sym} {sort})) {inner})", kind.keyword())
            }
        })
    }

    /// Translates a navigation; also returns the non-NONE guard on the
    /// object owning the last slot, when that object is itself navigated to.
    fn nav(&self, nav: &Navigation) -> Result<(String, Option<String>, ValueType), EmitError> {
        let resolved = resolve_navigation(self.mm, &self.scope, nav)?;
        let mut term = self.var(&nav.var)?.to_string();
        let mut guard = None;
        let last = resolved.steps.len();
        for (i, step) in resolved.steps.iter().enumerate() {
            if i + 1 == last && i > 0 {
                guard = Some(format!("(not (= {term} {}))", self.names.none[&step.owner]));
            }
            term = format!("({} {term})", self.names.slot(&step.owner, &step.attribute));
        }
        Ok((term, guard, resolved.result))
    }

    fn term(&self, t: &Term) -> Result<(String, Option<String>, ValueType), EmitError> {
        Ok(match t {
            Term::Nav(nav) => self.nav(nav)?,
            Term::Size(nav) => {
                let (list, guard, _) = self.nav(nav)?;
                (format!("(seq.len {list})"), guard, ValueType::Int)
            }
            Term::Int(i) => (int_literal(*i), None, ValueType::Int),
            Term::Bool(b) => (b.to_string(), None, ValueType::Bool),
            Term::Str(s) => (string_literal(s), None, ValueType::Str),
        })
    }

    fn atom(&self, atom: &Atom) -> Result<String, EmitError> {
        let (lhs, lhs_guard, lhs_ty) = self.term(&atom.lhs)?;
        let (rhs, rhs_guard, rhs_ty) = self.term(&atom.rhs)?;
        let unsupported = |reason: String| EmitError::UnsupportedAtom {
            atom: atom.to_string(),
            reason,
        };
        if lhs_ty != rhs_ty {
            return Err(unsupported(format!("operands of type {lhs_ty} and {rhs_ty}")));
        }
        if !op_supported(atom.op, &lhs_ty) {
            return Err(unsupported(format!("`{}` is not defined on {lhs_ty}", atom.op.symbol())));
        }
        let core = match atom.op {
            CmpOp::Eq => format!("(= {lhs} {rhs})"),
            CmpOp::Ne => format!("(not (= {lhs} {rhs}))"),
            CmpOp::Lt => format!("(< {lhs} {rhs})"),
            CmpOp::Le => format!("(<= {lhs} {rhs})"),
            CmpOp::Gt => format!("(> {lhs} {rhs})"),
            CmpOp::Ge => format!("(>= {lhs} {rhs})"),
        };
        // Object identity treats NONE as an ordinary value.
        if matches!(lhs_ty, ValueType::Object(_)) {
            return Ok(core);
        }
        let guards: Vec<String> = [lhs_guard, rhs_guard].into_iter().flatten().collect();
        Ok(if guards.is_empty() {
            core
        } else {
            format!("(and {} {core})", guards.join(" "))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::Bundle;
    use crate::lifting::lift;
    use std::path::Path;

    fn bundle(dir: &str) -> Bundle {
        Bundle::load_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(dir)).unwrap()
    }

    fn script(dir: &str, name: &str) -> SmtScript {
        let b = bundle(dir);
        emit_smt(&b.product_line, &lift(b.constraint(name).unwrap())).unwrap()
    }

    #[test]
    fn pen_feature_block() {
        let s = script("pen", "steps_deployed");
        assert_eq!(
            s.section(Section::Features),
            [
                "(declare-const PenFeatures Bool)",
                "(declare-const OpenMechanism Bool)",
                "(declare-const TwistToOpen Bool)",
                "(declare-const PushToOpen Bool)",
                "(assert (=> OpenMechanism PenFeatures))",
                "(assert (=> OpenMechanism (or PushToOpen TwistToOpen)))",
                "(assert (=> PushToOpen OpenMechanism))",
                "(assert (=> TwistToOpen OpenMechanism))",
                "(assert (=> TwistToOpen (not PushToOpen)))",
                "(assert (=> PushToOpen (not TwistToOpen)))",
                "(assert (=> PenFeatures OpenMechanism))",
                "(assert (= PenFeatures true))",
            ]
        );
    }

    #[test]
    fn pen_part_encoding() {
        let s = script("pen", "parts_assembled");
        let datatypes = s.section(Section::Datatypes);
        assert!(datatypes.contains(&"(declare-datatypes () ((Part BasePen PushButton TwistableHead NONE_Part)))".to_string()));
        let selection = s.section(Section::Selection);
        for line in [
            "(declare-fun selected_Part (Part) Bool)",
            "(assert (= (selected_Part BasePen) true))",
            "(assert (= (selected_Part PushButton) PushToOpen))",
            "(assert (= (selected_Part TwistableHead) TwistToOpen))",
            "(assert (= (selected_Part NONE_Part) false))",
        ] {
            assert!(selection.contains(&line.to_string()), "{line}");
        }
        let slots = s.section(Section::Slots);
        assert!(slots.contains(
            &"(assert (= (Product_parts Pen) (seq.++ \
              (ite (selected_Part BasePen) (seq.unit BasePen) (as seq.empty (Seq Part))) \
              (ite (selected_Part PushButton) (seq.unit PushButton) (as seq.empty (Seq Part))) \
              (ite (selected_Part TwistableHead) (seq.unit TwistableHead) (as seq.empty (Seq Part))))))"
                .to_string()
        ));
        assert!(slots.contains(
            &"(assert (= (Deployment_step Depl1) (ite (selected_ProductionStep PlaceBase) PlaceBase NONE_ProductionStep)))"
                .to_string()
        ));
        assert!(slots.contains(&"(assert (= (Operation_minValue NONE_Operation) 0))".to_string()));
    }

    #[test]
    fn list_membership_is_spelled_out() {
        let s = script("pen", "parts_assembled");
        assert_eq!(
            s.section(Section::ListFacts),
            ["(assert (forall ((elem Part)) (! (= (seq.contains (Product_parts Pen) (seq.unit elem)) \
              (or (and (selected_Part BasePen) (= elem BasePen)) (and (selected_Part PushButton) (= elem PushButton)) \
              (and (selected_Part TwistableHead) (= elem TwistableHead)))) \
              :pattern ((seq.contains (Product_parts Pen) (seq.unit elem))))))"]
        );
    }

    #[test]
    fn negated_lifted_constraint() {
        let s = script("pen", "steps_deployed");
        assert_eq!(
            s.section(Section::Constraint),
            ["(assert (not (forall ((s ProductionStep)) (=> (selected_ProductionStep s) \
              (exists ((d Deployment)) (and (selected_Deployment d) (= (Deployment_step d) s)))))))"]
        );
        let s = script("pen", "parts_assembled");
        assert!(s.section(Section::Constraint)[0]
            .contains("(forall ((part Part)) (=> (seq.contains (Product_parts prod) (seq.unit part))"));
        assert_eq!(s.section(Section::Check), ["(check-sat)", "(get-model)"]);
    }

    #[test]
    fn basic_atoms_through_navigation_are_guarded() {
        let s = script("pen", "deployment_capability");
        let c = &s.section(Section::Constraint)[0];
        assert!(c.contains(
            "(and (not (= (ProductionStep_requiredOp s) NONE_Operation)) \
             (not (= (Machine_providedOp (Deployment_machine d)) NONE_Operation)) \
             (= (Operation_name (ProductionStep_requiredOp s)) (Operation_name (Machine_providedOp (Deployment_machine d)))))"
        ));
    }

    #[test]
    fn emission_is_deterministic() {
        assert_eq!(script("microl", "call_types_match").text(), script("microl", "call_types_match").text());
    }

    #[test]
    fn literals() {
        assert_eq!(string_literal("a\"b\\c\n"), "\"a\"\"b\\u{5c}c\\u{a}\"");
        assert_eq!(int_literal(-3), "(- 3)");
        assert_eq!(int_literal(i64::MIN), "(- 9223372036854775808)");
    }
}
