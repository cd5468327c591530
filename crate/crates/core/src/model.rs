//! Core models: variability-free instance graphs of a metamodel.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::meta::{BasicType, Metamodel};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(String);

impl ObjectId {
    pub fn new(id: impl Into<String>) -> Self {
        ObjectId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for ObjectId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_string())
    }
}

impl From<String> for ObjectId {
    fn from(s: String) -> Self {
        ObjectId(s)
    }
}

/// A slot value. `Ref(None)` is the absent object produced by binding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
    Ref(Option<ObjectId>),
    List(Vec<ObjectId>),
}

impl Value {
    pub fn reference(id: impl Into<ObjectId>) -> Self {
        Value::Ref(Some(id.into()))
    }

    pub fn none() -> Self {
        Value::Ref(None)
    }

    pub fn list<I, T>(ids: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<ObjectId>,
    {
        Value::List(ids.into_iter().map(Into::into).collect())
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Value::Ref(None))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Str(_) => "string",
            Value::Ref(_) => "reference",
            Value::List(_) => "list",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Ref(Some(id)) => write!(f, "{id}"),
            Value::Ref(None) => f.write_str("NONE"),
            Value::List(ids) => {
                f.write_str("[")?;
                for (i, id) in ids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{id}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelObject {
    pub id: ObjectId,
    pub ty: String,
    pub slots: BTreeMap<String, Value>,
}

impl ModelObject {
    pub fn new(id: impl Into<ObjectId>, ty: impl Into<String>) -> Self {
        ModelObject {
            id: id.into(),
            ty: ty.into(),
            slots: BTreeMap::new(),
        }
    }

    pub fn with(mut self, slot: impl Into<String>, value: Value) -> Self {
        self.slots.insert(slot.into(), value);
        self
    }

    pub fn slot(&self, name: &str) -> Option<&Value> {
        self.slots.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("object `{0}` is already registered")]
pub struct DuplicateObject(pub ObjectId);

/// Registry of objects in insertion order.
#[derive(Debug, Clone, Default)]
pub struct InstanceGraph {
    objects: IndexMap<ObjectId, ModelObject>,
    by_type: HashMap<String, Vec<ObjectId>>,
}

impl PartialEq for InstanceGraph {
    fn eq(&self, other: &Self) -> bool {
        // Insertion order is part of identity: extents and lists are ordered.
        self.objects.len() == other.objects.len()
            && self.objects.iter().zip(other.objects.iter()).all(|(a, b)| a == b)
    }
}

impl Eq for InstanceGraph {}

impl InstanceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, object: ModelObject) -> Result<(), DuplicateObject> {
        if self.objects.contains_key(&object.id) {
            return Err(DuplicateObject(object.id));
        }
        self.by_type.entry(object.ty.clone()).or_default().push(object.id.clone());
        self.objects.insert(object.id.clone(), object);
        Ok(())
    }

    /// Builder-style insert; panics on duplicate ids.
    pub fn with(mut self, object: ModelObject) -> Self {
        self.insert(object).expect("duplicate object id");
        self
    }

    pub fn get(&self, id: &str) -> Option<&ModelObject> {
        self.objects.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.objects.contains_key(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &ModelObject> {
        self.objects.values()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Objects whose type is exactly `ty`, in insertion order.
    pub fn extent(&self, ty: &str) -> &[ObjectId] {
        self.by_type.get(ty).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Convenience wrapper returning owned ids.
pub fn extent(g: &InstanceGraph, ty: &str) -> Vec<ObjectId> {
    g.extent(ty).to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Product-line input: NONE references are not allowed.
    Strict,
    /// Bound variants: NONE references are legal.
    PostBinding,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelDiagnosticKind {
    UnknownClass(String),
    UndeclaredSlot,
    MissingSlot,
    KindMismatch { expected: String, found: String },
    DanglingReference(ObjectId),
    WrongTargetType { expected: String, found: String },
    NoneReference,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDiagnostic {
    pub object: ObjectId,
    pub slot: Option<String>,
    pub kind: ModelDiagnosticKind,
}

impl fmt::Display for ModelDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let location = match &self.slot {
            Some(s) => format!("{}.{}", self.object, s),
            None => self.object.to_string(),
        };
        match &self.kind {
            ModelDiagnosticKind::UnknownClass(t) => write!(f, "{location}: unknown class `{t}`"),
            ModelDiagnosticKind::UndeclaredSlot => write!(f, "{location}: slot is not declared by the class"),
            ModelDiagnosticKind::MissingSlot => write!(f, "{location}: declared slot has no value"),
            ModelDiagnosticKind::KindMismatch { expected, found } => {
                write!(f, "{location}: expected {expected}, found {found}")
            }
            ModelDiagnosticKind::DanglingReference(id) => {
                write!(f, "{location}: reference to unregistered object `{id}`")
            }
            ModelDiagnosticKind::WrongTargetType { expected, found } => {
                write!(f, "{location}: referenced object has type `{found}`, expected `{expected}`")
            }
            ModelDiagnosticKind::NoneReference => write!(f, "{location}: NONE reference in a product-line model"),
        }
    }
}

/// Checks every object of `g` against its class in `mm`.
pub fn typecheck_graph(mm: &Metamodel, g: &InstanceGraph, mode: CheckMode) -> Vec<ModelDiagnostic> {
    let mut report = Vec::new();
    for object in g.objects() {
        let mut push = |slot: Option<&str>, kind| {
            report.push(ModelDiagnostic {
                object: object.id.clone(),
                slot: slot.map(str::to_string),
                kind,
            })
        };
        let Some(body) = mm.class(&object.ty) else {
            push(None, ModelDiagnosticKind::UnknownClass(object.ty.clone()));
            continue;
        };
        for slot in object.slots.keys() {
            if body.get(slot).is_none() {
                push(Some(slot), ModelDiagnosticKind::UndeclaredSlot);
            }
        }
        for (name, attribute) in body.attributes() {
            let Some(value) = object.slot(name) else {
                push(Some(name), ModelDiagnosticKind::MissingSlot);
                continue;
            };
            let mismatch = |expected: &str| ModelDiagnosticKind::KindMismatch {
                expected: expected.to_string(),
                found: value.kind_name().to_string(),
            };
            let check_target = |id: &ObjectId| -> Option<ModelDiagnosticKind> {
                match g.get(id.as_str()) {
                    None => Some(ModelDiagnosticKind::DanglingReference(id.clone())),
                    Some(target) if target.ty != attribute.target => Some(ModelDiagnosticKind::WrongTargetType {
                        expected: attribute.target.clone(),
                        found: target.ty.clone(),
                    }),
                    Some(_) => None,
                }
            };
            match (attribute.basic_target(), attribute.is_many(), value) {
                (Some(BasicType::Int), false, Value::Int(_))
                | (Some(BasicType::Bool), false, Value::Bool(_))
                | (Some(BasicType::String), false, Value::Str(_)) => {}
                (Some(basic), false, _) => push(Some(name), mismatch(basic.name())),
                (Some(basic), true, _) => push(Some(name), mismatch(&format!("list of {}", basic.name()))),
                (None, false, Value::Ref(None)) => {
                    if mode == CheckMode::Strict {
                        push(Some(name), ModelDiagnosticKind::NoneReference);
                    }
                }
                (None, false, Value::Ref(Some(id))) => {
                    if let Some(kind) = check_target(id) {
                        push(Some(name), kind);
                    }
                }
                (None, false, _) => push(Some(name), mismatch(&format!("reference to {}", attribute.target))),
                (None, true, Value::List(ids)) => {
                    for id in ids {
                        if let Some(kind) = check_target(id) {
                            push(Some(name), kind);
                        }
                    }
                }
                (None, true, _) => push(Some(name), mismatch(&format!("list of {}", attribute.target))),
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NavigationError {
    #[error("object `{0}` is not registered")]
    UnknownObject(ObjectId),
    #[error("object `{object}` has no slot `{slot}`")]
    UnknownSlot { object: ObjectId, slot: String },
    #[error("cannot navigate `{step}` through a {kind} value")]
    NavigationKindError { step: String, kind: &'static str },
}

/// Folds slot lookups along `path` starting from `start`.
///
/// NONE is absorbing: once a step yields NONE the result is `Ref(None)`.
pub fn navigate(g: &InstanceGraph, start: &ObjectId, path: &[impl AsRef<str>]) -> Result<Value, NavigationError> {
    let mut current = Value::Ref(Some(start.clone()));
    for step in path {
        let step = step.as_ref();
        let id = match &current {
            Value::Ref(None) => return Ok(Value::Ref(None)),
            Value::Ref(Some(id)) => id,
            other => {
                return Err(NavigationError::NavigationKindError {
                    step: step.to_string(),
                    kind: other.kind_name(),
                })
            }
        };
        let object = g.get(id.as_str()).ok_or_else(|| NavigationError::UnknownObject(id.clone()))?;
        let next = object.slot(step).ok_or_else(|| NavigationError::UnknownSlot {
            object: id.clone(),
            slot: step.to_string(),
        })?;
        current = next.clone();
    }
    if let Value::Ref(Some(id)) = &current {
        if !g.contains(id.as_str()) {
            return Err(NavigationError::UnknownObject(id.clone()));
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle;
    use crate::meta::Metamodel;

    fn micro() -> (Metamodel, InstanceGraph) {
        let mm = bundle::parse_metamodel(include_str!("../../../fixtures/microl/metamodel.json")).unwrap();
        let g = bundle::parse_model(&mm, include_str!("../../../fixtures/microl/my_program1.json")).unwrap();
        (mm, g)
    }

    #[test]
    fn my_program1_typechecks() {
        let (mm, g) = micro();
        assert_eq!(typecheck_graph(&mm, &g, CheckMode::Strict), vec![]);
    }

    #[test]
    fn empty_graph_typechecks() {
        let (mm, _) = micro();
        assert!(typecheck_graph(&mm, &InstanceGraph::new(), CheckMode::Strict).is_empty());
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let (mm, g) = micro();
        let mut bad = InstanceGraph::new();
        for o in g.objects() {
            let mut o = o.clone();
            if o.ty == "Argument" {
                o.slots.insert("varName".into(), Value::Int(3));
            }
            bad.insert(o).unwrap();
        }
        let report = typecheck_graph(&mm, &bad, CheckMode::Strict);
        assert_eq!(report.len(), 1);
        assert!(matches!(report[0].kind, ModelDiagnosticKind::KindMismatch { .. }));
        assert_eq!(report[0].slot.as_deref(), Some("varName"));
    }

    #[test]
    fn none_only_legal_after_binding() {
        let (mm, g) = micro();
        let mut with_none = InstanceGraph::new();
        for o in g.objects() {
            let mut o = o.clone();
            if o.ty == "VariableDeclaration" {
                o.slots.insert("varType".into(), Value::none());
            }
            with_none.insert(o).unwrap();
        }
        assert_eq!(typecheck_graph(&mm, &with_none, CheckMode::Strict).len(), 1);
        assert!(typecheck_graph(&mm, &with_none, CheckMode::PostBinding).is_empty());
    }

    #[test]
    fn dangling_and_wrong_target() {
        let (mm, g) = micro();
        let mut bad = InstanceGraph::new();
        for o in g.objects() {
            let mut o = o.clone();
            if o.ty == "FunctionDefinition" {
                o.slots.insert("params".into(), Value::list(["ghost", "var"]));
            }
            bad.insert(o).unwrap();
        }
        let kinds: Vec<_> = typecheck_graph(&mm, &bad, CheckMode::Strict).into_iter().map(|d| d.kind).collect();
        assert!(matches!(kinds[0], ModelDiagnosticKind::DanglingReference(_)));
        assert!(matches!(kinds[1], ModelDiagnosticKind::WrongTargetType { .. }));
    }

    #[test]
    fn extents() {
        let (_, g) = micro();
        assert_eq!(extent(&g, "FunctionDefinition"), vec![ObjectId::from("fun")]);
        assert!(extent(&g, "Deployment").is_empty());
        assert_eq!(g.extent("Argument"), g.extent("Argument"));
    }

    #[test]
    fn navigation() {
        let (_, g) = micro();
        let arg = ObjectId::from("arg");
        assert_eq!(navigate(&g, &arg, &["varName"]).unwrap(), Value::Str("myVar".into()));
        assert_eq!(navigate(&g, &arg, &[] as &[&str]).unwrap(), Value::reference("arg"));
        let var = ObjectId::from("var");
        assert_eq!(
            navigate(&g, &var, &["varType", "typeName"]).unwrap(),
            Value::Str("integer".into())
        );
        assert!(matches!(
            navigate(&g, &arg, &["varName", "x"]),
            Err(NavigationError::NavigationKindError { .. })
        ));
        let fun = ObjectId::from("fun");
        assert!(matches!(navigate(&g, &fun, &["params"]).unwrap(), Value::List(_)));
        assert!(matches!(
            navigate(&g, &fun, &["params", "paramName"]),
            Err(NavigationError::NavigationKindError { kind: "list", .. })
        ));
    }

    #[test]
    fn navigation_through_none_is_absorbing() {
        let g = InstanceGraph::new()
            .with(ModelObject::new("a", "A").with("next", Value::none()))
            .with(ModelObject::new("b", "A").with("next", Value::reference("a")));
        assert_eq!(
            navigate(&g, &ObjectId::from("b"), &["next", "next", "next", "name"]).unwrap(),
            Value::none()
        );
    }
}
