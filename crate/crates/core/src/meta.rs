//! Metamodels: finite maps from class names to class bodies.
//!
//! A class body maps attribute names to a target type and a multiplicity.
//! The basic types `int`, `bool` and `string` are implicit and may not be
//! redeclared as classes. A metamodel is well-defined when every attribute
//! target is either a basic type or a declared class.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ident::is_identifier;

pub const BASIC_TYPE_NAMES: [&str; 3] = ["int", "bool", "string"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Multiplicity {
    One,
    Many,
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiplicity::One => f.write_str("1"),
            Multiplicity::Many => f.write_str("*"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasicType {
    Int,
    Bool,
    String,
}

impl BasicType {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "int" => Some(BasicType::Int),
            "bool" => Some(BasicType::Bool),
            "string" => Some(BasicType::String),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasicType::Int => "int",
            BasicType::Bool => "bool",
            BasicType::String => "string",
        }
    }
}

pub fn is_basic_type(name: &str) -> bool {
    BasicType::from_name(name).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Attribute {
    pub target: String,
    pub multiplicity: Multiplicity,
}

impl Attribute {
    pub fn one(target: impl Into<String>) -> Self {
        Attribute {
            target: target.into(),
            multiplicity: Multiplicity::One,
        }
    }

    pub fn many(target: impl Into<String>) -> Self {
        Attribute {
            target: target.into(),
            multiplicity: Multiplicity::Many,
        }
    }

    pub fn is_many(&self) -> bool {
        self.multiplicity == Multiplicity::Many
    }

    /// The basic type of the target, or `None` for class-typed attributes.
    pub fn basic_target(&self) -> Option<BasicType> {
        BasicType::from_name(&self.target)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.target, self.multiplicity)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassBody {
    attributes: BTreeMap<String, Attribute>,
}

impl ClassBody {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, attribute: Attribute) -> Self {
        self.insert(name, attribute);
        self
    }

    /// Inserts an attribute, returning the previous one of the same name.
    pub fn insert(&mut self, name: impl Into<String>, attribute: Attribute) -> Option<Attribute> {
        self.attributes.insert(name.into(), attribute)
    }

    pub fn get(&self, name: &str) -> Option<&Attribute> {
        self.attributes.get(name)
    }

    pub fn attributes(&self) -> impl Iterator<Item = (&str, &Attribute)> {
        self.attributes.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metamodel {
    classes: BTreeMap<String, ClassBody>,
}

impl Metamodel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_class(mut self, name: impl Into<String>, body: ClassBody) -> Self {
        self.insert_class(name, body);
        self
    }

    pub fn insert_class(&mut self, name: impl Into<String>, body: ClassBody) -> Option<ClassBody> {
        self.classes.insert(name.into(), body)
    }

    pub fn class(&self, name: &str) -> Option<&ClassBody> {
        self.classes.get(name)
    }

    pub fn is_class(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    /// Classes in name order.
    pub fn classes(&self) -> impl Iterator<Item = (&str, &ClassBody)> {
        self.classes.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetaDiagnosticKind {
    /// The attribute refers to a type that is neither basic nor declared.
    UndeclaredType(String),
    /// A basic type name is declared as a class.
    BasicTypeRedeclared,
    /// A class or attribute name is not a valid identifier.
    InvalidIdentifier(String),
    /// Lists hold object references only.
    ManyValuedBasic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MetaDiagnostic {
    pub class: String,
    pub attribute: Option<String>,
    pub kind: MetaDiagnosticKind,
}

impl fmt::Display for MetaDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let location = match &self.attribute {
            Some(a) => format!("{}.{}", self.class, a),
            None => self.class.clone(),
        };
        match &self.kind {
            MetaDiagnosticKind::UndeclaredType(t) => {
                write!(f, "{location}: type `{t}` is not declared")
            }
            MetaDiagnosticKind::BasicTypeRedeclared => {
                write!(f, "{location}: basic type redeclared as a class")
            }
            MetaDiagnosticKind::InvalidIdentifier(s) => {
                write!(f, "{location}: `{s}` is not a valid identifier")
            }
            MetaDiagnosticKind::ManyValuedBasic(t) => {
                write!(f, "{location}: many-valued attributes of basic type `{t}` are not supported")
            }
        }
    }
}

/// Checks that `mm` is well-defined. An empty report means it is.
pub fn validate_metamodel(mm: &Metamodel) -> Vec<MetaDiagnostic> {
    let mut report = Vec::new();
    for (class, body) in mm.classes() {
        if !is_identifier(class) {
            report.push(MetaDiagnostic {
                class: class.to_string(),
                attribute: None,
                kind: MetaDiagnosticKind::InvalidIdentifier(class.to_string()),
            });
        }
        if is_basic_type(class) {
            report.push(MetaDiagnostic {
                class: class.to_string(),
                attribute: None,
                kind: MetaDiagnosticKind::BasicTypeRedeclared,
            });
        }
        for (name, attribute) in body.attributes() {
            let diag = |kind| MetaDiagnostic {
                class: class.to_string(),
                attribute: Some(name.to_string()),
                kind,
            };
            if !is_identifier(name) {
                report.push(diag(MetaDiagnosticKind::InvalidIdentifier(name.to_string())));
            }
            match attribute.basic_target() {
                Some(basic) if attribute.is_many() => {
                    report.push(diag(MetaDiagnosticKind::ManyValuedBasic(basic.name().to_string())));
                }
                Some(_) => {}
                None if mm.is_class(&attribute.target) => {}
                None => report.push(diag(MetaDiagnosticKind::UndeclaredType(attribute.target.clone()))),
            }
        }
    }
    report.sort();
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("type `{ty}` has no attribute `{name}`")]
    UnknownAttribute { ty: String, name: String },
    #[error("basic type `{0}` has no attributes")]
    BasicTypeHasNoAttributes(String),
}

pub fn lookup_attribute<'a>(mm: &'a Metamodel, ty: &str, name: &str) -> Result<&'a Attribute, LookupError> {
    if is_basic_type(ty) {
        return Err(LookupError::BasicTypeHasNoAttributes(ty.to_string()));
    }
    let body = mm.class(ty).ok_or_else(|| LookupError::UnknownType(ty.to_string()))?;
    body.get(name).ok_or_else(|| LookupError::UnknownAttribute {
        ty: ty.to_string(),
        name: name.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle;

    fn micro_language() -> Metamodel {
        bundle::parse_metamodel(include_str!("../../../fixtures/microl/metamodel.json")).unwrap()
    }

    #[test]
    fn micro_language_is_well_defined() {
        let mm = micro_language();
        assert!(validate_metamodel(&mm).is_empty());
        assert_eq!(
            mm.class("FunctionDefinition").unwrap().get("params"),
            Some(&Attribute::many("Parameter"))
        );
    }

    #[test]
    fn empty_metamodel_is_well_defined() {
        assert!(validate_metamodel(&Metamodel::new()).is_empty());
    }

    #[test]
    fn undeclared_target_is_reported() {
        let mm = Metamodel::new().with_class("A", ClassBody::new().with("x", Attribute::one("B")));
        assert_eq!(
            validate_metamodel(&mm),
            vec![MetaDiagnostic {
                class: "A".into(),
                attribute: Some("x".into()),
                kind: MetaDiagnosticKind::UndeclaredType("B".into()),
            }]
        );
    }

    #[test]
    fn basic_type_redeclaration_is_reported() {
        let mm = Metamodel::new().with_class("int", ClassBody::new());
        let report = validate_metamodel(&mm);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].kind, MetaDiagnosticKind::BasicTypeRedeclared);
    }

    #[test]
    fn lookup_errors() {
        let mm = micro_language();
        assert_eq!(
            lookup_attribute(&mm, "FunctionDefinition", "params").unwrap(),
            &Attribute::many("Parameter")
        );
        assert!(matches!(
            lookup_attribute(&mm, "FunctionDefinition", "missing"),
            Err(LookupError::UnknownAttribute { .. })
        ));
        assert!(matches!(
            lookup_attribute(&mm, "int", "x"),
            Err(LookupError::BasicTypeHasNoAttributes(_))
        ));
        assert!(matches!(
            lookup_attribute(&mm, "Nope", "x"),
            Err(LookupError::UnknownType(_))
        ));
    }

    #[test]
    fn every_declared_attribute_resolves() {
        let mm = micro_language();
        for (class, body) in mm.classes() {
            for (name, attr) in body.attributes() {
                assert_eq!(lookup_attribute(&mm, class, name).unwrap(), attr);
            }
        }
    }

    #[test]
    fn validation_is_order_independent() {
        let a = Metamodel::new()
            .with_class("A", ClassBody::new().with("x", Attribute::one("Q")))
            .with_class("B", ClassBody::new().with("y", Attribute::many("R")));
        let b = Metamodel::new()
            .with_class("B", ClassBody::new().with("y", Attribute::many("R")))
            .with_class("A", ClassBody::new().with("x", Attribute::one("Q")));
        assert_eq!(validate_metamodel(&a), validate_metamodel(&b));
    }
}
