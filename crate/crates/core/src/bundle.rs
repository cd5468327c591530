//! JSON documents for metamodels, models, feature models, presence tables,
//! constraint sets and configurations, plus bundle loading.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::constraint::{parse_constraint, typecheck_constraint, SyntaxError, TypeError, TypedConstraint};
use crate::meta::{Attribute, ClassBody, Metamodel, Multiplicity};
use crate::model::{InstanceGraph, ModelObject, ObjectId, Value};
use crate::variability::{
    make_configuration, Configuration, ConfigurationError, FeatureModel, FeatureModelError, FormulaSyntaxError,
    PresenceTable, ProductLine, ProductLineError, PropFormula,
};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{document}: invalid JSON: {source}")]
    Json {
        document: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{document}: {message}")]
    Format { document: String, message: String },
    #[error("{document}: {source}")]
    Formula {
        document: String,
        #[source]
        source: FormulaSyntaxError,
    },
    #[error("constraint `{name}`: {source}")]
    ConstraintSyntax {
        name: String,
        #[source]
        source: SyntaxError,
    },
    #[error("constraint `{name}`: {source}")]
    ConstraintType {
        name: String,
        #[source]
        source: TypeError,
    },
    #[error(transparent)]
    FeatureModel(#[from] FeatureModelError),
    #[error(transparent)]
    ProductLine(#[from] ProductLineError),
    #[error(transparent)]
    Configuration(#[from] ConfigurationError),
}

fn format_error(document: &str, message: impl Into<String>) -> BundleError {
    BundleError::Format {
        document: document.to_string(),
        message: message.into(),
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(document: &str, text: &str) -> Result<T, BundleError> {
    serde_json::from_str(text).map_err(|source| BundleError::Json {
        document: document.to_string(),
        source,
    })
}

fn to_pretty(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON documents always serialize");
    text.push('\n');
    text
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttribute {
    #[serde(rename = "type")]
    ty: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    many: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetamodel {
    classes: BTreeMap<String, BTreeMap<String, RawAttribute>>,
}

/// Reads `{"classes": {C: {attr: {"type": T, "many": bool}}}}`.
pub fn parse_metamodel(text: &str) -> Result<Metamodel, BundleError> {
    let raw: RawMetamodel = parse_json("metamodel", text)?;
    let mut mm = Metamodel::new();
    for (class, attributes) in raw.classes {
        let mut body = ClassBody::new();
        for (name, attr) in attributes {
            body.insert(name, if attr.many { Attribute::many(attr.ty) } else { Attribute::one(attr.ty) });
        }
        mm.insert_class(class, body);
    }
    Ok(mm)
}

pub fn serialize_metamodel(mm: &Metamodel) -> String {
    let classes = mm
        .classes()
        .map(|(class, body)| {
            let attributes = body
                .attributes()
                .map(|(name, attr)| {
                    (
                        name.to_string(),
                        RawAttribute {
                            ty: attr.target.clone(),
                            many: attr.multiplicity == Multiplicity::Many,
                        },
                    )
                })
                .collect();
            (class.to_string(), attributes)
        })
        .collect();
    to_pretty(&RawMetamodel { classes })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    id: String,
    #[serde(rename = "type")]
    ty: String,
    #[serde(default)]
    slots: Map<String, Json>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    objects: Vec<RawObject>,
}

/// Reads `{"objects": [{"id", "type", "slots"}]}`.
///
/// Strings are decoded as references when the metamodel declares a class
/// target, `null` as NONE and arrays as id lists. Decoding is lenient about
/// kinds so that [`crate::model::typecheck_graph`] can report mismatches.
pub fn parse_model(mm: &Metamodel, text: &str) -> Result<InstanceGraph, BundleError> {
    let raw: RawModel = parse_json("model", text)?;
    let mut g = InstanceGraph::new();
    for object in raw.objects {
        let mut decoded = ModelObject::new(object.id.as_str(), object.ty.as_str());
        for (slot, json) in object.slots {
            let attribute = mm.class(&object.ty).and_then(|body| body.get(&slot));
            let is_reference = attribute.is_some_and(|a| a.basic_target().is_none());
            let value = match json {
                Json::Null => Value::Ref(None),
                Json::Bool(b) => Value::Bool(b),
                Json::Number(n) => Value::Int(n.as_i64().ok_or_else(|| {
                    format_error("model", format!("{}.{slot}: {n} is not a 64-bit integer", object.id))
                })?),
                Json::String(s) if is_reference => Value::Ref(Some(ObjectId::from(s))),
                Json::String(s) => Value::Str(s),
                Json::Array(items) => Value::List(
                    items
                        .into_iter()
                        .map(|item| match item {
                            Json::String(s) => Ok(ObjectId::from(s)),
                            other => Err(format_error(
                                "model",
                                format!("{}.{slot}: list element {other} is not an object id", object.id),
                            )),
                        })
                        .collect::<Result<_, _>>()?,
                ),
                Json::Object(_) => {
                    return Err(format_error("model", format!("{}.{slot}: nested objects are not supported", object.id)))
                }
            };
            decoded.slots.insert(slot, value);
        }
        g.insert(decoded)
            .map_err(|e| format_error("model", e.to_string()))?;
    }
    Ok(g)
}

/// Writes a model document; NONE is written as `null`.
pub fn serialize_model(g: &InstanceGraph) -> String {
    let objects = g
        .objects()
        .map(|o| RawObject {
            id: o.id.to_string(),
            ty: o.ty.clone(),
            slots: o
                .slots
                .iter()
                .map(|(name, value)| {
                    let json = match value {
                        Value::Bool(b) => json!(b),
                        Value::Int(i) => json!(i),
                        Value::Str(s) => json!(s),
                        Value::Ref(Some(id)) => json!(id.as_str()),
                        Value::Ref(None) => Json::Null,
                        Value::List(ids) => json!(ids.iter().map(ObjectId::as_str).collect::<Vec<_>>()),
                    };
                    (name.clone(), json)
                })
                .collect(),
        })
        .collect();
    to_pretty(&RawModel { objects })
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawFormula {
    Single(String),
    Conjuncts(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeatureModel {
    features: Vec<String>,
    #[serde(default = "default_formula")]
    formula: RawFormula,
}

fn default_formula() -> RawFormula {
    RawFormula::Single("true".into())
}

fn parse_formula(document: &str, text: &str) -> Result<PropFormula, BundleError> {
    PropFormula::parse(text).map_err(|source| BundleError::Formula {
        document: document.to_string(),
        source,
    })
}

/// Reads `{"features": [..], "formula": "φ" | ["φ1", "φ2", ..]}`. A list is
/// read as the conjunction of its entries.
pub fn parse_feature_model(text: &str) -> Result<FeatureModel, BundleError> {
    let raw: RawFeatureModel = parse_json("feature model", text)?;
    let formula = match raw.formula {
        RawFormula::Single(s) => parse_formula("feature model", &s)?,
        RawFormula::Conjuncts(parts) => PropFormula::conjunction(
            parts
                .iter()
                .map(|p| parse_formula("feature model", p))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    Ok(FeatureModel::new(raw.features, formula)?)
}

pub fn serialize_feature_model(fm: &FeatureModel) -> String {
    let conjuncts = fm.formula().conjuncts();
    let formula = if conjuncts.len() > 1 {
        RawFormula::Conjuncts(conjuncts.iter().map(ToString::to_string).collect())
    } else {
        RawFormula::Single(fm.formula().to_string())
    };
    to_pretty(&RawFeatureModel {
        features: fm.features().to_vec(),
        formula,
    })
}

/// Reads `{object-id: "presence condition"}`.
pub fn parse_presence(text: &str) -> Result<PresenceTable, BundleError> {
    let raw: IndexMap<String, String> = parse_json("presence table", text)?;
    let mut table = PresenceTable::new();
    for (id, pc) in raw {
        table.insert(id.as_str(), parse_formula(&format!("presence condition of `{id}`"), &pc)?);
    }
    Ok(table)
}

pub fn serialize_presence(table: &PresenceTable) -> String {
    let raw: IndexMap<String, String> = table.iter().map(|(id, pc)| (id.to_string(), pc.to_string())).collect();
    to_pretty(&raw)
}

/// Reads an ordered `{name: "constraint"}` map and type-checks every entry.
pub fn parse_constraints(mm: &Metamodel, text: &str) -> Result<Vec<(String, TypedConstraint)>, BundleError> {
    let raw: IndexMap<String, String> = parse_json("constraints", text)?;
    raw.into_iter()
        .map(|(name, source)| {
            let parsed = parse_constraint(&source).map_err(|source| BundleError::ConstraintSyntax {
                name: name.clone(),
                source,
            })?;
            let typed = typecheck_constraint(&parsed, mm).map_err(|source| BundleError::ConstraintType {
                name: name.clone(),
                source,
            })?;
            Ok((name, typed))
        })
        .collect()
}

pub fn serialize_constraints(constraints: &[(String, TypedConstraint)]) -> String {
    let raw: IndexMap<&str, String> = constraints
        .iter()
        .map(|(name, c)| (name.as_str(), c.constraint().to_string()))
        .collect();
    to_pretty(&raw)
}

/// Reads `{feature: bool}`; the assignment must be total and valid.
pub fn parse_configuration(fm: &FeatureModel, text: &str) -> Result<Configuration, BundleError> {
    let raw: IndexMap<String, bool> = parse_json("configuration", text)?;
    Ok(make_configuration(fm, raw)?)
}

pub fn serialize_configuration(k: &Configuration) -> String {
    let raw: IndexMap<&str, bool> = k.iter().collect();
    to_pretty(&raw)
}

/// Locations of the documents making up a bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePaths {
    pub metamodel: PathBuf,
    pub model: PathBuf,
    pub features: PathBuf,
    /// Without a presence table every object is always present.
    pub presence: Option<PathBuf>,
    pub constraints: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    metamodel: Option<PathBuf>,
    model: Option<PathBuf>,
    features: Option<PathBuf>,
    presence: Option<PathBuf>,
    constraints: Option<PathBuf>,
}

pub const MANIFEST_FILE: &str = "bundle.json";

impl BundlePaths {
    /// Resolves a bundle directory. Entries of an optional `bundle.json`
    /// manifest are relative to the directory; missing entries fall back to
    /// `metamodel.json`, `model.json`, `features.json`, `presence.json` and
    /// `constraints.json`.
    pub fn from_dir(dir: &Path) -> Result<Self, BundleError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest = if manifest_path.is_file() {
            let text = read(&manifest_path)?;
            parse_json::<RawManifest>("bundle manifest", &text)?
        } else {
            RawManifest {
                metamodel: None,
                model: None,
                features: None,
                presence: None,
                constraints: None,
            }
        };
        let pick = |given: Option<PathBuf>, default: &str| dir.join(given.unwrap_or_else(|| default.into()));
        let optional = |given: Option<PathBuf>, default: &str| match given {
            Some(p) => Some(dir.join(p)),
            None => Some(dir.join(default)).filter(|p| p.is_file()),
        };
        Ok(BundlePaths {
            metamodel: pick(manifest.metamodel, "metamodel.json"),
            model: pick(manifest.model, "model.json"),
            features: pick(manifest.features, "features.json"),
            presence: optional(manifest.presence, "presence.json"),
            constraints: optional(manifest.constraints, "constraints.json"),
        })
    }
}

fn read(path: &Path) -> Result<String, BundleError> {
    fs::read_to_string(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A loaded product line with its named, type-checked constraints.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub product_line: ProductLine,
    pub constraints: Vec<(String, TypedConstraint)>,
}

impl Bundle {
    pub fn load(paths: &BundlePaths) -> Result<Self, BundleError> {
        let mm = parse_metamodel(&read(&paths.metamodel)?)?;
        let model = parse_model(&mm, &read(&paths.model)?)?;
        let fm = parse_feature_model(&read(&paths.features)?)?;
        let presence = match &paths.presence {
            Some(p) => parse_presence(&read(p)?)?,
            None => PresenceTable::new(),
        };
        let constraints = match &paths.constraints {
            Some(p) => parse_constraints(&mm, &read(p)?)?,
            None => Vec::new(),
        };
        let product_line = ProductLine::new(mm, model, fm, presence)?;
        Ok(Bundle {
            product_line,
            constraints,
        })
    }

    pub fn load_dir(dir: &Path) -> Result<Self, BundleError> {
        Self::load(&BundlePaths::from_dir(dir)?)
    }

    pub fn constraint(&self, name: &str) -> Option<&TypedConstraint> {
        self.constraints.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    /// Writes the five documents under their default names into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), BundleError> {
        let pl = &self.product_line;
        let files = [
            ("metamodel.json", serialize_metamodel(pl.metamodel())),
            ("model.json", serialize_model(pl.model())),
            ("features.json", serialize_feature_model(pl.feature_model())),
            ("presence.json", serialize_presence(pl.presence())),
            ("constraints.json", serialize_constraints(&self.constraints)),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|source| BundleError::Io { path, source })?;
        }
        Ok(())
    }
}
