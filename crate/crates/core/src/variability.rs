//! Feature models, presence conditions, configurations and product lines.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::ident::is_identifier;
use crate::meta::{validate_metamodel, MetaDiagnostic, Metamodel};
use crate::model::{typecheck_graph, CheckMode, InstanceGraph, ModelDiagnostic, ObjectId};

/// Propositional formula over feature names. Serves both as the feature
/// model formula and as presence conditions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PropFormula {
    Var(String),
    True,
    False,
    Not(Box<PropFormula>),
    And(Box<PropFormula>, Box<PropFormula>),
    Or(Box<PropFormula>, Box<PropFormula>),
    Implies(Box<PropFormula>, Box<PropFormula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown feature `{0}`")]
pub struct UnknownFeature(pub String);

impl PropFormula {
    pub fn var(name: impl Into<String>) -> Self {
        PropFormula::Var(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: PropFormula) -> Self {
        PropFormula::Not(Box::new(f))
    }

    pub fn and(a: PropFormula, b: PropFormula) -> Self {
        PropFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: PropFormula, b: PropFormula) -> Self {
        PropFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: PropFormula, b: PropFormula) -> Self {
        PropFormula::Implies(Box::new(a), Box::new(b))
    }

    /// Left-nested conjunction; `True` when empty.
    pub fn conjunction(parts: impl IntoIterator<Item = PropFormula>) -> Self {
        parts
            .into_iter()
            .reduce(PropFormula::and)
            .unwrap_or(PropFormula::True)
    }

    pub fn parse(text: &str) -> Result<Self, FormulaSyntaxError> {
        FormulaParser::new(text)?.parse()
    }

    /// Top-level conjuncts in left-to-right order.
    pub fn conjuncts(&self) -> Vec<&PropFormula> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a PropFormula, out: &mut Vec<&'a PropFormula>) {
            match f {
                PropFormula::And(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn features(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        fn walk<'a>(f: &'a PropFormula, out: &mut BTreeSet<&'a str>) {
            match f {
                PropFormula::Var(v) => {
                    out.insert(v.as_str());
                }
                PropFormula::True | PropFormula::False => {}
                PropFormula::Not(a) => walk(a, out),
                PropFormula::And(a, b) | PropFormula::Or(a, b) | PropFormula::Implies(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    /// Evaluates under an assignment given as a lookup function.
    pub fn eval_with(&self, k: &impl Fn(&str) -> Option<bool>) -> Result<bool, UnknownFeature> {
        Ok(match self {
            PropFormula::Var(v) => k(v).ok_or_else(|| UnknownFeature(v.clone()))?,
            PropFormula::True => true,
            PropFormula::False => false,
            PropFormula::Not(a) => !a.eval_with(k)?,
            PropFormula::And(a, b) => a.eval_with(k)? & b.eval_with(k)?,
            PropFormula::Or(a, b) => a.eval_with(k)? | b.eval_with(k)?,
            PropFormula::Implies(a, b) => !a.eval_with(k)? | b.eval_with(k)?,
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            PropFormula::Implies(..) => 1,
            PropFormula::Or(..) => 2,
            PropFormula::And(..) => 3,
            PropFormula::Not(_) => 4,
            _ => 5,
        }
    }
}

impl fmt::Display for PropFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let operand = |f: &mut fmt::Formatter<'_>, e: &PropFormula, paren: bool| {
            if paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            PropFormula::Var(v) => f.write_str(v),
            PropFormula::True => f.write_str("true"),
            PropFormula::False => f.write_str("false"),
            PropFormula::Not(a) => {
                f.write_str("!")?;
                operand(f, a, a.precedence() < 4)
            }
            PropFormula::And(a, b) | PropFormula::Or(a, b) | PropFormula::Implies(a, b) => {
                let (symbol, prec, right_assoc) = match self {
                    PropFormula::And(..) => ("&&", 3, false),
                    PropFormula::Or(..) => ("||", 2, false),
                    _ => ("=>", 1, true),
                };
                operand(f, a, a.precedence() < prec || (right_assoc && a.precedence() == prec))?;
                write!(f, " {symbol} ")?;
                operand(f, b, b.precedence() < prec || (!right_assoc && b.precedence() == prec))
            }
        }
    }
}

/// Standard propositional semantics for `k ⊨ φ`.
pub fn eval_formula(phi: &PropFormula, k: &BTreeMap<String, bool>) -> Result<bool, UnknownFeature> {
    phi.eval_with(&|name| k.get(name).copied())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("formula syntax error at column {column}: {message}")]
pub struct FormulaSyntaxError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum FTok {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    LParen,
    RParen,
    Eof,
}

struct FormulaParser {
    toks: Vec<(FTok, usize)>,
    pos: usize,
}

impl FormulaParser {
    fn new(text: &str) -> Result<Self, FormulaSyntaxError> {
        let chars: Vec<char> = text.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                toks.push((
                    match word.as_str() {
                        "true" => FTok::True,
                        "false" => FTok::False,
                        _ => FTok::Ident(word),
                    },
                    column,
                ));
                continue;
            }
            let next = chars.get(i + 1).copied();
            // Single `&` and `|` are accepted as in `[!FPU | Runtime]`.
            let (tok, len) = match (c, next) {
                ('&', Some('&')) => (FTok::And, 2),
                ('|', Some('|')) => (FTok::Or, 2),
                ('=', Some('>')) => (FTok::Implies, 2),
                ('&', _) => (FTok::And, 1),
                ('|', _) => (FTok::Or, 1),
                ('!', _) => (FTok::Not, 1),
                ('(', _) => (FTok::LParen, 1),
                (')', _) => (FTok::RParen, 1),
                _ => {
                    return Err(FormulaSyntaxError {
                        column,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            toks.push((tok, column));
            i += len;
        }
        toks.push((FTok::Eof, chars.len() + 1));
        Ok(FormulaParser { toks, pos: 0 })
    }

    fn peek(&self) -> &FTok {
        &self.toks[self.pos].0
    }

    fn bump(&mut self) -> FTok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> FormulaSyntaxError {
        FormulaSyntaxError {
            column: self.toks[self.pos].1,
            message: message.to_string(),
        }
    }

    fn parse(mut self) -> Result<PropFormula, FormulaSyntaxError> {
        let f = self.implies()?;
        if *self.peek() != FTok::Eof {
            return Err(self.error("expected end of formula"));
        }
        Ok(f)
    }

    fn implies(&mut self) -> Result<PropFormula, FormulaSyntaxError> {
        let lhs = self.or()?;
        if *self.peek() == FTok::Implies {
            self.bump();
            return Ok(PropFormula::implies(lhs, self.implies()?));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<PropFormula, FormulaSyntaxError> {
        let mut lhs = self.and()?;
        while *self.peek() == FTok::Or {
            self.bump();
            lhs = PropFormula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<PropFormula, FormulaSyntaxError> {
        let mut lhs = self.unary()?;
        while *self.peek() == FTok::And {
            self.bump();
            lhs = PropFormula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PropFormula, FormulaSyntaxError> {
        match self.bump() {
            FTok::Not => Ok(PropFormula::not(self.unary()?)),
            FTok::True => Ok(PropFormula::True),
            FTok::False => Ok(PropFormula::False),
            FTok::Ident(name) => Ok(PropFormula::Var(name)),
            FTok::LParen => {
                let inner = self.implies()?;
                if self.bump() != FTok::RParen {
                    self.pos -= 1;
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error("expected feature name, literal, `!` or `(`"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureModelError {
    #[error("feature `{0}` is declared twice")]
    DuplicateFeature(String),
    #[error("`{0}` is not a valid feature name")]
    InvalidFeatureName(String),
    #[error(transparent)]
    UnknownFeature(#[from] UnknownFeature),
}

/// Ordered feature set plus a propositional formula over it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureModel {
    features: Vec<String>,
    formula: PropFormula,
}

impl FeatureModel {
    pub fn new(features: Vec<String>, formula: PropFormula) -> Result<Self, FeatureModelError> {
        let mut seen = BTreeSet::new();
        for f in &features {
            if !is_identifier(f) || f == "true" || f == "false" {
                return Err(FeatureModelError::InvalidFeatureName(f.clone()));
            }
            if !seen.insert(f.as_str()) {
                return Err(FeatureModelError::DuplicateFeature(f.clone()));
            }
        }
        if let Some(unknown) = formula.features().into_iter().find(|f| !seen.contains(f)) {
            return Err(UnknownFeature(unknown.to_string()).into());
        }
        Ok(FeatureModel { features, formula })
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn formula(&self) -> &PropFormula {
        &self.formula
    }

    pub fn has_feature(&self, name: &str) -> bool {
        self.features.iter().any(|f| f == name)
    }
}

/// A total feature assignment satisfying the feature model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    assignment: IndexMap<String, bool>,
}

impl Configuration {
    pub fn get(&self, feature: &str) -> Option<bool> {
        self.assignment.get(feature).copied()
    }

    /// Assignments in feature-model order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.assignment.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn selected_features(&self) -> impl Iterator<Item = &str> {
        self.iter().filter(|(_, v)| *v).map(|(k, _)| k)
    }

    /// Whether this configuration satisfies `phi`; unknown features count as
    /// deselected.
    pub fn satisfies(&self, phi: &PropFormula) -> bool {
        phi.eval_with(&|name| Some(self.get(name).unwrap_or(false)))
            .unwrap_or(false)
    }

    pub fn to_map(&self) -> BTreeMap<String, bool> {
        self.assignment.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigurationError {
    #[error("feature `{0}` is not declared in the feature model")]
    UnknownFeature(String),
    #[error("no value given for feature `{0}`")]
    MissingFeature(String),
    #[error("configuration violates the feature model: {violated}")]
    InvalidConfiguration { violated: PropFormula },
}

/// Builds a configuration, checking totality and `k ⊨ Φ`.
pub fn make_configuration<I, S>(fm: &FeatureModel, assignment: I) -> Result<Configuration, ConfigurationError>
where
    I: IntoIterator<Item = (S, bool)>,
    S: Into<String>,
{
    let given: HashMap<String, bool> = assignment.into_iter().map(|(k, v)| (k.into(), v)).collect();
    if let Some(unknown) = given.keys().filter(|k| !fm.has_feature(k)).min() {
        return Err(ConfigurationError::UnknownFeature(unknown.clone()));
    }
    let mut ordered = IndexMap::with_capacity(fm.features.len());
    for f in &fm.features {
        let v = *given
            .get(f)
            .ok_or_else(|| ConfigurationError::MissingFeature(f.clone()))?;
        ordered.insert(f.clone(), v);
    }
    let config = Configuration { assignment: ordered };
    if let Some(violated) = fm.formula.conjuncts().into_iter().find(|c| !config.satisfies(c)) {
        return Err(ConfigurationError::InvalidConfiguration {
            violated: violated.clone(),
        });
    }
    Ok(config)
}

pub const DEFAULT_ENUMERATION_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{features} features exceed the enumeration cap of {cap}")]
pub struct TooManyFeatures {
    pub features: usize,
    pub cap: usize,
}

/// Index-based formula for fast truth-table scans.
enum Compiled {
    Var(usize),
    Const(bool),
    Not(Box<Compiled>),
    And(Box<Compiled>, Box<Compiled>),
    Or(Box<Compiled>, Box<Compiled>),
    Implies(Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    fn new(f: &PropFormula, index: &HashMap<&str, usize>) -> Compiled {
        let c = |g: &PropFormula| Box::new(Compiled::new(g, index));
        match f {
            PropFormula::Var(v) => Compiled::Var(index[v.as_str()]),
            PropFormula::True => Compiled::Const(true),
            PropFormula::False => Compiled::Const(false),
            PropFormula::Not(a) => Compiled::Not(c(a)),
            PropFormula::And(a, b) => Compiled::And(c(a), c(b)),
            PropFormula::Or(a, b) => Compiled::Or(c(a), c(b)),
            PropFormula::Implies(a, b) => Compiled::Implies(c(a), c(b)),
        }
    }

    fn eval(&self, bits: &[bool]) -> bool {
        match self {
            Compiled::Var(i) => bits[*i],
            Compiled::Const(b) => *b,
            Compiled::Not(a) => !a.eval(bits),
            Compiled::And(a, b) => a.eval(bits) && b.eval(bits),
            Compiled::Or(a, b) => a.eval(bits) || b.eval(bits),
            Compiled::Implies(a, b) => !a.eval(bits) || b.eval(bits),
        }
    }
}

/// All valid configurations, in lexicographic order over the declared
/// feature order (false before true, first feature most significant).
pub fn enumerate_configurations(fm: &FeatureModel, cap: usize) -> Result<Vec<Configuration>, TooManyFeatures> {
    let n = fm.features.len();
    if n > cap || n >= 64 {
        return Err(TooManyFeatures { features: n, cap });
    }
    let index: HashMap<&str, usize> = fm.features.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    let compiled = Compiled::new(&fm.formula, &index);
    let mut bits = vec![false; n];
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << n) {
        for (i, bit) in bits.iter_mut().enumerate() {
            *bit = (mask >> (n - 1 - i)) & 1 == 1;
        }
        if compiled.eval(&bits) {
            out.push(Configuration {
                assignment: fm.features.iter().cloned().zip(bits.iter().copied()).collect(),
            });
        }
    }
    Ok(out)
}

/// Presence conditions per object; unlisted objects are always present.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PresenceTable {
    conditions: BTreeMap<ObjectId, PropFormula>,
}

static ALWAYS: PropFormula = PropFormula::True;

impl PresenceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, id: impl Into<ObjectId>, pc: PropFormula) -> Self {
        self.insert(id, pc);
        self
    }

    pub fn insert(&mut self, id: impl Into<ObjectId>, pc: PropFormula) -> Option<PropFormula> {
        self.conditions.insert(id.into(), pc)
    }

    pub fn get(&self, id: &ObjectId) -> &PropFormula {
        self.conditions.get(id).unwrap_or(&ALWAYS)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectId, &PropFormula)> {
        self.conditions.iter()
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProductLineError {
    #[error("metamodel is not well-defined: {}", join(.0))]
    Metamodel(Vec<MetaDiagnostic>),
    #[error("model does not conform to the metamodel: {}", join(.0))]
    Model(Vec<ModelDiagnostic>),
    #[error("presence condition given for unregistered object `{0}`")]
    UnknownObject(ObjectId),
    #[error("presence condition of `{object}` mentions unknown feature `{feature}`")]
    UnknownFeature { object: ObjectId, feature: String },
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A model product line `(m, Φ, χ)` together with its metamodel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductLine {
    metamodel: Metamodel,
    model: InstanceGraph,
    feature_model: FeatureModel,
    presence: PresenceTable,
}

impl ProductLine {
    pub fn new(
        metamodel: Metamodel,
        model: InstanceGraph,
        feature_model: FeatureModel,
        presence: PresenceTable,
    ) -> Result<Self, ProductLineError> {
        let meta = validate_metamodel(&metamodel);
        if !meta.is_empty() {
            return Err(ProductLineError::Metamodel(meta));
        }
        let diagnostics = typecheck_graph(&metamodel, &model, CheckMode::Strict);
        if !diagnostics.is_empty() {
            return Err(ProductLineError::Model(diagnostics));
        }
        for (id, pc) in presence.iter() {
            if !model.contains(id.as_str()) {
                return Err(ProductLineError::UnknownObject(id.clone()));
            }
            if let Some(f) = pc.features().into_iter().find(|f| !feature_model.has_feature(f)) {
                return Err(ProductLineError::UnknownFeature {
                    object: id.clone(),
                    feature: f.to_string(),
                });
            }
        }
        Ok(ProductLine {
            metamodel,
            model,
            feature_model,
            presence,
        })
    }

    pub fn metamodel(&self) -> &Metamodel {
        &self.metamodel
    }

    pub fn model(&self) -> &InstanceGraph {
        &self.model
    }

    pub fn feature_model(&self) -> &FeatureModel {
        &self.feature_model
    }

    pub fn presence(&self) -> &PresenceTable {
        &self.presence
    }

    pub fn presence_of(&self, id: &ObjectId) -> &PropFormula {
        self.presence.get(id)
    }

    /// Same product line with a different presence table.
    pub fn with_presence(&self, presence: PresenceTable) -> Result<Self, ProductLineError> {
        ProductLine::new(
            self.metamodel.clone(),
            self.model.clone(),
            self.feature_model.clone(),
            presence,
        )
    }
}
