//! SMT-LIB v2 back end: script generation, solver driving and verdicts.

mod emit;
mod sexp;
mod solver;
mod symbols;

use std::collections::HashMap;

use thiserror::Error;

pub use emit::{emit_smt, int_literal, string_literal, EmitError, Section, SmtScript};
pub use sexp::{parse_all, Sexp, SexpError};
pub use solver::{
    parse_status, run_solver, SatStatus, SolverCommand, SolverConfig, SolverError, SolverResponse, DEFAULT_SOLVER,
    SOLVER_ENV,
};
pub use symbols::{feature_symbols, SymbolTable};

use crate::binding::bind;
use crate::constraint::{evaluate, TypedConstraint};
use crate::lifting::lift;
use crate::variability::{make_configuration, Configuration, ConfigurationError, FeatureModel, ProductLine};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    AllVariantsSatisfy,
    /// `confirmed` is true when binding `config` and evaluating the original
    /// constraint reproduces the violation.
    Violation { config: Configuration, confirmed: bool },
    SolverUnknown(String),
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::AllVariantsSatisfy => "all-variants-satisfy",
            Verdict::Violation { .. } => "violation",
            Verdict::SolverUnknown(_) => "unknown",
        }
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("unreadable model: {0}")]
    Syntax(#[from] SexpError),
    #[error("no model in solver output")]
    MissingModel,
    #[error("feature `{feature}` has non-Boolean value `{value}`")]
    NotBoolean { feature: String, value: String },
    #[error("decoded assignment violates the feature model: {0}")]
    InvalidConfiguration(#[from] ConfigurationError),
}

/// The `define-fun` entries of the model, in either the `(model ...)` or the
/// bare-list form.
fn model_entries(terms: &[Sexp]) -> Option<&[Sexp]> {
    terms.iter().rev().find_map(|t| {
        let items = t.list()?;
        let items = if t.head() == Some("model") { &items[1..] } else { items };
        let is_model = t.head() == Some("model") || items.iter().any(|i| i.head() == Some("define-fun"));
        (is_model && items.iter().all(|i| i.list().is_some())).then_some(items)
    })
}

/// Extracts the feature assignment from a `sat` response with a model.
/// Features the model does not mention are taken to be deselected.
pub fn decode_model(solver_output: &str, fm: &FeatureModel) -> Result<Configuration, DecodeError> {
    let mut table = SymbolTable::new();
    let symbols = feature_symbols(&mut table, fm);
    let by_symbol: HashMap<&str, &str> = symbols.iter().map(|(f, s)| (s.as_str(), f.as_str())).collect();
    let terms = parse_all(solver_output)?;
    let entries = model_entries(&terms).ok_or(DecodeError::MissingModel)?;
    let mut values: HashMap<&str, bool> = HashMap::new();
    for entry in entries {
        let items = entry.list().expect("entries are lists");
        if entry.head() != Some("define-fun") {
            continue;
        }
        let (Some(name), Some(value)) = (items.get(1).and_then(Sexp::symbol), items.last()) else {
            continue;
        };
        let Some(feature) = by_symbol.get(name) else {
            continue;
        };
        let b = match value.symbol() {
            Some("true") => true,
            Some("false") => false,
            _ => {
                return Err(DecodeError::NotBoolean {
                    feature: feature.to_string(),
                    value: value.to_string(),
                })
            }
        };
        values.insert(feature, b);
    }
    let assignment = fm
        .features()
        .iter()
        .map(|f| (f.clone(), values.get(f.as_str()).copied().unwrap_or(false)));
    Ok(make_configuration(fm, assignment)?)
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot decode counterexample: {0}")]
    Decode(#[from] DecodeError),
}

/// Outcome of [`check`] together with the script that produced it.
#[derive(Debug, Clone)]
pub struct CheckRun {
    pub verdict: Verdict,
    pub script: SmtScript,
    pub response: SolverResponse,
}

/// Lifts `c`, solves the negated lifted constraint and confirms any
/// counterexample on the bound variant.
pub fn check(pl: &ProductLine, c: &TypedConstraint, solver: &SolverConfig) -> Result<Verdict, CheckError> {
    Ok(check_run(pl, c, solver)?.verdict)
}

pub fn check_run(pl: &ProductLine, c: &TypedConstraint, solver: &SolverConfig) -> Result<CheckRun, CheckError> {
    let script = emit_smt(pl, &lift(c))?;
    let response = run_solver(solver, &script.text())?;
    let verdict = match &response.status {
        SatStatus::Unsat => Verdict::AllVariantsSatisfy,
        SatStatus::Unknown(reason) => Verdict::SolverUnknown(reason.clone()),
        SatStatus::Sat => {
            let config = decode_model(&response.output, pl.feature_model())?;
            let variant = bind(pl, &config);
            let confirmed = !evaluate(c, pl.metamodel(), &variant.graph);
            Verdict::Violation { config, confirmed }
        }
    };
    Ok(CheckRun {
        verdict,
        script,
        response,
    })
}
