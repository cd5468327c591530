//! Product-based reference checker: enumerate, bind and evaluate every
//! variant.

use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::binding::{bind, BoundVariant};
use crate::constraint::{evaluate, TypedConstraint};
use crate::smt::{check_run, CheckError, SolverConfig, Verdict};
use crate::variability::{enumerate_configurations, ProductLine, TooManyFeatures, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    AllVariantsSatisfy { count: usize },
    /// The lexicographically first violating configuration.
    Violation(Box<BoundVariant>),
}

impl OracleVerdict {
    pub fn kind(&self) -> &'static str {
        match self {
            OracleVerdict::AllVariantsSatisfy { .. } => "all-variants-satisfy",
            OracleVerdict::Violation(_) => "violation",
        }
    }

    /// Set when the feature model admits no configuration at all.
    pub fn warning(&self) -> Option<&'static str> {
        match self {
            OracleVerdict::AllVariantsSatisfy { count: 0 } => {
                Some("feature model has no valid configuration; the verdict holds vacuously")
            }
            _ => None,
        }
    }
}

pub fn oracle_check(pl: &ProductLine, c: &TypedConstraint) -> Result<OracleVerdict, TooManyFeatures> {
    oracle_check_with_cap(pl, c, DEFAULT_ENUMERATION_CAP)
}

pub fn oracle_check_with_cap(pl: &ProductLine, c: &TypedConstraint, cap: usize) -> Result<OracleVerdict, TooManyFeatures> {
    let configs = enumerate_configurations(pl.feature_model(), cap)?;
    let count = configs.len();
    for k in configs {
        let variant = bind(pl, &k);
        if !evaluate(c, pl.metamodel(), &variant.graph) {
            return Ok(OracleVerdict::Violation(Box::new(variant)));
        }
    }
    Ok(OracleVerdict::AllVariantsSatisfy { count })
}

#[derive(Debug, Error)]
pub enum EquivalenceError {
    #[error(transparent)]
    Oracle(#[from] TooManyFeatures),
    #[error(transparent)]
    Check(#[from] CheckError),
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub smt: Verdict,
    pub oracle: OracleVerdict,
    pub agree: bool,
    /// Written only on disagreement.
    pub script_path: Option<PathBuf>,
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: smt={} oracle={}",
            if self.agree { "agree" } else { "DISAGREE" },
            self.smt.kind(),
            self.oracle.kind()
        )?;
        if let OracleVerdict::Violation(v) = &self.oracle {
            write!(f, " oracle-witness={}", v.config)?;
        }
        if let Verdict::Violation { config, confirmed } = &self.smt {
            write!(f, " smt-witness={config} confirmed={confirmed}")?;
        }
        if let Some(p) = &self.script_path {
            write!(f, " script={}", p.display())?;
        }
        Ok(())
    }
}

/// Verdict kinds agree; an unconfirmed SMT violation never agrees.
pub fn verdicts_agree(smt: &Verdict, oracle: &OracleVerdict) -> bool {
    matches!(
        (smt, oracle),
        (Verdict::AllVariantsSatisfy, OracleVerdict::AllVariantsSatisfy { .. })
            | (Verdict::Violation { confirmed: true, .. }, OracleVerdict::Violation(_))
    )
}

static DUMPS: AtomicUsize = AtomicUsize::new(0);

/// Runs the SMT check and the oracle side by side.
pub fn equivalence_test(
    pl: &ProductLine,
    c: &TypedConstraint,
    solver: &SolverConfig,
) -> Result<EquivalenceReport, EquivalenceError> {
    let oracle = oracle_check(pl, c)?;
    let run = check_run(pl, c, solver)?;
    let agree = verdicts_agree(&run.verdict, &oracle);
    let script_path = if agree {
        None
    } else {
        let n = DUMPS.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!("plift-disagreement-{}-{n}.smt2", std::process::id()));
        std::fs::write(&path, run.script.text()).ok().map(|_| path)
    };
    Ok(EquivalenceReport {
        smt: run.verdict,
        oracle,
        agree,
        script_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::Bundle;
    use crate::variability::{FeatureModel, PropFormula};
    use std::path::Path;

    fn bundle(dir: &str) -> Bundle {
        Bundle::load_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(dir)).unwrap()
    }

    #[test]
    fn micro_type_match_fails_at_fpu_and_runtime() {
        let b = bundle("microl");
        let verdict = oracle_check(&b.product_line, b.constraint("call_types_match").unwrap()).unwrap();
        let OracleVerdict::Violation(v) = verdict else { panic!("expected a violation") };
        assert_eq!(v.config.get("FPU"), Some(true));
        assert_eq!(v.config.get("Runtime"), Some(true));
    }

    #[test]
    fn pen_constraints_hold_on_both_variants() {
        let b = bundle("pen");
        for (name, c) in &b.constraints {
            assert_eq!(
                oracle_check(&b.product_line, c).unwrap(),
                OracleVerdict::AllVariantsSatisfy { count: 2 },
                "{name}"
            );
        }
    }

    #[test]
    fn seeded_faults_are_caught() {
        for (dir, name) in [
            ("pen_faults/depl3_push", "steps_deployed"),
            ("pen_faults/screwhead_push", "parts_assembled"),
            ("pen_faults/depl4_twist", "deployment_capability"),
        ] {
            let b = bundle(dir);
            assert_eq!(oracle_check(&b.product_line, b.constraint(name).unwrap()).unwrap().kind(), "violation", "{dir}");
        }
    }

    #[test]
    fn void_feature_model_is_vacuous() {
        let b = bundle("pen");
        let pl = b.product_line;
        let void = FeatureModel::new(pl.feature_model().features().to_vec(), PropFormula::False).unwrap();
        let pl = crate::variability::ProductLine::new(
            pl.metamodel().clone(),
            pl.model().clone(),
            void,
            pl.presence().clone(),
        )
        .unwrap();
        let verdict = oracle_check(&pl, &b.constraints[0].1).unwrap();
        assert_eq!(verdict, OracleVerdict::AllVariantsSatisfy { count: 0 });
        assert!(verdict.warning().is_some());
    }
}
