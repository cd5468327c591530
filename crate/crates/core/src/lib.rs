//! Family-based checking of annotated model product lines.
//!
//! A product line is a single model whose objects carry presence conditions
//! over a feature model. Constraints written for single models are lifted so
//! they can be checked for every variant at once, either through an SMT
//! solver or by brute-force enumeration of variants.

mod ident;

pub mod binding;
pub mod bundle;
pub mod constraint;
pub mod lifting;
pub mod meta;
pub mod model;
pub mod oracle;
pub mod smt;
pub mod synth;
pub mod variability;
