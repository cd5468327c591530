use std::collections::{HashMap, HashSet};

use crate::variability::FeatureModel;

/// Words that must never be used as user symbols.
const RESERVED: &[&str] = &[
    "_", "!", "as", "let", "exists", "forall", "match", "par", "assert", "check-sat", "declare-const",
    "declare-datatypes", "declare-fun", "define-fun", "get-model", "push", "pop", "true", "false", "not", "and",
    "or", "xor", "=>", "=", "distinct", "ite", "Bool", "Int", "Real", "String", "Seq", "Array", "RegLan", "div",
    "mod", "abs", "to_real", "to_int", "is_int", "select", "store", "model", "sat", "unsat", "unknown", "error",
    "NUMERAL", "DECIMAL", "STRING", "BINARY", "HEXADECIMAL", "continued-execution", "immediate-exit",
];

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c)
}

/// Maps an arbitrary name onto the SMT-LIB simple-symbol alphabet.
fn sanitize(name: &str) -> String {
    let mut s: String = name.chars().map(|c| if is_symbol_char(c) { c } else { '_' }).collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    // Prefixes that solvers treat as theory namespaces.
    if s.starts_with("seq.") || s.starts_with("str.") || s.starts_with("re.") || s.starts_with("int.") {
        s.insert(0, '_');
    }
    s
}

/// Deterministic allocation of unique SMT symbols. Names keep their spelling
/// when possible; collisions and reserved words receive a numeric suffix.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    used: HashSet<String>,
    counters: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self, name: &str) -> String {
        let base = sanitize(name);
        let free = |s: &str, used: &HashSet<String>| !used.contains(s) && !RESERVED.contains(&s);
        if free(&base, &self.used) {
            self.used.insert(base.clone());
            return base;
        }
        let counter = self.counters.entry(base.clone()).or_insert(0);
        loop {
            *counter += 1;
            let candidate = format!("{base}_{counter}");
            if free(&candidate, &self.used) {
                self.used.insert(candidate.clone());
                return candidate;
            }
        }
    }
}

/// Symbols for the features of `fm`, allocated first in every script.
pub fn feature_symbols(table: &mut SymbolTable, fm: &FeatureModel) -> Vec<(String, String)> {
    fm.features().iter().map(|f| (f.clone(), table.fresh(f))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collisions_get_suffixes() {
        let mut t = SymbolTable::new();
        assert_eq!(t.fresh("Part"), "Part");
        assert_eq!(t.fresh("Part"), "Part_1");
        assert_eq!(t.fresh("Int"), "Int_1");
        assert_eq!(t.fresh("my obj"), "my_obj");
        assert_eq!(t.fresh("9lives"), "_9lives");
        assert_eq!(t.fresh("Part_1"), "Part_1_1");
    }
}
