use serde::{Deserialize, Serialize};

use crate::lang::{self, Language};
use crate::taskgen::TaskKind;

/// Places an element into the smallest program that parses it in its role.
fn wrap(element: &str, kind: TaskKind, language: Language) -> String {
    // The newline before the closer keeps a trailing line comment from
    // swallowing it.
    match (kind, language) {
        (TaskKind::ParamCompletion, Language::Python) => format!("__f({element}\n)\n"),
        (TaskKind::ParamCompletion, Language::Java) => format!("__f({element}\n);\n"),
        (TaskKind::MethodInfill, Language::Python) => format!("{}\n", element.trim()),
        (TaskKind::MethodInfill, Language::Java) => format!("{}\n;\n", element.trim()),
    }
}

/// Tree-level equality of a generated masked element against the reference,
/// ignoring whitespace and comments. Unparseable output never matches.
pub fn em_element(generated: &str, reference: &str, kind: TaskKind, language: Language) -> bool {
    let (g, r) = (generated.trim(), reference.trim());
    if g.is_empty() && r.is_empty() {
        return true;
    }
    if g.is_empty() || r.is_empty() {
        return false;
    }
    lang::same_tree(&wrap(generated, kind, language), &wrap(reference, kind, language), language)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmBatchReport {
    pub matches: usize,
    pub total: usize,
    pub em_pct: f64,
}

pub fn em_batch(outcomes: impl IntoIterator<Item = bool>) -> EmBatchReport {
    let (mut matches, mut total) = (0, 0);
    for hit in outcomes {
        total += 1;
        matches += usize::from(hit);
    }
    let em_pct = if total == 0 { 0.0 } else { 100.0 * matches as f64 / total as f64 };
    EmBatchReport { matches, total, em_pct }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: TaskKind = TaskKind::ParamCompletion;
    const M: TaskKind = TaskKind::MethodInfill;

    #[test]
    fn whitespace_invariant() {
        assert!(em_element(" url ", "url", P, Language::Python));
        assert!(em_element("t,0.0,  INF", "t, 0.0, INF", P, Language::Java));
        assert!(em_element("url # why\n", "url", P, Language::Python));
        assert!(em_element("a // c", "a", P, Language::Java));
        assert!(em_element(" get ", "get", M, Language::Java));
        assert!(em_element("/* x */ get", "get", M, Language::Java));
    }

    #[test]
    fn different_elements() {
        assert!(!em_element("post", "get", M, Language::Python));
        assert!(!em_element("url, timeout=5", "url", P, Language::Python));
        assert!(!em_element("a.get", "get", M, Language::Python));
    }

    #[test]
    fn unparseable_and_empty() {
        assert!(!em_element("url, (", "url", P, Language::Python));
        assert!(!em_element("x), g(y", "x", P, Language::Python));
        assert!(em_element("", "", P, Language::Java));
        assert!(em_element("  ", "", P, Language::Python));
        assert!(!em_element("", "url", P, Language::Python));
    }

    #[test]
    fn batch_percentage() {
        let r = em_batch((0..3000).map(|i| i < 2268));
        assert_eq!((r.matches, r.total), (2268, 3000));
        assert!((r.em_pct - 75.6).abs() < 1e-9);
    }
}
