//! Misuse taxonomy, failure sampling, label ingestion and mitigation-set
//! construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lang::Language;
use crate::score::ScoredTask;
use crate::taskgen::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MisuseCategory {
    Intent,
    Hallucination,
    Redundancy,
    Missing,
    /// Failed EM but acceptable on inspection.
    None,
}

impl MisuseCategory {
    pub const ALL: [MisuseCategory; 5] = [
        MisuseCategory::Intent,
        MisuseCategory::Hallucination,
        MisuseCategory::Redundancy,
        MisuseCategory::Missing,
        MisuseCategory::None,
    ];
    pub const MISUSES: [MisuseCategory; 4] =
        [MisuseCategory::Intent, MisuseCategory::Hallucination, MisuseCategory::Redundancy, MisuseCategory::Missing];

    pub fn name(self) -> &'static str {
        match self {
            MisuseCategory::Intent => "Intent",
            MisuseCategory::Hallucination => "Hallucination",
            MisuseCategory::Redundancy => "Redundancy",
            MisuseCategory::Missing => "Missing",
            MisuseCategory::None => "None",
        }
    }

    pub fn is_misuse(self) -> bool {
        self != MisuseCategory::None
    }
}

impl fmt::Display for MisuseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MisuseCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MisuseCategory::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown misuse category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Method,
    Parameter,
}

impl From<TaskKind> for ElementKind {
    fn from(k: TaskKind) -> Self {
        match k {
            TaskKind::MethodInfill => ElementKind::Method,
            TaskKind::ParamCompletion => ElementKind::Parameter,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Method => "Method",
            ElementKind::Parameter => "Parameter",
        })
    }
}

/// One line of `labels.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisuseLabel {
    pub task_id: String,
    pub annotator: String,
    pub category: MisuseCategory,
    pub element_kind: ElementKind,
    pub language: Language,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisusedEntry {
    pub task_id: String,
    pub category: MisuseCategory,
    pub language: Language,
    pub element_kind: ElementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

/// Contents of `mitigation.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationSet {
    pub misused: Vec<MisusedEntry>,
    pub clean: Vec<String>,
    pub fraction: f64,
    pub clean_count: usize,
    pub seed: u64,
}

impl MitigationSet {
    pub fn count(&self, language: Language, kind: ElementKind, category: MisuseCategory) -> usize {
        self.misused
            .iter()
            .filter(|m| m.language == language && m.element_kind == kind && m.category == category)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSample {
    pub model: String,
    pub task_id: String,
    pub language: Language,
    pub kind: TaskKind,
}

#[derive(Debug, thiserror::Error)]
pub enum AnnotateError {
    #[error("cell ({model}, {kind}, {language}) has no failures to sample")]
    EmptyCell { model: String, kind: TaskKind, language: Language },
    #[error("need {needed} clean samples, only {available} available")]
    InsufficientCleanSamples { needed: usize, available: usize },
    #[error("fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("labels line {line}: {message}")]
    LabelSchema { line: usize, message: String },
    #[error("label for `{task_id}` marks a misuse but the task passed EM")]
    LabelOnPassingTask { task_id: String },
    #[error("label references unknown task `{0}`")]
    UnknownTask(String),
    #[error("no labels given")]
    NoLabels,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Seeded uniform sample of EM failures, up to `n_per_cell` per
/// (model, kind, language) cell. Output is grouped by cell in key order.
pub fn sample_failures(
    scored: &[ScoredTask],
    n_per_cell: usize,
    seed: u64,
) -> Result<Vec<FailureSample>, AnnotateError> {
    let mut cells: BTreeMap<(String, TaskKind, Language), Vec<&ScoredTask>> = BTreeMap::new();
    for s in scored {
        cells.entry((s.model.clone(), s.kind, s.language)).or_default();
        if !s.em {
            cells.get_mut(&(s.model.clone(), s.kind, s.language)).unwrap().push(s);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for ((model, kind, language), mut failures) in cells {
        if failures.is_empty() {
            return Err(AnnotateError::EmptyCell { model, kind, language });
        }
        failures.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        failures.dedup_by(|a, b| a.task_id == b.task_id);
        let picked = failures.choose_multiple(&mut rng, n_per_cell.min(failures.len()));
        let mut ids: Vec<&str> = picked.map(|s| s.task_id.as_str()).collect();
        ids.sort_unstable();
        out.extend(ids.into_iter().map(|id| FailureSample {
            model: model.clone(),
            task_id: id.to_string(),
            language,
            kind,
        }));
    }
    Ok(out)
}

/// Parses `labels.jsonl`, rejecting unknown categories and fields.
pub fn parse_labels(text: &str) -> Result<Vec<MisuseLabel>, AnnotateError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| AnnotateError::LabelSchema { line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn read_labels(path: &Path) -> Result<Vec<MisuseLabel>, AnnotateError> {
    parse_labels(&std::fs::read_to_string(path)?)
}

/// Misuse labels must point at tasks that failed EM; `None` labels may
/// point at any scored task.
pub fn check_labels(labels: &[MisuseLabel], scored: &[ScoredTask]) -> Result<(), AnnotateError> {
    for l in labels {
        let relevant: Vec<&ScoredTask> = scored
            .iter()
            .filter(|s| s.task_id == l.task_id && l.model.as_ref().is_none_or(|m| *m == s.model))
            .collect();
        if relevant.is_empty() {
            return Err(AnnotateError::UnknownTask(l.task_id.clone()));
        }
        if l.category.is_misuse() && relevant.iter().all(|s| s.em) {
            return Err(AnnotateError::LabelOnPassingTask { task_id: l.task_id.clone() });
        }
    }
    Ok(())
}

/// `round(x)` with halves going up; tolerant of representation error.
pub fn round_half_up(x: f64) -> usize {
    let snapped = (x * 1e9).round() / 1e9;
    (snapped + 0.5).floor().max(0.0) as usize
}

/// Stratified sample of misuse labels per (language, element kind,
/// category) plus `clean_count` EM-passing tasks from `clean_pool`.
pub fn build_mitigation_set(
    labels: &[MisuseLabel],
    clean_pool: &[ScoredTask],
    fraction: f64,
    clean_count: usize,
    seed: u64,
) -> Result<MitigationSet, AnnotateError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AnnotateError::BadFraction(fraction));
    }
    let mut strata: BTreeMap<(Language, ElementKind, MisuseCategory), BTreeMap<&str, Option<&String>>> =
        BTreeMap::new();
    for l in labels.iter().filter(|l| l.category.is_misuse()) {
        strata
            .entry((l.language, l.element_kind, l.category))
            .or_default()
            .entry(&l.task_id)
            .or_insert(l.model.as_ref());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut misused = Vec::new();
    for ((language, element_kind, category), ids) in &strata {
        let ids: Vec<(&str, Option<&String>)> = ids.iter().map(|(k, v)| (*k, *v)).collect();
        let k = round_half_up(fraction * ids.len() as f64).min(ids.len());
        let mut picked: Vec<(&str, Option<&String>)> = ids.choose_multiple(&mut rng, k).copied().collect();
        picked.sort_unstable();
        misused.extend(picked.into_iter().map(|(id, model)| MisusedEntry {
            task_id: id.to_string(),
            category: *category,
            language: *language,
            element_kind: *element_kind,
            model: model.cloned(),
        }));
    }

    let taken: BTreeSet<&str> = misused.iter().map(|m| m.task_id.as_str()).collect();
    let labelled: BTreeSet<&str> = labels.iter().map(|l| l.task_id.as_str()).collect();
    let pool: Vec<&str> = clean_pool
        .iter()
        .filter(|s| s.em && !taken.contains(s.task_id.as_str()) && !labelled.contains(s.task_id.as_str()))
        .map(|s| s.task_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if pool.len() < clean_count {
        return Err(AnnotateError::InsufficientCleanSamples { needed: clean_count, available: pool.len() });
    }
    let mut clean: Vec<String> = pool.choose_multiple(&mut rng, clean_count).map(|s| s.to_string()).collect();
    clean.sort_unstable();

    Ok(MitigationSet { misused, clean, fraction, clean_count, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionCell {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub language: Language,
    pub element_kind: ElementKind,
    pub total: usize,
    pub counts: BTreeMap<MisuseCategory, usize>,
    /// Percentages over all five categories; sums to 100.
    pub percentages: BTreeMap<MisuseCategory, f64>,
}

/// Category shares per (model, language, element kind) cell.
pub fn distribution(labels: &[MisuseLabel]) -> Result<Vec<DistributionCell>, AnnotateError> {
    if labels.is_empty() {
        return Err(AnnotateError::NoLabels);
    }
    let mut cells: BTreeMap<(Option<String>, Language, ElementKind), BTreeMap<MisuseCategory, usize>> = BTreeMap::new();
    for l in labels {
        *cells.entry((l.model.clone(), l.language, l.element_kind)).or_default().entry(l.category).or_insert(0) += 1;
    }
    Ok(cells
        .into_iter()
        .map(|((model, language, element_kind), partial)| {
            let total: usize = partial.values().sum();
            let counts: BTreeMap<_, _> =
                MisuseCategory::ALL.into_iter().map(|c| (c, partial.get(&c).copied().unwrap_or(0))).collect();
            let percentages = counts.iter().map(|(c, n)| (*c, 100.0 * *n as f64 / total as f64)).collect();
            DistributionCell { model, language, element_kind, total, counts, percentages }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(id: &str, cat: MisuseCategory, lang: Language, kind: ElementKind) -> MisuseLabel {
        MisuseLabel {
            task_id: id.into(),
            annotator: "a1".into(),
            category: cat,
            element_kind: kind,
            language: lang,
            model: None,
            note: String::new(),
        }
    }

    fn scored(model: &str, id: &str, kind: TaskKind, lang: Language, em: bool) -> ScoredTask {
        ScoredTask {
            task_id: id.into(),
            model: model.into(),
            language: lang,
            kind,
            ground_truth: String::new(),
            element: None,
            em,
            bleu: None,
            cbs_f3: None,
        }
    }

    fn failures(n_each: usize) -> Vec<ScoredTask> {
        let mut v = Vec::new();
        for kind in [TaskKind::MethodInfill, TaskKind::ParamCompletion] {
            for lang in Language::ALL {
                for i in 0..n_each {
                    v.push(scored("m", &format!("{lang}-{kind:?}-{i:04}"), kind, lang, false));
                }
                v.push(scored("m", &format!("{lang}-{kind:?}-pass"), kind, lang, true));
            }
        }
        v
    }

    #[test]
    fn four_cells_of_three_hundred() {
        let s = sample_failures(&failures(400), 300, 9).unwrap();
        assert_eq!(s.len(), 1200);
        assert!(s.iter().all(|f| !f.task_id.ends_with("pass")));
    }

    #[test]
    fn undersized_cell_and_determinism() {
        let s = sample_failures(&failures(10), 300, 1).unwrap();
        assert_eq!(s.len(), 40);
        let big = failures(50);
        assert_eq!(sample_failures(&big, 20, 4).unwrap(), sample_failures(&big, 20, 4).unwrap());
        assert_ne!(sample_failures(&big, 20, 4).unwrap(), sample_failures(&big, 20, 5).unwrap());
    }

    #[test]
    fn empty_cell_is_an_error() {
        let v = vec![scored("m", "a", TaskKind::MethodInfill, Language::Java, true)];
        assert!(matches!(sample_failures(&v, 5, 0), Err(AnnotateError::EmptyCell { .. })));
    }

    fn java_param_population() -> Vec<MisuseLabel> {
        let mut labels = Vec::new();
        for (cat, n) in [
            (MisuseCategory::Intent, 105),
            (MisuseCategory::Hallucination, 886),
            (MisuseCategory::Redundancy, 165),
            (MisuseCategory::Missing, 314),
            (MisuseCategory::None, 40),
        ] {
            for i in 0..n {
                labels.push(label(&format!("{cat}-{i}"), cat, Language::Java, ElementKind::Parameter));
            }
        }
        labels
    }

    fn clean_pool(n: usize) -> Vec<ScoredTask> {
        (0..n).map(|i| scored("m", &format!("clean-{i}"), TaskKind::ParamCompletion, Language::Java, true)).collect()
    }

    #[test]
    fn java_params_ten_percent_strata() {
        let set = build_mitigation_set(&java_param_population(), &clean_pool(150), 0.1, 100, 3).unwrap();
        let j = |c| set.count(Language::Java, ElementKind::Parameter, c);
        assert_eq!(j(MisuseCategory::Intent), 11);
        assert_eq!(j(MisuseCategory::Hallucination), 89);
        assert_eq!(j(MisuseCategory::Redundancy), 17);
        assert_eq!(j(MisuseCategory::Missing), 31);
        assert_eq!(j(MisuseCategory::None), 0);
        assert_eq!(set.misused.len(), 148);
        assert_eq!(set.clean.len(), 100);
        let misused: BTreeSet<_> = set.misused.iter().map(|m| &m.task_id).collect();
        assert!(set.clean.iter().all(|c| !misused.contains(c)));
    }

    #[test]
    fn full_fraction_and_reproducibility() {
        let labels = java_param_population();
        let set = build_mitigation_set(&labels, &[], 1.0, 0, 0).unwrap();
        assert_eq!(set.misused.len(), labels.iter().filter(|l| l.category.is_misuse()).count());
        let a = build_mitigation_set(&labels, &clean_pool(10), 0.1, 5, 7).unwrap();
        let b = build_mitigation_set(&labels, &clean_pool(10), 0.1, 5, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clean_pool_shortfall_and_bad_fraction() {
        let labels = java_param_population();
        let err = build_mitigation_set(&labels, &clean_pool(3), 0.1, 100, 0).unwrap_err();
        assert!(matches!(err, AnnotateError::InsufficientCleanSamples { needed: 100, available: 3 }));
        assert!(matches!(build_mitigation_set(&labels, &[], 0.0, 0, 0), Err(AnnotateError::BadFraction(_))));
    }

    #[test]
    fn half_rounds_up() {
        assert_eq!(round_half_up(10.5), 11);
        assert_eq!(round_half_up(0.1 * 165.0), 17);
        assert_eq!(round_half_up(31.4), 31);
        assert_eq!(round_half_up(0.0), 0);
    }

    #[test]
    fn distribution_percentages() {
        let mut labels = Vec::new();
        for i in 0..30 {
            let cat = if i < 13 { MisuseCategory::Hallucination } else { MisuseCategory::Intent };
            labels.push(label(&i.to_string(), cat, Language::Java, ElementKind::Parameter));
        }
        let d = distribution(&labels).unwrap();
        assert_eq!(d.len(), 1);
        let h = d[0].percentages[&MisuseCategory::Hallucination];
        assert_eq!(format!("{h:.1}"), "43.3");

        let single = distribution(&labels[..1]).unwrap();
        assert_eq!(single[0].percentages[&MisuseCategory::Hallucination], 100.0);

        let uniform: Vec<_> = MisuseCategory::ALL
            .into_iter()
            .map(|c| label(c.name(), c, Language::Python, ElementKind::Method))
            .collect();
        let u = distribution(&uniform).unwrap();
        assert!(u[0].percentages.values().all(|p| (*p - 20.0).abs() < 1e-12));
        assert!(matches!(distribution(&[]), Err(AnnotateError::NoLabels)));
    }

    #[test]
    fn label_schema_validation() {
        let ok = r#"{"task_id":"t","annotator":"a","category":"Missing","element_kind":"Parameter","language":"java","note":""}"#;
        assert_eq!(parse_labels(ok).unwrap()[0].category, MisuseCategory::Missing);
        let bad =
            r#"{"task_id":"t","annotator":"a","category":"Outdated","element_kind":"Parameter","language":"java"}"#;
        assert!(matches!(parse_labels(&format!("{ok}\n{bad}\n")), Err(AnnotateError::LabelSchema { line: 2, .. })));
    }

    #[test]
    fn labels_must_target_failures() {
        let s = vec![
            scored("m", "pass", TaskKind::MethodInfill, Language::Python, true),
            scored("m", "fail", TaskKind::MethodInfill, Language::Python, false),
        ];
        let ok = [
            label("fail", MisuseCategory::Intent, Language::Python, ElementKind::Method),
            label("pass", MisuseCategory::None, Language::Python, ElementKind::Method),
        ];
        check_labels(&ok, &s).unwrap();
        let bad = [label("pass", MisuseCategory::Intent, Language::Python, ElementKind::Method)];
        assert!(matches!(check_labels(&bad, &s), Err(AnnotateError::LabelOnPassingTask { .. })));
    }
}
