//! Scores model completions against their tasks and folds the per-task
//! results into the nested `report.json` shape.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drfix::{RepairInput, RepairTrace};
use crate::lang::{self, Language};
use crate::metrics::{self, EmbeddingProvider, MetricError, Smoothing};
use crate::taskgen::{extract_element, TaskInstance, TaskKind};

/// One line of `completions.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub task_id: String,
    pub model: String,
    pub raw: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Bleu,
    Cbs,
    Em,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bleu" => Ok(Metric::Bleu),
            "cbs" | "codebertscore" => Ok(Metric::Cbs),
            "em" | "exact_match" => Ok(Metric::Em),
            other => Err(format!("unknown metric `{other}` (expected bleu, cbs or em)")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Bleu => "bleu",
            Metric::Cbs => "cbs",
            Metric::Em => "em",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub metrics: BTreeSet<Metric>,
    pub smoothing: Smoothing,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions { metrics: [Metric::Bleu, Metric::Cbs, Metric::Em].into(), smoothing: Smoothing::None }
    }
}

/// Per-task outcome; one line of `scored.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTask {
    pub task_id: String,
    pub model: String,
    pub language: Language,
    pub kind: TaskKind,
    pub ground_truth: String,
    /// `None` when no element could be extracted from the completion.
    pub element: Option<String>,
    pub em: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cbs_f3: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    /// Stored in [0, 1]; tables scale to 0..100.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cbs_f3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em_matches: Option<usize>,
    pub n: usize,
}

/// model -> language -> task kind -> cell.
pub type MetricReport = BTreeMap<String, BTreeMap<Language, BTreeMap<TaskKind, MetricCell>>>;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("completion references unknown task `{0}`")]
    UnknownTask(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub fn score_one(
    task: &TaskInstance,
    completion: &CompletionRecord,
    opts: &ScoreOptions,
    provider: &dyn EmbeddingProvider,
) -> Result<ScoredTask, ScoreError> {
    let element = extract_element(&completion.raw, task.kind, task.language).ok();
    let em = opts.metrics.contains(&Metric::Em)
        && element.as_deref().is_some_and(|e| metrics::em_element(e, &task.ground_truth, task.kind, task.language));

    let reference = lang::token_texts(&task.statement_with(&task.ground_truth), task.language);
    let candidate = element.as_deref().map(|e| lang::token_texts(&task.statement_with(e), task.language));

    let bleu = if opts.metrics.contains(&Metric::Bleu) {
        Some(match &candidate {
            Some(c) => metrics::bleu_with(c, &reference, opts.smoothing)?.score,
            None => 0.0,
        })
    } else {
        None
    };
    let cbs_f3 = if opts.metrics.contains(&Metric::Cbs) {
        Some(match &candidate {
            Some(c) => metrics::codebertscore(c, &reference, provider)?.f3,
            None => 0.0,
        })
    } else {
        None
    };
    Ok(ScoredTask {
        task_id: task.task_id.clone(),
        model: completion.model.clone(),
        language: task.language,
        kind: task.kind,
        ground_truth: task.ground_truth.clone(),
        element,
        em,
        bleu,
        cbs_f3,
    })
}

/// Scores every completion; output is ordered by (model, task_id).
pub fn score_all(
    tasks: &[TaskInstance],
    completions: &[CompletionRecord],
    opts: &ScoreOptions,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<ScoredTask>, ScoreError> {
    let by_id: HashMap<&str, &TaskInstance> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let mut scored = completions
        .par_iter()
        .map(|c| {
            let task = by_id.get(c.task_id.as_str()).ok_or_else(|| ScoreError::UnknownTask(c.task_id.clone()))?;
            score_one(task, c, opts, provider)
        })
        .collect::<Result<Vec<_>, _>>()?;
    scored.sort_by(|a, b| (&a.model, &a.task_id).cmp(&(&b.model, &b.task_id)));
    Ok(scored)
}

/// Scores repaired snippets against their references. EM is tree
/// equality of the whole snippet; inputs without a reference are skipped.
pub fn score_repairs(
    inputs: &[RepairInput],
    traces: &[RepairTrace],
    model: &str,
    opts: &ScoreOptions,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<ScoredTask>, ScoreError> {
    let by_id: HashMap<&str, &RepairInput> = inputs.iter().map(|i| (i.task_id.as_str(), i)).collect();
    let mut out = Vec::new();
    for t in traces {
        let input = by_id.get(t.task_id.as_str()).ok_or_else(|| ScoreError::UnknownTask(t.task_id.clone()))?;
        let Some(reference) = input.reference.as_deref() else { continue };
        let lang = input.language;
        let cand = lang::token_texts(&t.repaired_code, lang);
        let refr = lang::token_texts(reference, lang);
        let bleu = match opts.metrics.contains(&Metric::Bleu) {
            true if refr.is_empty() => Some(if cand.is_empty() { 100.0 } else { 0.0 }),
            true => Some(metrics::bleu_with(&cand, &refr, opts.smoothing)?.score),
            false => None,
        };
        let cbs_f3 = match opts.metrics.contains(&Metric::Cbs) {
            true if refr.is_empty() => Some(if cand.is_empty() { 1.0 } else { 0.0 }),
            true => Some(metrics::codebertscore(&cand, &refr, provider)?.f3),
            false => None,
        };
        out.push(ScoredTask {
            task_id: t.task_id.clone(),
            model: model.to_string(),
            language: lang,
            kind: input.kind,
            ground_truth: reference.to_string(),
            element: Some(t.repaired_code.clone()),
            em: opts.metrics.contains(&Metric::Em) && lang::same_tree(&t.repaired_code, reference, lang),
            bleu,
            cbs_f3,
        });
    }
    out.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    Ok(out)
}

/// Folds scored tasks into cells, in (model, task_id) order.
pub fn aggregate(scored: &[ScoredTask], opts: &ScoreOptions) -> MetricReport {
    #[derive(Default)]
    struct Acc {
        bleu: f64,
        cbs: f64,
        em: usize,
        n: usize,
    }
    let mut ordered: Vec<&ScoredTask> = scored.iter().collect();
    ordered.sort_by(|a, b| (&a.model, &a.task_id).cmp(&(&b.model, &b.task_id)));
    let mut acc: BTreeMap<(String, Language, TaskKind), Acc> = BTreeMap::new();
    for s in ordered {
        let a = acc.entry((s.model.clone(), s.language, s.kind)).or_default();
        a.bleu += s.bleu.unwrap_or(0.0);
        a.cbs += s.cbs_f3.unwrap_or(0.0);
        a.em += usize::from(s.em);
        a.n += 1;
    }
    let mut report = MetricReport::new();
    for ((model, language, kind), a) in acc {
        let n = a.n as f64;
        let has = |m| opts.metrics.contains(&m);
        let cell = MetricCell {
            bleu: has(Metric::Bleu).then(|| a.bleu / n),
            cbs_f3: has(Metric::Cbs).then(|| a.cbs / n),
            em_pct: has(Metric::Em).then(|| 100.0 * a.em as f64 / n),
            em_matches: has(Metric::Em).then_some(a.em),
            n: a.n,
        };
        report.entry(model).or_default().entry(language).or_default().insert(kind, cell);
    }
    report
}
