//! Staged repair pipeline: detect (with category classification folded into
//! the detect response), reason, fix. Prompts come from a versioned
//! plain-text template pack.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotate::{MisuseCategory, MitigationSet};
use crate::lang::{self, Language};
use crate::modelgw::{ChatMessage, Gateway, GatewayError, GenParams, GenRequest};
use crate::score::CompletionRecord;
use crate::taskgen::{extract_element, TaskInstance, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineVariant {
    Baseline,
    NoTaxonomy,
    Full,
}

impl PipelineVariant {
    pub const ALL: [PipelineVariant; 3] =
        [PipelineVariant::Baseline, PipelineVariant::NoTaxonomy, PipelineVariant::Full];

    pub fn dir_name(self) -> &'static str {
        match self {
            PipelineVariant::Baseline => "baseline",
            PipelineVariant::NoTaxonomy => "no_taxonomy",
            PipelineVariant::Full => "full",
        }
    }

    /// Stages this variant issues requests for, in order.
    pub fn stages(self) -> &'static [Stage] {
        match self {
            PipelineVariant::Baseline => &[Stage::Fix],
            _ => &[Stage::Detect, Stage::Reason, Stage::Fix],
        }
    }
}

impl fmt::Display for PipelineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for PipelineVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "baseline" => Ok(PipelineVariant::Baseline),
            "no_taxonomy" | "notaxonomy" => Ok(PipelineVariant::NoTaxonomy),
            "full" => Ok(PipelineVariant::Full),
            other => Err(format!("unknown variant `{other}` (expected baseline, no-taxonomy or full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detect,
    Reason,
    Fix,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Detect, Stage::Reason, Stage::Fix];

    pub fn file_stem(self) -> &'static str {
        match self {
            Stage::Detect => "detect",
            Stage::Reason => "reason",
            Stage::Fix => "fix",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

/// Number of exemplars held per (stage, category) and rendered per stage.
pub const SHOTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exemplar {
    pub input: String,
    pub output: String,
}

/// Per stage, per misuse category: exactly [`SHOTS`] ordered exemplars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExemplarStore {
    entries: BTreeMap<(Stage, MisuseCategory), Vec<Exemplar>>,
    /// Categories whose first exemplar fills the detect stage's shots.
    pub detect_shots: [MisuseCategory; SHOTS],
}

impl ExemplarStore {
    pub fn get(&self, stage: Stage, category: MisuseCategory) -> &[Exemplar] {
        self.entries.get(&(stage, category)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The two shots shown for `stage`. Reason and fix use the detected
    /// category's pair; detect, and runs without a category, draw one
    /// exemplar from each `detect_shots` category.
    pub fn shots(&self, stage: Stage, category: Option<MisuseCategory>) -> Vec<&Exemplar> {
        match category.filter(|c| c.is_misuse() && stage != Stage::Detect) {
            Some(c) => self.get(stage, c).iter().collect(),
            None => self.detect_shots.iter().filter_map(|c| self.get(stage, *c).first()).collect(),
        }
    }
}

/// Parses an exemplar file: blocks introduced by `=== input` and
/// `=== output` marker lines.
pub fn parse_exemplars(text: &str) -> Result<Vec<Exemplar>, String> {
    let mut out = Vec::new();
    let mut input: Option<String> = None;
    let mut current: Option<(bool, String)> = None;
    let flush =
        |cur: Option<(bool, String)>, input: &mut Option<String>, out: &mut Vec<Exemplar>| -> Result<(), String> {
            match cur {
                Some((false, body)) => *input = Some(body),
                Some((true, body)) => {
                    let i = input.take().ok_or("output block without input")?;
                    out.push(Exemplar { input: i, output: body.trim_end_matches('\n').to_string() });
                }
                None => {}
            }
            Ok(())
        };
    for line in text.split_inclusive('\n') {
        let marker = line.trim_end();
        if marker == "=== input" || marker == "=== output" {
            flush(current.take(), &mut input, &mut out)?;
            if marker == "=== output" && input.is_none() {
                return Err("output block without input".into());
            }
            current = Some((marker == "=== output", String::new()));
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
        } else if !line.trim().is_empty() {
            return Err("text before first marker".into());
        }
    }
    flush(current.take(), &mut input, &mut out)?;
    if input.is_some() {
        return Err("input block without output".into());
    }
    Ok(out)
}

macro_rules! builtin_files {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/prompts/", $path)))),*]
    };
}

const BUILTIN: &[(&str, &str)] = builtin_files!(
    "VERSION",
    "definitions.txt",
    "baseline/fix.txt",
    "no_taxonomy/detect.txt",
    "no_taxonomy/reason.txt",
    "no_taxonomy/fix.txt",
    "full/detect.txt",
    "full/reason.txt",
    "full/fix.txt",
    "exemplars/detect/intent.txt",
    "exemplars/detect/hallucination.txt",
    "exemplars/detect/redundancy.txt",
    "exemplars/detect/missing.txt",
    "exemplars/reason/intent.txt",
    "exemplars/reason/hallucination.txt",
    "exemplars/reason/redundancy.txt",
    "exemplars/reason/missing.txt",
    "exemplars/fix/intent.txt",
    "exemplars/fix/hallucination.txt",
    "exemplars/fix/redundancy.txt",
    "exemplars/fix/missing.txt",
);

/// Templates, category definitions and exemplars for every variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatePack {
    pub version: String,
    pub definitions: String,
    templates: BTreeMap<(PipelineVariant, Stage), String>,
    pub exemplars: ExemplarStore,
}

impl TemplatePack {
    /// The pack compiled into the library.
    pub fn builtin() -> Self {
        Self::from_lookup(|p| BUILTIN.iter().find(|(k, _)| *k == p).map(|(_, v)| v.to_string()))
            .expect("builtin prompt pack is valid")
    }

    /// Loads a pack laid out as `<dir>/<variant>/<stage>.txt`,
    /// `<dir>/definitions.txt`, `<dir>/exemplars/<stage>/<category>.txt`
    /// and `<dir>/VERSION`.
    pub fn load(dir: &Path) -> Result<Self, DrFixError> {
        if !dir.is_dir() {
            return Err(DrFixError::TemplatePack(format!("{} is not a directory", dir.display())));
        }
        Self::from_lookup(|p| fs::read_to_string(dir.join(p)).ok())
    }

    fn from_lookup(read: impl Fn(&str) -> Option<String>) -> Result<Self, DrFixError> {
        let need = |p: &str| read(p).ok_or_else(|| DrFixError::TemplatePack(format!("missing {p}")));
        let version = need("VERSION")?.trim().to_string();
        let definitions = need("definitions.txt")?;
        let mut templates = BTreeMap::new();
        for v in PipelineVariant::ALL {
            for s in v.stages() {
                templates.insert((v, *s), need(&format!("{}/{}.txt", v.dir_name(), s.file_stem()))?);
            }
        }
        let mut entries = BTreeMap::new();
        for s in Stage::ALL {
            for c in MisuseCategory::MISUSES {
                let path = format!("exemplars/{}/{}.txt", s.file_stem(), c.name().to_ascii_lowercase());
                let list =
                    parse_exemplars(&need(&path)?).map_err(|e| DrFixError::TemplatePack(format!("{path}: {e}")))?;
                if list.len() != SHOTS {
                    return Err(DrFixError::TemplatePack(format!(
                        "{path}: expected {SHOTS} exemplars, found {}",
                        list.len()
                    )));
                }
                entries.insert((s, c), list);
            }
        }
        let exemplars =
            ExemplarStore { entries, detect_shots: [MisuseCategory::Intent, MisuseCategory::Hallucination] };
        Ok(TemplatePack { version, definitions, templates, exemplars })
    }

    pub fn template(&self, variant: PipelineVariant, stage: Stage) -> Option<&str> {
        self.templates.get(&(variant, stage)).map(String::as_str)
    }
}

/// Earlier stage outputs threaded into later prompts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageContext {
    pub detect_output: Option<String>,
    pub reason_output: Option<String>,
    pub category: Option<MisuseCategory>,
}

#[derive(Debug, thiserror::Error)]
pub enum DrFixError {
    #[error("{stage} prompt needs the {missing} output")]
    MissingContext { stage: Stage, missing: &'static str },
    #[error("variant {variant} has no {stage} stage")]
    NoSuchStage { variant: PipelineVariant, stage: Stage },
    #[error("detect output names no known category: {0:?}")]
    CategoryParseFailure(String),
    #[error("fix output contains no usable code")]
    RepairExtractionFailure,
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("template pack: {0}")]
    TemplatePack(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn render_exemplars(shots: &[&Exemplar]) -> String {
    let mut out = String::new();
    for (i, e) in shots.iter().enumerate() {
        out.push_str(&format!(
            "Example {}:\nInput:\n{}\nOutput:\n{}\n\n",
            i + 1,
            e.input.trim_end_matches('\n'),
            e.output
        ));
    }
    out
}

/// Replaces known `{name}` placeholders in one pass; other braces are kept.
fn substitute(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        match values.iter().find(|(k, _)| tail[1..].starts_with(k) && tail[1 + k.len()..].starts_with('}')) {
            Some((k, v)) => {
                out.push_str(v);
                rest = &tail[k.len() + 2..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn render_prompt(
    stage: Stage,
    snippet: &str,
    variant: PipelineVariant,
    pack: &TemplatePack,
    ctx: &StageContext,
) -> Result<String, DrFixError> {
    let template = pack.template(variant, stage).ok_or(DrFixError::NoSuchStage { variant, stage })?;
    let staged = variant != PipelineVariant::Baseline;
    if staged && stage != Stage::Detect && ctx.detect_output.is_none() {
        return Err(DrFixError::MissingContext { stage, missing: "detect" });
    }
    if staged && stage == Stage::Fix && ctx.reason_output.is_none() {
        return Err(DrFixError::MissingContext { stage, missing: "reason" });
    }
    let exemplars = render_exemplars(&pack.exemplars.shots(stage, ctx.category));
    let values = [
        ("snippet", snippet.trim_end_matches('\n')),
        ("detect_output", ctx.detect_output.as_deref().unwrap_or("")),
        ("reason_output", ctx.reason_output.as_deref().unwrap_or("")),
        ("exemplars", exemplars.as_str()),
        ("definitions", pack.definitions.as_str()),
    ];
    Ok(substitute(template, &values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectOutcome {
    Refusal,
    Misuse(MisuseCategory),
}

fn contains_word(haystack: &str, word: &str) -> bool {
    let lower = haystack.to_ascii_lowercase();
    let word = word.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    lower.match_indices(&word).any(|(i, _)| {
        let before = i.checked_sub(1).map(|j| bytes[j]);
        let after = bytes.get(i + word.len()).copied();
        !before.is_some_and(|b| b.is_ascii_alphanumeric()) && !after.is_some_and(|b| b.is_ascii_alphanumeric())
    })
}

/// "no issue" anywhere means refusal; otherwise the first category named,
/// checked in the order Intent, Hallucination, Redundancy, Missing.
pub fn parse_detect(raw: &str) -> Result<DetectOutcome, DrFixError> {
    if contains_word(raw, "no issue") {
        return Ok(DetectOutcome::Refusal);
    }
    MisuseCategory::MISUSES
        .into_iter()
        .find(|c| contains_word(raw, c.name()))
        .map(DetectOutcome::Misuse)
        .ok_or_else(|| DrFixError::CategoryParseFailure(raw.to_string()))
}

/// First fenced block, else the longest run of lines that parses under
/// `language`.
pub fn extract_repair(fix_raw: &str, language: Language) -> Result<String, DrFixError> {
    let lines: Vec<&str> = fix_raw.split_inclusive('\n').collect();
    if let Some(open) = lines.iter().position(|l| l.trim_start().starts_with("```")) {
        if let Some(len) = lines[open + 1..].iter().position(|l| l.trim_start().starts_with("```")) {
            return Ok(lines[open + 1..open + 1 + len].concat());
        }
    }
    const MAX_SCAN_LINES: usize = 200;
    let lines = &lines[..lines.len().min(MAX_SCAN_LINES)];
    let mut best: Option<(usize, usize)> = None;
    for start in 0..lines.len() {
        for end in (start + 1..=lines.len()).rev() {
            if best.is_some_and(|(s, e)| e - s >= end - start) {
                break;
            }
            let region = lines[start..end].concat();
            if !region.trim().is_empty() && lang::is_well_formed(&region, language) {
                best = Some((start, end));
                break;
            }
        }
    }
    let (s, e) = best.ok_or(DrFixError::RepairExtractionFailure)?;
    let mut code = lines[s..e].concat();
    if !code.ends_with('\n') {
        code.push('\n');
    }
    Ok(code)
}

/// One line of `repairs.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairTrace {
    pub task_id: String,
    pub variant: PipelineVariant,
    pub detect_raw: String,
    pub detected_category: Option<MisuseCategory>,
    pub reason_raw: String,
    pub fix_raw: String,
    pub repaired_code: String,
    pub refused: bool,
    pub requests_made: u32,
}

/// A snippet to repair; one line of the drfix input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairInput {
    pub task_id: String,
    pub language: Language,
    pub kind: TaskKind,
    pub snippet: String,
    /// Known-good code for scoring; for clean inputs it equals `snippet`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

/// Lines of context kept on each side of the element in a repair snippet.
pub const SNIPPET_CONTEXT_LINES: usize = 6;

/// Repair inputs for a mitigation set. Misused entries carry the model's
/// generated element; clean entries carry the ground truth. The reference
/// is always the ground-truth snippet.
pub fn repair_inputs(
    set: &MitigationSet,
    tasks: &[TaskInstance],
    completions: &[CompletionRecord],
) -> Result<Vec<RepairInput>, DrFixError> {
    let task = |id: &str| tasks.iter().find(|t| t.task_id == id).ok_or_else(|| DrFixError::UnknownTask(id.to_string()));
    let mut out: Vec<RepairInput> = Vec::new();
    let mut seen = BTreeSet::new();
    for m in &set.misused {
        if !seen.insert(m.task_id.clone()) {
            continue;
        }
        let t = task(&m.task_id)?;
        let completion = completions
            .iter()
            .filter(|c| c.task_id == m.task_id && m.model.as_ref().is_none_or(|model| *model == c.model))
            .min_by(|a, b| a.model.cmp(&b.model))
            .ok_or_else(|| DrFixError::UnknownTask(m.task_id.clone()))?;
        let element = extract_element(&completion.raw, t.kind, t.language).unwrap_or_default();
        out.push(RepairInput {
            task_id: t.task_id.clone(),
            language: t.language,
            kind: t.kind,
            snippet: t.snippet_with(&element, SNIPPET_CONTEXT_LINES),
            reference: Some(t.snippet_with(&t.ground_truth, SNIPPET_CONTEXT_LINES)),
        });
    }
    for id in &set.clean {
        if !seen.insert(id.clone()) {
            continue;
        }
        let t = task(id)?;
        let code = t.snippet_with(&t.ground_truth, SNIPPET_CONTEXT_LINES);
        out.push(RepairInput {
            task_id: t.task_id.clone(),
            language: t.language,
            kind: t.kind,
            snippet: code.clone(),
            reference: Some(code),
        });
    }
    Ok(out)
}

pub struct Pipeline<'a> {
    pub gateway: &'a Gateway,
    pub pack: &'a TemplatePack,
    pub model: String,
    pub params: GenParams,
}

impl Pipeline<'_> {
    fn ask(&self, prompt: String) -> Result<String, DrFixError> {
        let req = GenRequest::chat(&self.model, vec![ChatMessage::user(prompt)], self.params);
        Ok(self.gateway.generate(&req)?.text)
    }

    pub fn run(&self, input: &RepairInput, variant: PipelineVariant) -> Result<RepairTrace, DrFixError> {
        let mut trace = RepairTrace {
            task_id: input.task_id.clone(),
            variant,
            detect_raw: String::new(),
            detected_category: None,
            reason_raw: String::new(),
            fix_raw: String::new(),
            repaired_code: String::new(),
            refused: false,
            requests_made: 0,
        };
        let mut ctx = StageContext::default();
        if variant != PipelineVariant::Baseline {
            trace.detect_raw = self.ask(render_prompt(Stage::Detect, &input.snippet, variant, self.pack, &ctx)?)?;
            trace.requests_made += 1;
            match parse_detect(&trace.detect_raw) {
                Ok(DetectOutcome::Refusal) => {
                    trace.refused = true;
                    trace.repaired_code = input.snippet.clone();
                    return Ok(trace);
                }
                Ok(DetectOutcome::Misuse(c)) => trace.detected_category = Some(c),
                // Without a taxonomy in the prompt, an unnamed category is expected.
                Err(_) if variant == PipelineVariant::NoTaxonomy => {}
                Err(e) => return Err(e),
            }
            ctx.category = trace.detected_category;
            ctx.detect_output = Some(trace.detect_raw.clone());
            trace.reason_raw = self.ask(render_prompt(Stage::Reason, &input.snippet, variant, self.pack, &ctx)?)?;
            trace.requests_made += 1;
            ctx.reason_output = Some(trace.reason_raw.clone());
        }
        trace.fix_raw = self.ask(render_prompt(Stage::Fix, &input.snippet, variant, self.pack, &ctx)?)?;
        trace.requests_made += 1;
        trace.repaired_code = extract_repair(&trace.fix_raw, input.language)?;
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelgw::{GatewayLimits, ScriptedBackend};
    use std::sync::Arc;

    const DETECT_SENTENCE: &str = "Please answer with \"No Issue\" if there is no obvious API misuse.";

    #[test]
    fn builtin_pack_matches_disk() {
        let disk = TemplatePack::load(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/prompts"))).unwrap();
        assert_eq!(disk, TemplatePack::builtin());
        assert_eq!(TemplatePack::builtin().version, "1");
    }

    #[test]
    fn full_detect_prompt() {
        let pack = TemplatePack::builtin();
        let p =
            render_prompt(Stage::Detect, "x = 1\n", PipelineVariant::Full, &pack, &StageContext::default()).unwrap();
        for c in MisuseCategory::MISUSES {
            assert!(p.contains(c.name()));
        }
        assert!(p.contains(DETECT_SENTENCE));
        assert!(p.contains(&pack.definitions));
        assert_eq!(p.matches("Example ").count(), SHOTS);
        assert!(p.trim_end().ends_with(DETECT_SENTENCE));
    }

    #[test]
    fn no_taxonomy_detect_prompt() {
        let pack = TemplatePack::builtin();
        let p = render_prompt(Stage::Detect, "x = 1\n", PipelineVariant::NoTaxonomy, &pack, &StageContext::default())
            .unwrap();
        assert!(p.contains(DETECT_SENTENCE));
        assert!(!p.contains("Category definitions"));
        assert!(!p.contains("Example "));
    }

    #[test]
    fn reason_and_fix_thread_context() {
        let pack = TemplatePack::builtin();
        let mut ctx = StageContext::default();
        let err = render_prompt(Stage::Reason, "x", PipelineVariant::Full, &pack, &ctx).unwrap_err();
        assert!(matches!(err, DrFixError::MissingContext { missing: "detect", .. }));
        ctx.detect_output = Some("Hallucination: {snippet} is odd".into());
        ctx.category = Some(MisuseCategory::Hallucination);
        let r = render_prompt(Stage::Reason, "x", PipelineVariant::Full, &pack, &ctx).unwrap();
        assert!(r.contains("Think step by step"));
        assert!(r.contains("Hallucination: {snippet} is odd"));
        assert_eq!(r.matches("Example ").count(), SHOTS);
        assert!(r.contains("readAllText"));
        assert!(render_prompt(Stage::Fix, "x", PipelineVariant::Full, &pack, &ctx).is_err());
        ctx.reason_output = Some("because".into());
        let f = render_prompt(Stage::Fix, "x", PipelineVariant::Full, &pack, &ctx).unwrap();
        assert!(f.contains("Propose a correction"));
        assert!(f.contains("because"));
        let again = render_prompt(Stage::Fix, "x", PipelineVariant::Full, &pack, &ctx).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn detect_parsing() {
        assert_eq!(parse_detect("No Issue").unwrap(), DetectOutcome::Refusal);
        assert_eq!(parse_detect("no issue found.").unwrap(), DetectOutcome::Refusal);
        assert_eq!(
            parse_detect("This is a Hallucination: the method does not exist").unwrap(),
            DetectOutcome::Misuse(MisuseCategory::Hallucination)
        );
        assert_eq!(
            parse_detect("Missing argument; also an intent problem").unwrap(),
            DetectOutcome::Misuse(MisuseCategory::Intent)
        );
        assert!(matches!(parse_detect("The code is wrong."), Err(DrFixError::CategoryParseFailure(_))));
        assert!(matches!(parse_detect("unintentional"), Err(DrFixError::CategoryParseFailure(_))));
    }

    #[test]
    fn exemplar_file_format() {
        let ok = parse_exemplars("=== input\na\n=== output\nb\n\n=== input\nc\n=== output\nd\n").unwrap();
        assert_eq!(
            ok,
            vec![
                Exemplar { input: "a\n".into(), output: "b".into() },
                Exemplar { input: "c\n".into(), output: "d".into() },
            ]
        );
        assert!(parse_exemplars("=== output\nb\n").is_err());
        assert!(parse_exemplars("=== input\na\n").is_err());
        assert!(parse_exemplars("stray\n=== input\na\n=== output\nb\n").is_err());
    }

    #[test]
    fn load_rejects_wrong_shot_count() {
        let dir = tempfile::tempdir().unwrap();
        for (p, body) in BUILTIN {
            let path = dir.path().join(p);
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(path, body).unwrap();
        }
        TemplatePack::load(dir.path()).unwrap();
        fs::write(dir.path().join("exemplars/fix/missing.txt"), "=== input\na\n=== output\nb\n").unwrap();
        assert!(matches!(TemplatePack::load(dir.path()), Err(DrFixError::TemplatePack(_))));
    }

    #[test]
    fn repair_extraction() {
        let fenced = "Here:\n```python\nx = abs(y)\n```\nand\n```\nz\n```\n";
        assert_eq!(extract_repair(fenced, Language::Python).unwrap(), "x = abs(y)\n");
        let bare = "Use this instead:\nx = vx.magnitude(y)\nprint(x)\nThat is all, it works.";
        assert_eq!(extract_repair(bare, Language::Python).unwrap(), "x = vx.magnitude(y)\nprint(x)\n");
        assert!(matches!(extract_repair("", Language::Java), Err(DrFixError::RepairExtractionFailure)));
    }

    const FIG4: &str = "import numpy as np\nfrom blmath.numerics import vx\n\ndef farthest(from_point, to_points):\n    '''\n    Find the farthest point among the inputs, to the given point.\n    Return a tuple: farthest_point, index_of_farthest_point.\n    '''\n    absolute_distances = vs.abs(to_points - from_point)\n    index_of_farthest_point = np.argmax(absolute_distances)\n    farthest_point = to_points[index_of_farthest_point]\n    return farthest_point, index_of_farthest_point\n";

    fn scripted(detect: &'static str, fix: String) -> Gateway {
        let backend = ScriptedBackend::new("scripted", move |req: &GenRequest| {
            let prompt = &req.prompt.messages[0].content;
            if prompt.starts_with("Identify") {
                detect.to_string()
            } else if prompt.starts_with("Think") {
                "The distances need vector lengths.".to_string()
            } else {
                fix.clone()
            }
        });
        Gateway::new(Arc::new(backend), GatewayLimits::default())
    }

    fn input() -> RepairInput {
        RepairInput {
            task_id: "fig4".into(),
            language: Language::Python,
            kind: TaskKind::MethodInfill,
            snippet: FIG4.into(),
            reference: Some(FIG4.replace("vs.abs", "vx.magnitude")),
        }
    }

    #[test]
    fn intent_fix_end_to_end() {
        let fixed = FIG4.replace("vs.abs", "vx.magnitude");
        let gw = scripted("Intent: vs.abs is not a vector length.", format!("```python\n{fixed}```\n"));
        let pack = TemplatePack::builtin();
        let p = Pipeline { gateway: &gw, pack: &pack, model: "m".into(), params: GenParams::repair() };
        let t = p.run(&input(), PipelineVariant::Full).unwrap();
        assert_eq!(t.detected_category, Some(MisuseCategory::Intent));
        assert_eq!(t.requests_made, 3);
        assert!(!t.refused);
        assert!(t.repaired_code.contains("vx.magnitude(to_points - from_point)"));
        assert!(!t.repaired_code.contains("vs.abs"));
        assert_eq!(t.repaired_code, fixed);
    }

    #[test]
    fn refusal_short_circuits() {
        let gw = scripted("No Issue", "unused".into());
        let pack = TemplatePack::builtin();
        let p = Pipeline { gateway: &gw, pack: &pack, model: "m".into(), params: GenParams::repair() };
        for v in [PipelineVariant::Full, PipelineVariant::NoTaxonomy] {
            let t = p.run(&input(), v).unwrap();
            assert!(t.refused);
            assert_eq!(t.requests_made, 1);
            assert_eq!(t.repaired_code, FIG4);
            assert!(t.reason_raw.is_empty() && t.fix_raw.is_empty());
        }
    }

    #[test]
    fn baseline_is_single_request() {
        let gw = scripted("unused", "```\nx = 1\n```".into());
        let pack = TemplatePack::builtin();
        let p = Pipeline { gateway: &gw, pack: &pack, model: "m".into(), params: GenParams::repair() };
        let t = p.run(&input(), PipelineVariant::Baseline).unwrap();
        assert_eq!(t.requests_made, 1);
        assert_eq!(t.repaired_code, "x = 1\n");
        assert_eq!(gw.requests_issued(), 1);
    }

    #[test]
    fn unparseable_detect() {
        let gw = scripted("The code is wrong.", "```\nx = 1\n```".into());
        let pack = TemplatePack::builtin();
        let p = Pipeline { gateway: &gw, pack: &pack, model: "m".into(), params: GenParams::repair() };
        assert!(matches!(p.run(&input(), PipelineVariant::Full), Err(DrFixError::CategoryParseFailure(_))));
        let t = p.run(&input(), PipelineVariant::NoTaxonomy).unwrap();
        assert_eq!(t.detected_category, None);
        assert_eq!(t.requests_made, 3);
    }
}
