//! Regenerates the replay fixtures under `examples/fixtures/` from scripted
//! stand-in models, so every subcommand can run offline.
//!
//! Run after changing the mini-corpus, task generation or the prompt pack:
//!
//! ```text
//! cargo run --example record_fixtures
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use apimisuse::annotate::{ElementKind, MisuseCategory, MisuseLabel, MitigationSet};
use apimisuse::cli;
use apimisuse::drfix::{PipelineVariant, RepairInput};
use apimisuse::jsonl;
use apimisuse::lang::Language;
use apimisuse::modelgw::{Gateway, GatewayLimits, GenParams, GenRequest, ReplayBackend, ReplayStore, ScriptedBackend};
use apimisuse::score::ScoredTask;
use apimisuse::taskgen::{TaskInstance, TaskKind};
use sha2::{Digest, Sha256};

pub const MODELS: [&str; 3] = ["starcoder", "copilot", "qwen"];

/// Prefix and suffix of a completion prompt.
type PromptKey = (String, Option<String>);
/// Raw reply, intended misuse and task id.
type Scripted = (String, Option<MisuseCategory>, String);
/// Id, language, kind, misuse, snippet and reference (empty when clean).
type SnippetRow = (&'static str, Language, TaskKind, Option<MisuseCategory>, &'static str, &'static str);
const REPAIRER: &str = "repairer";

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn h(parts: &[&str]) -> u64 {
    let d = Sha256::digest(parts.join("\0").as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn cli(args: &[&str]) {
    let mut argv = vec!["apimisuse", "-q"];
    argv.extend_from_slice(args);
    assert_eq!(cli::run(argv.clone()), 0, "command failed: {argv:?}");
}

/// Top-level comma split that respects brackets and quotes.
fn split_args(s: &str) -> Vec<String> {
    let (mut out, mut cur, mut depth, mut quote) = (Vec::new(), String::new(), 0i32, None::<char>);
    for ch in s.chars() {
        match (quote, ch) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(ch),
            (None, '(' | '[' | '{') => depth += 1,
            (None, ')' | ']' | '}') => depth -= 1,
            (None, ',') if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// What a scripted model returns for a task, and the misuse it represents.
fn scripted_completion(model: &str, task: &TaskInstance, names: &[&str]) -> (String, Option<MisuseCategory>) {
    let r = h(&[model, &task.task_id]);
    let accuracy = match model {
        "starcoder" => 55,
        "copilot" => 60,
        _ => 75,
    };
    let gt = task.ground_truth.as_str();
    let py = task.language == Language::Python;
    if r % 100 < accuracy {
        let text = if r.is_multiple_of(3) { gt.replace(", ", ",") } else { gt.to_string() };
        return match task.kind {
            TaskKind::MethodInfill => (text, None),
            TaskKind::ParamCompletion => (format!("{text})\n"), None),
        };
    }
    let pick = (r / 100) % 4;
    match task.kind {
        TaskKind::MethodInfill => {
            let other = names[(r / 1000) as usize % names.len()];
            if pick.is_multiple_of(2) && other != gt {
                (other.to_string(), Some(MisuseCategory::Intent))
            } else {
                let fake = if py { format!("{gt}_all") } else { format!("{gt}All") };
                (fake, Some(MisuseCategory::Hallucination))
            }
        }
        TaskKind::ParamCompletion => {
            let mut args = split_args(gt);
            let category = match pick {
                0 if !args.is_empty() => {
                    args.pop();
                    MisuseCategory::Missing
                }
                1 if !args.is_empty() => {
                    args.push(args.last().unwrap().clone());
                    MisuseCategory::Redundancy
                }
                2 if args.len() >= 2 && args[0] != args[1] => {
                    args.swap(0, 1);
                    MisuseCategory::Intent
                }
                _ => {
                    args.push(if py { "strict=True".into() } else { "true".into() });
                    MisuseCategory::Hallucination
                }
            };
            (format!("{})\n", args.join(", ")), Some(category))
        }
    }
}

fn fresh_store(path: &Path) -> Arc<ReplayStore> {
    let _ = fs::remove_file(path);
    Arc::new(ReplayStore::open(path).unwrap())
}

fn record_completions(tasks: &[TaskInstance], fixtures: &Path) -> BTreeMap<(String, String), MisuseCategory> {
    let mut names: Vec<&str> =
        tasks.iter().filter(|t| t.kind == TaskKind::MethodInfill).map(|t| t.ground_truth.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    let mut intended = BTreeMap::new();
    for model in MODELS {
        let by_prompt: BTreeMap<PromptKey, Scripted> = tasks
            .iter()
            .map(|t| {
                let req = cli::completion_request(t, model, GenParams::completion_preset(model));
                let (raw, cat) = scripted_completion(model, t, &names);
                ((req.prompt.prefix, req.prompt.suffix), (raw, cat, t.task_id.clone()))
            })
            .collect();
        for (_, category, task_id) in by_prompt.values() {
            if let Some(c) = category {
                intended.insert((model.to_string(), task_id.clone()), *c);
            }
        }
        let script = ScriptedBackend::new("scripted", move |req: &GenRequest| {
            by_prompt[&(req.prompt.prefix.clone(), req.prompt.suffix.clone())].0.clone()
        });
        let store = fresh_store(&ReplayStore::path_for(fixtures, model));
        let gw = Gateway::new(
            Arc::new(ReplayBackend::recording(model, store.clone(), Box::new(script))),
            GatewayLimits::default(),
        );
        for t in tasks {
            gw.generate(&cli::completion_request(t, model, GenParams::completion_preset(model))).unwrap();
        }
        store.compact().unwrap();
        println!("{model}: {} fixtures", store.len());
    }
    intended
}

/// The bundled repair set: one misuse per category per language plus
/// four clean snippets.
fn drfix_snippets() -> Vec<(RepairInput, Option<MisuseCategory>)> {
    use MisuseCategory::{Hallucination, Intent, Missing, Redundancy};
    let rows: [SnippetRow; 12] = [
        ("py-intent", Language::Python, TaskKind::MethodInfill, Some(Intent),
         "import numpy as np\n\ndef spread(samples):\n    return np.max(samples) - np.average(samples)\n",
         "import numpy as np\n\ndef spread(samples):\n    return np.max(samples) - np.min(samples)\n"),
        ("py-hallucination", Language::Python, TaskKind::MethodInfill, Some(Hallucination),
         "import json\n\ndef load(path):\n    with open(path) as fh:\n        return json.load_file(fh)\n",
         "import json\n\ndef load(path):\n    with open(path) as fh:\n        return json.load(fh)\n"),
        ("py-redundancy", Language::Python, TaskKind::ParamCompletion, Some(Redundancy),
         "import os\n\ndef data_dir(root):\n    return os.path.join(root, \"data\", \"\")\n",
         "import os\n\ndef data_dir(root):\n    return os.path.join(root, \"data\")\n"),
        ("py-missing", Language::Python, TaskKind::ParamCompletion, Some(Missing),
         "import re\n\ndef tokens(s):\n    return re.split(s)\n",
         "import re\n\ndef tokens(s):\n    return re.split(r\"\\s+\", s)\n"),
        ("java-intent", Language::Java, TaskKind::MethodInfill, Some(Intent),
         "import java.util.List;\n\nclass Names {\n    boolean known(List<String> xs, String x) {\n        return xs.indexOf(x) > 0;\n    }\n}\n",
         "import java.util.List;\n\nclass Names {\n    boolean known(List<String> xs, String x) {\n        return xs.contains(x);\n    }\n}\n"),
        ("java-hallucination", Language::Java, TaskKind::MethodInfill, Some(Hallucination),
         "import java.util.Optional;\n\nclass Lookup {\n    String name(Optional<String> o) {\n        return o.getOrDefault(\"anon\");\n    }\n}\n",
         "import java.util.Optional;\n\nclass Lookup {\n    String name(Optional<String> o) {\n        return o.orElse(\"anon\");\n    }\n}\n"),
        ("java-redundancy", Language::Java, TaskKind::MethodInfill, Some(Redundancy),
         "import java.util.ArrayList;\nimport java.util.List;\n\nclass Copy {\n    List<String> copy(List<String> xs) {\n        return new ArrayList<>(new ArrayList<>(xs));\n    }\n}\n",
         "import java.util.ArrayList;\nimport java.util.List;\n\nclass Copy {\n    List<String> copy(List<String> xs) {\n        return new ArrayList<>(xs);\n    }\n}\n"),
        ("java-missing", Language::Java, TaskKind::ParamCompletion, Some(Missing),
         "import java.util.concurrent.ExecutorService;\nimport java.util.concurrent.TimeUnit;\n\nclass Stopper {\n    void stop(ExecutorService pool) throws InterruptedException {\n        pool.shutdown();\n        pool.awaitTermination(30);\n    }\n}\n",
         "import java.util.concurrent.ExecutorService;\nimport java.util.concurrent.TimeUnit;\n\nclass Stopper {\n    void stop(ExecutorService pool) throws InterruptedException {\n        pool.shutdown();\n        pool.awaitTermination(30, TimeUnit.SECONDS);\n    }\n}\n"),
        ("py-clean-1", Language::Python, TaskKind::ParamCompletion, None,
         "import requests\n\ndef ping(url):\n    return requests.head(url, timeout=3).ok\n", ""),
        ("py-clean-2", Language::Python, TaskKind::MethodInfill, None,
         "import hashlib\n\ndef fingerprint(data):\n    return hashlib.md5(data).hexdigest()\n", ""),
        ("java-clean-1", Language::Java, TaskKind::MethodInfill, None,
         "import java.util.Collections;\nimport java.util.List;\n\nclass Top {\n    int best(List<Integer> xs) {\n        return Collections.max(xs);\n    }\n}\n", ""),
        ("java-clean-2", Language::Java, TaskKind::ParamCompletion, None,
         "import java.time.Duration;\n\nclass Timeouts {\n    Duration connect() {\n        return Duration.ofSeconds(5);\n    }\n}\n", ""),
    ];
    rows.into_iter()
        .map(|(id, language, kind, cat, snippet, reference)| {
            let reference = if reference.is_empty() { snippet } else { reference };
            (
                RepairInput {
                    task_id: id.into(),
                    language,
                    kind,
                    snippet: snippet.into(),
                    reference: Some(reference.into()),
                },
                cat,
            )
        })
        .collect()
}

fn fenced(code: &str) -> String {
    format!("```\n{code}```\n")
}

/// Stage replies of the scripted repair model.
fn repair_reply(prompt: &str, known: &[(RepairInput, Option<MisuseCategory>)]) -> String {
    let (input, category) = known
        .iter()
        .filter(|(i, _)| prompt.contains(&format!("```\n{}\n```", i.snippet.trim_end_matches('\n'))))
        .max_by_key(|(i, _)| i.snippet.len())
        .unwrap_or_else(|| panic!("scripted repairer got an unknown snippet:\n{prompt}"));
    let r = h(&[REPAIRER, &input.task_id]);
    let reference = input.reference.as_deref().unwrap_or(&input.snippet);
    if prompt.starts_with("Identify any incorrect usages in the following code snippet based on") {
        match category {
            Some(c) => format!("{c}: the call does not fit the API contract."),
            None if r.is_multiple_of(4) => "Redundancy: the call may be unnecessary.".into(),
            None => "No Issue".into(),
        }
    } else if prompt.starts_with("Identify any incorrect API usages") {
        match category {
            Some(_) => "The API call does not do what the surrounding code needs.".into(),
            None if r.is_multiple_of(3) => "This call looks suspicious.".into(),
            None => "No Issue".into(),
        }
    } else if prompt.starts_with("Think step by step") {
        "The call deviates from the documented usage; the intended behaviour needs the standard API call.".into()
    } else if prompt.starts_with("Propose a correction") {
        let miss = prompt.contains("Category definitions") || !r.is_multiple_of(4);
        fenced(if miss { reference } else { &input.snippet })
    } else if prompt.starts_with("Fix any incorrect API usage") {
        fenced(if r.is_multiple_of(3) { reference } else { &input.snippet })
    } else {
        panic!("scripted repairer got an unknown prompt:\n{prompt}")
    }
}

fn record_repairs(known: Vec<(RepairInput, Option<MisuseCategory>)>, fixtures: &Path, input_files: &[&Path]) {
    let store = fresh_store(&ReplayStore::path_for(fixtures, REPAIRER));
    let known = Arc::new(known);
    let k = known.clone();
    let script =
        ScriptedBackend::new("scripted", move |req: &GenRequest| repair_reply(&req.prompt.messages[0].content, &k));
    let recording: Arc<dyn apimisuse::modelgw::Backend> =
        Arc::new(ReplayBackend::recording(REPAIRER, store.clone(), Box::new(script)));
    let gw = Gateway::new(recording, GatewayLimits::default());
    let pack = apimisuse::drfix::TemplatePack::builtin();
    let pipeline =
        apimisuse::drfix::Pipeline { gateway: &gw, pack: &pack, model: REPAIRER.into(), params: GenParams::repair() };
    for file in input_files {
        let inputs: Vec<RepairInput> = jsonl::read(file).unwrap();
        for i in &inputs {
            for v in PipelineVariant::ALL {
                let _ = pipeline.run(i, v);
            }
        }
    }
    store.compact().unwrap();
    println!("{REPAIRER}: {} fixtures", store.len());
}

fn main() {
    let root = manifest_dir().join("examples");
    let fixtures = root.join("fixtures");
    fs::create_dir_all(&fixtures).unwrap();
    let work = tempfile::tempdir().unwrap();
    let w = |name: &str| work.path().join(name).to_string_lossy().into_owned();
    let corpus_root = root.join("mini-corpus").to_string_lossy().into_owned();

    cli(&["ingest", "--root", &corpus_root, "--out", &w("corpus.jsonl")]);
    cli(&["localize", "--corpus", &w("corpus.jsonl"), "--out", &w("callsites.jsonl")]);
    cli(&[
        "gen-tasks",
        "--corpus",
        &w("corpus.jsonl"),
        "--callsites",
        &w("callsites.jsonl"),
        "--out",
        &w("tasks.jsonl"),
    ]);
    let tasks: Vec<TaskInstance> = jsonl::read(Path::new(&w("tasks.jsonl"))).unwrap();
    let intended = record_completions(&tasks, &fixtures);

    let fx = fixtures.to_string_lossy().into_owned();
    let mut score_args = vec!["score".to_string(), "--tasks".into(), w("tasks.jsonl")];
    for m in MODELS {
        let out = w(&format!("{m}.completions.jsonl"));
        cli(&["complete", "--tasks", &w("tasks.jsonl"), "--model", m, "--fixtures", &fx, "--out", &out]);
        score_args.extend(["--completions".into(), out]);
    }
    score_args.extend(["--out".into(), w("report.json"), "--scored-out".into(), w("scored.jsonl")]);
    cli(&score_args.iter().map(String::as_str).collect::<Vec<_>>());

    // Labels stand in for human annotation: each EM failure gets the misuse
    // its scripted completion was built to show, or None when it is benign.
    let scored: Vec<ScoredTask> = jsonl::read(Path::new(&w("scored.jsonl"))).unwrap();
    let labels: Vec<MisuseLabel> = scored
        .iter()
        .filter(|s| !s.em)
        .map(|s| MisuseLabel {
            task_id: s.task_id.clone(),
            annotator: "scripted".into(),
            category: intended.get(&(s.model.clone(), s.task_id.clone())).copied().unwrap_or(MisuseCategory::None),
            element_kind: ElementKind::from(s.kind),
            language: s.language,
            model: Some(s.model.clone()),
            note: String::new(),
        })
        .collect();
    let labels_path = fixtures.join("labels.jsonl");
    jsonl::write(&labels_path, &labels).unwrap();
    println!("labels: {}", labels.len());

    let mut mit_args = vec![
        "mitigation-set".to_string(),
        "--labels".into(),
        labels_path.to_string_lossy().into_owned(),
        "--scored".into(),
        w("scored.jsonl"),
        "--fraction".into(),
        "0.5".into(),
        "--clean-count".into(),
        "6".into(),
        "--out".into(),
        w("mitigation.json"),
        "--tasks".into(),
        w("tasks.jsonl"),
        "--inputs-out".into(),
        w("snippets.jsonl"),
    ];
    for m in MODELS {
        mit_args.extend(["--completions".into(), w(&format!("{m}.completions.jsonl"))]);
    }
    cli(&mit_args.iter().map(String::as_str).collect::<Vec<_>>());

    let set: MitigationSet = jsonl::read_json(Path::new(&w("mitigation.json"))).unwrap();
    let categories: BTreeMap<&str, MisuseCategory> =
        set.misused.iter().map(|m| (m.task_id.as_str(), m.category)).collect();
    let mitigation_inputs: Vec<RepairInput> = jsonl::read(Path::new(&w("snippets.jsonl"))).unwrap();

    let bundled = drfix_snippets();
    let bundled_path = fixtures.join("drfix_snippets.jsonl");
    jsonl::write(&bundled_path, &bundled.iter().map(|(i, _)| i.clone()).collect::<Vec<_>>()).unwrap();

    let mut known = bundled;
    known.extend(mitigation_inputs.iter().map(|i| (i.clone(), categories.get(i.task_id.as_str()).copied())));
    record_repairs(known, &fixtures, &[&bundled_path, Path::new(&w("snippets.jsonl"))]);

    for v in ["full", "no-taxonomy", "baseline"] {
        for (name, inputs) in
            [("bundled", bundled_path.to_string_lossy().into_owned()), ("mitigation", w("snippets.jsonl"))]
        {
            let out = w(&format!("{name}.{v}.repairs.jsonl"));
            cli(&["drfix", "--inputs", &inputs, "--variant", v, "--model", REPAIRER, "--fixtures", &fx, "--out", &out]);
        }
    }
    println!("fixtures written to {}", fixtures.display());
}
