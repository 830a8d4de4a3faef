//! The whole offline flow through the command-line entry point: ingest,
//! localize, build tasks, replay recorded completions, score and report.
//!
//! ```text
//! cargo run --example end_to_end [OUT_DIR]
//! ```

use std::path::{Path, PathBuf};

use apimisuse::cli;

fn step(args: &[&str]) {
    let mut argv = vec!["apimisuse"];
    argv.extend_from_slice(args);
    println!("$ {}", argv.join(" "));
    assert_eq!(cli::run(argv), 0);
}

fn main() {
    let here = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let out: PathBuf =
        std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("apimisuse-e2e"));
    std::fs::create_dir_all(&out).unwrap();
    let o = |name: &str| out.join(name).to_string_lossy().into_owned();
    let corpus = here.join("mini-corpus").to_string_lossy().into_owned();
    let fixtures = here.join("fixtures").to_string_lossy().into_owned();

    step(&["ingest", "--root", &corpus, "--out", &o("corpus.jsonl"), "--manifest", &o("manifest.json")]);
    step(&["localize", "--corpus", &o("corpus.jsonl"), "--out", &o("callsites.jsonl")]);
    step(&[
        "gen-tasks",
        "--corpus",
        &o("corpus.jsonl"),
        "--callsites",
        &o("callsites.jsonl"),
        "--out",
        &o("tasks.jsonl"),
    ]);
    let mut score = vec!["score".to_string(), "--tasks".into(), o("tasks.jsonl")];
    for model in ["starcoder", "copilot", "qwen"] {
        let completions = o(&format!("{model}.completions.jsonl"));
        step(&[
            "complete",
            "--tasks",
            &o("tasks.jsonl"),
            "--model",
            model,
            "--fixtures",
            &fixtures,
            "--out",
            &completions,
        ]);
        score.extend(["--completions".into(), completions]);
    }
    score.extend(["--out".into(), o("report.json"), "--scored-out".into(), o("scored.jsonl")]);
    step(&score.iter().map(String::as_str).collect::<Vec<_>>());
    let labels = here.join("fixtures/labels.jsonl").to_string_lossy().into_owned();
    step(&[
        "report",
        "--input",
        &o("report.json"),
        "--labels",
        &labels,
        "--scored",
        &o("scored.jsonl"),
        "--overlap",
        "starcoder,copilot,qwen",
        "--out-dir",
        &o("reports"),
    ]);
    println!("\n{}", std::fs::read_to_string(out.join("reports/metrics.txt")).unwrap());
    println!("{}", std::fs::read_to_string(out.join("reports/overlap.txt")).unwrap());
}
