//! Independent oracles and fixtures shared by the integration targets.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn mini_corpus() -> PathBuf {
    manifest_dir().join("examples/mini-corpus")
}

pub fn fixtures() -> PathBuf {
    manifest_dir().join("examples/fixtures")
}

pub fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Runs the command-line entry point quietly and returns its exit code.
pub fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["apimisuse", "-q"];
    argv.extend_from_slice(args);
    apimisuse::cli::run(argv)
}

/// Sentence BLEU by direct counting: every candidate n-gram position is
/// credited `min(c, r) / c`, where `c` and `r` count that n-gram in the
/// candidate and reference by linear scan. Scores combine by a product
/// root rather than a log sum.
pub fn bleu_oracle(cand: &[u8], refr: &[u8]) -> f64 {
    let count = |hay: &[u8], g: &[u8]| {
        (0..hay.len().saturating_sub(g.len() - 1)).filter(|&i| &hay[i..i + g.len()] == g).count()
    };
    let mut product = 1.0;
    for n in 1..=4 {
        if cand.len() < n {
            return 0.0;
        }
        let total = cand.len() - n + 1;
        let mut credit = 0.0;
        for i in 0..total {
            let g = &cand[i..i + n];
            let c = count(cand, g) as f64;
            let r = count(refr, g) as f64;
            credit += c.min(r) / c;
        }
        if credit == 0.0 {
            return 0.0;
        }
        product *= credit / total as f64;
    }
    let bp = if cand.len() > refr.len() { 1.0 } else { (1.0 - refr.len() as f64 / cand.len() as f64).exp() };
    100.0 * bp * product.powf(0.25)
}

/// A reference of 1..=64 tokens over a 16-symbol alphabet, and a candidate
/// that is either independent or a mutated copy, so scores are spread.
pub fn bleu_pair(rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<u8>) {
    let tokens = |rng: &mut ChaCha8Rng, n: usize| (0..n).map(|_| rng.gen_range(0..16u8)).collect::<Vec<_>>();
    let rlen = rng.gen_range(1..=64);
    let refr = tokens(rng, rlen);
    let cand = if rng.gen_bool(0.3) {
        let clen = rng.gen_range(1..=64);
        tokens(rng, clen)
    } else {
        let mut c = refr.clone();
        for _ in 0..rng.gen_range(0..4) {
            let i = rng.gen_range(0..c.len());
            c[i] = rng.gen_range(0..16);
        }
        let keep = rng.gen_range(1..=c.len());
        c.truncate(keep);
        if rng.gen_bool(0.3) {
            let extra = rng.gen_range(0..8);
            c.extend(tokens(rng, extra));
            c.truncate(64);
        }
        c
    };
    (cand, refr)
}

/// Fraction of candidate tokens that occur anywhere in the reference.
pub fn membership_precision(cand: &[String], refr: &[String]) -> f64 {
    let set: BTreeSet<&String> = refr.iter().collect();
    cand.iter().filter(|t| set.contains(t)).count() as f64 / cand.len() as f64
}

/// Region counts of a three-set diagram, in the order
/// a, b, c, ab, ac, bc, abc.
pub type Regions = [usize; 7];

/// Builds three sets of fresh integers that realise the given region
/// counts: every region contributes its own block of ids to each set it
/// belongs to.
pub fn sets_from_regions(r: Regions) -> [BTreeSet<usize>; 3] {
    let membership: [[bool; 3]; 7] = [
        [true, false, false],
        [false, true, false],
        [false, false, true],
        [true, true, false],
        [true, false, true],
        [false, true, true],
        [true, true, true],
    ];
    let mut sets: [BTreeSet<usize>; 3] = Default::default();
    let mut next = 0;
    for (count, member) in r.iter().zip(membership) {
        for id in next..next + count {
            for (s, &m) in sets.iter_mut().zip(&member) {
                if m {
                    s.insert(id);
                }
            }
        }
        next += count;
    }
    sets
}

const IDENTS: [&str; 6] = ["data", "path", "count", "mode", "buf", "limit"];

/// One masked element: its language, kind and argument pieces. Method
/// elements hold a single identifier.
#[derive(Debug, Clone)]
pub struct Element {
    pub language: apimisuse::lang::Language,
    pub kind: apimisuse::taskgen::TaskKind,
    pub parts: Vec<String>,
}

impl Element {
    pub fn text(&self) -> String {
        self.parts.join(", ")
    }
}

pub fn random_element(rng: &mut ChaCha8Rng) -> Element {
    use apimisuse::lang::Language;
    use apimisuse::taskgen::TaskKind;
    let language = if rng.gen_bool(0.5) { Language::Python } else { Language::Java };
    let ident = |rng: &mut ChaCha8Rng| IDENTS[rng.gen_range(0..IDENTS.len())].to_string();
    if rng.gen_bool(0.25) {
        return Element { language, kind: TaskKind::MethodInfill, parts: vec![format!("{}Of", ident(rng))] };
    }
    let mut parts = vec![ident(rng)];
    for _ in 0..rng.gen_range(0..4) {
        parts.push(match rng.gen_range(0..4) {
            0 => ident(rng),
            1 => rng.gen_range(0..1000).to_string(),
            2 => format!("cfg.{}", ident(rng)),
            _ if language == Language::Python => format!("{}={}", ident(rng), ident(rng)),
            _ => "\"s\"".to_string(),
        });
    }
    Element { language, kind: TaskKind::ParamCompletion, parts }
}

/// Same element with whitespace and comments inserted between tokens.
pub fn relayout(e: &Element, rng: &mut ChaCha8Rng) -> String {
    use apimisuse::lang::Language;
    let comment = |rng: &mut ChaCha8Rng| match (e.language, rng.gen_bool(0.5)) {
        (Language::Python, _) => "  # note\n".to_string(),
        (Language::Java, true) => " /* note */ ".to_string(),
        (Language::Java, false) => " // note\n".to_string(),
    };
    let gap = |rng: &mut ChaCha8Rng| [" ", "", "  ", "\n    ", "\t"][rng.gen_range(0..5)].to_string();
    let mut out = gap(rng);
    for (i, p) in e.parts.iter().enumerate() {
        if i > 0 {
            out.push(',');
            out.push_str(&if rng.gen_bool(0.4) { comment(rng) } else { gap(rng) });
        }
        out.push_str(p);
    }
    out.push_str(&if rng.gen_bool(0.5) { comment(rng) } else { gap(rng) });
    out
}

/// Same element with one identifier replaced by a fresh one.
pub fn rename(e: &Element, rng: &mut ChaCha8Rng) -> String {
    let mut parts = e.parts.clone();
    let candidates: Vec<usize> = (0..parts.len()).filter(|&i| IDENTS.iter().any(|id| parts[i].contains(id))).collect();
    let i = candidates[rng.gen_range(0..candidates.len())];
    let id = IDENTS.iter().find(|id| parts[i].contains(*id)).unwrap();
    parts[i] = parts[i].replacen(id, &format!("{id}Renamed"), 1);
    parts.join(", ")
}

pub const MODELS: [&str; 3] = ["starcoder", "copilot", "qwen"];

/// Runs ingest through report on the mini-corpus against recorded
/// completions, writing into `out`. Panics on any non-zero exit.
pub fn offline_pipeline(out: &Path, jobs: usize) {
    let o = |name: &str| path_str(&out.join(name));
    let jobs = jobs.to_string();
    let fx = path_str(&fixtures());
    let run = |args: Vec<String>| {
        let mut full = vec!["--jobs".to_string(), jobs.clone()];
        full.extend(args);
        let refs: Vec<&str> = full.iter().map(String::as_str).collect();
        assert_eq!(cli(&refs), 0, "failed: {refs:?}");
    };
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    run(s(&[
        "ingest",
        "--root",
        &path_str(&mini_corpus()),
        "--out",
        &o("corpus.jsonl"),
        "--manifest",
        &o("manifest.json"),
    ]));
    run(s(&["localize", "--corpus", &o("corpus.jsonl"), "--out", &o("callsites.jsonl")]));
    run(s(&[
        "gen-tasks",
        "--corpus",
        &o("corpus.jsonl"),
        "--callsites",
        &o("callsites.jsonl"),
        "--out",
        &o("tasks.jsonl"),
    ]));
    let mut score =
        s(&["score", "--tasks", &o("tasks.jsonl"), "--out", &o("report.json"), "--scored-out", &o("scored.jsonl")]);
    for m in MODELS {
        let c = o(&format!("{m}.completions.jsonl"));
        run(s(&[
            "complete",
            "--tasks",
            &o("tasks.jsonl"),
            "--model",
            m,
            "--fixtures",
            &fx,
            "--replay",
            "strict",
            "--out",
            &c,
        ]));
        score.extend(["--completions".to_string(), c]);
    }
    run(score);
    run(s(&[
        "report",
        "--input",
        &o("report.json"),
        "--labels",
        &path_str(&fixtures().join("labels.jsonl")),
        "--scored",
        &o("scored.jsonl"),
        "--overlap",
        "starcoder,copilot,qwen",
        "--format",
        "csv",
        "--out-dir",
        &o("reports"),
    ]));
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| (path_str(e.path().strip_prefix(dir).unwrap()), std::fs::read(e.path()).unwrap()))
        .collect()
}
