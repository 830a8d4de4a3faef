//! Computes BLEU, CodeBERTScore and exact match for a few candidate
//! completions of one statement.
//!
//! ```text
//! cargo run --example score_metrics
//! ```

use apimisuse::lang::{token_texts, Language};
use apimisuse::metrics::{bleu_with, codebertscore, cohens_kappa, em_element, OneHotProvider, Smoothing};
use apimisuse::taskgen::TaskKind;

fn main() {
    let lang = Language::Python;
    let reference = "resp = requests.get(url, timeout=5)";
    let candidates = [
        "resp = requests.get(url, timeout=5)",
        "resp = requests.get(url,timeout=5)  # fetch",
        "resp = requests.get(url)",
        "resp = requests.post(url, timeout=5)",
        "resp = requests.fetch(url, timeout=5)",
    ];
    let provider = OneHotProvider::new();
    let r = token_texts(reference, lang);
    println!("{:<45} {:>7} {:>7} {:>6} {:>5}", "candidate", "BLEU", "BLEU+1", "CBS", "EM");
    for c in candidates {
        let t = token_texts(c, lang);
        let plain = bleu_with(&t, &r, Smoothing::None).unwrap().score;
        let smoothed = bleu_with(&t, &r, Smoothing::AddOne).unwrap().score;
        let cbs = codebertscore(&t, &r, &provider).unwrap().f3;
        let em = em_element(c, reference, TaskKind::ParamCompletion, lang);
        println!("{c:<45} {plain:>7.2} {smoothed:>7.2} {:>6.1} {em:>5}", 100.0 * cbs);
    }

    let a = ["Intent", "Intent", "Missing", "Hallucination", "None", "Missing"];
    let b = ["Intent", "Hallucination", "Missing", "Hallucination", "None", "Redundancy"];
    let k = cohens_kappa(&a, &b).unwrap();
    println!("\nCohen's kappa between two annotators: {:.3}", k.kappa);
}
