//! Ingests the bundled mini-corpus, finds resolvable API call sites and
//! deduplicates them per signature.
//!
//! ```text
//! cargo run --example locate_calls
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use apimisuse::corpus::{ingest, IngestOptions};
use apimisuse::locator::{dedup_sample, locate};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/mini-corpus");
    let corpus = ingest(&root, &IngestOptions::default()).expect("mini-corpus ingests");
    println!("repo {}: kept {} of {} files", corpus.manifest.repo, corpus.files.len(), corpus.manifest.discovered);
    for s in &corpus.manifest.skipped {
        println!("  skipped {} ({:?})", s.path, s.reason);
    }

    let mut sites = Vec::new();
    for file in &corpus.files {
        sites.extend(locate(file).expect("ingested files parse"));
    }
    let kept = dedup_sample(&sites, 3000, 0);
    println!("{} call sites, {} after one-per-signature dedup", sites.len(), kept.len());

    let mut by_fqn: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &kept {
        *by_fqn.entry(&s.fqn).or_default() += 1;
    }
    let mut top: Vec<_> = by_fqn.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    for (fqn, n) in top.into_iter().take(10) {
        println!("  {n:>3}  {fqn}");
    }
}
