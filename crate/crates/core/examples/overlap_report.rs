//! Renders a three-way overlap of misuse sets and a small metric table in
//! each output format.
//!
//! ```text
//! cargo run --example overlap_report
//! ```

use std::collections::{BTreeMap, BTreeSet};

use apimisuse::lang::Language;
use apimisuse::report::{build_table, overlap_partition, render_overlap, render_table, Format, TableSource, TableSpec};
use apimisuse::score::{MetricCell, MetricReport};
use apimisuse::taskgen::TaskKind;

fn cell(bleu: f64, cbs: f64, em: usize, n: usize) -> MetricCell {
    MetricCell {
        bleu: Some(bleu),
        cbs_f3: Some(cbs),
        em_pct: Some(100.0 * em as f64 / n as f64),
        em_matches: Some(em),
        n,
    }
}

fn main() {
    let a: BTreeSet<u32> = (0..40).collect();
    let b: BTreeSet<u32> = (25..90).collect();
    let c: BTreeSet<u32> = (30..35).chain(80..100).collect();
    let p = overlap_partition(&a, &b, &c);
    println!("{}", render_overlap(["model-a", "model-b", "model-c"], &p, Format::Txt));

    let mut report: MetricReport = BTreeMap::new();
    let py = report.entry("model-a".into()).or_default().entry(Language::Python).or_default();
    py.insert(TaskKind::MethodInfill, cell(61.2, 0.83, 140, 300));
    py.insert(TaskKind::ParamCompletion, cell(44.9, 0.71, 52, 300));
    report
        .entry("model-b".into())
        .or_default()
        .entry(Language::Python)
        .or_default()
        .insert(TaskKind::MethodInfill, cell(58.0, 0.80, 121, 300));

    let sources = [TableSource { method: "completion".into(), report: &report }];
    let table = build_table(&TableSpec::default(), &sources).unwrap();
    for format in [Format::Txt, Format::Csv, Format::Json] {
        println!("--- {format:?}\n{}", render_table(&table, format));
    }
}
