//! Tables and set partitions built from scored runs. Values are never
//! invented: an absent cell renders as "—" or fails in strict mode.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotate::{DistributionCell, MisuseCategory};
use crate::lang::Language;
use crate::score::{MetricCell, MetricReport};
use crate::taskgen::TaskKind;

pub const MISSING: &str = "—";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Txt,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Txt => "txt",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "txt" | "text" => Ok(Format::Txt),
            other => Err(format!("unknown format `{other}` (expected csv, json or txt)")),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("no data for {model} / {method} / {language} {kind}")]
    MissingData { model: String, method: String, language: Language, kind: TaskKind },
}

/// Region counts of three sets. `ab` means in A and B but not C.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapPartition {
    pub a_only: usize,
    pub b_only: usize,
    pub c_only: usize,
    pub ab: usize,
    pub ac: usize,
    pub bc: usize,
    pub abc: usize,
}

impl OverlapPartition {
    pub fn union(&self) -> usize {
        self.a_only + self.b_only + self.c_only + self.ab + self.ac + self.bc + self.abc
    }
    pub fn size_a(&self) -> usize {
        self.a_only + self.ab + self.ac + self.abc
    }
    pub fn size_b(&self) -> usize {
        self.b_only + self.ab + self.bc + self.abc
    }
    pub fn size_c(&self) -> usize {
        self.c_only + self.ac + self.bc + self.abc
    }
}

pub fn overlap_partition<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>, c: &BTreeSet<T>) -> OverlapPartition {
    let mut p = OverlapPartition::default();
    for x in a.iter().chain(b).chain(c).collect::<BTreeSet<_>>() {
        let slot = match (a.contains(x), b.contains(x), c.contains(x)) {
            (true, false, false) => &mut p.a_only,
            (false, true, false) => &mut p.b_only,
            (false, false, true) => &mut p.c_only,
            (true, true, false) => &mut p.ab,
            (true, false, true) => &mut p.ac,
            (false, true, true) => &mut p.bc,
            _ => &mut p.abc,
        };
        *slot += 1;
    }
    p
}

pub fn render_overlap(names: [&str; 3], p: &OverlapPartition, format: Format) -> String {
    let [a, b, c] = names;
    let rows = [
        (format!("{a} only"), p.a_only),
        (format!("{b} only"), p.b_only),
        (format!("{c} only"), p.c_only),
        (format!("{a} & {b}"), p.ab),
        (format!("{a} & {c}"), p.ac),
        (format!("{b} & {c}"), p.bc),
        (format!("{a} & {b} & {c}"), p.abc),
    ];
    match format {
        Format::Json => {
            let regions: BTreeMap<&str, usize> = rows.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            pretty(&serde_json::json!({ "sets": names, "regions": regions, "union": p.union() }))
        }
        Format::Csv => {
            let mut out = String::from("region,count\n");
            for (k, v) in &rows {
                let _ = writeln!(out, "{},{v}", csv_field(k));
            }
            out
        }
        Format::Txt => {
            let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
            let mut out = String::new();
            for (k, v) in &rows {
                let _ = writeln!(out, "{k:<width$}  {v:>6}");
            }
            let _ = writeln!(out, "{:<width$}  {:>6}", "union", p.union());
            out
        }
    }
}

/// A `MetricReport` labelled with the method that produced it.
#[derive(Debug, Clone)]
pub struct TableSource<'a> {
    pub method: String,
    pub report: &'a MetricReport,
}

#[derive(Debug, Clone, Default)]
pub struct TableSpec {
    /// (language, kind) groups; empty means every group present in the data.
    pub groups: Vec<(Language, TaskKind)>,
    /// (model, method) rows; empty means every row present in the data.
    pub rows: Vec<(String, String)>,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub method: String,
    pub cell: Option<MetricCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableGroup {
    pub language: Language,
    pub kind: TaskKind,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub groups: Vec<TableGroup>,
}

pub fn build_table(spec: &TableSpec, sources: &[TableSource<'_>]) -> Result<MetricTable, ReportError> {
    let lookup = |model: &str, method: &str, language: Language, kind: TaskKind| {
        sources
            .iter()
            .filter(|s| s.method == method)
            .find_map(|s| s.report.get(model)?.get(&language)?.get(&kind).copied())
    };
    let mut present_groups = BTreeSet::new();
    let mut present_rows: Vec<(String, String)> = Vec::new();
    for s in sources {
        for (model, langs) in s.report {
            if !present_rows.iter().any(|(m, me)| m == model && *me == s.method) {
                present_rows.push((model.clone(), s.method.clone()));
            }
            for (language, kinds) in langs {
                present_groups.extend(kinds.keys().map(|k| (*language, *k)));
            }
        }
    }
    present_rows.sort_by(|a, b| a.0.cmp(&b.0));
    let groups = if spec.groups.is_empty() { present_groups.into_iter().collect() } else { spec.groups.clone() };
    let rows = if spec.rows.is_empty() { present_rows } else { spec.rows.clone() };

    let mut out = Vec::new();
    for (language, kind) in groups {
        let mut group = TableGroup { language, kind, rows: Vec::new() };
        for (model, method) in &rows {
            let cell = lookup(model, method, language, kind);
            if cell.is_none() && spec.strict {
                return Err(ReportError::MissingData { model: model.clone(), method: method.clone(), language, kind });
            }
            group.rows.push(TableRow { model: model.clone(), method: method.clone(), cell });
        }
        out.push(group);
    }
    Ok(MetricTable { groups: out })
}

fn one_decimal(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |x| format!("{x:.1}"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

struct Line {
    bleu: String,
    cbs: String,
    em: String,
    em_matches: String,
    n: String,
}

fn line(cell: Option<&MetricCell>) -> Line {
    Line {
        bleu: one_decimal(cell.and_then(|c| c.bleu)),
        cbs: one_decimal(cell.and_then(|c| c.cbs_f3).map(|x| 100.0 * x)),
        em: one_decimal(cell.and_then(|c| c.em_pct)),
        em_matches: cell.and_then(|c| c.em_matches).map_or_else(|| MISSING.to_string(), |m| m.to_string()),
        n: cell.map_or_else(|| MISSING.to_string(), |c| c.n.to_string()),
    }
}

/// Renders a table. Scores show one decimal; CodeBERTScore is scaled to
/// 0..100 here. JSON keeps unrounded values with `null` for absent cells.
pub fn render_table(table: &MetricTable, format: Format) -> String {
    match format {
        Format::Json => pretty(&serde_json::to_value(table).expect("tables serialize")),
        Format::Csv => {
            let mut out = String::from("language,element,model,method,bleu,codebertscore,em_pct,em_matches,n\n");
            for g in &table.groups {
                for r in &g.rows {
                    let l = line(r.cell.as_ref());
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        g.language.name(),
                        g.kind,
                        csv_field(&r.model),
                        csv_field(&r.method),
                        l.bleu,
                        l.cbs,
                        l.em,
                        l.em_matches,
                        l.n
                    );
                }
            }
            out
        }
        Format::Txt => {
            let header = ["Model", "Method", "BLEU", "CodeBERTScore", "EM (%)", "n"];
            let mut out = String::new();
            for g in &table.groups {
                let mut cells: Vec<[String; 6]> = vec![header.map(String::from)];
                for r in &g.rows {
                    let l = line(r.cell.as_ref());
                    cells.push([r.model.clone(), r.method.clone(), l.bleu, l.cbs, l.em, l.n]);
                }
                let widths: Vec<usize> =
                    (0..6).map(|i| cells.iter().map(|c| c[i].chars().count()).max().unwrap_or(0)).collect();
                let _ = writeln!(out, "{} -- {}", g.language.display_name(), g.kind);
                for c in &cells {
                    let mut l = String::new();
                    for (i, v) in c.iter().enumerate() {
                        let pad = widths[i] - v.chars().count();
                        if i < 2 {
                            l.push_str(v);
                            l.push_str(&" ".repeat(pad));
                        } else {
                            l.push_str(&" ".repeat(pad));
                            l.push_str(v);
                        }
                        l.push_str("  ");
                    }
                    let _ = writeln!(out, "{}", l.trim_end());
                }
                out.push('\n');
            }
            out
        }
    }
}

/// Category shares per cell, one decimal, with raw counts.
pub fn render_distribution(cells: &[DistributionCell], format: Format) -> String {
    match format {
        Format::Json => pretty(&serde_json::to_value(cells).expect("cells serialize")),
        Format::Csv => {
            let mut out = String::from("model,language,element,category,count,percent\n");
            for c in cells {
                for cat in MisuseCategory::ALL {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{:.1}",
                        csv_field(c.model.as_deref().unwrap_or("")),
                        c.language.name(),
                        c.element_kind,
                        cat,
                        c.counts[&cat],
                        c.percentages[&cat]
                    );
                }
            }
            out
        }
        Format::Txt => {
            let mut out = String::new();
            for c in cells {
                let model = c.model.as_deref().map(|m| format!("{m} ")).unwrap_or_default();
                let _ = writeln!(out, "{model}{} -- {} (n={})", c.language.display_name(), c.element_kind, c.total);
                for cat in MisuseCategory::ALL {
                    let _ = writeln!(out, "  {:<14}{:>6.1}  {:>5}", cat.name(), c.percentages[&cat], c.counts[&cat]);
                }
            }
            out
        }
    }
}

impl fmt::Display for MetricTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_table(self, Format::Txt))
    }
}
