//! Masked completion tasks: method-name infilling and parameter completion.
//!
//! Every task satisfies `prefix + ground_truth + suffix == content[region]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::SourceFile;
use crate::lang::Language;
use crate::locator::{ApiCallSite, Span};

/// Prefixes longer than this many characters keep only their tail.
pub const PREFIX_CHAR_BUDGET: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MethodInfill,
    ParamCompletion,
}

impl TaskKind {
    pub fn short(self) -> &'static str {
        match self {
            TaskKind::MethodInfill => "method",
            TaskKind::ParamCompletion => "param",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::MethodInfill => "Method",
            TaskKind::ParamCompletion => "Parameters",
        })
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "method" | "method_infill" => Ok(TaskKind::MethodInfill),
            "param" | "params" | "parameter" | "param_completion" => Ok(TaskKind::ParamCompletion),
            other => Err(format!("unknown task kind `{other}` (expected method or param)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task_id: String,
    pub kind: TaskKind,
    pub file_id: String,
    pub site_id: String,
    pub prefix: String,
    pub ground_truth: String,
    pub suffix: String,
    pub fqn: String,
    pub language: Language,
    /// Byte range of the file reproduced by `prefix + ground_truth + suffix`.
    pub region: Span,
}

impl TaskInstance {
    pub fn reconstruct(&self) -> String {
        let mut s = String::with_capacity(self.prefix.len() + self.ground_truth.len() + self.suffix.len());
        s.push_str(&self.prefix);
        s.push_str(&self.ground_truth);
        s.push_str(&self.suffix);
        s
    }

    /// The source line holding the masked element, with `element` in place of
    /// the ground truth. This is the unit BLEU and CodeBERTScore compare.
    pub fn statement_with(&self, element: &str) -> String {
        let head = self.prefix.rsplit('\n').next().unwrap_or("");
        let tail = self.suffix.split('\n').next().unwrap_or("");
        format!("{head}{element}{tail}")
    }

    /// `element` in place of the ground truth, with up to `context_lines`
    /// preceding lines and whatever suffix lines the task holds, newline
    /// terminated. Used as the snippet handed to repair.
    pub fn snippet_with(&self, element: &str, context_lines: usize) -> String {
        let cut = self.prefix.match_indices('\n').rev().nth(context_lines).map_or(0, |(i, _)| i + 1);
        let tail: Vec<&str> = self.suffix.split('\n').take(context_lines + 1).collect();
        let mut s = format!("{}{element}{}", &self.prefix[cut..], tail.join("\n"));
        if !s.ends_with('\n') {
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TaskOptions {
    pub prefix_char_budget: usize,
    /// Extend the method-infill suffix past the closing `)` to end of file.
    pub suffix_to_eof: bool,
}

impl Default for TaskOptions {
    fn default() -> Self {
        TaskOptions { prefix_char_budget: PREFIX_CHAR_BUDGET, suffix_to_eof: false }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("site {site_id}: span {span:?} out of bounds or malformed for file of {len} bytes")]
    SpanOutOfBounds { site_id: String, span: Span, len: usize },
    #[error("site {site_id} belongs to file {expected}, got {actual}")]
    FileMismatch { site_id: String, expected: String, actual: String },
}

fn check_spans(site: &ApiCallSite, file: &SourceFile) -> Result<(), TaskError> {
    if site.file_id != file.file_id {
        return Err(TaskError::FileMismatch {
            site_id: site.site_id.clone(),
            expected: site.file_id.clone(),
            actual: file.file_id.clone(),
        });
    }
    let c = &file.content;
    let ok = |s: Span| {
        s.start() <= s.end() && s.end() <= c.len() && c.is_char_boundary(s.start()) && c.is_char_boundary(s.end())
    };
    let oob = |span| TaskError::SpanOutOfBounds { site_id: site.site_id.clone(), span, len: c.len() };
    if !ok(site.method_span) || site.method_span.is_empty() {
        return Err(oob(site.method_span));
    }
    let args = site.args_span;
    if !ok(args) || args.len() < 2 || !c[args.start()..].starts_with('(') || !c[..args.end()].ends_with(')') {
        return Err(oob(args));
    }
    if site.method_span.end() > args.start() {
        return Err(oob(args));
    }
    Ok(())
}

/// Start of the last `budget` characters before `end`.
fn prefix_start(content: &str, end: usize, budget: usize) -> usize {
    content[..end].char_indices().rev().nth(budget.saturating_sub(1)).map_or(0, |(i, _)| i)
}

fn task_id(site: &ApiCallSite, kind: TaskKind) -> String {
    format!("{}:{}", site.site_id, kind.short())
}

/// Masks the method identifier. The suffix runs from the end of the
/// identifier through the closing parenthesis.
pub fn gen_method_infill(site: &ApiCallSite, file: &SourceFile, opts: &TaskOptions) -> Result<TaskInstance, TaskError> {
    check_spans(site, file)?;
    let c = &file.content;
    let m = site.method_span;
    let start = prefix_start(c, m.start(), opts.prefix_char_budget);
    let end = if opts.suffix_to_eof { c.len() } else { site.args_span.end() };
    Ok(TaskInstance {
        task_id: task_id(site, TaskKind::MethodInfill),
        kind: TaskKind::MethodInfill,
        file_id: file.file_id.clone(),
        site_id: site.site_id.clone(),
        prefix: c[start..m.start()].to_string(),
        ground_truth: c[m.start()..m.end()].to_string(),
        suffix: c[m.end()..end].to_string(),
        fqn: site.fqn.clone(),
        language: file.language,
        region: Span(start, end),
    })
}

/// Masks the argument text strictly inside the parentheses.
pub fn gen_param_completion(
    site: &ApiCallSite,
    file: &SourceFile,
    opts: &TaskOptions,
) -> Result<TaskInstance, TaskError> {
    check_spans(site, file)?;
    let c = &file.content;
    let a = site.args_span;
    let open_end = a.start() + 1;
    let start = prefix_start(c, open_end, opts.prefix_char_budget);
    Ok(TaskInstance {
        task_id: task_id(site, TaskKind::ParamCompletion),
        kind: TaskKind::ParamCompletion,
        file_id: file.file_id.clone(),
        site_id: site.site_id.clone(),
        prefix: c[start..open_end].to_string(),
        ground_truth: c[open_end..a.end() - 1].to_string(),
        suffix: ")".to_string(),
        fqn: site.fqn.clone(),
        language: file.language,
        region: Span(start, a.end()),
    })
}

pub fn gen_task(
    kind: TaskKind,
    site: &ApiCallSite,
    file: &SourceFile,
    opts: &TaskOptions,
) -> Result<TaskInstance, TaskError> {
    match kind {
        TaskKind::MethodInfill => gen_method_infill(site, file, opts),
        TaskKind::ParamCompletion => gen_param_completion(site, file, opts),
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("completion has no balanced closing parenthesis")]
    UnbalancedOutput,
}

/// Pulls the masked element out of a raw model continuation.
///
/// Method infill keeps the longest leading identifier (after leading
/// horizontal whitespace). Parameter completion scans to the `)` that closes
/// the already-open call, skipping string and character literals and
/// comments.
pub fn extract_element(raw: &str, kind: TaskKind, language: Language) -> Result<String, ExtractError> {
    match kind {
        TaskKind::MethodInfill => {
            let body = raw.trim_start_matches([' ', '\t']);
            let end = body
                .char_indices()
                .find(|&(i, ch)| !is_ident_char(ch, language, i == 0))
                .map_or(body.len(), |(i, _)| i);
            Ok(body[..end].to_string())
        }
        TaskKind::ParamCompletion => {
            let end = balanced_close(raw, language).ok_or(ExtractError::UnbalancedOutput)?;
            Ok(raw[..end].to_string())
        }
    }
}

fn is_ident_char(ch: char, language: Language, first: bool) -> bool {
    let extra = ch == '_' || (language == Language::Java && ch == '$');
    if first {
        ch.is_alphabetic() || extra
    } else {
        ch.is_alphanumeric() || extra
    }
}

/// Byte offset of the `)` closing an already-open parenthesis.
fn balanced_close(text: &str, language: Language) -> Option<usize> {
    let b = text.as_bytes();
    let mut depth = 1usize;
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            q @ (b'"' | b'\'') => {
                let triple = i + 2 < b.len() && b[i + 1] == q && b[i + 2] == q;
                let allowed_triple = match language {
                    Language::Python => true,
                    Language::Java => q == b'"',
                };
                i = if triple && allowed_triple { skip_triple(b, i + 3, q)? } else { skip_quoted(b, i + 1, q)? };
                continue;
            }
            b'#' if language == Language::Python => {
                i = skip_line(b, i);
                continue;
            }
            b'/' if language == Language::Java && b.get(i + 1) == Some(&b'/') => {
                i = skip_line(b, i);
                continue;
            }
            b'/' if language == Language::Java && b.get(i + 1) == Some(&b'*') => {
                let rest = &text[i + 2..];
                i = i + 2 + rest.find("*/")? + 2;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn skip_line(b: &[u8], mut i: usize) -> usize {
    while i < b.len() && b[i] != b'\n' {
        i += 1;
    }
    i
}

/// Index just past the closing quote; `None` if the literal never closes on
/// its line.
fn skip_quoted(b: &[u8], mut i: usize, q: u8) -> Option<usize> {
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'\n' => return None,
            c if c == q => return Some(i + 1),
            _ => i += 1,
        }
    }
    None
}

fn skip_triple(b: &[u8], mut i: usize, q: u8) -> Option<usize> {
    while i + 2 < b.len() {
        if b[i] == b'\\' {
            i += 2;
            continue;
        }
        if b[i] == q && b[i + 1] == q && b[i + 2] == q {
            return Some(i + 3);
        }
        i += 1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locator::locate;

    const FIG2: &str = "import requests\n\ndef fetch_data(url):\n    # model will fill in the mask by predicting an API name\n    response = requests.get(url)\n    return response.json()\n";

    fn site_for<'a>(sites: &'a [ApiCallSite], method: &str) -> &'a ApiCallSite {
        sites.iter().find(|s| s.method == method).unwrap()
    }

    #[test]
    fn method_infill_on_fetch_data() {
        let f = SourceFile::new("r", "f.py", Language::Python, FIG2.into());
        let sites = locate(&f).unwrap();
        let t = gen_method_infill(site_for(&sites, "get"), &f, &TaskOptions::default()).unwrap();
        assert!(t.prefix.ends_with("requests."));
        assert_eq!(t.ground_truth, "get");
        assert_eq!(t.suffix, "(url)");
        assert_eq!(t.reconstruct(), &f.content[t.region.0..t.region.1]);
        assert_eq!(t.statement_with("get"), "    response = requests.get(url)");
    }

    #[test]
    fn param_completion_on_fetch_data() {
        let src = "import requests\n\ndef fetch_data():\n    url = \"http://example.com/api/data\"\n    response = requests.get(url)\n    return response.json()\n";
        let f = SourceFile::new("r", "f.py", Language::Python, src.into());
        let sites = locate(&f).unwrap();
        let t = gen_param_completion(site_for(&sites, "get"), &f, &TaskOptions::default()).unwrap();
        assert!(t.prefix.ends_with("requests.get("));
        assert_eq!(t.ground_truth, "url");
        assert_eq!(t.suffix, ")");
    }

    #[test]
    fn zero_arg_and_three_arg_calls() {
        let src = "import us.ihmc.commons.MathTools;\nimport java.sql.Connection;\nclass T { void f(Connection conn) {\n  MathTools.checkIntervalContains(t, 0.0, INF);\n  conn.close();\n} }\n";
        let f = SourceFile::new("r", "T.java", Language::Java, src.into());
        let sites = locate(&f).unwrap();
        let opts = TaskOptions::default();
        let p = gen_param_completion(site_for(&sites, "checkIntervalContains"), &f, &opts).unwrap();
        assert_eq!(p.ground_truth, "t, 0.0, INF");
        let m = gen_method_infill(site_for(&sites, "close"), &f, &opts).unwrap();
        assert_eq!(m.suffix, "()");
        let e = gen_param_completion(site_for(&sites, "close"), &f, &opts).unwrap();
        assert_eq!(e.ground_truth, "");
        assert_eq!(e.reconstruct(), &f.content[e.region.0..e.region.1]);
    }

    #[test]
    fn whitespace_between_name_and_parens_round_trips() {
        let src = "from blmath.numerics import vx\nd = vx.magnitude (a - b)\n";
        let f = SourceFile::new("r", "v.py", Language::Python, src.into());
        let sites = locate(&f).unwrap();
        let t = gen_method_infill(&sites[0], &f, &TaskOptions::default()).unwrap();
        assert_eq!(t.suffix, " (a - b)");
        assert_eq!(t.reconstruct(), &f.content[t.region.0..t.region.1]);
    }

    #[test]
    fn prefix_budget_truncates_on_char_boundary() {
        let pad = "é".repeat(50);
        let src = format!("import requests\n# {pad}\nrequests.get(u)\n");
        let f = SourceFile::new("r", "f.py", Language::Python, src);
        let sites = locate(&f).unwrap();
        let opts = TaskOptions { prefix_char_budget: 20, ..Default::default() };
        let t = gen_method_infill(&sites[0], &f, &opts).unwrap();
        assert_eq!(t.prefix.chars().count(), 20);
        assert_eq!(t.reconstruct(), &f.content[t.region.0..t.region.1]);
    }

    #[test]
    fn suffix_to_eof_flag() {
        let f = SourceFile::new("r", "f.py", Language::Python, FIG2.into());
        let sites = locate(&f).unwrap();
        let opts = TaskOptions { suffix_to_eof: true, ..Default::default() };
        let t = gen_method_infill(site_for(&sites, "get"), &f, &opts).unwrap();
        assert!(t.suffix.ends_with("return response.json()\n"));
        assert_eq!(t.region.1, f.content.len());
    }

    #[test]
    fn snippet_window() {
        let t = TaskInstance {
            task_id: "t".into(),
            kind: TaskKind::MethodInfill,
            file_id: "f".into(),
            site_id: "s".into(),
            prefix: "a\nb\nc\n    x = np.".into(),
            ground_truth: "abs".into(),
            suffix: "(y)".into(),
            fqn: "numpy.abs".into(),
            language: Language::Python,
            region: Span(0, 1),
        };
        assert_eq!(t.snippet_with("norm", 1), "c\n    x = np.norm(y)\n");
        assert_eq!(t.snippet_with("abs", 9), "a\nb\nc\n    x = np.abs(y)\n");
    }

    #[test]
    fn bad_span_rejected() {
        let f = SourceFile::new("r", "f.py", Language::Python, FIG2.into());
        let mut site = locate(&f).unwrap().remove(0);
        site.args_span = Span(site.args_span.0, f.content.len() + 5);
        assert!(matches!(
            gen_param_completion(&site, &f, &TaskOptions::default()),
            Err(TaskError::SpanOutOfBounds { .. })
        ));
    }

    #[test]
    fn extract_examples() {
        let py = Language::Python;
        assert_eq!(extract_element("get(url)\nreturn r", TaskKind::MethodInfill, py).unwrap(), "get");
        assert_eq!(extract_element("url, timeout=5).json()", TaskKind::ParamCompletion, py).unwrap(), "url, timeout=5");
        assert_eq!(extract_element("\"a)b\", x)", TaskKind::ParamCompletion, py).unwrap(), "\"a)b\", x");
        assert_eq!(extract_element("f(a), b) + 1", TaskKind::ParamCompletion, py).unwrap(), "f(a), b");
        assert_eq!(extract_element("x  # )\n, y)", TaskKind::ParamCompletion, py).unwrap(), "x  # )\n, y");
        assert_eq!(extract_element("a // b)", TaskKind::ParamCompletion, py).unwrap(), "a // b");
        assert_eq!(extract_element("'''a)''')", TaskKind::ParamCompletion, py).unwrap(), "'''a)'''");
        assert_eq!(extract_element("url, (", TaskKind::ParamCompletion, py), Err(ExtractError::UnbalancedOutput));
        let java = Language::Java;
        assert_eq!(extract_element("')', /* ) */ b) ;", TaskKind::ParamCompletion, java).unwrap(), "')', /* ) */ b");
        assert_eq!(extract_element("$get(x)", TaskKind::MethodInfill, java).unwrap(), "$get");
        assert_eq!(extract_element("(x)", TaskKind::MethodInfill, java).unwrap(), "");
    }
}
