//! Corpus ingestion: walk a source tree, keep the Python and Java files that
//! pass the parse gate, and give each one a stable identifier.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use globset::{GlobBuilder, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::lang::{self, Language};

/// Files larger than this are skipped.
pub const MAX_FILE_BYTES: u64 = 512 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub file_id: String,
    pub repo: String,
    pub path: String,
    pub language: Language,
    pub content: String,
    /// Lowercase hex SHA-256 of `content`.
    pub content_hash: String,
}

impl SourceFile {
    pub fn new(repo: &str, path: &str, language: Language, content: String) -> Self {
        SourceFile {
            file_id: file_id(repo, path),
            repo: repo.to_string(),
            path: path.to_string(),
            language,
            content_hash: content_hash(&content),
            content,
        }
    }
}

pub fn content_hash(content: &str) -> String {
    hex::encode(Sha256::digest(content.as_bytes()))
}

/// Stable id derived from (repo, path); unaffected by content edits.
pub fn file_id(repo: &str, path: &str) -> String {
    let mut h = Sha256::new();
    h.update(repo.as_bytes());
    h.update([0u8]);
    h.update(path.as_bytes());
    hex::encode(&h.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkipReason {
    Excluded { pattern: String },
    TooLarge { bytes: u64 },
    InvalidUtf8,
    ParseError,
    Unreadable { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub repo: String,
    pub files: Vec<String>,
    pub counts: BTreeMap<Language, usize>,
    pub seed: u64,
    pub discovered: usize,
    pub skipped: Vec<SkippedFile>,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Restrict to one language; `None` keeps both.
    pub language: Option<Language>,
    /// Glob patterns matched against the root-relative path.
    pub exclusions: Vec<String>,
    pub max_file_bytes: u64,
    pub seed: u64,
    /// Repository name; defaults to the root directory's name.
    pub repo: Option<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { language: None, exclusions: Vec::new(), max_file_bytes: MAX_FILE_BYTES, seed: 0, repo: None }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub files: Vec<SourceFile>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus root not found or unreadable: {0}")]
    RootNotFound(PathBuf),
    #[error("no files retained under {root} ({discovered} discovered, all skipped)")]
    NoFilesRetained { root: PathBuf, discovered: usize },
    #[error("invalid exclusion pattern `{pattern}`: {message}")]
    BadPattern { pattern: String, message: String },
}

enum Outcome {
    Kept(SourceFile),
    Skipped(SkippedFile),
}

fn build_globs(patterns: &[String]) -> Result<GlobSet, CorpusError> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        let glob = GlobBuilder::new(p)
            .literal_separator(true)
            .build()
            .map_err(|e| CorpusError::BadPattern { pattern: p.clone(), message: e.to_string() })?;
        b.add(glob);
    }
    b.build().map_err(|e| CorpusError::BadPattern { pattern: patterns.join(","), message: e.to_string() })
}

/// Walks `root`, applying the exclusion globs, the size cap, the UTF-8
/// requirement and the parse gate, in that order.
pub fn ingest(root: &Path, opts: &IngestOptions) -> Result<Corpus, CorpusError> {
    if !root.is_dir() || fs::read_dir(root).is_err() {
        return Err(CorpusError::RootNotFound(root.to_path_buf()));
    }
    let globs = build_globs(&opts.exclusions)?;
    let repo = opts.repo.clone().unwrap_or_else(|| {
        root.canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "repo".to_string())
    });

    let mut discovered: Vec<(String, PathBuf, Language)> = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let language = Language::from_path(e.path())?;
            if opts.language.is_some_and(|l| l != language) {
                return None;
            }
            let rel = e.path().strip_prefix(root).ok()?;
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            Some((rel, e.path().to_path_buf(), language))
        })
        .collect();
    discovered.sort_by(|a, b| a.0.cmp(&b.0));

    let outcomes: Vec<Outcome> =
        discovered.par_iter().map(|(rel, abs, language)| examine(&repo, rel, abs, *language, &globs, opts)).collect();

    let mut files = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Kept(f) => files.push(f),
            Outcome::Skipped(s) => {
                log::debug!("skip {}: {:?}", s.path, s.reason);
                skipped.push(s)
            }
        }
    }
    if files.is_empty() {
        return Err(CorpusError::NoFilesRetained { root: root.to_path_buf(), discovered: discovered.len() });
    }

    let mut counts = BTreeMap::new();
    for f in &files {
        *counts.entry(f.language).or_insert(0) += 1;
    }
    let manifest = CorpusManifest {
        repo,
        files: files.iter().map(|f| f.file_id.clone()).collect(),
        counts,
        seed: opts.seed,
        discovered: discovered.len(),
        skipped,
    };
    Ok(Corpus { manifest, files })
}

fn examine(repo: &str, rel: &str, abs: &Path, language: Language, globs: &GlobSet, opts: &IngestOptions) -> Outcome {
    let skip = |reason| Outcome::Skipped(SkippedFile { path: rel.to_string(), reason });
    if let Some(i) = globs.matches(rel).first() {
        return skip(SkipReason::Excluded { pattern: opts.exclusions[*i].clone() });
    }
    match fs::metadata(abs) {
        Ok(m) if m.len() > opts.max_file_bytes => return skip(SkipReason::TooLarge { bytes: m.len() }),
        Ok(_) => {}
        Err(e) => return skip(SkipReason::Unreadable { message: e.to_string() }),
    }
    let bytes = match fs::read(abs) {
        Ok(b) => b,
        Err(e) => return skip(SkipReason::Unreadable { message: e.to_string() }),
    };
    let Ok(content) = String::from_utf8(bytes) else {
        return skip(SkipReason::InvalidUtf8);
    };
    if !lang::is_well_formed(&content, language) {
        return skip(SkipReason::ParseError);
    }
    Outcome::Kept(SourceFile::new(repo, rel, language, content))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(root: &Path, rel: &str, body: &[u8]) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, body).unwrap();
    }

    #[test]
    fn single_valid_python_file() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.py", b"import os\nprint(os.getcwd())\n");
        let c = ingest(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(c.manifest.files.len(), 1);
        assert_eq!(c.manifest.counts[&Language::Python], 1);
        assert_eq!(c.files[0].content_hash, content_hash(&c.files[0].content));
    }

    #[test]
    fn syntax_error_is_skipped_and_logged() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ok.py", b"x = 1\n");
        write(dir.path(), "bad.py", b"def f(:\n");
        let c = ingest(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(c.manifest.files.len(), 1);
        assert_eq!(c.manifest.skipped.len(), 1);
        assert_eq!(c.manifest.skipped[0].reason, SkipReason::ParseError);
    }

    #[test]
    fn exclusion_glob_counts() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.py", b"x = 1\n");
        write(dir.path(), "pkg/b.py", b"y = 2\n");
        write(dir.path(), "pkg/test_c.py", b"z = 3\n");
        write(dir.path(), "A.java", b"class A {}\n");
        write(dir.path(), "src/B.java", b"class B {}\n");
        let opts = IngestOptions { exclusions: vec!["**/test_*".into()], ..Default::default() };
        let c = ingest(dir.path(), &opts).unwrap();
        assert_eq!(c.manifest.counts[&Language::Python], 2);
        assert_eq!(c.manifest.counts[&Language::Java], 2);
        assert_eq!(c.manifest.discovered, c.files.len() + c.manifest.skipped.len());
    }

    #[test]
    fn invalid_utf8_and_oversize_skipped() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ok.py", b"x = 1\n");
        write(dir.path(), "latin.py", b"s = '\xe9'\n");
        write(dir.path(), "big.py", &vec![b'#'; (MAX_FILE_BYTES + 1) as usize]);
        let c = ingest(dir.path(), &IngestOptions::default()).unwrap();
        let reasons: Vec<_> = c.manifest.skipped.iter().map(|s| &s.reason).collect();
        assert!(reasons.contains(&&SkipReason::InvalidUtf8));
        assert!(reasons.contains(&&SkipReason::TooLarge { bytes: MAX_FILE_BYTES + 1 }));
    }

    #[test]
    fn missing_root_and_empty_corpus() {
        let err = ingest(Path::new("/definitely/not/here"), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::RootNotFound(_)));
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "bad.py", b"def (\n");
        let err = ingest(dir.path(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::NoFilesRetained { discovered: 1, .. }));
    }

    #[test]
    fn language_filter() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.py", b"x = 1\n");
        write(dir.path(), "A.java", b"class A {}\n");
        let opts = IngestOptions { language: Some(Language::Java), ..Default::default() };
        let c = ingest(dir.path(), &opts).unwrap();
        assert_eq!(c.files.len(), 1);
        assert_eq!(c.files[0].language, Language::Java);
    }
}
