//! Library-API call-site location and per-file signature deduplication.
//!
//! Receivers are resolved in three tiers: module or alias attribute calls
//! (`np.argmax`), calls on an imported class (`MathTools.checkIntervalContains`),
//! and Java receivers whose declared type is imported. Anything else is kept
//! as [`ReceiverKind::Unresolved`] with an empty fully-qualified name.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use crate::corpus::SourceFile;
use crate::lang::{self, node_text, Language};

/// Half-open byte range `[start, end)`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span(pub usize, pub usize);

impl Span {
    pub fn start(self) -> usize {
        self.0
    }
    pub fn end(self) -> usize {
        self.1
    }
    pub fn len(self) -> usize {
        self.1 - self.0
    }
    pub fn is_empty(self) -> bool {
        self.0 == self.1
    }
    fn of(node: Node<'_>) -> Span {
        Span(node.start_byte(), node.end_byte())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    ImportAlias,
    StaticClass,
    TypedReceiver,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiCallSite {
    pub site_id: String,
    pub file_id: String,
    pub language: Language,
    /// Dotted name such as `numpy.argmax`; empty when unresolved.
    pub fqn: String,
    /// The called method's identifier as written.
    pub method: String,
    pub receiver_kind: ReceiverKind,
    pub method_span: Span,
    /// From `(` through the matching `)`, inclusive.
    pub args_span: Span,
    pub arity: usize,
    pub imports: Vec<String>,
}

impl ApiCallSite {
    pub fn is_resolved(&self) -> bool {
        self.receiver_kind != ReceiverKind::Unresolved
    }

    pub fn signature_key(&self) -> SignatureKey {
        SignatureKey { file_id: self.file_id.clone(), fqn: self.fqn.clone(), arity: self.arity }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignatureKey {
    pub file_id: String,
    pub fqn: String,
    pub arity: usize,
}

#[derive(Debug, Clone)]
pub struct LocateOptions {
    /// When false, calls into the language's standard library are dropped.
    pub include_stdlib: bool,
}

impl Default for LocateOptions {
    fn default() -> Self {
        LocateOptions { include_stdlib: true }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LocateError {
    #[error("file {file_id} ({path}) does not parse as {language}")]
    ParseFailure { file_id: String, path: String, language: Language },
}

/// Finds every method call in `file`, in document order of the method
/// identifier (so chained calls come out innermost first).
pub fn locate(file: &SourceFile) -> Result<Vec<ApiCallSite>, LocateError> {
    locate_with(file, &LocateOptions::default())
}

pub fn locate_with(file: &SourceFile, opts: &LocateOptions) -> Result<Vec<ApiCallSite>, LocateError> {
    let src = file.content.as_str();
    let tree = lang::parse(src, file.language);
    let root = tree.root_node();
    if root.has_error() {
        return Err(LocateError::ParseFailure {
            file_id: file.file_id.clone(),
            path: file.path.clone(),
            language: file.language,
        });
    }

    let mut raw = Vec::new();
    let imports = match file.language {
        Language::Python => {
            let imports = PythonImports::collect(root, src);
            visit(root, &mut |n| {
                if n.kind() == "call" {
                    if let Some(r) = python_call(n, src, &imports) {
                        raw.push(r);
                    }
                }
            });
            imports.statements
        }
        Language::Java => {
            let imports = JavaImports::collect(root, src);
            visit(root, &mut |n| {
                if n.kind() == "method_invocation" {
                    if let Some(r) = java_call(n, src, &imports) {
                        raw.push(r);
                    }
                }
            });
            imports.statements
        }
    };
    raw.sort_by_key(|r| r.method_span);

    let sites = raw
        .into_iter()
        .filter(|r| opts.include_stdlib || !is_stdlib(&r.fqn, file.language))
        .map(|r| ApiCallSite {
            site_id: format!("{}:{}", file.file_id, r.method_span.start()),
            file_id: file.file_id.clone(),
            language: file.language,
            fqn: r.fqn,
            method: src[r.method_span.start()..r.method_span.end()].to_string(),
            receiver_kind: r.kind,
            method_span: r.method_span,
            args_span: r.args_span,
            arity: r.arity,
            imports: imports.clone(),
        })
        .collect();
    Ok(sites)
}

struct RawSite {
    fqn: String,
    kind: ReceiverKind,
    method_span: Span,
    args_span: Span,
    arity: usize,
}

fn visit<'t>(node: Node<'t>, f: &mut impl FnMut(Node<'t>)) {
    f(node);
    for i in 0..node.child_count() {
        if let Some(c) = node.child(i) {
            visit(c, f);
        }
    }
}

fn arity_of(args: Node<'_>) -> usize {
    match args.kind() {
        "argument_list" => lang::named_children(args).len(),
        // `f(x for x in xs)`: the generator is the single argument.
        _ => 1,
    }
}

const PYTHON_STDLIB: &[&str] = &[
    "abc",
    "aifc",
    "argparse",
    "array",
    "ast",
    "asynchat",
    "asyncio",
    "asyncore",
    "atexit",
    "audioop",
    "base64",
    "bdb",
    "binascii",
    "bisect",
    "builtins",
    "bz2",
    "cProfile",
    "calendar",
    "cgi",
    "cgitb",
    "chunk",
    "cmath",
    "cmd",
    "code",
    "codecs",
    "codeop",
    "collections",
    "colorsys",
    "compileall",
    "concurrent",
    "configparser",
    "contextlib",
    "contextvars",
    "copy",
    "copyreg",
    "crypt",
    "csv",
    "ctypes",
    "curses",
    "dataclasses",
    "datetime",
    "dbm",
    "decimal",
    "difflib",
    "dis",
    "distutils",
    "doctest",
    "email",
    "encodings",
    "ensurepip",
    "enum",
    "errno",
    "faulthandler",
    "fcntl",
    "filecmp",
    "fileinput",
    "fnmatch",
    "fractions",
    "ftplib",
    "functools",
    "gc",
    "getopt",
    "getpass",
    "gettext",
    "glob",
    "graphlib",
    "grp",
    "gzip",
    "hashlib",
    "heapq",
    "hmac",
    "html",
    "http",
    "imaplib",
    "imghdr",
    "imp",
    "importlib",
    "inspect",
    "io",
    "ipaddress",
    "itertools",
    "json",
    "keyword",
    "lib2to3",
    "linecache",
    "locale",
    "logging",
    "lzma",
    "mailbox",
    "mailcap",
    "marshal",
    "math",
    "mimetypes",
    "mmap",
    "modulefinder",
    "multiprocessing",
    "netrc",
    "nntplib",
    "numbers",
    "opcode",
    "operator",
    "optparse",
    "os",
    "pathlib",
    "pdb",
    "pickle",
    "pickletools",
    "pipes",
    "pkgutil",
    "platform",
    "plistlib",
    "poplib",
    "posix",
    "posixpath",
    "pprint",
    "profile",
    "pstats",
    "pty",
    "pwd",
    "py_compile",
    "pyclbr",
    "pydoc",
    "queue",
    "quopri",
    "random",
    "re",
    "readline",
    "reprlib",
    "resource",
    "rlcompleter",
    "runpy",
    "sched",
    "secrets",
    "select",
    "selectors",
    "shelve",
    "shlex",
    "shutil",
    "signal",
    "site",
    "smtpd",
    "smtplib",
    "sndhdr",
    "socket",
    "socketserver",
    "sqlite3",
    "ssl",
    "stat",
    "statistics",
    "string",
    "stringprep",
    "struct",
    "subprocess",
    "sunau",
    "symtable",
    "sys",
    "sysconfig",
    "syslog",
    "tabnanny",
    "tarfile",
    "telnetlib",
    "tempfile",
    "termios",
    "textwrap",
    "threading",
    "time",
    "timeit",
    "tkinter",
    "token",
    "tokenize",
    "trace",
    "traceback",
    "tracemalloc",
    "tty",
    "turtle",
    "types",
    "typing",
    "unicodedata",
    "unittest",
    "urllib",
    "uu",
    "uuid",
    "venv",
    "warnings",
    "wave",
    "weakref",
    "webbrowser",
    "wsgiref",
    "xdrlib",
    "xml",
    "xmlrpc",
    "zipapp",
    "zipfile",
    "zipimport",
    "zlib",
    "zoneinfo",
];

/// Standard-library test on a resolved fully-qualified name.
pub fn is_stdlib(fqn: &str, language: Language) -> bool {
    match language {
        Language::Java => fqn.starts_with("java.") || fqn.starts_with("javax."),
        Language::Python => {
            let top = fqn.split('.').next().unwrap_or("");
            PYTHON_STDLIB.binary_search(&top).is_ok()
        }
    }
}

// ---------------------------------------------------------------------------
// Python
// ---------------------------------------------------------------------------

struct PythonImports {
    /// Local binding -> qualified module or member path.
    bindings: HashMap<String, String>,
    statements: Vec<String>,
}

impl PythonImports {
    fn collect(root: Node<'_>, src: &str) -> Self {
        let mut bindings = HashMap::new();
        let mut statements = Vec::new();
        visit(root, &mut |n| match n.kind() {
            "import_statement" => {
                statements.push(squash(node_text(n, src)));
                for name in children_by_field(n, "name") {
                    match name.kind() {
                        "dotted_name" => {
                            // `import a.b` binds `a`; attribute access walks the rest.
                            let path = node_text(name, src);
                            let head = path.split('.').next().unwrap_or(path).trim().to_string();
                            bindings.insert(head.clone(), head);
                        }
                        "aliased_import" => {
                            if let (Some(path), Some(alias)) =
                                (name.child_by_field_name("name"), name.child_by_field_name("alias"))
                            {
                                bindings.insert(node_text(alias, src).to_string(), dotted(path, src));
                            }
                        }
                        _ => {}
                    }
                }
            }
            "import_from_statement" => {
                statements.push(squash(node_text(n, src)));
                let Some(module) = n.child_by_field_name("module_name") else { return };
                // Relative imports point into the project itself, not a library.
                if module.kind() != "dotted_name" {
                    return;
                }
                let module = dotted(module, src);
                for name in children_by_field(n, "name") {
                    match name.kind() {
                        "dotted_name" => {
                            let member = dotted(name, src);
                            bindings.insert(member.clone(), format!("{module}.{member}"));
                        }
                        "aliased_import" => {
                            if let (Some(path), Some(alias)) =
                                (name.child_by_field_name("name"), name.child_by_field_name("alias"))
                            {
                                bindings.insert(
                                    node_text(alias, src).to_string(),
                                    format!("{module}.{}", dotted(path, src)),
                                );
                            }
                        }
                        _ => {}
                    }
                }
            }
            _ => {}
        });
        PythonImports { bindings, statements }
    }
}

fn children_by_field<'t>(node: Node<'t>, field: &str) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.children_by_field_name(field, &mut cursor).collect()
}

fn dotted(node: Node<'_>, src: &str) -> String {
    node_text(node, src).chars().filter(|c| !c.is_whitespace()).collect()
}

fn squash(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `a.b.c` made only of identifiers, as its segments.
fn python_name_chain(node: Node<'_>, src: &str) -> Option<Vec<String>> {
    match node.kind() {
        "identifier" => Some(vec![node_text(node, src).to_string()]),
        "attribute" => {
            let mut head = python_name_chain(node.child_by_field_name("object")?, src)?;
            head.push(node_text(node.child_by_field_name("attribute")?, src).to_string());
            Some(head)
        }
        _ => None,
    }
}

fn python_call(call: Node<'_>, src: &str, imports: &PythonImports) -> Option<RawSite> {
    let function = call.child_by_field_name("function")?;
    let args = call.child_by_field_name("arguments")?;
    let (method, receiver) = match function.kind() {
        "attribute" => (function.child_by_field_name("attribute")?, function.child_by_field_name("object")),
        "identifier" => (function, None),
        _ => return None,
    };
    let method_name = node_text(method, src);
    let resolved = match receiver {
        Some(obj) => python_name_chain(obj, src).and_then(|chain| {
            let base = imports.bindings.get(&chain[0])?;
            let mut fqn = base.clone();
            for seg in &chain[1..] {
                fqn.push('.');
                fqn.push_str(seg);
            }
            Some(format!("{fqn}.{method_name}"))
        }),
        None => imports.bindings.get(method_name).cloned(),
    };
    let (fqn, kind) = match resolved {
        Some(f) => (f, ReceiverKind::ImportAlias),
        None => (String::new(), ReceiverKind::Unresolved),
    };
    Some(RawSite { fqn, kind, method_span: Span::of(method), args_span: Span::of(args), arity: arity_of(args) })
}

// ---------------------------------------------------------------------------
// Java
// ---------------------------------------------------------------------------

struct JavaImports {
    /// Simple class name -> fully-qualified class name.
    classes: HashMap<String, String>,
    /// Statically imported member -> fully-qualified member name.
    members: HashMap<String, String>,
    statements: Vec<String>,
}

impl JavaImports {
    fn collect(root: Node<'_>, src: &str) -> Self {
        let mut classes = HashMap::new();
        let mut members = HashMap::new();
        let mut statements = Vec::new();
        for decl in lang::named_children(root).into_iter().filter(|n| n.kind() == "import_declaration") {
            statements.push(squash(node_text(decl, src)));
            let mut is_static = false;
            let mut wildcard = false;
            let mut path = None;
            for i in 0..decl.child_count() {
                let Some(c) = decl.child(i) else { continue };
                match c.kind() {
                    "static" => is_static = true,
                    "asterisk" => wildcard = true,
                    "scoped_identifier" | "identifier" => path = Some(dotted(c, src)),
                    _ => {}
                }
            }
            let Some(path) = path else { continue };
            if wildcard {
                continue;
            }
            let simple = path.rsplit('.').next().unwrap_or(&path).to_string();
            if is_static {
                members.insert(simple, path);
            } else {
                classes.insert(simple, path);
            }
        }
        JavaImports { classes, members, statements }
    }
}

/// Simple name of a declared type, or `None` for arrays, primitives and
/// qualified types.
fn java_type_name(ty: Node<'_>, src: &str) -> Option<String> {
    match ty.kind() {
        "type_identifier" => Some(node_text(ty, src).to_string()),
        "generic_type" => {
            let base = ty.named_child(0)?;
            if base.kind() == "type_identifier" {
                Some(node_text(base, src).to_string())
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Declared type of a declarator, looking through `var x = new T(..)`.
fn declared_type(ty: Node<'_>, declarator: Node<'_>, src: &str) -> Option<String> {
    let name = java_type_name(ty, src)?;
    if name == "var" {
        let value = declarator.child_by_field_name("value")?;
        if value.kind() == "object_creation_expression" {
            return java_type_name(value.child_by_field_name("type")?, src);
        }
        return None;
    }
    Some(name)
}

fn declarators_of<'t>(decl: Node<'t>) -> Vec<Node<'t>> {
    children_by_field(decl, "declarator")
}

/// Finds the declared type of variable `var` visible at `site`, searching
/// enclosing scopes from the innermost outwards.
fn lookup_variable(site: Node<'_>, var: &str, src: &str) -> Option<Option<String>> {
    let at = site.start_byte();
    let mut node = site.parent();
    while let Some(scope) = node {
        if let Some(found) = declaration_in_scope(scope, var, at, src) {
            return Some(found);
        }
        node = scope.parent();
    }
    None
}

/// `Some(type)` when `scope` declares `var`; the inner option is `None` when
/// the declared type has no resolvable simple name.
fn declaration_in_scope(scope: Node<'_>, var: &str, at: usize, src: &str) -> Option<Option<String>> {
    let name_is = |n: Option<Node<'_>>| n.is_some_and(|n| node_text(n, src) == var);
    match scope.kind() {
        "block" | "constructor_body" | "switch_block_statement_group" | "program" => {
            let mut hit = None;
            for stmt in lang::named_children(scope) {
                if stmt.start_byte() >= at {
                    break;
                }
                if stmt.kind() == "local_variable_declaration" {
                    let ty = stmt.child_by_field_name("type")?;
                    for d in declarators_of(stmt) {
                        if name_is(d.child_by_field_name("name")) {
                            hit = Some(declared_type(ty, d, src));
                        }
                    }
                }
            }
            hit
        }
        "method_declaration" | "constructor_declaration" | "lambda_expression" => {
            let params = scope.child_by_field_name("parameters")?;
            lang::named_children(params)
                .into_iter()
                .filter(|p| matches!(p.kind(), "formal_parameter" | "spread_parameter"))
                .find(|p| {
                    name_is(p.child_by_field_name("name"))
                        || p.named_children(&mut p.walk())
                            .any(|c| c.kind() == "variable_declarator" && name_is(c.child_by_field_name("name")))
                })
                .map(|p| p.child_by_field_name("type").and_then(|t| java_type_name(t, src)))
        }
        "class_body" | "enum_body" | "interface_body" | "enum_body_declarations" => {
            for member in lang::named_children(scope) {
                if member.kind() != "field_declaration" {
                    continue;
                }
                let Some(ty) = member.child_by_field_name("type") else { continue };
                for d in declarators_of(member) {
                    if name_is(d.child_by_field_name("name")) {
                        return Some(declared_type(ty, d, src));
                    }
                }
            }
            None
        }
        "enhanced_for_statement" => {
            if name_is(scope.child_by_field_name("name")) {
                Some(scope.child_by_field_name("type").and_then(|t| java_type_name(t, src)))
            } else {
                None
            }
        }
        "for_statement" => {
            let init = scope.child_by_field_name("init")?;
            if init.kind() != "local_variable_declaration" {
                return None;
            }
            let ty = init.child_by_field_name("type")?;
            declarators_of(init)
                .into_iter()
                .find(|d| name_is(d.child_by_field_name("name")))
                .map(|d| declared_type(ty, d, src))
        }
        "catch_clause" => {
            let param = lang::named_children(scope).into_iter().find(|c| c.kind() == "catch_formal_parameter")?;
            if !name_is(param.child_by_field_name("name")) {
                return None;
            }
            let ty = lang::named_children(param).into_iter().find(|c| c.kind() == "catch_type")?;
            let first = ty.named_child(0)?;
            Some(java_type_name(first, src))
        }
        "try_with_resources_statement" => {
            let resources = scope.child_by_field_name("resources")?;
            lang::named_children(resources)
                .into_iter()
                .find(|r| r.kind() == "resource" && name_is(r.child_by_field_name("name")))
                .map(|r| r.child_by_field_name("type").and_then(|t| java_type_name(t, src)))
        }
        _ => None,
    }
}

fn java_call(call: Node<'_>, src: &str, imports: &JavaImports) -> Option<RawSite> {
    let method = call.child_by_field_name("name")?;
    let args = call.child_by_field_name("arguments")?;
    let method_name = node_text(method, src);
    let typed = |ty: Option<String>| {
        ty.and_then(|t| imports.classes.get(&t).cloned())
            .map(|class| (format!("{class}.{method_name}"), ReceiverKind::TypedReceiver))
    };
    let resolved = match call.child_by_field_name("object") {
        None => imports.members.get(method_name).map(|m| (m.clone(), ReceiverKind::StaticClass)),
        Some(obj) if obj.kind() == "identifier" => {
            let name = node_text(obj, src);
            // Variables shadow class names.
            match lookup_variable(call, name, src) {
                Some(ty) => typed(ty),
                None => {
                    imports.classes.get(name).map(|class| (format!("{class}.{method_name}"), ReceiverKind::StaticClass))
                }
            }
        }
        Some(obj) if obj.kind() == "field_access" => {
            let inner = obj.child_by_field_name("object")?;
            let field = obj.child_by_field_name("field")?;
            if inner.kind() == "this" {
                class_field_type(call, node_text(field, src), src).and_then(|ty| typed(Some(ty)))
            } else {
                None
            }
        }
        Some(_) => None,
    };
    let (fqn, kind) = resolved.unwrap_or((String::new(), ReceiverKind::Unresolved));
    Some(RawSite { fqn, kind, method_span: Span::of(method), args_span: Span::of(args), arity: arity_of(args) })
}

fn class_field_type(site: Node<'_>, field: &str, src: &str) -> Option<String> {
    let mut node = site.parent();
    while let Some(n) = node {
        if n.kind() == "class_body" || n.kind() == "enum_body" {
            return declaration_in_scope(n, field, site.start_byte(), src).flatten();
        }
        node = n.parent();
    }
    None
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Keeps one site per [`SignatureKey`] (first in document order), then draws
/// distinct fully-qualified names uniformly with a seeded shuffle and takes
/// their sites until `per_language_cap` is reached. Unresolved sites never
/// enter the sample. Output is ordered by file and position.
pub fn dedup_sample(sites: &[ApiCallSite], per_language_cap: usize, seed: u64) -> Vec<ApiCallSite> {
    let mut ordered: Vec<&ApiCallSite> = sites.iter().filter(|s| s.is_resolved()).collect();
    ordered.sort_by(|a, b| (&a.file_id, a.method_span).cmp(&(&b.file_id, b.method_span)));

    let mut seen = HashSet::new();
    let mut by_fqn: HashMap<&str, Vec<&ApiCallSite>> = HashMap::new();
    for s in ordered {
        if seen.insert(s.signature_key()) {
            by_fqn.entry(s.fqn.as_str()).or_default().push(s);
        }
    }

    let mut fqns: Vec<&str> = by_fqn.keys().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fqns.shuffle(&mut rng);

    let mut picked = Vec::new();
    'outer: for fqn in fqns {
        for s in &by_fqn[fqn] {
            if picked.len() >= per_language_cap {
                break 'outer;
            }
            picked.push((*s).clone());
        }
    }
    picked.sort_by(|a, b| (&a.file_id, a.method_span).cmp(&(&b.file_id, b.method_span)));
    picked
}
