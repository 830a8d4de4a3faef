//! Language tagging and the tree-sitter plumbing shared by every stage.
//!
//! Everything that needs a syntax tree goes through here: the ingest parse
//! gate, call-site location, the lexer token stream used by BLEU and
//! CodeBERTScore, and tree-level equality for exact match.

use std::cell::RefCell;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tree_sitter::{Node, Parser, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Java,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::Python, Language::Java];

    /// Maps a file extension (`.py`, `.java`) onto a language.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "py" => Some(Language::Python),
            "java" => Some(Language::Java),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Java => "java",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Language::Python => "Python",
            Language::Java => "Java",
        }
    }

    /// Fence tag used for fenced code blocks in prompts.
    pub fn fence_tag(self) -> &'static str {
        self.name()
    }

    fn grammar(self) -> tree_sitter::Language {
        match self {
            Language::Python => tree_sitter_python::LANGUAGE.into(),
            Language::Java => tree_sitter_java::LANGUAGE.into(),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "python" | "py" => Ok(Language::Python),
            "java" => Ok(Language::Java),
            other => Err(format!("unknown language `{other}` (expected python or java)")),
        }
    }
}

thread_local! {
    static PYTHON_PARSER: RefCell<Parser> = RefCell::new(new_parser(Language::Python));
    static JAVA_PARSER: RefCell<Parser> = RefCell::new(new_parser(Language::Java));
}

fn new_parser(language: Language) -> Parser {
    let mut parser = Parser::new();
    parser.set_language(&language.grammar()).expect("bundled grammar is ABI-compatible with the tree-sitter runtime");
    parser
}

/// Parses `source` into a concrete syntax tree. The tree may contain error
/// nodes; use [`is_well_formed`] for the parse gate.
pub fn parse(source: &str, language: Language) -> Tree {
    let run = |cell: &RefCell<Parser>| {
        let mut parser = cell.borrow_mut();
        parser.reset();
        parser.parse(source, None).expect("parser has a language and no cancellation flag")
    };
    match language {
        Language::Python => PYTHON_PARSER.with(run),
        Language::Java => JAVA_PARSER.with(run),
    }
}

/// True when the source parses without any ERROR or MISSING node.
pub fn is_well_formed(source: &str, language: Language) -> bool {
    !parse(source, language).root_node().has_error()
}

pub(crate) fn is_comment(kind: &str) -> bool {
    matches!(kind, "comment" | "line_comment" | "block_comment")
}

/// Literal node kinds that are kept whole as a single token.
fn is_atomic_literal(kind: &str) -> bool {
    matches!(kind, "string" | "string_literal" | "character_literal" | "text_block" | "concatenated_string")
}

/// A lexical token with its byte span in the lexed text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Token stream of `source` under the language lexer, comments dropped.
///
/// String literals count as one token. Works on fragments too: the grammar's
/// error recovery still yields leaves for text that does not form a program.
pub fn tokenize(source: &str, language: Language) -> Vec<Token> {
    let tree = parse(source, language);
    let mut out = Vec::new();
    collect_tokens(tree.root_node(), source, &mut out);
    out
}

pub fn token_texts(source: &str, language: Language) -> Vec<String> {
    tokenize(source, language).into_iter().map(|t| t.text).collect()
}

fn collect_tokens(node: Node<'_>, source: &str, out: &mut Vec<Token>) {
    if is_comment(node.kind()) {
        return;
    }
    if node.child_count() == 0 || is_atomic_literal(node.kind()) {
        let (start, end) = (node.start_byte(), node.end_byte());
        // MISSING nodes inserted by error recovery have zero width.
        if start < end {
            let text = &source[start..end];
            if !text.trim().is_empty() {
                out.push(Token { text: text.to_string(), start, end });
            }
        }
        return;
    }
    for i in 0..node.child_count() {
        if let Some(child) = node.child(i) {
            collect_tokens(child, source, out);
        }
    }
}

/// Whitespace- and comment-free shape of a syntax tree: node kinds plus leaf
/// text. Two sources with equal shapes have identical syntax trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeShape {
    Leaf { kind: String, text: String },
    Node { kind: String, children: Vec<TreeShape> },
}

pub fn tree_shape(source: &str, language: Language) -> Option<TreeShape> {
    let tree = parse(source, language);
    let root = tree.root_node();
    if root.has_error() {
        return None;
    }
    Some(shape_of(root, source))
}

fn shape_of(node: Node<'_>, source: &str) -> TreeShape {
    let kind = node.kind().to_string();
    if node.child_count() == 0 || is_atomic_literal(node.kind()) {
        let text = source[node.start_byte()..node.end_byte()].to_string();
        return TreeShape::Leaf { kind, text };
    }
    let children = (0..node.child_count())
        .filter_map(|i| node.child(i))
        .filter(|c| !is_comment(c.kind()))
        .map(|c| shape_of(c, source))
        .collect();
    TreeShape::Node { kind, children }
}

/// True when both sources parse cleanly and have identical trees modulo
/// whitespace and comments.
pub fn same_tree(a: &str, b: &str, language: Language) -> bool {
    match (tree_shape(a, language), tree_shape(b, language)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

pub(crate) fn node_text<'s>(node: Node<'_>, source: &'s str) -> &'s str {
    &source[node.start_byte()..node.end_byte()]
}

/// Named, non-comment children of a node.
pub(crate) fn named_children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    (0..node.named_child_count()).filter_map(|i| node.named_child(i)).filter(|c| !is_comment(c.kind())).collect()
}
