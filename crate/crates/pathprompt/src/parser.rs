//! tree-sitter front end producing [`SyntaxTree`]s.
//!
//! The grammar comes from the pinned `tree-sitter-python` crate. On top of the
//! grammar's own ERROR/MISSING nodes, two constructs that tree-sitter accepts
//! but Python 3 rejects are flagged as errors: empty blocks and Python 2
//! `print`/`exec` statements.

use std::cell::RefCell;
use std::path::Path;

use pathprompt_core::syntax::{NodeId, NodeSpec, SourceParser, SyntaxTree, TreeBuilder};
use tree_sitter::{Node, Parser};

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("source is not valid UTF-8: {0}")]
    UnreadableSource(#[from] std::str::Utf8Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

thread_local! {
    static PARSER: RefCell<Parser> = RefCell::new({
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("tree-sitter-python grammar is ABI compatible");
        parser
    });
}

/// Python 3 parser backed by tree-sitter.
#[derive(Clone, Copy, Debug, Default)]
pub struct PythonParser;

impl SourceParser for PythonParser {
    fn parse(&self, source: &str) -> SyntaxTree {
        let ts_tree = PARSER.with(|p| p.borrow_mut().parse(source, None));
        let mut builder = TreeBuilder::new(source);
        if let Some(ts_tree) = ts_tree {
            convert(ts_tree.root_node(), &mut builder);
        }
        builder.finish()
    }
}

const PYTHON2_ONLY: &[&str] = &["print_statement", "exec_statement"];

fn spec(node: Node<'_>, field: Option<&'static str>) -> NodeSpec {
    let empty_block = node.kind() == "block" && {
        let mut c = node.walk();
        let empty = !node.named_children(&mut c).any(|n| n.kind() != "comment");
        empty
    };
    NodeSpec {
        kind: node.kind(),
        field,
        span: node.byte_range(),
        named: node.is_named(),
        error: node.is_error() || empty_block || PYTHON2_ONLY.contains(&node.kind()),
        missing: node.is_missing(),
    }
}

fn convert(root: Node<'_>, builder: &mut TreeBuilder) {
    let mut cursor = root.walk();
    let mut parents: Vec<NodeId> = Vec::new();
    loop {
        let id = builder.push(parents.last().copied(), spec(cursor.node(), cursor.field_name()));
        if cursor.goto_first_child() {
            parents.push(id);
            continue;
        }
        loop {
            if cursor.goto_next_sibling() {
                break;
            }
            if !cursor.goto_parent() {
                return;
            }
            parents.pop();
        }
    }
}

/// Parses raw bytes, rejecting invalid UTF-8.
pub fn parse_source(bytes: &[u8]) -> Result<SyntaxTree, ParseError> {
    let text = std::str::from_utf8(bytes)?;
    Ok(PythonParser.parse(text))
}

/// Reads and parses a file; the tree remembers its origin path.
pub fn parse_file(path: &Path) -> Result<SyntaxTree, ParseError> {
    let bytes = std::fs::read(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_source(&bytes)?.with_origin(path.display().to_string()))
}

pub fn check_parses(code: &str) -> bool {
    PythonParser.check_parses(code)
}
