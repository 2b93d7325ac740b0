//! Language-neutral concrete syntax tree and focal-method lookup.
//!
//! A [`SyntaxTree`] is an arena of nodes, each carrying its grammar kind, the
//! field name it occupies in its parent, a byte span into the original source
//! and its children in source order. Node kinds and field names follow the
//! tree-sitter Python grammar, which is what [`SourceParser`] implementations are
//! expected to produce.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::text::{dedent_tail, squash_whitespace};

/// Anything that can turn Python source into a [`SyntaxTree`].
///
/// Implementations must be total: syntax errors are reported through error
/// nodes, never by failing.
pub trait SourceParser {
    fn parse(&self, source: &str) -> SyntaxTree;

    /// True iff `code` parses with zero error nodes.
    fn check_parses(&self, code: &str) -> bool {
        self.parse(code).error_count() == 0
    }
}

impl<P: SourceParser + ?Sized> SourceParser for &P {
    fn parse(&self, source: &str) -> SyntaxTree {
        (**self).parse(source)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(u32);

impl NodeId {
    pub fn from_index(index: usize) -> Self {
        Self(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug)]
struct NodeData {
    kind: &'static str,
    field: Option<&'static str>,
    span: Range<usize>,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    named: bool,
    error: bool,
    missing: bool,
}

/// Description of a node handed to [`TreeBuilder::push`].
#[derive(Clone, Debug)]
pub struct NodeSpec {
    pub kind: &'static str,
    pub field: Option<&'static str>,
    pub span: Range<usize>,
    pub named: bool,
    pub error: bool,
    pub missing: bool,
}

/// Incrementally assembles a [`SyntaxTree`] in preorder.
pub struct TreeBuilder {
    source: String,
    nodes: Vec<NodeData>,
}

impl TreeBuilder {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            nodes: Vec::new(),
        }
    }

    /// Adds a node. The first node pushed (with `parent = None`) becomes the root;
    /// children must be pushed in source order.
    pub fn push(&mut self, parent: Option<NodeId>, spec: NodeSpec) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let len = self.source.len();
        let mut span = spec.span.start.min(len)..spec.span.end.min(len);
        if let Some(p) = parent {
            let ps = &self.nodes[p.index()].span;
            span.start = span.start.clamp(ps.start, ps.end);
            span.end = span.end.clamp(span.start, ps.end.max(span.start));
            self.nodes[p.index()].children.push(id);
        }
        self.nodes.push(NodeData {
            kind: spec.kind,
            field: spec.field,
            span,
            parent,
            children: Vec::new(),
            named: spec.named,
            error: spec.error,
            missing: spec.missing,
        });
        id
    }

    /// Marks an already pushed node as an error node.
    pub fn flag_error(&mut self, id: NodeId) {
        self.nodes[id.index()].error = true;
    }

    pub fn finish(mut self) -> SyntaxTree {
        if self.nodes.is_empty() {
            self.nodes.push(NodeData {
                kind: "module",
                field: None,
                span: 0..0,
                parent: None,
                children: Vec::new(),
                named: true,
                error: false,
                missing: false,
            });
        }
        // The root always covers the whole text so that leading/trailing trivia
        // is reproduced by reserialization.
        self.nodes[0].span = 0..self.source.len();
        let mut line_starts = alloc::vec![0];
        line_starts.extend(
            self.source
                .bytes()
                .enumerate()
                .filter(|(_, b)| *b == b'\n')
                .map(|(i, _)| i + 1),
        );
        SyntaxTree {
            source: self.source,
            nodes: self.nodes,
            line_starts,
            origin: None,
        }
    }
}

/// An immutable parsed source file.
#[derive(Clone)]
pub struct SyntaxTree {
    source: String,
    nodes: Vec<NodeData>,
    line_starts: Vec<usize>,
    origin: Option<String>,
}

impl fmt::Debug for SyntaxTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyntaxTree")
            .field("origin", &self.origin)
            .field("nodes", &self.nodes.len())
            .field("errors", &self.error_count())
            .finish()
    }
}

impl SyntaxTree {
    pub fn root(&self) -> Node<'_> {
        self.node(NodeId(0))
    }

    pub fn node(&self, id: NodeId) -> Node<'_> {
        Node { tree: self, id }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the root has no children.
    pub fn is_empty(&self) -> bool {
        self.root().children().next().is_none()
    }

    /// The file this tree was parsed from, when known.
    pub fn origin(&self) -> Option<&str> {
        self.origin.as_deref()
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = Some(origin.into());
        self
    }

    /// Number of error or missing nodes in the whole tree.
    pub fn error_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.error || n.missing).count()
    }

    /// 1-based line number containing `byte`.
    pub fn line_of(&self, byte: usize) -> usize {
        match self.line_starts.binary_search(&byte) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    /// Byte offset of the start of the line containing `byte`.
    pub fn line_start(&self, byte: usize) -> usize {
        self.line_starts[self.line_of(byte) - 1]
    }

    /// Rebuilds the text from node spans and the gaps between them.
    pub fn reserialize(&self) -> String {
        let mut out = String::with_capacity(self.source.len());
        self.reserialize_into(self.root(), &mut out);
        out
    }

    fn reserialize_into(&self, node: Node<'_>, out: &mut String) {
        let span = node.span();
        let mut cursor = span.start;
        for child in node.children() {
            let cs = child.span();
            if cs.start < cursor {
                continue;
            }
            out.push_str(&self.source[cursor..cs.start]);
            self.reserialize_into(child, out);
            cursor = cs.end;
        }
        out.push_str(&self.source[cursor..span.end]);
    }

    /// Every node in preorder.
    pub fn preorder(&self) -> impl Iterator<Item = Node<'_>> {
        self.root().descendants()
    }
}

/// A borrowed handle to one node of a [`SyntaxTree`].
#[derive(Clone, Copy)]
pub struct Node<'a> {
    tree: &'a SyntaxTree,
    id: NodeId,
}

impl fmt::Debug for Node<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{:?}", self.kind(), self.span())
    }
}

impl PartialEq for Node<'_> {
    fn eq(&self, other: &Self) -> bool {
        core::ptr::eq(self.tree, other.tree) && self.id == other.id
    }
}

impl<'a> Node<'a> {
    fn data(&self) -> &'a NodeData {
        &self.tree.nodes[self.id.index()]
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn tree(&self) -> &'a SyntaxTree {
        self.tree
    }

    pub fn kind(&self) -> &'static str {
        self.data().kind
    }

    /// Field name this node occupies in its parent, if any.
    pub fn field(&self) -> Option<&'static str> {
        self.data().field
    }

    pub fn span(&self) -> Range<usize> {
        self.data().span.clone()
    }

    pub fn text(&self) -> &'a str {
        &self.tree.source[self.data().span.clone()]
    }

    pub fn is_named(&self) -> bool {
        self.data().named
    }

    pub fn is_error(&self) -> bool {
        self.data().error
    }

    pub fn is_missing(&self) -> bool {
        self.data().missing
    }

    /// 1-based first line of the node.
    pub fn start_line(&self) -> usize {
        self.tree.line_of(self.data().span.start)
    }

    /// 1-based last line of the node (the line holding its final byte).
    pub fn end_line(&self) -> usize {
        let span = &self.data().span;
        self.tree.line_of(span.end.saturating_sub(1).max(span.start))
    }

    /// Column (in bytes) at which the node starts.
    pub fn start_column(&self) -> usize {
        let start = self.data().span.start;
        start - self.tree.line_start(start)
    }

    pub fn parent(&self) -> Option<Node<'a>> {
        self.data().parent.map(|id| self.tree.node(id))
    }

    pub fn children(&self) -> impl Iterator<Item = Node<'a>> + 'a {
        let tree = self.tree;
        self.data().children.iter().map(move |id| tree.node(*id))
    }

    pub fn named_children(&self) -> impl Iterator<Item = Node<'a>> + 'a {
        self.children().filter(|c| c.is_named())
    }

    pub fn child_by_field(&self, field: &str) -> Option<Node<'a>> {
        self.children().find(|c| c.field() == Some(field))
    }

    pub fn children_by_field<'f>(&self, field: &'f str) -> impl Iterator<Item = Node<'a>> + 'f
    where
        'a: 'f,
    {
        self.children().filter(move |c| c.field() == Some(field))
    }

    /// This node and all its descendants in preorder.
    pub fn descendants(&self) -> Descendants<'a> {
        Descendants {
            tree: self.tree,
            stack: alloc::vec![self.id],
        }
    }

    /// True if this node or any descendant is an error or missing node.
    pub fn has_error(&self) -> bool {
        self.descendants().any(|n| n.is_error() || n.is_missing())
    }
}

pub struct Descendants<'a> {
    tree: &'a SyntaxTree,
    stack: Vec<NodeId>,
}

impl<'a> Iterator for Descendants<'a> {
    type Item = Node<'a>;

    fn next(&mut self) -> Option<Node<'a>> {
        let id = self.stack.pop()?;
        let node = self.tree.node(id);
        self.stack.extend(node.data().children.iter().rev().copied());
        Some(node)
    }
}

/// The method under test, located in its file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocalMethod {
    /// `module.Class.method` or `module.function`.
    pub qualified_name: String,
    /// Dotted module path (may be empty when the name carried no module part).
    pub module: String,
    pub name: String,
    pub enclosing_class: Option<String>,
    /// Decorators plus the full `def` header, dedented to column zero.
    pub signature: String,
    /// Parameter list (and return annotation) on a single line, e.g. `(path: _PATH) -> str`.
    pub params: String,
    /// Outermost node of the definition (the decorated definition when decorated).
    pub definition: NodeId,
    pub body_root: NodeId,
    /// Byte span of `definition`.
    pub span: Range<usize>,
    /// 1-based inclusive line range of `definition`.
    pub lines: (usize, usize),
    pub source_file: Option<String>,
    /// Whether the definition contains error nodes.
    pub has_syntax_errors: bool,
}

impl FocalMethod {
    /// `Class.method` or `function`, without the module prefix.
    pub fn display_name(&self) -> String {
        match &self.enclosing_class {
            Some(class) => alloc::format!("{class}.{}", self.name),
            None => self.name.clone(),
        }
    }

    /// Identifier-safe stem used to name generated tests.
    pub fn test_stem(&self) -> String {
        self.display_name().replace('.', "_")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LocateError {
    #[error("no definition matching `{0}`")]
    NotFound(String),
    #[error("`{name}` matches {count} definitions")]
    Ambiguous { name: String, count: usize },
    #[error("`{0}` is not a valid qualified name")]
    InvalidName(String),
}

/// Unwraps a `decorated_definition` to the definition it decorates.
pub fn definition_of(node: Node<'_>) -> Node<'_> {
    if node.kind() == "decorated_definition" {
        if let Some(def) = node.child_by_field("definition") {
            return def;
        }
    }
    node
}

pub fn def_name<'a>(node: Node<'a>) -> Option<&'a str> {
    definition_of(node).child_by_field("name").map(|n| n.text())
}

/// Module-level statements that define functions (possibly decorated).
pub fn module_functions<'a>(tree: &'a SyntaxTree) -> impl Iterator<Item = Node<'a>> + 'a {
    tree.root()
        .named_children()
        .filter(|n| definition_of(*n).kind() == "function_definition")
}

/// Module-level statements that define classes (possibly decorated).
pub fn module_classes<'a>(tree: &'a SyntaxTree) -> impl Iterator<Item = Node<'a>> + 'a {
    tree.root()
        .named_children()
        .filter(|n| definition_of(*n).kind() == "class_definition")
}

/// Direct method definitions of a class node (possibly decorated).
pub fn class_methods<'a>(class: Node<'a>) -> impl Iterator<Item = Node<'a>> + 'a {
    definition_of(class)
        .child_by_field("body")
        .into_iter()
        .flat_map(|body| body.named_children())
        .filter(|n| definition_of(*n).kind() == "function_definition")
}

/// Resolves `qualified_name` to a module-level function or a method of a
/// module-level class.
///
/// The last component is the function name. If the component before it names
/// a module-level class that defines that method, the lookup is a method lookup
/// and everything before the class is the module path; otherwise it is a
/// module-level function lookup.
pub fn locate_focal_method(tree: &SyntaxTree, qualified_name: &str) -> Result<FocalMethod, LocateError> {
    let parts: Vec<&str> = qualified_name.split('.').collect();
    if parts.iter().any(|p| !crate::text::is_identifier(p)) {
        return Err(LocateError::InvalidName(qualified_name.to_string()));
    }
    let name = parts[parts.len() - 1];

    if parts.len() >= 2 {
        let class_name = parts[parts.len() - 2];
        let classes: Vec<Node<'_>> = module_classes(tree)
            .filter(|c| def_name(*c) == Some(class_name))
            .collect();
        let methods: Vec<Node<'_>> = classes
            .iter()
            .flat_map(|c| class_methods(*c))
            .filter(|m| def_name(*m) == Some(name))
            .collect();
        if !methods.is_empty() {
            if methods.len() > 1 {
                return Err(LocateError::Ambiguous {
                    name: qualified_name.to_string(),
                    count: methods.len(),
                });
            }
            let module = parts[..parts.len() - 2].join(".");
            return Ok(describe(tree, methods[0], qualified_name, module, Some(class_name)));
        }
    }

    let functions: Vec<Node<'_>> = module_functions(tree).filter(|f| def_name(*f) == Some(name)).collect();
    match functions.len() {
        0 => Err(LocateError::NotFound(qualified_name.to_string())),
        1 => {
            let module = parts[..parts.len() - 1].join(".");
            Ok(describe(tree, functions[0], qualified_name, module, None))
        }
        count => Err(LocateError::Ambiguous {
            name: qualified_name.to_string(),
            count,
        }),
    }
}

fn describe(
    tree: &SyntaxTree,
    outer: Node<'_>,
    qualified_name: &str,
    module: String,
    class: Option<&str>,
) -> FocalMethod {
    let def = definition_of(outer);
    let body = def.child_by_field("body").unwrap_or(def);

    // Header ends at the `:` immediately preceding the body.
    let header_end = def
        .children()
        .take_while(|c| c.field() != Some("body"))
        .filter(|c| c.kind() == ":")
        .last()
        .map(|c| c.span().end)
        .unwrap_or(body.span().start);
    let span = outer.span();
    let raw_sig = &tree.source()[span.start..header_end];
    let signature = dedent_tail(raw_sig, outer.start_column());

    let mut params = def
        .child_by_field("parameters")
        .map(|p| squash_whitespace(p.text()))
        .unwrap_or_else(|| String::from("()"));
    if let Some(ret) = def.child_by_field("return_type") {
        params.push_str(" -> ");
        params.push_str(&squash_whitespace(ret.text()));
    }

    FocalMethod {
        qualified_name: qualified_name.to_string(),
        module,
        name: def_name(def).unwrap_or_default().to_string(),
        enclosing_class: class.map(ToString::to_string),
        signature,
        params,
        definition: outer.id(),
        body_root: body.id(),
        span: span.clone(),
        lines: (outer.start_line(), outer.end_line()),
        source_file: tree.origin().map(ToString::to_string),
        has_syntax_errors: outer.has_error(),
    }
}
