//! Approximate path-constraint collection.
//!
//! The focal method body is walked in preorder while two lists are kept:
//! *active* paths (constraints needed to reach the current statement) and
//! *terminal* paths (constraints that end in a `return`, a `raise`, or the end
//! of the method, together with the returned expression). Branch and loop
//! conditions are recorded verbatim; nothing is solved or evaluated.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::minimize::{minimize_paths, Constrained};
use crate::syntax::{FocalMethod, Node, SyntaxTree};
use crate::text::squash_whitespace;

/// One branch condition, kept as source text.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Constraint {
    expr: String,
    negated: bool,
}

impl Constraint {
    /// Builds a positive constraint; whitespace runs collapse to one space.
    /// Returns `None` for blank conditions.
    pub fn new(expr: &str) -> Option<Self> {
        let expr = squash_whitespace(expr);
        (!expr.is_empty()).then_some(Self { expr, negated: false })
    }

    pub fn expr(&self) -> &str {
        &self.expr
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    #[must_use]
    pub fn negate(&self) -> Self {
        Self {
            expr: self.expr.clone(),
            negated: !self.negated,
        }
    }

    pub fn render(&self) -> String {
        if self.negated {
            alloc::format!("not ({})", self.expr)
        } else {
            self.expr.clone()
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "not ({})", self.expr)
        } else {
            f.write_str(&self.expr)
        }
    }
}

pub fn negate(c: &Constraint) -> Constraint {
    c.negate()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    /// Ends in `return <expr>`.
    Returning,
    /// Falls off the end of the method or hits a bare `return`.
    ImplicitNone,
    /// Ends in a `raise` statement.
    Raising,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionPath {
    pub constraints: Vec<Constraint>,
    pub return_expr: Option<String>,
    pub kind: PathKind,
}

impl ExecutionPath {
    pub fn returning(constraints: Vec<Constraint>, expr: &str) -> Self {
        Self {
            constraints,
            return_expr: Some(squash_whitespace(expr)),
            kind: PathKind::Returning,
        }
    }

    pub fn implicit_none(constraints: Vec<Constraint>) -> Self {
        Self {
            constraints,
            return_expr: Some(String::from("None")),
            kind: PathKind::ImplicitNone,
        }
    }

    pub fn raising(constraints: Vec<Constraint>, exception: &str) -> Self {
        Self {
            constraints,
            return_expr: Some(alloc::format!("raises: {}", squash_whitespace(exception))),
            kind: PathKind::Raising,
        }
    }

    /// The raised expression for `Raising` paths.
    pub fn exception(&self) -> Option<&str> {
        match self.kind {
            PathKind::Raising => self
                .return_expr
                .as_deref()
                .map(|e| e.strip_prefix("raises: ").unwrap_or(e)),
            _ => None,
        }
    }

    /// The constraints joined with `and`, or `None` when unconstrained.
    pub fn condition(&self) -> Option<String> {
        if self.constraints.is_empty() {
            return None;
        }
        let parts: Vec<String> = self.constraints.iter().map(Constraint::render).collect();
        Some(parts.join(" and "))
    }
}

impl Constrained for ExecutionPath {
    fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }
}

/// Constraints of a path that has not terminated yet.
pub type ActivePath = Vec<Constraint>;

/// The two lists maintained during traversal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathSet {
    pub active: Vec<ActivePath>,
    pub terminal: Vec<ExecutionPath>,
}

/// A construct the traversal walks through without extracting constraints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsupportedConstruct {
    pub construct: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Upper bound on minimized terminal paths reported per method.
    pub max_paths: usize,
    /// Turn `raise` statements into terminal `Raising` paths.
    pub raise_paths: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            max_paths: 16,
            raise_paths: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathAnalysis {
    /// Terminal paths in collection order, before the final minimization pass.
    pub collected: Vec<ExecutionPath>,
    /// Minimized terminal paths, capped at `max_paths`.
    pub paths: Vec<ExecutionPath>,
    /// Whether the cap removed any minimized path.
    pub truncated: bool,
    pub unsupported: Vec<UnsupportedConstruct>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("focal method `{0}` contains syntax errors")]
    SyntaxErrors(String),
}

/// Collects minimized terminal paths for `focal`.
pub fn collect_path_constraints(
    tree: &SyntaxTree,
    focal: &FocalMethod,
    options: &AnalysisOptions,
) -> Result<PathAnalysis, AnalysisError> {
    if focal.has_syntax_errors {
        return Err(AnalysisError::SyntaxErrors(focal.qualified_name.clone()));
    }
    let mut walker = Walker {
        options,
        terminal: Vec::new(),
        unsupported: Vec::new(),
    };
    let body = tree.node(focal.body_root);
    let remaining = walker.visit(body, alloc::vec![Vec::new()]);
    walker
        .terminal
        .extend(remaining.into_iter().map(ExecutionPath::implicit_none));

    let mut paths = minimize_paths(&walker.terminal);
    let cap = options.max_paths.max(1);
    let truncated = paths.len() > cap;
    paths.truncate(cap);
    Ok(PathAnalysis {
        collected: walker.terminal,
        paths,
        truncated,
        unsupported: walker.unsupported,
    })
}

struct Walker<'o> {
    options: &'o AnalysisOptions,
    terminal: Vec<ExecutionPath>,
    unsupported: Vec<UnsupportedConstruct>,
}

/// Statement kinds walked as opaque blocks.
const OPAQUE_STATEMENTS: &[&str] = &[
    "try_statement",
    "match_statement",
    "with_statement",
    "break_statement",
    "continue_statement",
];

/// Expression kinds that hide control flow we do not split on.
const OPAQUE_EXPRESSIONS: &[&str] = &["boolean_operator", "conditional_expression", "if_clause"];

/// Nested scopes whose statements do not belong to the focal method's paths.
const NESTED_SCOPES: &[&str] = &[
    "function_definition",
    "class_definition",
    "decorated_definition",
    "lambda",
];

impl Walker<'_> {
    fn note(&mut self, node: Node<'_>) {
        self.unsupported.push(UnsupportedConstruct {
            construct: node.kind().to_string(),
            line: node.start_line(),
        });
    }

    fn note_expression(&mut self, expr: Node<'_>) {
        for n in expr.descendants() {
            if OPAQUE_EXPRESSIONS.contains(&n.kind()) {
                self.note(n);
            }
        }
    }

    fn visit(&mut self, node: Node<'_>, active: Vec<ActivePath>) -> Vec<ActivePath> {
        if active.is_empty() {
            return active;
        }
        match node.kind() {
            "if_statement" => self.visit_if(node, active),
            "while_statement" => match node.child_by_field("condition") {
                Some(cond) => {
                    self.note_expression(cond);
                    self.visit_loop(node, Constraint::new(cond.text()), active)
                }
                None => self.visit_children(node, active),
            },
            "for_statement" => {
                let iterable = node.child_by_field("right").map(|r| {
                    self.note_expression(r);
                    alloc::format!("loop over {} executes", r.text())
                });
                self.visit_loop(node, iterable.as_deref().and_then(Constraint::new), active)
            }
            "return_statement" => {
                let value = node.named_children().find(|c| c.kind() != "comment");
                if let Some(v) = value {
                    self.note_expression(v);
                }
                for path in active {
                    self.terminal.push(match value {
                        Some(v) => ExecutionPath::returning(path, v.text()),
                        None => ExecutionPath::implicit_none(path),
                    });
                }
                Vec::new()
            }
            "raise_statement" if self.options.raise_paths => {
                let exception = match node.named_children().find(|c| c.kind() != "comment") {
                    Some(first) => &node.tree().source()[first.span().start..node.span().end],
                    None => "(re-raise)",
                };
                for path in active {
                    self.terminal.push(ExecutionPath::raising(path, exception));
                }
                Vec::new()
            }
            kind if NESTED_SCOPES.contains(&kind) => {
                self.note(node);
                active
            }
            kind => {
                if OPAQUE_STATEMENTS.contains(&kind) || OPAQUE_EXPRESSIONS.contains(&kind) {
                    self.note(node);
                }
                self.visit_children(node, active)
            }
        }
    }

    fn visit_children(&mut self, node: Node<'_>, mut active: Vec<ActivePath>) -> Vec<ActivePath> {
        for child in node.children() {
            active = self.visit(child, active);
        }
        active
    }

    fn visit_block(&mut self, block: Option<Node<'_>>, active: Vec<ActivePath>) -> Vec<ActivePath> {
        match block {
            Some(b) => self.visit(b, active),
            None => active,
        }
    }

    fn visit_if(&mut self, node: Node<'_>, incoming: Vec<ActivePath>) -> Vec<ActivePath> {
        let Some(cond_node) = node.child_by_field("condition") else {
            return self.visit_children(node, incoming);
        };
        self.note_expression(cond_node);
        let cond = Constraint::new(cond_node.text());
        let mut negations: Vec<Constraint> = Vec::new();

        let mut results = self.visit_block(
            node.child_by_field("consequence"),
            extend_all(&incoming, cond.iter().cloned()),
        );
        negations.extend(cond.as_ref().map(Constraint::negate));

        let mut has_else = false;
        for clause in node.children_by_field("alternative") {
            match clause.kind() {
                "elif_clause" => {
                    let elif = clause.child_by_field("condition");
                    if let Some(e) = elif {
                        self.note_expression(e);
                    }
                    let elif = elif.and_then(|e| Constraint::new(e.text()));
                    let paths = extend_all(&incoming, negations.iter().cloned().chain(elif.iter().cloned()));
                    results.extend(self.visit_block(clause.child_by_field("consequence"), paths));
                    negations.extend(elif.as_ref().map(Constraint::negate));
                }
                "else_clause" => {
                    has_else = true;
                    let paths = extend_all(&incoming, negations.iter().cloned());
                    results.extend(self.visit_block(clause.child_by_field("body"), paths));
                }
                _ => {}
            }
        }
        if !has_else {
            results.extend(extend_all(&incoming, negations.iter().cloned()));
        }
        minimize_paths(&results)
    }

    /// `while`/`for`: one family where the body runs at least once, one where it is skipped.
    fn visit_loop(&mut self, node: Node<'_>, cond: Option<Constraint>, incoming: Vec<ActivePath>) -> Vec<ActivePath> {
        let mut results = self.visit_block(node.child_by_field("body"), extend_all(&incoming, cond.iter().cloned()));
        results.extend(extend_all(&incoming, cond.iter().map(Constraint::negate)));
        if let Some(else_clause) = node.child_by_field("alternative") {
            results = self.visit_block(else_clause.child_by_field("body"), results);
        }
        minimize_paths(&results)
    }
}

/// Appends constraints to every path. Duplicates are skipped and a path that
/// would hold a constraint together with its negation is dropped.
fn extend_all<I>(paths: &[ActivePath], extra: I) -> Vec<ActivePath>
where
    I: Iterator<Item = Constraint> + Clone,
{
    paths
        .iter()
        .filter_map(|path| {
            let mut path = path.clone();
            for c in extra.clone() {
                if path.contains(&c) {
                    continue;
                }
                if path.contains(&c.negate()) {
                    return None;
                }
                path.push(c);
            }
            Some(path)
        })
        .collect()
}
