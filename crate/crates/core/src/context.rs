//! Generation context and execution context.
//!
//! The generation context is made of five parts, rendered in this order:
//!
//! 1. imports and module-level globals of the focal file,
//! 2. classes and functions of the focal file referenced by the focal method,
//! 3. the focal class header, class-level fields and constructor,
//! 4. focal class methods called by the focal method,
//! 5. the focal method itself.
//!
//! Every snippet is copied verbatim from the focal file. The execution context
//! is the preamble placed at the top of a generated test file; it re-imports
//! everything the generation context showed the model so that hallucinated
//! imports in generated tests can be dropped.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::syntax::{class_methods, def_name, definition_of, FocalMethod, Node, SourceParser, SyntaxTree};
use crate::text::split_lines_inclusive;

/// Rough token count of a piece of text.
pub trait TokenEstimator {
    fn estimate(&self, text: &str) -> usize;
}

/// `ceil(chars / chars_per_token)`.
#[derive(Clone, Copy, Debug)]
pub struct CharRatioEstimator {
    pub chars_per_token: usize,
}

impl Default for CharRatioEstimator {
    fn default() -> Self {
        Self { chars_per_token: 4 }
    }
}

impl TokenEstimator for CharRatioEstimator {
    fn estimate(&self, text: &str) -> usize {
        text.chars().count().div_ceil(self.chars_per_token.max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextPart {
    ImportsAndGlobals,
    TypeContext,
    FocalClassType,
    FocalClassMethods,
    FocalMethod,
}

/// A verbatim slice of the focal file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub text: String,
    /// Byte span in the focal file; starts at the beginning of the line.
    pub span: Range<usize>,
    /// 1-based inclusive line range.
    pub lines: (usize, usize),
    /// Name the snippet defines, when it defines exactly one thing.
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub import: bool,
}

impl Snippet {
    fn from_node(node: Node<'_>, name: Option<String>) -> Self {
        Self::from_range(node.tree(), node.span(), name)
    }

    fn from_range(tree: &SyntaxTree, span: Range<usize>, name: Option<String>) -> Self {
        let line_start = tree.line_start(span.start);
        let lead = &tree.source()[line_start..span.start];
        let start = if lead.bytes().all(|b| b == b' ' || b == b'\t') {
            line_start
        } else {
            span.start
        };
        let end_line = tree.line_of(span.end.saturating_sub(1).max(span.start));
        Self {
            text: tree.source()[start..span.end].to_string(),
            span: start..span.end,
            lines: (tree.line_of(start), end_line),
            name,
            import: false,
        }
    }
}

/// Header, fields and constructor of the class enclosing the focal method.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassType {
    pub signature: Snippet,
    pub fields: Vec<Snippet>,
    pub constructor: Option<Snippet>,
}

impl ClassType {
    fn snippets(&self) -> impl Iterator<Item = &Snippet> {
        core::iter::once(&self.signature)
            .chain(self.fields.iter())
            .chain(self.constructor.iter())
    }
}

/// One imported name, `path` being dotted (`os.path`) and `alias` the `as` name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImportedName {
    pub path: String,
    pub alias: Option<String>,
}

/// A parsed `import` / `from ... import` statement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportStatement {
    /// `(level, module)` for `from` imports; level counts leading dots.
    pub from: Option<(usize, String)>,
    pub names: Vec<ImportedName>,
    pub wildcard: bool,
}

impl ImportStatement {
    pub fn from_node(node: Node<'_>) -> Option<Self> {
        let names = |n: Node<'_>| -> Vec<ImportedName> {
            n.children_by_field("name")
                .filter_map(|c| match c.kind() {
                    "aliased_import" => Some(ImportedName {
                        path: c.child_by_field("name")?.text().to_string(),
                        alias: c.child_by_field("alias").map(|a| a.text().to_string()),
                    }),
                    _ => Some(ImportedName {
                        path: c.text().to_string(),
                        alias: None,
                    }),
                })
                .collect()
        };
        match node.kind() {
            "import_statement" => Some(Self {
                from: None,
                names: names(node),
                wildcard: false,
            }),
            "future_import_statement" => Some(Self {
                from: Some((0, String::from("__future__"))),
                names: names(node),
                wildcard: false,
            }),
            "import_from_statement" => {
                let module = node.child_by_field("module_name")?;
                let (level, path) = if module.kind() == "relative_import" {
                    let prefix = module
                        .children()
                        .find(|c| c.kind() == "import_prefix")
                        .map(|p| p.text().chars().filter(|c| *c == '.').count())
                        .unwrap_or(0);
                    let rest = module
                        .children()
                        .find(|c| c.kind() == "dotted_name")
                        .map(|d| d.text().to_string())
                        .unwrap_or_default();
                    (prefix, rest)
                } else {
                    (0, module.text().to_string())
                };
                Some(Self {
                    from: Some((level, path)),
                    names: names(node),
                    wildcard: node.children().any(|c| c.kind() == "wildcard_import"),
                })
            }
            _ => None,
        }
    }

    /// Names this statement binds in the importing namespace.
    pub fn bound_names(&self) -> Vec<String> {
        self.names
            .iter()
            .map(|n| match (&n.alias, &self.from) {
                (Some(alias), _) => alias.clone(),
                (None, Some(_)) => n.path.clone(),
                (None, None) => n.path.split('.').next().unwrap_or_default().to_string(),
            })
            .collect()
    }

    /// One normalized statement per imported name. Relative imports are
    /// resolved against `module` (the dotted path of the importing module).
    pub fn normalized_lines(&self, module: &str) -> Vec<String> {
        let render = |n: &ImportedName| match &n.alias {
            Some(a) => alloc::format!("{} as {a}", n.path),
            None => n.path.clone(),
        };
        match &self.from {
            None => self
                .names
                .iter()
                .map(|n| alloc::format!("import {}", render(n)))
                .collect(),
            Some((level, path)) => {
                let source = resolve_relative(module, *level, path);
                if self.wildcard {
                    return alloc::vec![alloc::format!("from {source} import *")];
                }
                self.names
                    .iter()
                    .map(|n| alloc::format!("from {source} import {}", render(n)))
                    .collect()
            }
        }
    }
}

fn resolve_relative(module: &str, level: usize, path: &str) -> String {
    let dots = || ".".repeat(level).chars().chain(path.chars()).collect::<String>();
    if level == 0 {
        return path.to_string();
    }
    let parts: Vec<&str> = if module.is_empty() {
        Vec::new()
    } else {
        module.split('.').collect()
    };
    // `from . import x` inside `a.b` refers to package `a`.
    if level > parts.len() {
        return dots();
    }
    let mut base: Vec<&str> = parts[..parts.len() - level].to_vec();
    if !path.is_empty() {
        base.push(path);
    }
    if base.is_empty() {
        return dots();
    }
    base.join(".")
}

/// The five-part generation context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocalContext {
    pub module: String,
    pub imports_and_globals: Vec<Snippet>,
    pub type_context: Vec<Snippet>,
    pub focal_class_type: Option<ClassType>,
    pub focal_class_methods: Vec<Snippet>,
    pub focal_method_def: Snippet,
    /// Import statements among `imports_and_globals`, parsed.
    pub imports: Vec<ImportStatement>,
    /// Module-level names the context shows (globals, referenced definitions,
    /// the focal class or function).
    pub defined_names: Vec<String>,
    /// Names of snippets removed to fit the token budget, in drop order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
}

impl FocalContext {
    /// Snippets in rendering order with their part labels.
    pub fn snippets(&self) -> impl Iterator<Item = (ContextPart, &Snippet)> {
        self.imports_and_globals
            .iter()
            .map(|s| (ContextPart::ImportsAndGlobals, s))
            .chain(self.type_context.iter().map(|s| (ContextPart::TypeContext, s)))
            .chain(
                self.focal_class_type
                    .iter()
                    .flat_map(ClassType::snippets)
                    .map(|s| (ContextPart::FocalClassType, s)),
            )
            .chain(
                self.focal_class_methods
                    .iter()
                    .map(|s| (ContextPart::FocalClassMethods, s)),
            )
            .chain(core::iter::once((ContextPart::FocalMethod, &self.focal_method_def)))
    }

    /// Parts 1 to 5 as source text. Imports and globals are separated by single
    /// newlines, everything else by a blank line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut previous: Option<ContextPart> = None;
        for (part, snippet) in self.snippets() {
            if let Some(prev) = previous {
                let tight = prev == part && part == ContextPart::ImportsAndGlobals;
                out.push_str(if tight { "\n" } else { "\n\n" });
            }
            out.push_str(snippet.text.trim_end());
            previous = Some(part);
        }
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("focal method alone needs {needed} tokens, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
}

fn is_docstring(node: Node<'_>) -> bool {
    node.kind() == "expression_statement"
        && node.named_children().count() == 1
        && node.named_children().all(|c| c.kind() == "string")
}

fn is_main_guard(node: Node<'_>) -> bool {
    node.kind() == "if_statement"
        && node
            .child_by_field("condition")
            .is_some_and(|c| c.text().contains("__name__") && c.text().contains("__main__"))
}

/// Identifiers bound by a module- or class-level assignment statement.
fn assigned_names(stmt: Node<'_>) -> Vec<String> {
    let mut out = Vec::new();
    if stmt.kind() != "expression_statement" {
        return out;
    }
    for assign in stmt.named_children().filter(|c| c.kind() == "assignment") {
        let mut target = assign.child_by_field("left");
        // Chained `a = b = 1` nests assignments on the right.
        let mut right = assign.child_by_field("right");
        while let Some(t) = target {
            collect_target_names(t, &mut out);
            target = right.filter(|r| r.kind() == "assignment").and_then(|r| {
                let next = r.child_by_field("left");
                right = r.child_by_field("right");
                next
            });
        }
    }
    out
}

fn collect_target_names(target: Node<'_>, out: &mut Vec<String>) {
    match target.kind() {
        "identifier" => out.push(target.text().to_string()),
        "pattern_list" | "tuple_pattern" | "list_pattern" => {
            for c in target.named_children() {
                collect_target_names(c, out);
            }
        }
        _ => {}
    }
}

fn is_dunder(name: &str) -> bool {
    name.len() > 4 && name.starts_with("__") && name.ends_with("__")
}

fn method_named<'a>(class: Node<'a>, name: &str) -> Option<Node<'a>> {
    class_methods(class).find(|m| def_name(*m) == Some(name))
}

/// Names of methods called as `self.x(...)`, `cls.x(...)` or `Class.x(...)`.
fn called_methods(focal: Node<'_>, class_name: &str) -> BTreeSet<String> {
    focal
        .descendants()
        .filter(|n| n.kind() == "call")
        .filter_map(|call| call.child_by_field("function"))
        .filter(|f| f.kind() == "attribute")
        .filter_map(|attr| {
            let object = attr.child_by_field("object")?;
            let receiver = object.text();
            (object.kind() == "identifier" && (receiver == "self" || receiver == "cls" || receiver == class_name))
                .then(|| attr.child_by_field("attribute").map(|a| a.text().to_string()))
                .flatten()
        })
        .collect()
}

/// Builds the generation context for `focal`, dropping optional snippets
/// until the rendered context fits `budget` tokens.
pub fn build_generation_context(
    tree: &SyntaxTree,
    focal: &FocalMethod,
    budget: usize,
    estimator: &dyn TokenEstimator,
) -> Result<FocalContext, ContextError> {
    let focal_node = tree.node(focal.definition);
    let focal_method_def = Snippet::from_node(focal_node, Some(focal.name.clone()));
    let needed = estimator.estimate(&focal_method_def.text);
    if needed > budget {
        return Err(ContextError::BudgetExceeded { needed, budget });
    }

    let referenced: BTreeSet<&str> = focal_node
        .descendants()
        .filter(|n| n.kind() == "identifier")
        .map(|n| n.text())
        .collect();

    let mut imports_and_globals = Vec::new();
    let mut imports = Vec::new();
    let mut type_context = Vec::new();
    let mut focal_class = None;
    let mut defined_names: Vec<String> = Vec::new();

    for stmt in tree.root().named_children() {
        let def = definition_of(stmt);
        match def.kind() {
            "comment" => {}
            "function_definition" | "class_definition" => {
                let Some(name) = def_name(def) else { continue };
                if focal.enclosing_class.as_deref() == Some(name) && def.kind() == "class_definition" {
                    focal_class = Some(stmt);
                    continue;
                }
                if stmt.id() == focal.definition || !referenced.contains(name) || name == focal.name {
                    continue;
                }
                type_context.push(Snippet::from_node(stmt, Some(name.to_string())));
                defined_names.push(name.to_string());
            }
            "import_statement" | "import_from_statement" | "future_import_statement" => {
                let mut snippet = Snippet::from_node(stmt, None);
                snippet.import = true;
                imports_and_globals.push(snippet);
                imports.extend(ImportStatement::from_node(stmt));
            }
            _ if is_docstring(stmt) || is_main_guard(stmt) => {}
            _ => {
                let names = assigned_names(stmt);
                let name = (names.len() == 1).then(|| names[0].clone());
                defined_names.extend(names.into_iter().filter(|n| !is_dunder(n)));
                imports_and_globals.push(Snippet::from_node(stmt, name));
            }
        }
    }

    let mut focal_class_methods = Vec::new();
    let focal_class_type = match (focal.enclosing_class.as_deref(), focal_class) {
        (Some(class_name), Some(class_stmt)) => {
            let class_def = definition_of(class_stmt);
            let header_end = class_def
                .children()
                .take_while(|c| c.field() != Some("body"))
                .filter(|c| c.kind() == ":")
                .last()
                .map_or(class_def.span().start, |c| c.span().end);
            let signature =
                Snippet::from_range(tree, class_stmt.span().start..header_end, Some(class_name.to_string()));
            let fields = class_def
                .child_by_field("body")
                .into_iter()
                .flat_map(|b| b.named_children())
                .filter(|s| !assigned_names(*s).is_empty())
                .map(|s| Snippet::from_node(s, None))
                .collect();
            let constructor =
                method_named(class_stmt, "__init__").map(|m| Snippet::from_node(m, Some("__init__".into())));

            let called = called_methods(focal_node, class_name);
            for method in class_methods(class_stmt) {
                let Some(name) = def_name(method) else { continue };
                if method.id() == focal.definition || name == "__init__" || !called.contains(name) {
                    continue;
                }
                focal_class_methods.push(Snippet::from_node(method, Some(name.to_string())));
            }
            defined_names.push(class_name.to_string());
            Some(ClassType {
                signature,
                fields,
                constructor,
            })
        }
        _ => {
            defined_names.push(focal.name.clone());
            None
        }
    };

    let mut ctx = FocalContext {
        module: focal.module.clone(),
        imports_and_globals,
        type_context,
        focal_class_type,
        focal_class_methods,
        focal_method_def,
        imports,
        defined_names,
        dropped: Vec::new(),
    };
    fit_budget(&mut ctx, budget, estimator);
    ctx.defined_names.sort();
    ctx.defined_names.dedup();
    Ok(ctx)
}

/// Drop order: focal class methods (latest first), type context (largest
/// first), then non-import globals (latest first).
fn fit_budget(ctx: &mut FocalContext, budget: usize, estimator: &dyn TokenEstimator) {
    let over = |ctx: &FocalContext| estimator.estimate(&ctx.render()) > budget;
    let label = |s: &Snippet| s.name.clone().unwrap_or_else(|| alloc::format!("line {}", s.lines.0));

    while over(ctx) {
        if let Some(s) = ctx.focal_class_methods.pop() {
            ctx.dropped.push(label(&s));
            continue;
        }
        if !ctx.type_context.is_empty() {
            let (idx, _) = ctx
                .type_context
                .iter()
                .enumerate()
                .max_by_key(|(i, s)| (estimator.estimate(&s.text), *i))
                .expect("non-empty");
            let s = ctx.type_context.remove(idx);
            if let Some(name) = &s.name {
                ctx.defined_names.retain(|n| n != name);
            }
            ctx.dropped.push(label(&s));
            continue;
        }
        if let Some(idx) = ctx.imports_and_globals.iter().rposition(|s| !s.import) {
            let s = ctx.imports_and_globals.remove(idx);
            if let Some(name) = &s.name {
                ctx.defined_names.retain(|n| n != name);
            }
            ctx.dropped.push(label(&s));
            continue;
        }
        break;
    }
}

/// The preamble of a generated test file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionContext {
    pub preamble: String,
    /// Normalized imports: one name per statement, deduplicated and sorted
    /// (`__future__` imports first).
    pub import_lines: Vec<String>,
    /// Every name the preamble binds.
    pub bound_names: BTreeSet<String>,
}

pub fn build_execution_context(ctx: &FocalContext) -> ExecutionContext {
    let mut lines: BTreeSet<(bool, String)> = BTreeSet::new();
    let mut bound_names = BTreeSet::new();
    for import in &ctx.imports {
        let future = matches!(&import.from, Some((0, m)) if m == "__future__");
        for line in import.normalized_lines(&ctx.module) {
            lines.insert((!future, line));
        }
        bound_names.extend(import.bound_names());
    }
    let import_lines: Vec<String> = lines.into_iter().map(|(_, l)| l).collect();

    let mut preamble = String::new();
    for line in &import_lines {
        preamble.push_str(line);
        preamble.push('\n');
    }
    if !ctx.module.is_empty() {
        for name in &ctx.defined_names {
            preamble.push_str(&alloc::format!("from {} import {name}\n", ctx.module));
            bound_names.insert(name.clone());
        }
    }
    ExecutionContext {
        preamble,
        import_lines,
        bound_names,
    }
}

/// Deletes generated import statements whose bound names the execution
/// context already binds.
///
/// Only statements that sit alone on their lines and have a sibling statement
/// in their block are removed. If the result would not parse, the input is
/// returned unchanged.
pub fn strip_duplicate_imports(test_code: &str, exec_ctx: &ExecutionContext, parser: &dyn SourceParser) -> String {
    let tree = parser.parse(test_code);
    let source = tree.source();
    let mut doomed: BTreeSet<usize> = BTreeSet::new();

    for node in tree.preorder() {
        let Some(import) = ImportStatement::from_node(node) else {
            continue;
        };
        let bound = import.bound_names();
        if import.wildcard || bound.is_empty() || !bound.iter().all(|n| exec_ctx.bound_names.contains(n)) {
            continue;
        }
        let span = node.span();
        let before = &source[tree.line_start(span.start)..span.start];
        let line_end = source[span.end..].find('\n').map_or(source.len(), |i| span.end + i);
        let after = source[span.end..line_end].trim_start();
        if !before.trim().is_empty() || !(after.is_empty() || after.starts_with('#')) {
            continue;
        }
        let has_sibling = match node.parent() {
            None => true,
            Some(p) if p.kind() == "module" => true,
            Some(p) => p
                .named_children()
                .any(|s| s != node && s.kind() != "comment" && !covers(&doomed, s.start_line(), s.end_line())),
        };
        if !has_sibling {
            continue;
        }
        doomed.extend(node.start_line()..=node.end_line());
    }
    if doomed.is_empty() {
        return test_code.to_string();
    }
    let kept: String = split_lines_inclusive(test_code)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !doomed.contains(&(i + 1)))
        .map(|(_, l)| l)
        .collect();
    if parser.check_parses(test_code) && !parser.check_parses(&kept) {
        return test_code.to_string();
    }
    kept
}

fn covers(lines: &BTreeSet<usize>, start: usize, end: usize) -> bool {
    (start..=end).all(|l| lines.contains(&l))
}
