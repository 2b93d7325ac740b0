mod common;

use common::fixtures;
use pathprompt::parser::PythonParser;
use pathprompt::pipeline::load_focal;
use pathprompt_core::context::{
    build_execution_context, build_generation_context, strip_duplicate_imports, CharRatioEstimator, ContextError,
    ContextPart, FocalContext,
};
use pathprompt_core::syntax::{locate_focal_method, SourceParser};
use proptest::prelude::*;

fn corpus_context(file: &str, name: &str, budget: usize) -> (String, FocalContext) {
    let corpus = fixtures().join("corpus");
    let (tree, focal) = load_focal(&corpus.join(file), &corpus, name).unwrap();
    let ctx = build_generation_context(&tree, &focal, budget, &CharRatioEstimator::default()).unwrap();
    (tree.source().to_string(), ctx)
}

fn names(snippets: &[pathprompt_core::context::Snippet]) -> Vec<String> {
    snippets.iter().filter_map(|s| s.name.clone()).collect()
}

#[test]
fn is_schema_valid_populates_all_five_parts() {
    let (source, ctx) = corpus_context("schemas/validator.py", "SchemaValidator.is_schema_valid", 4096);
    assert!(ctx
        .imports_and_globals
        .iter()
        .any(|s| s.text == "from .types import normalize_type"));
    assert!(names(&ctx.imports_and_globals).contains(&"SUPPORTED_TYPES".to_string()));
    assert_eq!(names(&ctx.type_context), ["Schema"]);
    let class = ctx.focal_class_type.as_ref().unwrap();
    assert_eq!(class.signature.text, "class SchemaValidator:");
    assert_eq!(class.fields.len(), 1);
    assert!(class
        .constructor
        .as_ref()
        .unwrap()
        .text
        .starts_with("    def __init__("));
    assert_eq!(names(&ctx.focal_class_methods), ["known_type"]);
    assert!(ctx.focal_method_def.text.starts_with("    def is_schema_valid("));
    // Unreferenced definitions stay out.
    assert!(!ctx.render().contains("UnusedHelper"));
    assert!(!ctx.render().contains("def summary"));

    // Verbatim snippets in file order, ending with the focal method.
    let mut last_part = ContextPart::ImportsAndGlobals;
    let mut last_start = 0;
    for (part, snippet) in ctx.snippets() {
        assert_eq!(&source[snippet.span.clone()], snippet.text);
        assert!(part >= last_part);
        if part == last_part && part != ContextPart::TypeContext {
            assert!(snippet.span.start >= last_start, "{part:?} out of order");
        }
        last_part = part;
        last_start = snippet.span.start;
    }
    assert_eq!(last_part, ContextPart::FocalMethod);
}

#[test]
fn exists_as_context_has_path_alias_and_normalize_path() {
    let (_, ctx) = corpus_context("flutils/pathutils.py", "exists_as", 4096);
    assert!(names(&ctx.imports_and_globals).contains(&"_PATH".to_string()));
    assert_eq!(names(&ctx.type_context), ["normalize_path"]);
    assert!(ctx.type_context[0]
        .text
        .starts_with("@functools.singledispatch\ndef normalize_path"));
    assert!(ctx.focal_class_type.is_none());
    assert!(ctx.focal_class_methods.is_empty());
    let rendered = ctx.render();
    assert!(rendered.ends_with("    return ''\n"));
    assert!(!rendered.contains("def get_os_user"));
}

#[test]
fn self_contained_function_has_minimal_context() {
    let (_, ctx) = corpus_context("mathutils.py", "gcd", 4096);
    assert!(ctx.imports_and_globals.is_empty());
    assert!(ctx.type_context.is_empty());
    assert!(ctx.focal_class_type.is_none());
    assert!(ctx.focal_class_methods.is_empty());
    assert!(ctx.focal_method_def.text.starts_with("def gcd("));
}

#[test]
fn budget_drops_optional_parts_in_order() {
    let (_, full) = corpus_context("schemas/validator.py", "SchemaValidator.is_schema_valid", 4096);
    let est = CharRatioEstimator::default();
    use pathprompt_core::context::TokenEstimator;
    let need = est.estimate(&full.render());
    let (_, tight) = corpus_context("schemas/validator.py", "SchemaValidator.is_schema_valid", need - 1);
    assert_eq!(tight.dropped.first().map(String::as_str), Some("known_type"));
    assert!(tight.focal_class_methods.is_empty());
    assert!(!tight.type_context.is_empty());
    assert!(est.estimate(&tight.render()) < need);

    // Focal method alone over budget.
    let corpus = fixtures().join("corpus");
    let (tree, focal) = load_focal(&corpus.join("mathutils.py"), &corpus, "gcd").unwrap();
    assert!(matches!(
        build_generation_context(&tree, &focal, 5, &est),
        Err(ContextError::BudgetExceeded { budget: 5, .. })
    ));
    // At the smallest workable budget only imports and the focal method remain.
    let corpus_ctx = |budget| {
        let (tree, focal) = load_focal(&corpus.join("flutils/pathutils.py"), &corpus, "exists_as").unwrap();
        build_generation_context(&tree, &focal, budget, &est)
    };
    let min = (1..4096).find(|b| corpus_ctx(*b).is_ok()).unwrap();
    let tiny = corpus_ctx(min).unwrap();
    assert!(tiny.type_context.is_empty());
    assert!(tiny.imports_and_globals.iter().any(|s| s.import));
    assert!(tiny.imports_and_globals.iter().all(|s| s.import));
}

#[test]
fn execution_preamble_imports_context_names() {
    let (_, ctx) = corpus_context("schemas/validator.py", "SchemaValidator.is_schema_valid", 4096);
    let exec = build_execution_context(&ctx);
    for line in [
        "from dataclasses import dataclass",
        "from dataclasses import field",
        "from schemas.types import normalize_type",
        "from schemas.validator import Schema",
        "from schemas.validator import SchemaValidator",
        "from schemas.validator import SUPPORTED_TYPES",
    ] {
        assert!(exec.preamble.lines().any(|l| l == line), "missing {line}");
    }
    assert!(PythonParser.check_parses(&exec.preamble));
    for name in ["Schema", "SchemaValidator", "normalize_type", "Dict", "dataclass"] {
        assert!(exec.bound_names.contains(name), "{name}");
    }
}

#[test]
fn aliases_and_duplicates_normalize() {
    let src = "import os\nimport numpy as np\nimport os\nfrom typing import (List,\n    Dict)\n\nclass Foo:\n    pass\n\ndef f(x):\n    return Foo(np.array(x))\n";
    let tree = PythonParser.parse(src);
    let focal = locate_focal_method(&tree, "pkg.m.f").unwrap();
    let ctx = build_generation_context(&tree, &focal, 4096, &CharRatioEstimator::default()).unwrap();
    let exec = build_execution_context(&ctx);
    assert_eq!(
        exec.import_lines,
        [
            "from typing import Dict",
            "from typing import List",
            "import numpy as np",
            "import os"
        ]
    );
    assert!(exec.preamble.contains("from pkg.m import Foo\n"));
    assert!(exec.preamble.contains("from pkg.m import f\n"));
}

fn exec_for(src: &str) -> pathprompt_core::context::ExecutionContext {
    let tree = PythonParser.parse(src);
    let focal = locate_focal_method(&tree, "m.f").unwrap();
    build_execution_context(&build_generation_context(&tree, &focal, 4096, &CharRatioEstimator::default()).unwrap())
}

#[test]
fn duplicate_imports_are_stripped() {
    let exec = exec_for("import os\nfrom mod import a\n\ndef f():\n    return os.sep + a\n");
    let strip = |code: &str| strip_duplicate_imports(code, &exec, &PythonParser);
    assert_eq!(
        strip("def test_f():\n    import os\n    assert f()\n"),
        "def test_f():\n    assert f()\n"
    );
    assert_eq!(
        strip("import os\ndef test_f():\n    assert f()\n"),
        "def test_f():\n    assert f()\n"
    );
    let novel = "def test_f():\n    import json\n    assert f()\n";
    assert_eq!(strip(novel), novel);
    let partial = "def test_f():\n    from mod import a, b\n    assert f()\n";
    assert_eq!(strip(partial), partial);
    let full = "def test_f():\n    from mod import a\n    from m import f\n    assert f()\n";
    assert_eq!(strip(full), "def test_f():\n    assert f()\n");
    // Sole statement of a block stays so the block is not emptied.
    let sole = "def test_f():\n    if True:\n        import os\n    assert f()\n";
    assert_eq!(strip(sole), sole);
    // Shared lines are left alone.
    let shared = "def test_f():\n    import os; x = 1\n    assert f()\n";
    assert_eq!(strip(shared), shared);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stripping_keeps_a_parseable_line_subset(
        picks in prop::collection::vec(0usize..8, 1..8),
        indent_block in any::<bool>(),
    ) {
        let exec = exec_for("import os\nimport sys\nfrom mod import a\n\ndef f():\n    return os.sep + sys.platform + a\n");
        let pool = [
            "import os",
            "import json",
            "from mod import a",
            "from mod import a, b",
            "import sys, os",
            "x = f()",
            "assert x is not None",
            "import os as operating_system",
        ];
        let mut code = String::from("def test_f():\n");
        if indent_block {
            code.push_str("    if True:\n");
        }
        let pad = if indent_block { "        " } else { "    " };
        for p in &picks {
            code.push_str(pad);
            code.push_str(pool[*p]);
            code.push('\n');
        }
        prop_assert!(PythonParser.check_parses(&code));
        let out = strip_duplicate_imports(&code, &exec, &PythonParser);
        prop_assert!(PythonParser.check_parses(&out), "{}", out);
        // Line subset, order preserved.
        let mut remaining = code.lines();
        for line in out.lines() {
            prop_assert!(remaining.any(|l| l == line));
        }
        // Novel imports survive.
        let json_in = code.lines().filter(|l| l.trim() == "import json").count();
        prop_assert_eq!(out.lines().filter(|l| l.trim() == "import json").count(), json_in);
    }
}
