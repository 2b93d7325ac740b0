//! Pass@1, FM Call@1, Correct@1 and focal-method coverage.
//!
//! Each generated suite is scored on its own: the three rates are fractions
//! of the suite's tests, and coverage is the share of the focal method's
//! executable lines (or branch arms) hit by any test or by loading the module.
//! Suite scores are averaged over samples per focal method, then over focal
//! methods per strategy.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::exec::{BranchArm, ExecutionResult};
use crate::generate::Strategy;
use crate::prompt::TEMPLATE_VERSION;

/// Execution outcome of one generated suite.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub focal: String,
    pub strategy: Strategy,
    pub sample: usize,
    pub result: ExecutionResult,
}

impl SuiteOutcome {
    /// At least one test passed and called the focal method.
    pub fn has_correct_test(&self) -> bool {
        self.result.tests.iter().any(|t| t.is_correct())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub pass_at_1: f64,
    pub fm_call_at_1: f64,
    pub correct_at_1: f64,
    pub line_cov: f64,
    pub branch_cov: f64,
}

impl Rates {
    fn mean<'a>(items: impl IntoIterator<Item = &'a Rates>) -> Rates {
        let mut sum = Rates::default();
        let mut n = 0usize;
        for r in items {
            sum.pass_at_1 += r.pass_at_1;
            sum.fm_call_at_1 += r.fm_call_at_1;
            sum.correct_at_1 += r.correct_at_1;
            sum.line_cov += r.line_cov;
            sum.branch_cov += r.branch_cov;
            n += 1;
        }
        if n == 0 {
            return sum;
        }
        let n = n as f64;
        Rates {
            pass_at_1: sum.pass_at_1 / n,
            fm_call_at_1: sum.fm_call_at_1 / n,
            correct_at_1: sum.correct_at_1 / n,
            line_cov: sum.line_cov / n,
            branch_cov: sum.branch_cov / n,
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.pass_at_1,
            self.fm_call_at_1,
            self.correct_at_1,
            self.line_cov,
            self.branch_cov,
        ]
    }
}

fn fraction(hit: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

/// Scores one suite. An empty suite gets zero rates and load-only coverage.
pub fn score_suite(result: &ExecutionResult) -> Rates {
    let n = result.tests.len();
    let count = |f: &dyn Fn(&crate::exec::TestResult) -> bool| result.tests.iter().filter(|t| f(t)).count();
    let (pass, call, correct) = if n == 0 {
        (0.0, 0.0, 0.0)
    } else {
        (
            count(&|t| t.passed()) as f64 / n as f64,
            count(&|t| t.called_focal) as f64 / n as f64,
            count(&|t| t.is_correct()) as f64 / n as f64,
        )
    };

    let geometry = &result.focal_geometry;
    let mut lines: BTreeSet<usize> = result.module_load_coverage.covered_lines.clone();
    let mut arms: BTreeSet<BranchArm> = result.module_load_coverage.covered_branches.clone();
    for t in &result.tests {
        lines.extend(t.covered_lines.iter().copied());
        arms.extend(t.covered_branches.iter().copied());
    }
    let line_hits = geometry.executable_lines.intersection(&lines).count();
    let arm_hits = geometry.branch_arms.intersection(&arms).count();

    Rates {
        pass_at_1: pass,
        fm_call_at_1: call,
        correct_at_1: correct,
        line_cov: fraction(line_hits, geometry.executable_lines.len()),
        branch_cov: fraction(arm_hits, geometry.branch_arms.len()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocalMetrics {
    pub focal: String,
    pub samples: usize,
    #[serde(flatten)]
    pub rates: Rates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyMetrics {
    pub strategy: Strategy,
    pub filtered: bool,
    pub label: String,
    pub focal_count: usize,
    pub suite_count: usize,
    pub mean: Rates,
    pub per_focal: Vec<FocalMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub template_version: String,
    pub rows: Vec<StrategyMetrics>,
    pub notes: Vec<String>,
}

/// Drops suites with no test that both passes and calls the focal method.
pub fn filter_suites(suites: &[SuiteOutcome]) -> Vec<SuiteOutcome> {
    suites.iter().filter(|s| s.has_correct_test()).cloned().collect()
}

pub fn strategy_label(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Noop => "No-Op Tests",
        Strategy::Baseline => "Baseline Prompt",
        Strategy::Symprompt => "Path Prompts",
    }
}

fn aggregate(strategy: Strategy, filtered: bool, suites: &[&SuiteOutcome]) -> StrategyMetrics {
    let mut by_focal: BTreeMap<&str, Vec<Rates>> = BTreeMap::new();
    for s in suites {
        by_focal
            .entry(s.focal.as_str())
            .or_default()
            .push(score_suite(&s.result));
    }
    let per_focal: Vec<FocalMetrics> = by_focal
        .into_iter()
        .map(|(focal, scores)| FocalMetrics {
            focal: String::from(focal),
            samples: scores.len(),
            rates: Rates::mean(&scores),
        })
        .collect();
    let mut label = String::from(strategy_label(strategy));
    if filtered {
        label.push_str(" Filtered");
    }
    StrategyMetrics {
        strategy,
        filtered,
        label,
        focal_count: per_focal.len(),
        suite_count: suites.len(),
        mean: Rates::mean(per_focal.iter().map(|f| &f.rates)),
        per_focal,
    }
}

/// Scores every suite and aggregates per strategy. Non-No-Op strategies also
/// get a filtered row computed over suites with at least one correct test.
pub fn compute_metrics(suites: &[SuiteOutcome]) -> MetricsReport {
    let mut rows = Vec::new();
    let mut filtered_rows = Vec::new();
    for strategy in Strategy::ALL {
        let mine: Vec<&SuiteOutcome> = suites.iter().filter(|s| s.strategy == strategy).collect();
        if mine.is_empty() {
            continue;
        }
        rows.push(aggregate(strategy, false, &mine));
        if strategy != Strategy::Noop {
            let kept: Vec<&SuiteOutcome> = mine.iter().copied().filter(|s| s.has_correct_test()).collect();
            filtered_rows.push(aggregate(strategy, true, &kept));
        }
    }
    rows.extend(filtered_rows);
    MetricsReport {
        template_version: String::from(TEMPLATE_VERSION),
        rows,
        notes: alloc::vec![
            String::from("coverage counts every executed test regardless of status, plus module-load coverage"),
            String::from("a focal method with no branch arms has branch coverage 1.0"),
        ],
    }
}

/// Fixed-width table: one row per strategy, one column per metric.
pub fn render_table(report: &MetricsReport) -> String {
    let headers = ["Pass@1", "FM Call@1", "Correct@1", "Line Cov.", "Branch Cov."];
    let width = report
        .rows
        .iter()
        .map(|r| r.label.len())
        .chain(core::iter::once("Method".len()))
        .max()
        .unwrap_or(6);
    let mut out = alloc::format!("{:<width$}", "Method");
    for h in headers {
        out.push_str(&alloc::format!("  {h:>11}"));
    }
    out.push('\n');
    for row in &report.rows {
        out.push_str(&alloc::format!("{:<width$}", row.label));
        for v in row.mean.values() {
            out.push_str(&alloc::format!("  {v:>11.2}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{Coverage, FocalGeometry, TestResult, TestStatus, PROTOCOL_VERSION};
    use alloc::vec;
    use proptest::prelude::{any, prop, prop_assert, prop_oneof, proptest, Just};
    use proptest::strategy::Strategy as Gen;

    fn test(status: TestStatus, called: bool, lines: &[usize]) -> TestResult {
        TestResult {
            test_name: String::from("t"),
            status,
            called_focal: called,
            covered_lines: lines.iter().copied().collect(),
            covered_branches: BTreeSet::new(),
        }
    }

    fn result(tests: Vec<TestResult>) -> ExecutionResult {
        ExecutionResult {
            protocol_version: PROTOCOL_VERSION,
            tests,
            module_load_coverage: Coverage {
                covered_lines: [1usize].into_iter().collect(),
                covered_branches: BTreeSet::new(),
            },
            focal_geometry: FocalGeometry {
                executable_lines: (1..=4).collect(),
                branch_arms: [(2, 3), (2, 4)].into_iter().collect(),
            },
        }
    }

    fn outcome(focal: &str, strategy: Strategy, sample: usize, r: ExecutionResult) -> SuiteOutcome {
        SuiteOutcome {
            focal: focal.into(),
            strategy,
            sample,
            result: r,
        }
    }

    #[test]
    fn rates_follow_the_definitions() {
        use TestStatus::*;
        let r = result(vec![
            test(Pass, true, &[2]),
            test(Pass, true, &[2, 3]),
            test(Fail, true, &[2]),
            test(Error, false, &[]),
        ]);
        let s = score_suite(&r);
        assert_eq!((s.pass_at_1, s.fm_call_at_1, s.correct_at_1), (0.5, 0.75, 0.5));
        assert_eq!(s.line_cov, 0.75);
        assert_eq!(s.branch_cov, 0.0);
    }

    #[test]
    fn noop_suite_row() {
        let noop = result(vec![test(TestStatus::Pass, false, &[1])]);
        let report = compute_metrics(&[outcome("m.f", Strategy::Noop, 0, noop)]);
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.label, "No-Op Tests");
        assert_eq!(
            (row.mean.pass_at_1, row.mean.fm_call_at_1, row.mean.correct_at_1),
            (1.0, 0.0, 0.0)
        );
        assert_eq!(row.mean.line_cov, 0.25);
    }

    #[test]
    fn empty_suite_keeps_load_coverage() {
        let s = score_suite(&result(vec![]));
        assert_eq!((s.pass_at_1, s.fm_call_at_1, s.correct_at_1), (0.0, 0.0, 0.0));
        assert_eq!(s.line_cov, 0.25);
    }

    #[test]
    fn identical_samples_average_to_the_common_value() {
        let r = result(vec![
            test(TestStatus::Pass, true, &[2, 3]),
            test(TestStatus::Fail, false, &[]),
        ]);
        let suites: Vec<SuiteOutcome> = (0..10)
            .map(|i| outcome("m.f", Strategy::Baseline, i, r.clone()))
            .collect();
        let report = compute_metrics(&suites);
        assert_eq!(report.rows[0].per_focal[0].samples, 10);
        assert_eq!(report.rows[0].mean, score_suite(&r));
    }

    #[test]
    fn filtering() {
        use TestStatus::*;
        let good = result(vec![test(Pass, true, &[2])]);
        let bad = result(vec![test(Error, false, &[])]);
        let suites = vec![
            outcome("m.f", Strategy::Symprompt, 0, good.clone()),
            outcome("m.f", Strategy::Symprompt, 1, bad.clone()),
            outcome("m.g", Strategy::Symprompt, 0, bad),
        ];
        let kept = filter_suites(&suites);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].sample, 0);

        let report = compute_metrics(&suites);
        let plain = &report.rows[0];
        let filtered = &report.rows[1];
        assert!(filtered.filtered);
        assert_eq!(filtered.label, "Path Prompts Filtered");
        assert_eq!(filtered.focal_count, 1);
        assert_eq!(filtered.mean.correct_at_1, 1.0);
        assert!(filtered.mean.pass_at_1 >= plain.mean.pass_at_1);
        assert!(filtered.mean.correct_at_1 >= plain.mean.correct_at_1);
    }

    #[test]
    fn adding_a_test_never_lowers_coverage() {
        let mut r = result(vec![test(TestStatus::Pass, true, &[2])]);
        let before = score_suite(&r);
        r.tests.push(test(TestStatus::Fail, true, &[3, 4]));
        let after = score_suite(&r);
        assert!(after.line_cov >= before.line_cov);
    }

    #[test]
    fn table_layout() {
        let noop = result(vec![test(TestStatus::Pass, false, &[1])]);
        let table = render_table(&compute_metrics(&[outcome("m.f", Strategy::Noop, 0, noop)]));
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Method"));
        assert!(lines[0].ends_with("Branch Cov."));
        assert!(lines[1].starts_with("No-Op Tests"));
        assert!(lines[1].contains("1.00"));
    }

    fn arb_result() -> impl Gen<Value = ExecutionResult> {
        let status = prop_oneof![
            Just(TestStatus::Pass),
            Just(TestStatus::Fail),
            Just(TestStatus::Error),
            Just(TestStatus::Timeout)
        ];
        let t = (status, any::<bool>(), prop::collection::btree_set(1usize..8, 0..5)).prop_map(|(s, c, lines)| {
            TestResult {
                test_name: String::from("t"),
                status: s,
                called_focal: c,
                covered_lines: lines,
                covered_branches: BTreeSet::new(),
            }
        });
        prop::collection::vec(t, 0..12).prop_map(result)
    }

    proptest! {
        #[test]
        fn bounds_hold(r in arb_result()) {
            let s = score_suite(&r);
            for v in s.values() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(s.correct_at_1 <= s.pass_at_1.min(s.fm_call_at_1));
        }
    }
}
