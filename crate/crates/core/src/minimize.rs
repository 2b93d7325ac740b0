//! Constraint-novelty path minimization.
//!
//! Paths are scanned in order and a path is kept only if it carries at least
//! one branch constraint that no previously kept path carries. The kept set
//! therefore covers every constraint of the input while growing at most
//! linearly with the number of distinct constraints.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::paths::Constraint;

/// Anything that owns an ordered list of branch constraints.
pub trait Constrained {
    fn constraints(&self) -> &[Constraint];
}

impl Constrained for Vec<Constraint> {
    fn constraints(&self) -> &[Constraint] {
        self
    }
}

/// Keeps each path that contributes a constraint not yet seen, in input order.
///
/// If no input path carries any constraint at all, the first path is returned
/// on its own so that a branchless method still yields one path.
pub fn minimize_paths<P: Constrained + Clone>(paths: &[P]) -> Vec<P> {
    let mut seen: BTreeSet<&Constraint> = BTreeSet::new();
    let mut kept = Vec::new();
    for path in paths {
        let novel = path.constraints().iter().any(|c| !seen.contains(c));
        if novel {
            seen.extend(path.constraints());
            kept.push(path.clone());
        }
    }
    if kept.is_empty() {
        kept.extend(paths.first().cloned());
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    fn c(name: &str, negated: bool) -> Constraint {
        let base = Constraint::new(name).unwrap();
        if negated {
            base.negate()
        } else {
            base
        }
    }

    /// Full enumeration of k sequential two-way branches, first arm first.
    fn sequential(k: usize) -> Vec<Vec<Constraint>> {
        (0..1usize << k)
            .map(|mask| {
                (0..k)
                    .map(|i| c(&format!("c{i}"), mask >> (k - 1 - i) & 1 == 1))
                    .collect()
            })
            .collect()
    }

    fn union<P: Constrained>(paths: &[P]) -> BTreeSet<Constraint> {
        paths.iter().flat_map(|p| p.constraints().iter().cloned()).collect()
    }

    #[test]
    fn three_sequential_branches_reduce_to_four() {
        let all = sequential(3);
        assert_eq!(all.len(), 8);
        let min = minimize_paths(&all);
        assert_eq!(min.len(), 4);
        assert_eq!(union(&min), union(&all));
    }

    #[test]
    fn k_sequential_branches_reduce_to_k_plus_one() {
        for k in 1..=8 {
            assert_eq!(minimize_paths(&sequential(k)).len(), k + 1, "k = {k}");
        }
    }

    #[test]
    fn single_and_empty_inputs() {
        let one = vec![vec![c("a", false)]];
        assert_eq!(minimize_paths(&one), one);
        let branchless: Vec<Vec<Constraint>> = vec![vec![]];
        assert_eq!(minimize_paths(&branchless), branchless);
        let none: Vec<Vec<Constraint>> = vec![];
        assert!(minimize_paths(&none).is_empty());
    }

    #[test]
    fn order_decides_ties() {
        let a = vec![c("a", false)];
        let ab = vec![c("a", false), c("b", false)];
        assert_eq!(minimize_paths(&[a.clone(), ab.clone()]), vec![a.clone(), ab.clone()]);
        assert_eq!(minimize_paths(&[ab.clone(), a]), vec![ab]);
    }

    fn arb_paths() -> impl Strategy<Value = Vec<Vec<Constraint>>> {
        let constraint = (0usize..10, any::<bool>()).prop_map(|(i, n)| c(&format!("x{i}"), n));
        prop::collection::vec(prop::collection::vec(constraint, 0..6), 0..24)
    }

    proptest! {
        #[test]
        fn preserves_union_and_is_bounded(paths in arb_paths()) {
            let min = minimize_paths(&paths);
            prop_assert_eq!(union(&min), union(&paths));
            let distinct = union(&paths).len();
            if distinct > 0 {
                prop_assert!(min.len() <= distinct);
                prop_assert!(min.len() <= 20);
            }
        }

        #[test]
        fn idempotent_and_subsequence(paths in arb_paths()) {
            let min = minimize_paths(&paths);
            prop_assert_eq!(minimize_paths(&min), min.clone());
            let mut it = paths.iter();
            for kept in &min {
                prop_assert!(it.any(|p| p == kept));
            }
        }

        #[test]
        fn every_kept_path_is_a_witness(paths in arb_paths()) {
            let min = minimize_paths(&paths);
            if union(&paths).is_empty() {
                return Ok(());
            }
            let mut seen = BTreeSet::new();
            for p in &min {
                prop_assert!(p.iter().any(|c| !seen.contains(c)));
                seen.extend(p.iter().cloned());
            }
        }
    }
}
