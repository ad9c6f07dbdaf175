//! Algebraic laws of interval sets against a point-set model.

use std::collections::BTreeSet;

use dfi_core::interval::{merge, set_subsumes, set_subsumes_pairwise, Interval, IntervalSet};
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = Interval> {
    (0u32..200, 1u32..30).prop_map(|(s, len)| Interval::new(s, s + len))
}

fn set() -> impl Strategy<Value = IntervalSet> {
    prop::collection::vec(interval(), 0..6).prop_map(IntervalSet::from_intervals)
}

fn points(s: &IntervalSet) -> BTreeSet<u32> {
    s.iter().flat_map(|i| i.s..=i.e).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn merge_is_commutative(a in set(), b in set()) {
        prop_assert_eq!(merge(&a, &b), merge(&b, &a));
    }

    #[test]
    fn merge_is_associative(a in set(), b in set(), c in set()) {
        prop_assert_eq!(merge(&merge(&a, &b), &c), merge(&a, &merge(&b, &c)));
    }

    #[test]
    fn merge_is_idempotent(a in set(), b in set()) {
        prop_assert_eq!(merge(&a, &a), a.clone());
        let ab = merge(&a, &b);
        prop_assert_eq!(merge(&ab, &b), ab);
    }

    #[test]
    fn merge_is_point_union_in_canonical_form(a in set(), b in set()) {
        let m = merge(&a, &b);
        prop_assert!(m.is_canonical(), "{}", m);
        let expected: BTreeSet<u32> = points(&a).union(&points(&b)).copied().collect();
        prop_assert_eq!(points(&m), expected);
    }

    #[test]
    fn merge_in_reports_growth(a in set(), b in set()) {
        let mut x = a.clone();
        let grew = x.merge_in(&b);
        prop_assert_eq!(&x, &merge(&a, &b));
        prop_assert_eq!(grew, x != a);
    }

    #[test]
    fn subsumption_agrees_with_pairwise(a in set(), b in set()) {
        prop_assert_eq!(set_subsumes(&a, &b), set_subsumes_pairwise(&a, &b));
    }

    #[test]
    fn single_interval_subsumption(a in interval(), b in interval()) {
        let got = set_subsumes(&IntervalSet::single(a), &IntervalSet::single(b));
        prop_assert_eq!(got, a.s <= b.s && a.e >= b.e);
    }
}
