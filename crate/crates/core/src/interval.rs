//! Timestamp intervals and canonical interval sets.
//!
//! An [`IntervalSet`] is kept as maximal runs of integer points sorted by
//! start, with consecutive runs separated by at least one missing point
//! (`e_i < s_j - 1`). Merging is point-set union followed by coalescing.

use std::fmt;

use serde::Serialize;
use smallvec::SmallVec;

/// Closed timestamp range `<s, e>` with `e > s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Interval {
    pub s: u32,
    pub e: u32,
}

impl Interval {
    pub fn new(s: u32, e: u32) -> Self {
        debug_assert!(e > s, "interval <{s},{e}> is empty");
        Interval { s, e }
    }

    /// `self` contains `other`.
    #[inline]
    pub fn subsumes(self, other: Interval) -> bool {
        self.s <= other.s && self.e >= other.e
    }

    /// Shares no timestamp with `other`.
    #[inline]
    pub fn disjoint(self, other: Interval) -> bool {
        self.e < other.s || other.e < self.s
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.s, self.e)
    }
}

/// `a` contains `b`.
pub fn subsumes(a: Interval, b: Interval) -> bool {
    a.subsumes(b)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntervalSet {
    runs: SmallVec<[Interval; 2]>,
}

impl Serialize for IntervalSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.runs.iter().map(|i| [i.s, i.e]))
    }
}

impl IntervalSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(i: Interval) -> Self {
        let mut runs = SmallVec::new();
        runs.push(i);
        IntervalSet { runs }
    }

    /// Normalizes arbitrary intervals into canonical form.
    pub fn from_intervals(items: impl IntoIterator<Item = Interval>) -> Self {
        let mut v: SmallVec<[Interval; 2]> = items.into_iter().collect();
        v.sort_unstable();
        let mut runs: SmallVec<[Interval; 2]> = SmallVec::with_capacity(v.len());
        for i in v {
            push_run(&mut runs, i);
        }
        IntervalSet { runs }
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = Interval> + '_ {
        self.runs.iter().copied()
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.runs
    }

    /// Whether the runs satisfy the ordering and separation invariant.
    pub fn is_canonical(&self) -> bool {
        self.runs.iter().all(|i| i.e > i.s)
            && self.runs.windows(2).all(|w| w[0].e + 1 < w[1].s)
    }

    /// Point-set union; runs that touch or overlap are fused.
    pub fn merge(&self, other: &IntervalSet) -> IntervalSet {
        let mut runs: SmallVec<[Interval; 2]> =
            SmallVec::with_capacity(self.runs.len() + other.runs.len());
        let (mut i, mut j) = (0, 0);
        while i < self.runs.len() || j < other.runs.len() {
            let take_left = j >= other.runs.len()
                || (i < self.runs.len() && self.runs[i].s <= other.runs[j].s);
            let next = if take_left {
                i += 1;
                self.runs[i - 1]
            } else {
                j += 1;
                other.runs[j - 1]
            };
            push_run(&mut runs, next);
        }
        IntervalSet { runs }
    }

    /// In-place [`IntervalSet::merge`]; returns whether `self` grew.
    pub fn merge_in(&mut self, other: &IntervalSet) -> bool {
        if other.is_empty() || self.covers(other) {
            return false;
        }
        *self = self.merge(other);
        true
    }

    /// Every point of `other` lies in `self`.
    pub fn covers(&self, other: &IntervalSet) -> bool {
        other.runs.iter().all(|b| self.contains_interval(*b))
    }

    /// Some run of `self` contains `b`.
    pub fn contains_interval(&self, b: Interval) -> bool {
        // Runs are disjoint and sorted, so the last run starting at or
        // before `b.s` has the largest end among candidates.
        let idx = self.runs.partition_point(|a| a.s <= b.s);
        idx > 0 && self.runs[idx - 1].e >= b.e
    }

    pub fn contains_point(&self, t: u32) -> bool {
        let idx = self.runs.partition_point(|a| a.s <= t);
        idx > 0 && self.runs[idx - 1].e >= t
    }
}

fn push_run(runs: &mut SmallVec<[Interval; 2]>, next: Interval) {
    if let Some(last) = runs.last_mut() {
        if next.s <= last.e + 1 {
            last.e = last.e.max(next.e);
            return;
        }
    }
    runs.push(next);
}

/// Some interval of `pi` subsumes some interval of `pj`.
pub fn set_subsumes(pi: &IntervalSet, pj: &IntervalSet) -> bool {
    pj.runs.iter().any(|b| pi.contains_interval(*b))
}

/// Quadratic reference for [`set_subsumes`].
pub fn set_subsumes_pairwise(pi: &IntervalSet, pj: &IntervalSet) -> bool {
    pi.runs
        .iter()
        .any(|a| pj.runs.iter().any(|b| a.subsumes(*b)))
}

pub fn merge(pi: &IntervalSet, pj: &IntervalSet) -> IntervalSet {
    pi.merge(pj)
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.runs.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[(u32, u32)]) -> IntervalSet {
        IntervalSet::from_intervals(v.iter().map(|&(s, e)| Interval::new(s, e)))
    }

    #[test]
    fn interval_subsumption() {
        assert!(subsumes(Interval::new(10, 15), Interval::new(11, 12)));
        let (a, b) = (Interval::new(11, 12), Interval::new(13, 14));
        assert!(!subsumes(a, b) && !subsumes(b, a));
        assert!(subsumes(a, a));
    }

    #[test]
    fn set_subsumption() {
        assert!(set_subsumes(&set(&[(0, 7)]), &set(&[(2, 3)])));
        assert!(!set_subsumes(&IntervalSet::new(), &set(&[(2, 3)])));
        assert!(!set_subsumes(&set(&[(0, 7)]), &IntervalSet::new()));
    }

    #[test]
    fn merging() {
        assert_eq!(set(&[(0, 1)]).merge(&set(&[(4, 5)])), set(&[(0, 1), (4, 5)]));
        assert_eq!(set(&[(0, 3)]).merge(&set(&[(1, 2)])), set(&[(0, 3)]));
        assert_eq!(set(&[(0, 2)]).merge(&set(&[(3, 5)])), set(&[(0, 5)]));
        assert_eq!(set(&[(0, 2)]).merge(&set(&[(4, 5)])).len(), 2);
    }

    #[test]
    fn display() {
        assert_eq!(set(&[(9, 12), (0, 7)]).to_string(), "{<0,7>,<9,12>}");
        assert_eq!(IntervalSet::new().to_string(), "{}");
    }

    #[test]
    fn covering_is_pointwise() {
        let a = set(&[(0, 3), (6, 9)]);
        assert!(a.covers(&set(&[(1, 2), (6, 7)])));
        assert!(!a.covers(&set(&[(2, 7)])));
        assert!(a.contains_point(8) && !a.contains_point(5));
    }
}
