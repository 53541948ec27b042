//! Alphabetized parallel of timed traces and the state-merge operation.
//!
//! `merge_traces(τ₁, τ₂, X)` returns exactly the set characterized by the
//! projection conditions: a merged trace τ contains no channels outside
//! `Chan(τ₁) ∪ Chan(τ₂)`, projects to τ₁ on `Chan(τ₁)` and to τ₂ on
//! `Chan(τ₂)`, and agrees with both on X. Two consequences worth noting:
//!
//! * a channel common to both traces is forced to synchronize even when it
//!   is not in X (otherwise the projection onto it could not equal both
//!   sides), so the effective sync set is `X ∪ (Chan(τ₁) ∩ Chan(τ₂))`;
//! * an X-channel appearing in only one trace makes the set empty.
//!
//! The trace algebra is defined over timed *communications*; internal τ
//! markers are local bookkeeping and are projected away before merging.

use std::collections::BTreeSet;

use num::BigRational;

use super::state::{ProcState, RunError, TimedItem, TimedTrace};
use crate::syntax::ast::Rational;

/// Comm-only skeleton of a trace.
fn comm_items(tr: &TimedTrace) -> Vec<TimedItem> {
    tr.items()
        .iter()
        .filter(|item| matches!(item, TimedItem::Comm { .. }))
        .cloned()
        .collect()
}

fn item_chan(item: &TimedItem) -> &str {
    item.chan().expect("comm skeleton contains only comms")
}

/// The alphabetized parallel `τ₁ ‖_X τ₂`. Inputs must be time-sorted; the
/// result is a deduplicated, canonically ordered set of merged traces
/// (empty when the traces are incompatible).
pub fn merge_traces(t1: &TimedTrace, t2: &TimedTrace, x: &BTreeSet<String>) -> Vec<TimedTrace> {
    let a = comm_items(t1);
    let b = comm_items(t2);
    let chans_a: BTreeSet<&str> = a.iter().map(item_chan).collect();
    let chans_b: BTreeSet<&str> = b.iter().map(item_chan).collect();

    // Effective synchronization set: X plus every channel both sides use.
    let mut sync: BTreeSet<&str> = x.iter().map(String::as_str).collect();
    sync.extend(chans_a.intersection(&chans_b));

    // Per-channel projections on the sync set must coincide exactly;
    // in particular an X-channel used by only one side yields ∅.
    for ch in &sync {
        if t1.project(ch) != t2.project(ch) {
            return Vec::new();
        }
    }

    let is_sync = |item: &TimedItem| sync.contains(item_chan(item));
    let mut out: BTreeSet<Vec<(u8, String, u64, u64)>> = BTreeSet::new();
    let mut acc: Vec<TimedItem> = Vec::with_capacity(a.len() + b.len());
    interleave(&a, &b, 0, 0, &is_sync, &mut acc, &mut out);

    out.into_iter()
        .map(|keys| {
            TimedTrace(
                keys.into_iter()
                    .map(|(tag, chan, value, time)| {
                        debug_assert_eq!(tag, 0);
                        TimedItem::Comm {
                            chan,
                            value: f64::from_bits(value),
                            time: f64::from_bits(time),
                        }
                    })
                    .collect(),
            )
        })
        .collect()
}

fn interleave(
    a: &[TimedItem],
    b: &[TimedItem],
    i: usize,
    j: usize,
    is_sync: &impl Fn(&TimedItem) -> bool,
    acc: &mut Vec<TimedItem>,
    out: &mut BTreeSet<Vec<(u8, String, u64, u64)>>,
) {
    if i == a.len() && j == b.len() {
        out.insert(acc.iter().map(TimedItem::key).collect());
        return;
    }
    // Emitting a private head is legal while it does not overtake the other
    // side's next event in time (each input is individually sorted).
    if i < a.len() && !is_sync(&a[i]) && (j == b.len() || a[i].time() <= b[j].time()) {
        acc.push(a[i].clone());
        interleave(a, b, i + 1, j, is_sync, acc, out);
        acc.pop();
    }
    if j < b.len() && !is_sync(&b[j]) && (i == a.len() || b[j].time() <= a[i].time()) {
        acc.push(b[j].clone());
        interleave(a, b, i, j + 1, is_sync, acc, out);
        acc.pop();
    }
    // A synchronized event consumes the identical head of both sides at once.
    if i < a.len() && j < b.len() && is_sync(&a[i]) && is_sync(&b[j]) && a[i] == b[j] {
        acc.push(a[i].clone());
        interleave(a, b, i + 1, j + 1, is_sync, acc, out);
        acc.pop();
    }
}

/// Merge the states of two parallel components (the paper's ρ₁ ⊎ ρ₂):
/// disjoint valuations united, clocks equal and preserved, traces merged by
/// the alphabetized parallel over the channels they share, readiness united.
/// The canonical (first in trace order) merge is installed as `tr`.
pub fn merge_states(s1: &ProcState, s2: &ProcState) -> Result<ProcState, RunError> {
    for var in s1.vals.keys() {
        if s2.vals.contains_key(var) {
            return Err(RunError::NotParallelable(format!("shared variable {var}")));
        }
    }
    if s1.now != s2.now {
        return Err(RunError::NotParallelable(format!(
            "clocks disagree: {} vs {}",
            s1.now, s2.now
        )));
    }
    let shared: BTreeSet<String> = s1
        .tr
        .channels()
        .intersection(&s2.tr.channels())
        .cloned()
        .collect();
    let merged = merge_traces(&s1.tr, &s2.tr, &shared);
    let tr = match merged.into_iter().next() {
        Some(tr) => tr,
        None => {
            return Err(RunError::NotParallelable(
                "traces do not merge on their shared channels".into(),
            ))
        }
    };
    let mut vals = s1.vals.clone();
    vals.extend(s2.vals.iter().map(|(k, v)| (k.clone(), *v)));
    let mut rdy = s1.rdy.clone();
    for item in &s2.rdy {
        if !rdy.iter().any(|r| r.match_key() == item.match_key()) {
            rdy.push(item.clone());
        }
    }
    Ok(ProcState {
        vals,
        now: s1.now,
        tr,
        rdy,
    })
}

/// The weighted pick of IntP-2: the unique index `j` with
/// `Σ_{k<j} w_k / Σw ≤ u < Σ_{k≤j} w_k / Σw`, decided in exact rational
/// arithmetic (`u` converts exactly; every binary64 is rational).
pub fn weighted_pick(weights: &[Rational], u: f64) -> usize {
    debug_assert!(!weights.is_empty());
    debug_assert!((0.0..1.0).contains(&u));
    let u = BigRational::from_float(u).expect("u is finite");
    let total: Rational = weights.iter().cloned().sum();
    let mut cum = Rational::new(0.into(), 1.into());
    for (j, w) in weights.iter().enumerate() {
        cum += w;
        if u < &cum / &total {
            return j;
        }
    }
    weights.len() - 1
}

/// Which side a probabilistic choice takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Left,
    Right,
}

/// PCho-1/2: `U(ω) ≤ p` selects the left branch (boundary inclusive),
/// decided exactly.
pub fn pchoice_branch(p: &Rational, u: f64) -> Branch {
    let u = BigRational::from_float(u).unwrap_or_else(|| Rational::new(0.into(), 1.into()));
    if u <= *p {
        Branch::Left
    } else {
        Branch::Right
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::syntax::ast::rat;

    fn trace(items: &[(&str, f64, f64)]) -> TimedTrace {
        let mut tr = TimedTrace::new();
        for (ch, v, t) in items {
            tr.push_comm(ch, *v, *t);
        }
        tr
    }

    fn chans(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_traces_merge_to_empty() {
        let e = TimedTrace::new();
        let merged = merge_traces(&e, &e, &chans(&["a"]));
        assert_eq!(merged, vec![TimedTrace::new()]);
    }

    #[test]
    fn synchronized_identical_heads_merge_once() {
        let t = trace(&[("a", 1.0, 1.0)]);
        let merged = merge_traces(&t, &t, &chans(&["a"]));
        assert_eq!(merged, vec![trace(&[("a", 1.0, 1.0)])]);
    }

    #[test]
    fn value_mismatch_on_sync_channel_is_empty() {
        let t1 = trace(&[("a", 1.0, 1.0)]);
        let t2 = trace(&[("a", 2.0, 1.0)]);
        assert!(merge_traces(&t1, &t2, &chans(&["a"])).is_empty());
    }

    #[test]
    fn shared_channel_outside_x_still_synchronizes() {
        let t1 = trace(&[("a", 1.0, 1.0)]);
        let t2 = trace(&[("a", 1.0, 1.0)]);
        let merged = merge_traces(&t1, &t2, &BTreeSet::new());
        assert_eq!(merged, vec![trace(&[("a", 1.0, 1.0)])]);
        // ... and a mismatch is still fatal.
        let t3 = trace(&[("a", 1.0, 2.0)]);
        assert!(merge_traces(&t1, &t3, &BTreeSet::new()).is_empty());
    }

    #[test]
    fn x_channel_on_one_side_only_is_empty() {
        let t1 = trace(&[("a", 1.0, 1.0)]);
        let t2 = trace(&[("b", 2.0, 1.0)]);
        assert!(merge_traces(&t1, &t2, &chans(&["a"])).is_empty());
    }

    #[test]
    fn private_equal_time_events_interleave_both_ways() {
        let t1 = trace(&[("a", 1.0, 1.0)]);
        let t2 = trace(&[("b", 2.0, 1.0)]);
        let merged = merge_traces(&t1, &t2, &BTreeSet::new());
        assert_eq!(merged.len(), 2);
        let ab = trace(&[("a", 1.0, 1.0), ("b", 2.0, 1.0)]);
        let ba = trace(&[("b", 2.0, 1.0), ("a", 1.0, 1.0)]);
        assert!(merged.contains(&ab) && merged.contains(&ba));
    }

    #[test]
    fn time_order_forces_a_unique_interleaving() {
        let t1 = trace(&[("a", 1.0, 1.0)]);
        let t2 = trace(&[("b", 2.0, 2.0)]);
        let merged = merge_traces(&t1, &t2, &BTreeSet::new());
        assert_eq!(merged, vec![trace(&[("a", 1.0, 1.0), ("b", 2.0, 2.0)])]);
    }

    #[test]
    fn internal_markers_are_projected_away() {
        let mut t1 = trace(&[("a", 1.0, 1.0)]);
        t1.0.insert(0, TimedItem::Internal { time: 0.0 });
        let t2 = trace(&[("a", 1.0, 1.0)]);
        let merged = merge_traces(&t1, &t2, &chans(&["a"]));
        assert_eq!(merged, vec![trace(&[("a", 1.0, 1.0)])]);
    }

    #[test]
    fn results_are_time_sorted() {
        let t1 = trace(&[("a", 1.0, 0.5), ("a", 2.0, 1.5)]);
        let t2 = trace(&[("b", 9.0, 1.0)]);
        for m in merge_traces(&t1, &t2, &BTreeSet::new()) {
            assert!(m.is_time_sorted(), "unsorted merge {m:?}");
        }
    }

    #[test]
    fn merge_states_unions_disjoint_valuations() {
        let mut v1 = BTreeMap::new();
        v1.insert("a".to_string(), 1.0);
        let mut v2 = BTreeMap::new();
        v2.insert("b".to_string(), 2.0);
        let merged = merge_states(&ProcState::new(v1), &ProcState::new(v2)).unwrap();
        assert_eq!(merged.vals["a"], 1.0);
        assert_eq!(merged.vals["b"], 2.0);
        assert!(merged.tr.is_empty());
        assert_eq!(merged.now, 0.0);
    }

    #[test]
    fn merge_states_rejects_shared_variables() {
        let mut v = BTreeMap::new();
        v.insert("x".to_string(), 0.0);
        let err = merge_states(&ProcState::new(v.clone()), &ProcState::new(v)).unwrap_err();
        assert_eq!(
            err,
            RunError::NotParallelable("shared variable x".into())
        );
    }

    #[test]
    fn merge_states_unions_readiness() {
        use super::super::state::Direction;
        let mut s1 = ProcState::new(BTreeMap::new());
        s1.register_ready("a", Direction::Input);
        let mut s2 = ProcState::new(BTreeMap::new());
        s2.register_ready("b", Direction::Output);
        let merged = merge_states(&s1, &s2).unwrap();
        assert_eq!(merged.rdy.len(), 2);
    }

    #[test]
    fn weighted_pick_matches_cumulative_intervals() {
        assert_eq!(weighted_pick(&[rat(1, 1), rat(1, 1)], 0.3), 0);
        assert_eq!(weighted_pick(&[rat(5, 1)], 0.99), 0);
        // u = 0.25 sits exactly on the first boundary: strict `<` on the
        // upper end sends it to the second branch.
        assert_eq!(weighted_pick(&[rat(1, 1), rat(3, 1)], 0.25), 1);
        assert_eq!(weighted_pick(&[rat(1, 1), rat(3, 1)], 0.2499), 0);
    }

    #[test]
    fn pchoice_boundary_is_inclusive() {
        assert_eq!(pchoice_branch(&rat(1, 2), 0.5), Branch::Left);
        assert_eq!(pchoice_branch(&rat(0, 1), 0.0), Branch::Left);
        assert_eq!(pchoice_branch(&rat(1, 1), 0.999), Branch::Left);
        assert_eq!(pchoice_branch(&rat(1, 2), 0.5000001), Branch::Right);
    }
}
