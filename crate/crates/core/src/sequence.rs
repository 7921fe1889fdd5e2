//! Event-sequence data model.
//!
//! An [`EventSequence`] is a time-ordered list of [`Event`]s. Every event
//! carries `r` real slots, an observed-mask over those slots, and a count of
//! how many original events it stands for. Raw input events have count 1;
//! the coarsening operators produce merged events with larger counts, and
//! grid coarsening may produce empty cells with count 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One timestamped observation. `t` is in hours since sequence start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub x: Vec<f64>,
    pub mask: Vec<bool>,
    pub c: u32,
}

impl Event {
    /// A fully observed event with count 1.
    pub fn observed(t: f64, x: Vec<f64>) -> Self {
        let mask = vec![true; x.len()];
        Event { t, x, mask, c: 1 }
    }

    /// Builds an event from optional values; `None` marks a missing slot.
    pub fn from_options(t: f64, values: &[Option<f64>], c: u32) -> Self {
        let x = values.iter().map(|v| v.unwrap_or(0.0)).collect();
        let mask = values.iter().map(Option::is_some).collect();
        Event { t, x, mask, c }
    }

    /// An unobserved placeholder, as left behind by an empty grid cell.
    pub fn empty(t: f64, r: usize) -> Self {
        Event { t, x: vec![0.0; r], mask: vec![false; r], c: 0 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn value(&self, j: usize) -> Option<f64> {
        self.mask[j].then(|| self.x[j])
    }
}

/// Time-ordered events of a single subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    pub id: String,
    pub events: Vec<Event>,
}

impl EventSequence {
    /// Wraps events without checking them; call [`EventSequence::check`] or
    /// [`validate`] before relying on the invariants.
    pub fn new(id: impl Into<String>, events: Vec<Event>) -> Self {
        EventSequence { id: id.into(), events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Feature dimensionality, taken from the first event.
    pub fn dim(&self) -> usize {
        self.events.first().map_or(0, Event::dim)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.t)
    }

    pub fn total_count(&self) -> u64 {
        self.events.iter().map(|e| u64::from(e.c)).sum()
    }

    /// Returns `self` if it is a valid raw input sequence.
    pub fn check(&self) -> Result<&Self> {
        self.check_with(false)
    }

    /// Like [`EventSequence::check`] but tolerates empty grid cells.
    pub fn check_coarsened(&self) -> Result<&Self> {
        self.check_with(true)
    }

    fn check_with(&self, allow_empty_cells: bool) -> Result<&Self> {
        let violations = validate_with(self, allow_empty_cells);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidSequence { id: self.id.clone(), violations })
        }
    }

    /// Rebuilds the sequence from new events, keeping the id.
    pub fn with_events(&self, events: Vec<Event>) -> Self {
        EventSequence { id: self.id.clone(), events }
    }
}

/// Sequence-level target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    /// Multi-label binary target, one entry per class.
    Binary(Vec<u8>),
    /// Scalar regression target.
    Real(f64),
}

impl Label {
    pub fn outputs(&self) -> usize {
        match self {
            Label::Binary(v) => v.len(),
            Label::Real(_) => 1,
        }
    }

    pub fn as_targets(&self) -> Vec<f64> {
        match self {
            Label::Binary(v) => v.iter().map(|&b| f64::from(b)).collect(),
            Label::Real(y) => vec![*y],
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, Label::Binary(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub sequence: EventSequence,
    pub label: Label,
}

/// A broken invariant, reported as data by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    DimensionMismatch { event: usize, expected: usize, got: usize },
    MaskLength { event: usize },
    Unsorted { event: usize },
    NonFiniteTime { event: usize },
    NonFiniteValue { event: usize, var: usize },
    UnobservedNonzero { event: usize, var: usize },
    NonpositiveCount { event: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Empty => write!(f, "sequence has no events"),
            Violation::DimensionMismatch { event, expected, got } => {
                write!(f, "event {event}: dimension {got}, expected {expected}")
            }
            Violation::MaskLength { event } => {
                write!(f, "event {event}: mask length differs from value length")
            }
            Violation::Unsorted { event } => {
                write!(f, "timestamps unsorted at event {event}")
            }
            Violation::NonFiniteTime { event } => write!(f, "event {event}: non-finite timestamp"),
            Violation::NonFiniteValue { event, var } => {
                write!(f, "event {event}: non-finite value in variable {var}")
            }
            Violation::UnobservedNonzero { event, var } => {
                write!(f, "event {event}: unobserved slot nonzero in variable {var}")
            }
            Violation::NonpositiveCount { event } => {
                write!(f, "event {event}: nonpositive count")
            }
        }
    }
}

/// Lists every invariant violation of a raw input sequence.
pub fn validate(seq: &EventSequence) -> Vec<Violation> {
    validate_with(seq, false)
}

/// Same as [`validate`], but with `allow_empty_cells` a count of 0 is
/// accepted on events with no observed slots (empty grid cells).
pub fn validate_with(seq: &EventSequence, allow_empty_cells: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(first) = seq.events.first() else {
        out.push(Violation::Empty);
        return out;
    };
    let r = first.dim();
    let mut prev_t = f64::NEG_INFINITY;
    for (i, e) in seq.events.iter().enumerate() {
        if e.dim() != r {
            out.push(Violation::DimensionMismatch { event: i, expected: r, got: e.dim() });
        }
        if e.mask.len() != e.x.len() {
            out.push(Violation::MaskLength { event: i });
        }
        if !e.t.is_finite() {
            out.push(Violation::NonFiniteTime { event: i });
        } else {
            if e.t < prev_t {
                out.push(Violation::Unsorted { event: i });
            }
            prev_t = e.t;
        }
        for (j, (&v, &m)) in e.x.iter().zip(&e.mask).enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFiniteValue { event: i, var: j });
            } else if !m && v != 0.0 {
                out.push(Violation::UnobservedNonzero { event: i, var: j });
            }
        }
        let empty_cell = allow_empty_cells && e.mask.iter().all(|m| !m);
        if e.c == 0 && !empty_cell {
            out.push(Violation::NonpositiveCount { event: i });
        }
    }
    out
}

/// Collapses a group of events into one: mean timestamp, per-variable mean
/// over the members that observed it, summed counts. A variable observed by
/// no member becomes 0 with its mask cleared.
///
/// Panics if `members` is empty or the members disagree on dimensionality.
pub fn merge_events(members: &[Event]) -> Event {
    assert!(!members.is_empty(), "merge_events needs at least one member");
    if let [only] = members {
        return only.clone();
    }
    let r = members[0].dim();
    let mut sums = vec![0.0; r];
    let mut seen = vec![0u32; r];
    let mut t_sum = 0.0;
    let mut c = 0u32;
    for e in members {
        assert_eq!(e.dim(), r, "merge_events members disagree on dimensionality");
        t_sum += e.t;
        c += e.c;
        for j in 0..r {
            if e.mask[j] {
                sums[j] += e.x[j];
                seen[j] += 1;
            }
        }
    }
    let mask: Vec<bool> = seen.iter().map(|&n| n > 0).collect();
    let x = sums
        .iter()
        .zip(&seen)
        .map(|(&s, &n)| if n > 0 { s / f64::from(n) } else { 0.0 })
        .collect();
    Event { t: t_sum / members.len() as f64, x, mask, c }
}

/// Merges runs of consecutive events. `starts` holds the first index of each
/// run (strictly increasing, beginning at 0). The result is sorted by time.
pub(crate) fn merge_runs(events: &[Event], starts: &[usize]) -> Vec<Event> {
    let mut out: Vec<Event> = starts
        .iter()
        .enumerate()
        .map(|(g, &s)| {
            let end = starts.get(g + 1).copied().unwrap_or(events.len());
            merge_events(&events[s..end])
        })
        .collect();
    sort_by_time(&mut out);
    out
}

pub(crate) fn sort_by_time(events: &mut [Event]) {
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(events: Vec<Event>) -> EventSequence {
        EventSequence::new("s", events)
    }

    #[test]
    fn single_event_is_valid() {
        let s = seq(vec![Event::observed(0.0, vec![1.0, 2.0])]);
        assert!(validate(&s).is_empty());
        assert!(s.check().is_ok());
    }

    #[test]
    fn reports_unsorted_timestamps() {
        let s = seq(vec![Event::observed(2.0, vec![1.0]), Event::observed(1.0, vec![1.0])]);
        let v = validate(&s);
        assert_eq!(v, vec![Violation::Unsorted { event: 1 }]);
        assert_eq!(v[0].to_string(), "timestamps unsorted at event 1");
    }

    #[test]
    fn reports_unobserved_nonzero() {
        let e = Event { t: 0.0, x: vec![3.0], mask: vec![false], c: 1 };
        assert_eq!(validate(&seq(vec![e])), vec![Violation::UnobservedNonzero { event: 0, var: 0 }]);
    }

    #[test]
    fn reports_nan_zero_count_and_empty() {
        let e = Event { t: 0.0, x: vec![f64::NAN], mask: vec![true], c: 0 };
        let v = validate(&seq(vec![e]));
        assert!(v.contains(&Violation::NonFiniteValue { event: 0, var: 0 }));
        assert!(v.contains(&Violation::NonpositiveCount { event: 0 }));
        assert_eq!(validate(&seq(vec![])), vec![Violation::Empty]);
    }

    #[test]
    fn empty_cells_allowed_only_when_requested() {
        let s = seq(vec![Event::observed(0.0, vec![1.0]), Event::empty(1.0, 1)]);
        assert_eq!(validate(&s).len(), 1);
        assert!(validate_with(&s, true).is_empty());
    }

    #[test]
    fn merge_of_pair_averages() {
        let a = Event::observed(1.0, vec![2.0, 4.0]);
        let b = Event::observed(3.0, vec![6.0, 8.0]);
        let m = merge_events(&[a, b]);
        assert_eq!(m.t, 2.0);
        assert_eq!(m.x, vec![4.0, 6.0]);
        assert_eq!(m.c, 2);
    }

    #[test]
    fn merge_of_one_is_identity() {
        let a = Event::from_options(0.5, &[Some(1.5), None], 3);
        assert_eq!(merge_events(std::slice::from_ref(&a)), a);
    }

    #[test]
    fn merge_ignores_missing_slots() {
        let a = Event::from_options(0.0, &[Some(4.0), None], 1);
        let b = Event::from_options(1.0, &[None, None], 1);
        let m = merge_events(&[a, b]);
        assert_eq!(m.x, vec![4.0, 0.0]);
        assert_eq!(m.mask, vec![true, false]);
    }

    #[test]
    #[should_panic]
    fn merge_of_nothing_panics() {
        merge_events(&[]);
    }

    fn arb_event(r: usize) -> impl Strategy<Value = Event> {
        (
            0.0..100.0f64,
            prop::collection::vec(proptest::option::weighted(0.7, -50.0..50.0f64), r),
            1u32..5,
        )
            .prop_map(|(t, vals, c)| Event::from_options(t, &vals, c))
    }

    proptest! {
        #[test]
        fn merge_conserves_counts_and_brackets_time(members in prop::collection::vec(arb_event(3), 1..12)) {
            let m = merge_events(&members);
            prop_assert_eq!(m.c, members.iter().map(|e| e.c).sum::<u32>());
            let lo = members.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);
            let hi = members.iter().map(|e| e.t).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m.t >= lo && m.t <= hi);
        }

        #[test]
        fn merge_is_permutation_invariant(
            members in prop::collection::vec(arb_event(3), 1..10),
            rot in 0usize..10,
        ) {
            let mut shuffled = members.clone();
            shuffled.reverse();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            let a = merge_events(&members);
            let b = merge_events(&shuffled);
            prop_assert_eq!(a.c, b.c);
            prop_assert_eq!(&a.mask, &b.mask);
            prop_assert!((a.t - b.t).abs() <= 1e-12 * a.t.abs().max(1.0));
            for (u, v) in a.x.iter().zip(&b.x) {
                prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }

        #[test]
        fn merge_of_observed_is_arithmetic_mean(rows in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 4), 1..10)) {
            let members: Vec<Event> = rows.iter().enumerate()
                .map(|(i, x)| Event::observed(i as f64, x.clone()))
                .collect();
            let m = merge_events(&members);
            for j in 0..4 {
                let mean = rows.iter().map(|x| x[j]).sum::<f64>() / rows.len() as f64;
                prop_assert!((m.x[j] - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            }
        }
    }
}
