//! Domain types for participants, voice-activity events and traces, plus
//! validation and normalization of raw event streams.
//!
//! Times are real-valued offsets in seconds from session start; there are no
//! wall-clock semantics anywhere in the data model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::scalar::{as_f64, Float};

/// Opaque participant token, unique within a session. Ordering is total and
/// used only for canonical output.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParticipantId(String);

impl ParticipantId {
    pub fn new(id: impl Into<String>) -> Self {
        ParticipantId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Ids must be non-empty; empty ids are reported by [`validate_trace`].
    pub fn is_valid(&self) -> bool {
        !self.0.is_empty()
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&str> for ParticipantId {
    fn from(s: &str) -> Self {
        ParticipantId::new(s)
    }
}

impl From<String> for ParticipantId {
    fn from(s: String) -> Self {
        ParticipantId::new(s)
    }
}

/// One voice-activity interval: who spoke, from when to when.
#[derive(Debug, Clone, PartialEq)]
pub struct VadEvent<T = f64> {
    pub speaker: ParticipantId,
    pub start: T,
    pub end: T,
}

impl<T: Float> VadEvent<T> {
    pub fn new(speaker: impl Into<ParticipantId>, start: T, end: T) -> Self {
        VadEvent { speaker: speaker.into(), start, end }
    }
}

/// A set partition of participants into disjoint non-empty blocks, kept in
/// canonical form: members sorted within each block, blocks sorted by their
/// smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<BTreeSet<ParticipantId>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("participant {0} appears in more than one block")]
    DuplicateParticipant(ParticipantId),
    #[error("partition contains an empty block")]
    EmptyBlock,
}

impl Partition {
    /// Builds a partition from blocks, validating disjointness and that no
    /// block is empty. Blocks are canonicalized.
    pub fn from_blocks<I, B, P>(blocks: I) -> Result<Self, PartitionError>
    where
        I: IntoIterator<Item = B>,
        B: IntoIterator<Item = P>,
        P: Into<ParticipantId>,
    {
        let mut seen = BTreeSet::new();
        let mut out: Vec<BTreeSet<ParticipantId>> = Vec::new();
        for block in blocks {
            let mut set = BTreeSet::new();
            for id in block {
                let id = id.into();
                if !seen.insert(id.clone()) {
                    return Err(PartitionError::DuplicateParticipant(id));
                }
                set.insert(id);
            }
            if set.is_empty() {
                return Err(PartitionError::EmptyBlock);
            }
            out.push(set);
        }
        out.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
        Ok(Partition { blocks: out })
    }

    /// Everyone in one floor.
    pub fn single_floor<I, P>(ids: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: Into<ParticipantId>,
    {
        let set: BTreeSet<ParticipantId> = ids.into_iter().map(Into::into).collect();
        if set.is_empty() {
            Partition { blocks: Vec::new() }
        } else {
            Partition { blocks: vec![set] }
        }
    }

    /// Each participant in their own floor.
    pub fn singletons<I, P>(ids: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: Into<ParticipantId>,
    {
        let set: BTreeSet<ParticipantId> = ids.into_iter().map(Into::into).collect();
        Partition { blocks: set.into_iter().map(|id| BTreeSet::from([id])).collect() }
    }

    pub fn blocks(&self) -> &[BTreeSet<ParticipantId>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn participants(&self) -> impl Iterator<Item = &ParticipantId> {
        self.blocks.iter().flatten()
    }

    pub fn contains(&self, id: &ParticipantId) -> bool {
        self.blocks.iter().any(|b| b.contains(id))
    }

    /// Index of the block holding `id`, if any.
    pub fn block_of(&self, id: &ParticipantId) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(id))
    }

    /// True when both ids are present and share a block.
    pub fn same_block(&self, a: &ParticipantId, b: &ParticipantId) -> bool {
        match (self.block_of(a), self.block_of(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// True when this is an exact partition of `participants`.
    pub fn is_partition_of(&self, participants: &BTreeSet<ParticipantId>) -> bool {
        let covered: BTreeSet<&ParticipantId> = self.participants().collect();
        covered.len() == self.participants().count()
            && covered.len() == participants.len()
            && participants.iter().all(|p| covered.contains(p))
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first_block = true;
        for block in &self.blocks {
            if !first_block {
                f.write_str(" | ")?;
            }
            first_block = false;
            let mut first = true;
            for id in block {
                if !first {
                    f.write_str(",")?;
                }
                first = false;
                write!(f, "{id}")?;
            }
        }
        Ok(())
    }
}

/// One ground-truth timeline entry: the floor layout in force from `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthEntry<T = f64> {
    pub time: T,
    pub floors: Partition,
}

/// A session's worth of voice activity, with optional ground truth (present
/// only for simulated traces).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T = f64> {
    pub participants: BTreeSet<ParticipantId>,
    pub events: Vec<VadEvent<T>>,
    pub duration: T,
    pub ground_truth: Option<Vec<TruthEntry<T>>>,
}

impl<T: Float> Trace<T> {
    /// Ground-truth floor layout in force at time `t` (the last entry at or
    /// before `t`, or the first entry when `t` precedes the timeline).
    pub fn truth_at(&self, t: T) -> Option<&Partition> {
        let entries = self.ground_truth.as_ref()?;
        let idx = entries.partition_point(|e| e.time <= t);
        if idx == 0 {
            entries.first().map(|e| &e.floors)
        } else {
            Some(&entries[idx - 1].floors)
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed event at index {index}: end {end} <= start {start}")]
    MalformedEvent { index: usize, start: f64, end: f64 },
}

/// A single trace-invariant violation. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyParticipantId,
    UnknownSpeaker { index: usize, speaker: ParticipantId },
    NonPositiveEvent { index: usize },
    EventOutOfRange { index: usize },
    EventsUnsorted { index: usize },
    SpeakerOverlap { index: usize, speaker: ParticipantId },
    TruthNotIncreasing { index: usize },
    TruthOutOfRange { index: usize },
    TruthNotPartition { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyParticipantId => write!(f, "participant set contains an empty id"),
            Violation::UnknownSpeaker { index, speaker } => {
                write!(f, "event {index}: speaker {speaker} not in participants")
            }
            Violation::NonPositiveEvent { index } => write!(f, "event {index}: end <= start"),
            Violation::EventOutOfRange { index } => {
                write!(f, "event {index}: times outside [0, duration]")
            }
            Violation::EventsUnsorted { index } => {
                write!(f, "event {index}: starts before the preceding event")
            }
            Violation::SpeakerOverlap { index, speaker } => {
                write!(f, "event {index}: overlaps an earlier event by {speaker}")
            }
            Violation::TruthNotIncreasing { index } => {
                write!(f, "ground-truth entry {index}: timestamp does not increase")
            }
            Violation::TruthOutOfRange { index } => {
                write!(f, "ground-truth entry {index}: time outside [0, duration]")
            }
            Violation::TruthNotPartition { index } => {
                write!(f, "ground-truth entry {index}: floors are not a partition of participants")
            }
        }
    }
}

/// Sorts events, merges same-speaker intervals that overlap, touch, or are
/// separated by less than `merge_gap`, and restores the global sort by start.
/// Events of different speakers are never combined.
pub fn normalize_events<T: Float>(
    events: &[VadEvent<T>],
    merge_gap: T,
) -> Result<Vec<VadEvent<T>>, ModelError> {
    for (index, ev) in events.iter().enumerate() {
        if ev.end <= ev.start {
            return Err(ModelError::MalformedEvent {
                index,
                start: as_f64(ev.start),
                end: as_f64(ev.end),
            });
        }
    }

    let mut by_speaker: BTreeMap<&ParticipantId, Vec<&VadEvent<T>>> = BTreeMap::new();
    for ev in events {
        by_speaker.entry(&ev.speaker).or_default().push(ev);
    }

    let mut out: Vec<VadEvent<T>> = Vec::with_capacity(events.len());
    for (speaker, mut evs) in by_speaker {
        evs.sort_by(|a, b| {
            a.start.partial_cmp(&b.start).unwrap().then(a.end.partial_cmp(&b.end).unwrap())
        });
        let mut merged: Vec<(T, T)> = Vec::with_capacity(evs.len());
        for ev in evs {
            match merged.last_mut() {
                Some((_, end)) if ev.start - *end < merge_gap || ev.start <= *end => {
                    if ev.end > *end {
                        *end = ev.end;
                    }
                }
                _ => merged.push((ev.start, ev.end)),
            }
        }
        out.extend(merged.into_iter().map(|(start, end)| VadEvent {
            speaker: speaker.clone(),
            start,
            end,
        }));
    }

    sort_events(&mut out);
    Ok(out)
}

/// Canonical global event order: by start, then end, then speaker.
pub(crate) fn sort_events<T: Float>(events: &mut [VadEvent<T>]) {
    events.sort_by(|a, b| {
        a.start
            .partial_cmp(&b.start)
            .unwrap()
            .then(a.end.partial_cmp(&b.end).unwrap())
            .then(a.speaker.cmp(&b.speaker))
    });
}

/// Checks all `Trace` invariants and reports each violation; an empty report
/// means the trace is well-formed.
pub fn validate_trace<T: Float>(trace: &Trace<T>) -> Vec<Violation> {
    let mut report = Vec::new();

    if trace.participants.iter().any(|p| !p.is_valid()) {
        report.push(Violation::EmptyParticipantId);
    }

    let zero = T::zero();
    let mut prev_start: Option<T> = None;
    let mut last_end: BTreeMap<&ParticipantId, T> = BTreeMap::new();
    for (index, ev) in trace.events.iter().enumerate() {
        if !trace.participants.contains(&ev.speaker) {
            report.push(Violation::UnknownSpeaker { index, speaker: ev.speaker.clone() });
        }
        if ev.end <= ev.start {
            report.push(Violation::NonPositiveEvent { index });
        }
        if ev.start < zero || ev.end > trace.duration {
            report.push(Violation::EventOutOfRange { index });
        }
        if let Some(prev) = prev_start {
            if ev.start < prev {
                report.push(Violation::EventsUnsorted { index });
            }
        }
        prev_start = Some(ev.start);
        if let Some(&end) = last_end.get(&ev.speaker) {
            if ev.start < end {
                report.push(Violation::SpeakerOverlap { index, speaker: ev.speaker.clone() });
            }
        }
        let entry = last_end.entry(&ev.speaker).or_insert(ev.end);
        if ev.end > *entry {
            *entry = ev.end;
        }
    }

    if let Some(truth) = &trace.ground_truth {
        let mut prev: Option<T> = None;
        for (index, entry) in truth.iter().enumerate() {
            if let Some(p) = prev {
                if entry.time <= p {
                    report.push(Violation::TruthNotIncreasing { index });
                }
            }
            prev = Some(entry.time);
            if entry.time < zero || entry.time > trace.duration {
                report.push(Violation::TruthOutOfRange { index });
            }
            if !entry.floors.is_partition_of(&trace.participants) {
                report.push(Violation::TruthNotPartition { index });
            }
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, start: f64, end: f64) -> VadEvent {
        VadEvent::new(s, start, end)
    }

    #[test]
    fn normalize_merges_small_same_speaker_gap() {
        let events = vec![ev("A", 0.0, 1.0), ev("A", 1.02, 2.0)];
        let out = normalize_events(&events, 0.05).unwrap();
        assert_eq!(out, vec![ev("A", 0.0, 2.0)]);
    }

    #[test]
    fn normalize_leaves_cross_speaker_overlap_alone() {
        let events = vec![ev("A", 0.0, 1.0), ev("B", 0.5, 1.5)];
        let out = normalize_events(&events, 0.05).unwrap();
        assert_eq!(out, events);
    }

    #[test]
    fn normalize_empty_is_empty() {
        let out = normalize_events::<f64>(&[], 0.05).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn normalize_merges_same_speaker_overlap() {
        let events = vec![ev("A", 0.0, 1.0), ev("A", 0.5, 0.8), ev("A", 0.9, 1.4)];
        let out = normalize_events(&events, 0.0).unwrap();
        assert_eq!(out, vec![ev("A", 0.0, 1.4)]);
    }

    #[test]
    fn normalize_rejects_malformed_event() {
        let events = vec![ev("A", 1.0, 1.0)];
        let err = normalize_events(&events, 0.05).unwrap_err();
        assert!(matches!(err, ModelError::MalformedEvent { index: 0, .. }));
    }

    #[test]
    fn normalize_is_idempotent() {
        let events = vec![
            ev("A", 0.0, 1.0),
            ev("B", 0.2, 0.9),
            ev("A", 1.03, 2.0),
            ev("B", 1.5, 2.5),
            ev("A", 2.01, 3.0),
        ];
        let once = normalize_events(&events, 0.05).unwrap();
        let twice = normalize_events(&once, 0.05).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn validate_accepts_well_formed_trace() {
        let trace = Trace {
            participants: ["A", "B"].into_iter().map(ParticipantId::new).collect(),
            events: vec![ev("A", 0.0, 1.0), ev("B", 1.2, 2.0)],
            duration: 3.0,
            ground_truth: None,
        };
        assert!(validate_trace(&trace).is_empty());
    }

    #[test]
    fn validate_flags_unknown_speaker() {
        let trace = Trace {
            participants: ["A"].into_iter().map(ParticipantId::new).collect(),
            events: vec![ev("A", 0.0, 1.0), ev("B", 1.2, 2.0)],
            duration: 3.0,
            ground_truth: None,
        };
        let report = validate_trace(&trace);
        assert_eq!(
            report,
            vec![Violation::UnknownSpeaker { index: 1, speaker: ParticipantId::new("B") }]
        );
    }

    #[test]
    fn validate_flags_non_increasing_truth() {
        let floors = Partition::single_floor(["A", "B"]);
        let trace = Trace {
            participants: ["A", "B"].into_iter().map(ParticipantId::new).collect(),
            events: vec![],
            duration: 10.0,
            ground_truth: Some(vec![
                TruthEntry { time: 0.0, floors: floors.clone() },
                TruthEntry { time: 0.0, floors },
            ]),
        };
        let report = validate_trace(&trace);
        assert_eq!(report, vec![Violation::TruthNotIncreasing { index: 1 }]);
    }

    #[test]
    fn partition_rejects_duplicates_and_empty_blocks() {
        let err = Partition::from_blocks(vec![vec!["A", "B"], vec!["A"]]).unwrap_err();
        assert_eq!(err, PartitionError::DuplicateParticipant(ParticipantId::new("A")));
        let err = Partition::from_blocks(vec![vec!["A"], vec![]]).unwrap_err();
        assert_eq!(err, PartitionError::EmptyBlock);
    }

    #[test]
    fn partition_canonical_form_is_stable() {
        let a = Partition::from_blocks(vec![vec!["C", "D"], vec!["B", "A"]]).unwrap();
        let b = Partition::from_blocks(vec![vec!["A", "B"], vec!["D", "C"]]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "A,B | C,D");
    }

    #[test]
    fn truth_at_picks_last_entry_at_or_before() {
        let trace = Trace {
            participants: ["A", "B"].into_iter().map(ParticipantId::new).collect(),
            events: vec![],
            duration: 100.0,
            ground_truth: Some(vec![
                TruthEntry { time: 0.0, floors: Partition::single_floor(["A", "B"]) },
                TruthEntry { time: 60.0, floors: Partition::singletons(["A", "B"]) },
            ]),
        };
        assert_eq!(trace.truth_at(59.9).unwrap().block_count(), 1);
        assert_eq!(trace.truth_at(60.0).unwrap().block_count(), 2);
    }
}
