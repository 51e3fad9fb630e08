//! Turn-taking features: ordered-pair transition samples (the signed
//! pause/overlap gap measured at each possible speaker change) and lapses
//! (maximal global silences).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{ParticipantId, VadEvent};
use crate::scalar::Float;

/// One ordered speaker-pair gap measurement: `next` started `gap` seconds
/// after `prior`'s most recent utterance ended (negative = overlap).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSample<T = f64> {
    pub prior: ParticipantId,
    pub next: ParticipantId,
    pub gap: T,
    /// Start time of `next`'s utterance.
    pub at: T,
}

/// A maximal interval of global silence at least as long as the threshold
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Lapse<T = f64> {
    pub start: T,
    pub end: T,
    /// Speaker whose utterance ended last before the silence; absent when the
    /// silence starts at time zero.
    pub preceding_speaker: Option<ParticipantId>,
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("events not normalized: {speaker} has overlapping intervals")]
    NotNormalized { speaker: ParticipantId },
}

/// Extracts one sample per (other speaker, utterance start) pair: each start
/// by `next` at time `t` is paired with every other speaker whose latest
/// utterance (among those started before `t`) ended within `horizon` of `t`.
/// An utterance still ongoing at `t` yields a negative gap.
pub fn extract_transitions<T: Float>(
    events: &[VadEvent<T>],
    horizon: T,
) -> Result<Vec<TransitionSample<T>>, FeatureError> {
    check_normalized(events)?;
    let mut sorted: Vec<&VadEvent<T>> = events.iter().collect();
    sorted.sort_by(|a, b| {
        a.start
            .partial_cmp(&b.start)
            .unwrap()
            .then(a.end.partial_cmp(&b.end).unwrap())
            .then(a.speaker.cmp(&b.speaker))
    });

    // Latest utterance per speaker among events started strictly before the
    // current start time. Events sharing a start time must not see each
    // other, so state updates are deferred per equal-start batch.
    let mut latest: BTreeMap<&ParticipantId, (T, T)> = BTreeMap::new();
    let mut samples = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].start;
        let mut j = i;
        while j < sorted.len() && sorted[j].start == t {
            j += 1;
        }
        for ev in &sorted[i..j] {
            for (&prior, &(_, end)) in &latest {
                if *prior == ev.speaker {
                    continue;
                }
                let gap = t - end;
                if gap.abs() <= horizon {
                    samples.push(TransitionSample {
                        prior: prior.clone(),
                        next: ev.speaker.clone(),
                        gap,
                        at: t,
                    });
                }
            }
        }
        for ev in &sorted[i..j] {
            let entry = latest.entry(&ev.speaker).or_insert((ev.start, ev.end));
            if ev.start >= entry.0 {
                *entry = (ev.start, ev.end);
            }
        }
        i = j;
    }
    Ok(samples)
}

/// Exactly the samples with `at` in the half-open window `(t - window, t]`,
/// order preserved.
pub fn window_slice<'a, T: Float>(
    samples: &'a [TransitionSample<T>],
    t: T,
    window: T,
) -> Vec<&'a TransitionSample<T>> {
    samples.iter().filter(|s| s.at > t - window && s.at <= t).collect()
}

/// Emits one `Lapse` per maximal global-silence interval of length at least
/// `threshold` within `[0, duration]`.
pub fn lapse_scan<T: Float>(
    events: &[VadEvent<T>],
    threshold: T,
    duration: T,
) -> Vec<Lapse<T>> {
    let zero = T::zero();
    let mut speech: Vec<(T, T, &ParticipantId)> = events
        .iter()
        .filter(|e| e.end > zero && e.start < duration)
        .map(|e| (e.start.max(zero), e.end.min(duration), &e.speaker))
        .collect();
    speech.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut lapses = Vec::new();
    let mut cursor = zero;
    // Speaker with the latest utterance end seen so far; ties broken by id so
    // the result is deterministic.
    let mut last_ender: Option<(T, &ParticipantId)> = None;

    let mut push_silence = |from: T, to: T, who: Option<&ParticipantId>| {
        if to - from >= threshold {
            lapses.push(Lapse {
                start: from,
                end: to,
                preceding_speaker: if from == zero { None } else { who.cloned() },
            });
        }
    };

    for (start, end, speaker) in speech {
        if start > cursor {
            push_silence(cursor, start, last_ender.map(|(_, s)| s));
        }
        if end > cursor {
            cursor = end;
        }
        let better = match last_ender {
            None => true,
            Some((e, s)) => end > e || (end == e && *speaker > *s),
        };
        if better {
            last_ender = Some((end, speaker));
        }
    }
    if duration > cursor {
        push_silence(cursor, duration, last_ender.map(|(_, s)| s));
    }
    lapses
}

fn check_normalized<T: Float>(events: &[VadEvent<T>]) -> Result<(), FeatureError> {
    let mut spans: BTreeMap<&ParticipantId, Vec<(T, T)>> = BTreeMap::new();
    for ev in events {
        spans.entry(&ev.speaker).or_default().push((ev.start, ev.end));
    }
    for (speaker, mut intervals) in spans {
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for pair in intervals.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(FeatureError::NotNormalized { speaker: speaker.clone() });
            }
        }
    }
    Ok(())
}
