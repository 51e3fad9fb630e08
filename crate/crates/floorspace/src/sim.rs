//! Ground-truth conversation simulator: per-floor turn cycles with
//! configurable gap/overlap distributions and a scheduled schism/merge
//! timeline. Generation is deterministic in the seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::features::extract_transitions;
use crate::model::{sort_events, Partition, ParticipantId, Trace, TruthEntry, VadEvent};
use crate::scalar::{as_f64, lit, Float};

/// Turn lengths shorter than this are resampled rather than clipped.
pub const MIN_TURN_SECONDS: f64 = 0.3;

/// Default pairing horizon, matching the feature extractor.
pub const DEFAULT_HORIZON: f64 = 8.0;

/// Mean/standard-deviation pair for a Gaussian draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams<T = f64> {
    pub mean: T,
    pub sd: T,
}

/// Simulator configuration. Default turns are measured (3.5 s +- 0.25 s)
/// with tight response gaps (0.2 s +- 0.15 s): within a floor only the
/// responder-to-previous-speaker timing is tight, which is exactly the
/// signature the gap models discriminate on.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T = f64> {
    pub participants: usize,
    pub duration: T,
    pub turn_length: GaussianParams<T>,
    pub gap: GaussianParams<T>,
    /// Floor layout forced from each listed time. An entry at time zero
    /// overrides the implicit initial single floor.
    pub schedule: Vec<(T, Partition)>,
    pub seed: u64,
}

impl<T: Float> SimConfig<T> {
    pub fn new(participants: usize, duration: T, seed: u64) -> Self {
        SimConfig {
            participants,
            duration,
            turn_length: GaussianParams { mean: lit(3.5), sd: lit(0.25) },
            gap: GaussianParams { mean: lit(0.2), sd: lit(0.15) },
            schedule: Vec::new(),
            seed,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("config requires at least one participant")]
    NoParticipants,
    #[error("trace has no ground truth")]
    MissingGroundTruth,
}

/// Canonical participant ids: single letters for up to 26 participants,
/// zero-padded `pNNN` beyond.
pub fn default_participant_ids(n: usize) -> Vec<ParticipantId> {
    if n <= 26 {
        (0..n)
            .map(|i| ParticipantId::new(((b'A' + i as u8) as char).to_string()))
            .collect()
    } else {
        (0..n).map(|i| ParticipantId::new(format!("p{i:03}"))).collect()
    }
}

/// A floor resuming after a schedule point either picks up promptly from its
/// members' most recent utterance or waits out a clear pause; it never
/// resumes after an ambiguous gap in between, which no real turn uptake
/// produces.
const AMBIGUOUS_PAUSE: f64 = 3.0;
const FRESH_START_PAUSE: f64 = 3.2;

/// Generates a trace with ground truth populated from the schedule.
///
/// Within each floor speakers alternate: the next speaker is drawn uniformly
/// from the floor's other members and starts at the previous turn's end plus
/// a gap draw (negative draws produce overlap). Floors run concurrently and
/// never exchange turns. At each schedule point every floor of the new
/// layout restarts its cycle; an utterance already under way finishes
/// first, and each floor anchors its new cycle to its own members' latest
/// utterance end.
pub fn generate_trace<T: Float>(config: &SimConfig<T>) -> Result<Trace<T>, SimError> {
    if config.participants == 0 {
        return Err(SimError::NoParticipants);
    }
    let ids = default_participant_ids(config.participants);
    let participants: std::collections::BTreeSet<ParticipantId> = ids.iter().cloned().collect();
    let zero = T::zero();

    let mut prev = T::neg_infinity();
    for (time, partition) in &config.schedule {
        if *time < zero || *time > config.duration {
            return Err(SimError::InvalidSchedule(format!(
                "time {} outside [0, {}]",
                as_f64(*time),
                as_f64(config.duration)
            )));
        }
        if *time <= prev {
            return Err(SimError::InvalidSchedule(
                "times must be strictly increasing".into(),
            ));
        }
        prev = *time;
        if !partition.is_partition_of(&participants) {
            return Err(SimError::InvalidSchedule(format!(
                "entry at {} is not a partition of the participants",
                as_f64(*time)
            )));
        }
    }

    let mut timeline: Vec<TruthEntry<T>> = Vec::new();
    if config.schedule.first().map_or(true, |(t, _)| *t > zero) {
        timeline.push(TruthEntry { time: zero, floors: Partition::single_floor(ids.clone()) });
    }
    timeline.extend(
        config.schedule.iter().map(|(t, p)| TruthEntry { time: *t, floors: p.clone() }),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut events: Vec<VadEvent<T>> = Vec::new();
    // Latest utterance end per speaker across the whole session; utterances
    // run over schedule boundaries, so floors must respect them.
    let mut spoken_until: BTreeMap<ParticipantId, T> = BTreeMap::new();

    for (k, entry) in timeline.iter().enumerate() {
        let seg_start = entry.time;
        let seg_end = timeline.get(k + 1).map_or(config.duration, |e| e.time);
        if seg_end <= seg_start {
            continue;
        }
        for floor in entry.floors.blocks() {
            if floor.len() < 2 {
                continue; // a singleton floor stays silent
            }
            let members: Vec<&ParticipantId> = floor.iter().collect();
            let mut next_start =
                restart_anchor(&mut rng, seg_start, &members, &spoken_until, &config.gap);
            let mut speaker_idx = rng.gen_range(0..members.len());

            loop {
                let mut start = next_start.max(seg_start).max(zero);
                if let Some(&own_end) = spoken_until.get(members[speaker_idx]) {
                    start = start.max(own_end);
                }
                if start >= seg_end || start >= config.duration {
                    break;
                }
                let len = draw_turn_length(&mut rng, &config.turn_length);
                let end = (start + len).min(config.duration);
                if end > start {
                    events.push(VadEvent {
                        speaker: members[speaker_idx].clone(),
                        start,
                        end,
                    });
                    spoken_until.insert(members[speaker_idx].clone(), end);
                }

                let gap = draw_gaussian(&mut rng, &config.gap);
                next_start = end + gap;
                let offset = rng.gen_range(1..members.len());
                speaker_idx = (speaker_idx + offset) % members.len();
            }
        }
    }

    sort_events(&mut events);
    Ok(Trace {
        participants,
        events,
        duration: config.duration,
        ground_truth: Some(timeline),
    })
}

/// Where a floor's cycle resumes at a segment boundary: a normal response
/// gap after the floor's latest utterance when that reads as a prompt
/// uptake, otherwise a clear fresh-start pause after every member's last
/// speech. Running utterances (ends past `seg_start`) anchor the prompt
/// case.
fn restart_anchor<T: Float>(
    rng: &mut ChaCha8Rng,
    seg_start: T,
    members: &[&ParticipantId],
    spoken_until: &BTreeMap<ParticipantId, T>,
    gap: &GaussianParams<T>,
) -> T {
    let latest = members
        .iter()
        .filter_map(|m| spoken_until.get(*m))
        .cloned()
        .fold(None, |acc: Option<T>, e| Some(acc.map_or(e, |a| a.max(e))));
    let Some(latest) = latest else {
        return seg_start + lit(rng.gen_range(0.0..0.3));
    };
    let natural = (latest + draw_gaussian(rng, gap)).max(seg_start);
    let own_gap = natural - latest;
    // Fresh starts draw a wide delay so concurrent floors do not resume in
    // phase with one another.
    let start = if own_gap > lit(0.55) && own_gap <= lit(AMBIGUOUS_PAUSE) {
        latest + lit::<T>(FRESH_START_PAUSE) + lit(rng.gen_range(0.0..3.5))
    } else {
        natural
    };
    // Ends of other members must not sit at an ambiguous distance either.
    let mut start = start;
    loop {
        let conflict = members
            .iter()
            .filter_map(|m| spoken_until.get(*m))
            .find(|&&e| start - e > lit(0.55) && start - e <= lit(AMBIGUOUS_PAUSE));
        match conflict {
            Some(&e) => {
                start = e + lit::<T>(FRESH_START_PAUSE) + lit(rng.gen_range(0.0..3.5));
            }
            None => return start,
        }
    }
}

fn draw_gaussian<T: Float>(rng: &mut ChaCha8Rng, params: &GaussianParams<T>) -> T {
    let normal = Normal::new(as_f64(params.mean), as_f64(params.sd).max(0.0))
        .expect("gaussian parameters are finite");
    lit(normal.sample(rng))
}

/// Truncated draw: resample until at least the minimum turn length.
fn draw_turn_length<T: Float>(rng: &mut ChaCha8Rng, params: &GaussianParams<T>) -> T {
    let normal = Normal::new(as_f64(params.mean), as_f64(params.sd).max(0.0))
        .expect("gaussian parameters are finite");
    for _ in 0..10_000 {
        let x = normal.sample(rng);
        if x >= MIN_TURN_SECONDS {
            return lit(x);
        }
    }
    lit(MIN_TURN_SECONDS)
}

/// Gap statistics recovered from a trace: undefined (None) when no
/// transitions were measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats<T = f64> {
    pub mean: Option<T>,
    pub sd: Option<T>,
    pub count: usize,
}

/// Measures the actual turn-transition gaps inside ground-truth floors as a
/// simulator self-check, using the feature extractor at the default horizon.
/// For each utterance start, only the nearest same-floor prior counts (the
/// true turn transition); pairs against older turns would bias the statistic
/// away from the configured gap distribution.
pub fn empirical_gap_stats<T: Float>(trace: &Trace<T>) -> Result<GapStats<T>, SimError> {
    if trace.ground_truth.is_none() {
        return Err(SimError::MissingGroundTruth);
    }
    let samples = extract_transitions(&trace.events, lit::<T>(DEFAULT_HORIZON))
        .map_err(|_| SimError::MissingGroundTruth)?;

    // Group per utterance start, keep the same-floor sample with the
    // smallest gap (latest prior end).
    let mut gaps: Vec<T> = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        let mut j = i;
        while j < samples.len()
            && samples[j].at == samples[i].at
            && samples[j].next == samples[i].next
        {
            j += 1;
        }
        let truth = trace.truth_at(samples[i].at);
        let best = samples[i..j]
            .iter()
            .filter(|s| truth.map_or(false, |p| p.same_block(&s.prior, &s.next)))
            .min_by(|a, b| a.gap.partial_cmp(&b.gap).unwrap());
        if let Some(s) = best {
            gaps.push(s.gap);
        }
        i = j;
    }

    if gaps.is_empty() {
        return Ok(GapStats { mean: None, sd: None, count: 0 });
    }
    let n = T::from_usize(gaps.len()).unwrap();
    let mean = gaps.iter().fold(T::zero(), |acc, &g| acc + g) / n;
    let var = gaps.iter().fold(T::zero(), |acc, &g| acc + (g - mean) * (g - mean)) / n;
    Ok(GapStats { mean: Some(mean), sd: Some(var.sqrt()), count: gaps.len() })
}
