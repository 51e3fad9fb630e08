//! Metrics comparing detector output to ground truth: time-resolved pairwise
//! partition accuracy and schism-detection latency, plus the full pipeline
//! runner that produces an evaluation report.

use thiserror::Error;

use crate::features::{extract_transitions, lapse_scan, FeatureError};
use crate::floor::{FloorChange, FloorError, FloorTracker, GapModel, TrackConfig};
use crate::mix::{ramp_step, target_gains, MixConfig, MixError};
use crate::model::{normalize_events, ModelError, Partition, Trace, TruthEntry};
use crate::scalar::{lit, Float};
use crate::style::{engagement_signals, update_mode, ChannelState, ModeChange, StyleConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("partitions cover different participant sets")]
    ParticipantMismatch,
    #[error("pairwise accuracy requires at least 2 participants")]
    TooFewParticipants,
    #[error("trace has no ground truth")]
    MissingGroundTruth,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Floor(#[from] FloorError),
    #[error(transparent)]
    Mix(#[from] MixError),
}

/// Latency of one ground-truth partition change: absent fields mean the
/// change was missed within the match window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyEntry<T = f64> {
    pub truth_time: T,
    pub detect_time: Option<T>,
    pub latency: Option<T>,
}

/// Full evaluation of one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T = f64> {
    /// Time-weighted mean of `per_tick_accuracy`.
    pub pairwise_accuracy: T,
    pub per_tick_accuracy: Vec<(T, T)>,
    pub schism_latencies: Vec<LatencyEntry<T>>,
    pub mode_timeline: Vec<ModeChange<T>>,
}

/// Pipeline configuration for [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig<T = f64> {
    /// Same-speaker merge gap for normalization, seconds.
    pub merge_gap: T,
    /// Transition pairing horizon, seconds.
    pub horizon: T,
    /// Pause-side cut for detector evidence, seconds. A start more than this
    /// long after another speaker's end is no longer a plausible response to
    /// it, so such pairings carry no floor information and would otherwise
    /// read as cross-floor evidence under a tight same-floor model. Overlap
    /// pairings are kept at any depth within the horizon: sustained
    /// simultaneous speech is exactly what distinguishes separate floors.
    pub max_pause: T,
    /// Minimum global silence counted as a lapse, seconds.
    pub lapse_threshold: T,
    /// Window for engagement signals, seconds.
    pub style_window: T,
    /// How long after a truth change a detection may still match, seconds.
    pub match_window: T,
    pub track: TrackConfig<T>,
    pub mix: MixConfig<T>,
    pub style: StyleConfig<T>,
}

impl<T: Float> Default for EvalConfig<T> {
    fn default() -> Self {
        EvalConfig {
            merge_gap: lit(0.05),
            horizon: lit(8.0),
            max_pause: lit(2.4),
            lapse_threshold: lit(2.0),
            style_window: lit(30.0),
            match_window: lit(30.0),
            track: TrackConfig::default(),
            mix: MixConfig::default(),
            style: StyleConfig::default(),
        }
    }
}

/// Fraction of unordered participant pairs whose same-block status agrees
/// between the two partitions (the pairwise Rand-style agreement).
pub fn pairwise_accuracy<T: Float>(
    truth: &Partition,
    predicted: &Partition,
) -> Result<T, EvalError> {
    let a: Vec<_> = truth.participants().collect();
    let b: Vec<_> = predicted.participants().collect();
    if a.len() != b.len() || a.iter().any(|p| !predicted.contains(p)) {
        return Err(EvalError::ParticipantMismatch);
    }
    if a.len() < 2 {
        return Err(EvalError::TooFewParticipants);
    }
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            total += 1;
            if truth.same_block(a[i], a[j]) == predicted.same_block(a[i], a[j]) {
                agree += 1;
            }
        }
    }
    Ok(T::from_usize(agree).unwrap() / T::from_usize(total).unwrap())
}

/// Matches each ground-truth partition change to the first detected change
/// within `match_window` whose resulting partition equals the new truth.
/// Matching is greedy-earliest; each detection matches at most one change and
/// detections before the truth change never match (no negative latencies).
pub fn schism_latency<T: Float>(
    truth_timeline: &[TruthEntry<T>],
    detected: &[FloorChange<T>],
    match_window: T,
) -> Vec<LatencyEntry<T>> {
    let mut entries = Vec::new();
    let mut next_detection = 0usize;
    for k in 1..truth_timeline.len() {
        let entry = &truth_timeline[k];
        if entry.floors == truth_timeline[k - 1].floors {
            continue; // not a change
        }
        let mut matched = None;
        let mut i = next_detection;
        while i < detected.len() {
            let d = &detected[i];
            if d.at > entry.time + match_window {
                break;
            }
            if d.at >= entry.time && d.after.partition == entry.floors {
                matched = Some((i, d.at));
                break;
            }
            i += 1;
        }
        match matched {
            Some((i, at)) => {
                next_detection = i + 1;
                entries.push(LatencyEntry {
                    truth_time: entry.time,
                    detect_time: Some(at),
                    latency: Some(at - entry.time),
                });
            }
            None => entries.push(LatencyEntry {
                truth_time: entry.time,
                detect_time: None,
                latency: None,
            }),
        }
    }
    entries
}

/// Runs the full pipeline (normalize, features, track, mix, style) over a
/// ground-truth trace and assembles the report. Deterministic: identical
/// inputs produce identical reports.
pub fn evaluate<T: Float>(
    trace: &Trace<T>,
    model: &GapModel<T>,
    config: &EvalConfig<T>,
) -> Result<EvalReport<T>, EvalError> {
    let truth = trace.ground_truth.as_ref().ok_or(EvalError::MissingGroundTruth)?;
    if trace.participants.len() < 2 {
        return Err(EvalError::TooFewParticipants);
    }

    let events = normalize_events(&trace.events, config.merge_gap)?;
    let mut samples = extract_transitions(&events, config.horizon)?;
    samples.retain(|s| s.gap <= config.max_pause);
    let lapses = lapse_scan(&events, config.lapse_threshold, trace.duration);

    let mut tracker =
        FloorTracker::new(trace.participants.clone(), *model, config.track)?;
    let mut channel = ChannelState::initial();
    let mut gains = target_gains(&tracker.published().partition, &config.mix);

    let mut per_tick = Vec::new();
    let mut changes: Vec<FloorChange<T>> = Vec::new();
    let mut modes = Vec::new();
    let mut fed = 0usize;

    let ticks = (trace.duration / config.track.tick).floor().to_usize().unwrap_or(0);
    for k in 1..=ticks {
        let t = config.track.tick * T::from_usize(k).unwrap();
        let mut batch = Vec::new();
        while fed < samples.len() && samples[fed].at <= t {
            batch.push(samples[fed].clone());
            fed += 1;
        }
        let step = tracker.advance(t, batch)?;
        if let Some(change) = step.change {
            changes.push(change);
        }

        let truth_now = trace.truth_at(t).expect("ground truth present");
        per_tick.push((t, pairwise_accuracy(truth_now, &step.partition.partition)?));

        // samples are sorted by `at`; restrict the scan to the window bounds
        let lo = samples.partition_point(|s| s.at <= t - config.style_window);
        let hi = samples.partition_point(|s| s.at <= t);
        let signals = engagement_signals(&samples[lo..hi], &lapses, t, config.style_window);
        let next = update_mode(&channel, &signals, t, &config.style);
        if next.mode != channel.mode {
            modes.push(ModeChange { time: t, mode: next.mode, tone: next.pending_tone });
        }
        channel = next;

        let target = target_gains(&step.partition.partition, &config.mix);
        gains = ramp_step(&gains, &target, &config.mix)?;
    }

    let pairwise = if per_tick.is_empty() {
        T::one()
    } else {
        per_tick.iter().fold(T::zero(), |acc, &(_, a)| acc + a)
            / T::from_usize(per_tick.len()).unwrap()
    };

    Ok(EvalReport {
        pairwise_accuracy: pairwise,
        per_tick_accuracy: per_tick,
        schism_latencies: schism_latency(truth, &changes, config.match_window),
        mode_timeline: modes,
    })
}

/// Detector output for one trace: every published tick plus the changes,
/// used by the command-line `detect` and `mix` paths.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectStep<T = f64> {
    pub time: T,
    pub partition: Partition,
    pub score: T,
    pub change: Option<FloorChange<T>>,
}

/// Runs normalize/features/track over a trace (ground truth not required)
/// and returns the per-tick published partitions.
pub fn detect_floors<T: Float>(
    trace: &Trace<T>,
    model: &GapModel<T>,
    config: &EvalConfig<T>,
) -> Result<Vec<DetectStep<T>>, EvalError> {
    let events = normalize_events(&trace.events, config.merge_gap)?;
    let mut samples = extract_transitions(&events, config.horizon)?;
    samples.retain(|s| s.gap <= config.max_pause);
    let mut tracker =
        FloorTracker::new(trace.participants.clone(), *model, config.track)?;
    let mut out = Vec::new();
    let mut fed = 0usize;
    let ticks = (trace.duration / config.track.tick).floor().to_usize().unwrap_or(0);
    for k in 1..=ticks {
        let t = config.track.tick * T::from_usize(k).unwrap();
        let mut batch = Vec::new();
        while fed < samples.len() && samples[fed].at <= t {
            batch.push(samples[fed].clone());
            fed += 1;
        }
        let step = tracker.advance(t, batch)?;
        out.push(DetectStep {
            time: t,
            partition: step.partition.partition.clone(),
            score: step.partition.score,
            change: step.change,
        });
    }
    Ok(out)
}

/// Labels every transition sample of a ground-truth trace by whether prior
/// and next shared a floor, the training input for the gap model.
pub fn label_transitions<T: Float>(
    trace: &Trace<T>,
    merge_gap: T,
    horizon: T,
) -> Result<Vec<(T, bool)>, EvalError> {
    if trace.ground_truth.is_none() {
        return Err(EvalError::MissingGroundTruth);
    }
    let events = normalize_events(&trace.events, merge_gap)?;
    let samples = extract_transitions(&events, horizon)?;
    Ok(samples
        .iter()
        .map(|s| {
            let same = trace
                .truth_at(s.at)
                .map_or(false, |p| p.same_block(&s.prior, &s.next));
            (s.gap, same)
        })
        .collect())
}

/// Verifies the report invariant tying the summary to the per-tick series.
pub fn time_weighted_mean<T: Float>(per_tick: &[(T, T)]) -> Option<T> {
    if per_tick.is_empty() {
        return None;
    }
    Some(
        per_tick.iter().fold(T::zero(), |acc, &(_, a)| acc + a)
            / T::from_usize(per_tick.len()).unwrap(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParticipantId, VadEvent};
    use crate::sim::{generate_trace, SimConfig};
    use approx::assert_relative_eq;

    #[test]
    fn identical_partitions_agree_fully() {
        let p = Partition::from_blocks(vec![vec!["A", "B"], vec!["C"]]).unwrap();
        assert_relative_eq!(pairwise_accuracy::<f64>(&p, &p).unwrap(), 1.0);
    }

    #[test]
    fn merged_prediction_agrees_on_two_of_six_pairs() {
        let truth = Partition::from_blocks(vec![vec!["A", "B"], vec!["C", "D"]]).unwrap();
        let predicted = Partition::single_floor(["A", "B", "C", "D"]);
        // by enumeration: AB and CD agree, the 4 cross pairs disagree
        assert_relative_eq!(
            pairwise_accuracy::<f64>(&truth, &predicted).unwrap(),
            2.0 / 6.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn all_singletons_agree_with_themselves() {
        let p = Partition::singletons(["A", "B", "C"]);
        assert_relative_eq!(pairwise_accuracy::<f64>(&p, &p).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_is_symmetric() {
        let a = Partition::from_blocks(vec![vec!["A", "B"], vec!["C", "D"]]).unwrap();
        let b = Partition::from_blocks(vec![vec!["A", "C"], vec!["B", "D"]]).unwrap();
        assert_eq!(
            pairwise_accuracy::<f64>(&a, &b).unwrap(),
            pairwise_accuracy::<f64>(&b, &a).unwrap()
        );
    }

    #[test]
    fn accuracy_rejects_mismatched_sets() {
        let a = Partition::single_floor(["A", "B"]);
        let b = Partition::single_floor(["A", "C"]);
        assert!(matches!(
            pairwise_accuracy::<f64>(&a, &b),
            Err(EvalError::ParticipantMismatch)
        ));
    }

    fn truth_pair() -> Vec<TruthEntry> {
        vec![
            TruthEntry { time: 0.0, floors: Partition::single_floor(["A", "B", "C", "D"]) },
            TruthEntry {
                time: 60.0,
                floors: Partition::from_blocks(vec![vec!["A", "B"], vec!["C", "D"]]).unwrap(),
            },
        ]
    }

    fn change_at(at: f64, to: Partition) -> FloorChange {
        use crate::floor::FloorPartition;
        FloorChange::new(
            at,
            FloorPartition {
                partition: Partition::single_floor(["A", "B", "C", "D"]),
                score: 0.0,
                at: at - 1.0,
            },
            FloorPartition { partition: to, score: 0.0, at },
        )
    }

    #[test]
    fn latency_matches_exact_partition_within_window() {
        let detected = vec![change_at(
            63.0,
            Partition::from_blocks(vec![vec!["A", "B"], vec!["C", "D"]]).unwrap(),
        )];
        let entries = schism_latency(&truth_pair(), &detected, 30.0);
        assert_eq!(entries.len(), 1);
        assert_relative_eq!(entries[0].latency.unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn latency_without_detections_is_missed() {
        let entries = schism_latency::<f64>(&truth_pair(), &[], 30.0);
        assert_eq!(entries.len(), 1);
        assert!(entries[0].latency.is_none());
        assert!(entries[0].detect_time.is_none());
    }

    #[test]
    fn detection_before_the_change_never_matches() {
        let detected = vec![change_at(
            55.0,
            Partition::from_blocks(vec![vec!["A", "B"], vec!["C", "D"]]).unwrap(),
        )];
        let entries = schism_latency(&truth_pair(), &detected, 30.0);
        assert!(entries[0].latency.is_none());
    }

    #[test]
    fn constant_single_floor_evaluates_to_perfect_accuracy() {
        let trace = Trace {
            participants: ["A", "B"].into_iter().map(ParticipantId::new).collect(),
            events: vec![VadEvent::new("A", 0.0, 1.0), VadEvent::new("B", 1.2, 2.2)],
            duration: 10.0,
            ground_truth: Some(vec![TruthEntry {
                time: 0.0,
                floors: Partition::single_floor(["A", "B"]),
            }]),
        };
        let report = evaluate(&trace, &GapModel::default(), &EvalConfig::default()).unwrap();
        assert_relative_eq!(report.pairwise_accuracy, 1.0);
        assert!(report.schism_latencies.is_empty());
    }

    #[test]
    fn evaluate_is_deterministic() {
        let mut config = SimConfig::<f64>::new(4, 120.0, 3);
        config.schedule = vec![(
            60.0,
            Partition::from_blocks(vec![vec!["A", "B"], vec!["C", "D"]]).unwrap(),
        )];
        let trace = generate_trace(&config).unwrap();
        let a = evaluate(&trace, &GapModel::default(), &EvalConfig::default()).unwrap();
        let b = evaluate(&trace, &GapModel::default(), &EvalConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn summary_equals_time_weighted_mean() {
        let mut config = SimConfig::<f64>::new(4, 90.0, 5);
        config.schedule = vec![(
            45.0,
            Partition::from_blocks(vec![vec!["A", "B"], vec!["C", "D"]]).unwrap(),
        )];
        let trace = generate_trace(&config).unwrap();
        let report = evaluate(&trace, &GapModel::default(), &EvalConfig::default()).unwrap();
        assert_relative_eq!(
            report.pairwise_accuracy,
            time_weighted_mean(&report.per_tick_accuracy).unwrap(),
            epsilon = 1e-12
        );
    }
}
