//! Style-switching channel controller: adapts the session between
//! push-to-talk and full-duplex from response-latency and lapse signals,
//! with an optional externally supplied interest score.

use std::collections::BTreeMap;

use crate::features::{Lapse, TransitionSample};
use crate::model::ParticipantId;
use crate::scalar::{lit, Float};

/// Channel operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    PushToTalk,
    FullDuplex,
}

impl ChannelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelMode::PushToTalk => "push_to_talk",
            ChannelMode::FullDuplex => "full_duplex",
        }
    }
}

/// Engagement evidence within the signal window.
#[derive(Debug, Clone, PartialEq)]
pub struct EngagementSignals<T = f64> {
    /// Positive (pause) gaps of transition samples in the window.
    pub recent_gaps: Vec<T>,
    /// Lapses overlapping the window.
    pub lapses: Vec<Lapse<T>>,
    /// Per-participant interest in `[0, 1]`, supplied externally when an
    /// acoustic interest detector is available.
    pub interest: Option<BTreeMap<ParticipantId, T>>,
}

/// Current channel mode plus hysteresis bookkeeping. `pending_tone` is true
/// exactly when the last transition entered full-duplex (the cue to play the
/// "push-to-talk no longer required" tone).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState<T = f64> {
    pub mode: ChannelMode,
    pub since: T,
    pub pending_tone: bool,
}

impl<T: Float> ChannelState<T> {
    /// Session start state: push-to-talk.
    pub fn initial() -> Self {
        ChannelState { mode: ChannelMode::PushToTalk, since: T::zero(), pending_tone: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StyleConfig<T = f64> {
    /// Median response gap below which participants count as engaged.
    pub fast_gap: T,
    /// Gap samples required before a push-to-talk session opens up.
    pub min_samples: usize,
    /// Lapses in the window that demote full-duplex back to push-to-talk.
    pub lapse_count: usize,
    /// Minimum seconds between mode transitions.
    pub dwell: T,
    /// When interest scores are supplied and all reach this level, the
    /// required sample count is halved.
    pub interest_threshold: T,
}

impl<T: Float> Default for StyleConfig<T> {
    fn default() -> Self {
        StyleConfig {
            fast_gap: lit(0.5),
            min_samples: 5,
            lapse_count: 2,
            dwell: lit(10.0),
            interest_threshold: lit(0.8),
        }
    }
}

/// Collects engagement evidence from the window `(t - window, t]`: positive
/// gaps of samples in the window and lapses overlapping it. Interest is
/// absent unless supplied externally.
pub fn engagement_signals<T: Float>(
    samples: &[TransitionSample<T>],
    lapses: &[Lapse<T>],
    t: T,
    window: T,
) -> EngagementSignals<T> {
    let lo = t - window;
    let recent_gaps = samples
        .iter()
        .filter(|s| s.at > lo && s.at <= t && s.gap >= T::zero())
        .map(|s| s.gap)
        .collect();
    let lapses = lapses.iter().filter(|l| l.end > lo && l.start <= t).cloned().collect();
    EngagementSignals { recent_gaps, lapses, interest: None }
}

/// One controller step. In push-to-talk the channel opens to full-duplex when
/// enough recent responses are fast (median strictly below `fast_gap`), the
/// window is lapse-free, and the dwell time has passed; in full-duplex a
/// sustained pattern of lapses reverts it. Any other outcome returns the
/// state with the tone flag cleared.
pub fn update_mode<T: Float>(
    state: &ChannelState<T>,
    signals: &EngagementSignals<T>,
    t: T,
    config: &StyleConfig<T>,
) -> ChannelState<T> {
    let dwell_ok = t - state.since >= config.dwell;
    match state.mode {
        ChannelMode::PushToTalk => {
            let needed = required_samples(signals, config);
            let fast = median(&signals.recent_gaps)
                .map_or(false, |m| m < config.fast_gap);
            if signals.recent_gaps.len() >= needed
                && fast
                && signals.lapses.is_empty()
                && dwell_ok
            {
                return ChannelState { mode: ChannelMode::FullDuplex, since: t, pending_tone: true };
            }
        }
        ChannelMode::FullDuplex => {
            if signals.lapses.len() >= config.lapse_count && dwell_ok {
                return ChannelState {
                    mode: ChannelMode::PushToTalk,
                    since: t,
                    pending_tone: false,
                };
            }
        }
    }
    ChannelState { pending_tone: false, ..*state }
}

/// Uniformly high interest halves the sample requirement (rounding up).
fn required_samples<T: Float>(signals: &EngagementSignals<T>, config: &StyleConfig<T>) -> usize {
    match &signals.interest {
        Some(scores) if !scores.is_empty()
            && scores.values().all(|&v| v >= config.interest_threshold) =>
        {
            config.min_samples.div_ceil(2)
        }
        _ => config.min_samples,
    }
}

fn median<T: Float>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some((sorted[n / 2 - 1] + sorted[n / 2]) / lit(2.0))
    }
}

/// A mode transition record for output streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeChange<T = f64> {
    pub time: T,
    pub mode: ChannelMode,
    pub tone: bool,
}
