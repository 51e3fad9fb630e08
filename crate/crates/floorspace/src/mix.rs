//! Per-listener gain matrices realizing each participant's customized mix:
//! same-floor sources enhanced, other floors attenuated, with smooth ramping
//! between targets.

use thiserror::Error;

use crate::model::{Partition, ParticipantId};
use crate::scalar::{lit, Float};

/// Linear amplitude levels in `[0, 1]` for every (listener, source) pair.
/// Self-gain is fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix<T = f64> {
    participants: Vec<ParticipantId>,
    gains: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixConfig<T = f64> {
    /// Level for sources sharing the listener's floor.
    pub same_gain: T,
    /// Level for sources in other floors; nonzero so other floors can still
    /// be understood with effort.
    pub other_gain: T,
    /// Maximum level change per tick.
    pub ramp: T,
}

impl<T: Float> Default for MixConfig<T> {
    fn default() -> Self {
        MixConfig { same_gain: T::one(), other_gain: lit(0.25), ramp: lit(0.1) }
    }
}

impl<T: Float> MixConfig<T> {
    pub fn validate(&self) -> Result<(), MixError> {
        let ok = T::zero() <= self.other_gain
            && self.other_gain <= self.same_gain
            && self.same_gain <= T::one()
            && self.ramp > T::zero();
        if ok {
            Ok(())
        } else {
            Err(MixError::InvalidConfig)
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MixError {
    #[error("gain matrices cover different participant sets")]
    ParticipantMismatch,
    #[error("mix config requires 0 <= other_gain <= same_gain <= 1 and ramp > 0")]
    InvalidConfig,
}

impl<T: Float> GainMatrix<T> {
    /// Participants, in canonical order.
    pub fn participants(&self) -> &[ParticipantId] {
        &self.participants
    }

    pub fn gain(&self, listener: &ParticipantId, source: &ParticipantId) -> Option<T> {
        let l = self.participants.iter().position(|p| p == listener)?;
        let s = self.participants.iter().position(|p| p == source)?;
        Some(self.gains[l * self.participants.len() + s])
    }

    /// Rows of the matrix: `(listener, [(source, level)...])`.
    pub fn rows(&self) -> impl Iterator<Item = (&ParticipantId, Vec<(&ParticipantId, T)>)> {
        let n = self.participants.len();
        self.participants.iter().enumerate().map(move |(l, listener)| {
            let row = self
                .participants
                .iter()
                .enumerate()
                .filter(move |(s, _)| *s != l)
                .map(move |(s, source)| (source, self.gains[l * n + s]))
                .collect();
            (listener, row)
        })
    }

    fn entries(&self) -> &[T] {
        &self.gains
    }
}

/// The gain matrix a partition calls for: `same_gain` within a floor,
/// `other_gain` across floors, zero on the diagonal.
pub fn target_gains<T: Float>(partition: &Partition, config: &MixConfig<T>) -> GainMatrix<T> {
    let participants: Vec<ParticipantId> = partition.participants().cloned().collect();
    let mut sorted = participants;
    sorted.sort();
    let n = sorted.len();
    let mut gains = vec![T::zero(); n * n];
    for (l, listener) in sorted.iter().enumerate() {
        for (s, source) in sorted.iter().enumerate() {
            if l == s {
                continue;
            }
            gains[l * n + s] = if partition.same_block(listener, source) {
                config.same_gain
            } else {
                config.other_gain
            };
        }
    }
    GainMatrix { participants: sorted, gains }
}

/// Moves every entry toward the target by at most `ramp`, clamped to
/// `[0, 1]`; entries already at target stay fixed.
pub fn ramp_step<T: Float>(
    current: &GainMatrix<T>,
    target: &GainMatrix<T>,
    config: &MixConfig<T>,
) -> Result<GainMatrix<T>, MixError> {
    if current.participants != target.participants {
        return Err(MixError::ParticipantMismatch);
    }
    let gains = current
        .entries()
        .iter()
        .zip(target.entries())
        .map(|(&c, &t)| {
            let step = (t - c).abs().min(config.ramp);
            let moved = if t > c { c + step } else { c - step };
            moved.max(T::zero()).min(T::one())
        })
        .collect();
    Ok(GainMatrix { participants: current.participants.clone(), gains })
}
