//! Floor inference: score candidate partitions of the participants against
//! same-floor vs different-floor gap models, search for the best partition,
//! and track it over time with hysteresis, emitting schism/merge events.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::features::TransitionSample;
use crate::model::{Partition, ParticipantId};
use crate::scalar::{lit, Float};

/// Gaussian over signed gaps, the timing signature of a shared floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian<T = f64> {
    pub mean: T,
    pub sd: T,
}

impl<T: Float> Gaussian<T> {
    pub fn log_density(&self, x: T) -> T {
        let z = (x - self.mean) / self.sd;
        let half = lit::<T>(0.5);
        -(self.sd * T::TAU().sqrt()).ln() - half * z * z
    }
}

/// Uniform density over `[lo, hi]`, the timing signature of speakers who do
/// not orient to one another's turn-taking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformRange<T = f64> {
    pub lo: T,
    pub hi: T,
}

impl<T: Float> UniformRange<T> {
    /// Out-of-support gaps score at the density of a 3x widened support
    /// rather than negative infinity, so a single outlier cannot veto a
    /// partition.
    pub fn log_density(&self, x: T) -> T {
        let width = self.hi - self.lo;
        if x >= self.lo && x <= self.hi {
            -width.ln()
        } else {
            -(width * lit::<T>(3.0)).ln()
        }
    }
}

/// Pre-learned gap statistics for same-floor and different-floor speaker
/// pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapModel<T = f64> {
    pub same_floor: Gaussian<T>,
    pub diff_floor: UniformRange<T>,
}

impl<T: Float> Default for GapModel<T> {
    fn default() -> Self {
        GapModel {
            same_floor: Gaussian { mean: lit(0.2), sd: lit(0.15) },
            diff_floor: UniformRange { lo: lit(-2.0), hi: lit(10.0) },
        }
    }
}

impl<T: Float> GapModel<T> {
    pub fn validate(&self) -> Result<(), FloorError> {
        if !(self.same_floor.sd > T::zero()) {
            return Err(FloorError::InvalidModel("same_floor sd must be positive".into()));
        }
        if !(self.diff_floor.hi > self.diff_floor.lo) {
            return Err(FloorError::InvalidModel("diff_floor requires hi > lo".into()));
        }
        Ok(())
    }
}

/// A scored partition of the participants at a point in time. The score is a
/// log-likelihood in nats over whatever samples were used to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPartition<T = f64> {
    pub partition: Partition,
    pub score: T,
    pub at: T,
}

/// How a published partition changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeKind {
    Schism,
    Merge,
    Reshuffle,
}

/// A published-partition switch. `kind` follows the block-count rule by
/// construction: schism iff the count increased, merge iff it decreased.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorChange<T = f64> {
    pub at: T,
    pub before: FloorPartition<T>,
    pub after: FloorPartition<T>,
    pub kind: ChangeKind,
}

impl<T: Float> FloorChange<T> {
    pub fn new(at: T, before: FloorPartition<T>, after: FloorPartition<T>) -> Self {
        let kind = match after.partition.block_count().cmp(&before.partition.block_count()) {
            std::cmp::Ordering::Greater => ChangeKind::Schism,
            std::cmp::Ordering::Less => ChangeKind::Merge,
            std::cmp::Ordering::Equal => ChangeKind::Reshuffle,
        };
        FloorChange { at, before, after, kind }
    }
}

#[derive(Debug, Error)]
pub enum FloorError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("sample references participant {0} not in the partition")]
    UnknownParticipant(ParticipantId),
    #[error("exhaustive search supports at most {max} participants, got {count}")]
    TooManyParticipants { count: usize, max: usize },
    #[error("participant set must be non-empty")]
    NoParticipants,
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Largest participant set for exhaustive (Bell-number) enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 10;

/// Active-set size up to which `InferMethod::Auto` enumerates exhaustively.
pub const AUTO_EXHAUSTIVE_LIMIT: usize = 6;

/// Partition search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InferMethod {
    Exhaustive,
    Greedy,
    /// Exhaustive up to [`AUTO_EXHAUSTIVE_LIMIT`] participants, greedy above.
    #[default]
    Auto,
}

/// Maximum-likelihood fit: a Gaussian over the same-floor gaps (population
/// standard deviation) and a uniform over the different-floor gap range,
/// widened by 10% of the range on each side.
pub fn fit_models<T: Float>(labeled: &[(T, bool)]) -> Result<GapModel<T>, FloorError> {
    let same: Vec<T> = labeled.iter().filter(|(_, s)| *s).map(|(g, _)| *g).collect();
    let diff: Vec<T> = labeled.iter().filter(|(_, s)| !*s).map(|(g, _)| *g).collect();

    if same.len() < 2 {
        return Err(FloorError::InsufficientData(format!(
            "need at least 2 same-floor samples, got {}",
            same.len()
        )));
    }
    if diff.len() < 2 {
        return Err(FloorError::InsufficientData(format!(
            "need at least 2 different-floor samples, got {}",
            diff.len()
        )));
    }

    let n = T::from_usize(same.len()).unwrap();
    let mean = same.iter().fold(T::zero(), |acc, &g| acc + g) / n;
    let var = same.iter().fold(T::zero(), |acc, &g| acc + (g - mean) * (g - mean)) / n;
    let sd = var.sqrt();
    if sd == T::zero() {
        return Err(FloorError::DegenerateData("same-floor samples are all identical".into()));
    }

    let lo = diff.iter().cloned().fold(T::infinity(), T::min);
    let hi = diff.iter().cloned().fold(T::neg_infinity(), T::max);
    if hi == lo {
        return Err(FloorError::DegenerateData(
            "different-floor samples are all identical".into(),
        ));
    }
    let pad = (hi - lo) * lit::<T>(0.1);

    Ok(GapModel {
        same_floor: Gaussian { mean, sd },
        diff_floor: UniformRange { lo: lo - pad, hi: hi + pad },
    })
}

/// Log-likelihood of the samples under the partition: each gap scores under
/// the same-floor density when prior and next share a block, otherwise under
/// the different-floor density. Summation is in sample order.
pub fn score_partition<T: Float>(
    samples: &[TransitionSample<T>],
    partition: &Partition,
    model: &GapModel<T>,
) -> Result<T, FloorError> {
    let mut total = T::zero();
    for s in samples {
        let a = partition
            .block_of(&s.prior)
            .ok_or_else(|| FloorError::UnknownParticipant(s.prior.clone()))?;
        let b = partition
            .block_of(&s.next)
            .ok_or_else(|| FloorError::UnknownParticipant(s.next.clone()))?;
        total = total
            + if a == b {
                model.same_floor.log_density(s.gap)
            } else {
                model.diff_floor.log_density(s.gap)
            };
    }
    Ok(total)
}

/// Per-sample terms in the participant-index space, shared by the search
/// strategies so every candidate is scored through the identical arithmetic
/// as [`score_partition`].
struct IndexedSamples<T> {
    /// (prior index, next index, same-floor term, diff-floor term), in
    /// sample order.
    terms: Vec<(usize, usize, T, T)>,
}

impl<T: Float> IndexedSamples<T> {
    fn build(
        samples: &[TransitionSample<T>],
        order: &[ParticipantId],
        model: &GapModel<T>,
    ) -> Result<Self, FloorError> {
        let index: BTreeMap<&ParticipantId, usize> =
            order.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let mut terms = Vec::with_capacity(samples.len());
        for s in samples {
            let a = *index
                .get(&s.prior)
                .ok_or_else(|| FloorError::UnknownParticipant(s.prior.clone()))?;
            let b = *index
                .get(&s.next)
                .ok_or_else(|| FloorError::UnknownParticipant(s.next.clone()))?;
            terms.push((
                a,
                b,
                model.same_floor.log_density(s.gap),
                model.diff_floor.log_density(s.gap),
            ));
        }
        Ok(IndexedSamples { terms })
    }

    /// Scores a block assignment; bitwise identical to `score_partition` on
    /// the corresponding `Partition`.
    fn score(&self, assignment: &[usize]) -> T {
        let mut total = T::zero();
        for &(a, b, same, diff) in &self.terms {
            total = total + if assignment[a] == assignment[b] { same } else { diff };
        }
        total
    }
}

/// Canonical comparison key for tie-breaking: blocks as sorted index lists,
/// ordered by smallest member.
fn canonical_key(assignment: &[usize]) -> Vec<Vec<usize>> {
    let blocks = assignment.iter().max().map_or(0, |m| m + 1);
    let mut key = vec![Vec::new(); blocks];
    for (i, &b) in assignment.iter().enumerate() {
        key[b].push(i);
    }
    key.sort();
    key
}

/// Visits every set partition of `n` elements as a restricted-growth string.
fn for_each_partition(n: usize, mut f: impl FnMut(&[usize], usize)) {
    fn recurse(
        i: usize,
        n: usize,
        used: usize,
        assignment: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize], usize),
    ) {
        if i == n {
            f(assignment, used);
            return;
        }
        for b in 0..=used {
            assignment.push(b);
            recurse(i + 1, n, used.max(b + 1), assignment, f);
            assignment.pop();
        }
    }
    if n == 0 {
        f(&[], 0);
        return;
    }
    let mut assignment = Vec::with_capacity(n);
    recurse(0, n, 0, &mut assignment, &mut f);
}

fn assignment_to_partition(assignment: &[usize], order: &[ParticipantId]) -> Partition {
    let blocks = assignment.iter().max().map_or(0, |m| m + 1);
    let mut sets: Vec<Vec<ParticipantId>> = vec![Vec::new(); blocks];
    for (i, &b) in assignment.iter().enumerate() {
        sets[b].push(order[i].clone());
    }
    Partition::from_blocks(sets).expect("restricted-growth assignment is a valid partition")
}

fn exhaustive_argmax<T: Float>(indexed: &IndexedSamples<T>, n: usize) -> (Vec<usize>, T) {
    let mut best: Option<(Vec<usize>, T, usize, Vec<Vec<usize>>)> = None;
    for_each_partition(n, |assignment, blocks| {
        let score = indexed.score(assignment);
        let replace = match &best {
            None => true,
            Some((_, best_score, best_blocks, best_key)) => {
                score > *best_score
                    || (score == *best_score
                        && (blocks < *best_blocks
                            || (blocks == *best_blocks && canonical_key(assignment) < *best_key)))
            }
        };
        if replace {
            best = Some((assignment.to_vec(), score, blocks, canonical_key(assignment)));
        }
    });
    let (assignment, score, _, _) = best.expect("at least one partition exists");
    (assignment, score)
}

/// Greedy agglomeration: start from singletons and repeatedly apply the
/// single block merge that most increases the score, until no merge helps.
/// Merge deltas come from per-pair aggregates; ties prefer the canonically
/// first block pair.
fn greedy_argmax<T: Float>(indexed: &IndexedSamples<T>, n: usize) -> (Vec<usize>, T) {
    // pair_delta[a][b]: score change of putting a and b in one block, summed
    // over samples in sample order.
    let mut pair_delta = vec![vec![T::zero(); n]; n];
    for &(a, b, same, diff) in &indexed.terms {
        if a != b {
            let (x, y) = if a < b { (a, b) } else { (b, a) };
            pair_delta[x][y] = pair_delta[x][y] + (same - diff);
        }
    }

    let mut blocks: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(T, usize, usize)> = None;
        for i in 0..blocks.len() {
            for j in (i + 1)..blocks.len() {
                let mut delta = T::zero();
                for &a in &blocks[i] {
                    for &b in &blocks[j] {
                        let (x, y) = if a < b { (a, b) } else { (b, a) };
                        delta = delta + pair_delta[x][y];
                    }
                }
                if delta > T::zero() && best.map_or(true, |(d, _, _)| delta > d) {
                    best = Some((delta, i, j));
                }
            }
        }
        match best {
            Some((_, i, j)) => {
                let merged = blocks.remove(j);
                blocks[i].extend(merged);
            }
            None => break,
        }
    }

    let mut assignment = vec![0usize; n];
    blocks.sort_by_key(|b| b.iter().min().copied());
    for (label, block) in blocks.iter().enumerate() {
        for &i in block {
            assignment[i] = label;
        }
    }
    let score = indexed.score(&assignment);
    (assignment, score)
}

/// Finds the partition of `participants` maximizing [`score_partition`] over
/// the samples. Exhaustive search enumerates all set partitions and breaks
/// score ties by preferring fewer blocks, then the canonically smallest
/// partition; greedy agglomerates from singletons. The returned score is the
/// log-likelihood of the winner over `samples`; `at` is left at zero for the
/// caller to stamp.
pub fn infer_partition<T: Float>(
    samples: &[TransitionSample<T>],
    participants: &BTreeSet<ParticipantId>,
    model: &GapModel<T>,
    method: InferMethod,
) -> Result<FloorPartition<T>, FloorError> {
    if participants.is_empty() {
        return Err(FloorError::NoParticipants);
    }
    let order: Vec<ParticipantId> = participants.iter().cloned().collect();
    let n = order.len();
    let exhaustive = match method {
        InferMethod::Exhaustive => {
            if n > EXHAUSTIVE_LIMIT {
                return Err(FloorError::TooManyParticipants { count: n, max: EXHAUSTIVE_LIMIT });
            }
            true
        }
        InferMethod::Greedy => false,
        InferMethod::Auto => n <= AUTO_EXHAUSTIVE_LIMIT,
    };

    let indexed = IndexedSamples::build(samples, &order, model)?;
    let (assignment, score) =
        if exhaustive { exhaustive_argmax(&indexed, n) } else { greedy_argmax(&indexed, n) };

    Ok(FloorPartition {
        partition: assignment_to_partition(&assignment, &order),
        score,
        at: T::zero(),
    })
}

/// Hysteresis configuration for [`FloorTracker`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackConfig<T = f64> {
    /// Re-inference period, seconds.
    pub tick: T,
    /// Evidence window length, seconds.
    pub window: T,
    /// Score advantage (nats) a challenger must sustain before publication.
    pub margin: T,
    /// How long the advantage must hold, seconds.
    pub hold: T,
    pub method: InferMethod,
}

impl<T: Float> Default for TrackConfig<T> {
    fn default() -> Self {
        TrackConfig {
            tick: lit(0.25),
            window: lit(30.0),
            margin: lit(2.0),
            hold: lit(2.0),
            method: InferMethod::Auto,
        }
    }
}

/// One tracker tick: the published partition and, on a switch, the change.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackStep<T = f64> {
    pub partition: FloorPartition<T>,
    pub change: Option<FloorChange<T>>,
}

/// Tracks the published floor partition over a stream of transition samples.
///
/// Every tick the best partition over the evidence window is inferred; the
/// published partition switches only once some differing candidate has
/// out-scored it by at least `margin` continuously for `hold` seconds.
/// Participants with no samples in the window keep their current placement.
/// The initial partition is one all-inclusive floor.
#[derive(Debug, Clone)]
pub struct FloorTracker<T = f64> {
    participants: BTreeSet<ParticipantId>,
    model: GapModel<T>,
    config: TrackConfig<T>,
    window: VecDeque<TransitionSample<T>>,
    current: FloorPartition<T>,
    /// Earliest tick since which every tick saw a differing candidate ahead
    /// by at least the margin.
    challenged_since: Option<T>,
}

impl<T: Float> FloorTracker<T> {
    pub fn new(
        participants: BTreeSet<ParticipantId>,
        model: GapModel<T>,
        config: TrackConfig<T>,
    ) -> Result<Self, FloorError> {
        if participants.is_empty() {
            return Err(FloorError::NoParticipants);
        }
        model.validate()?;
        let initial = Partition::single_floor(participants.iter().cloned());
        Ok(FloorTracker {
            participants,
            model,
            config,
            window: VecDeque::new(),
            current: FloorPartition { partition: initial, score: T::zero(), at: T::zero() },
            challenged_since: None,
        })
    }

    pub fn published(&self) -> &FloorPartition<T> {
        &self.current
    }

    /// Advances to time `t`, absorbing the samples that arrived since the
    /// previous tick, and returns the published partition plus any change.
    pub fn advance(
        &mut self,
        t: T,
        samples: impl IntoIterator<Item = TransitionSample<T>>,
    ) -> Result<TrackStep<T>, FloorError> {
        for s in samples {
            if !self.participants.contains(&s.prior) {
                return Err(FloorError::UnknownParticipant(s.prior));
            }
            if !self.participants.contains(&s.next) {
                return Err(FloorError::UnknownParticipant(s.next));
            }
            self.window.push_back(s);
        }
        let cutoff = t - self.config.window;
        while self.window.front().map_or(false, |s| s.at <= cutoff) {
            self.window.pop_front();
        }

        let window: Vec<TransitionSample<T>> = self.window.iter().cloned().collect();
        let active: BTreeSet<ParticipantId> = window
            .iter()
            .flat_map(|s| [s.prior.clone(), s.next.clone()])
            .collect();

        let candidate = if active.is_empty() {
            self.current.partition.clone()
        } else {
            let inferred =
                infer_partition(&window, &active, &self.model, self.config.method)?;
            self.lift(&inferred.partition, &window)
        };

        let current_score = score_partition(&window, &self.current.partition, &self.model)?;
        let mut change = None;

        if candidate == self.current.partition {
            self.challenged_since = None;
        } else {
            let candidate_score = score_partition(&window, &candidate, &self.model)?;
            if candidate_score - current_score >= self.config.margin {
                let since = self.challenged_since.unwrap_or(t);
                self.challenged_since = Some(since);
                if t - since >= self.config.hold {
                    let before = self.current.clone();
                    let after =
                        FloorPartition { partition: candidate, score: candidate_score, at: t };
                    change = Some(FloorChange::new(t, before, after.clone()));
                    self.current = after;
                    self.challenged_since = None;
                }
            } else {
                self.challenged_since = None;
            }
        }

        if change.is_none() {
            self.current.score = current_score;
            self.current.at = t;
        }
        Ok(TrackStep { partition: self.current.clone(), change })
    }

    /// Extends a partition of the active participants to the full roster:
    /// silent participants stay with their current block. When a current
    /// block's active members are split, its silent members follow the
    /// majority; ties follow the co-member with the most recent sample
    /// (preferring the sample's `next` role), then canonical order.
    fn lift(&self, active_partition: &Partition, window: &[TransitionSample<T>]) -> Partition {
        let mut recency: BTreeMap<&ParticipantId, (T, bool)> = BTreeMap::new();
        for s in window {
            let e = recency.entry(&s.prior).or_insert((s.at, false));
            if s.at >= e.0 {
                *e = (s.at, false);
            }
            let e = recency.entry(&s.next).or_insert((s.at, true));
            if s.at >= e.0 {
                *e = (s.at, true);
            }
        }

        let mut blocks: Vec<BTreeSet<ParticipantId>> =
            active_partition.blocks().iter().cloned().collect();
        let mut residuals: Vec<BTreeSet<ParticipantId>> = Vec::new();

        for current_block in self.current.partition.blocks() {
            let silent: BTreeSet<ParticipantId> = current_block
                .iter()
                .filter(|p| active_partition.block_of(p).is_none())
                .cloned()
                .collect();
            if silent.is_empty() {
                continue;
            }
            let actives: Vec<&ParticipantId> =
                current_block.iter().filter(|p| active_partition.block_of(p).is_some()).collect();
            if actives.is_empty() {
                residuals.push(silent);
                continue;
            }

            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for p in &actives {
                *counts.entry(active_partition.block_of(p).unwrap()).or_insert(0) += 1;
            }
            let max_count = counts.values().copied().max().unwrap();
            let tied: BTreeSet<usize> = counts
                .iter()
                .filter(|(_, &c)| c == max_count)
                .map(|(&b, _)| b)
                .collect();
            let target = if tied.len() == 1 {
                *tied.iter().next().unwrap()
            } else {
                // Follow the contested co-member with the freshest speech.
                let chosen = actives
                    .iter()
                    .filter(|p| tied.contains(&active_partition.block_of(p).unwrap()))
                    .max_by(|a, b| {
                        let ra = recency.get(*a).copied().unwrap_or((T::neg_infinity(), false));
                        let rb = recency.get(*b).copied().unwrap_or((T::neg_infinity(), false));
                        ra.0
                            .partial_cmp(&rb.0)
                            .unwrap()
                            .then(ra.1.cmp(&rb.1))
                            .then(b.cmp(a))
                    })
                    .unwrap();
                active_partition.block_of(chosen).unwrap()
            };
            blocks[target].extend(silent);
        }

        blocks.extend(residuals);
        Partition::from_blocks(blocks).expect("lifted blocks remain disjoint")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(prior: &str, next: &str, gap: f64, at: f64) -> TransitionSample {
        TransitionSample { prior: prior.into(), next: next.into(), gap, at }
    }

    fn ids(names: &[&str]) -> BTreeSet<ParticipantId> {
        names.iter().map(|n| ParticipantId::new(*n)).collect()
    }

    #[test]
    fn fit_recovers_mean_and_population_sd() {
        let labeled = vec![(0.1, true), (0.2, true), (0.3, true), (-1.0, false), (5.0, false)];
        let model = fit_models(&labeled).unwrap();
        assert_relative_eq!(model.same_floor.mean, 0.2, epsilon = 1e-12);
        // population sd of {0.1, 0.2, 0.3} computed by hand
        assert_relative_eq!(model.same_floor.sd, (0.02f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn fit_widens_diff_floor_range_by_ten_percent() {
        let labeled = vec![(0.1, true), (0.2, true), (-1.0, false), (5.0, false)];
        let model = fit_models(&labeled).unwrap();
        assert_relative_eq!(model.diff_floor.lo, -1.6, epsilon = 1e-12);
        assert_relative_eq!(model.diff_floor.hi, 5.6, epsilon = 1e-12);
    }

    #[test]
    fn fit_rejects_single_same_floor_sample() {
        let labeled = vec![(0.1, true), (-1.0, false), (5.0, false)];
        assert!(matches!(fit_models(&labeled), Err(FloorError::InsufficientData(_))));
    }

    #[test]
    fn fit_rejects_identical_same_floor_samples() {
        let labeled = vec![(0.2, true), (0.2, true), (-1.0, false), (5.0, false)];
        assert!(matches!(fit_models(&labeled), Err(FloorError::DegenerateData(_))));
    }

    #[test]
    fn score_of_no_samples_is_zero() {
        let partition = Partition::single_floor(["A", "B"]);
        let score = score_partition::<f64>(&[], &partition, &GapModel::default()).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn score_matches_independent_gaussian_density() {
        let model = GapModel {
            same_floor: Gaussian { mean: 0.2, sd: 0.1 },
            diff_floor: UniformRange { lo: -2.0, hi: 10.0 },
        };
        let partition = Partition::single_floor(["A", "B"]);
        let samples = vec![sample("A", "B", 0.2, 1.0)];
        let score = score_partition(&samples, &partition, &model).unwrap();
        // independent route: ln of the density computed from the pdf formula
        let expected = (1.0 / (0.1 * (2.0 * std::f64::consts::PI).sqrt())).ln();
        assert_relative_eq!(score, expected, epsilon = 1e-12);
        assert_relative_eq!(score, 1.3836465597893728, epsilon = 1e-12);
    }

    #[test]
    fn score_rejects_unknown_participant() {
        let partition = Partition::single_floor(["A", "B"]);
        let samples = vec![sample("A", "C", 0.2, 1.0)];
        let err = score_partition(&samples, &partition, &GapModel::default()).unwrap_err();
        assert!(matches!(err, FloorError::UnknownParticipant(p) if p == "C".into()));
    }

    #[test]
    fn equal_branch_densities_make_all_partitions_tie() {
        // Pick the gap where the Gaussian density equals the uniform density,
        // so the same/diff branch choice cannot matter.
        let model = GapModel {
            same_floor: Gaussian { mean: 0.2, sd: 0.1 },
            diff_floor: UniformRange { lo: -2.0, hi: 10.0 },
        };
        let g =
            0.2 + 0.1 * (2.0 * (12.0 / (0.1 * (2.0 * std::f64::consts::PI).sqrt())).ln()).sqrt();
        let samples = vec![sample("A", "B", g, 1.0), sample("B", "C", g, 2.0)];
        let participants = ids(&["A", "B", "C"]);
        let mut scores = Vec::new();
        for blocks in [
            vec![vec!["A", "B", "C"]],
            vec![vec!["A", "B"], vec!["C"]],
            vec![vec!["A"], vec!["B"], vec!["C"]],
        ] {
            let p = Partition::from_blocks(blocks).unwrap();
            assert!(p.is_partition_of(&participants));
            scores.push(score_partition(&samples, &p, &model).unwrap());
        }
        for s in &scores[1..] {
            assert_relative_eq!(*s, scores[0], epsilon = 1e-9);
        }
    }

    #[test]
    fn infer_single_participant_is_its_own_floor() {
        let fp = infer_partition::<f64>(
            &[],
            &ids(&["A"]),
            &GapModel::default(),
            InferMethod::Exhaustive,
        )
        .unwrap();
        assert_eq!(fp.partition, Partition::single_floor(["A"]));
        assert_eq!(fp.score, 0.0);
    }

    #[test]
    fn infer_separates_two_tight_pairs() {
        let model = GapModel {
            same_floor: Gaussian { mean: 0.2, sd: 0.1 },
            diff_floor: UniformRange { lo: -2.0, hi: 10.0 },
        };
        let mut samples = Vec::new();
        for i in 0..5 {
            let at = i as f64;
            samples.push(sample("A", "B", 0.2, at));
            samples.push(sample("C", "D", 0.2, at + 0.5));
        }
        samples.push(sample("A", "C", 3.0, 5.5));
        let fp = infer_partition(
            &samples,
            &ids(&["A", "B", "C", "D"]),
            &model,
            InferMethod::Exhaustive,
        )
        .unwrap();
        assert_eq!(fp.partition, Partition::from_blocks(vec![vec!["A", "B"], vec!["C", "D"]]).unwrap());
    }

    #[test]
    fn infer_keeps_tightly_conversing_pair_together() {
        let model = GapModel {
            same_floor: Gaussian { mean: 0.2, sd: 0.1 },
            diff_floor: UniformRange { lo: -2.0, hi: 10.0 },
        };
        let samples: Vec<_> = (0..10).map(|i| sample("A", "B", 0.2, i as f64)).collect();
        let fp =
            infer_partition(&samples, &ids(&["A", "B"]), &model, InferMethod::Exhaustive).unwrap();
        assert_eq!(fp.partition, Partition::single_floor(["A", "B"]));
        // same-floor log-density beats the uniform alternative per sample
        assert_relative_eq!(fp.score, 10.0 * 1.3836465597893728, epsilon = 1e-9);
    }

    #[test]
    fn infer_ties_prefer_fewer_blocks() {
        // No samples: every partition scores zero, so the single floor wins.
        let fp = infer_partition::<f64>(
            &[],
            &ids(&["A", "B", "C"]),
            &GapModel::default(),
            InferMethod::Exhaustive,
        )
        .unwrap();
        assert_eq!(fp.partition, Partition::single_floor(["A", "B", "C"]));
    }

    #[test]
    fn infer_rejects_oversized_exhaustive() {
        let names: Vec<String> = (0..11).map(|i| format!("p{i:02}")).collect();
        let participants: BTreeSet<ParticipantId> =
            names.iter().map(|n| ParticipantId::new(n.clone())).collect();
        let err = infer_partition::<f64>(
            &[],
            &participants,
            &GapModel::default(),
            InferMethod::Exhaustive,
        )
        .unwrap_err();
        assert!(matches!(err, FloorError::TooManyParticipants { count: 11, max: 10 }));
    }

    #[test]
    fn tracker_publishes_initial_single_floor_without_samples() {
        let mut tracker = FloorTracker::new(
            ids(&["A", "B", "C"]),
            GapModel::default(),
            TrackConfig::default(),
        )
        .unwrap();
        for k in 1..=20 {
            let t = 0.25 * k as f64;
            let step = tracker.advance(t, []).unwrap();
            assert_eq!(step.partition.partition, Partition::single_floor(["A", "B", "C"]));
            assert!(step.change.is_none());
        }
    }

    #[test]
    fn tracker_switches_once_after_hold_with_split_evidence() {
        let model = GapModel {
            same_floor: Gaussian { mean: 0.2, sd: 0.1 },
            diff_floor: UniformRange { lo: -2.0, hi: 10.0 },
        };
        let mut tracker =
            FloorTracker::new(ids(&["A", "B", "C", "D"]), model, TrackConfig::default()).unwrap();
        let mut changes = Vec::new();
        for k in 1..=40 {
            let t = 0.25 * k as f64;
            let batch = vec![
                sample("A", "B", 0.2, t),
                sample("C", "D", 0.2, t),
                sample("A", "C", 3.0, t),
            ];
            let step = tracker.advance(t, batch).unwrap();
            if let Some(c) = step.change {
                changes.push(c);
            }
        }
        assert_eq!(changes.len(), 1);
        assert_eq!(changes[0].kind, ChangeKind::Schism);
        // evidence starts at the first tick; the switch may not precede hold
        assert!(changes[0].at >= 2.0);
        assert_relative_eq!(changes[0].at, 0.25 + 2.0);
        assert_eq!(
            changes[0].after.partition,
            Partition::from_blocks(vec![vec!["A", "B"], vec!["C", "D"]]).unwrap()
        );
    }

    #[test]
    fn tracker_holds_still_below_margin() {
        // Alternating mild evidence never reaches the margin, so the initial
        // partition stands.
        let mut tracker = FloorTracker::new(
            ids(&["A", "B", "C", "D"]),
            GapModel::default(),
            TrackConfig { window: 0.25, ..TrackConfig::default() },
        )
        .unwrap();
        for k in 1..=80 {
            let t = 0.25 * k as f64;
            let batch = if k % 2 == 0 {
                vec![
                    sample("A", "B", 0.46, t),
                    sample("C", "D", 0.46, t),
                    sample("A", "C", 0.6, t),
                    sample("B", "D", 0.6, t),
                ]
            } else {
                vec![
                    sample("A", "C", 0.46, t),
                    sample("B", "D", 0.46, t),
                    sample("A", "B", 0.6, t),
                    sample("C", "D", 0.6, t),
                ]
            };
            let step = tracker.advance(t, batch).unwrap();
            assert!(step.change.is_none());
            assert_eq!(step.partition.partition, Partition::single_floor(["A", "B", "C", "D"]));
        }
    }

    #[test]
    fn change_kind_follows_block_count() {
        let single = FloorPartition {
            partition: Partition::single_floor(["A", "B"]),
            score: 0.0,
            at: 0.0,
        };
        let split = FloorPartition {
            partition: Partition::singletons(["A", "B"]),
            score: 0.0,
            at: 1.0,
        };
        assert_eq!(FloorChange::new(1.0, single.clone(), split.clone()).kind, ChangeKind::Schism);
        assert_eq!(FloorChange::new(1.0, split, single).kind, ChangeKind::Merge);
    }
}
