//! Independently coded reference implementations used as oracles. These
//! deliberately avoid the library's search and scoring internals: partitions
//! are enumerated by recursive block assignment and scored through the plain
//! probability-density formulas.

use std::collections::BTreeSet;

use floorspace::features::TransitionSample;
use floorspace::floor::GapModel;
use floorspace::model::{Partition, ParticipantId};

/// Log-density of a Gaussian, written as ln of the pdf rather than the
/// expanded form the library uses.
pub fn gaussian_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let pdf = (-((x - mean) * (x - mean)) / (2.0 * sd * sd)).exp()
        / (sd * (2.0 * std::f64::consts::PI).sqrt());
    pdf.ln()
}

/// Uniform log-density with the 3x-widened out-of-support floor.
pub fn uniform_log_pdf(x: f64, lo: f64, hi: f64) -> f64 {
    if x >= lo && x <= hi {
        (1.0 / (hi - lo)).ln()
    } else {
        (1.0 / (3.0 * (hi - lo))).ln()
    }
}

/// Reference score: sum over samples in order, same-floor density when the
/// pair shares a block.
pub fn oracle_score(
    samples: &[TransitionSample],
    blocks: &[Vec<ParticipantId>],
    model: &GapModel,
) -> f64 {
    let block_of = |id: &ParticipantId| blocks.iter().position(|b| b.contains(id));
    let mut total = 0.0;
    for s in samples {
        let a = block_of(&s.prior).expect("prior in partition");
        let b = block_of(&s.next).expect("next in partition");
        total += if a == b {
            gaussian_log_pdf(s.gap, model.same_floor.mean, model.same_floor.sd)
        } else {
            uniform_log_pdf(s.gap, model.diff_floor.lo, model.diff_floor.hi)
        };
    }
    total
}

/// Every set partition of `ids`, built by assigning each id to an existing
/// block or a new one.
pub fn enumerate_partitions(ids: &[ParticipantId]) -> Vec<Vec<Vec<ParticipantId>>> {
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<ParticipantId>> = Vec::new();
    fn recurse(
        i: usize,
        ids: &[ParticipantId],
        blocks: &mut Vec<Vec<ParticipantId>>,
        out: &mut Vec<Vec<Vec<ParticipantId>>>,
    ) {
        if i == ids.len() {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(ids[i].clone());
            recurse(i + 1, ids, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![ids[i].clone()]);
        recurse(i + 1, ids, blocks, out);
        blocks.pop();
    }
    recurse(0, ids, &mut blocks, &mut out);
    out
}

/// Canonical comparison key: blocks as sorted member lists, ordered by their
/// smallest member.
fn canonical(blocks: &[Vec<ParticipantId>]) -> Vec<Vec<ParticipantId>> {
    let mut key: Vec<Vec<ParticipantId>> = blocks
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.sort();
            b
        })
        .collect();
    key.sort();
    key
}

/// Reference argmax with the documented tie-break: highest score, then fewer
/// blocks, then canonically smallest.
pub fn oracle_argmax(
    samples: &[TransitionSample],
    participants: &BTreeSet<ParticipantId>,
    model: &GapModel,
) -> (Partition, f64) {
    let ids: Vec<ParticipantId> = participants.iter().cloned().collect();
    let mut best: Option<(Vec<Vec<ParticipantId>>, f64)> = None;
    for candidate in enumerate_partitions(&ids) {
        let score = oracle_score(samples, &candidate, model);
        let replace = match &best {
            None => true,
            Some((cur, cur_score)) => {
                score > *cur_score
                    || (score == *cur_score
                        && (candidate.len() < cur.len()
                            || (candidate.len() == cur.len()
                                && canonical(&candidate) < canonical(cur))))
            }
        };
        if replace {
            best = Some((candidate, score));
        }
    }
    let (blocks, score) = best.expect("participants non-empty");
    (Partition::from_blocks(blocks).unwrap(), score)
}

/// Applies a participant-id bijection to a sample stream.
pub fn relabel_samples(
    samples: &[TransitionSample],
    map: impl Fn(&ParticipantId) -> ParticipantId,
) -> Vec<TransitionSample> {
    samples
        .iter()
        .map(|s| TransitionSample {
            prior: map(&s.prior),
            next: map(&s.next),
            gap: s.gap,
            at: s.at,
        })
        .collect()
}

/// Applies a participant-id bijection to a partition.
pub fn relabel_partition(
    partition: &Partition,
    map: impl Fn(&ParticipantId) -> ParticipantId,
) -> Partition {
    Partition::from_blocks(
        partition
            .blocks()
            .iter()
            .map(|b| b.iter().map(&map).collect::<Vec<_>>()),
    )
    .unwrap()
}
