//! Line-delimited JSON file formats: traces (header/vad/truth records), gap
//! models, mix-control records, detector output, and evaluation reports.
//! Unknown record types are skipped with a warning so formats can grow.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{DetectStep, EvalReport, LatencyEntry};
use crate::floor::{ChangeKind, FloorChange, GapModel, Gaussian, UniformRange};
use crate::mix::GainMatrix;
use crate::model::{sort_events, Partition, ParticipantId, Trace, TruthEntry, VadEvent};
use crate::scalar::{as_f64, lit, Float};
use crate::style::{ChannelMode, ModeChange};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: record has no \"type\" field")]
    MissingType { line: usize },
    #[error("trace has no header record")]
    MissingHeader,
    #[error("line {line}: duplicate header record")]
    DuplicateHeader { line: usize },
    #[error("line {line}: record precedes the header")]
    RecordBeforeHeader { line: usize },
    #[error("no gap_model record found")]
    MissingModel,
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
}

#[derive(Serialize, Deserialize)]
struct HeaderRec {
    #[serde(rename = "type")]
    kind: String,
    participants: Vec<String>,
    duration: f64,
}

#[derive(Serialize, Deserialize)]
struct VadRec {
    #[serde(rename = "type")]
    kind: String,
    speaker: String,
    start: f64,
    end: f64,
}

#[derive(Serialize, Deserialize)]
struct TruthRec {
    #[serde(rename = "type")]
    kind: String,
    time: f64,
    floors: Vec<Vec<String>>,
}

fn write_line<W: Write, S: Serialize>(w: &mut W, record: &S) -> Result<(), FormatError> {
    serde_json::to_writer(&mut *w, record)
        .map_err(|source| FormatError::Json { line: 0, source })?;
    w.write_all(b"\n")?;
    Ok(())
}

fn floors_to_lists(p: &Partition) -> Vec<Vec<String>> {
    p.blocks()
        .iter()
        .map(|b| b.iter().map(|id| id.as_str().to_string()).collect())
        .collect()
}

/// Writes a trace: header first, then vad and truth records merged in time
/// order (truth records first on ties, so a layout is in force before any
/// event at the same instant).
pub fn write_trace<T: Float, W: Write>(w: &mut W, trace: &Trace<T>) -> Result<(), FormatError> {
    let header = HeaderRec {
        kind: "header".into(),
        participants: trace.participants.iter().map(|p| p.as_str().to_string()).collect(),
        duration: as_f64(trace.duration),
    };
    write_line(w, &header)?;

    let truth: &[TruthEntry<T>] = trace.ground_truth.as_deref().unwrap_or(&[]);
    let mut ti = 0usize;
    for ev in &trace.events {
        while ti < truth.len() && truth[ti].time <= ev.start {
            write_truth(w, &truth[ti])?;
            ti += 1;
        }
        let rec = VadRec {
            kind: "vad".into(),
            speaker: ev.speaker.as_str().to_string(),
            start: as_f64(ev.start),
            end: as_f64(ev.end),
        };
        write_line(w, &rec)?;
    }
    for entry in &truth[ti..] {
        write_truth(w, entry)?;
    }
    Ok(())
}

fn write_truth<T: Float, W: Write>(w: &mut W, entry: &TruthEntry<T>) -> Result<(), FormatError> {
    let rec = TruthRec {
        kind: "truth".into(),
        time: as_f64(entry.time),
        floors: floors_to_lists(&entry.floors),
    };
    write_line(w, &rec)
}

/// Reads a trace, skipping unknown record types with a warning. Events are
/// re-sorted into canonical order; all other validation is left to
/// [`crate::model::validate_trace`].
pub fn read_trace<T: Float, R: BufRead>(r: R) -> Result<Trace<T>, FormatError> {
    let mut header: Option<HeaderRec> = None;
    let mut events: Vec<VadEvent<T>> = Vec::new();
    let mut truth: Vec<TruthEntry<T>> = Vec::new();

    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|source| FormatError::Json { line: line_no, source })?;
        let kind = value
            .get("type")
            .and_then(|v| v.as_str())
            .ok_or(FormatError::MissingType { line: line_no })?
            .to_string();
        match kind.as_str() {
            "header" => {
                if header.is_some() {
                    return Err(FormatError::DuplicateHeader { line: line_no });
                }
                let rec: HeaderRec = serde_json::from_value(value)
                    .map_err(|source| FormatError::Json { line: line_no, source })?;
                header = Some(rec);
            }
            "vad" => {
                if header.is_none() {
                    return Err(FormatError::RecordBeforeHeader { line: line_no });
                }
                let rec: VadRec = serde_json::from_value(value)
                    .map_err(|source| FormatError::Json { line: line_no, source })?;
                events.push(VadEvent {
                    speaker: ParticipantId::new(rec.speaker),
                    start: lit(rec.start),
                    end: lit(rec.end),
                });
            }
            "truth" => {
                if header.is_none() {
                    return Err(FormatError::RecordBeforeHeader { line: line_no });
                }
                let rec: TruthRec = serde_json::from_value(value)
                    .map_err(|source| FormatError::Json { line: line_no, source })?;
                let floors = Partition::from_blocks(rec.floors).map_err(|e| {
                    FormatError::BadRecord { line: line_no, reason: e.to_string() }
                })?;
                truth.push(TruthEntry { time: lit(rec.time), floors });
            }
            other => {
                log::warn!("skipping unknown record type {other:?} at line {line_no}");
            }
        }
    }

    let header = header.ok_or(FormatError::MissingHeader)?;
    let participants: BTreeSet<ParticipantId> =
        header.participants.into_iter().map(ParticipantId::new).collect();
    sort_events(&mut events);
    truth.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    Ok(Trace {
        participants,
        events,
        duration: lit(header.duration),
        ground_truth: if truth.is_empty() { None } else { Some(truth) },
    })
}

#[derive(Serialize, Deserialize)]
struct GaussianRec {
    mean: f64,
    sd: f64,
}

#[derive(Serialize, Deserialize)]
struct RangeRec {
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelRec {
    #[serde(rename = "type")]
    kind: String,
    same_floor: GaussianRec,
    diff_floor: RangeRec,
}

pub fn write_model<T: Float, W: Write>(w: &mut W, model: &GapModel<T>) -> Result<(), FormatError> {
    let rec = ModelRec {
        kind: "gap_model".into(),
        same_floor: GaussianRec {
            mean: as_f64(model.same_floor.mean),
            sd: as_f64(model.same_floor.sd),
        },
        diff_floor: RangeRec {
            lo: as_f64(model.diff_floor.lo),
            hi: as_f64(model.diff_floor.hi),
        },
    };
    write_line(w, &rec)
}

pub fn read_model<T: Float, R: BufRead>(r: R) -> Result<GapModel<T>, FormatError> {
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|source| FormatError::Json { line: line_no, source })?;
        let kind = value
            .get("type")
            .and_then(|v| v.as_str())
            .ok_or(FormatError::MissingType { line: line_no })?;
        if kind != "gap_model" {
            log::warn!("skipping unknown record type {kind:?} at line {line_no}");
            continue;
        }
        let rec: ModelRec = serde_json::from_value(value)
            .map_err(|source| FormatError::Json { line: line_no, source })?;
        let model = GapModel {
            same_floor: Gaussian { mean: lit(rec.same_floor.mean), sd: lit(rec.same_floor.sd) },
            diff_floor: UniformRange { lo: lit(rec.diff_floor.lo), hi: lit(rec.diff_floor.hi) },
        };
        model
            .validate()
            .map_err(|e| FormatError::BadRecord { line: line_no, reason: e.to_string() })?;
        return Ok(model);
    }
    Err(FormatError::MissingModel)
}

#[derive(Serialize)]
struct ModeRec<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    time: f64,
    mode: &'a str,
    tone: bool,
}

pub fn write_mode_change<T: Float, W: Write>(
    w: &mut W,
    change: &ModeChange<T>,
) -> Result<(), FormatError> {
    let rec = ModeRec {
        kind: "mode",
        time: as_f64(change.time),
        mode: change.mode.as_str(),
        tone: change.tone,
    };
    write_line(w, &rec)
}

#[derive(Serialize)]
struct MixRec {
    #[serde(rename = "type")]
    kind: &'static str,
    time: f64,
    listener: String,
    gains: std::collections::BTreeMap<String, f64>,
}

/// One mix-control record per listener.
pub fn write_mix_records<T: Float, W: Write>(
    w: &mut W,
    time: T,
    gains: &GainMatrix<T>,
) -> Result<(), FormatError> {
    for (listener, row) in gains.rows() {
        let rec = MixRec {
            kind: "mix",
            time: as_f64(time),
            listener: listener.as_str().to_string(),
            gains: row
                .into_iter()
                .map(|(source, level)| (source.as_str().to_string(), as_f64(level)))
                .collect(),
        };
        write_line(w, &rec)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FloorsRec {
    #[serde(rename = "type")]
    kind: &'static str,
    time: f64,
    floors: Vec<Vec<String>>,
    score: f64,
}

#[derive(Serialize)]
struct ChangeRec {
    #[serde(rename = "type")]
    kind: &'static str,
    time: f64,
    change: &'static str,
    before: Vec<Vec<String>>,
    after: Vec<Vec<String>>,
}

fn change_kind_str(kind: ChangeKind) -> &'static str {
    match kind {
        ChangeKind::Schism => "schism",
        ChangeKind::Merge => "merge",
        ChangeKind::Reshuffle => "reshuffle",
    }
}

pub fn write_floor_change<T: Float, W: Write>(
    w: &mut W,
    change: &FloorChange<T>,
) -> Result<(), FormatError> {
    let rec = ChangeRec {
        kind: "change",
        time: as_f64(change.at),
        change: change_kind_str(change.kind),
        before: floors_to_lists(&change.before.partition),
        after: floors_to_lists(&change.after.partition),
    };
    write_line(w, &rec)
}

/// One detector step: the published floors, preceded by its change record
/// when a switch happened on this tick.
pub fn write_detect_step<T: Float, W: Write>(
    w: &mut W,
    step: &DetectStep<T>,
) -> Result<(), FormatError> {
    if let Some(change) = &step.change {
        write_floor_change(w, change)?;
    }
    let rec = FloorsRec {
        kind: "floors",
        time: as_f64(step.time),
        floors: floors_to_lists(&step.partition),
        score: as_f64(step.score),
    };
    write_line(w, &rec)
}

#[derive(Serialize)]
struct SummaryRec {
    #[serde(rename = "type")]
    kind: &'static str,
    pairwise_accuracy: f64,
    ticks: usize,
    changes_detected: usize,
    mode_changes: usize,
}

#[derive(Serialize)]
struct TickRec {
    #[serde(rename = "type")]
    kind: &'static str,
    time: f64,
    accuracy: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum LatencyVal {
    Seconds(f64),
    Missed(&'static str),
}

#[derive(Serialize)]
struct LatencyRec {
    #[serde(rename = "type")]
    kind: &'static str,
    truth_time: f64,
    detect_time: Option<f64>,
    latency: LatencyVal,
}

/// Emits the full report as records: one summary line, then per-tick
/// accuracies, latency entries, and mode changes.
pub fn write_report<T: Float, W: Write>(
    w: &mut W,
    report: &EvalReport<T>,
) -> Result<(), FormatError> {
    let summary = SummaryRec {
        kind: "summary",
        pairwise_accuracy: as_f64(report.pairwise_accuracy),
        ticks: report.per_tick_accuracy.len(),
        changes_detected: report
            .schism_latencies
            .iter()
            .filter(|l| l.detect_time.is_some())
            .count(),
        mode_changes: report.mode_timeline.len(),
    };
    write_line(w, &summary)?;
    for &(time, accuracy) in &report.per_tick_accuracy {
        let rec = TickRec { kind: "tick", time: as_f64(time), accuracy: as_f64(accuracy) };
        write_line(w, &rec)?;
    }
    for entry in &report.schism_latencies {
        write_latency(w, entry)?;
    }
    for change in &report.mode_timeline {
        write_mode_change(w, change)?;
    }
    Ok(())
}

fn write_latency<T: Float, W: Write>(
    w: &mut W,
    entry: &LatencyEntry<T>,
) -> Result<(), FormatError> {
    let rec = LatencyRec {
        kind: "latency",
        truth_time: as_f64(entry.truth_time),
        detect_time: entry.detect_time.map(as_f64),
        latency: match entry.latency {
            Some(l) => LatencyVal::Seconds(as_f64(l)),
            None => LatencyVal::Missed("missed"),
        },
    };
    write_line(w, &rec)
}

/// Human-readable summary table.
pub fn write_summary_table<T: Float, W: Write>(
    w: &mut W,
    report: &EvalReport<T>,
) -> Result<(), FormatError> {
    writeln!(w, "pairwise accuracy   {:.4}", as_f64(report.pairwise_accuracy))?;
    writeln!(w, "ticks               {}", report.per_tick_accuracy.len())?;
    writeln!(w, "truth changes       {}", report.schism_latencies.len())?;
    for entry in &report.schism_latencies {
        match (entry.detect_time, entry.latency) {
            (Some(at), Some(lat)) => writeln!(
                w,
                "  change at {:>8.2}  detected {:>8.2}  latency {:>6.2} s",
                as_f64(entry.truth_time),
                as_f64(at),
                as_f64(lat)
            )?,
            _ => writeln!(w, "  change at {:>8.2}  missed", as_f64(entry.truth_time))?,
        }
    }
    writeln!(w, "mode changes        {}", report.mode_timeline.len())?;
    for change in &report.mode_timeline {
        writeln!(
            w,
            "  {:>8.2}  -> {}{}",
            as_f64(change.time),
            change.mode.as_str(),
            if change.tone { " (tone)" } else { "" }
        )?;
    }
    Ok(())
}

/// Parses `push_to_talk` / `full_duplex`.
pub fn parse_mode(s: &str) -> Option<ChannelMode> {
    match s {
        "push_to_talk" => Some(ChannelMode::PushToTalk),
        "full_duplex" => Some(ChannelMode::FullDuplex),
        _ => None,
    }
}
