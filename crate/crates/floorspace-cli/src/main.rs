//! `floorspace` command line: one binary, five verbs.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. File
//! arguments accept `-` for standard input/output. Set `FLOORSPACE_LOG`
//! (error|warn|info|debug|trace) for diagnostics on standard error.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use floorspace::eval::{detect_floors, evaluate, label_transitions, EvalConfig};
use floorspace::floor::{fit_models, GapModel, TrackConfig};
use floorspace::io::{
    read_model, read_trace, write_detect_step, write_mix_records, write_model, write_report,
    write_summary_table, write_trace,
};
use floorspace::mix::{ramp_step, target_gains, MixConfig};
use floorspace::model::{validate_trace, Partition, Trace};
use floorspace::sim::{default_participant_ids, generate_trace, SimConfig};
use floorspace::style::StyleConfig;

#[derive(Parser)]
#[command(
    name = "floorspace",
    version,
    about = "Conversational floor detection and adaptive audio spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth-labeled conversation trace.
    Simulate(SimulateArgs),
    /// Fit a gap model from a trace's ground-truth labels.
    Train(TrainArgs),
    /// Track conversational floors over a trace, emitting floor and change records.
    Detect(DetectArgs),
    /// Emit per-listener mix-control records for a trace.
    Mix(MixArgs),
    /// Compare detector output against a trace's ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of participants (named A, B, C, ...).
    #[arg(long, default_value_t = 4)]
    participants: usize,
    /// Session length, seconds.
    #[arg(long, default_value_t = 120.0)]
    duration: f64,
    /// Random seed; identical seeds give byte-identical traces.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Split every floor in half at this time; may repeat.
    #[arg(long = "schism", value_name = "TIME")]
    schism: Vec<f64>,
    /// Merge all floors into one at this time; may repeat.
    #[arg(long = "merge", value_name = "TIME")]
    merge: Vec<f64>,
    /// Output trace file, or - for standard output.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct TrainArgs {
    /// Input trace file with ground truth, or - for standard input.
    #[arg(long, default_value = "-")]
    trace: String,
    /// Output model file, or - for standard output.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct PipelineArgs {
    /// Input trace file, or - for standard input.
    #[arg(long, default_value = "-")]
    trace: String,
    /// Gap model file; omitted means the built-in default model.
    #[arg(long)]
    model: Option<String>,
    /// Tracker re-inference period, seconds.
    #[arg(long, default_value_t = 0.25)]
    tick: f64,
    /// Evidence window, seconds.
    #[arg(long, default_value_t = 30.0)]
    window: f64,
    /// Score advantage (nats) required to displace the published partition.
    #[arg(long, default_value_t = 2.0)]
    margin: f64,
    /// How long the advantage must hold, seconds.
    #[arg(long, default_value_t = 2.0)]
    hold: f64,
}

#[derive(Args)]
struct GainArgs {
    /// Gain for sources sharing the listener's floor.
    #[arg(long = "same-gain", default_value_t = 1.0)]
    same_gain: f64,
    /// Gain for sources in other floors.
    #[arg(long = "other-gain", default_value_t = 0.25)]
    other_gain: f64,
    /// Maximum gain change per tick.
    #[arg(long, default_value_t = 0.1)]
    ramp: f64,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output file for floor/change records, or - for standard output.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct MixArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    gains: GainArgs,
    /// Output file for mix-control records, or - for standard output.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    gains: GainArgs,
    /// Median response gap, seconds, below which the channel opens up.
    #[arg(long = "fast-gap", default_value_t = 0.5)]
    fast_gap: f64,
    /// Minimum seconds between channel-mode transitions.
    #[arg(long, default_value_t = 10.0)]
    dwell: f64,
    /// Output file for report records, or - for standard output.
    #[arg(long, default_value = "-")]
    out: String,
}

/// Data-level failure: anything wrong with inputs rather than usage.
struct DataError(String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for DataError {
    fn from(e: E) -> Self {
        let mut msg = e.to_string();
        let mut source = e.source();
        while let Some(s) = source {
            msg.push_str(": ");
            msg.push_str(&s.to_string());
            source = s.source();
        }
        DataError(msg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("FLOORSPACE_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Train(args) => run_train(args),
        Command::Detect(args) => run_detect(args),
        Command::Mix(args) => run_mix(args),
        Command::Evaluate(args) => run_evaluate(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn open_input(path: &str) -> Result<Box<dyn BufRead>, DataError> {
    if path == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let file = File::open(path)
            .map_err(|e| DataError(format!("cannot open {path}: {e}")))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

fn open_output(path: &str) -> Result<Box<dyn Write>, DataError> {
    if path == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        let file = File::create(path)
            .map_err(|e| DataError(format!("cannot create {path}: {e}")))?;
        Ok(Box::new(BufWriter::new(file)))
    }
}

fn load_trace(path: &str) -> Result<Trace, DataError> {
    let trace: Trace = read_trace(open_input(path)?)?;
    let report = validate_trace(&trace);
    if !report.is_empty() {
        let lines: Vec<String> = report.iter().map(|v| v.to_string()).collect();
        return Err(DataError(format!("invalid trace {path}: {}", lines.join("; "))));
    }
    Ok(trace)
}

fn load_model(path: &Option<String>) -> Result<GapModel, DataError> {
    match path {
        Some(p) => Ok(read_model(open_input(p)?)?),
        None => Ok(GapModel::default()),
    }
}

fn pipeline_config(args: &PipelineArgs) -> EvalConfig {
    EvalConfig {
        track: TrackConfig {
            tick: args.tick,
            window: args.window,
            margin: args.margin,
            hold: args.hold,
            ..TrackConfig::default()
        },
        ..EvalConfig::default()
    }
}

fn mix_config(args: &GainArgs) -> Result<MixConfig, DataError> {
    let config = MixConfig { same_gain: args.same_gain, other_gain: args.other_gain, ramp: args.ramp };
    config.validate()?;
    Ok(config)
}

/// Builds the schedule implied by --schism/--merge: each schism halves every
/// floor with at least two members, each merge rejoins everyone.
fn build_schedule(
    participants: usize,
    schisms: &[f64],
    merges: &[f64],
) -> Result<Vec<(f64, Partition)>, DataError> {
    let ids = default_participant_ids(participants);
    let mut points: Vec<(f64, bool)> = schisms
        .iter()
        .map(|&t| (t, true))
        .chain(merges.iter().map(|&t| (t, false)))
        .collect();
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut current = Partition::single_floor(ids.clone());
    let mut schedule = Vec::new();
    for (time, is_schism) in points {
        current = if is_schism {
            let mut blocks = Vec::new();
            for block in current.blocks() {
                let members: Vec<_> = block.iter().cloned().collect();
                if members.len() < 2 {
                    blocks.push(members);
                } else {
                    let half = members.len().div_ceil(2);
                    blocks.push(members[..half].to_vec());
                    blocks.push(members[half..].to_vec());
                }
            }
            Partition::from_blocks(blocks).expect("halved blocks stay disjoint")
        } else {
            Partition::single_floor(ids.clone())
        };
        schedule.push((time, current.clone()));
    }
    Ok(schedule)
}

fn run_simulate(args: SimulateArgs) -> Result<(), DataError> {
    let mut config = SimConfig::new(args.participants, args.duration, args.seed);
    config.schedule = build_schedule(args.participants, &args.schism, &args.merge)?;
    let trace = generate_trace(&config)?;
    let mut out = open_output(&args.out)?;
    write_trace(&mut out, &trace)?;
    out.flush().map_err(DataError::from)
}

fn run_train(args: TrainArgs) -> Result<(), DataError> {
    let trace = load_trace(&args.trace)?;
    let defaults = EvalConfig::<f64>::default();
    let labeled = label_transitions(&trace, defaults.merge_gap, defaults.horizon)?;
    let model = fit_models(&labeled)?;
    let mut out = open_output(&args.out)?;
    write_model(&mut out, &model)?;
    out.flush().map_err(DataError::from)
}

fn run_detect(args: DetectArgs) -> Result<(), DataError> {
    let trace = load_trace(&args.pipeline.trace)?;
    let model = load_model(&args.pipeline.model)?;
    let config = pipeline_config(&args.pipeline);
    let steps = detect_floors(&trace, &model, &config)?;
    let mut out = open_output(&args.out)?;
    for step in &steps {
        write_detect_step(&mut out, step)?;
    }
    out.flush().map_err(DataError::from)
}

fn run_mix(args: MixArgs) -> Result<(), DataError> {
    let trace = load_trace(&args.pipeline.trace)?;
    let model = load_model(&args.pipeline.model)?;
    let config = pipeline_config(&args.pipeline);
    let mix = mix_config(&args.gains)?;
    let steps = detect_floors(&trace, &model, &config)?;
    let mut out = open_output(&args.out)?;
    let mut gains = target_gains(
        &Partition::single_floor(trace.participants.iter().cloned()),
        &mix,
    );
    for step in &steps {
        let target = target_gains(&step.partition, &mix);
        gains = ramp_step(&gains, &target, &mix)?;
        write_mix_records(&mut out, step.time, &gains)?;
    }
    out.flush().map_err(DataError::from)
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), DataError> {
    let trace = load_trace(&args.pipeline.trace)?;
    let model = load_model(&args.pipeline.model)?;
    let mut config = pipeline_config(&args.pipeline);
    config.mix = mix_config(&args.gains)?;
    config.style = StyleConfig { fast_gap: args.fast_gap, dwell: args.dwell, ..StyleConfig::default() };
    config.style_window = args.pipeline.window;
    let report = evaluate(&trace, &model, &config)?;

    let mut out = open_output(&args.out)?;
    write_report(&mut out, &report)?;
    out.flush().map_err(DataError::from)?;

    // Keep stdout machine-readable when the records already go there.
    if args.out == "-" {
        write_summary_table(&mut io::stderr(), &report)?;
    } else {
        write_summary_table(&mut io::stdout(), &report)?;
    }
    Ok(())
}
