use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use mtmc3d::config::{Mode, PipelineConfig};
use mtmc3d::eval::{default_alphas, hota, TrackSet};
use mtmc3d::ingest::{load_results, SceneLayout};
use mtmc3d::pipeline::{self, PipelineError, SceneDir};
use mtmc3d::synth::{ScenarioConfig, SyntheticScene};

#[derive(Parser)]
#[command(name = "mtmc3d", version, about = "Online 3D multi-target multi-camera tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a scene directory and write the result file.
    Run(RunArgs),
    /// Generate a synthetic scene directory.
    Gen(GenArgs),
    /// Score a result file against ground truth with HOTA.
    Eval(EvalArgs),
    /// Dump the intermediate state of one frame as JSON.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "2d")]
    TwoD,
    #[value(name = "3d")]
    ThreeD,
}

/// Options shared by every command that runs the tracker.
#[derive(Args)]
struct TrackerArgs {
    /// Pipeline configuration JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Use the local track ids stored with the detections instead of the built-in tracker.
    #[arg(long)]
    bypass_sct: bool,
    /// Worker threads within a frame; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Print the effective configuration with notes on each fixed constant, then exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Result file to write.
    #[arg(long)]
    out: PathBuf,
    /// JSON-lines log with per-frame counters and association events.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    tracker: TrackerArgs,
}

#[derive(Args)]
struct GenArgs {
    /// Scenario JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output scene directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario frame count.
    #[arg(long)]
    frames: Option<u32>,
    /// Print the effective scenario, then exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Scene directory whose ground truth is used.
    #[arg(long, required_unless_present = "gt")]
    scene: Option<PathBuf>,
    /// Ground-truth file, instead of the scene's.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Result file to score.
    #[arg(long)]
    pred: PathBuf,
    /// Also write per-threshold scores as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    frame: u32,
    /// Write the dump here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tracker: TrackerArgs,
}

/// Failures split by exit code.
enum Failure {
    /// Bad arguments or configuration: exit 1.
    Validation(anyhow::Error),
    /// Unreadable or inconsistent scene data, or a failed write: exit 2.
    Data(anyhow::Error),
}

type Outcome = Result<(), Failure>;

fn validation<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Validation(e.into())
}

fn data<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Data(e.into())
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Workers(_) => validation(e),
        other => data(other),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(validation)
}

/// Write a line to standard output; a closed pipe is not an error.
fn print_line(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}").and_then(|_| out.flush());
}

fn print_json(value: &serde_json::Value) {
    print_line(&serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

impl TrackerArgs {
    fn resolve(&self) -> Result<PipelineConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_json(&read_text(p)?).with_context(|| p.display().to_string()).map_err(validation)?,
            None => PipelineConfig::default(),
        };
        if let Some(m) = self.mode {
            cfg.mode = match m {
                ModeArg::TwoD => Mode::TwoD,
                ModeArg::ThreeD => Mode::ThreeD,
            };
        }
        cfg.bypass_sct |= self.bypass_sct;
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate().map_err(validation)?;
        Ok(cfg)
    }
}

fn open_scene(path: &Path, cfg: &PipelineConfig) -> Result<SceneDir, Failure> {
    let pixels = cfg.mode == Mode::ThreeD && cfg.lift.late_aggregation;
    SceneDir::open(path, pixels).map_err(data)
}

fn run(args: RunArgs) -> Outcome {
    let cfg = args.tracker.resolve()?;
    if args.tracker.print_config {
        print_json(&cfg.annotated());
        return Ok(());
    }
    let mut scene = open_scene(&args.scene, &cfg)?;
    let summary = pipeline::run(&mut scene, &cfg, &args.out, args.log.as_deref()).map_err(pipeline_failure)?;
    let c = &summary.counters;
    if c.missing_inputs > 0 {
        log::warn!("{} targets had no mask or depth and got class-mean boxes", c.missing_inputs);
    }
    if c.homography_failures > 0 {
        log::warn!("{} foot points did not map to the ground plane", c.homography_failures);
    }
    print_json(&serde_json::to_value(&summary).expect("summary serializes"));
    Ok(())
}

fn gen(args: GenArgs) -> Outcome {
    let mut scenario = match &args.config {
        Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| p.display().to_string()).map_err(validation)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(frames) = args.frames {
        scenario.frames = frames;
    }
    if args.print_config {
        print_json(&serde_json::to_value(&scenario).expect("scenario serializes"));
        return Ok(());
    }
    let scene = SyntheticScene::new(scenario).map_err(|m| validation(anyhow::anyhow!("invalid scenario: {m}")))?;
    scene.write(&args.out).map_err(data)?;
    log::info!("wrote {} frames to {}", scene.config.frames, args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Outcome {
    let gt_path = match (&args.gt, &args.scene) {
        (Some(p), _) => p.clone(),
        (None, Some(s)) => SceneLayout::new(s).ground_truth(),
        (None, None) => unreachable!("clap requires one of --gt and --scene"),
    };
    let gt = TrackSet::from_records(&load_results(&gt_path).map_err(data)?).map_err(data)?;
    let pred = TrackSet::from_records(&load_results(&args.pred).map_err(data)?).map_err(data)?;
    let scores = hota(&gt, &pred, &default_alphas()).map_err(data)?;
    print_line(&scores.summary_line());
    if let Some(out) = &args.out {
        std::fs::write(out, scores.per_alpha_csv()).with_context(|| format!("cannot write {}", out.display())).map_err(data)?;
    }
    Ok(())
}

fn inspect(args: InspectArgs) -> Outcome {
    let cfg = args.tracker.resolve()?;
    if args.tracker.print_config {
        print_json(&cfg.annotated());
        return Ok(());
    }
    let mut scene = open_scene(&args.scene, &cfg)?;
    use mtmc3d::pipeline::FrameSource;
    if !scene.frames().contains(&args.frame) {
        return Err(validation(anyhow::anyhow!("frame {} is outside the scene ({:?})", args.frame, scene.frames())));
    }
    let report = pipeline::inspect(&mut scene, &cfg, args.frame).map_err(pipeline_failure)?;
    let records: Vec<String> = match cfg.mode {
        Mode::ThreeD => report.records_3d.iter().map(|r| r.to_line()).collect(),
        Mode::TwoD => report.records_2d.iter().map(|r| r.to_line()).collect(),
    };
    let dump = serde_json::json!({
        "frame": report.frame,
        "counters": report.counters,
        "events": report.events,
        "detail": report.detail,
        "results": records,
    });
    let text = serde_json::to_string_pretty(&dump).expect("dump serializes");
    match &args.out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("cannot write {}", p.display())).map_err(data)?,
        None => print_line(&text),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Gen(a) => gen(a),
        Command::Eval(a) => eval(a),
        Command::Inspect(a) => inspect(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
