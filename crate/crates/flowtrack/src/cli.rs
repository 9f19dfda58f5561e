//! Command-line surface: `track`, `synth`, `eval`, and `extract`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. All
//! diagnostics go to stderr; machine-readable output goes only to the files
//! named on the command line.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::io::{
    self, extract_intensity, render_overlay, summary_sidecar_path, timing_sidecar_path,
    write_frames, write_intensity, write_metrics, write_rois, write_summary, write_timing,
    write_tracks, write_truth, FrameSource,
};
use crate::synth::{evaluate, generate_scenario, MotionBounds};
use crate::tracker::{track, AggregationMethod, TrackerConfig};

#[derive(Parser)]
#[command(
    name = "flowtrack",
    version,
    about = "Track rectangular regions through video by dense optical flow",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track ROIs through a frame sequence and write a tracks CSV.
    Track(TrackArgs),
    /// Generate a synthetic benchmark scenario with ground truth.
    Synth(SynthArgs),
    /// Score a tracks CSV against ground-truth quads.
    Eval(EvalArgs),
    /// Extract per-ROI mean intensities from a data sequence.
    Extract(ExtractArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Median,
    Affine,
}

impl From<Method> for AggregationMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Median => AggregationMethod::Median,
            Method::Affine => AggregationMethod::Affine,
        }
    }
}

#[derive(Parser)]
struct TrackArgs {
    /// Directory of PNG/PGM/PPM frames, or a raw stream with a .json sidecar.
    #[arg(long)]
    frames: PathBuf,
    /// ROI configuration CSV (`id,x,y,w,h`, integer pixels in frame 0).
    #[arg(long)]
    rois: PathBuf,
    #[arg(long, value_enum, default_value = "median")]
    method: Method,
    /// Output tracks CSV; a `.timing.json` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Separate data sequence for intensity extraction (same size/count).
    #[arg(long, requires = "intensity")]
    data_frames: Option<PathBuf>,
    /// Output intensity CSV for --data-frames.
    #[arg(long, requires = "data_frames")]
    intensity: Option<PathBuf>,
    /// Directory to render overlay frames into.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Visible-area fraction below which a ROI is lost.
    #[arg(long, default_value_t = 0.5)]
    min_visible_frac: f64,
    /// Accepted for interface compatibility; tracking is deterministic.
    #[arg(long, default_value_t = false)]
    seedless: bool,
}

fn parse_rotation_choice(s: &str) -> std::result::Result<f64, String> {
    match s {
        "0" | "5" | "10" => Ok(s.parse().unwrap()),
        _ => Err("must be one of 0, 5, 10".into()),
    }
}

fn parse_reflection_choice(s: &str) -> std::result::Result<usize, String> {
    match s {
        "0" | "10" | "25" => Ok(s.parse().unwrap()),
        _ => Err("must be one of 0, 10, 25".into()),
    }
}

#[derive(Parser)]
struct SynthArgs {
    /// Source still image (PNG/PGM/PPM).
    #[arg(long)]
    source: PathBuf,
    /// Output directory; receives frames/, truth.csv, and rois.csv.
    #[arg(long)]
    out: PathBuf,
    /// Number of frames to generate.
    #[arg(long)]
    frames: usize,
    /// Rotation bound in degrees (0, 5, or 10).
    #[arg(long, value_parser = parse_rotation_choice)]
    rotation_max: f64,
    /// Saturated reflections per frame (0, 10, or 25).
    #[arg(long, value_parser = parse_reflection_choice)]
    reflections: usize,
    /// Scenario seed; fixes frames, truth, and ROI placement byte-exactly.
    #[arg(long)]
    seed: u64,
    /// Shear/elation displacement bound in pixels.
    #[arg(long, default_value_t = 3.0)]
    shear: f64,
    #[arg(long, default_value_t = 0.95)]
    scale_min: f64,
    #[arg(long, default_value_t = 1.05)]
    scale_max: f64,
    /// Translation-walk step bound in pixels per frame.
    #[arg(long, default_value_t = 3.0)]
    step: f64,
    /// Number of ROIs to place.
    #[arg(long, default_value_t = 10)]
    rois: usize,
}

#[derive(Parser)]
struct EvalArgs {
    /// Tracks CSV produced by `track`.
    #[arg(long)]
    tracks: PathBuf,
    /// Ground-truth CSV produced by `synth`.
    #[arg(long)]
    truth: PathBuf,
    /// Output metrics CSV; a `.summary.json` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser)]
struct ExtractArgs {
    /// Data frame sequence to average over the tracked ROIs.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Parses and runs one invocation, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::Track(args) => run_track(args),
        Command::Synth(args) => run_synth(args),
        Command::Eval(args) => run_eval(args),
        Command::Extract(args) => run_extract(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run_track(args: TrackArgs) -> Result<()> {
    let source = FrameSource::open(&args.frames)?;
    let rois = io::read_rois(&args.rois)?;
    let cfg = TrackerConfig {
        method: args.method.into(),
        min_visible_frac: args.min_visible_frac,
        ..TrackerConfig::default()
    };
    let result = track(source.iter(), &rois, &cfg, &FlowConfig::default())?;
    write_tracks(&result.trajectory, &args.out)?;
    write_timing(&result.timing, &timing_sidecar_path(&args.out))?;

    if let (Some(data_dir), Some(intensity_out)) = (&args.data_frames, &args.intensity) {
        let data = FrameSource::open_expecting(data_dir, Some((source.width, source.height)))?;
        let records = extract_intensity(&data, &result.trajectory)?;
        write_intensity(&records, data.channels, intensity_out)?;
    }
    if let Some(overlay_dir) = &args.overlay {
        render_overlay(&source, &result.trajectory, overlay_dir)?;
    }

    let lost = result
        .trajectory
        .frames
        .last()
        .map_or(0, |rois| rois.iter().filter(|r| r.is_lost()).count());
    match result.timing.fps() {
        Some(fps) => eprintln!(
            "tracked {} ROIs over {} frames ({} lost) at {:.1} FPS",
            rois.len(),
            result.trajectory.len(),
            lost,
            fps
        ),
        None => eprintln!(
            "tracked {} ROIs over {} frames ({} lost)",
            rois.len(),
            result.trajectory.len(),
            lost
        ),
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let source = io::read_image(&args.source)?;
    let bounds = MotionBounds {
        max_shear: args.shear,
        scale_range: (args.scale_min, args.scale_max),
        max_translation_step: args.step,
        max_rotation_deg: args.rotation_max,
        n_reflections: args.reflections,
        n_frames: args.frames,
        n_rois: args.rois,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let scenario = generate_scenario(&source, &bounds, &mut rng)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_frames(&args.out.join("frames"), scenario.frames.iter())?;
    write_truth(&scenario.truth, &args.out.join("truth.csv"))?;
    write_rois(&args.out.join("rois.csv"), &scenario.initial_rois)?;
    eprintln!(
        "generated {} frames with {} ROIs into {}",
        scenario.frames.len(),
        scenario.initial_rois.len(),
        args.out.display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let traj = io::read_tracks(&args.tracks)?;
    let truth = io::read_truth(&args.truth)?;
    let timing_path = timing_sidecar_path(&args.tracks);
    let timing = if timing_path.exists() {
        Some(io::read_timing(&timing_path)?)
    } else {
        None
    };
    let report = evaluate(&traj, &truth, timing.as_ref())?;
    write_metrics(&report, &args.out)?;
    write_summary(&report.summary, &summary_sidecar_path(&args.out))?;
    eprintln!(
        "jaccard quartiles {:.3}/{:.3}/{:.3}, {:.1}% of entries >= 0.85",
        report.summary.jaccard_q25,
        report.summary.jaccard_q50,
        report.summary.jaccard_q75,
        100.0 * report.summary.frac_ge_085
    );
    Ok(())
}

fn run_extract(args: ExtractArgs) -> Result<()> {
    let source = FrameSource::open(&args.frames)?;
    let traj = io::read_tracks(&args.tracks)?;
    let records = extract_intensity(&source, &traj)?;
    write_intensity(&records, source.channels, &args.out)?;
    eprintln!("wrote {} intensity rows", records.len());
    Ok(())
}
