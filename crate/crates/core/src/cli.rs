//! Command-line interface: synth, denoise, eval, plot, bench.
//!
//! Every run that consumes randomness or tunable parameters writes a config
//! echo JSON next to its output so results can be reproduced exactly.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::detect::DetectionMode;
use crate::error::{Error, Result};
use crate::event::{
    load_events_with, save_events, EventStream, FileFormat, Label, TimeUnit,
};
use crate::metrics::{evaluate, ConfusionReport};
use crate::noise::{synthesize, NoiseSpec, RNG_ALGORITHM};
use crate::pipeline::{run_denoise, GammaMode, GraphKind, PipelineConfig, Solver};
use crate::plot::{render_svg, Projection};
use crate::synthdata::moving_shape;

#[derive(Parser)]
#[command(name = "evdenoise", version, about = "Event stream denoising via graph spectral features")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inject labeled synthetic noise into a clean event stream.
    Synth(SynthArgs),
    /// Label each event of a stream as real or noise.
    Denoise(DenoiseArgs),
    /// Compare predicted labels against ground truth.
    Eval(EvalArgs),
    /// Render a labeled stream as an SVG scatter plot.
    Plot(PlotArgs),
    /// Run the pipeline on synthetic scenes at several noise splits.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for FileFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => FileFormat::Csv,
            FormatArg::Bin => FileFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TimeUnitArg {
    Seconds,
    Micros,
}

impl From<TimeUnitArg> for TimeUnit {
    fn from(u: TimeUnitArg) -> Self {
        match u {
            TimeUnitArg::Seconds => TimeUnit::Seconds,
            TimeUnitArg::Micros => TimeUnit::Microseconds,
        }
    }
}

/// Infers the file format from the extension unless overridden.
fn infer_format(path: &Path, explicit: Option<FormatArg>) -> FileFormat {
    if let Some(f) = explicit {
        return f.into();
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") | Some("evd") => FileFormat::Binary,
        _ => FileFormat::Csv,
    }
}

fn load(path: &Path, format: Option<FormatArg>, unit: TimeUnitArg) -> Result<EventStream> {
    load_events_with(path, infer_format(path, format), unit.into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn sidecar(output: &Path, suffix: &str) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    output.with_file_name(name)
}

#[derive(Args)]
struct SynthArgs {
    /// Clean input events; omit to generate a synthetic scene instead.
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,
    /// Generate a synthetic clean scene with this many events.
    #[arg(long)]
    generate: Option<usize>,
    #[arg(long)]
    output: PathBuf,
    /// BA noise count as a fraction of the clean count.
    #[arg(long, default_value_t = 0.10)]
    ba_ratio: f64,
    /// Hot pixel noise count as a fraction of the clean count.
    #[arg(long, default_value_t = 0.02)]
    hot_ratio: f64,
    #[arg(long, default_value_t = 4)]
    hot_pixels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, value_enum, default_value = "seconds")]
    time_unit: TimeUnitArg,
    /// Sensor size for generated scenes, WIDTHxHEIGHT.
    #[arg(long, default_value = "240x180")]
    sensor: String,
}

#[derive(Serialize)]
struct SynthEcho<'a> {
    command: &'a str,
    input: Option<&'a Path>,
    generated_events: Option<usize>,
    output: &'a Path,
    noise: &'a NoiseSpec,
    rng_algorithm: &'a str,
}

fn parse_sensor(s: &str) -> Result<(u16, u16)> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| Error::InvalidParameter(format!("sensor must be WIDTHxHEIGHT, got {s}")))?;
    let parse = |v: &str| {
        v.parse::<u16>()
            .map_err(|e| Error::InvalidParameter(format!("bad sensor dimension '{v}': {e}")))
    };
    Ok((parse(w)?, parse(h)?))
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let clean = match (&args.input, args.generate) {
        (Some(path), None) => load(path, args.format, args.time_unit)?,
        (None, Some(n)) => {
            let (w, h) = parse_sensor(&args.sensor)?;
            moving_shape(n, w, h, 1.0, args.seed)?
        }
        _ => {
            return Err(Error::InvalidParameter(
                "exactly one of --input or --generate is required".into(),
            ))
        }
    };
    let spec = NoiseSpec {
        ba_ratio: args.ba_ratio,
        hot_ratio: args.hot_ratio,
        hot_pixel_count: args.hot_pixels,
        seed: args.seed,
    };
    let noisy = synthesize(&clean, &spec)?;
    save_events(&noisy, &args.output, infer_format(&args.output, args.format))?;
    let echo = SynthEcho {
        command: "synth",
        input: args.input.as_deref(),
        generated_events: args.generate,
        output: &args.output,
        noise: &spec,
        rng_algorithm: RNG_ALGORITHM,
    };
    write_json(&sidecar(&args.output, ".config.json"), &echo)?;
    let noise_count = noisy.len() - clean.len();
    println!(
        "wrote {} events ({} clean + {} noise) to {}",
        noisy.len(),
        clean.len(),
        noise_count,
        args.output.display()
    );
    Ok(())
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output stream; predicted labels go into the label column.
    #[arg(long)]
    output: PathBuf,
    /// JSON file with a full pipeline config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    density_k: Option<usize>,
    #[arg(long)]
    omega: Option<u32>,
    #[arg(long)]
    power_iters: Option<usize>,
    #[arg(long)]
    power_tol: Option<f64>,
    #[arg(long)]
    num_eigvecs: Option<usize>,
    #[arg(long)]
    support_threshold: Option<f64>,
    #[arg(long, value_enum)]
    graph: Option<GraphArg>,
    #[arg(long)]
    knng_k: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    gamma_mode: Option<GammaArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, value_enum, default_value = "seconds")]
    time_unit: TimeUnitArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphArg {
    Eng,
    Knng,
    Vknng,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Power,
    Evd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    Multi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GammaArg {
    HalfEpsLin,
    HalfEpsSq,
    Fixed,
}

fn resolve_config(args: &DenoiseArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?
        }
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($field:ident, $arg:expr) => {
            if let Some(v) = $arg {
                cfg.$field = v;
            }
        };
    }
    set!(beta, args.beta);
    set!(density_k, args.density_k);
    set!(omega, args.omega);
    set!(power_iters, args.power_iters);
    set!(power_tol, args.power_tol);
    set!(num_eigvecs, args.num_eigvecs);
    set!(support_threshold_rel, args.support_threshold);
    set!(knng_k, args.knng_k);
    set!(gamma_fixed, args.gamma);
    set!(seed, args.seed);
    if let Some(g) = args.graph {
        cfg.graph = match g {
            GraphArg::Eng => GraphKind::Eng,
            GraphArg::Knng => GraphKind::Knng,
            GraphArg::Vknng => GraphKind::Vknng,
        };
    }
    if let Some(s) = args.solver {
        cfg.solver = match s {
            SolverArg::Power => Solver::Power,
            SolverArg::Evd => Solver::Evd,
        };
    }
    if let Some(m) = args.mode {
        cfg.mode = match m {
            ModeArg::Single => DetectionMode::Single,
            ModeArg::Multi => DetectionMode::Multi,
        };
    }
    if let Some(g) = args.gamma_mode {
        cfg.gamma_mode = match g {
            GammaArg::HalfEpsLin => GammaMode::HalfEpsLin,
            GammaArg::HalfEpsSq => GammaMode::HalfEpsSq,
            GammaArg::Fixed => GammaMode::Fixed,
        };
    }
    if args.gamma.is_some() && args.gamma_mode.is_none() {
        cfg.gamma_mode = GammaMode::Fixed;
    }
    cfg.rng_algorithm = RNG_ALGORITHM.to_string();
    Ok(cfg)
}

fn cmd_denoise(args: &DenoiseArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let stream = load(&args.input, args.format, args.time_unit)?;
    let outcome = run_denoise(&stream, &cfg)?;
    let labels = outcome
        .labels
        .y
        .iter()
        .map(|&real| if real { Label::Real } else { Label::Noise });
    let labeled = stream.with_labels(labels)?;
    save_events(&labeled, &args.output, infer_format(&args.output, args.format))?;
    write_json(&sidecar(&args.output, ".config.json"), &cfg)?;
    write_json(&sidecar(&args.output, ".diagnostics.json"), &outcome.diagnostics)?;
    let d = &outcome.diagnostics;
    println!(
        "{} events: {} real / {} noise | eps {:.4} gamma {:.4} edges {} | ct {:.3}s",
        d.n_events,
        outcome.labels.real_count(),
        d.n_events - outcome.labels.real_count(),
        d.eps_lin,
        d.gamma,
        d.n_edges,
        d.ct_seconds
    );
    Ok(())
}

#[derive(Args)]
struct EvalArgs {
    /// Stream whose label column holds the predictions.
    #[arg(long)]
    pred: PathBuf,
    /// Stream whose label column holds the ground truth.
    #[arg(long)]
    truth: PathBuf,
    /// Computation time to report, e.g. from denoise diagnostics.
    #[arg(long, default_value_t = 0.0)]
    ct_seconds: f64,
    /// Optional JSON report path.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, value_enum, default_value = "seconds")]
    time_unit: TimeUnitArg,
}

fn labels_of(stream: &EventStream, path: &Path) -> Result<crate::detect::LabelVector> {
    let mut y = Vec::with_capacity(stream.len());
    for e in stream.events() {
        match e.label {
            Label::Real => y.push(true),
            Label::Noise => y.push(false),
            Label::Unknown => {
                return Err(Error::InvalidInput(format!(
                    "{} has events without labels",
                    path.display()
                )))
            }
        }
    }
    Ok(crate::detect::LabelVector {
        y,
        degenerate: false,
    })
}

fn cmd_eval(args: &EvalArgs) -> Result<ConfusionReport> {
    let pred_stream = load(&args.pred, args.format, args.time_unit)?;
    let truth_stream = load(&args.truth, args.format, args.time_unit)?;
    let pred = labels_of(&pred_stream, &args.pred)?;
    let truth = labels_of(&truth_stream, &args.truth)?;
    let report = evaluate(&pred, &truth, args.ct_seconds)?;
    print!("{}", report.to_text());
    if let Some(path) = &args.json {
        write_json(path, &report)?;
    }
    Ok(report)
}

#[derive(Args)]
struct PlotArgs {
    /// Stream whose label column holds the predictions.
    #[arg(long)]
    input: PathBuf,
    /// Optional ground-truth stream; enables four-class coloring.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "xy")]
    projection: String,
    #[arg(long)]
    title: Option<String>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, value_enum, default_value = "seconds")]
    time_unit: TimeUnitArg,
}

fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let stream = load(&args.input, args.format, args.time_unit)?;
    let pred = labels_of(&stream, &args.input)?;
    let truth = match &args.truth {
        Some(path) => {
            let s = load(path, args.format, args.time_unit)?;
            Some(labels_of(&s, path)?)
        }
        None => None,
    };
    let proj: Projection = args.projection.parse()?;
    let title = args
        .title
        .clone()
        .unwrap_or_else(|| args.input.display().to_string());
    let svg = render_svg(&stream, &pred, truth.as_ref(), proj, &title)?;
    fs::write(&args.output, svg).map_err(|e| Error::Io {
        path: args.output.clone(),
        source: e,
    })?;
    println!("wrote {}", args.output.display());
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    /// Clean events per synthetic scene.
    #[arg(long, default_value_t = 5000)]
    events: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let splits = [(0.06, 0.06), (0.08, 0.04), (0.10, 0.02)];
    let clean = moving_shape(args.events, 240, 180, 1.0, args.seed)?;
    let mut cfg = PipelineConfig::default();
    if let Some(SolverArg::Evd) = args.solver {
        cfg.solver = Solver::Evd;
    }
    cfg.seed = args.seed;
    println!("ba%   hot%  acc     tpr     tnr     ct[s]");
    for (i, &(ba, hot)) in splits.iter().enumerate() {
        let noisy = synthesize(
            &clean,
            &NoiseSpec {
                ba_ratio: ba,
                hot_ratio: hot,
                hot_pixel_count: 4,
                seed: args.seed.wrapping_add(i as u64),
            },
        )?;
        let outcome = run_denoise(&noisy, &cfg)?;
        let truth = labels_of_stream(&noisy)?;
        let report = evaluate(&outcome.labels, &truth, outcome.diagnostics.ct_seconds)?;
        println!(
            "{:<5} {:<5} {:.4}  {:.4}  {:.4}  {:.3}",
            ba * 100.0,
            hot * 100.0,
            report.acc,
            report.tpr,
            report.tnr,
            report.ct_seconds
        );
    }
    Ok(())
}

fn labels_of_stream(stream: &EventStream) -> Result<crate::detect::LabelVector> {
    labels_of(stream, Path::new("<memory>"))
}

/// Runs the CLI; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Plot(a) => cmd_plot(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
