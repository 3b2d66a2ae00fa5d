use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::LazyLock;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::Value;

use openbox::config::PipelineConfig;
use openbox::eval::{evaluate_files, EvalConfig, EvalMode, IouKind};
use openbox::export::{export, ExportFormat};
use openbox::pipeline::{annotate, AnnotateOutput};
use openbox::scene::{load_priors, load_sequence, read_annotations, write_annotations, ClassPriors};
use openbox::synth::{generate_to_dir, load_spec, oracle_check, SceneSpec};
use openbox::Error;

static CONFIG_KEYS: LazyLock<String> = LazyLock::new(|| {
    let defaults = serde_json::to_value(PipelineConfig::default()).expect("config serializes");
    let mut out = String::from("Config keys (set with --set KEY=VALUE or a JSON config file):\n");
    if let Value::Object(map) = defaults {
        for (k, v) in map {
            out.push_str(&format!("  {k:<24} default {v}\n"));
        }
    }
    out
});

#[derive(Parser)]
#[command(name = "openbox", version, about = "LiDAR 3D box auto-labeling from 2D instance cues")]
struct Cli {
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0, env = "OPENBOX_WORKERS")]
    workers: usize,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate a scene directory with 3D boxes.
    #[command(after_help = CONFIG_KEYS.as_str())]
    Annotate(AnnotateArgs),
    /// Score predicted annotations against reference annotations.
    Eval(EvalArgs),
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Convert annotations to a flat text format.
    Export(ExportArgs),
    /// Verify a generated scene against its generator oracle.
    Check(CheckArgs),
}

#[derive(Args)]
struct AnnotateArgs {
    /// Scene directory (contains frames/).
    #[arg(long)]
    scene: PathBuf,
    /// Class priors file; defaults to <scene>/priors.json, then built-in priors.
    #[arg(long)]
    priors: Option<PathBuf>,
    /// Output directory for annotations.json, report.json and effective_config.json.
    #[arg(long)]
    out: PathBuf,
    /// JSON config file with pipeline keys.
    #[arg(long, env = "OPENBOX_CONFIG")]
    config: Option<PathBuf>,
    /// Random seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Override one config key; repeatable. Flags win over the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PerClass,
    ClassAgnostic,
}

#[derive(Clone, Copy, ValueEnum)]
enum IouArg {
    #[value(name = "3d")]
    ThreeD,
    Bev,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted annotations.json.
    #[arg(long)]
    pred: PathBuf,
    /// Reference annotations.json.
    #[arg(long)]
    reference: PathBuf,
    /// Scene directory supplying ego poses for range bands; without it the
    /// origin is used.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output directory for eval_report.json and eval_curves.csv.
    #[arg(long)]
    out: PathBuf,
    /// IoU threshold; repeatable. Default 0.25, 0.5 and 0.7.
    #[arg(long = "threshold")]
    thresholds: Vec<f64>,
    #[arg(long, value_enum, default_value = "class-agnostic")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "3d")]
    iou: IouArg,
    /// Range band MIN:MAX in meters; repeatable. Default 0:30, 30:50, 50:80.
    #[arg(long = "band", value_name = "MIN:MAX")]
    bands: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Street,
    CarBeforeWall,
    CarBehindGlass,
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in scene layout.
    #[arg(long, value_enum, conflicts_with = "spec")]
    preset: Option<Preset>,
    /// Scene spec JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output scene directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// annotations.json to convert.
    #[arg(long)]
    annotations: PathBuf,
    /// Output format; only "flat" (one box per line) is supported.
    #[arg(long, default_value = "flat")]
    format: String,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Scene directory written by `synth`.
    #[arg(long)]
    scene: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "error"
    } else {
        ["warn", "info", "debug"][cli.verbose.min(2) as usize]
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::FAILURE;
    }
    let result = match cli.command {
        Command::Annotate(a) => run_annotate(a),
        Command::Eval(a) => run_eval(a),
        Command::Synth(a) => run_synth(a),
        Command::Export(a) => run_export(a),
        Command::Check(a) => run_check(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            for cause in e.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::FAILURE
        }
    }
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        bail!("{what} {} is not a directory", path.display());
    }
    Ok(())
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(())
}

fn create_out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating output directory {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_override(s: &str) -> Result<(String, Value)> {
    let Some((k, v)) = s.split_once('=') else {
        bail!("override '{s}' is not KEY=VALUE");
    };
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Defaults, then the config file, then flags.
fn effective_config(args: &AnnotateArgs) -> Result<PipelineConfig> {
    let mut value = serde_json::to_value(PipelineConfig::default())?;
    if let Some(path) = &args.config {
        require_file(path, "config file")?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let Value::Object(map) = file else {
            bail!("{}: config must be a JSON object", path.display());
        };
        merge(&mut value, map, &format!("config file {}", path.display()))?;
    }
    let mut flags = serde_json::Map::new();
    for o in &args.overrides {
        let (k, v) = parse_override(o)?;
        flags.insert(k, v);
    }
    if let Some(seed) = args.seed {
        flags.insert("seed".into(), seed.into());
    }
    merge(&mut value, flags, "command line")?;
    let cfg: PipelineConfig = serde_json::from_value(value).context("invalid config value")?;
    cfg.validate()?;
    Ok(cfg)
}

fn merge(base: &mut Value, over: serde_json::Map<String, Value>, origin: &str) -> Result<()> {
    let Value::Object(map) = base else { unreachable!() };
    for (k, v) in over {
        if !map.contains_key(&k) {
            bail!("unknown config key '{k}' from {origin}");
        }
        map.insert(k, v);
    }
    Ok(())
}

fn run_annotate(args: AnnotateArgs) -> Result<ExitCode> {
    require_dir(&args.scene, "scene")?;
    if let Some(p) = &args.priors {
        require_file(p, "priors file")?;
    }
    let cfg = effective_config(&args)?;
    let priors = match &args.priors {
        Some(p) => load_priors(p)?,
        None => {
            let p = args.scene.join("priors.json");
            if p.is_file() {
                load_priors(&p)?
            } else {
                ClassPriors::defaults()
            }
        }
    };
    create_out_dir(&args.out)?;

    let output = match load_sequence(&args.scene) {
        Ok(frames) => {
            info!("annotating {} frames", frames.len());
            annotate(&frames, &priors, &cfg)
        }
        Err(Error::NoFrames(p)) => {
            warn!("{}: no frames found; writing empty annotations", p.display());
            AnnotateOutput::default()
        }
        Err(e) => return Err(e.into()),
    };
    write_annotations(&output.annotations, &args.out.join("annotations.json"))?;
    let mut report = serde_json::to_string_pretty(&output.report)?;
    report.push('\n');
    write(&args.out.join("report.json"), &report)?;
    write(&args.out.join("effective_config.json"), &cfg.to_json())?;
    info!(
        "{} boxes for {} tracks, {} skipped",
        output.annotations.len(),
        output.report.tracks.len(),
        output.report.skipped.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_band(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').with_context(|| format!("band '{s}' is not MIN:MAX"))?;
    Ok((
        a.trim().parse().with_context(|| format!("band '{s}'"))?,
        b.trim().parse().with_context(|| format!("band '{s}'"))?,
    ))
}

fn run_eval(args: EvalArgs) -> Result<ExitCode> {
    require_file(&args.pred, "predictions")?;
    require_file(&args.reference, "reference")?;
    if let Some(s) = &args.scene {
        require_dir(s, "scene")?;
    }
    let mut cfg = EvalConfig {
        mode: match args.mode {
            ModeArg::PerClass => EvalMode::PerClass,
            ModeArg::ClassAgnostic => EvalMode::ClassAgnostic,
        },
        iou_kind: match args.iou {
            IouArg::ThreeD => IouKind::Iou3d,
            IouArg::Bev => IouKind::Bev,
        },
        ..Default::default()
    };
    if !args.thresholds.is_empty() {
        cfg.thresholds = args.thresholds.clone();
    }
    if !args.bands.is_empty() {
        cfg.bands = args.bands.iter().map(|b| parse_band(b)).collect::<Result<_>>()?;
    }
    cfg.validate()?;
    let report = evaluate_files(&args.pred, &args.reference, args.scene.as_deref(), &cfg)?;
    create_out_dir(&args.out)?;
    write(&args.out.join("eval_report.json"), &report.to_json())?;
    write(&args.out.join("eval_curves.csv"), &report.curves_csv())?;
    let mut cfg_text = serde_json::to_string_pretty(&cfg)?;
    cfg_text.push('\n');
    write(&args.out.join("eval_config.json"), &cfg_text)?;
    for c in &report.cells {
        let ap = c.ap.map_or("absent".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<12} ({:>5.1}, {:>5.1}] iou {:.2}  AP {ap}  tp {} fp {} fn {}",
            c.class_label, c.band.0, c.band.1, c.threshold, c.true_positives, c.false_positives, c.false_negatives
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run_synth(args: SynthArgs) -> Result<ExitCode> {
    let mut spec = match (&args.spec, args.preset) {
        (Some(path), _) => {
            require_file(path, "scene spec")?;
            load_spec(path)?
        }
        (None, preset) => match preset.unwrap_or(Preset::Street) {
            Preset::Street => SceneSpec::street(0),
            Preset::CarBeforeWall => SceneSpec::car_before_wall(0),
            Preset::CarBehindGlass => SceneSpec::car_behind_glass(0),
        },
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    create_out_dir(&args.out)?;
    let scene = generate_to_dir(&spec, &args.out)?;
    info!("wrote {} frames and {} truth boxes", scene.frames.len(), scene.truth.len());
    Ok(ExitCode::SUCCESS)
}

fn run_export(args: ExportArgs) -> Result<ExitCode> {
    let format: ExportFormat = args.format.parse()?;
    require_file(&args.annotations, "annotations")?;
    let annotations = read_annotations(&args.annotations)?;
    write(&args.out, &export(&annotations, format)?)?;
    Ok(ExitCode::SUCCESS)
}

fn run_check(args: CheckArgs) -> Result<ExitCode> {
    require_dir(&args.scene, "scene")?;
    let report = oracle_check(&args.scene)?;
    println!(
        "frames {}  object points {}  projected {}  occluded {}  violations {}",
        report.frames,
        report.object_points,
        report.projected,
        report.occluded,
        report.violations.len()
    );
    for v in report.violations.iter().take(20) {
        println!("  {v}");
    }
    Ok(if report.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
