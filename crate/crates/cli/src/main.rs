mod eval;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bgaug::augmentation::{splice_correct, splice_corrupt, DEFAULT_SPAN};
use bgaug::background::{dump_backgrounds, run_sequence, BgParams, BGMODEL_DIR};
use bgaug::fsutil;
use bgaug::pipeline::{build_to_dir, BuildConfig, SplitSpec};
use bgaug::sequence_io::{
    frame_file_name, load_scene, write_scene, LoadOptions, Scene, WriteOptions, INPUT_DIR,
};
use bgaug::synth::{generate_scene, preset, SynthSpec, PRESET_NAMES};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

pub const BGSMASK_DIR: &str = "bgsmask";

#[derive(Parser, Debug)]
#[command(
    name = "bgaug",
    version,
    about = "Background-model and frame-interval augmentation toolkit"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Root directory for every artifact.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Deterministic mode: `--seed` becomes mandatory for seeded commands.
    #[arg(long, global = true)]
    test_mode: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scene with exact ground truth.
    Synth(SynthArgs),
    /// Run the background subtractor over a scene.
    Bgs(BgsArgs),
    /// Write a spliced copy of a scene.
    Augment(AugmentArgs),
    /// Build and export a training set.
    Build(BuildArgs),
    /// Score predictions against scene ground truth or a dataset.
    Eval(eval::EvalArgs),
    /// Re-aggregate existing evaluation reports.
    Report(eval::ReportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES), required_unless_present = "spec")]
    preset: Option<String>,
    /// JSON scene description instead of a preset.
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct BgParamArgs {
    /// JSON file with subtractor parameters; flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    min_matches: Option<usize>,
    #[arg(long)]
    match_radius: Option<u8>,
    #[arg(long)]
    subsample: Option<u32>,
    #[arg(long)]
    no_diffusion: bool,
}

impl BgParamArgs {
    fn resolve(&self, base: BgParams) -> Result<BgParams, CliError> {
        let mut p = match &self.params {
            Some(path) => read_json(path)?,
            None => base,
        };
        if let Some(v) = self.seed {
            p.seed = v;
        }
        if let Some(v) = self.n_samples {
            p.n_samples = v;
        }
        if let Some(v) = self.min_matches {
            p.min_matches = v;
        }
        if let Some(v) = self.match_radius {
            p.match_radius = v;
        }
        if let Some(v) = self.subsample {
            p.subsample_factor = v;
        }
        if self.no_diffusion {
            p.neighbor_diffusion = false;
        }
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Args, Debug)]
struct BgsArgs {
    #[arg(long)]
    scene: PathBuf,
    #[command(flatten)]
    bg: BgParamArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum SpliceKind {
    Corrupt,
    Correct,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_enum)]
    kind: SpliceKind,
    #[arg(long, default_value_t = DEFAULT_SPAN)]
    span: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SplitArg {
    None,
    Sde,
    Sie,
    SieCategoryPaired,
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// JSON build configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scene directory (repeatable).
    #[arg(long)]
    scene: Vec<PathBuf>,
    /// Directory whose subdirectories are scenes.
    #[arg(long)]
    scenes_root: Option<PathBuf>,
    #[arg(long)]
    no_bg: bool,
    #[arg(long)]
    no_interval: bool,
    #[arg(long)]
    span: Option<usize>,
    #[arg(long)]
    samples_per_scene: Option<usize>,
    /// Square output size in pixels.
    #[arg(long)]
    size: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    intervals: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Held-out scene for `--split sie` (repeatable).
    #[arg(long)]
    test_scene: Vec<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[command(flatten)]
    bg: BgParamArgs,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<bgaug::Error> for CliError {
    fn from(e: bgaug::Error) -> Self {
        match e {
            bgaug::Error::Pipeline(bgaug::pipeline::PipelineError::InvalidConfig(m)) => {
                CliError::Usage(m)
            }
            bgaug::Error::Pipeline(e @ bgaug::pipeline::PipelineError::CountMismatch { .. }) => {
                CliError::Internal(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

macro_rules! data_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::from(bgaug::Error::from(e))
            }
        }
    )*};
}
data_from!(
    bgaug::sequence_io::LoadError,
    bgaug::synth::SynthError,
    bgaug::background::BgsError,
    bgaug::augmentation::AugError,
    bgaug::dataset::DatasetError,
    bgaug::metrics::MetricsError
);

pub fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    fsutil::write_atomic(path, &bytes).map_err(io_error(path))
}

pub fn effective_config(value: serde_json::Value) {
    println!("effective-config: {value}");
}

fn load(dir: &Path) -> Result<Scene, CliError> {
    Ok(load_scene(dir, &LoadOptions::default())?)
}

fn require_seed(cli: &Cli, seed: Option<u64>, command: &str) -> Result<(), CliError> {
    if cli.test_mode && seed.is_none() {
        return Err(CliError::Usage(format!(
            "--seed is required for `{command}` in test mode"
        )));
    }
    Ok(())
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<(), CliError> {
    require_seed(cli, args.seed, "synth")?;
    let mut spec: SynthSpec = match (&args.preset, &args.spec) {
        (Some(name), _) => preset(name, args.seed.unwrap_or(0))?,
        (None, Some(path)) => read_json(path)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    effective_config(json!({"command": "synth", "out": cli.out, "spec": spec}));
    let scene = generate_scene(&spec)?;
    let root = cli.out.join(&spec.scene_id);
    write_scene(&scene, &root, &WriteOptions::default()).map_err(io_error(&root))?;
    write_json(&root.join("synth.json"), &spec)?;
    println!("wrote {} frames to {}", scene.len(), root.display());
    Ok(())
}

fn cmd_bgs(cli: &Cli, args: &BgsArgs) -> Result<(), CliError> {
    require_seed(cli, args.bg.seed, "bgs")?;
    let params = args.bg.resolve(BgParams::default())?;
    let scene = load(&args.scene)?;
    let root = cli.out.join(scene.id());
    effective_config(json!({
        "command": "bgs",
        "out": cli.out,
        "scene": args.scene,
        "params": params,
    }));
    let run = run_sequence(&scene, &params)?;
    dump_backgrounds(&run.backgrounds, &root, "bg", 6).map_err(io_error(&root))?;
    use rayon::prelude::*;
    run.masks.par_iter().enumerate().try_for_each(|(i, m)| {
        let path = root.join(BGSMASK_DIR).join(frame_file_name("bin", i, 6));
        fsutil::write_gray_png(&path, m.image()).map_err(io_error(&path))
    })?;
    write_json(&root.join("bgs.json"), &params)?;
    println!(
        "wrote {} background images to {} and masks to {}",
        run.len(),
        root.join(BGMODEL_DIR).display(),
        root.join(BGSMASK_DIR).display()
    );
    Ok(())
}

fn cmd_augment(cli: &Cli, args: &AugmentArgs) -> Result<(), CliError> {
    let scene = load(&args.scene)?;
    let kind = match args.kind {
        SpliceKind::Corrupt => "corrupt",
        SpliceKind::Correct => "correct",
    };
    let root = cli.out.join(format!("{}-{kind}", scene.id()));
    effective_config(json!({
        "command": "augment",
        "out": cli.out,
        "scene": args.scene,
        "kind": args.kind,
        "span": args.span,
    }));
    let spliced = match args.kind {
        SpliceKind::Corrupt => splice_corrupt(&scene, args.span)?,
        SpliceKind::Correct => splice_correct(&scene, args.span)?,
    };
    write_scene(&spliced, &root, &WriteOptions::default()).map_err(io_error(&root))?;
    write_json(&root.join("edits.json"), &spliced.edits)?;
    println!("wrote spliced scene to {}", root.display());
    Ok(())
}

fn scene_dirs(args: &BuildArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut dirs = args.scene.clone();
    if let Some(root) = &args.scenes_root {
        let mut found: Vec<PathBuf> = std::fs::read_dir(root)
            .map_err(io_error(root))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(INPUT_DIR).is_dir())
            .collect();
        found.sort();
        dirs.extend(found);
    }
    if dirs.is_empty() {
        return Err(CliError::Usage(
            "no scenes given (use --scene or --scenes-root)".into(),
        ));
    }
    Ok(dirs)
}

fn resolve_build(args: &BuildArgs) -> Result<BuildConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => read_json(path)?,
        None => BuildConfig::default(),
    };
    if args.no_bg {
        cfg.use_bg = false;
    }
    if args.no_interval {
        cfg.use_interval = false;
    }
    if let Some(v) = args.span {
        cfg.span = v;
    }
    if let Some(v) = args.samples_per_scene {
        cfg.samples_per_scene = Some(v);
    }
    if let Some(v) = args.size {
        cfg.sample.size = [v, v];
    }
    if let Some(v) = &args.intervals {
        cfg.sample.intervals = v.clone();
    }
    if let Some(v) = args.train_fraction {
        cfg.train_fraction = v;
    }
    match args.split {
        Some(SplitArg::None) => cfg.split = SplitSpec::None,
        Some(SplitArg::Sde) => cfg.split = SplitSpec::Sde,
        Some(SplitArg::Sie) => {
            cfg.split = SplitSpec::Sie {
                test: args.test_scene.clone(),
            }
        }
        Some(SplitArg::SieCategoryPaired) => cfg.split = SplitSpec::SieCategoryPaired,
        None if !args.test_scene.is_empty() => {
            cfg.split = SplitSpec::Sie {
                test: args.test_scene.clone(),
            }
        }
        None => {}
    }
    if matches!(&cfg.split, SplitSpec::Sie { test } if test.is_empty()) {
        return Err(CliError::Usage(
            "--split sie needs at least one --test-scene".into(),
        ));
    }
    cfg.bg = args.bg.resolve(cfg.bg.clone())?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_build(cli: &Cli, args: &BuildArgs) -> Result<(), CliError> {
    require_seed(cli, args.bg.seed, "build")?;
    let cfg = resolve_build(args)?;
    let dirs = scene_dirs(args)?;
    effective_config(json!({"command": "build", "out": cli.out, "scenes": dirs, "config": cfg}));
    let scenes = dirs
        .iter()
        .map(|d| load(d))
        .collect::<Result<Vec<_>, _>>()?;
    let (manifest, plan) = build_to_dir(&scenes, &cfg, &cli.out)?;
    write_json(&cli.out.join("plan.json"), &plan)?;
    write_json(&cli.out.join("build.json"), &cfg)?;
    let p = plan.predicted;
    println!(
        "exported {} samples (base {}, after interval {}, after background {})",
        manifest.samples.len(),
        p.base,
        p.after_interval,
        p.after_bg
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Bgs(a) => cmd_bgs(cli, a),
        Command::Augment(a) => cmd_augment(cli, a),
        Command::Build(a) => cmd_build(cli, a),
        Command::Eval(a) => eval::cmd_eval(cli.out.as_path(), a),
        Command::Report(a) => eval::cmd_report(cli.out.as_path(), a),
    }
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        eprintln!("internal error: {info}");
        std::process::exit(4);
    }));
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
