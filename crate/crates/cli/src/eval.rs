use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bgaug::augmentation::BgAug;
use bgaug::dataset::import;
use bgaug::metrics::{
    confusion, confusion_binary, scene_report, ConfusionCounts, EvalReport, FrameAveraging,
    SceneAveraging, SceneReport,
};
use bgaug::sequence_io::Mask;
use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use crate::{effective_config, io_error, load, CliError};

const REPORT_FILE: &str = "report.json";

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of 8-bit prediction PNGs; values above 127 are foreground.
    #[arg(long)]
    pred: PathBuf,
    /// Scene directory with ground truth (repeatable).
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    scene: Vec<PathBuf>,
    /// Exported dataset; its test split (or every sample) is scored.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// In dataset mode, also score augmented variants.
    #[arg(long)]
    all_variants: bool,
    /// Average metrics over frames instead of summing counts.
    #[arg(long)]
    frame_mean: bool,
    /// Average over categories instead of scenes.
    #[arg(long)]
    by_category: bool,
    /// Report path (default: `<out>/report.json`); a CSV is written alongside.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report JSON written by `eval` (repeatable).
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Scene to leave out (repeatable).
    #[arg(long)]
    exclude: Vec<String>,
    #[arg(long)]
    by_category: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn trailing_index(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_str()?;
    let digits = stem.trim_start_matches(|c: char| !c.is_ascii_digit());
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Index prediction files of a directory by the trailing number of their name.
fn index_predictions(dir: &Path) -> Result<BTreeMap<usize, PathBuf>, CliError> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io_error(dir))? {
        let path = entry.map_err(io_error(dir))?.path();
        if !is_png(&path) {
            continue;
        }
        if let Some(i) = trailing_index(&path) {
            if let Some(prev) = out.insert(i, path.clone()) {
                return Err(CliError::Data(format!(
                    "{} and {} both predict frame {i}",
                    prev.display(),
                    path.display()
                )));
            }
        }
    }
    Ok(out)
}

fn read_prediction(path: &Path) -> Result<Mask, CliError> {
    let img = image::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(Mask(img.to_luma8()))
}

fn averaging(frame_mean: bool, by_category: bool) -> (FrameAveraging, SceneAveraging) {
    (
        if frame_mean {
            FrameAveraging::FrameMean
        } else {
            FrameAveraging::SummedCounts
        },
        if by_category {
            SceneAveraging::CategoryMean
        } else {
            SceneAveraging::SceneMean
        },
    )
}

fn eval_scenes(args: &EvalArgs, frames: FrameAveraging) -> Result<Vec<SceneReport<f64>>, CliError> {
    let single = args.scene.len() == 1;
    let mut reports = Vec::new();
    for dir in &args.scene {
        let scene = load(dir)?;
        let nested = args.pred.join(scene.id());
        let pred_dir = if nested.is_dir() {
            nested
        } else if single {
            args.pred.clone()
        } else {
            return Err(CliError::Data(format!(
                "no prediction directory {}",
                nested.display()
            )));
        };
        let preds = index_predictions(&pred_dir)?;
        let counts = scene
            .masks
            .par_iter()
            .map(|(&index, gt)| {
                let path = preds.get(&index).ok_or_else(|| {
                    CliError::Data(format!(
                        "scene {}: missing prediction for frame {index} in {}",
                        scene.id(),
                        pred_dir.display()
                    ))
                })?;
                Ok(confusion(&read_prediction(path)?, gt, None)?)
            })
            .collect::<Result<Vec<ConfusionCounts>, CliError>>()?;
        reports.push(scene_report(
            scene.id(),
            &scene.manifest.category,
            &counts,
            frames,
        )?);
    }
    Ok(reports)
}

fn eval_dataset(
    dir: &Path,
    args: &EvalArgs,
    frames: FrameAveraging,
) -> Result<Vec<SceneReport<f64>>, CliError> {
    let (manifest, samples) = import(dir)?;
    let wanted: Option<std::collections::HashSet<&str>> = manifest
        .split
        .as_ref()
        .map(|s| s.test.iter().map(String::as_str).collect());
    let chosen: Vec<_> = samples
        .iter()
        .filter(|s| wanted.as_ref().is_none_or(|w| w.contains(s.id().as_str())))
        .filter(|s| args.all_variants || (s.meta.bg_aug == BgAug::None && !s.meta.interval_aug))
        .collect();
    if chosen.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no samples to evaluate",
            dir.display()
        )));
    }
    let counts = chosen
        .par_iter()
        .map(|s| {
            let path = args.pred.join(format!("{}.png", s.id()));
            if !path.is_file() {
                return Err(CliError::Data(format!(
                    "missing prediction {}",
                    path.display()
                )));
            }
            let pred = read_prediction(&path)?;
            Ok((
                s.meta.scene_id.clone(),
                confusion_binary(&pred, &s.target, s.weight.as_ref())?,
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut by_scene: BTreeMap<String, Vec<ConfusionCounts>> = BTreeMap::new();
    for (scene, c) in counts {
        by_scene.entry(scene).or_default().push(c);
    }
    by_scene
        .iter()
        .map(|(scene, c)| Ok(scene_report(scene, "unknown", c, frames)?))
        .collect()
}

fn finish(report: &EvalReport<f64>, path: &Path) -> Result<(), CliError> {
    report.write(path).map_err(io_error(path))?;
    for s in &report.scenes {
        println!(
            "{}: FM {:.4} PWC {:.4} ({} frames)",
            s.scene_id, s.metrics.fm, s.metrics.pwc, s.frames
        );
    }
    println!(
        "average over {} scenes: FM {:.4} PWC {:.4}; report written to {}",
        report.scenes.len(),
        report.average.fm,
        report.average.pwc,
        path.display()
    );
    Ok(())
}

pub fn cmd_eval(out: &Path, args: &EvalArgs) -> Result<(), CliError> {
    let (frames, scenes) = averaging(args.frame_mean, args.by_category);
    let report_path = args.report.clone().unwrap_or_else(|| out.join(REPORT_FILE));
    effective_config(json!({
        "command": "eval",
        "pred": args.pred,
        "scenes": args.scene,
        "dataset": args.dataset,
        "all_variants": args.all_variants,
        "frame_averaging": frames,
        "scene_averaging": scenes,
        "threshold": 127,
        "report": report_path,
    }));
    let reports = match &args.dataset {
        Some(dir) => eval_dataset(dir, args, frames)?,
        None => eval_scenes(args, frames)?,
    };
    finish(&EvalReport::new(reports, scenes)?, &report_path)
}

pub fn cmd_report(out: &Path, args: &ReportArgs) -> Result<(), CliError> {
    let (_, averaging) = averaging(false, args.by_category);
    let report_path = args.report.clone().unwrap_or_else(|| out.join(REPORT_FILE));
    effective_config(json!({
        "command": "report",
        "inputs": args.input,
        "exclude": args.exclude,
        "scene_averaging": averaging,
        "report": report_path,
    }));
    let mut scenes = Vec::new();
    for path in &args.input {
        let r: EvalReport<f64> = crate::read_json(path)?;
        scenes.extend(r.scenes);
    }
    for id in &args.exclude {
        if !scenes.iter().any(|s| &s.scene_id == id) {
            return Err(CliError::Usage(format!(
                "cannot exclude unknown scene {id}"
            )));
        }
    }
    scenes.retain(|s| !args.exclude.contains(&s.scene_id));
    finish(&EvalReport::new(scenes, averaging)?, &report_path)
}
