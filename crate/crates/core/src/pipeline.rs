//! End-to-end dataset construction: subtractor runs, augmentation, sample
//! assembly, splitting and export.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmentation::{
    interval_zero, plan_augmentation, splice_correct, splice_corrupt, AugFlags, AugPlan, BgAug,
    ScenePlan, DEFAULT_SPAN,
};
use crate::background::{run_sequence, BgParams};
use crate::dataset::{
    assemble_sample, category_paired_test_scenes, split_sde, split_sie, DatasetError,
    DatasetManifest, DatasetWriter, Sample, SampleConfig, SceneSamples, Split,
    DEFAULT_TRAIN_FRACTION,
};
use crate::sequence_io::{Scene, SceneManifest};
use crate::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("built {built} samples but the plan predicted {predicted}")]
    CountMismatch { predicted: usize, built: usize },
}

#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq, Eq)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SplitSpec {
    /// No split section in the manifest.
    #[default]
    None,
    Sde,
    Sie {
        test: Vec<String>,
    },
    /// SIE with the second scene of every category held out.
    SieCategoryPaired,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub sample: SampleConfig,
    pub bg: BgParams,
    pub use_bg: bool,
    pub use_interval: bool,
    pub span: usize,
    /// Evenly spaced frames per scene; `None` takes every eligible frame.
    pub samples_per_scene: Option<usize>,
    pub train_fraction: f64,
    pub split: SplitSpec,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            sample: SampleConfig::default(),
            bg: BgParams::default(),
            use_bg: true,
            use_interval: true,
            span: DEFAULT_SPAN,
            samples_per_scene: None,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            split: SplitSpec::Sde,
        }
    }
}

impl BuildConfig {
    pub fn flags(&self) -> AugFlags {
        AugFlags {
            use_bg: self.use_bg,
            use_interval: self.use_interval,
            span: self.span,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.into()).into());
        if self.sample.intervals.is_empty() {
            return bad("intervals must not be empty");
        }
        if self.sample.size.contains(&0) {
            return bad("size must be positive");
        }
        if self.span == 0 {
            return bad("span must be positive");
        }
        if self.samples_per_scene == Some(0) {
            return bad("samples_per_scene must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(DatasetError::BadFraction(self.train_fraction).into());
        }
        self.bg.validate()?;
        Ok(())
    }
}

/// Pick `n` evenly spaced entries of `eligible` (all of them when `n` is
/// `None` or at least `eligible.len()`).
pub fn select_indices(eligible: &[usize], n: Option<usize>) -> Vec<usize> {
    let len = eligible.len();
    match n {
        Some(n) if n < len => (0..n).map(|i| eligible[i * len / n]).collect(),
        _ => eligible.to_vec(),
    }
}

/// Frames chosen for each scene, in scene order.
pub fn select_samples(scenes: &[Scene], cfg: &BuildConfig) -> Result<Vec<SceneSamples>, Error> {
    scenes
        .iter()
        .map(|scene| {
            let indices =
                select_indices(&cfg.sample.eligible_indices(scene), cfg.samples_per_scene);
            if indices.is_empty() {
                return Err(DatasetError::EmptyScene(scene.id().into()).into());
            }
            Ok(SceneSamples {
                scene_id: scene.id().into(),
                indices,
            })
        })
        .collect()
}

pub fn make_split(
    manifests: &[SceneManifest],
    selected: &[SceneSamples],
    cfg: &BuildConfig,
) -> Result<Option<Split>, Error> {
    let split = match &cfg.split {
        SplitSpec::None => return Ok(None),
        SplitSpec::Sde => split_sde(selected, cfg.train_fraction)?,
        SplitSpec::Sie { test } => split_sie(selected, test, cfg.train_fraction)?,
        SplitSpec::SieCategoryPaired => split_sie(
            selected,
            &category_paired_test_scenes(manifests),
            cfg.train_fraction,
        )?,
    };
    Ok(Some(split))
}

/// All samples of one scene. Per frame the order is: natural,
/// natural + interval-zero, background-augmented, background-augmented +
/// interval-zero (variants absent from the plan are skipped).
///
/// Current and past channels always come from the original frames; only
/// the background channel of augmented samples comes from the run over
/// the spliced sequence.
pub fn build_scene(
    scene: &Scene,
    indices: &[usize],
    plan: &ScenePlan,
    cfg: &BuildConfig,
) -> Result<Vec<Sample>, Error> {
    let spliced = match plan.bg_aug {
        BgAug::None => None,
        BgAug::Corrupt => Some(splice_corrupt(scene, cfg.span)?),
        BgAug::Correct => Some(splice_correct(scene, cfg.span)?),
    };
    let (natural, augmented) = rayon::join(
        || run_sequence(scene, &cfg.bg),
        || {
            spliced
                .as_ref()
                .map(|s| run_sequence(s, &cfg.bg))
                .transpose()
        },
    );
    let (natural, augmented) = (natural?, augmented?);
    let per_frame = indices
        .par_iter()
        .map(|&t| {
            let mut out = Vec::with_capacity(4);
            let mut push = |s: Sample| {
                if plan.interval_aug {
                    let iz = interval_zero(&s);
                    out.push(s);
                    out.push(iz);
                } else {
                    out.push(s);
                }
            };
            push(assemble_sample(
                scene,
                &natural.backgrounds,
                BgAug::None,
                t,
                &cfg.sample,
            )?);
            if let Some(run) = &augmented {
                push(assemble_sample(
                    scene,
                    &run.backgrounds,
                    plan.bg_aug,
                    t,
                    &cfg.sample,
                )?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(per_frame.into_iter().flatten().collect())
}

#[derive(Clone, Debug)]
pub struct BuiltDataset {
    pub samples: Vec<Sample>,
    pub plan: AugPlan,
    pub selected: Vec<SceneSamples>,
    pub split: Option<Split>,
}

fn prepare(
    scenes: &[Scene],
    cfg: &BuildConfig,
) -> Result<(AugPlan, Vec<SceneSamples>, Option<Split>), Error> {
    cfg.validate()?;
    let manifests: Vec<SceneManifest> = scenes.iter().map(|s| s.manifest.clone()).collect();
    let selected = select_samples(scenes, cfg)?;
    let counts: Vec<usize> = selected.iter().map(|s| s.indices.len()).collect();
    let plan = plan_augmentation(&manifests, &counts, cfg.flags());
    let split = make_split(&manifests, &selected, cfg)?;
    Ok((plan, selected, split))
}

fn check_count(plan: &AugPlan, built: usize) -> Result<(), Error> {
    if built != plan.predicted.after_bg {
        return Err(PipelineError::CountMismatch {
            predicted: plan.predicted.after_bg,
            built,
        }
        .into());
    }
    Ok(())
}

/// Build every sample in memory.
pub fn build_dataset(scenes: &[Scene], cfg: &BuildConfig) -> Result<BuiltDataset, Error> {
    let (plan, selected, split) = prepare(scenes, cfg)?;
    let per_scene = scenes
        .par_iter()
        .zip(&selected)
        .zip(&plan.scenes)
        .map(|((scene, sel), sp)| build_scene(scene, &sel.indices, sp, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let samples: Vec<Sample> = per_scene.into_iter().flatten().collect();
    check_count(&plan, samples.len())?;
    Ok(BuiltDataset {
        samples,
        plan,
        selected,
        split,
    })
}

/// Build and export scene by scene, keeping one scene's samples in memory
/// at a time.
pub fn build_to_dir(
    scenes: &[Scene],
    cfg: &BuildConfig,
    out_dir: &Path,
) -> Result<(DatasetManifest, AugPlan), Error> {
    let (plan, selected, split) = prepare(scenes, cfg)?;
    let mut writer = DatasetWriter::new(out_dir, cfg.sample.channel_order());
    for ((scene, sel), sp) in scenes.iter().zip(&selected).zip(&plan.scenes) {
        writer.write(&build_scene(scene, &sel.indices, sp, cfg)?)?;
    }
    check_count(&plan, writer.len())?;
    let manifest = writer.finish(split.as_ref())?;
    Ok((manifest, plan))
}
