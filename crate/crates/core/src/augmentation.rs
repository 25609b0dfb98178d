//! Background-model splicing, frame-interval zeroing and sample-count
//! planning.
//!
//! Splicing edits the frame sequence that feeds the background subtractor:
//! `corrupt` copies the frame where a foreground object appears over the
//! `span` frames before it, manufacturing a bootstrap situation and hence a
//! wrong background image; `correct` copies an object-free frame over the
//! first `span` frames so the subtractor starts from a clean background.
//! Neither touches the ground truth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sample;
use crate::sequence_io::{Frame, Scene, SceneManifest};

pub const DEFAULT_SPAN: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AugError {
    #[error("scene {scene}: missing annotation {field}")]
    MissingAnnotation { scene: String, field: &'static str },
    #[error("scene {scene}: splice [{start}, {end}) does not fit in {len} frames")]
    Bounds {
        scene: String,
        start: isize,
        end: usize,
        len: usize,
    },
}

/// Which background series a sample's background channel comes from.
#[derive(
    Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord,
)]
#[serde(rename_all = "lowercase")]
pub enum BgAug {
    /// Subtractor run on the unmodified sequence.
    #[default]
    None,
    Corrupt,
    Correct,
}

impl BgAug {
    pub fn as_str(self) -> &'static str {
        match self {
            BgAug::None => "none",
            BgAug::Corrupt => "corrupt",
            BgAug::Correct => "correct",
        }
    }
}

/// A splice applied to a scene: frames `[start, end)` now show `source`.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub struct SceneEdit {
    pub kind: BgAug,
    pub source: usize,
    pub start: usize,
    pub end: usize,
}

fn splice(scene: &Scene, source: usize, start: usize, end: usize, kind: BgAug) -> Scene {
    let mut out = scene.clone();
    let pixels = scene.frames[source].pixels.clone();
    for frame in &mut out.frames[start..end] {
        *frame = Frame {
            index: frame.index,
            pixels: pixels.clone(),
        };
    }
    out.edits.push(SceneEdit {
        kind,
        source,
        start,
        end,
    });
    out
}

/// Overwrite frames `[a - span, a)` with frame `a`, where `a` is the
/// manifest's `foreground_appear_index`. Frame `a` itself is kept.
pub fn splice_corrupt(scene: &Scene, span: usize) -> Result<Scene, AugError> {
    let a = scene
        .manifest
        .foreground_appear_index
        .ok_or_else(|| AugError::MissingAnnotation {
            scene: scene.id().into(),
            field: "foreground_appear_index",
        })?;
    if a < span || a >= scene.len() {
        return Err(AugError::Bounds {
            scene: scene.id().into(),
            start: a as isize - span as isize,
            end: a,
            len: scene.len(),
        });
    }
    Ok(splice(scene, a, a - span, a, BgAug::Corrupt))
}

/// Overwrite frames `[0, span)` with the manifest's `clean_frame_index`.
pub fn splice_correct(scene: &Scene, span: usize) -> Result<Scene, AugError> {
    let c = scene
        .manifest
        .clean_frame_index
        .ok_or_else(|| AugError::MissingAnnotation {
            scene: scene.id().into(),
            field: "clean_frame_index",
        })?;
    if span > scene.len() || c >= scene.len() {
        return Err(AugError::Bounds {
            scene: scene.id().into(),
            start: 0,
            end: span,
            len: scene.len(),
        });
    }
    Ok(splice(scene, c, 0, span, BgAug::Correct))
}

/// Set every past-frame channel to the current frame (frame interval 0).
pub fn interval_zero(sample: &Sample) -> Sample {
    let mut out = sample.clone();
    let current = out.channels[0].clone();
    for ch in out.channels.iter_mut().skip(2) {
        *ch = current.clone();
    }
    out.meta.interval_aug = true;
    out
}

/// Background augmentation direction for a scene: corrupt when an object
/// appears at least `span` frames in, otherwise correct when a clean frame
/// is annotated.
pub fn bg_direction(manifest: &SceneManifest, span: usize) -> BgAug {
    match (manifest.foreground_appear_index, manifest.clean_frame_index) {
        (Some(a), _) if a >= span => BgAug::Corrupt,
        (_, Some(_)) => BgAug::Correct,
        _ => BgAug::None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugFlags {
    pub use_bg: bool,
    pub use_interval: bool,
    pub span: usize,
}

impl Default for AugFlags {
    fn default() -> Self {
        Self {
            use_bg: false,
            use_interval: false,
            span: DEFAULT_SPAN,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct ScenePlan {
    pub scene_id: String,
    pub samples: usize,
    pub bg_aug: BgAug,
    pub interval_aug: bool,
}

impl ScenePlan {
    /// Samples this scene contributes after every planned augmentation.
    pub fn total(&self) -> usize {
        let with_interval = self.samples * if self.interval_aug { 2 } else { 1 };
        with_interval * if self.bg_aug == BgAug::None { 1 } else { 2 }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PredictedCounts {
    pub base: usize,
    pub after_interval: usize,
    pub after_bg: usize,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct AugPlan {
    pub scenes: Vec<ScenePlan>,
    pub predicted: PredictedCounts,
}

/// Plan augmentations and predict sample counts.
///
/// Interval augmentation adds one copy of each sample of every
/// human-foreground scene; background augmentation then doubles every scene
/// that has a usable annotation.
///
/// # Panics
///
/// If `samples_per_scene` and `manifests` differ in length.
pub fn plan_augmentation(
    manifests: &[SceneManifest],
    samples_per_scene: &[usize],
    flags: AugFlags,
) -> AugPlan {
    assert_eq!(
        manifests.len(),
        samples_per_scene.len(),
        "one sample count per scene"
    );
    let scenes: Vec<ScenePlan> = manifests
        .iter()
        .zip(samples_per_scene)
        .map(|(m, &samples)| ScenePlan {
            scene_id: m.scene_id.clone(),
            samples,
            bg_aug: if flags.use_bg {
                bg_direction(m, flags.span)
            } else {
                BgAug::None
            },
            interval_aug: flags.use_interval && m.human_foreground,
        })
        .collect();
    let base = scenes.iter().map(|s| s.samples).sum();
    let after_interval = scenes
        .iter()
        .map(|s| {
            if s.interval_aug {
                2 * s.samples
            } else {
                s.samples
            }
        })
        .sum();
    let after_bg = scenes.iter().map(ScenePlan::total).sum();
    AugPlan {
        scenes,
        predicted: PredictedCounts {
            base,
            after_interval,
            after_bg,
        },
    }
}
