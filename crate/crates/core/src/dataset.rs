//! Six-channel sample assembly, normalization, train/val/test splits and
//! the on-disk dataset format.
//!
//! Channel order is fixed: current frame, background image, then the past
//! frames at each configured interval (default 25, 50, 75 and 100 frames
//! back). All channels are gray. The order is written into `dataset.json`.
//!
//! Export layout:
//!
//! ```text
//! <out>/dataset.json
//! <out>/samples/<id>/c0.png .. c5.png, target.png, [weight.png], meta.json
//! ```
//!
//! Targets and weights are stored as 0/255 PNGs and read back as 0/1.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augmentation::BgAug;
use crate::fsutil;
use crate::sequence_io::{label, Scene, SceneManifest};
use crate::Scalar;

pub const DEFAULT_INTERVALS: [usize; 4] = [25, 50, 75, 100];
pub const DEFAULT_SIZE: u32 = 224;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const DATASET_FILE: &str = "dataset.json";
pub const SAMPLES_DIR: &str = "samples";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("scene {scene}: frame {t} has only {t} frames of history, {needed} needed")]
    InsufficientHistory {
        scene: String,
        t: usize,
        needed: usize,
    },
    #[error("scene {scene}: no ground-truth mask for frame {t}")]
    MissingMask { scene: String, t: usize },
    #[error("scene {scene}: frame {t} is outside the sequence")]
    FrameOutOfRange { scene: String, t: usize },
    #[error("scene {scene}: background series has {len} images, frame {t} requested")]
    BackgroundTooShort { scene: String, t: usize, len: usize },
    #[error("sample needs {expected} channels, found {found}")]
    ChannelCount { expected: usize, found: usize },
    #[error("train fraction {0} not in (0, 1)")]
    BadFraction(f64),
    #[error("scene {0} has no samples")]
    EmptyScene(String),
    #[error("unknown scene id {0}")]
    UnknownScene(String),
    #[error("split leaves no training scenes")]
    EmptyTrain,
    #[error("split is inconsistent: {0}")]
    InvalidSplit(String),
    #[error("duplicate sample id {0}")]
    DuplicateId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: cannot decode image: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: content hash mismatch (expected {expected}, found {found})")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct SampleMeta {
    pub scene_id: String,
    pub index: usize,
    pub bg_aug: BgAug,
    pub interval_aug: bool,
    pub source_scene: String,
    pub source_index: usize,
}

impl SampleMeta {
    pub fn key(&self) -> SampleKey {
        SampleKey {
            scene_id: self.scene_id.clone(),
            index: self.index,
        }
    }

    /// Stable identifier, unique per (scene, frame, augmentation variant).
    pub fn id(&self) -> String {
        format!(
            "{}_{:06}_{}{}",
            self.scene_id,
            self.index,
            self.bg_aug.as_str(),
            if self.interval_aug { "_iz" } else { "" }
        )
    }
}

/// One training unit: six gray channels, a binary target and an optional
/// weight mask (0 where the ground truth says ignore/unknown).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub channels: Vec<GrayImage>,
    /// Values in {0, 1}.
    pub target: GrayImage,
    /// Values in {0, 1}; `None` when every pixel counts.
    pub weight: Option<GrayImage>,
    pub meta: SampleMeta,
}

impl Sample {
    pub fn dimensions(&self) -> (u32, u32) {
        self.target.dimensions()
    }

    pub fn id(&self) -> String {
        self.meta.id()
    }
}

/// Channels mapped to `(v - 127.5) / 255`, so every value is in `[-0.5, 0.5]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSample<S> {
    pub width: u32,
    pub height: u32,
    pub channels: Vec<Vec<S>>,
    pub target: GrayImage,
    pub weight: Option<GrayImage>,
    pub meta: SampleMeta,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Past-frame offsets, one channel each.
    pub intervals: Vec<usize>,
    /// Output `[width, height]`.
    pub size: [u32; 2],
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            intervals: DEFAULT_INTERVALS.to_vec(),
            size: [DEFAULT_SIZE, DEFAULT_SIZE],
        }
    }
}

impl SampleConfig {
    pub fn max_interval(&self) -> usize {
        self.intervals.iter().copied().max().unwrap_or(0)
    }

    pub fn channel_order(&self) -> Vec<String> {
        ["current".to_string(), "background".to_string()]
            .into_iter()
            .chain(self.intervals.iter().map(|d| format!("past@{d}")))
            .collect()
    }

    pub fn channel_count(&self) -> usize {
        2 + self.intervals.len()
    }

    /// Frames of `scene` that can be assembled: labeled and with full history.
    pub fn eligible_indices(&self, scene: &Scene) -> Vec<usize> {
        let Some([first, last]) = scene.manifest.labeled_range else {
            return Vec::new();
        };
        (first.max(self.max_interval())..=last).collect()
    }
}

fn resize_channel(img: &GrayImage, [w, h]: [u32; 2]) -> GrayImage {
    if img.dimensions() == (w, h) {
        img.clone()
    } else {
        imageops::resize(img, w, h, FilterType::Triangle)
    }
}

fn resize_labels(img: &GrayImage, [w, h]: [u32; 2]) -> GrayImage {
    if img.dimensions() == (w, h) {
        img.clone()
    } else {
        imageops::resize(img, w, h, FilterType::Nearest)
    }
}

/// Split a label raster into a 0/1 target and a 0/1 weight mask.
pub fn labels_to_target(labels: &GrayImage) -> (GrayImage, Option<GrayImage>) {
    let (w, h) = labels.dimensions();
    let target = labels
        .iter()
        .map(|&v| u8::from(v == label::FOREGROUND))
        .collect();
    let weight: Vec<u8> = labels
        .iter()
        .map(|&v| u8::from(label::is_counted(v)))
        .collect();
    let weight = if weight.iter().all(|&v| v == 1) {
        None
    } else {
        Some(GrayImage::from_raw(w, h, weight).expect("sized"))
    };
    (GrayImage::from_raw(w, h, target).expect("sized"), weight)
}

/// Assemble the sample for frame `t` from `scene` and a background series
/// aligned with the scene's frames.
pub fn assemble_sample(
    scene: &Scene,
    backgrounds: &[GrayImage],
    bg_aug: BgAug,
    t: usize,
    cfg: &SampleConfig,
) -> Result<Sample, DatasetError> {
    let scene_id = scene.id().to_string();
    let needed = cfg.max_interval();
    if t < needed {
        return Err(DatasetError::InsufficientHistory {
            scene: scene_id,
            t,
            needed,
        });
    }
    if t >= scene.len() {
        return Err(DatasetError::FrameOutOfRange { scene: scene_id, t });
    }
    let mask = scene.mask(t).ok_or_else(|| DatasetError::MissingMask {
        scene: scene_id.clone(),
        t,
    })?;
    let background = backgrounds
        .get(t)
        .ok_or_else(|| DatasetError::BackgroundTooShort {
            scene: scene_id.clone(),
            t,
            len: backgrounds.len(),
        })?;

    let mut channels = Vec::with_capacity(cfg.channel_count());
    channels.push(resize_channel(&scene.frames[t].to_gray(), cfg.size));
    channels.push(resize_channel(background, cfg.size));
    for &d in &cfg.intervals {
        channels.push(resize_channel(&scene.frames[t - d].to_gray(), cfg.size));
    }
    let (target, weight) = labels_to_target(&resize_labels(mask.image(), cfg.size));
    Ok(Sample {
        channels,
        target,
        weight,
        meta: SampleMeta {
            scene_id: scene_id.clone(),
            index: t,
            bg_aug,
            interval_aug: false,
            source_scene: scene_id,
            source_index: t,
        },
    })
}

/// Map each channel value `v` to `(v - 127.5) / 255`. Target and weight pass
/// through unchanged.
pub fn preprocess<S: Scalar>(sample: &Sample) -> NormalizedSample<S> {
    let lut: Vec<S> = (0..=255u8)
        .map(|v| (S::lit(v as f64) - S::lit(127.5)) / S::lit(255.0))
        .collect();
    let (width, height) = sample.dimensions();
    NormalizedSample {
        width,
        height,
        channels: sample
            .channels
            .iter()
            .map(|ch| ch.iter().map(|&v| lut[v as usize]).collect())
            .collect(),
        target: sample.target.clone(),
        weight: sample.weight.clone(),
        meta: sample.meta.clone(),
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleKey {
    pub scene_id: String,
    pub index: usize,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Train and validation drawn from the same scenes.
    Sde,
    /// Test scenes disjoint from training scenes.
    Sie,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub mode: SplitMode,
    pub train: Vec<SampleKey>,
    pub val: Vec<SampleKey>,
    pub test: Vec<SampleKey>,
}

impl Split {
    /// Check pairwise disjointness and, for SIE, scene disjointness between
    /// train/val and test.
    pub fn check(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for key in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(key) {
                return Err(DatasetError::InvalidSplit(format!(
                    "{}#{} appears twice",
                    key.scene_id, key.index
                )));
            }
        }
        if self.mode == SplitMode::Sie {
            let fit: HashSet<_> = self
                .train
                .iter()
                .chain(&self.val)
                .map(|k| &k.scene_id)
                .collect();
            if let Some(k) = self.test.iter().find(|k| fit.contains(&k.scene_id)) {
                return Err(DatasetError::InvalidSplit(format!(
                    "scene {} is in both training and test",
                    k.scene_id
                )));
            }
        }
        Ok(())
    }

    pub fn scenes(keys: &[SampleKey]) -> BTreeSet<&str> {
        keys.iter().map(|k| k.scene_id.as_str()).collect()
    }
}

/// Sample frame indices of one scene, in temporal order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SceneSamples {
    pub scene_id: String,
    pub indices: Vec<usize>,
}

fn check_fraction(f: f64) -> Result<(), DatasetError> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(DatasetError::BadFraction(f))
    }
}

fn train_count(n: usize, fraction: f64) -> usize {
    // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
    ((n as f64 * fraction + 1e-9).floor() as usize).min(n)
}

fn sde_into(scenes: &[SceneSamples], fraction: f64, split: &mut Split) -> Result<(), DatasetError> {
    for s in scenes {
        if s.indices.is_empty() {
            return Err(DatasetError::EmptyScene(s.scene_id.clone()));
        }
        let k = train_count(s.indices.len(), fraction);
        let key = |&index: &usize| SampleKey {
            scene_id: s.scene_id.clone(),
            index,
        };
        split.train.extend(s.indices[..k].iter().map(key));
        split.val.extend(s.indices[k..].iter().map(key));
    }
    Ok(())
}

/// Per scene, the first `floor(n * fraction)` samples train and the rest
/// validate.
pub fn split_sde(scenes: &[SceneSamples], train_fraction: f64) -> Result<Split, DatasetError> {
    check_fraction(train_fraction)?;
    let mut split = Split {
        mode: SplitMode::Sde,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    sde_into(scenes, train_fraction, &mut split)?;
    Ok(split)
}

/// Every sample of the test scenes goes to test; the remaining scenes are
/// split into train/val as in [`split_sde`].
pub fn split_sie(
    scenes: &[SceneSamples],
    test_scene_ids: &[String],
    train_fraction: f64,
) -> Result<Split, DatasetError> {
    check_fraction(train_fraction)?;
    let known: HashSet<&str> = scenes.iter().map(|s| s.scene_id.as_str()).collect();
    if let Some(id) = test_scene_ids
        .iter()
        .find(|id| !known.contains(id.as_str()))
    {
        return Err(DatasetError::UnknownScene(id.clone()));
    }
    let test_ids: HashSet<&str> = test_scene_ids.iter().map(String::as_str).collect();
    let (test, fit): (Vec<_>, Vec<_>) = scenes
        .iter()
        .cloned()
        .partition(|s| test_ids.contains(s.scene_id.as_str()));
    if fit.is_empty() {
        return Err(DatasetError::EmptyTrain);
    }
    let mut split = Split {
        mode: SplitMode::Sie,
        train: Vec::new(),
        val: Vec::new(),
        test: test
            .iter()
            .flat_map(|s| {
                s.indices.iter().map(|&index| SampleKey {
                    scene_id: s.scene_id.clone(),
                    index,
                })
            })
            .collect(),
    };
    sde_into(&fit, train_fraction, &mut split)?;
    Ok(split)
}

/// Category-paired SIE test set: in each category, the first scene (in
/// manifest order) trains and the second one tests. Further scenes train.
pub fn category_paired_test_scenes(manifests: &[SceneManifest]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut test = Vec::new();
    for m in manifests {
        let n = seen.entry(&m.category).or_default();
        if *n == 1 {
            test.push(m.scene_id.clone());
        }
        *n += 1;
    }
    test
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct SampleEntry {
    pub id: String,
    pub scene_id: String,
    pub index: usize,
    pub bg_aug: BgAug,
    pub interval_aug: bool,
    /// `c0`..`c5`, `target` and optionally `weight`, relative to the dataset root.
    pub files: BTreeMap<String, String>,
    pub sha256s: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct SplitIds {
    pub mode: SplitMode,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub version: u32,
    pub channel_order: Vec<String>,
    pub samples: Vec<SampleEntry>,
    pub split: Option<SplitIds>,
}

impl DatasetManifest {
    pub fn read(dir: &Path) -> Result<Self, DatasetError> {
        let path = dir.join(DATASET_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|source| DatasetError::Json { path, source })
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_png_levels(img: &GrayImage) -> GrayImage {
    let mut out = img.clone();
    out.iter_mut()
        .for_each(|v| *v = if *v != 0 { 255 } else { 0 });
    out
}

/// Resolve a key-level split to sample ids: every augmentation variant of a
/// frame goes where the frame goes.
pub fn split_ids(split: &Split, samples: &[Sample]) -> SplitIds {
    split_ids_for(split, samples.iter().map(|s| &s.meta))
}

fn split_ids_for<'a>(split: &Split, metas: impl Iterator<Item = &'a SampleMeta>) -> SplitIds {
    let train: HashSet<_> = split.train.iter().collect();
    let val: HashSet<_> = split.val.iter().collect();
    let test: HashSet<_> = split.test.iter().collect();
    let mut ids = SplitIds {
        mode: split.mode,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for meta in metas {
        let key = meta.key();
        if train.contains(&key) {
            ids.train.push(meta.id());
        } else if val.contains(&key) {
            ids.val.push(meta.id());
        } else if test.contains(&key) {
            ids.test.push(meta.id());
        }
    }
    ids
}

fn export_sample(sample: &Sample, out_dir: &Path) -> Result<SampleEntry, DatasetError> {
    let id = sample.id();
    let rel_dir = format!("{SAMPLES_DIR}/{id}");
    let mut files = BTreeMap::new();
    let mut sha256s = BTreeMap::new();
    let mut write = |name: String, bytes: Vec<u8>| -> Result<(), DatasetError> {
        let rel = format!("{rel_dir}/{name}.png");
        let path = out_dir.join(&rel);
        fsutil::write_atomic(&path, &bytes).map_err(io_err(&path))?;
        sha256s.insert(name.clone(), sha256_hex(&bytes));
        files.insert(name, rel);
        Ok(())
    };
    for (i, ch) in sample.channels.iter().enumerate() {
        write(format!("c{i}"), fsutil::encode_gray_png(ch))?;
    }
    write(
        "target".into(),
        fsutil::encode_gray_png(&to_png_levels(&sample.target)),
    )?;
    if let Some(weight) = &sample.weight {
        write(
            "weight".into(),
            fsutil::encode_gray_png(&to_png_levels(weight)),
        )?;
    }
    let meta_path = out_dir.join(&rel_dir).join("meta.json");
    let meta = serde_json::to_vec_pretty(&sample.meta).expect("meta serializes");
    fsutil::write_atomic(&meta_path, &meta).map_err(io_err(&meta_path))?;
    Ok(SampleEntry {
        id,
        scene_id: sample.meta.scene_id.clone(),
        index: sample.meta.index,
        bg_aug: sample.meta.bg_aug,
        interval_aug: sample.meta.interval_aug,
        files,
        sha256s,
    })
}

/// Incremental exporter: samples are written batch by batch and the
/// manifest is written by [`DatasetWriter::finish`].
pub struct DatasetWriter {
    out_dir: PathBuf,
    channel_order: Vec<String>,
    entries: Vec<SampleEntry>,
    metas: Vec<SampleMeta>,
    ids: HashSet<String>,
}

impl DatasetWriter {
    pub fn new(out_dir: &Path, channel_order: Vec<String>) -> Self {
        Self {
            out_dir: out_dir.to_path_buf(),
            channel_order,
            entries: Vec::new(),
            metas: Vec::new(),
            ids: HashSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Write a batch in parallel.
    pub fn write(&mut self, samples: &[Sample]) -> Result<(), DatasetError> {
        for s in samples {
            if s.channels.len() != self.channel_order.len() {
                return Err(DatasetError::ChannelCount {
                    expected: self.channel_order.len(),
                    found: s.channels.len(),
                });
            }
            if !self.ids.insert(s.id()) {
                return Err(DatasetError::DuplicateId(s.id()));
            }
        }
        let entries = samples
            .par_iter()
            .map(|s| export_sample(s, &self.out_dir))
            .collect::<Result<Vec<_>, _>>()?;
        self.entries.extend(entries);
        self.metas.extend(samples.iter().map(|s| s.meta.clone()));
        Ok(())
    }

    pub fn finish(self, split: Option<&Split>) -> Result<DatasetManifest, DatasetError> {
        if let Some(split) = split {
            split.check()?;
        }
        let manifest = DatasetManifest {
            version: FORMAT_VERSION,
            channel_order: self.channel_order,
            samples: self.entries,
            split: split.map(|s| split_ids_for(s, self.metas.iter())),
        };
        let path = self.out_dir.join(DATASET_FILE);
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        fsutil::write_atomic(&path, &json).map_err(io_err(&path))?;
        Ok(manifest)
    }
}

/// Write samples (in parallel) and the `dataset.json` manifest.
pub fn export(
    samples: &[Sample],
    split: Option<&Split>,
    channel_order: Vec<String>,
    out_dir: &Path,
) -> Result<DatasetManifest, DatasetError> {
    if let Some(split) = split {
        split.check()?;
    }
    let mut writer = DatasetWriter::new(out_dir, channel_order);
    writer.write(samples)?;
    writer.finish(split)
}

fn read_checked(
    root: &Path,
    entry: &SampleEntry,
    name: &str,
) -> Result<Option<GrayImage>, DatasetError> {
    let Some(rel) = entry.files.get(name) else {
        return Ok(None);
    };
    let path = root.join(rel);
    let bytes = std::fs::read(&path).map_err(io_err(&path))?;
    let found = sha256_hex(&bytes);
    let expected = entry.sha256s.get(name).cloned().unwrap_or_default();
    if found != expected {
        return Err(DatasetError::HashMismatch {
            path,
            expected,
            found,
        });
    }
    let img = image::load_from_memory(&bytes).map_err(|source| DatasetError::Image {
        path: path.clone(),
        source,
    })?;
    match img {
        image::DynamicImage::ImageLuma8(g) => Ok(Some(g)),
        _ => Err(DatasetError::Corrupt {
            path,
            reason: "expected an 8-bit gray PNG".into(),
        }),
    }
}

fn from_png_levels(img: GrayImage, path: &Path) -> Result<GrayImage, DatasetError> {
    let mut out = img;
    for v in out.iter_mut() {
        *v = match *v {
            0 => 0,
            255 => 1,
            other => {
                return Err(DatasetError::Corrupt {
                    path: path.to_path_buf(),
                    reason: format!("binary raster contains value {other}"),
                })
            }
        };
    }
    Ok(out)
}

/// Read a dataset written by [`export`], verifying every content hash.
pub fn import(dir: &Path) -> Result<(DatasetManifest, Vec<Sample>), DatasetError> {
    let manifest = DatasetManifest::read(dir)?;
    let samples = manifest
        .samples
        .par_iter()
        .map(|entry| {
            let mut channels = Vec::with_capacity(manifest.channel_order.len());
            for i in 0..manifest.channel_order.len() {
                let name = format!("c{i}");
                let img =
                    read_checked(dir, entry, &name)?.ok_or_else(|| DatasetError::Corrupt {
                        path: dir.join(DATASET_FILE),
                        reason: format!("sample {} lacks channel {name}", entry.id),
                    })?;
                channels.push(img);
            }
            let target_path = dir.join(entry.files.get("target").cloned().unwrap_or_default());
            let target =
                read_checked(dir, entry, "target")?.ok_or_else(|| DatasetError::Corrupt {
                    path: dir.join(DATASET_FILE),
                    reason: format!("sample {} lacks a target", entry.id),
                })?;
            let target = from_png_levels(target, &target_path)?;
            let weight = match read_checked(dir, entry, "weight")? {
                Some(w) => Some(from_png_levels(w, &dir.join(&entry.files["weight"]))?),
                None => None,
            };
            let meta_path = dir.join(SAMPLES_DIR).join(&entry.id).join("meta.json");
            let text = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
            let meta: SampleMeta =
                serde_json::from_str(&text).map_err(|source| DatasetError::Json {
                    path: meta_path.clone(),
                    source,
                })?;
            if meta.id() != entry.id
                || meta.scene_id != entry.scene_id
                || meta.index != entry.index
                || meta.bg_aug != entry.bg_aug
                || meta.interval_aug != entry.interval_aug
            {
                return Err(DatasetError::Corrupt {
                    path: meta_path,
                    reason: "metadata disagrees with dataset.json".into(),
                });
            }
            Ok(Sample {
                channels,
                target,
                weight,
                meta,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, samples))
}
