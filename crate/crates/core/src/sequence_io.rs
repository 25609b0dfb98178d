//! Scene directories: frames, ground-truth masks and the scene manifest.
//!
//! A scene on disk looks like
//!
//! ```text
//! <root>/input/<prefix><index>.png|jpg
//! <root>/groundtruth/<prefix><index>.png
//! <root>/manifest.json
//! ```
//!
//! Indices are zero-padded decimals. The first input file defines index 0,
//! so 1-based datasets load unchanged. Without a manifest the labeled range
//! is inferred from the masks present (or from a `temporalROI.txt` file when
//! one exists, as in CDnet).

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmentation::SceneEdit;
use crate::fsutil;

pub const INPUT_DIR: &str = "input";
pub const GROUNDTRUTH_DIR: &str = "groundtruth";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TEMPORAL_ROI_FILE: &str = "temporalROI.txt";

/// Mask label values.
pub mod label {
    pub const BACKGROUND: u8 = 0;
    /// CDnet hard shadow; remapped to [`IGNORE`] on load.
    pub const SHADOW: u8 = 50;
    pub const IGNORE: u8 = 85;
    pub const UNKNOWN: u8 = 170;
    pub const FOREGROUND: u8 = 255;

    pub fn is_legal(v: u8) -> bool {
        matches!(v, BACKGROUND | IGNORE | UNKNOWN | FOREGROUND)
    }

    /// Pixels that take part in confusion counting.
    pub fn is_counted(v: u8) -> bool {
        matches!(v, BACKGROUND | FOREGROUND)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: cannot parse manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: invalid manifest: {reason}")]
    InvalidManifest { path: PathBuf, reason: String },
    #[error("{path}: file name does not end in a frame index")]
    BadFileName { path: PathBuf },
    #[error("{path}: duplicate frame index {index}")]
    DuplicateIndex { path: PathBuf, index: usize },
    #[error("{dir}: no input frames")]
    NoFrames { dir: PathBuf },
    #[error("{dir}: frame index {missing} is missing (next file is {next})")]
    MissingFrame {
        dir: PathBuf,
        missing: usize,
        next: PathBuf,
    },
    #[error("{dir}: ground-truth mask for frame {index} is missing")]
    MissingMask { dir: PathBuf, index: usize },
    #[error("{path}: mask has no corresponding input frame")]
    OrphanMask { path: PathBuf },
    #[error("{path}: dimensions {found:?} differ from the scene's {expected:?}")]
    DimensionMismatch {
        path: PathBuf,
        expected: (u32, u32, u8),
        found: (u32, u32, u8),
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LoadError + '_ {
    move |source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Frame raster, gray or RGB.
#[derive(Clone, Debug, PartialEq)]
pub enum Pixels {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl Pixels {
    pub fn dimensions(&self) -> (u32, u32) {
        match self {
            Pixels::Gray(img) => img.dimensions(),
            Pixels::Rgb(img) => img.dimensions(),
        }
    }

    pub fn channels(&self) -> u8 {
        match self {
            Pixels::Gray(_) => 1,
            Pixels::Rgb(_) => 3,
        }
    }

    /// Gray view; RGB input is converted with `round(0.299R + 0.587G + 0.114B)`.
    pub fn to_gray(&self) -> Cow<'_, GrayImage> {
        match self {
            Pixels::Gray(img) => Cow::Borrowed(img),
            Pixels::Rgb(img) => Cow::Owned(rgb_to_gray(img)),
        }
    }

    fn shape(&self) -> (u32, u32, u8) {
        let (w, h) = self.dimensions();
        (w, h, self.channels())
    }
}

pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    // Integer form of round(0.299R + 0.587G + 0.114B); the weights sum to 1000.
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

pub fn rgb_to_gray(img: &RgbImage) -> GrayImage {
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| luma(p[0], p[1], p[2])).collect();
    GrayImage::from_raw(w, h, data).expect("buffer sized from source image")
}

/// One frame of a scene. Pixel data is shared, so cloning (and splicing
/// frames into new positions) is cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub pixels: Arc<Pixels>,
}

impl Frame {
    pub fn new(index: usize, pixels: Pixels) -> Self {
        Self {
            index,
            pixels: Arc::new(pixels),
        }
    }

    pub fn gray(index: usize, img: GrayImage) -> Self {
        Self::new(index, Pixels::Gray(img))
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.pixels.dimensions()
    }

    pub fn to_gray(&self) -> Cow<'_, GrayImage> {
        self.pixels.to_gray()
    }
}

/// Ground-truth label raster. See [`label`] for the encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask(pub GrayImage);

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Mask(GrayImage::new(width, height))
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Option<Self> {
        GrayImage::from_raw(width, height, data).map(Mask)
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.0.dimensions()
    }

    pub fn as_raw(&self) -> &[u8] {
        self.0.as_raw()
    }

    pub fn image(&self) -> &GrayImage {
        &self.0
    }

    pub fn foreground_pixels(&self) -> usize {
        self.as_raw()
            .iter()
            .filter(|&&v| v == label::FOREGROUND)
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.foreground_pixels() == 0
    }

    pub fn first_illegal_value(&self) -> Option<u8> {
        self.as_raw().iter().copied().find(|&v| !label::is_legal(v))
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Ground truth only for a middle section of the sequence.
    TemporalRoi,
    /// Every frame labeled.
    FullLabel,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct SceneManifest {
    pub scene_id: String,
    pub layout: Layout,
    /// Inclusive `[first, last]` range of labeled frames; `None` for an
    /// unlabeled scene.
    pub labeled_range: Option<[usize; 2]>,
    /// The scene's foreground objects are people only.
    pub human_foreground: bool,
    /// A frame with no foreground objects, used to correct the background.
    pub clean_frame_index: Option<usize>,
    /// First frame in which a (later static) foreground object appears.
    pub foreground_appear_index: Option<usize>,
    pub category: String,
}

impl SceneManifest {
    pub fn is_labeled(&self, index: usize) -> bool {
        self.labeled_range
            .is_some_and(|[first, last]| (first..=last).contains(&index))
    }

    fn check_bounds(&self, len: usize) -> Result<(), String> {
        if let Some([first, last]) = self.labeled_range {
            if first > last || last >= len {
                return Err(format!(
                    "labeled_range [{first}, {last}] not within [0, {len})"
                ));
            }
        }
        for (name, idx) in [
            ("clean_frame_index", self.clean_frame_index),
            ("foreground_appear_index", self.foreground_appear_index),
        ] {
            if let Some(i) = idx {
                if i >= len {
                    return Err(format!("{name} {i} not within [0, {len})"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub manifest: SceneManifest,
    pub frames: Vec<Frame>,
    pub masks: BTreeMap<usize, Mask>,
    /// Augmentation edits applied since load, oldest first.
    pub edits: Vec<SceneEdit>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn id(&self) -> &str {
        &self.manifest.scene_id
    }

    /// `(width, height)` of the first frame.
    pub fn dimensions(&self) -> Option<(u32, u32)> {
        self.frames.first().map(Frame::dimensions)
    }

    pub fn gray(&self, index: usize) -> Option<Cow<'_, GrayImage>> {
        self.frames.get(index).map(Frame::to_gray)
    }

    pub fn mask(&self, index: usize) -> Option<&Mask> {
        self.masks.get(&index)
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Layout to assume when no manifest is present.
    pub layout_hint: Option<Layout>,
    /// Required input file-name prefix; any non-digit prefix when `None`.
    pub input_prefix: Option<String>,
    pub gt_prefix: Option<String>,
}

fn is_image_ext(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

/// Parse the trailing decimal index of a file stem, honoring `prefix`.
fn parse_index(stem: &str, prefix: Option<&str>) -> Option<usize> {
    let digits = match prefix {
        Some(p) => stem.strip_prefix(p)?,
        None => stem.trim_start_matches(|c: char| !c.is_ascii_digit()),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// List indexed image files, sorted by index (not by directory order).
fn list_indexed(dir: &Path, prefix: Option<&str>) -> Result<Vec<(usize, PathBuf)>, LoadError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if !path.is_file() || !is_image_ext(&path) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        match parse_index(stem, prefix) {
            Some(i) => out.push((i, path)),
            None => return Err(LoadError::BadFileName { path }),
        }
    }
    out.sort();
    for pair in out.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(LoadError::DuplicateIndex {
                path: pair[1].1.clone(),
                index: pair[1].0,
            });
        }
    }
    Ok(out)
}

fn decode(path: &Path) -> Result<DynamicImage, LoadError> {
    image::open(path).map_err(|source| LoadError::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn decode_frame(path: &Path) -> Result<Pixels, LoadError> {
    Ok(match decode(path)? {
        DynamicImage::ImageLuma8(img) => Pixels::Gray(img),
        DynamicImage::ImageRgb8(img) => Pixels::Rgb(img),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) => {
            Pixels::Gray(decode(path)?.to_luma8())
        }
        other => Pixels::Rgb(other.to_rgb8()),
    })
}

fn decode_mask(path: &Path) -> Result<Mask, LoadError> {
    let mut img = decode(path)?.to_luma8();
    for v in img.iter_mut() {
        if *v == label::SHADOW {
            *v = label::IGNORE;
        }
    }
    Ok(Mask(img))
}

fn read_temporal_roi(path: &Path, offset: usize) -> Result<Option<[usize; 2]>, LoadError> {
    if !path.is_file() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let nums: Vec<usize> = text
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| LoadError::InvalidManifest {
            path: path.to_path_buf(),
            reason: "expected two frame numbers".into(),
        })?;
    match nums.as_slice() {
        [a, b] if *a >= offset && a <= b => Ok(Some([a - offset, b - offset])),
        _ => Err(LoadError::InvalidManifest {
            path: path.to_path_buf(),
            reason: format!("bad range {nums:?}"),
        }),
    }
}

fn default_names(root: &Path) -> (String, String) {
    let name = |p: Option<&Path>| {
        p.and_then(|p| p.file_name())
            .and_then(|n| n.to_str())
            .map(str::to_owned)
    };
    let canonical = root.canonicalize().unwrap_or_else(|_| root.to_path_buf());
    let scene = name(Some(&canonical)).unwrap_or_else(|| "scene".into());
    let category = name(canonical.parent()).unwrap_or_else(|| "uncategorized".into());
    (scene, category)
}

/// Load a scene directory.
pub fn load_scene(root: &Path, opts: &LoadOptions) -> Result<Scene, LoadError> {
    let input_dir = root.join(INPUT_DIR);
    let files = list_indexed(&input_dir, opts.input_prefix.as_deref())?;
    let Some(&(offset, _)) = files.first() else {
        return Err(LoadError::NoFrames { dir: input_dir });
    };
    for (expected, (idx, path)) in (offset..).zip(&files) {
        if *idx != expected {
            return Err(LoadError::MissingFrame {
                dir: input_dir,
                missing: expected - offset,
                next: path.clone(),
            });
        }
    }

    let mut frames = Vec::with_capacity(files.len());
    let mut shape = None;
    for (i, (_, path)) in files.iter().enumerate() {
        let pixels = decode_frame(path)?;
        let s = pixels.shape();
        match shape {
            None => shape = Some(s),
            Some(expected) if expected != s => {
                return Err(LoadError::DimensionMismatch {
                    path: path.clone(),
                    expected,
                    found: s,
                })
            }
            _ => {}
        }
        frames.push(Frame::new(i, pixels));
    }
    let (w, h, _) = shape.expect("at least one frame");
    let len = frames.len();

    let mut masks = BTreeMap::new();
    let gt_dir = root.join(GROUNDTRUTH_DIR);
    if gt_dir.is_dir() {
        for (idx, path) in list_indexed(&gt_dir, opts.gt_prefix.as_deref())? {
            if idx < offset || idx - offset >= len {
                return Err(LoadError::OrphanMask { path });
            }
            let mask = decode_mask(&path)?;
            if mask.dimensions() != (w, h) {
                let (mw, mh) = mask.dimensions();
                return Err(LoadError::DimensionMismatch {
                    path,
                    expected: (w, h, 1),
                    found: (mw, mh, 1),
                });
            }
            masks.insert(idx - offset, mask);
        }
    }

    let manifest_path = root.join(MANIFEST_FILE);
    let manifest = if manifest_path.is_file() {
        let text = std::fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let m: SceneManifest =
            serde_json::from_str(&text).map_err(|source| LoadError::Manifest {
                path: manifest_path.clone(),
                source,
            })?;
        m.check_bounds(len)
            .map_err(|reason| LoadError::InvalidManifest {
                path: manifest_path.clone(),
                reason,
            })?;
        m
    } else {
        let roi = read_temporal_roi(&root.join(TEMPORAL_ROI_FILE), offset)?;
        let labeled_range = roi.or_else(|| {
            let first = *masks.keys().next()?;
            let last = *masks.keys().next_back()?;
            Some([first, last])
        });
        if let Some([_, last]) = labeled_range {
            if last >= len {
                return Err(LoadError::InvalidManifest {
                    path: root.join(TEMPORAL_ROI_FILE),
                    reason: format!("range ends past the last frame {}", len - 1),
                });
            }
        }
        let layout = opts.layout_hint.unwrap_or(match labeled_range {
            Some([0, last]) if last + 1 == len => Layout::FullLabel,
            _ => Layout::TemporalRoi,
        });
        let (scene_id, category) = default_names(root);
        SceneManifest {
            scene_id,
            layout,
            labeled_range,
            human_foreground: false,
            clean_frame_index: None,
            foreground_appear_index: None,
            category,
        }
    };

    // Masks outside the labeled range (CDnet's out-of-ROI frames) are dropped.
    masks.retain(|&i, _| manifest.is_labeled(i));
    if let Some([first, last]) = manifest.labeled_range {
        if let Some(index) = (first..=last).find(|i| !masks.contains_key(i)) {
            return Err(LoadError::MissingMask { dir: gt_dir, index });
        }
    }

    Ok(Scene {
        manifest,
        frames,
        masks,
        edits: Vec::new(),
    })
}

#[derive(Clone, Debug)]
pub struct WriteOptions {
    pub input_prefix: String,
    pub gt_prefix: String,
    pub digits: usize,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            input_prefix: "in".into(),
            gt_prefix: "gt".into(),
            digits: 6,
        }
    }
}

pub fn frame_file_name(prefix: &str, index: usize, digits: usize) -> String {
    format!("{prefix}{index:0digits$}.png")
}

/// Write a scene in the standard directory layout (PNG frames and masks).
pub fn write_scene(scene: &Scene, root: &Path, opts: &WriteOptions) -> std::io::Result<()> {
    for frame in &scene.frames {
        let path = root.join(INPUT_DIR).join(frame_file_name(
            &opts.input_prefix,
            frame.index,
            opts.digits,
        ));
        let bytes = match frame.pixels.as_ref() {
            Pixels::Gray(img) => fsutil::encode_gray_png(img),
            Pixels::Rgb(img) => fsutil::encode_rgb_png(img),
        };
        fsutil::write_atomic(&path, &bytes)?;
    }
    for (index, mask) in &scene.masks {
        let path =
            root.join(GROUNDTRUTH_DIR)
                .join(frame_file_name(&opts.gt_prefix, *index, opts.digits));
        fsutil::write_gray_png(&path, mask.image())?;
    }
    let json = serde_json::to_vec_pretty(&scene.manifest).map_err(std::io::Error::other)?;
    fsutil::write_atomic(&root.join(MANIFEST_FILE), &json)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    EmptyScene,
    NonContiguousIndex,
    FrameDimensionMismatch,
    MaskDimensionMismatch,
    IllegalLabelValue,
    LabeledRangeOutOfBounds,
    MissingMask,
    MaskOutsideLabeledRange,
    AnnotationOutOfBounds,
    LayoutMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Check every scene invariant; one diagnostic per violation.
pub fn validate_scene(scene: &Scene) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |kind, message: String| out.push(Diagnostic { kind, message });

    let Some(first) = scene.frames.first() else {
        push(DiagnosticKind::EmptyScene, "scene has no frames".into());
        return out;
    };
    let shape = first.pixels.shape();
    for (i, frame) in scene.frames.iter().enumerate() {
        if frame.index != i {
            push(
                DiagnosticKind::NonContiguousIndex,
                format!("frame at position {i} has index {}", frame.index),
            );
        }
        if frame.pixels.shape() != shape {
            push(
                DiagnosticKind::FrameDimensionMismatch,
                format!(
                    "frame {i} has shape {:?}, expected {shape:?}",
                    frame.pixels.shape()
                ),
            );
        }
    }

    let len = scene.len();
    let m = &scene.manifest;
    let range_ok = match m.labeled_range {
        Some([a, b]) if a > b || b >= len => {
            push(
                DiagnosticKind::LabeledRangeOutOfBounds,
                format!("labeled_range [{a}, {b}] not within [0, {len})"),
            );
            false
        }
        _ => true,
    };
    for (name, idx) in [
        ("clean_frame_index", m.clean_frame_index),
        ("foreground_appear_index", m.foreground_appear_index),
    ] {
        if let Some(i) = idx.filter(|&i| i >= len) {
            push(
                DiagnosticKind::AnnotationOutOfBounds,
                format!("{name} {i} not within [0, {len})"),
            );
        }
    }
    if m.layout == Layout::FullLabel && m.labeled_range != Some([0, len - 1]) {
        push(
            DiagnosticKind::LayoutMismatch,
            format!(
                "full-label layout but labeled_range is {:?}",
                m.labeled_range
            ),
        );
    }

    if range_ok {
        if let Some([a, b]) = m.labeled_range {
            for i in (a..=b).filter(|i| !scene.masks.contains_key(i)) {
                push(
                    DiagnosticKind::MissingMask,
                    format!("no mask for labeled frame {i}"),
                );
            }
        }
    }
    for (&i, mask) in &scene.masks {
        if !m.is_labeled(i) {
            push(
                DiagnosticKind::MaskOutsideLabeledRange,
                format!(
                    "mask at frame {i} lies outside labeled_range {:?}",
                    m.labeled_range
                ),
            );
        }
        if mask.dimensions() != (shape.0, shape.1) {
            push(
                DiagnosticKind::MaskDimensionMismatch,
                format!(
                    "mask {i} is {:?}, frames are {:?}",
                    mask.dimensions(),
                    (shape.0, shape.1)
                ),
            );
        }
        if let Some(v) = mask.first_illegal_value() {
            push(
                DiagnosticKind::IllegalLabelValue,
                format!("illegal label value {v} in mask {i}"),
            );
        }
    }
    out
}
