//! Per-pixel sample-consensus background subtraction.
//!
//! Each pixel keeps a bank of `n_samples` gray values. A pixel is background
//! when at least `min_matches` samples lie within `match_radius` of its value.
//! Background pixels refresh a random sample of their own bank with
//! probability `1/T` and, with diffusion enabled, push their value into a
//! random 8-neighbor's bank with probability `1/T`. The rendered background
//! image is the per-pixel median of the bank.
//!
//! The update is conservative: pixels classified foreground never enter
//! their own bank. Objects present when the model is initialized are
//! therefore baked into the background and disappear only slowly, by
//! diffusion from the edges, after they leave.

use std::path::Path;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil;
use crate::rng;
use crate::sequence_io::{frame_file_name, label, Mask, Scene};

pub const BGMODEL_DIR: &str = "bgmodel";
/// Half-width of the uniform jitter applied to the first frame at init.
pub const INIT_JITTER: i32 = 10;

/// Frames at least this large are classified in parallel.
const PAR_MIN_PIXELS: usize = 1 << 16;

#[derive(Debug, Error, PartialEq)]
pub enum BgsError {
    #[error("invalid background parameters: {0}")]
    InvalidParams(String),
    #[error("cannot initialize from an empty frame")]
    EmptyFrame,
    #[error("frame is {found:?} but the model is {expected:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("scene has no frames")]
    EmptyScene,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct BgParams {
    pub n_samples: usize,
    pub min_matches: usize,
    pub match_radius: u8,
    /// Expected update period `T`.
    pub subsample_factor: u32,
    pub neighbor_diffusion: bool,
    pub seed: u64,
}

impl Default for BgParams {
    fn default() -> Self {
        Self {
            n_samples: 20,
            min_matches: 2,
            match_radius: 20,
            subsample_factor: 16,
            neighbor_diffusion: true,
            seed: 0,
        }
    }
}

impl BgParams {
    pub fn validate(&self) -> Result<(), BgsError> {
        if self.min_matches < 1 {
            return Err(BgsError::InvalidParams(
                "min_matches must be at least 1".into(),
            ));
        }
        if self.n_samples < self.min_matches {
            return Err(BgsError::InvalidParams(format!(
                "n_samples {} is smaller than min_matches {}",
                self.n_samples, self.min_matches
            )));
        }
        if self.subsample_factor < 1 {
            return Err(BgsError::InvalidParams(
                "subsample_factor must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub type BackgroundImage = GrayImage;

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundModel {
    width: u32,
    height: u32,
    /// Pixel-major: samples of pixel `p` are `bank[p * n .. (p + 1) * n]`.
    bank: Vec<u8>,
    params: BgParams,
    frame_count: u64,
    /// Median of each bank, refreshed for the banks an update touches.
    background: Vec<u8>,
}

fn bank_median(samples: &[u8]) -> u8 {
    let n = samples.len();
    if n > 64 {
        return median_slow(samples);
    }
    let mut buf = [0u8; 64];
    let sorted = &mut buf[..n];
    sorted.copy_from_slice(samples);
    sorted.sort_unstable();
    median_sorted(sorted)
}

impl BackgroundModel {
    /// Fill every bank with the first frame plus uniform jitter in
    /// `[-INIT_JITTER, INIT_JITTER]`, clipped to `[0, 255]`.
    pub fn init(frame: &GrayImage, params: BgParams) -> Result<Self, BgsError> {
        params.validate()?;
        let (width, height) = frame.dimensions();
        if width == 0 || height == 0 {
            return Err(BgsError::EmptyFrame);
        }
        let n = params.n_samples;
        let mut bank = vec![0u8; frame.as_raw().len() * n];
        bank.par_chunks_mut(n)
            .zip(frame.as_raw().par_iter())
            .enumerate()
            .for_each(|(p, (samples, &v))| {
                for (k, s) in samples.iter_mut().enumerate() {
                    let bits = rng::hash(params.seed, rng::STREAM_BANK_INIT, p as u64, k as u64);
                    let jitter = rng::between(bits, -INIT_JITTER, INIT_JITTER);
                    *s = (v as i32 + jitter).clamp(0, 255) as u8;
                }
            });
        let background = bank.par_chunks(n).map(bank_median).collect();
        Ok(Self {
            width,
            height,
            bank,
            params,
            frame_count: 0,
            background,
        })
    }

    pub fn params(&self) -> &BgParams {
        &self.params
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn samples(&self, x: u32, y: u32) -> &[u8] {
        let n = self.params.n_samples;
        let p = (y * self.width + x) as usize;
        &self.bank[p * n..(p + 1) * n]
    }

    fn is_background(&self, p: usize, v: u8) -> bool {
        let n = self.params.n_samples;
        let radius = self.params.match_radius as i16;
        let mut matches = 0;
        for &s in &self.bank[p * n..(p + 1) * n] {
            if (s as i16 - v as i16).abs() <= radius {
                matches += 1;
                if matches >= self.params.min_matches {
                    return true;
                }
            }
        }
        false
    }

    /// Classify every pixel of `frame` against the current banks.
    pub fn classify(&self, frame: &GrayImage) -> Result<Mask, BgsError> {
        self.check_dims(frame)?;
        let w = self.width as usize;
        let src = frame.as_raw();
        let mut out = vec![label::BACKGROUND; src.len()];
        let classify_row = |(y, row): (usize, &mut [u8])| {
            for (x, o) in row.iter_mut().enumerate() {
                let p = y * w + x;
                if !self.is_background(p, src[p]) {
                    *o = label::FOREGROUND;
                }
            }
        };
        if src.len() >= PAR_MIN_PIXELS {
            out.par_chunks_mut(w).enumerate().for_each(classify_row);
        } else {
            out.chunks_mut(w).enumerate().for_each(classify_row);
        }
        Ok(Mask::from_raw(self.width, self.height, out).expect("sized"))
    }

    /// Classify `frame`, update the banks and render the new background.
    pub fn step(&mut self, frame: &GrayImage) -> Result<(Mask, BackgroundImage), BgsError> {
        let mask = self.classify(frame)?;
        self.update(frame, &mask);
        self.frame_count += 1;
        Ok((mask, self.background_image()))
    }

    fn check_dims(&self, frame: &GrayImage) -> Result<(), BgsError> {
        if frame.dimensions() != (self.width, self.height) {
            return Err(BgsError::DimensionMismatch {
                expected: (self.width, self.height),
                found: frame.dimensions(),
            });
        }
        Ok(())
    }

    /// Random in-bounds 8-neighbor of `(x, y)`.
    fn pick_neighbor(&self, x: usize, y: usize, bits: u64) -> usize {
        const OFFSETS: [(isize, isize); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        let (w, h) = (self.width as isize, self.height as isize);
        let mut valid = [0usize; 8];
        let mut count = 0;
        for (dx, dy) in OFFSETS {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx >= 0 && ny >= 0 && nx < w && ny < h {
                valid[count] = (ny * w + nx) as usize;
                count += 1;
            }
        }
        if count == 0 {
            // 1x1 frame: the only "neighbor" is the pixel itself.
            return y * self.width as usize + x;
        }
        valid[rng::below(bits, count)]
    }

    fn update(&mut self, frame: &GrayImage, mask: &Mask) {
        let n = self.params.n_samples;
        let t = self.params.subsample_factor as usize;
        let seed = self.params.seed;
        let fc = self.frame_count;
        let w = self.width as usize;
        let mut touched = Vec::new();
        for (p, (&v, &m)) in frame.as_raw().iter().zip(mask.as_raw()).enumerate() {
            if m != label::BACKGROUND {
                continue;
            }
            let key = p as u64;
            if rng::below(rng::hash(seed, rng::STREAM_SELF_UPDATE, fc, key), t) == 0 {
                let slot = rng::below(rng::hash(seed, rng::STREAM_SELF_SLOT, fc, key), n);
                self.bank[p * n + slot] = v;
                touched.push(p);
            }
            if self.params.neighbor_diffusion
                && rng::below(rng::hash(seed, rng::STREAM_NEIGHBOR_UPDATE, fc, key), t) == 0
            {
                let q = self.pick_neighbor(
                    p % w,
                    p / w,
                    rng::hash(seed, rng::STREAM_NEIGHBOR_PICK, fc, key),
                );
                let slot = rng::below(rng::hash(seed, rng::STREAM_NEIGHBOR_SLOT, fc, key), n);
                self.bank[q * n + slot] = v;
                touched.push(q);
            }
        }
        for p in touched {
            self.background[p] = bank_median(&self.bank[p * n..(p + 1) * n]);
        }
    }

    /// Per-pixel median of the bank; the mean of the two middle samples,
    /// rounded half up, when `n_samples` is even.
    pub fn background_image(&self) -> BackgroundImage {
        GrayImage::from_raw(self.width, self.height, self.background.clone()).expect("sized")
    }
}

fn median_sorted(sorted: &[u8]) -> u8 {
    let n = sorted.len();
    if !n.is_multiple_of(2) {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] as u16 + sorted[n / 2] as u16).div_ceil(2) as u8
    }
}

fn median_slow(samples: &[u8]) -> u8 {
    let mut v = samples.to_vec();
    v.sort_unstable();
    median_sorted(&v)
}

/// Per-frame output of a subtractor run.
#[derive(Clone, Debug, PartialEq)]
pub struct BgsRun {
    pub backgrounds: Vec<BackgroundImage>,
    pub masks: Vec<Mask>,
}

impl BgsRun {
    pub fn len(&self) -> usize {
        self.backgrounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backgrounds.is_empty()
    }
}

/// Initialize from the first frame and step through every frame, the first
/// one included.
pub fn run_sequence(scene: &Scene, params: &BgParams) -> Result<BgsRun, BgsError> {
    let first = scene.frames.first().ok_or(BgsError::EmptyScene)?;
    let mut model = BackgroundModel::init(&first.to_gray(), params.clone())?;
    let mut run = BgsRun {
        backgrounds: Vec::with_capacity(scene.len()),
        masks: Vec::with_capacity(scene.len()),
    };
    for frame in &scene.frames {
        let (mask, bg) = model.step(&frame.to_gray())?;
        run.masks.push(mask);
        run.backgrounds.push(bg);
    }
    Ok(run)
}

/// Write the background series as `<root>/bgmodel/<prefix><index>.png`.
pub fn dump_backgrounds(
    backgrounds: &[BackgroundImage],
    root: &Path,
    prefix: &str,
    digits: usize,
) -> std::io::Result<()> {
    backgrounds.par_iter().enumerate().try_for_each(|(i, img)| {
        let path = root
            .join(BGMODEL_DIR)
            .join(frame_file_name(prefix, i, digits));
        fsutil::write_gray_png(&path, img)
    })
}
