//! Deterministic synthetic surveillance scenes with exact ground truth.
//!
//! Actors are flat-shaded rectangles or ellipses moving along a polyline at
//! constant speed, optionally pausing for a stop interval. Frames are gray.
//! Noise is drawn from a counter-based RNG keyed by `(seed, frame, pixel)` and
//! added after rasterization, so masks never depend on it.

use std::collections::BTreeMap;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::sequence_io::{label, Frame, Layout, Mask, Scene, SceneManifest};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("scene length must be at least 1")]
    EmptySequence,
    #[error("frame dimensions must be nonzero")]
    EmptyFrame,
    #[error("actor {actor}: {reason}")]
    BadActor { actor: usize, reason: String },
    #[error("actor {actor}: waypoint {waypoint} puts the actor outside the frame")]
    OutOfBounds { actor: usize, waypoint: usize },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Backdrop {
    Flat {
        level: u8,
    },
    /// Left half `left`, right half `right`.
    TwoTone {
        left: u8,
        right: u8,
    },
    /// Whole-frame level `level + amplitude * sin(2 pi t / period)`.
    Flicker {
        level: u8,
        amplitude: f64,
        period: f64,
    },
}

impl Backdrop {
    fn value(&self, x: u32, width: u32, t: usize) -> f64 {
        match *self {
            Backdrop::Flat { level } => level as f64,
            Backdrop::TwoTone { left, right } => {
                if x < width / 2 {
                    left as f64
                } else {
                    right as f64
                }
            }
            Backdrop::Flicker {
                level,
                amplitude,
                period,
            } => level as f64 + amplitude * (std::f64::consts::TAU * t as f64 / period).sin(),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rectangle,
    Ellipse,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// First frame the actor is visible.
    pub enter_at: usize,
    /// First frame the actor is gone; `None` keeps it to the end.
    pub exit_at: Option<usize>,
    /// Top-left corner waypoints; the actor starts at `path[0]`.
    pub path: Vec<[f64; 2]>,
    /// Pixels per frame along the path. The actor holds at the last waypoint.
    pub speed: f64,
    /// Inclusive `[t0, t1]` pause; motion resumes at `t1 + 1`.
    pub stop_interval: Option<[usize; 2]>,
}

impl Trajectory {
    /// Time spent moving by frame `t`.
    fn motion_time(&self, t: usize) -> f64 {
        let elapsed = t.saturating_sub(self.enter_at);
        let paused = match self.stop_interval {
            Some([t0, t1]) if t > t0 => (t.min(t1) - t0) as f64,
            _ => 0.0,
        };
        elapsed as f64 - paused
    }

    /// Top-left corner at frame `t`, rounded to the pixel grid.
    pub fn position(&self, t: usize) -> (i64, i64) {
        let mut remaining = self.motion_time(t) * self.speed;
        let mut at = self.path[0];
        for next in &self.path[1..] {
            let seg = ((next[0] - at[0]).powi(2) + (next[1] - at[1]).powi(2)).sqrt();
            if remaining <= seg {
                if seg > 0.0 {
                    let f = remaining / seg;
                    at = [at[0] + f * (next[0] - at[0]), at[1] + f * (next[1] - at[1])];
                }
                return (at[0].round() as i64, at[1].round() as i64);
            }
            remaining -= seg;
            at = *next;
        }
        (at[0].round() as i64, at[1].round() as i64)
    }

    pub fn is_present(&self, t: usize) -> bool {
        t >= self.enter_at && self.exit_at.is_none_or(|e| t < e)
    }

    pub fn is_stopped(&self, t: usize) -> bool {
        self.stop_interval
            .is_some_and(|[t0, t1]| (t0..=t1).contains(&t))
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ActorSpec {
    pub shape: Shape,
    /// `[width, height]` in pixels.
    pub size: [u32; 2],
    pub gray: u8,
    pub trajectory: Trajectory,
    /// Stays labeled foreground during the stop interval (people); when
    /// false the stopped actor is labeled background (parked vehicles).
    pub labeled_foreground_while_static: bool,
}

impl ActorSpec {
    pub fn is_labeled(&self, t: usize) -> bool {
        self.trajectory.is_present(t)
            && (self.labeled_foreground_while_static || !self.trajectory.is_stopped(t))
    }

    /// Whether pixel `(x, y)` is covered when the top-left corner is at `pos`.
    pub fn covers(&self, pos: (i64, i64), x: u32, y: u32) -> bool {
        let (dx, dy) = (x as i64 - pos.0, y as i64 - pos.1);
        let [w, h] = self.size;
        if dx < 0 || dy < 0 || dx >= w as i64 || dy >= h as i64 {
            return false;
        }
        match self.shape {
            Shape::Rectangle => true,
            Shape::Ellipse => {
                let (rx, ry) = (w as f64 / 2.0, h as f64 / 2.0);
                let nx = (dx as f64 + 0.5 - rx) / rx;
                let ny = (dy as f64 + 0.5 - ry) / ry;
                nx * nx + ny * ny <= 1.0
            }
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub scene_id: String,
    pub category: String,
    pub human_foreground: bool,
    pub width: u32,
    pub height: u32,
    pub length: usize,
    pub background: Backdrop,
    /// Painted in order; later actors occlude earlier ones.
    pub actors: Vec<ActorSpec>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.length == 0 {
            return Err(SynthError::EmptySequence);
        }
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::EmptyFrame);
        }
        for (i, actor) in self.actors.iter().enumerate() {
            let bad = |reason: &str| SynthError::BadActor {
                actor: i,
                reason: reason.into(),
            };
            let tr = &actor.trajectory;
            if actor.size[0] == 0 || actor.size[1] == 0 {
                return Err(bad("size must be nonzero"));
            }
            if tr.path.is_empty() {
                return Err(bad("path needs at least one waypoint"));
            }
            if !(tr.speed.is_finite() && tr.speed >= 0.0) {
                return Err(bad("speed must be finite and non-negative"));
            }
            if tr.exit_at.is_some_and(|e| e <= tr.enter_at) {
                return Err(bad("exit_at must come after enter_at"));
            }
            if let Some([t0, t1]) = tr.stop_interval {
                let inside = tr.enter_at <= t0 && t0 <= t1 && tr.exit_at.is_none_or(|e| t1 < e);
                if !inside {
                    return Err(bad("stop_interval must lie within the visible span"));
                }
            }
            for (w, p) in tr.path.iter().enumerate() {
                let (x, y) = (p[0].round(), p[1].round());
                let fits = x >= 0.0
                    && y >= 0.0
                    && x + actor.size[0] as f64 <= self.width as f64
                    && y + actor.size[1] as f64 <= self.height as f64;
                if !fits {
                    return Err(SynthError::OutOfBounds {
                        actor: i,
                        waypoint: w,
                    });
                }
            }
        }
        Ok(())
    }

    /// First frame with no actor visible.
    pub fn first_clean_frame(&self) -> Option<usize> {
        (0..self.length).find(|&t| self.actors.iter().all(|a| !a.trajectory.is_present(t)))
    }

    pub fn first_appearance(&self) -> Option<usize> {
        self.actors.iter().map(|a| a.trajectory.enter_at).min()
    }
}

/// Render frame `t` without noise: actor-free backdrop, gray levels and mask.
fn render(spec: &SynthSpec, t: usize) -> (Vec<f64>, Vec<u8>) {
    let (w, h) = (spec.width, spec.height);
    let mut levels = Vec::with_capacity((w * h) as usize);
    for _y in 0..h {
        for x in 0..w {
            levels.push(spec.background.value(x, w, t));
        }
    }
    let mut mask = vec![label::BACKGROUND; (w * h) as usize];
    for actor in &spec.actors {
        if !actor.trajectory.is_present(t) {
            continue;
        }
        let pos = actor.trajectory.position(t);
        let labeled = actor.is_labeled(t);
        let [aw, ah] = actor.size;
        let x0 = pos.0.max(0) as u32;
        let y0 = pos.1.max(0) as u32;
        for y in y0..(y0 + ah).min(h) {
            for x in x0..(x0 + aw).min(w) {
                if actor.covers(pos, x, y) {
                    let i = (y * w + x) as usize;
                    levels[i] = actor.gray as f64;
                    mask[i] = if labeled {
                        label::FOREGROUND
                    } else {
                        label::BACKGROUND
                    };
                }
            }
        }
    }
    (levels, mask)
}

fn frame_image(spec: &SynthSpec, t: usize, levels: &[f64]) -> GrayImage {
    let data = levels
        .iter()
        .enumerate()
        .map(|(p, &v)| {
            let noise = if spec.noise_sigma > 0.0 {
                spec.noise_sigma
                    * rng::standard_normal(spec.seed, rng::STREAM_NOISE, t as u64, p as u64)
            } else {
                0.0
            };
            (v + noise).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::from_raw(spec.width, spec.height, data).expect("buffer sized from spec")
}

/// Generate a full-label scene from `spec`. Frames render in parallel.
pub fn generate_scene(spec: &SynthSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let rendered: Vec<(GrayImage, Mask)> = (0..spec.length)
        .into_par_iter()
        .map(|t| {
            let (levels, mask) = render(spec, t);
            let mask = Mask::from_raw(spec.width, spec.height, mask).expect("sized");
            (frame_image(spec, t, &levels), mask)
        })
        .collect();
    let mut frames = Vec::with_capacity(spec.length);
    let mut masks = BTreeMap::new();
    for (t, (img, mask)) in rendered.into_iter().enumerate() {
        frames.push(Frame::gray(t, img));
        masks.insert(t, mask);
    }
    Ok(Scene {
        manifest: SceneManifest {
            scene_id: spec.scene_id.clone(),
            layout: Layout::FullLabel,
            labeled_range: Some([0, spec.length - 1]),
            human_foreground: spec.human_foreground,
            clean_frame_index: spec.first_clean_frame(),
            foreground_appear_index: spec.first_appearance(),
            category: spec.category.clone(),
        },
        frames,
        masks,
        edits: Vec::new(),
    })
}

/// Noise-free actor-free backdrop for frame `t`, as a gray image.
pub fn backdrop_image(spec: &SynthSpec, t: usize) -> GrayImage {
    let data = (0..spec.height)
        .flat_map(|_| 0..spec.width)
        .map(|x| {
            spec.background
                .value(x, spec.width, t)
                .round()
                .clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::from_raw(spec.width, spec.height, data).expect("sized")
}

pub const PRESET_NAMES: [&str; 5] = ["moving", "bootstrap", "static_person", "ghost", "flicker"];

fn base(name: &str, category: &str, human: bool, length: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        scene_id: name.into(),
        category: category.into(),
        human_foreground: human,
        width: 64,
        height: 64,
        length,
        background: Backdrop::Flat { level: 100 },
        actors: Vec::new(),
        noise_sigma: 2.0,
        seed,
    }
}

/// The named scenario presets: a moving object appearing mid-sequence, a
/// person present from the first frame (bootstrap), a person standing still
/// for a long time, an object that sits from frame 0 and then vanishes
/// (ghost), and a moving object over a flickering backdrop.
pub fn scenario_presets(seed: u64) -> Vec<SynthSpec> {
    let moving = {
        let mut s = base("moving", "baseline", false, 200, seed);
        s.actors.push(ActorSpec {
            shape: Shape::Rectangle,
            size: [10, 10],
            gray: 220,
            trajectory: Trajectory {
                enter_at: 100,
                exit_at: Some(160),
                path: vec![[2.0, 27.0], [52.0, 27.0]],
                speed: 1.0,
                stop_interval: None,
            },
            labeled_foreground_while_static: true,
        });
        s
    };
    let bootstrap = {
        let mut s = base("bootstrap", "bootstrap", true, 200, seed);
        s.actors.push(ActorSpec {
            shape: Shape::Ellipse,
            size: [10, 16],
            gray: 40,
            trajectory: Trajectory {
                enter_at: 0,
                exit_at: Some(78),
                path: vec![[8.0, 24.0], [46.0, 24.0]],
                speed: 1.0,
                stop_interval: Some([0, 39]),
            },
            labeled_foreground_while_static: true,
        });
        s
    };
    let static_person = {
        let mut s = base("static_person", "intermittent", true, 240, seed);
        s.actors.push(ActorSpec {
            shape: Shape::Ellipse,
            size: [8, 16],
            gray: 200,
            trajectory: Trajectory {
                enter_at: 20,
                exit_at: Some(200),
                path: vec![[2.0, 24.0], [28.0, 24.0], [54.0, 24.0]],
                speed: 1.0,
                stop_interval: Some([46, 165]),
            },
            labeled_foreground_while_static: true,
        });
        s
    };
    let ghost = {
        let mut s = base("ghost", "ghost", false, 200, seed);
        s.actors.push(ActorSpec {
            shape: Shape::Rectangle,
            size: [8, 8],
            gray: 220,
            trajectory: Trajectory {
                enter_at: 0,
                exit_at: Some(GHOST_EXIT),
                path: vec![[28.0, 28.0]],
                speed: 0.0,
                stop_interval: Some([0, GHOST_EXIT - 1]),
            },
            labeled_foreground_while_static: true,
        });
        s
    };
    let flicker = {
        let mut s = moving.clone();
        s.scene_id = "flicker".into();
        s.category = "dynamic_background".into();
        s.background = Backdrop::Flicker {
            level: 100,
            amplitude: 6.0,
            period: 40.0,
        };
        s
    };
    vec![moving, bootstrap, static_person, ghost, flicker]
}

/// Frame at which the `ghost` preset's object disappears.
pub const GHOST_EXIT: usize = 80;

pub fn preset(name: &str, seed: u64) -> Result<SynthSpec, SynthError> {
    scenario_presets(seed)
        .into_iter()
        .find(|s| s.scene_id == name)
        .ok_or_else(|| SynthError::UnknownPreset(name.into()))
}
