#![allow(dead_code)]

use std::collections::BTreeMap;

use bgaug::metrics::ConfusionCounts;
use bgaug::rng;
use bgaug::sequence_io::{label, Frame, Layout, Mask, Scene, SceneManifest};
use image::GrayImage;

/// Per-scene FM of the BG + interval configuration on SBI.
pub const SBI_FM: [(&str, f64); 11] = [
    ("Board", 0.9235),
    ("CIVIAR1", 0.9521),
    ("CIVIAR2", 0.9256),
    ("CaVignal", 0.8145),
    ("Candela", 0.8111),
    ("Hall & Monitor", 0.9713),
    ("Highway1", 0.9439),
    ("Highway2", 0.9741),
    ("Human Body2", 0.9525),
    ("IBM TEST2", 0.9821),
    ("People & Foliage", 0.6506),
];
pub const SBI_FM_MEAN: f64 = 0.9001;
pub const SBI_FM_MEAN_NO_PF: f64 = 0.9251;

/// SBI per-scene rows: FM, PWC, Recall, Precision, FPR, FNR, Sp.
pub const SBI_ROWS: [(&str, [f64; 7]); 11] = [
    (
        "Board",
        [0.9235, 4.3153, 0.9698, 0.8815, 0.0479, 0.0302, 0.9521],
    ),
    (
        "CIVIAR1",
        [0.9521, 0.3673, 0.9288, 0.9769, 0.0009, 0.0712, 0.9991],
    ),
    (
        "CIVIAR2",
        [0.9256, 0.0586, 0.9153, 0.9363, 0.0002, 0.0847, 0.9998],
    ),
    (
        "CaVignal",
        [0.8145, 3.7146, 0.9467, 0.7151, 0.0355, 0.0533, 0.9645],
    ),
    (
        "Candela",
        [0.8111, 1.2652, 0.9884, 0.6921, 0.0127, 0.0116, 0.9874],
    ),
    (
        "Hall & Monitor",
        [0.9713, 0.1361, 0.9841, 0.9588, 0.0010, 0.0159, 0.9990],
    ),
    (
        "Highway1",
        [0.9439, 1.0731, 0.9757, 0.9142, 0.0093, 0.0243, 0.9907],
    ),
    (
        "Highway2",
        [0.9741, 0.1529, 0.9838, 0.9647, 0.0011, 0.0162, 0.9989],
    ),
    (
        "Human Body2",
        [0.9525, 0.9608, 0.9571, 0.9480, 0.0059, 0.0429, 0.9941],
    ),
    (
        "IBM TEST2",
        [0.9821, 0.1635, 0.9862, 0.9779, 0.0011, 0.0138, 0.9989],
    ),
    (
        "People & Foliage",
        [0.6506, 28.6471, 0.9004, 0.5095, 0.3650, 0.0996, 0.6350],
    ),
];
pub const SBI_AVERAGE: [f64; 7] = [0.9001, 3.7141, 0.9578, 0.8614, 0.0437, 0.0422, 0.9563];
pub const SBI_AVERAGE_NO_PF: [f64; 7] = [0.9251, 1.2208, 0.9636, 0.8966, 0.0116, 0.0364, 0.9884];

/// Integer counts realizing the given recall, precision and FPR with
/// `positives` ground-truth foreground pixels.
pub fn realize(recall: f64, precision: f64, fpr: f64, positives: u64) -> ConfusionCounts {
    let tp = (recall * positives as f64).round() as u64;
    let fp = (tp as f64 / precision - tp as f64).round() as u64;
    let tn = (fp as f64 / fpr - fp as f64).round() as u64;
    ConfusionCounts {
        tp,
        fp,
        fn_: positives - tp,
        tn,
    }
}

/// Per-pixel tally written without any of the library's helpers.
pub fn brute_tally(pred: &[u8], gt: &[u8]) -> [u64; 4] {
    let mut c = [0u64; 4];
    for i in 0..pred.len() {
        let g = gt[i];
        if g != 0 && g != 255 {
            continue;
        }
        let p = pred[i] >= 128;
        let idx = match (p, g == 255) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        c[idx] += 1;
    }
    c
}

pub fn manifest(
    id: &str,
    len: usize,
    appear: Option<usize>,
    clean: Option<usize>,
) -> SceneManifest {
    SceneManifest {
        scene_id: id.into(),
        layout: Layout::FullLabel,
        labeled_range: Some([0, len - 1]),
        human_foreground: false,
        clean_frame_index: clean,
        foreground_appear_index: appear,
        category: "random".into(),
    }
}

/// Noise scene with every frame labeled; content derived from `seed`.
pub fn random_scene(
    seed: u64,
    w: u32,
    h: u32,
    len: usize,
    appear: Option<usize>,
    clean: Option<usize>,
) -> Scene {
    let labels = [label::BACKGROUND, label::FOREGROUND, label::IGNORE];
    let frames = (0..len)
        .map(|t| {
            let data = (0..(w * h) as u64)
                .map(|i| rng::hash(seed, 1, t as u64, i) as u8)
                .collect();
            Frame::gray(t, GrayImage::from_raw(w, h, data).unwrap())
        })
        .collect();
    let masks: BTreeMap<usize, Mask> = (0..len)
        .map(|t| {
            let data = (0..(w * h) as u64)
                .map(|i| labels[rng::below(rng::hash(seed, 2, t as u64, i), 3)])
                .collect();
            (t, Mask::from_raw(w, h, data).unwrap())
        })
        .collect();
    Scene {
        manifest: manifest(&format!("r{seed}"), len, appear, clean),
        frames,
        masks,
        edits: Vec::new(),
    }
}
