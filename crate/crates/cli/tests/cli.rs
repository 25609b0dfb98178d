use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bgaug::dataset::{import, DatasetManifest};
use bgaug::metrics::EvalReport;
use bgaug::sequence_io::{load_scene, LoadOptions};
use image::{GrayImage, Luma};

fn bgaug(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgaug"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = bgaug(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_bootstrap_has_foreground_in_frame_zero() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &["synth", "--preset", "bootstrap", "--seed", "7"],
    );
    assert!(stdout.lines().any(|l| l.starts_with("effective-config: {")));
    let scene = load_scene(&dir.path().join("bootstrap"), &LoadOptions::default()).unwrap();
    assert_eq!(scene.len(), 200);
    assert!(!scene.mask(0).unwrap().is_empty());
    assert!(dir.path().join("bootstrap/synth.json").is_file());
}

#[test]
fn synth_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &["synth", "--preset", "ghost", "--seed", "3"]);
    ok(b.path(), &["synth", "--preset", "ghost", "--seed", "3"]);
    assert_eq!(tree(a.path()), tree(b.path()));
    let c = tempfile::tempdir().unwrap();
    ok(c.path(), &["synth", "--preset", "ghost", "--seed", "4"]);
    assert_ne!(tree(a.path()), tree(c.path()));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        bgaug(dir.path(), &["synth", "--preset", "nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(bgaug(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let o = bgaug(dir.path(), &["--test-mode", "synth", "--preset", "moving"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    assert_eq!(
        bgaug(dir.path(), &["--jobs", "0", "synth", "--preset", "moving"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn missing_scene_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bgaug(
        dir.path(),
        &[
            "bgs",
            "--scene",
            s(&dir.path().join("absent")),
            "--seed",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bgs_writes_one_image_per_frame_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--preset", "moving", "--seed", "1"]);
    let scene = dir.path().join("moving");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let stdout = ok(
        &out_a,
        &[
            "--jobs",
            "2",
            "--test-mode",
            "bgs",
            "--scene",
            s(&scene),
            "--seed",
            "5",
        ],
    );
    let line = stdout
        .lines()
        .find(|l| l.starts_with("effective-config: "))
        .unwrap();
    let cfg: serde_json::Value =
        serde_json::from_str(line.trim_start_matches("effective-config: ")).unwrap();
    assert_eq!(cfg["params"]["n_samples"], 20);
    assert_eq!(cfg["params"]["seed"], 5);
    ok(&out_b, &["bgs", "--scene", s(&scene), "--seed", "5"]);
    let ta = tree(&out_a);
    assert_eq!(ta, tree(&out_b));
    let count = |sub: &str| {
        ta.keys()
            .filter(|k| k.starts_with(format!("moving/{sub}")))
            .count()
    };
    assert_eq!(count("bgmodel"), 200);
    assert_eq!(count("bgsmask"), 200);
}

#[test]
fn augment_writes_a_loadable_spliced_scene() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--preset", "moving", "--seed", "1"]);
    ok(
        dir.path(),
        &[
            "augment",
            "--scene",
            s(&dir.path().join("moving")),
            "--kind",
            "corrupt",
        ],
    );
    let spliced = load_scene(&dir.path().join("moving-corrupt"), &LoadOptions::default()).unwrap();
    let original = load_scene(&dir.path().join("moving"), &LoadOptions::default()).unwrap();
    assert_eq!(spliced.len(), original.len());
    assert_eq!(spliced.masks, original.masks);
    let source = original.frames[100].to_gray().into_owned();
    for t in 0..100 {
        assert_eq!(*spliced.frames[t].to_gray(), source);
    }
    for t in 100..200 {
        assert_eq!(spliced.frames[t].to_gray(), original.frames[t].to_gray());
    }
    // The ghost preset has no object appearing 100 frames in.
    ok(dir.path(), &["synth", "--preset", "ghost", "--seed", "1"]);
    let o = bgaug(
        dir.path(),
        &[
            "augment",
            "--scene",
            s(&dir.path().join("ghost")),
            "--kind",
            "corrupt",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}

fn synth_scenes(root: &Path) -> PathBuf {
    let scenes = root.join("scenes");
    for p in ["moving", "bootstrap", "ghost"] {
        ok(&scenes, &["synth", "--preset", p, "--seed", "2"]);
    }
    scenes
}

#[test]
fn build_matches_the_plan_and_keeps_test_scenes_apart() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = synth_scenes(dir.path());
    let out = dir.path().join("ds");
    let stdout = ok(
        &out,
        &[
            "build",
            "--scenes-root",
            s(&scenes),
            "--size",
            "32",
            "--samples-per-scene",
            "5",
            "--split",
            "sie",
            "--test-scene",
            "bootstrap",
            "--seed",
            "1",
        ],
    );
    assert!(stdout.contains("effective-config: "));
    let plan: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("plan.json")).unwrap()).unwrap();
    let manifest = DatasetManifest::read(&out).unwrap();
    // moving: corrupt, no interval. bootstrap: correct + interval.
    // ghost: appears at 0 and has a clean frame, so correct, no interval.
    assert_eq!(plan["predicted"]["base"], 15);
    assert_eq!(plan["predicted"]["after_interval"], 20);
    assert_eq!(plan["predicted"]["after_bg"], 40);
    assert_eq!(manifest.samples.len(), 40);
    let split = manifest.split.clone().unwrap();
    let scene_of = |id: &String| {
        manifest
            .samples
            .iter()
            .find(|e| &e.id == id)
            .unwrap()
            .scene_id
            .clone()
    };
    assert!(split.test.iter().all(|id| scene_of(id) == "bootstrap"));
    assert_eq!(split.test.len(), 20);
    assert!(split
        .train
        .iter()
        .chain(&split.val)
        .all(|id| scene_of(id) != "bootstrap"));
    assert_eq!(split.train.len() + split.val.len(), 20);
    let (_, samples) = import(&out).unwrap();
    assert!(samples
        .iter()
        .all(|s| s.dimensions() == (32, 32) && s.channels.len() == 6));
}

#[test]
fn build_refuses_frames_without_history() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = synth_scenes(dir.path());
    let o = bgaug(
        &dir.path().join("ds"),
        &[
            "build",
            "--scene",
            s(&scenes.join("moving")),
            "--intervals",
            "25,250",
            "--size",
            "16",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("moving"));
}

fn write_png(path: &Path, img: &GrayImage) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    img.save(path).unwrap();
}

#[test]
fn perfect_predictions_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = synth_scenes(dir.path());
    let pred = dir.path().join("pred");
    for name in ["moving", "ghost"] {
        let scene = load_scene(&scenes.join(name), &LoadOptions::default()).unwrap();
        for (i, m) in &scene.masks {
            write_png(&pred.join(name).join(format!("bin{i:06}.png")), m.image());
        }
    }
    ok(
        dir.path(),
        &[
            "eval",
            "--pred",
            s(&pred),
            "--scene",
            s(&scenes.join("moving")),
            "--scene",
            s(&scenes.join("ghost")),
        ],
    );
    let report: EvalReport<f64> =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.scenes.len(), 2);
    assert_eq!(report.average.fm, 1.0);
    assert_eq!(report.average.pwc, 0.0);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("row,category,FM,PWC,Recall,Precision,FPR,FNR,Sp\n"));

    std::fs::remove_file(pred.join("ghost/bin000042.png")).unwrap();
    let o = bgaug(
        dir.path(),
        &[
            "eval",
            "--pred",
            s(&pred),
            "--scene",
            s(&scenes.join("ghost")),
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("frame 42"), "{err}");
}

/// One-frame scene whose prediction realizes Recall 0.9698, Precision
/// 0.8815 and FPR 0.0479 (counts derived in `board_counts`).
#[test]
fn board_row_fixture() {
    let (tp, fn_, fp, tn) = board_counts();
    let (w, h) = (200u32, 187u32);
    let total = (w * h) as u64;
    assert!(tp + fn_ + fp + tn <= total);
    let mut gt = GrayImage::new(w, h);
    let mut pred = GrayImage::new(w, h);
    for (i, (g, p)) in gt.pixels_mut().zip(pred.pixels_mut()).enumerate() {
        let i = i as u64;
        let (gv, pv) = if i < tp {
            (255, 255)
        } else if i < tp + fn_ {
            (255, 0)
        } else if i < tp + fn_ + fp {
            (0, 255)
        } else if i < tp + fn_ + fp + tn {
            (0, 0)
        } else {
            (85, 255)
        };
        *g = Luma([gv]);
        *p = Luma([pv]);
    }
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("board");
    write_png(&scene.join("input/in000000.png"), &GrayImage::new(w, h));
    write_png(&scene.join("groundtruth/gt000000.png"), &gt);
    std::fs::write(
        scene.join("manifest.json"),
        r#"{"scene_id": "Board", "layout": "full-label", "labeled_range": [0, 0],
            "human_foreground": true, "clean_frame_index": null,
            "foreground_appear_index": null, "category": "sbi"}"#,
    )
    .unwrap();
    let pred_dir = dir.path().join("pred");
    write_png(&pred_dir.join("000000.png"), &pred);
    ok(
        dir.path(),
        &["eval", "--pred", s(&pred_dir), "--scene", s(&scene)],
    );
    let report: EvalReport<f64> =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let m = report.scenes[0].metrics;
    assert!((m.recall - 0.9698).abs() < 1e-4, "{m:?}");
    assert!((m.precision - 0.8815).abs() < 1e-4, "{m:?}");
    assert!((m.fpr - 0.0479).abs() < 1e-4, "{m:?}");
    assert!((m.fm - 0.9235).abs() < 5e-4, "{m:?}");
    assert!((m.fnr - 0.0302).abs() < 1e-4, "{m:?}");
    assert!((m.sp - 0.9521).abs() < 1e-4, "{m:?}");
}

fn board_counts() -> (u64, u64, u64, u64) {
    let (recall, precision, fpr) = (0.9698_f64, 0.8815_f64, 0.0479_f64);
    let positives = 10_000u64;
    let tp = (recall * positives as f64).round() as u64;
    let fn_ = positives - tp;
    let fp = (tp as f64 / precision - tp as f64).round() as u64;
    let tn = (fp as f64 / fpr - fp as f64).round() as u64;
    (tp, fn_, fp, tn)
}

#[test]
fn dataset_eval_and_report_exclusion() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = synth_scenes(dir.path());
    let ds = dir.path().join("ds");
    ok(
        &ds,
        &[
            "build",
            "--scenes-root",
            s(&scenes),
            "--size",
            "24",
            "--samples-per-scene",
            "4",
            "--split",
            "sie",
            "--test-scene",
            "bootstrap",
            "--test-scene",
            "ghost",
        ],
    );
    let (manifest, samples) = import(&ds).unwrap();
    let test = manifest.split.unwrap().test;
    let pred = dir.path().join("pred");
    for smp in samples.iter().filter(|s| test.contains(&s.id())) {
        let mut img = smp.target.clone();
        img.iter_mut().for_each(|v| *v *= 255);
        write_png(&pred.join(format!("{}.png", smp.id())), &img);
    }
    let eval_out = dir.path().join("eval");
    ok(
        &eval_out,
        &["eval", "--pred", s(&pred), "--dataset", s(&ds)],
    );
    let report: EvalReport<f64> =
        serde_json::from_slice(&std::fs::read(eval_out.join("report.json")).unwrap()).unwrap();
    let ids: Vec<_> = report.scenes.iter().map(|s| s.scene_id.as_str()).collect();
    assert_eq!(ids, ["bootstrap", "ghost"]);
    assert!(report
        .scenes
        .iter()
        .all(|s| s.frames == 4 && s.metrics.fm == 1.0));

    let merged = dir.path().join("merged.json");
    ok(
        dir.path(),
        &[
            "report",
            "--input",
            s(&eval_out.join("report.json")),
            "--exclude",
            "ghost",
            "--report",
            s(&merged),
        ],
    );
    let r: EvalReport<f64> = serde_json::from_slice(&std::fs::read(&merged).unwrap()).unwrap();
    assert_eq!(r.scenes.len(), 1);
    let o = bgaug(
        dir.path(),
        &[
            "report",
            "--input",
            s(&eval_out.join("report.json")),
            "--exclude",
            "nope",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}
