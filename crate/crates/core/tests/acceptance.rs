//! Acceptance suite: one PASS/FAIL line per criterion, each with a pinned
//! tolerance and runtime bound. Exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bgaug::augmentation::{plan_augmentation, splice_corrupt, AugFlags, DEFAULT_SPAN};
use bgaug::background::{run_sequence, BgParams};
use bgaug::dataset::{export, import, preprocess, Sample, SampleConfig, SampleMeta};
use bgaug::metrics::{aggregate, compute_metrics, confusion, MetricReport};
use bgaug::rng;
use bgaug::sequence_io::{Layout, Mask, SceneManifest};
use bgaug::synth::{backdrop_image, generate_scene, preset, Backdrop, SynthSpec, GHOST_EXIT};
use image::GrayImage;

use common::{brute_tally, random_scene, realize, SBI_FM, SBI_FM_MEAN, SBI_FM_MEAN_NO_PF};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn metric_fidelity() -> Outcome {
    let (recall, precision, fpr) = (0.9698, 0.8815, 0.0479);
    let counts = realize(recall, precision, fpr, 1_000_000);
    let m = compute_metrics::<f64>(&counts).map_err(|e| e.to_string())?;
    // Independent oracle for the realized counts.
    let harmonic = 2.0 * precision * recall / (precision + recall);
    let ok = (m.fm - 0.9235).abs() <= 5e-4
        && (m.fm - harmonic).abs() <= 1e-4
        && (m.fnr - 0.0302).abs() <= 1e-4
        && (m.sp - 0.9521).abs() <= 1e-4;
    check(
        ok,
        format!(
            "FM {:.5} (target 0.9235 +/-5e-4), FNR {:.5} (0.0302 +/-1e-4), Sp {:.5} (0.9521 +/-1e-4)",
            m.fm, m.fnr, m.sp
        ),
    )
}

fn aggregate_fidelity() -> Outcome {
    let reports = |skip_pf: bool| -> Vec<MetricReport<f64>> {
        SBI_FM
            .iter()
            .filter(|(name, _)| !(skip_pf && *name == "People & Foliage"))
            .map(|&(_, fm)| MetricReport {
                fm,
                ..Default::default()
            })
            .collect()
    };
    let all = aggregate(&reports(false)).map_err(|e| e.to_string())?.fm;
    let no_pf = aggregate(&reports(true)).map_err(|e| e.to_string())?.fm;
    check(
        (all - SBI_FM_MEAN).abs() <= 5e-4 && (no_pf - SBI_FM_MEAN_NO_PF).abs() <= 5e-4,
        format!("mean FM {all:.5} (0.9001 +/-5e-4), without People & Foliage {no_pf:.5} (0.9251 +/-5e-4)"),
    )
}

fn augmentation_accounting() -> Outcome {
    let manifests: Vec<SceneManifest> = (0..27)
        .map(|i| SceneManifest {
            scene_id: format!("cdnet{i:02}"),
            layout: Layout::TemporalRoi,
            labeled_range: Some([0, 999]),
            human_foreground: i < 11,
            clean_frame_index: Some(0),
            foreground_appear_index: Some(if i % 2 == 0 { 300 } else { 10 }),
            category: "c".into(),
        })
        .collect();
    let counts = vec![200; 27];
    let total = |use_bg, use_interval| {
        plan_augmentation(
            &manifests,
            &counts,
            AugFlags {
                use_bg,
                use_interval,
                span: DEFAULT_SPAN,
            },
        )
        .predicted
        .after_bg
    };
    let got = [
        total(false, false),
        total(false, true),
        total(true, false),
        total(true, true),
    ];
    check(
        got == [5400, 7600, 10800, 15200],
        format!("none/interval/bg/both = {got:?} (expected [5400, 7600, 10800, 15200])"),
    )
}

fn splice_semantics() -> Outcome {
    let mut checked = 0;
    for case in 0..1000u64 {
        let r = |k: u64, lo: i32, hi: i32| rng::between(rng::hash(case, 99, k, 0), lo, hi) as usize;
        let (w, h, len) = (r(0, 1, 8) as u32, r(1, 1, 8) as u32, r(2, 2, 120));
        let a = r(3, 0, len as i32 - 1);
        let span = r(4, 1, len as i32);
        let scene = random_scene(case, w, h, len, Some(a), None);
        match splice_corrupt(&scene, span) {
            Ok(out) => {
                if a < span {
                    return Err(format!("case {case}: accepted a={a} < span={span}"));
                }
                if out.len() != len
                    || out.masks != scene.masks
                    || out.dimensions() != scene.dimensions()
                {
                    return Err(format!("case {case}: length, masks or resolution changed"));
                }
                for t in 0..len {
                    let src = if (a - span..a).contains(&t) { a } else { t };
                    if out.frames[t].to_gray() != scene.frames[src].to_gray() {
                        return Err(format!("case {case}: frame {t} differs from frame {src}"));
                    }
                }
                checked += 1;
            }
            Err(_) if a < span => {}
            Err(e) => return Err(format!("case {case}: {e}")),
        }
    }
    Ok(format!(
        "1000 random cases, {checked} spliced, the rest rejected for a < span"
    ))
}

fn far_count(img: &GrayImage, truth: &GrayImage, px: &[(u32, u32)], radius: i32) -> usize {
    px.iter()
        .filter(|&&(x, y)| {
            (img.get_pixel(x, y)[0] as i32 - truth.get_pixel(x, y)[0] as i32).abs() > radius
        })
        .count()
}

fn bootstrap_and_corruption() -> Outcome {
    let params = BgParams::default();
    let radius = params.match_radius as i32;
    let t_period = params.subsample_factor as usize;

    let spec = preset("ghost", 1).unwrap();
    let run = run_sequence(&generate_scene(&spec).unwrap(), &params).map_err(|e| e.to_string())?;
    let truth = backdrop_image(&spec, 0);
    let object: Vec<(u32, u32)> = (28..36)
        .flat_map(|y| (28..36).map(move |x| (x, y)))
        .collect();
    let retained = (GHOST_EXIT..spec.length)
        .take_while(|&t| far_count(&run.backgrounds[t], &truth, &object, radius) == object.len())
        .count();

    let spec = preset("moving", 1).unwrap();
    let scene = generate_scene(&spec).unwrap();
    let a = scene.manifest.foreground_appear_index.unwrap();
    let natural = run_sequence(&scene, &params).map_err(|e| e.to_string())?;
    let corrupt = run_sequence(
        &splice_corrupt(&scene, DEFAULT_SPAN).map_err(|e| e.to_string())?,
        &params,
    )
    .map_err(|e| e.to_string())?;
    let (x, y) = spec.actors[0].trajectory.position(a);
    let [aw, ah] = spec.actors[0].size;
    let px: Vec<(u32, u32)> = (y as u32..y as u32 + ah)
        .flat_map(|yy| (x as u32..x as u32 + aw).map(move |xx| (xx, yy)))
        .collect();
    let t = a - 1;
    let diff = px
        .iter()
        .map(|&(x, y)| {
            (natural.backgrounds[t].get_pixel(x, y)[0] as f64
                - corrupt.backgrounds[t].get_pixel(x, y)[0] as f64)
                .abs()
        })
        .sum::<f64>()
        / px.len() as f64;
    let natural_clean = far_count(
        &natural.backgrounds[t],
        &backdrop_image(&spec, t),
        &px,
        radius,
    ) == 0;
    check(
        retained >= t_period && diff > radius as f64 && natural_clean,
        format!(
            "ghost kept {retained} frames after exit (>= T = {t_period}); corrupt-vs-natural background difference \
             {diff:.1} at object pixels (> {radius}); natural run ghost-free: {natural_clean}"
        ),
    )
}

fn bgs_convergence() -> Outcome {
    let spec = SynthSpec {
        scene_id: "static".into(),
        category: "baseline".into(),
        human_foreground: false,
        width: 64,
        height: 64,
        length: 100,
        background: Backdrop::TwoTone {
            left: 40,
            right: 200,
        },
        actors: vec![],
        noise_sigma: 0.0,
        seed: 0,
    };
    let params = BgParams::default();
    let run = run_sequence(&generate_scene(&spec).unwrap(), &params).map_err(|e| e.to_string())?;
    let truth = backdrop_image(&spec, 0);
    let all: Vec<(u32, u32)> = (0..64).flat_map(|y| (0..64).map(move |x| (x, y))).collect();
    let fg_frames = run.masks[1..].iter().filter(|m| !m.is_empty()).count();
    let off = run
        .backgrounds
        .iter()
        .map(|b| far_count(b, &truth, &all, params.match_radius as i32))
        .sum::<usize>();
    check(
        fg_frames == 0 && off == 0,
        format!("{fg_frames} frames with foreground after frame 0, {off} background pixels outside match_radius"),
    )
}

fn confusion_oracle() -> Outcome {
    let gt_levels = [0u8, 85, 170, 255];
    for case in 0..10_000u64 {
        let pred: Vec<u8> = (0..256).map(|i| rng::hash(case, 7, 0, i) as u8).collect();
        let gt: Vec<u8> = (0..256)
            .map(|i| gt_levels[rng::below(rng::hash(case, 7, 1, i), 4)])
            .collect();
        let c = confusion(
            &Mask::from_raw(16, 16, pred.clone()).unwrap(),
            &Mask::from_raw(16, 16, gt.clone()).unwrap(),
            None,
        )
        .map_err(|e| e.to_string())?;
        if [c.tp, c.fp, c.fn_, c.tn] != brute_tally(&pred, &gt) {
            return Err(format!(
                "pair {case}: {c:?} disagrees with the brute-force tally"
            ));
        }
    }
    Ok("10000 random 16x16 pairs match the per-pixel tally".into())
}

fn extreme_sample(i: usize) -> Sample {
    let channels = (0..6)
        .map(|c| {
            GrayImage::from_fn(8, 8, |x, y| {
                image::Luma([((x + y) as usize * 37 + c * 11 + i) as u8 | 1])
            })
        })
        .collect::<Vec<_>>();
    let mut channels = channels;
    channels[0].put_pixel(0, 0, image::Luma([0]));
    channels[5].put_pixel(7, 7, image::Luma([255]));
    Sample {
        channels,
        target: GrayImage::from_fn(8, 8, |x, _| image::Luma([(x > 3) as u8])),
        weight: i
            .is_multiple_of(2)
            .then(|| GrayImage::from_fn(8, 8, |_, y| image::Luma([(y != 0) as u8]))),
        meta: SampleMeta {
            scene_id: "s".into(),
            index: 100 + i,
            bg_aug: bgaug::augmentation::BgAug::None,
            interval_aug: false,
            source_scene: "s".into(),
            source_index: 100 + i,
        },
    }
}

fn normalization_and_round_trip() -> Outcome {
    let samples: Vec<Sample> = (0..10).map(extreme_sample).collect();
    let n64 = preprocess::<f64>(&samples[0]);
    let n32 = preprocess::<f32>(&samples[0]);
    let flat64: Vec<f64> = n64.channels.concat();
    let flat32: Vec<f32> = n32.channels.concat();
    let min64 = flat64.iter().copied().fold(f64::INFINITY, f64::min);
    let max64 = flat64.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min32 = flat32.iter().copied().fold(f32::INFINITY, f32::min);
    let max32 = flat32.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let extrema = min64 == -0.5 && max64 == 0.5 && min32 == -0.5 && max32 == 0.5;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    export(
        &samples,
        None,
        SampleConfig::default().channel_order(),
        dir.path(),
    )
    .map_err(|e| e.to_string())?;
    let (_, back) = import(dir.path()).map_err(|e| e.to_string())?;
    let exact = back == samples;
    check(
        extrema && exact,
        format!("extrema f64 [{min64}, {max64}], f32 [{min32}, {max32}]; 10-sample export/import bit-exact: {exact}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("metric fidelity", metric_fidelity, Duration::from_secs(1)),
        (
            "aggregate fidelity",
            aggregate_fidelity,
            Duration::from_secs(1),
        ),
        (
            "augmentation accounting",
            augmentation_accounting,
            Duration::from_secs(1),
        ),
        (
            "splice semantics",
            splice_semantics,
            Duration::from_secs(10),
        ),
        (
            "bootstrap pathology & corruption",
            bootstrap_and_corruption,
            Duration::from_secs(30),
        ),
        ("bgs convergence", bgs_convergence, Duration::from_secs(5)),
        (
            "confusion oracle",
            confusion_oracle,
            Duration::from_secs(10),
        ),
        (
            "normalization & round trip",
            normalization_and_round_trip,
            Duration::from_secs(10),
        ),
    ];
    let mut failed = 0;
    for (name, f, bound) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = started.elapsed();
        let in_time = elapsed <= bound;
        let (status, detail) = match (&outcome, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; too slow")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "{status} {name}: {detail} [{:.3} s, bound {} s]",
            elapsed.as_secs_f64(),
            bound.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
