//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits non-zero when any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tilesight_core::catalog::Catalog;
use tilesight_core::compose::{
    check_composition, ComposeTolerance, CompositionResult, RigidTransform, TemplateRegistry,
};
use tilesight_core::detection::{Detection, DetectionSet};
use tilesight_core::encoding::{
    build_anchors, classification_loss, decode, default_levels, encode, focal_loss, orientation_loss,
    perfect_predictions, regression_loss, DecodeConfig, EncodeConfig, LossConfig, LossOutput, PredictionTensor,
    TargetTensor,
};
use tilesight_core::eval::{evaluate_dataset, fscore, match_detections, MatchConfig, TimingReport};
use tilesight_core::geometry::{
    angle_diff, canonical_theta, normalize_deg, polygon_of, rotated_iou, Aabb, OrientedBox, Point2, Polygon,
    ShapeClass, ARC_SEGMENTS, DEFAULT_BINS,
};
use tilesight_core::refdetect::{detect, DetectParams};
use tilesight_core::scenegen::{
    annotate, generate_dataset, rasterize, sample_composition, sample_scene, CompositionJitter, GenerationMode,
    PhotometricRanges, SceneConfig, MANIFEST_FILE,
};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);
/// (tp, fp, fn, max center error, max angle error) of one scene.
type SceneErrors = (usize, usize, usize, f64, f64);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn published_fscores() -> Outcome {
    // (precision, recall, reported F)
    let rows = [
        (99.57, 99.04, 99.30),
        (98.83, 99.57, 99.20),
        (99.46, 98.83, 99.14),
        (97.99, 99.36, 98.67),
    ];
    let mut worst: f64 = 0.0;
    for (p, r, f) in rows {
        let err = (fscore(p, r) - f).abs();
        worst = worst.max(err);
        ensure(
            err <= 0.01,
            format!("P={p} R={r}: got {:.4}, expected {f}", fscore(p, r)),
        )?;
    }
    Ok(format!("max |F - reported| = {worst:.4}"))
}

fn encode_decode_round_trip() -> Outcome {
    let cat = Catalog::default();
    let grid = build_anchors([480, 480], &default_levels()).map_err(|e| e.to_string())?;
    let per_scene: Vec<Result<SceneErrors, String>> = (0..1000u64)
        .into_par_iter()
        .map(|seed| {
            let scene = sample_scene(seed, &SceneConfig::default(), &cat).map_err(|e| e.to_string())?;
            let ann = annotate(&scene, &cat).map_err(|e| e.to_string())?;
            let targets = encode(&ann, &grid, &cat, &EncodeConfig::default()).map_err(|e| e.to_string())?;
            let pred = perfect_predictions(&targets, cat.len() + 1, DEFAULT_BINS, 10.0);
            let dets = decode(&pred, &grid, &cat, &DecodeConfig::default()).map_err(|e| e.to_string())?;
            let m = match_detections(&dets, &ann.tiles, &MatchConfig::default()).map_err(|e| e.to_string())?;
            let (mut center, mut angle) = (0.0f64, 0.0f64);
            for mt in &m.matches {
                let (d, gt) = (&dets[mt.pred], &ann.tiles[mt.gt]);
                let period = cat.get(&gt.spec_id).map_err(|e| e.to_string())?.symmetry.period();
                center = center.max((d.cx - gt.cx).hypot(d.cy - gt.cy));
                angle = angle.max(angle_diff(d.theta_deg, gt.theta_deg, period).abs());
            }
            Ok((
                m.matches.len(),
                m.unmatched_preds.len(),
                m.unmatched_gts.len(),
                center,
                angle,
            ))
        })
        .collect();
    let (mut tp, mut fp, mut fn_, mut center, mut angle) = (0, 0, 0, 0.0f64, 0.0f64);
    for r in per_scene {
        let (t, p, n, c, a) = r?;
        tp += t;
        fp += p;
        fn_ += n;
        center = center.max(c);
        angle = angle.max(a);
    }
    ensure(fp == 0 && fn_ == 0, format!("tp {tp} fp {fp} fn {fn_}"))?;
    ensure(center <= 0.01, format!("center error {center}"))?;
    ensure(angle <= 3.75 + 1e-9, format!("orientation error {angle}"))?;
    Ok(format!(
        "1000 scenes, {tp} tiles, P=R=100, max center err {center:.2e} px, max angle err {angle:.3} deg"
    ))
}

fn inside(p: &Polygon, q: Point2) -> bool {
    let v = p.vertices();
    (0..v.len()).all(|i| (v[(i + 1) % v.len()] - v[i]).cross(q - v[i]) >= 0.0)
}

fn rotated_iou_oracle() -> Outcome {
    const SAMPLES: usize = 1_000_000;
    let shapes = [
        ShapeClass::Square,
        ShapeClass::Rectangle,
        ShapeClass::RightTriangle,
        ShapeClass::EquilateralTriangle,
        ShapeClass::Semicircle,
        ShapeClass::QuarterCircle,
    ];
    let errs: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|pair| {
            let mut rng = ChaCha8Rng::seed_from_u64(pair);
            let mut poly = || {
                let pose = OrientedBox::new(
                    rng.random_range(40.0..60.0),
                    rng.random_range(40.0..60.0),
                    rng.random_range(8.0..40.0),
                    rng.random_range(8.0..40.0),
                    rng.random_range(0.0..360.0),
                )
                .unwrap();
                polygon_of(shapes[rng.random_range(0..shapes.len())], &pose, ARC_SEGMENTS).unwrap()
            };
            let (a, b) = (poly(), poly());
            let pts: Vec<Point2> = a.vertices().iter().chain(b.vertices()).copied().collect();
            let bb = Aabb::of_points(&pts);
            let (mut both, mut any) = (0usize, 0usize);
            for _ in 0..SAMPLES {
                let q = Point2::new(rng.random_range(bb.x0..bb.x1), rng.random_range(bb.y0..bb.y1));
                let (ia, ib) = (inside(&a, q), inside(&b, q));
                both += (ia && ib) as usize;
                any += (ia || ib) as usize;
            }
            (rotated_iou(&a, &b).unwrap() - both as f64 / any as f64).abs()
        })
        .collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    ensure(worst <= 0.01, format!("max |IoU - MC| = {worst:.4}"))?;
    Ok(format!("200 pairs x 1e6 samples, max |IoU - MC| = {worst:.4}"))
}

fn refdetect_run(photometrics: PhotometricRanges, min_f: f64, seed: u64) -> Outcome {
    let cat = Catalog::default();
    let reg = TemplateRegistry::builtin(&cat).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    std::fs::create_dir_all(&pred).map_err(|e| e.to_string())?;
    let cfg = SceneConfig {
        photometrics,
        ..SceneConfig::default()
    };
    let m = generate_dataset(500, seed, &gt, GenerationMode::Mixed, &cfg, &cat, &reg).map_err(|e| e.to_string())?;
    m.entries.par_iter().try_for_each(|e| -> Result<(), String> {
        let img = image::open(gt.join(&e.image_path))
            .map_err(|e| e.to_string())?
            .to_rgb8();
        let detections = detect(&img, &cat, &DetectParams::default()).map_err(|e| e.to_string())?;
        let stem = Path::new(&e.image_path)
            .file_stem()
            .unwrap()
            .to_string_lossy()
            .into_owned();
        DetectionSet { detections }
            .save(&pred.join(format!("{stem}.json")))
            .map_err(|e| e.to_string())
    })?;
    let r = evaluate_dataset(&pred, &gt, &MatchConfig::default()).map_err(|e| e.to_string())?;
    let summary = format!(
        "500 scenes, P {:.2} R {:.2} F {:.2} (tp {} fp {} fn {})",
        r.precision, r.recall, r.fscore, r.tp, r.fp, r.r#fn
    );
    ensure(r.fscore >= min_f, format!("{summary}, need F >= {min_f}"))?;
    Ok(summary)
}

fn transformed(dets: &[Detection], t: &RigidTransform) -> Vec<Detection> {
    dets.iter()
        .map(|d| {
            let c = t.apply(Point2::new(d.cx, d.cy));
            Detection {
                cx: c.x,
                cy: c.y,
                theta_deg: canonical_theta(normalize_deg(d.theta_deg + t.rotation_deg), d.shape.symmetry()),
                vertices: d.vertices.map(|p| t.apply(p)),
                ..d.clone()
            }
        })
        .collect()
}

fn composition_rules() -> Outcome {
    let cat = Catalog::default();
    let reg = TemplateRegistry::builtin(&cat).map_err(|e| e.to_string())?;
    let template = reg.get("mushroom").map_err(|e| e.to_string())?;
    let tol = ComposeTolerance::default();
    let check = |d: &[Detection]| -> Result<CompositionResult, String> {
        check_composition(d, template, &cat, &tol).map_err(|e| e.to_string())
    };
    let mut scenes = Vec::new();
    for stem in [0, 1] {
        let scene = (0..1000)
            .map(|seed| {
                sample_composition(
                    &reg,
                    &cat,
                    "mushroom",
                    &CompositionJitter::none(),
                    seed,
                    &SceneConfig::default(),
                )
            })
            .filter_map(Result::ok)
            .find(|s| s.composition.as_ref().is_some_and(|c| c.alternatives[1] == stem))
            .ok_or(format!("no scene with stem alternative {stem}"))?;
        let img = rasterize(&scene, &cat).map_err(|e| e.to_string())?;
        let dets = detect(&img, &cat, &DetectParams::default()).map_err(|e| e.to_string())?;
        let r = check(&dets)?;
        ensure(
            r.complete && r.groups[1].alternative == stem,
            format!("stem {stem} not verified"),
        )?;
        for k in 0..dets.len() {
            let mut d = dets.clone();
            d.remove(k);
            let r = check(&d)?;
            ensure(
                !r.complete && r.missing.len() == 1,
                format!("stem {stem}, tile {k} removed: {} missing", r.missing.len()),
            )?;
        }
        scenes.push(dets);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..100 {
        let dets = &scenes[trial % 2];
        let t = RigidTransform {
            rotation_deg: rng.random_range(0.0..360.0),
            tx: rng.random_range(-300.0..300.0),
            ty: rng.random_range(-300.0..300.0),
        };
        ensure(
            check(&transformed(dets, &t))?.complete,
            format!("trial {trial}: verdict changed"),
        )?;
        let mut partial = dets.clone();
        partial.remove(rng.random_range(0..partial.len()));
        let r = check(&transformed(&partial, &t))?;
        ensure(
            !r.complete && r.missing.len() == 1,
            format!("trial {trial}: partial verdict changed"),
        )?;
    }
    Ok("both stems complete, single deletions leave 1 missing slot, 100/100 rigid trials unchanged".into())
}

fn random_case(rng: &mut ChaCha8Rng) -> (TargetTensor, PredictionTensor) {
    let (anchors, classes, bins) = (rng.random_range(4..16), 7, 48);
    let mut t = TargetTensor {
        class_target: vec![0; anchors],
        orientation_target: vec![None; anchors],
        offset_target: vec![[0.0; 4]; anchors],
        positive_mask: vec![false; anchors],
        negative_candidates: vec![false; anchors],
        sampled_negative_mask: vec![false; anchors],
        matched_gt: vec![None; anchors],
    };
    for a in 0..anchors {
        if a == 0 || rng.random_bool(0.3) {
            t.positive_mask[a] = true;
            t.class_target[a] = rng.random_range(1..classes);
            t.orientation_target[a] = Some(rng.random_range(0..bins));
            t.offset_target[a] = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
            t.matched_gt[a] = Some(0);
        } else {
            t.negative_candidates[a] = true;
            t.sampled_negative_mask[a] = rng.random_bool(0.5);
        }
    }
    let data = (0..anchors * (classes + bins + 4))
        .map(|_| rng.random_range(-4.0..4.0))
        .collect();
    (t, PredictionTensor::from_data(anchors, classes, bins, data).unwrap())
}

fn loss_checks() -> Outcome {
    let cfg = LossConfig::default();
    ensure(
        focal_loss(1.0, &cfg).map_err(|e| e.to_string())? == 0.0,
        "focal(1) != 0",
    )?;
    let ce = LossConfig {
        alpha: 1.0,
        gamma: 0.0,
        regression_weight: 1.0,
    };
    for i in 1..=1000 {
        let p = i as f64 / 1000.0;
        let err = (focal_loss(p, &ce).map_err(|e| e.to_string())? + p.ln()).abs();
        ensure(err <= 1e-9, format!("cross-entropy mismatch at p={p}: {err:e}"))?;
    }
    const H: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for case in 0..100 {
        let (targets, pred) = random_case(&mut rng);
        let neg = targets.sampled_negative_mask.clone();
        let losses: [&dyn Fn(&PredictionTensor) -> LossOutput; 3] = [
            &|p| classification_loss(p, &targets, &neg, &cfg).unwrap(),
            &|p| orientation_loss(p, &targets, &cfg).unwrap(),
            &|p| regression_loss(p, &targets).unwrap(),
        ];
        for f in losses {
            let grad = f(&pred).grad;
            for (i, &g) in grad.iter().enumerate() {
                let (mut up, mut dn) = (pred.clone(), pred.clone());
                up.data_mut()[i] += H;
                dn.data_mut()[i] -= H;
                let fd = (f(&up).value - f(&dn).value) / (2.0 * H);
                let err = (fd - g).abs();
                let rel = err / fd.abs().max(g.abs()).max(1e-300);
                if err > 1e-9 {
                    worst = worst.max(rel);
                }
                ensure(
                    err <= 1e-5 * fd.abs().max(g.abs()) + 1e-9,
                    format!("case {case} index {i}: {g} vs {fd}"),
                )?;
                checked += 1;
            }
        }
    }
    Ok(format!(
        "focal(1)=0, CE within 1e-9, {checked} gradient entries over 100 tensors, max rel err {worst:.1e}"
    ))
}

fn generate_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = ["a", "b"].map(|n| dir.path().join(n));
    for out in &runs {
        let run = Command::new(env!("CARGO_BIN_EXE_tilesight"))
            .args(["generate", "--count", "100", "--seed", "7", "--out"])
            .arg(out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(run.status.success(), String::from_utf8_lossy(&run.stderr).into_owned())?;
    }
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    ensure(
        read(&runs[0].join(MANIFEST_FILE))? == read(&runs[1].join(MANIFEST_FILE))?,
        "manifests differ",
    )?;
    let mut files = 0;
    for entry in std::fs::read_dir(runs[0].join("annotations")).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let a = read(&runs[0].join("annotations").join(&name))?;
        let b = read(&runs[1].join("annotations").join(&name))?;
        ensure(a == b, format!("annotation {name:?} differs"))?;
        files += 1;
    }
    ensure(files == 100, format!("{files} annotation files"))?;
    Ok("100 annotations and the manifest byte-identical".into())
}

fn performance_budget() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_tilesight"))
        .args(["bench", "--iters", "20"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
    let r: TimingReport = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let (dn, rd) = (r.pipelines.decode_nms.median_ms, r.pipelines.refdetect.median_ms);
    let summary = format!(
        "{} anchors, decode+nms median {dn:.3} ms, refdetect median {rd:.2} ms on {}x{} ({})",
        r.anchors, r.image_size[0], r.image_size[1], r.environment
    );
    ensure(r.anchors == 1189, format!("{} anchors", r.anchors))?;
    ensure(dn < 5.0 && rd < 50.0, summary.clone())?;
    Ok(summary)
}

fn main() {
    let checks: [Check; 9] = [
        ("published-fscore-arithmetic", published_fscores),
        ("encode-decode-round-trip", encode_decode_round_trip),
        ("rotated-iou-monte-carlo", rotated_iou_oracle),
        ("refdetect-clean", || {
            refdetect_run(PhotometricRanges::clean(), 99.0, 2024)
        }),
        ("refdetect-photometrics", || {
            refdetect_run(PhotometricRanges::varied(), 95.0, 2025)
        }),
        ("composition-rules", composition_rules),
        ("loss-checks", loss_checks),
        ("generate-determinism", generate_determinism),
        ("performance-budget", performance_budget),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {} {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
