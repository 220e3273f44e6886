use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::config::PipelineConfig;
use crate::detection::{nms, NmsMode};
use crate::encoding::{decode_candidates, encode, perfect_predictions, PredictionTensor};
use crate::error::{Error, Result};
use crate::refdetect::{fit_regions, segment};
use crate::scenegen::{annotate, derive_seed, rasterize, sample_scene, SceneSpec};

pub const MIN_WARMUP: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub median_ms: f64,
    pub p95_ms: f64,
}

impl StageTiming {
    pub fn of(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n == 0 {
            return StageTiming {
                median_ms: 0.0,
                p95_ms: 0.0,
            };
        }
        let median_ms = if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        };
        // nearest rank
        let p95_ms = s[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
        StageTiming { median_ms, p95_ms }
    }
}

/// `fit` includes the detector's final suppression step; `decode` and `nms`
/// time the tensor path on a perfect prediction tensor for the same image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stages {
    pub render: StageTiming,
    pub segment: StageTiming,
    pub fit: StageTiming,
    pub decode: StageTiming,
    pub nms: StageTiming,
    pub total: StageTiming,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipelines {
    /// segment + fit: image in, detections out.
    pub refdetect: StageTiming,
    /// decode + nms: tensor in, detections out.
    pub decode_nms: StageTiming,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub images: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub image_size: [u32; 2],
    pub anchors: usize,
    pub stages: Stages,
    pub pipelines: Pipelines,
    pub environment: String,
}

struct Job {
    scene: SceneSpec,
    tensor: PredictionTensor,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn environment() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let profile = if cfg!(debug_assertions) {
        "debug assertions on"
    } else {
        "debug assertions off"
    };
    format!(
        "{}-{}, {cpus} logical cpus, single-threaded timing, {profile}",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// Times every stage on `images` scenes sampled from the config seed. All
/// work runs on the calling thread; `warmup` rounds (at least 5) are
/// discarded before `iters` timed rounds.
pub fn bench(
    config: &PipelineConfig,
    catalog: &Catalog,
    images: usize,
    iters: usize,
    warmup: usize,
) -> Result<TimingReport> {
    if images == 0 || iters == 0 {
        return Err(Error::invalid("bench", "images and iterations must be >= 1"));
    }
    config.validate(catalog)?;
    let grid = config.anchor_grid()?;
    let bins = config.bins()?;
    let mut jobs = Vec::with_capacity(images);
    for i in 0..images {
        let scene = sample_scene(derive_seed(config.seed, i as u64), &config.scene, catalog)?;
        let targets = encode(&annotate(&scene, catalog)?, &grid, catalog, &config.encode)?;
        let tensor = perfect_predictions(&targets, catalog.len() + 1, bins.n_bins, 10.0);
        jobs.push(Job { scene, tensor });
    }

    let warmup = warmup.max(MIN_WARMUP);
    let mut samples: [Vec<f64>; 8] = Default::default();
    for round in 0..warmup + iters {
        for job in &jobs {
            let start = Instant::now();
            let t = Instant::now();
            let img = rasterize(&job.scene, catalog)?;
            let render = ms(t);
            let t = Instant::now();
            let regions = segment(&img, catalog, &config.detect.segment)?;
            let seg = ms(t);
            let t = Instant::now();
            let found = nms(
                fit_regions(&regions, catalog, &config.detect),
                config.detect.nms_iou,
                NmsMode::Rotated,
            );
            let fit = ms(t);
            let t = Instant::now();
            let cands = decode_candidates(&job.tensor, &grid, catalog, &config.decode)?;
            let dec = ms(t);
            let t = Instant::now();
            let mut kept = nms(cands, config.decode.nms_iou, config.decode.nms_mode);
            kept.truncate(config.decode.max_out);
            let sup = ms(t);
            let total = ms(start);
            std::hint::black_box((found, kept));
            if round >= warmup {
                for (k, v) in [render, seg, fit, dec, sup, total, seg + fit, dec + sup]
                    .into_iter()
                    .enumerate()
                {
                    samples[k].push(v);
                }
            }
        }
    }
    let st = |k: usize| StageTiming::of(&samples[k]);
    Ok(TimingReport {
        images,
        iterations: iters,
        warmup,
        image_size: config.image_size(),
        anchors: grid.len(),
        stages: Stages {
            render: st(0),
            segment: st(1),
            fit: st(2),
            decode: st(3),
            nms: st(4),
            total: st(5),
        },
        pipelines: Pipelines {
            refdetect: st(6),
            decode_nms: st(7),
        },
        environment: environment(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let t = StageTiming::of(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!((t.median_ms, t.p95_ms), (3.0, 5.0));
        let t = StageTiming::of(&(1..=100).map(f64::from).collect::<Vec<_>>());
        assert_eq!((t.median_ms, t.p95_ms), (50.5, 95.0));
    }

    #[test]
    fn report_accounts_for_stages() {
        let mut cfg = PipelineConfig::default();
        cfg.scene.image_size = [96, 96];
        cfg.scene.max_tiles = 1;
        cfg.anchor_levels = [8, 16, 32].map(crate::encoding::AnchorLevel::with_stride).to_vec();
        let r = bench(&cfg, &Catalog::default(), 1, 3, 0).unwrap();
        assert_eq!(r.anchors, 189);
        assert_eq!(r.warmup, MIN_WARMUP);
        let s = r.stages;
        for t in [s.render, s.segment, s.fit, s.decode, s.nms, s.total] {
            assert!(t.median_ms <= t.p95_ms);
        }
    }
}
