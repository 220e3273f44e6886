use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    in_bounds, overlap_ok, CompositionInfo, JitterRanges, PhotometricRanges, Photometrics, SceneConfig, SceneSpec,
    Shadow, TilePose,
};
use crate::catalog::{Catalog, TileSpec};
use crate::compose::TemplateRegistry;
use crate::error::Result;
use crate::geometry::{polygon_of, OrientedBox, Point2, Polygon, Similarity, ARC_SEGMENTS};

/// Per-tile Gaussian perturbation applied to template slot poses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompositionJitter {
    pub pos_sigma: f64,
    pub theta_sigma: f64,
}

impl CompositionJitter {
    pub fn none() -> Self {
        CompositionJitter::default()
    }

    fn is_zero(&self) -> bool {
        self.pos_sigma == 0.0 && self.theta_sigma == 0.0
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn sample_jitter(rng: &mut ChaCha8Rng, ranges: &JitterRanges, [w, h]: [u32; 2]) -> Similarity {
    let t = ranges.translate_px;
    Similarity {
        scale: uniform(rng, ranges.scale),
        rotation_deg: uniform(rng, ranges.rotation_deg),
        tx: uniform(rng, [-t, t]),
        ty: uniform(rng, [-t, t]),
        pivot_x: w as f64 / 2.0,
        pivot_y: h as f64 / 2.0,
    }
}

fn sample_photometrics(rng: &mut ChaCha8Rng, ranges: &PhotometricRanges, [w, h]: [u32; 2]) -> Photometrics {
    let brightness_gain = uniform(rng, ranges.brightness_gain);
    let gamma = uniform(rng, ranges.gamma);
    let noise_sigma = uniform(rng, ranges.noise_sigma);
    let shadow = (ranges.shadow_probability > 0.0 && rng.random_bool(ranges.shadow_probability)).then(|| {
        let side = w.min(h) as f64;
        Shadow {
            cx: rng.random_range(0.0..w as f64),
            cy: rng.random_range(0.0..h as f64),
            rx: rng.random_range(0.15..0.4) * side,
            ry: rng.random_range(0.15..0.4) * side,
            angle_deg: rng.random_range(0.0..180.0),
            strength: rng.random_range(0.15..0.35),
        }
    });
    Photometrics {
        brightness_gain,
        gamma,
        noise_sigma,
        shadow,
    }
}

struct Placed {
    spec: usize,
    pre_jitter_center: Point2,
    radius: f64,
    polygon: Polygon,
}

fn bounding_radius(spec: &TileSpec) -> Result<f64> {
    let pose = OrientedBox::new(0.0, 0.0, spec.width(), spec.height(), 0.0)?;
    let poly = polygon_of(spec.shape, &pose, ARC_SEGMENTS)?;
    Ok(poly
        .vertices()
        .iter()
        .map(|p| p.dist(Point2::new(0.0, 0.0)))
        .fold(0.0, f64::max))
}

fn fits(candidate: &Polygon, spec: usize, placed: &[Placed], size: [u32; 2]) -> bool {
    in_bounds(candidate, size) && placed.iter().all(|p| overlap_ok(candidate, &p.polygon, p.spec == spec))
}

/// Samples a random dense scene. The tile count is drawn from
/// `1..=max_tiles`; a tile that cannot be placed within `max_retries`
/// attempts is dropped, so the scene may hold fewer tiles but never breaks
/// the packing invariant.
pub fn sample_scene(seed: u64, config: &SceneConfig, catalog: &Catalog) -> Result<SceneSpec> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = config.image_size;
    let [w, h] = size;
    let target = rng.random_range(1..=config.max_tiles);
    let global_jitter = sample_jitter(&mut rng, &config.jitter, size);
    let photometrics = sample_photometrics(&mut rng, &config.photometrics, size);
    let rng_seed = rng.random::<u64>();

    let radii: Vec<f64> = catalog.specs().iter().map(bounding_radius).collect::<Result<_>>()?;
    let mut placed: Vec<Placed> = Vec::with_capacity(target);
    let mut tiles = Vec::with_capacity(target);
    for _ in 0..target {
        let spec_idx = rng.random_range(0..catalog.len());
        let spec = &catalog.specs()[spec_idx];
        for _ in 0..config.max_retries.max(1) {
            let theta = rng.random_range(0.0..360.0);
            let center = if !placed.is_empty() && rng.random_bool(config.near_placement_probability) {
                let anchor = &placed[rng.random_range(0..placed.len())];
                let dir = rng.random_range(0.0..360.0f64).to_radians();
                let dist = (anchor.radius + radii[spec_idx]) * rng.random_range(0.55..1.0);
                anchor.pre_jitter_center + Point2::new(dir.cos(), dir.sin()) * dist
            } else {
                Point2::new(rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64))
            };
            let pose = OrientedBox::new(center.x, center.y, spec.width(), spec.height(), theta)?;
            let polygon = polygon_of(spec.shape, &global_jitter.apply_pose(&pose), ARC_SEGMENTS)?;
            if fits(&polygon, spec_idx, &placed, size) {
                placed.push(Placed {
                    spec: spec_idx,
                    pre_jitter_center: center,
                    radius: radii[spec_idx],
                    polygon,
                });
                tiles.push(TilePose {
                    spec_id: spec.id.clone(),
                    pose,
                });
                break;
            }
        }
    }
    Ok(SceneSpec {
        image_size: size,
        tiles,
        photometrics,
        global_jitter,
        rng_seed,
        composition: None,
    })
}

/// Lays out one alternative per part group of a template at a random rigid
/// placement, with optional per-tile Gaussian jitter. Jittered poses that
/// break the packing rule are redrawn; after `max_retries` the exact slot
/// pose is used, and a tile whose exact pose also conflicts is left out.
pub fn sample_composition(
    registry: &TemplateRegistry,
    catalog: &Catalog,
    template_id: &str,
    jitter: &CompositionJitter,
    seed: u64,
    config: &SceneConfig,
) -> Result<SceneSpec> {
    config.validate()?;
    let template = registry.get(template_id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = config.image_size;
    let [w, h] = size;

    let alternatives: Vec<usize> = template
        .parts
        .iter()
        .map(|g| rng.random_range(0..g.alternatives.len()))
        .collect();
    let placement_rot = rng.random_range(0.0..360.0);
    let reach = 0.1 * w.min(h) as f64;
    let origin = Point2::new(
        w as f64 / 2.0 + uniform(&mut rng, [-reach, reach]),
        h as f64 / 2.0 + uniform(&mut rng, [-reach, reach]),
    );
    // rigid only: tiles keep their physical size
    let mut global_jitter = sample_jitter(&mut rng, &config.jitter, size);
    global_jitter.scale = 1.0;
    let photometrics = sample_photometrics(&mut rng, &config.photometrics, size);
    let rng_seed = rng.random::<u64>();

    let pos_noise = Normal::new(0.0, jitter.pos_sigma.max(0.0))
        .map_err(|_| crate::Error::invalid("pos_sigma", "must be finite and non-negative"))?;
    let theta_noise = Normal::new(0.0, jitter.theta_sigma.max(0.0))
        .map_err(|_| crate::Error::invalid("theta_sigma", "must be finite and non-negative"))?;

    let mut placed: Vec<Placed> = Vec::new();
    let mut tiles = Vec::new();
    for (group, &alt) in template.parts.iter().zip(&alternatives) {
        for slot in &group.alternatives[alt] {
            let spec = slot.spec(catalog)?;
            let spec_idx = catalog.index_of(&spec.id).expect("slot spec comes from the catalog");
            let center = origin + Point2::new(slot.cx, slot.cy).rotated(placement_rot);
            let base = OrientedBox::new(
                center.x,
                center.y,
                spec.width(),
                spec.height(),
                slot.theta_deg + placement_rot,
            )?;
            let tries = if jitter.is_zero() { 0 } else { config.max_retries.max(1) };
            let mut chosen = None;
            for _ in 0..tries {
                let dx = pos_noise.sample(&mut rng);
                let dy = pos_noise.sample(&mut rng);
                let dt = theta_noise.sample(&mut rng);
                let pose = OrientedBox::new(base.cx + dx, base.cy + dy, base.w, base.h, base.theta + dt)?;
                let poly = polygon_of(spec.shape, &global_jitter.apply_pose(&pose), ARC_SEGMENTS)?;
                if fits(&poly, spec_idx, &placed, size) {
                    chosen = Some((pose, poly));
                    break;
                }
            }
            if chosen.is_none() {
                let poly = polygon_of(spec.shape, &global_jitter.apply_pose(&base), ARC_SEGMENTS)?;
                if fits(&poly, spec_idx, &placed, size) {
                    chosen = Some((base, poly));
                }
            }
            if let Some((pose, polygon)) = chosen {
                placed.push(Placed {
                    spec: spec_idx,
                    pre_jitter_center: pose.center(),
                    radius: 0.0,
                    polygon,
                });
                tiles.push(TilePose {
                    spec_id: spec.id.clone(),
                    pose,
                });
            }
        }
    }
    Ok(SceneSpec {
        image_size: size,
        tiles,
        photometrics,
        global_jitter,
        rng_seed,
        composition: Some(CompositionInfo {
            template_id: template.id.clone(),
            alternatives,
        }),
    })
}
