//! Deterministic synthetic BEV scenes: sampling, rendering and exact labels.
//!
//! A [`SceneSpec`] fully determines its rendered image and its annotation.
//! Global jitter is applied to the tile geometry (not by resampling pixels),
//! so annotated vertices are exactly the jittered model polygons.

mod annotate;
mod dataset;
mod raster;
mod sample;

pub use annotate::{annotate, AnnotationSet, TileAnnotation};
pub use dataset::{generate_dataset, read_manifest, DatasetManifest, GenerationMode, ManifestEntry, MANIFEST_FILE};
pub use raster::{rasterize, BORDER_PX, BORDER_SHADE};
pub use sample::{sample_composition, sample_scene, CompositionJitter};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::geometry::{intersection_area, polygon_of, OrientedBox, Polygon, Similarity, ARC_SEGMENTS};

/// Largest allowed overlap between two tiles, as a fraction of the smaller
/// tile's area.
pub const MAX_OVERLAP_FRACTION: f64 = 0.01;

/// Tiles must stay this far inside the image after jitter.
pub const EDGE_MARGIN_PX: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TilePose {
    pub spec_id: String,
    pub pose: OrientedBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shadow {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub angle_deg: f64,
    /// Fraction of light removed at the ellipse center.
    pub strength: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Photometrics {
    pub brightness_gain: f64,
    pub gamma: f64,
    /// Standard deviation of additive Gaussian noise, 8-bit units.
    pub noise_sigma: f64,
    #[serde(default)]
    pub shadow: Option<Shadow>,
}

impl Photometrics {
    pub fn none() -> Self {
        Photometrics {
            brightness_gain: 1.0,
            gamma: 1.0,
            noise_sigma: 0.0,
            shadow: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.brightness_gain.is_finite()
            && self.brightness_gain > 0.0
            && self.gamma.is_finite()
            && self.gamma > 0.0
            && self.noise_sigma.is_finite()
            && self.noise_sigma >= 0.0;
        if !ok {
            return Err(Error::invalid(
                "photometrics",
                "gain and gamma must be positive, noise non-negative",
            ));
        }
        if let Some(s) = &self.shadow {
            if !(s.rx > 0.0 && s.ry > 0.0 && (0.0..=1.0).contains(&s.strength)) {
                return Err(Error::invalid(
                    "photometrics.shadow",
                    "radii must be positive, strength in [0, 1]",
                ));
            }
        }
        Ok(())
    }
}

impl Default for Photometrics {
    fn default() -> Self {
        Photometrics::none()
    }
}

/// Which template alternatives a composition scene was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionInfo {
    pub template_id: String,
    /// Chosen alternative index per part group.
    pub alternatives: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// `[width, height]` in pixels.
    pub image_size: [u32; 2],
    pub tiles: Vec<TilePose>,
    #[serde(default)]
    pub photometrics: Photometrics,
    #[serde(default)]
    pub global_jitter: Similarity,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<CompositionInfo>,
}

impl SceneSpec {
    pub fn empty(width: u32, height: u32) -> Self {
        SceneSpec {
            image_size: [width, height],
            tiles: Vec::new(),
            photometrics: Photometrics::none(),
            global_jitter: Similarity::identity(),
            rng_seed: 0,
            composition: None,
        }
    }

    pub fn width(&self) -> u32 {
        self.image_size[0]
    }

    pub fn height(&self) -> u32 {
        self.image_size[1]
    }

    /// Tile poses in image coordinates (global jitter applied).
    pub fn placed_poses(&self) -> Vec<OrientedBox> {
        self.tiles
            .iter()
            .map(|t| self.global_jitter.apply_pose(&t.pose))
            .collect()
    }

    /// Structural checks: known specs, sane sizes and photometrics.
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        let [w, h] = self.image_size;
        if w == 0 || h == 0 || w > 8192 || h > 8192 {
            return Err(Error::invalid("image_size", format!("{w}x{h} out of range")));
        }
        for (i, t) in self.tiles.iter().enumerate() {
            catalog
                .get(&t.spec_id)
                .map_err(|_| Error::invalid(format!("tiles[{i}].spec_id"), format!("unknown spec '{}'", t.spec_id)))?;
        }
        let j = &self.global_jitter;
        if !(j.scale.is_finite() && j.scale > 0.0 && j.rotation_deg.is_finite() && j.tx.is_finite() && j.ty.is_finite())
        {
            return Err(Error::invalid("global_jitter", "non-finite or non-positive scale"));
        }
        self.photometrics.validate()
    }

    /// Polygons of every tile in image coordinates.
    pub fn tile_polygons(&self, catalog: &Catalog) -> Result<Vec<Polygon>> {
        self.tiles
            .iter()
            .zip(self.placed_poses())
            .map(|(t, pose)| polygon_of(catalog.get(&t.spec_id)?.shape, &pose, ARC_SEGMENTS))
            .collect()
    }

    /// The dense-packing and in-bounds invariants every generated scene holds.
    pub fn check_invariants(&self, catalog: &Catalog) -> Result<()> {
        self.validate(catalog)?;
        let polys = self.tile_polygons(catalog)?;
        for (i, p) in polys.iter().enumerate() {
            if !in_bounds(p, self.image_size) {
                return Err(Error::invalid(format!("tiles[{i}]"), "outside the image"));
            }
            for (j, q) in polys.iter().enumerate().skip(i + 1) {
                if !overlap_ok(p, q, false) {
                    return Err(Error::invalid(format!("tiles[{i}], tiles[{j}]"), "overlap above 1%"));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn in_bounds(p: &Polygon, [w, h]: [u32; 2]) -> bool {
    let b = p.aabb();
    b.x0 >= EDGE_MARGIN_PX
        && b.y0 >= EDGE_MARGIN_PX
        && b.x1 <= w as f64 - EDGE_MARGIN_PX
        && b.y1 <= h as f64 - EDGE_MARGIN_PX
}

/// Overlap rule between two placed tiles. Tiles of the same spec may touch
/// but not overlap, so their borders always separate them in the render.
pub(crate) fn overlap_ok(a: &Polygon, b: &Polygon, same_spec: bool) -> bool {
    let ab = a.aabb();
    let bb = b.aabb();
    if ab.x1 <= bb.x0 || bb.x1 <= ab.x0 || ab.y1 <= bb.y0 || bb.y1 <= ab.y0 {
        return true;
    }
    let smaller = a.area().min(b.area());
    let frac = if same_spec { 1e-4 } else { MAX_OVERLAP_FRACTION };
    intersection_area(a, b) <= frac * smaller
}

/// Ranges scene photometrics are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhotometricRanges {
    pub brightness_gain: [f64; 2],
    pub gamma: [f64; 2],
    pub noise_sigma: [f64; 2],
    pub shadow_probability: f64,
}

impl PhotometricRanges {
    /// No photometric variation.
    pub fn clean() -> Self {
        PhotometricRanges {
            brightness_gain: [1.0, 1.0],
            gamma: [1.0, 1.0],
            noise_sigma: [0.0, 0.0],
            shadow_probability: 0.0,
        }
    }

    /// Lighting variation used for robustness runs.
    pub fn varied() -> Self {
        PhotometricRanges {
            brightness_gain: [0.7, 1.3],
            gamma: [0.8, 1.25],
            noise_sigma: [0.0, 10.0],
            shadow_probability: 0.0,
        }
    }
}

impl Default for PhotometricRanges {
    fn default() -> Self {
        PhotometricRanges::clean()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JitterRanges {
    pub scale: [f64; 2],
    pub rotation_deg: [f64; 2],
    pub translate_px: f64,
}

impl JitterRanges {
    pub fn none() -> Self {
        JitterRanges {
            scale: [1.0, 1.0],
            rotation_deg: [0.0, 0.0],
            translate_px: 0.0,
        }
    }
}

impl Default for JitterRanges {
    fn default() -> Self {
        JitterRanges {
            scale: [0.9, 1.1],
            rotation_deg: [-10.0, 10.0],
            translate_px: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub image_size: [u32; 2],
    pub max_tiles: usize,
    pub photometrics: PhotometricRanges,
    pub jitter: JitterRanges,
    /// Placement attempts per tile before giving up on it.
    pub max_retries: usize,
    /// Chance that a placement attempt lands next to an existing tile.
    pub near_placement_probability: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            image_size: [480, 480],
            max_tiles: 8,
            photometrics: PhotometricRanges::clean(),
            jitter: JitterRanges::default(),
            max_retries: 200,
            near_placement_probability: 0.5,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let [w, h] = self.image_size;
        if w == 0 || h == 0 {
            return Err(Error::invalid("image_size", "must be positive"));
        }
        if self.max_tiles == 0 {
            return Err(Error::invalid("max_tiles", "must be >= 1"));
        }
        let range_ok = |r: [f64; 2], min: f64| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] && r[0] >= min;
        let p = &self.photometrics;
        if !(range_ok(p.brightness_gain, 1e-3) && range_ok(p.gamma, 1e-3) && range_ok(p.noise_sigma, 0.0)) {
            return Err(Error::invalid("photometrics", "ranges must be ordered and positive"));
        }
        if !(0.0..=1.0).contains(&p.shadow_probability) {
            return Err(Error::invalid("photometrics.shadow_probability", "must be in [0, 1]"));
        }
        let j = &self.jitter;
        if !(range_ok(j.scale, 1e-3) && range_ok(j.rotation_deg, -360.0) && j.translate_px >= 0.0) {
            return Err(Error::invalid("jitter", "ranges must be ordered, scale positive"));
        }
        if !(0.0..=1.0).contains(&self.near_placement_probability) {
            return Err(Error::invalid("near_placement_probability", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Mixes a base seed with an index (SplitMix64 finalizer) so per-image seeds
/// do not depend on generation order.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
