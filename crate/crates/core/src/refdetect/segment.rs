use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, BACKGROUND};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point2};
use crate::scenegen::BORDER_SHADE;

const UNLABELED: u8 = u8::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentParams {
    /// Largest RGB distance at which a pixel still takes a catalog color.
    pub color_tolerance: f64,
    pub min_region_area: usize,
    /// Pixels within this many steps of another label are dropped before
    /// grouping, which cuts thin antialiasing bridges.
    pub erosion_radius: u32,
    /// 3×3 median filter before classification.
    pub denoise: bool,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            color_tolerance: 40.0,
            min_region_area: 50,
            erosion_radius: 2,
            denoise: true,
        }
    }
}

impl SegmentParams {
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.color_tolerance.is_nan() || self.color_tolerance <= 0.0 {
            return Err(Error::invalid("segment.color_tolerance", "must be positive"));
        }
        let limit = catalog.min_color_distance() / 2.0;
        if catalog.len() > 1 && self.color_tolerance >= limit {
            return Err(Error::invalid(
                "segment.color_tolerance",
                format!("must be below half the closest catalog color pair ({limit:.1})"),
            ));
        }
        if self.min_region_area == 0 {
            return Err(Error::invalid("segment.min_region_area", "must be >= 1"));
        }
        Ok(())
    }
}

/// A connected patch of pixels assigned to one catalog color.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub spec_index: usize,
    pub spec_id: String,
    /// Bounding box in pixel indices, exclusive upper bounds.
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub pixel_count: usize,
    /// Mean of the member pixel centers.
    pub centroid: Point2,
    mask: Vec<bool>,
}

impl Region {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn bbox(&self) -> Aabb {
        Aabb {
            x0: self.x0 as f64,
            y0: self.y0 as f64,
            x1: self.x1 as f64,
            y1: self.y1 as f64,
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0
            && x < self.x1
            && y >= self.y0
            && y < self.y1
            && self.mask[((y - self.y0) * self.width() + (x - self.x0)) as usize]
    }

    /// Row `y` of the mask restricted to the bounding box.
    pub fn mask_row(&self, y: u32) -> &[bool] {
        let w = self.width() as usize;
        let r = (y - self.y0) as usize;
        &self.mask[r * w..(r + 1) * w]
    }
}

fn channel_medians(img: &RgbImage) -> [f64; 3] {
    let mut hist = [[0usize; 256]; 3];
    for p in img.pixels() {
        for c in 0..3 {
            hist[c][p.0[c] as usize] += 1;
        }
    }
    let half = (img.width() as usize * img.height() as usize).div_ceil(2);
    hist.map(|h| {
        let mut acc = 0;
        for (v, &n) in h.iter().enumerate() {
            acc += n;
            if acc >= half {
                return v as f64;
            }
        }
        255.0
    })
}

/// The image as floats with the playmat brought back to its nominal color.
/// The per-channel gain comes from the image median, which the playmat
/// dominates.
fn normalized(img: &RgbImage, denoise: bool) -> Vec<[f32; 3]> {
    let med = channel_medians(img);
    let gain: [f32; 3] = std::array::from_fn(|c| (BACKGROUND[c] as f64 / med[c].max(1.0)).clamp(0.5, 2.0) as f32);
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    let px = |i: usize| -> [f32; 3] { std::array::from_fn(|c| raw[i * 3 + c] as f32 * gain[c]) };
    if !denoise {
        return (0..w * h).map(px).collect();
    }
    // per-channel 3×3 median, shrinking the window at the border; unlike a
    // mean it keeps the thin dark seam between touching tiles
    let mut out = vec![[0f32; 3]; w * h];
    let mut cols = vec![[0u8; 3]; w];
    for c in 0..3 {
        let at = |x: usize, y: usize| raw[(y * w + x) * 3 + c];
        for y in 0..h {
            let interior = y > 0 && y + 1 < h && w >= 3;
            if interior {
                for (x, col) in cols.iter_mut().enumerate() {
                    *col = sort3(at(x, y - 1), at(x, y), at(x, y + 1));
                }
            }
            for x in 0..w {
                let m = if interior && x > 0 && x + 1 < w {
                    let [a, b, d] = [cols[x - 1], cols[x], cols[x + 1]];
                    let lo = a[0].max(b[0]).max(d[0]);
                    let hi = a[2].min(b[2]).min(d[2]);
                    sort3(lo, sort3(a[1], b[1], d[1])[1], hi)[1]
                } else {
                    edge_median(&at, x, y, w, h)
                };
                out[y * w + x][c] = m as f32 * gain[c];
            }
        }
    }
    out
}

fn sort3(a: u8, b: u8, c: u8) -> [u8; 3] {
    let (lo, hi) = (a.min(b), a.max(b));
    [lo.min(c), hi.min(c).max(lo), hi.max(c)]
}

/// Median of the clipped window around an edge pixel.
fn edge_median(at: &impl Fn(usize, usize) -> u8, x: usize, y: usize, w: usize, h: usize) -> u8 {
    let mut vals = Vec::with_capacity(9);
    for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
        for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
            vals.push(at(xx, yy));
        }
    }
    vals.sort_unstable();
    vals[vals.len() / 2]
}

/// Nearest of the fill and rim colors; rim pixels stay unlabeled so that
/// touching tiles of one spec keep a seam between them.
fn classify(pixels: &[[f32; 3]], catalog: &Catalog, tolerance: f64) -> Vec<u8> {
    let fills: Vec<[f32; 3]> = catalog.specs().iter().map(|s| s.color.map(f32::from)).collect();
    let rims: Vec<[f32; 3]> = fills.iter().map(|c| c.map(|v| v * BORDER_SHADE as f32)).collect();
    let tol2 = (tolerance * tolerance) as f32;
    let dist2 = |p: &[f32; 3], c: &[f32; 3]| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
    pixels
        .iter()
        .map(|p| {
            let mut best = (f32::INFINITY, UNLABELED);
            for (k, c) in fills.iter().enumerate() {
                let d = dist2(p, c);
                if d < best.0 {
                    best = (d, k as u8);
                }
            }
            let rim = rims.iter().map(|c| dist2(p, c)).fold(f32::INFINITY, f32::min);
            if best.0 <= tol2 && best.0 <= rim {
                best.1
            } else {
                UNLABELED
            }
        })
        .collect()
}

/// One step of 8-neighbour erosion; pixels on the image edge keep their label
/// when every in-bounds neighbour agrees.
fn erode(labels: &[u8], w: usize, h: usize) -> Vec<u8> {
    let mut out = vec![UNLABELED; labels.len()];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == UNLABELED {
                continue;
            }
            let keep = (y.saturating_sub(1)..=(y + 1).min(h - 1))
                .all(|yy| (x.saturating_sub(1)..=(x + 1).min(w - 1)).all(|xx| labels[yy * w + xx] == l));
            if keep {
                out[y * w + x] = l;
            }
        }
    }
    out
}

/// Per-pixel nearest catalog color within tolerance, erosion, then
/// 8-connected components of equal label. Regions come out in raster order
/// of their first pixel.
pub fn segment(img: &RgbImage, catalog: &Catalog, params: &SegmentParams) -> Result<Vec<Region>> {
    params.validate(catalog)?;
    if catalog.len() >= UNLABELED as usize {
        return Err(Error::invalid("catalog", "too many specs for segmentation"));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Ok(Vec::new());
    }
    let pixels = normalized(img, params.denoise);
    let mut labels = classify(&pixels, catalog, params.color_tolerance);
    for _ in 0..params.erosion_radius {
        labels = erode(&labels, w, h);
    }

    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    let mut members: Vec<usize> = Vec::new();
    for start in 0..w * h {
        let label = labels[start];
        if label == UNLABELED || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        members.clear();
        while let Some(i) = stack.pop() {
            members.push(i);
            let (x, y) = (i % w, i / w);
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = yy * w + xx;
                    if !seen[j] && labels[j] == label {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if members.len() < params.min_region_area {
            continue;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        let (mut sx, mut sy) = (0.0, 0.0);
        for &i in &members {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x + 1);
            y1 = y1.max(y + 1);
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
        }
        let bw = x1 - x0;
        let mut mask = vec![false; bw * (y1 - y0)];
        for &i in &members {
            mask[(i / w - y0) * bw + (i % w - x0)] = true;
        }
        let n = members.len();
        let spec = &catalog.specs()[label as usize];
        regions.push(Region {
            spec_index: label as usize,
            spec_id: spec.id.clone(),
            x0: x0 as u32,
            y0: y0 as u32,
            x1: x1 as u32,
            y1: y1 as u32,
            pixel_count: n,
            centroid: Point2::new(sx / n as f64, sy / n as f64),
            mask,
        });
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedBox;
    use crate::scenegen::{rasterize, SceneSpec, TilePose};

    fn scene(tiles: &[(&str, f64, f64, f64)]) -> SceneSpec {
        let cat = Catalog::default();
        let mut s = SceneSpec::empty(240, 240);
        for &(id, cx, cy, theta) in tiles {
            let spec = cat.get(id).unwrap();
            s.tiles.push(TilePose {
                spec_id: id.into(),
                pose: OrientedBox::new(cx, cy, spec.width(), spec.height(), theta).unwrap(),
            });
        }
        s
    }

    #[test]
    fn blank_image_has_no_regions() {
        let cat = Catalog::default();
        let img = rasterize(&SceneSpec::empty(64, 64), &cat).unwrap();
        assert!(segment(&img, &cat, &SegmentParams::default()).unwrap().is_empty());
    }

    #[test]
    fn single_square_centroid() {
        let cat = Catalog::default();
        let img = rasterize(&scene(&[("blue_square", 100.3, 90.7, 20.0)]), &cat).unwrap();
        let regions = segment(&img, &cat, &SegmentParams::default()).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].spec_id, "blue_square");
        assert!(
            regions[0].centroid.dist(Point2::new(100.3, 90.7)) < 0.5,
            "{:?}",
            regions[0].centroid
        );
    }

    #[test]
    fn touching_same_color_tiles_stay_apart() {
        let cat = Catalog::default();
        let img = rasterize(
            &scene(&[("blue_square", 80.0, 100.0, 0.0), ("blue_square", 130.0, 100.0, 0.0)]),
            &cat,
        )
        .unwrap();
        let regions = segment(&img, &cat, &SegmentParams::default()).unwrap();
        assert_eq!(regions.len(), 2);
    }

    #[test]
    fn seam_survives_dark_gamma_and_noise() {
        use crate::compose::TemplateRegistry;
        use crate::scenegen::{sample_composition, CompositionJitter, Photometrics, SceneConfig};
        let cat = Catalog::default();
        let reg = TemplateRegistry::builtin(&cat).unwrap();
        for seed in 0..60 {
            let mut scene = sample_composition(
                &reg,
                &cat,
                "mushroom",
                &CompositionJitter::none(),
                seed,
                &SceneConfig::default(),
            )
            .unwrap();
            scene.photometrics = Photometrics {
                brightness_gain: 1.18,
                gamma: 0.82,
                noise_sigma: 9.0,
                shadow: None,
            };
            let img = rasterize(&scene, &cat).unwrap();
            let regions = segment(&img, &cat, &SegmentParams::default()).unwrap();
            let caps = regions.iter().filter(|r| r.spec_id == "green_quarter").count();
            assert_eq!(caps, 2, "seed {seed}");
        }
    }

    #[test]
    fn median_filter_matches_sorting() {
        let (w, h) = (7usize, 5usize);
        let mut state = 12345u32;
        let bytes: Vec<u8> = (0..w * h * 3)
            .map(|_| {
                state = state.wrapping_mul(1664525).wrapping_add(1013904223);
                (state >> 24) as u8
            })
            .collect();
        let img = RgbImage::from_raw(w as u32, h as u32, bytes.clone()).unwrap();
        let med = channel_medians(&img);
        let gain: [f32; 3] = std::array::from_fn(|c| (BACKGROUND[c] as f64 / med[c].max(1.0)).clamp(0.5, 2.0) as f32);
        let out = normalized(&img, true);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut v = Vec::new();
                    for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                        for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                            v.push(bytes[(yy * w + xx) * 3 + c]);
                        }
                    }
                    v.sort_unstable();
                    assert_eq!(out[y * w + x][c], v[v.len() / 2] as f32 * gain[c], "({x},{y},{c})");
                }
            }
        }
    }

    #[test]
    fn tolerance_must_separate_colors() {
        let cat = Catalog::default();
        let p = SegmentParams {
            color_tolerance: cat.min_color_distance(),
            ..SegmentParams::default()
        };
        assert!(p.validate(&cat).is_err());
    }

    #[test]
    fn small_blobs_are_dropped() {
        let cat = Catalog::default();
        let mut img = rasterize(&SceneSpec::empty(32, 32), &cat).unwrap();
        for (x, y) in [(10, 10), (11, 10), (10, 11)] {
            img.put_pixel(x, y, image::Rgb([45, 90, 195]));
        }
        let p = SegmentParams {
            erosion_radius: 0,
            denoise: false,
            ..SegmentParams::default()
        };
        assert!(segment(&img, &cat, &p).unwrap().is_empty());
        let p = SegmentParams {
            min_region_area: 3,
            ..p
        };
        assert_eq!(segment(&img, &cat, &p).unwrap()[0].pixel_count, 3);
    }
}
