use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Photometrics, SceneSpec, Shadow};
use crate::catalog::{Catalog, BACKGROUND};
use crate::error::Result;
use crate::geometry::{inset_convex, polygon_of, scan_span, Point2, Polygon, ARC_SEGMENTS};

/// Width of the darker rim drawn just inside every tile outline.
pub const BORDER_PX: f64 = 2.0;
/// Rim color as a fraction of the fill color.
pub const BORDER_SHADE: f64 = 0.6;

/// Supersamples per pixel along each axis.
const SUPERSAMPLE: usize = 4;
const NOISE_SALT: u64 = 0x6E6F_6973_655F_7631;

struct Canvas {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Canvas {
    fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend(fill.map(f32::from));
        }
        Canvas { width, height, data }
    }

    /// Alpha-blends `color` over the polygon using per-pixel sample coverage.
    fn paint(&mut self, poly: &Polygon, color: [f32; 3]) {
        let bb = poly.aabb();
        let y0 = bb.y0.floor().max(0.0) as usize;
        let y1 = (bb.y1.ceil().max(0.0) as usize).min(self.height);
        let x0 = bb.x0.floor().max(0.0) as usize;
        let x1 = (bb.x1.ceil().max(0.0) as usize).min(self.width);
        if y0 >= y1 || x0 >= x1 {
            return;
        }
        let ss = SUPERSAMPLE as f64;
        let full = (SUPERSAMPLE * SUPERSAMPLE) as f32;
        let mut coverage = vec![0u16; x1 - x0];
        let (q_lo, q_hi) = ((x0 * SUPERSAMPLE) as i64, (x1 * SUPERSAMPLE) as i64);
        for py in y0..y1 {
            coverage.fill(0);
            for s in 0..SUPERSAMPLE {
                let yc = py as f64 + (s as f64 + 0.5) / ss;
                let Some((l, r)) = scan_span(poly, yc) else { continue };
                let q0 = ((l * ss - 0.5).ceil() as i64).max(q_lo);
                let q1 = ((r * ss - 0.5).ceil() as i64).min(q_hi);
                for q in q0..q1 {
                    coverage[q as usize / SUPERSAMPLE - x0] += 1;
                }
            }
            let row = py * self.width;
            for (i, &c) in coverage.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let a = c as f32 / full;
                let px = &mut self.data[(row + x0 + i) * 3..][..3];
                for (v, &col) in px.iter_mut().zip(&color) {
                    *v = *v * (1.0 - a) + col * a;
                }
            }
        }
    }

    fn apply(&mut self, ph: &Photometrics, seed: u64) {
        let gain = ph.brightness_gain as f32;
        if gain != 1.0 {
            self.data.iter_mut().for_each(|v| *v *= gain);
        }
        let gamma = ph.gamma as f32;
        if gamma != 1.0 {
            self.data
                .iter_mut()
                .for_each(|v| *v = 255.0 * (*v / 255.0).clamp(0.0, 1.0).powf(gamma));
        }
        if let Some(shadow) = &ph.shadow {
            self.shade(shadow);
        }
        if ph.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_SALT);
            let normal = Normal::new(0.0f32, ph.noise_sigma as f32).expect("validated sigma");
            self.data.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
    }

    fn shade(&mut self, s: &Shadow) {
        let c = Point2::new(s.cx, s.cy);
        for y in 0..self.height {
            for x in 0..self.width {
                let d = (Point2::new(x as f64 + 0.5, y as f64 + 0.5) - c).rotated(-s.angle_deg);
                let r = ((d.x / s.rx).powi(2) + (d.y / s.ry).powi(2)).sqrt();
                // full strength inside 0.8, fading out by 1.2
                let t = ((1.2 - r) / 0.4).clamp(0.0, 1.0);
                let falloff = t * t * (3.0 - 2.0 * t);
                if falloff > 0.0 {
                    let k = (1.0 - s.strength * falloff) as f32;
                    let i = (y * self.width + x) * 3;
                    self.data[i..i + 3].iter_mut().for_each(|v| *v *= k);
                }
            }
        }
    }

    fn into_image(self) -> RgbImage {
        let bytes = self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, bytes).expect("buffer matches dimensions")
    }
}

/// Renders a scene: light-gray playmat, each tile as a filled polygon with a
/// darker rim (4×4 supersampled coverage), tiles in list order, then
/// brightness gain, gamma, shadow and noise.
pub fn rasterize(scene: &SceneSpec, catalog: &Catalog) -> Result<RgbImage> {
    scene.validate(catalog)?;
    let mut canvas = Canvas::new(scene.width() as usize, scene.height() as usize, BACKGROUND);
    for (tile, pose) in scene.tiles.iter().zip(scene.placed_poses()) {
        let spec = catalog.get(&tile.spec_id)?;
        let outline = polygon_of(spec.shape, &pose, ARC_SEGMENTS)?;
        let fill = spec.color.map(f32::from);
        canvas.paint(&outline, fill.map(|c| c * BORDER_SHADE as f32));
        if let Some(inner) = inset_convex(&outline, BORDER_PX) {
            canvas.paint(&inner, fill);
        }
    }
    canvas.apply(&scene.photometrics, scene.rng_seed);
    Ok(canvas.into_image())
}
