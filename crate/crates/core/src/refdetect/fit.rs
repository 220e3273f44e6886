use super::{DetectParams, Region};
use crate::catalog::{Catalog, TileSpec};
use crate::detection::Detection;
use crate::geometry::{
    bin_of, canonical_theta, inset_convex, polygon_of, scan_span, OrientationBins, OrientedBox, Point2, Polygon,
    ARC_SEGMENTS,
};
use crate::scenegen::BORDER_PX;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Maximizes `f` on `[lo, hi]`; returns `(argmax, max)`.
fn golden_max(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - GOLDEN * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + GOLDEN * (hi - lo);
            fb = f(b);
        }
    }
    if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Per-row prefix counts of the region mask for O(1) span queries.
struct MaskIndex<'a> {
    region: &'a Region,
    prefix: Vec<u32>,
}

impl<'a> MaskIndex<'a> {
    fn new(region: &'a Region) -> Self {
        let w = region.width() as usize;
        let mut prefix = Vec::with_capacity((w + 1) * region.height() as usize);
        for y in region.y0..region.y1 {
            let mut acc = 0;
            prefix.push(0);
            for &m in region.mask_row(y) {
                acc += m as u32;
                prefix.push(acc);
            }
        }
        MaskIndex { region, prefix }
    }

    fn at(&self, x: i64, y: u32) -> bool {
        x >= self.region.x0 as i64 && x < self.region.x1 as i64 && self.region.contains(x as u32, y)
    }

    /// Mask coverage of `[l, r)` on row `y`, counting partial pixels at the
    /// ends by their overlap length.
    fn covered(&self, y: u32, l: f64, r: f64) -> f64 {
        if y < self.region.y0 || y >= self.region.y1 || r <= l {
            return 0.0;
        }
        let (fl, fr) = (l.floor() as i64, r.floor() as i64);
        if fl == fr {
            return if self.at(fl, y) { r - l } else { 0.0 };
        }
        let mut sum = 0.0;
        if self.at(fl, y) {
            sum += (fl + 1) as f64 - l;
        }
        if self.at(fr, y) {
            sum += r - fr as f64;
        }
        // whole pixels fl+1 .. fr
        let x0 = self.region.x0 as i64;
        let w = self.region.width() as i64;
        let a = (fl + 1 - x0).clamp(0, w) as usize;
        let b = (fr - x0).clamp(0, w) as usize;
        if b > a {
            let row = (y - self.region.y0) as usize * (w as usize + 1);
            sum += (self.prefix[row + b] - self.prefix[row + a]) as f64;
        }
        sum
    }

    /// IoU between the mask and a polygon sampled along pixel-row centers.
    fn iou(&self, poly: &Polygon) -> f64 {
        let bb = poly.aabb();
        let mut inter = 0.0;
        let mut area = 0.0;
        let y_lo = (bb.y0 - 0.5).ceil().max(0.0) as u32;
        let y_hi = (bb.y1 - 0.5).ceil().max(0.0) as u32;
        for y in y_lo..y_hi {
            if let Some((l, r)) = scan_span(poly, y as f64 + 0.5) {
                area += r - l;
                inter += self.covered(y, l, r);
            }
        }
        let union = area + self.region.pixel_count as f64 - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

/// The region-sized model: the fill area of the tile, shrunk by the rim and
/// by the erosion applied during segmentation.
struct Model<'a> {
    spec: &'a TileSpec,
    inset: f64,
}

impl Model<'_> {
    /// Inner polygon of a tile at scale `s` and angle `theta`, centered on the
    /// tile's pose origin.
    fn inner(&self, s: f64, theta: f64) -> Option<Polygon> {
        let pose = OrientedBox::new(0.0, 0.0, s * self.spec.width(), s * self.spec.height(), theta).ok()?;
        inset_convex(&polygon_of(self.spec.shape, &pose, ARC_SEGMENTS).ok()?, self.inset)
    }

    /// Tile center such that the inner polygon's centroid lands on `c`.
    fn placed(&self, s: f64, theta: f64, c: Point2) -> Option<(Point2, Polygon)> {
        let inner = self.inner(s, theta)?;
        let center = c - inner.centroid();
        Some((center, inner.map(|p| p + center)))
    }

    fn scale_for_area(&self, target: f64) -> f64 {
        let area = |s: f64| self.inner(s, 0.0).map_or(0.0, |p| p.area());
        let (mut lo, mut hi) = (0.2, 4.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if area(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Fits the region's catalog tile: scale from the pixel count, orientation
/// by scanning the orientation bins within one symmetry period, then
/// golden-section refinement of angle and scale. The score is the IoU of
/// the mask with the fitted fill polygon. Returns `None` below
/// `params.min_overlap`.
pub fn fit_pose(region: &Region, catalog: &Catalog, params: &DetectParams) -> Option<Detection> {
    let spec = catalog.specs().get(region.spec_index)?;
    let model = Model {
        spec,
        inset: BORDER_PX + params.segment.erosion_radius as f64,
    };
    let index = MaskIndex::new(region);
    let c = region.centroid;
    let score = |s: f64, theta: f64| model.placed(s, theta, c).map_or(0.0, |(_, p)| index.iou(&p));

    let bins = OrientationBins::default();
    let period = spec.symmetry.period();
    let steps = ((period / bins.gap_deg).round() as usize).max(1);
    let s0 = model.scale_for_area(region.pixel_count as f64);
    let (mut theta, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..steps {
        let t = i as f64 * bins.gap_deg;
        let v = score(s0, t);
        if v > best {
            (theta, best) = (t, v);
        }
    }
    let half = bins.gap_deg / 2.0;
    (theta, _) = golden_max(theta - half, theta + half, 20, |t| score(s0, t));
    let (s, _) = golden_max(0.9 * s0, 1.1 * s0, 20, |s| score(s, theta));
    (theta, best) = golden_max(theta - half / 2.0, theta + half / 2.0, 16, |t| score(s, t));
    if best < params.min_overlap {
        return None;
    }
    let (center, _) = model.placed(s, theta, c)?;
    let theta = canonical_theta(theta, spec.symmetry);
    let pose = OrientedBox::new(center.x, center.y, s * spec.width(), s * spec.height(), theta).ok()?;
    Some(Detection {
        shape: spec.shape,
        spec_id: spec.id.clone(),
        score: best.min(1.0),
        cx: center.x,
        cy: center.y,
        theta_deg: pose.theta,
        orientation_bin: bin_of(pose.theta, &bins),
        vertices: polygon_of(spec.shape, &pose, ARC_SEGMENTS).ok()?,
    })
}
