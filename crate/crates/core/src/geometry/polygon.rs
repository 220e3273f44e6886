use serde::{Deserialize, Serialize};

use super::{Point2, EPS};
use crate::error::{Error, Result};

/// A simple polygon with positive (counter-clockwise) winding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl TryFrom<Vec<Point2>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Point2>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point2> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += v[i].cross(v[(i + 1) % n]);
    }
    acc / 2.0
}

/// Shoelace area of a vertex ring. Rejects rings with fewer than three
/// vertices or zero enclosed area.
pub fn polygon_area(vertices: &[Point2]) -> Result<f64> {
    if vertices.len() < 3 {
        return Err(Error::DegeneratePolygon(format!("{} vertices", vertices.len())));
    }
    let a = signed_area(vertices).abs();
    if a <= EPS {
        return Err(Error::DegeneratePolygon("zero area".into()));
    }
    Ok(a)
}

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(format!("{} vertices", vertices.len())));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let a = signed_area(&vertices);
        if a.abs() <= EPS {
            return Err(Error::DegeneratePolygon("zero area".into()));
        }
        if a < 0.0 {
            return Err(Error::DegeneratePolygon("clockwise winding".into()));
        }
        Ok(Polygon { vertices })
    }

    pub(crate) fn from_ccw_unchecked(vertices: Vec<Point2>) -> Self {
        Polygon { vertices }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        centroid_of(&self.vertices)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::of_points(&self.vertices)
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Every turn is a left turn (collinear runs allowed).
    pub fn is_convex(&self) -> bool {
        let v = &self.vertices;
        let n = v.len();
        (0..n).all(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            let c = v[(i + 2) % n];
            let e1 = b - a;
            let e2 = c - b;
            let scale = (e1.dot(e1) * e2.dot(e2)).sqrt().max(1.0);
            e1.cross(e2) >= -EPS * scale
        })
    }

    pub fn to_vec(&self) -> Vec<[f64; 2]> {
        self.vertices.iter().map(|&p| p.into()).collect()
    }
}

pub(crate) fn centroid_of(v: &[Point2]) -> Point2 {
    let n = v.len();
    let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = v[i];
        let q = v[(i + 1) % n];
        let c = p.cross(q);
        a2 += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    Point2::new(cx / (3.0 * a2), cy / (3.0 * a2))
}

/// Axis-aligned bounding box, serialized as `[x0, y0, x1, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Aabb {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for Aabb {
    fn from([x0, y0, x1, y1]: [f64; 4]) -> Self {
        Aabb { x0, y0, x1, y1 }
    }
}

impl From<Aabb> for [f64; 4] {
    fn from(b: Aabb) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl Aabb {
    pub fn of_points(points: &[Point2]) -> Aabb {
        let mut b = Aabb {
            x0: f64::INFINITY,
            y0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for p in points {
            b.x0 = b.x0.min(p.x);
            b.y0 = b.y0.min(p.y);
            b.x1 = b.x1.max(p.x);
            b.y1 = b.y1.max(p.y);
        }
        b
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Aabb {
        Aabb {
            x0: cx - w / 2.0,
            y0: cy - h / 2.0,
            x1: cx + w / 2.0,
            y1: cy + h / 2.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> Point2 {
        Point2::new((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn iou(&self, other: &Aabb) -> f64 {
        let iw = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let ih = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Clips `subject` against the convex, counter-clockwise `clip` polygon
/// (successive half-plane clipping). Returns the possibly empty vertex ring.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = subject.to_vec();
    let n = clip.len();
    let mut input = Vec::with_capacity(out.len() + n);
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let edge = b - a;
        std::mem::swap(&mut input, &mut out);
        out.clear();
        let side = |p: Point2| edge.cross(p - a);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let sc = side(cur);
            let sp = side(prev);
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(cut(prev, cur, sp, sc));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(cut(prev, cur, sp, sc));
            }
        }
    }
    out
}

fn cut(p: Point2, q: Point2, sp: f64, sq: f64) -> Point2 {
    let t = sp / (sp - sq);
    p + (q - p) * t
}

/// Area of the intersection of two convex polygons.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    let ring = clip_convex(a.vertices(), b.vertices());
    if ring.len() < 3 {
        return 0.0;
    }
    signed_area(&ring).max(0.0)
}

/// Intersection over union of two convex polygons.
pub fn rotated_iou(a: &Polygon, b: &Polygon) -> Result<f64> {
    if !a.is_convex() || !b.is_convex() {
        return Err(Error::NonConvex);
    }
    Ok(iou_convex(a, b))
}

pub(crate) fn iou_convex(a: &Polygon, b: &Polygon) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= EPS {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Horizontal extent `[x_left, x_right)` of a convex polygon along the line
/// `y = yc`, using a half-open rule on edge endpoints so adjacent polygons
/// sharing an edge never both claim a sample.
pub fn scan_span(p: &Polygon, yc: f64) -> Option<(f64, f64)> {
    let v = p.vertices();
    let n = v.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        let (top, bot) = if a.y <= b.y { (a, b) } else { (b, a) };
        if yc < top.y || yc >= bot.y || top.y == bot.y {
            continue;
        }
        let x = top.x + (yc - top.y) * (bot.x - top.x) / (bot.y - top.y);
        lo = lo.min(x);
        hi = hi.max(x);
    }
    (lo < hi).then_some((lo, hi))
}

/// Shrinks a convex polygon by moving every edge inward by `d`. Returns
/// `None` when the result collapses.
pub fn inset_convex(p: &Polygon, d: f64) -> Option<Polygon> {
    let v = p.vertices();
    let n = v.len();
    // offset lines as (point, direction)
    let lines: Vec<(Point2, Point2)> = (0..n)
        .filter_map(|i| {
            let a = v[i];
            let e = v[(i + 1) % n] - a;
            let len = e.dot(e).sqrt();
            (len > EPS).then(|| {
                let inward = Point2::new(-e.y / len, e.x / len);
                (a + inward * d, e * (1.0 / len))
            })
        })
        .collect();
    let m = lines.len();
    if m < 3 {
        return None;
    }
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let (p0, d0) = lines[(i + m - 1) % m];
        let (p1, d1) = lines[i];
        let denom = d0.cross(d1);
        if denom.abs() < 1e-12 {
            // collinear neighbours: the offset point is shared
            out.push(p1);
            continue;
        }
        let t = (p1 - p0).cross(d1) / denom;
        out.push(p0 + d0 * t);
    }
    let poly = Polygon::new(out).ok()?;
    // an over-shrunk polygon turns inside out; its edges reverse direction
    let ok = (0..m).all(|i| {
        let a = poly.vertices()[i];
        let b = poly.vertices()[(i + 1) % m];
        (b - a).dot(lines[i].1) >= -EPS
    });
    ok.then_some(poly)
}
