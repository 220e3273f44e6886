//! 2D primitives shared by every stage of the pipeline.
//!
//! Coordinates are BEV image pixels: `x` grows to the right, `y` grows down.
//! Angles are degrees measured from the `+x` axis towards `+y`, which is the
//! counter-clockwise sense of the pixel frame taken as a right-handed plane
//! (on screen it appears clockwise). Polygon winding follows the same frame:
//! "counter-clockwise" means positive shoelace area.

mod orientation;
mod polygon;
mod shapes;

pub use orientation::{
    angle_diff, bin_of, canonical_theta, normalize_deg, theta_of, OrientationBins, SymmetryOrder, DEFAULT_BINS,
};
pub use polygon::{clip_convex, inset_convex, intersection_area, polygon_area, rotated_iou, scan_span, Aabb, Polygon};
pub use shapes::{polygon_of, ShapeClass, ARC_SEGMENTS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance, in pixels, for geometric predicates.
pub const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Rotates about the origin by `deg` degrees.
    pub fn rotated(self, deg: f64) -> Point2 {
        let (s, c) = deg.to_radians().sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2 { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// A tile pose: center, extent and continuous orientation.
///
/// `(cx, cy)` is the area centroid of the shape the box describes, which is
/// also its center of rotational symmetry. `w`/`h` are the model extents
/// before rotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    /// Degrees in `[0, 360)`.
    pub theta: f64,
}

#[derive(Deserialize)]
struct RawBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta: f64,
}

impl TryFrom<RawBox> for OrientedBox {
    type Error = Error;
    fn try_from(r: RawBox) -> Result<Self> {
        OrientedBox::new(r.cx, r.cy, r.w, r.h, r.theta)
    }
}

impl OrientedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && theta.is_finite()) {
            return Err(Error::invalid("pose", "non-finite center or angle"));
        }
        if !(w.is_finite() && w > 0.0 && h.is_finite() && h > 0.0) {
            return Err(Error::invalid("pose", format!("extent must be positive, got {w}x{h}")));
        }
        Ok(OrientedBox {
            cx,
            cy,
            w,
            h,
            theta: normalize_deg(theta),
        })
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.cx, self.cy)
    }

    pub fn with_theta(self, theta: f64) -> Self {
        OrientedBox {
            theta: normalize_deg(theta),
            ..self
        }
    }
}

/// Similarity transform `p -> pivot + scale * R(rotation) * (p - pivot) + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Similarity {
    pub scale: f64,
    pub rotation_deg: f64,
    pub tx: f64,
    pub ty: f64,
    #[serde(default)]
    pub pivot_x: f64,
    #[serde(default)]
    pub pivot_y: f64,
}

impl Similarity {
    pub fn identity() -> Self {
        Similarity {
            scale: 1.0,
            rotation_deg: 0.0,
            tx: 0.0,
            ty: 0.0,
            pivot_x: 0.0,
            pivot_y: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.rotation_deg == 0.0 && self.tx == 0.0 && self.ty == 0.0
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let pivot = Point2::new(self.pivot_x, self.pivot_y);
        pivot + (p - pivot).rotated(self.rotation_deg) * self.scale + Point2::new(self.tx, self.ty)
    }

    pub fn apply_pose(&self, pose: &OrientedBox) -> OrientedBox {
        let c = self.apply(pose.center());
        OrientedBox {
            cx: c.x,
            cy: c.y,
            w: pose.w * self.scale,
            h: pose.h * self.scale,
            theta: normalize_deg(pose.theta + self.rotation_deg),
        }
    }
}

impl Default for Similarity {
    fn default() -> Self {
        Similarity::identity()
    }
}
