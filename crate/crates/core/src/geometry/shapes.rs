use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::polygon::centroid_of;
use super::{OrientedBox, Point2, Polygon, SymmetryOrder};
use crate::error::{Error, Result};

/// Chords per curved edge, shared by ground truth and predictions so that
/// vertex lists are comparable one to one.
pub const ARC_SEGMENTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Square,
    Rectangle,
    RightTriangle,
    EquilateralTriangle,
    Semicircle,
    QuarterCircle,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 6] = [
        ShapeClass::Square,
        ShapeClass::Rectangle,
        ShapeClass::RightTriangle,
        ShapeClass::EquilateralTriangle,
        ShapeClass::Semicircle,
        ShapeClass::QuarterCircle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeClass::Square => "square",
            ShapeClass::Rectangle => "rectangle",
            ShapeClass::RightTriangle => "right_triangle",
            ShapeClass::EquilateralTriangle => "equilateral_triangle",
            ShapeClass::Semicircle => "semicircle",
            ShapeClass::QuarterCircle => "quarter_circle",
        }
    }

    /// Rotational symmetry of the ideal shape.
    pub fn symmetry(self) -> SymmetryOrder {
        let k = match self {
            ShapeClass::Square => 4,
            ShapeClass::Rectangle => 2,
            ShapeClass::EquilateralTriangle => 3,
            _ => 1,
        };
        SymmetryOrder::new(k).expect("nonzero")
    }

    pub fn is_curved(self) -> bool {
        matches!(self, ShapeClass::Semicircle | ShapeClass::QuarterCircle)
    }

    pub fn vertex_count(self, arc_segments: usize) -> usize {
        match self {
            ShapeClass::Square | ShapeClass::Rectangle => 4,
            ShapeClass::RightTriangle | ShapeClass::EquilateralTriangle => 3,
            ShapeClass::Semicircle => arc_segments + 1,
            ShapeClass::QuarterCircle => arc_segments + 2,
        }
    }

    /// Model vertices for extent `(w, h)`, centered on the area centroid,
    /// unrotated.
    ///
    /// Starting vertex per shape:
    /// - square / rectangle: the `(-w/2, -h/2)` corner;
    /// - right triangle: the right-angle corner, legs along `+x` (w) and `+y` (h);
    /// - equilateral triangle: left end of the base, apex towards `+y`;
    /// - semicircle: the `+x` end of the diameter, arc bulging towards `+y`;
    /// - quarter circle: the right-angle corner, arc from the `+x` radius to the `+y` radius.
    fn model(self, w: f64, h: f64, arc_segments: usize) -> Vec<Point2> {
        match self {
            ShapeClass::Square | ShapeClass::Rectangle => vec![
                Point2::new(-w / 2.0, -h / 2.0),
                Point2::new(w / 2.0, -h / 2.0),
                Point2::new(w / 2.0, h / 2.0),
                Point2::new(-w / 2.0, h / 2.0),
            ],
            ShapeClass::RightTriangle => vec![
                Point2::new(-w / 3.0, -h / 3.0),
                Point2::new(2.0 * w / 3.0, -h / 3.0),
                Point2::new(-w / 3.0, 2.0 * h / 3.0),
            ],
            ShapeClass::EquilateralTriangle => vec![
                Point2::new(-w / 2.0, -h / 3.0),
                Point2::new(w / 2.0, -h / 3.0),
                Point2::new(0.0, 2.0 * h / 3.0),
            ],
            ShapeClass::Semicircle => {
                let n = arc_segments;
                let ring: Vec<Point2> = (0..=n)
                    .map(|i| {
                        let a = std::f64::consts::PI * i as f64 / n as f64;
                        Point2::new(w / 2.0 * a.cos(), h * a.sin())
                    })
                    .collect();
                recenter(ring)
            }
            ShapeClass::QuarterCircle => {
                let n = arc_segments;
                let mut ring = Vec::with_capacity(n + 2);
                ring.push(Point2::new(0.0, 0.0));
                ring.extend((0..=n).map(|i| {
                    let a = std::f64::consts::FRAC_PI_2 * i as f64 / n as f64;
                    Point2::new(w * a.cos(), h * a.sin())
                }));
                recenter(ring)
            }
        }
    }
}

fn recenter(ring: Vec<Point2>) -> Vec<Point2> {
    let c = centroid_of(&ring);
    ring.into_iter().map(|p| p - c).collect()
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ShapeClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownShape(s.to_string()))
    }
}

/// The shape's model polygon scaled to the pose extent, rotated by the pose
/// angle about its centroid and moved to the pose center.
pub fn polygon_of(shape: ShapeClass, pose: &OrientedBox, arc_segments: usize) -> Result<Polygon> {
    if shape.is_curved() && arc_segments < 4 {
        return Err(Error::invalid(
            "arc_segments",
            format!("{arc_segments} < 4 for curved shape {shape}"),
        ));
    }
    let c = pose.center();
    let ring = shape
        .model(pose.w, pose.h, arc_segments)
        .into_iter()
        .map(|p| c + p.rotated(pose.theta))
        .collect();
    Ok(Polygon::from_ccw_unchecked(ring))
}
