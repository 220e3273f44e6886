//! Tile catalog: the physical tile types a scene may contain.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ShapeClass, SymmetryOrder};

/// Minimum RGB distance between two distinct specs.
pub const MIN_COLOR_DISTANCE: f64 = 60.0;

/// Playmat color behind every scene.
pub const BACKGROUND: [u8; 3] = [190, 190, 180];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileSpec {
    pub id: String,
    pub shape: ShapeClass,
    pub color: [u8; 3],
    /// Model extent `(w, h)` in pixels at unit scene scale.
    pub size: [f64; 2],
    pub symmetry: SymmetryOrder,
}

impl TileSpec {
    pub fn new(id: &str, shape: ShapeClass, color: [u8; 3], w: f64, h: f64) -> Self {
        TileSpec {
            id: id.to_string(),
            shape,
            color,
            size: [w, h],
            symmetry: shape.symmetry(),
        }
    }

    pub fn width(&self) -> f64 {
        self.size[0]
    }

    pub fn height(&self) -> f64 {
        self.size[1]
    }
}

pub fn color_distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// An ordered, validated list of tile specs. Class id `i + 1` refers to
/// `specs[i]`; class id 0 is background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TileSpec>", into = "Vec<TileSpec>")]
pub struct Catalog {
    specs: Vec<TileSpec>,
}

impl TryFrom<Vec<TileSpec>> for Catalog {
    type Error = Error;
    fn try_from(specs: Vec<TileSpec>) -> Result<Self> {
        Catalog::new(specs)
    }
}

impl From<Catalog> for Vec<TileSpec> {
    fn from(c: Catalog) -> Self {
        c.specs
    }
}

impl Catalog {
    pub fn new(specs: Vec<TileSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::invalid("catalog", "no tile specs"));
        }
        for (i, s) in specs.iter().enumerate() {
            if !(s.size[0].is_finite() && s.size[0] > 0.0 && s.size[1].is_finite() && s.size[1] > 0.0) {
                return Err(Error::invalid(format!("catalog[{i}].size"), "must be positive"));
            }
            for (j, t) in specs.iter().enumerate().skip(i + 1) {
                if s.id == t.id {
                    return Err(Error::invalid(
                        format!("catalog[{j}].id"),
                        format!("duplicate id '{}'", t.id),
                    ));
                }
                let d = color_distance(s.color, t.color);
                if d < MIN_COLOR_DISTANCE {
                    return Err(Error::invalid(
                        format!("catalog[{j}].color"),
                        format!("only {d:.1} away from '{}'", s.id),
                    ));
                }
            }
        }
        Ok(Catalog { specs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn specs(&self) -> &[TileSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.id == id)
    }

    pub fn get(&self, id: &str) -> Result<&TileSpec> {
        self.index_of(id)
            .map(|i| &self.specs[i])
            .ok_or_else(|| Error::UnknownSpec(id.to_string()))
    }

    /// Detector class id (1-based) for a spec id.
    pub fn class_id(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .map(|i| i + 1)
            .ok_or_else(|| Error::UnknownSpec(id.to_string()))
    }

    pub fn spec_for_class(&self, class_id: usize) -> Option<&TileSpec> {
        class_id.checked_sub(1).and_then(|i| self.specs.get(i))
    }

    /// First spec with the given shape.
    pub fn first_of_shape(&self, shape: ShapeClass) -> Option<&TileSpec> {
        self.specs.iter().find(|s| s.shape == shape)
    }

    /// Smallest pairwise color distance between specs.
    pub fn min_color_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.specs.iter().enumerate() {
            for b in &self.specs[i + 1..] {
                best = best.min(color_distance(a.color, b.color));
            }
        }
        best
    }
}

impl Default for Catalog {
    /// Six tile types sized so 6–10 of them pack a 480×480 playmat. Colors
    /// keep every channel ≤ 195 so a 1.3 brightness gain does not clip.
    fn default() -> Self {
        let eq_h = 60.0 * 3f64.sqrt() / 2.0;
        Catalog::new(vec![
            TileSpec::new("red_triangle", ShapeClass::RightTriangle, [195, 45, 45], 60.0, 60.0),
            TileSpec::new("green_quarter", ShapeClass::QuarterCircle, [30, 140, 90], 60.0, 60.0),
            TileSpec::new("green_rectangle", ShapeClass::Rectangle, [130, 195, 80], 60.0, 30.0),
            TileSpec::new("blue_square", ShapeClass::Square, [45, 90, 195], 50.0, 50.0),
            TileSpec::new("yellow_semicircle", ShapeClass::Semicircle, [195, 170, 30], 80.0, 40.0),
            TileSpec::new(
                "purple_triangle",
                ShapeClass::EquilateralTriangle,
                [150, 60, 180],
                60.0,
                eq_h,
            ),
        ])
        .expect("default catalog is valid")
    }
}
