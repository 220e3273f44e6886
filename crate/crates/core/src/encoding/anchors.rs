use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Aabb;

/// Anchor side as a multiple of the level stride.
pub const ANCHOR_SCALE: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorLevel {
    pub stride: u32,
    pub side: f64,
}

impl AnchorLevel {
    pub fn with_stride(stride: u32) -> Self {
        AnchorLevel {
            stride,
            side: ANCHOR_SCALE * stride as f64,
        }
    }
}

/// Levels for 480×480 inputs.
pub fn default_levels() -> Vec<AnchorLevel> {
    [16, 32, 64].map(AnchorLevel::with_stride).to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Anchor {
    pub fn aabb(&self) -> Aabb {
        Aabb::from_center(self.cx, self.cy, self.w, self.h)
    }
}

/// Anchors are stored level by level; within a level, row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorGrid {
    pub image_size: [u32; 2],
    pub levels: Vec<AnchorLevel>,
    pub anchors: Vec<Anchor>,
}

impl AnchorGrid {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

pub fn build_anchors(image_size: [u32; 2], levels: &[AnchorLevel]) -> Result<AnchorGrid> {
    if levels.is_empty() {
        return Err(Error::invalid("levels", "at least one anchor level is required"));
    }
    let [w, h] = image_size;
    if w == 0 || h == 0 {
        return Err(Error::invalid("image_size", "must be positive"));
    }
    let mut anchors = Vec::new();
    for (i, level) in levels.iter().enumerate() {
        if level.stride == 0 {
            return Err(Error::invalid(format!("levels[{i}].stride"), "must be positive"));
        }
        if !(level.side.is_finite() && level.side > 0.0) {
            return Err(Error::invalid(format!("levels[{i}].side"), "must be positive"));
        }
        let s = level.stride as f64;
        let (cols, rows) = (w.div_ceil(level.stride), h.div_ceil(level.stride));
        for r in 0..rows {
            for c in 0..cols {
                anchors.push(Anchor {
                    cx: (c as f64 + 0.5) * s,
                    cy: (r as f64 + 0.5) * s,
                    w: level.side,
                    h: level.side,
                });
            }
        }
    }
    Ok(AnchorGrid {
        image_size,
        levels: levels.to_vec(),
        anchors,
    })
}
