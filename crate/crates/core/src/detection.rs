//! Detector output shared by the decoder, the reference detector, evaluation
//! and composition checks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::rotated_iou;
use crate::geometry::{Aabb, Polygon, ShapeClass};
use crate::scenegen::TileAnnotation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub shape: ShapeClass,
    pub spec_id: String,
    pub score: f64,
    pub cx: f64,
    pub cy: f64,
    pub theta_deg: f64,
    pub orientation_bin: usize,
    pub vertices: Polygon,
}

impl From<&TileAnnotation> for Detection {
    /// A perfect detection of an annotated tile.
    fn from(t: &TileAnnotation) -> Self {
        Detection {
            shape: t.shape,
            spec_id: t.spec_id.clone(),
            score: 1.0,
            cx: t.cx,
            cy: t.cy,
            theta_deg: t.theta_deg,
            orientation_bin: t.orientation_bin,
            vertices: t.vertices.clone(),
        }
    }
}

/// Wire form: `{"detections": [...]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| Error::json(path, e))?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmsMode {
    /// IoU of the mapped tile polygons.
    #[default]
    Rotated,
    /// IoU of the polygons' axis-aligned boxes.
    AxisAligned,
}

fn overlap(a: &Polygon, b: &Polygon, mode: NmsMode) -> f64 {
    match mode {
        NmsMode::Rotated => rotated_iou(a, b).unwrap_or(0.0),
        NmsMode::AxisAligned => Aabb::iou(&a.aabb(), &b.aabb()),
    }
}

/// Greedy per-class non-maximum suppression. Candidates are visited by
/// descending score (input order breaks ties); a candidate is dropped when
/// its IoU with an already kept detection of the same spec exceeds
/// `iou_thresh`. Output is in visiting order.
pub fn nms(mut candidates: Vec<Detection>, iou_thresh: f64, mode: NmsMode) -> Vec<Detection> {
    // stable sort keeps input order among equal scores
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<Detection> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let suppressed = kept
            .iter()
            .any(|k| k.spec_id == cand.spec_id && overlap(&k.vertices, &cand.vertices, mode) > iou_thresh);
        if !suppressed {
            kept.push(cand);
        }
    }
    kept
}
