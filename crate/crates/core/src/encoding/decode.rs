use serde::{Deserialize, Serialize};

use super::loss::softmax;
use super::{apply_offsets, AnchorGrid, PredictionTensor, TargetTensor};
use crate::catalog::Catalog;
use crate::detection::{nms, Detection, NmsMode};
use crate::error::{Error, Result};
use crate::geometry::{bin_of, canonical_theta, polygon_of, theta_of, OrientationBins, OrientedBox, ARC_SEGMENTS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    pub score_thresh: f64,
    pub nms_iou: f64,
    pub max_out: usize,
    pub nms_mode: NmsMode,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            score_thresh: 0.5,
            nms_iou: 0.45,
            max_out: 64,
            nms_mode: NmsMode::Rotated,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.score_thresh) {
            return Err(Error::invalid("decode.score_thresh", "must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::invalid("decode.nms_iou", "must be in [0, 1]"));
        }
        Ok(())
    }
}

fn argmax(v: &[f64]) -> usize {
    // first maximum wins
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Scored detections for every anchor whose most likely class is a tile
/// class with probability at or above the threshold, in anchor order.
///
/// Tile extents are recovered from the regressed axis box: the catalog model
/// rotated to the decoded angle is scaled so its axis box matches.
pub fn decode_candidates(
    pred: &PredictionTensor,
    grid: &AnchorGrid,
    catalog: &Catalog,
    cfg: &DecodeConfig,
) -> Result<Vec<Detection>> {
    cfg.validate()?;
    pred.check_shape(grid, catalog.len() + 1, pred.bins())?;
    let bins = OrientationBins::new(pred.bins())?;
    let mut out = Vec::new();
    for (a, anchor) in grid.anchors.iter().enumerate() {
        let probs = softmax(pred.class_logits(a));
        let class = argmax(&probs);
        let score = probs[class];
        if class == 0 || score < cfg.score_thresh || score <= 0.0 {
            continue;
        }
        let spec = catalog.spec_for_class(class).expect("checked class count");
        let bin = argmax(pred.orientation_logits(a));
        let theta = canonical_theta(theta_of(bin, &bins), spec.symmetry);
        let [gx, gy, gw, gh] = apply_offsets(anchor, pred.offsets(a));
        let model = polygon_of(
            spec.shape,
            &OrientedBox::new(0.0, 0.0, spec.width(), spec.height(), theta)?,
            ARC_SEGMENTS,
        )?;
        let bb = model.aabb();
        let s = 0.5 * (gw / bb.width() + gh / bb.height());
        let Ok(pose) = OrientedBox::new(gx, gy, s * spec.width(), s * spec.height(), theta) else {
            continue;
        };
        out.push(Detection {
            shape: spec.shape,
            spec_id: spec.id.clone(),
            score,
            cx: gx,
            cy: gy,
            theta_deg: theta,
            orientation_bin: bin_of(theta, &bins),
            vertices: polygon_of(spec.shape, &pose, ARC_SEGMENTS)?,
        });
    }
    Ok(out)
}

/// Candidates, then per-class NMS, then the `max_out` best by score (anchor
/// order breaks ties).
pub fn decode(
    pred: &PredictionTensor,
    grid: &AnchorGrid,
    catalog: &Catalog,
    cfg: &DecodeConfig,
) -> Result<Vec<Detection>> {
    let mut kept = nms(decode_candidates(pred, grid, catalog, cfg)?, cfg.nms_iou, cfg.nms_mode);
    kept.truncate(cfg.max_out);
    Ok(kept)
}

/// A tensor that a perfect detector would emit for `targets`: one-hot
/// class and orientation logits of magnitude `confidence` and exact offsets.
pub fn perfect_predictions(targets: &TargetTensor, classes: usize, bins: usize, confidence: f64) -> PredictionTensor {
    let mut t = PredictionTensor::zeros(targets.len(), classes, bins);
    for a in 0..targets.len() {
        let positive = targets.positive_mask[a];
        let r = t.record_mut(a);
        let class = if positive { targets.class_target[a] } else { 0 };
        for (j, v) in r[..classes].iter_mut().enumerate() {
            *v = if j == class { confidence } else { -confidence };
        }
        if let Some(b) = targets.orientation_target[a] {
            r[classes + b] = confidence;
        }
        if positive {
            r[classes + bins..].copy_from_slice(&targets.offset_target[a]);
        }
    }
    t
}
