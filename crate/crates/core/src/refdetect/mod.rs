//! Classical reference detector: color segmentation followed by model fitting.

mod fit;
mod segment;

pub use fit::fit_pose;
pub use segment::{segment, Region, SegmentParams};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::detection::{nms, Detection, NmsMode};
use crate::error::{Error, Result};

/// Detections may reach this far past the image edge.
const EDGE_SLACK_PX: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectParams {
    pub segment: SegmentParams,
    /// Regions whose best fit has a lower IoU are dropped.
    pub min_overlap: f64,
    pub nms_iou: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            segment: SegmentParams::default(),
            min_overlap: 0.6,
            nms_iou: 0.45,
        }
    }
}

impl DetectParams {
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        self.segment.validate(catalog)?;
        if !(0.0..=1.0).contains(&self.min_overlap) {
            return Err(Error::invalid("min_overlap", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::invalid("nms_iou", "must be in [0, 1]"));
        }
        Ok(())
    }
}

fn within(d: &Detection, w: u32, h: u32) -> bool {
    let b = d.vertices.aabb();
    b.x0 >= -EDGE_SLACK_PX
        && b.y0 >= -EDGE_SLACK_PX
        && b.x1 <= w as f64 + EDGE_SLACK_PX
        && b.y1 <= h as f64 + EDGE_SLACK_PX
}

/// Fits every region, in region order.
pub fn fit_regions(regions: &[Region], catalog: &Catalog, params: &DetectParams) -> Vec<Detection> {
    regions.iter().filter_map(|r| fit_pose(r, catalog, params)).collect()
}

/// Segments, fits and suppresses duplicates. Fits that poke out of the
/// image are discarded.
pub fn detect(img: &RgbImage, catalog: &Catalog, params: &DetectParams) -> Result<Vec<Detection>> {
    params.validate(catalog)?;
    let regions = segment(img, catalog, &params.segment)?;
    let (w, h) = img.dimensions();
    let fits = fit_regions(&regions, catalog, params)
        .into_iter()
        .filter(|d| within(d, w, h))
        .collect();
    Ok(nms(fits, params.nms_iou, NmsMode::Rotated))
}
