use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Anchor, AnchorGrid};
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::scenegen::AnnotationSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodeConfig {
    pub iou_pos: f64,
    pub iou_neg: f64,
    /// Seed of the static negative sample.
    pub negative_seed: u64,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            iou_pos: 0.5,
            iou_neg: 0.4,
            negative_seed: 0,
        }
    }
}

impl EncodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.iou_neg && self.iou_neg <= self.iou_pos && self.iou_pos <= 1.0) {
            return Err(Error::invalid("match", "need 0 < iou_neg <= iou_pos <= 1"));
        }
        Ok(())
    }
}

/// Training targets for one image, one entry per anchor in grid order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetTensor {
    /// 0 is background, otherwise the catalog class id.
    pub class_target: Vec<usize>,
    /// Set exactly on positives.
    pub orientation_target: Vec<Option<usize>>,
    pub offset_target: Vec<[f64; 4]>,
    pub positive_mask: Vec<bool>,
    /// Anchors whose best IoU with any GT is below the negative threshold.
    pub negative_candidates: Vec<bool>,
    pub sampled_negative_mask: Vec<bool>,
    /// Index of the annotation each positive anchor regresses to.
    pub matched_gt: Vec<Option<usize>>,
}

impl TargetTensor {
    pub fn len(&self) -> usize {
        self.class_target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_target.is_empty()
    }

    pub fn num_positives(&self) -> usize {
        self.positive_mask.iter().filter(|&&p| p).count()
    }
}

/// `(dx, dy, dw, dh)` of a box `(gx, gy, gw, gh)` relative to `anchor`.
pub fn offsets_of(anchor: &Anchor, gx: f64, gy: f64, gw: f64, gh: f64) -> [f64; 4] {
    [
        (gx - anchor.cx) / anchor.w,
        (gy - anchor.cy) / anchor.h,
        (gw / anchor.w).ln(),
        (gh / anchor.h).ln(),
    ]
}

/// Inverse of [`offsets_of`]: `(gx, gy, gw, gh)`.
pub fn apply_offsets(anchor: &Anchor, d: [f64; 4]) -> [f64; 4] {
    [
        anchor.cx + d[0] * anchor.w,
        anchor.cy + d[1] * anchor.h,
        anchor.w * d[2].exp(),
        anchor.h * d[3].exp(),
    ]
}

/// Assigns every anchor a class, orientation bin and box offsets.
///
/// The regressed center is the tile center from the annotation (for
/// asymmetric shapes it differs from the aabb center), the regressed size is
/// the aabb size. Anchors reaching `iou_pos` against some GT aabb are
/// positive for their best GT; on top of that each GT claims its best
/// anchor, visiting (GT, anchor) pairs by descending IoU so two GTs never
/// claim the same anchor. Static negatives are a seeded sample of the
/// candidates, as many as there are positives.
pub fn encode(
    annotations: &AnnotationSet,
    grid: &AnchorGrid,
    catalog: &Catalog,
    cfg: &EncodeConfig,
) -> Result<TargetTensor> {
    cfg.validate()?;
    let n = grid.len();
    let mut gts = Vec::with_capacity(annotations.tiles.len());
    for (i, t) in annotations.tiles.iter().enumerate() {
        if t.aabb.area().is_nan() || t.aabb.area() <= 0.0 {
            return Err(Error::invalid(format!("tiles[{i}].aabb"), "zero-area box"));
        }
        gts.push((catalog.class_id(&t.spec_id)?, t));
    }

    // best GT per anchor and the sparse list of overlapping pairs
    let mut best: Vec<(f64, Option<usize>)> = vec![(0.0, None); n];
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (g, (_, t)) in gts.iter().enumerate() {
        for (a, anchor) in grid.anchors.iter().enumerate() {
            let iou = anchor.aabb().iou(&t.aabb);
            if iou <= 0.0 {
                continue;
            }
            pairs.push((iou, g, a));
            if iou > best[a].0 {
                best[a] = (iou, Some(g));
            }
        }
    }

    let mut assigned: Vec<Option<usize>> = best
        .iter()
        .map(|&(iou, g)| if iou >= cfg.iou_pos { g } else { None })
        .collect();

    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut forced = vec![false; n];
    let mut served = vec![false; gts.len()];
    for &(_, g, a) in &pairs {
        if served[g] || forced[a] {
            continue;
        }
        forced[a] = true;
        served[g] = true;
        assigned[a] = Some(g);
    }
    // a GT overlapping no anchor at all takes the nearest free anchor center
    for (g, (_, t)) in gts.iter().enumerate() {
        if served[g] {
            continue;
        }
        let nearest = (0..n).filter(|&a| !forced[a]).min_by(|&a, &b| {
            let d = |i: usize| (grid.anchors[i].cx - t.cx).powi(2) + (grid.anchors[i].cy - t.cy).powi(2);
            d(a).total_cmp(&d(b))
        });
        if let Some(a) = nearest {
            forced[a] = true;
            assigned[a] = Some(g);
        }
    }

    let mut out = TargetTensor {
        class_target: vec![0; n],
        orientation_target: vec![None; n],
        offset_target: vec![[0.0; 4]; n],
        positive_mask: vec![false; n],
        negative_candidates: vec![false; n],
        sampled_negative_mask: vec![false; n],
        matched_gt: assigned.clone(),
    };
    for a in 0..n {
        match assigned[a] {
            Some(g) => {
                let (class, t) = gts[g];
                out.class_target[a] = class;
                out.orientation_target[a] = Some(t.orientation_bin);
                out.offset_target[a] = offsets_of(&grid.anchors[a], t.cx, t.cy, t.aabb.width(), t.aabb.height());
                out.positive_mask[a] = true;
            }
            None => out.negative_candidates[a] = best[a].0 < cfg.iou_neg,
        }
    }
    out.sampled_negative_mask = sample_negatives(&out, cfg.negative_seed);
    Ok(out)
}

/// Seeded uniform sample of `|positives|` negative candidates.
pub fn sample_negatives(targets: &TargetTensor, seed: u64) -> Vec<bool> {
    let candidates: Vec<usize> = (0..targets.len()).filter(|&a| targets.negative_candidates[a]).collect();
    let k = targets.num_positives().min(candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; targets.len()];
    for i in rand::seq::index::sample(&mut rng, candidates.len(), k) {
        mask[candidates[i]] = true;
    }
    mask
}

/// The `|positives|` candidates with the largest per-anchor loss; ties go to
/// the lower anchor index.
pub fn hardest_negatives(targets: &TargetTensor, per_anchor_loss: &[f64]) -> Vec<bool> {
    let mut candidates: Vec<usize> = (0..targets.len()).filter(|&a| targets.negative_candidates[a]).collect();
    candidates.sort_by(|&a, &b| per_anchor_loss[b].total_cmp(&per_anchor_loss[a]).then(a.cmp(&b)));
    let mut mask = vec![false; targets.len()];
    for &a in candidates.iter().take(targets.num_positives()) {
        mask[a] = true;
    }
    mask
}
