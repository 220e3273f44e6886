#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilesight_core::encoding::{PredictionTensor, TargetTensor};
use tilesight_core::geometry::{Point2, Polygon};

/// Random targets over `anchors` anchors with a few positives and as many
/// sampled negatives.
pub fn random_targets(rng: &mut ChaCha8Rng, anchors: usize, classes: usize, bins: usize) -> TargetTensor {
    let mut t = TargetTensor {
        class_target: vec![0; anchors],
        orientation_target: vec![None; anchors],
        offset_target: vec![[0.0; 4]; anchors],
        positive_mask: vec![false; anchors],
        negative_candidates: vec![false; anchors],
        sampled_negative_mask: vec![false; anchors],
        matched_gt: vec![None; anchors],
    };
    for a in 0..anchors {
        match rng.random_range(0..4) {
            0 => {
                t.positive_mask[a] = true;
                t.class_target[a] = rng.random_range(1..classes);
                t.orientation_target[a] = Some(rng.random_range(0..bins));
                t.offset_target[a] = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
                t.matched_gt[a] = Some(0);
            }
            1 => {
                t.negative_candidates[a] = true;
                t.sampled_negative_mask[a] = true;
            }
            2 => t.negative_candidates[a] = true,
            _ => {}
        }
    }
    t
}

pub fn random_tensor(rng: &mut ChaCha8Rng, anchors: usize, classes: usize, bins: usize) -> PredictionTensor {
    let n = anchors * (classes + bins + 4);
    let data = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    PredictionTensor::from_data(anchors, classes, bins, data).unwrap()
}

/// Point-in-convex-polygon test for Monte Carlo oracles.
pub fn inside(p: &Polygon, q: Point2) -> bool {
    let v = p.vertices();
    (0..v.len()).all(|i| (v[(i + 1) % v.len()] - v[i]).cross(q - v[i]) >= 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
