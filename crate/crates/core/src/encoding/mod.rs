//! Anchor grid, training targets, losses and decoding for the detector heads.

mod anchors;
mod decode;
mod loss;
mod targets;
mod tensor;

pub use anchors::{build_anchors, default_levels, Anchor, AnchorGrid, AnchorLevel, ANCHOR_SCALE};
pub use decode::{decode, decode_candidates, perfect_predictions, DecodeConfig};
pub use loss::{
    background_loss, classification_loss, detection_loss, focal_loss, orientation_loss, regression_loss, softmax,
    softmax_focal, DetectionLoss, LossConfig, LossOutput, NegativeSampling,
};
pub use targets::{apply_offsets, encode, hardest_negatives, offsets_of, sample_negatives, EncodeConfig, TargetTensor};
pub use tensor::{
    blob_path, load_predictions, write_predictions, write_predictions_split, PredictionTensor, DTYPE, LAYOUT,
};
