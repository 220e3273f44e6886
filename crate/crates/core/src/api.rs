//! Request and response bodies of the HTTP service.

use serde::{Deserialize, Serialize};

use crate::compose::CompositionResult;
use crate::detection::Detection;
use crate::scenegen::SceneSpec;

/// `POST /compose/check`. Exactly one of `detections` and `scene` is set;
/// a scene is rendered and run through the reference detector first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeRequest {
    pub template_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<Detection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposeResponse {
    pub result: CompositionResult,
    pub feedback: Vec<String>,
    /// The detections that were checked.
    pub detections: Vec<Detection>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    /// Dotted path into the request body, e.g. `tiles[2].pose.w`.
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}
