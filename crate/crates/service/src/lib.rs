//! HTTP front end of the tile pipeline.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/catalog` | | tile specs |
//! | GET | `/templates` | | composition templates |
//! | POST | `/scenes/render` | scene JSON | PNG |
//! | POST | `/detect` | scene JSON or PNG | `{"detections": [...]}` |
//! | POST | `/compose/check` | `{template_id, detections \| scene}` | result and feedback |
//!
//! Everything else is served from the static directory, if one is given.

mod error;

use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use image::{ImageFormat, ImageReader, Limits, RgbImage};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tilesight_core::api::{ComposeRequest, ComposeResponse};
use tilesight_core::catalog::Catalog;
use tilesight_core::compose::{check_composition, feedback, TemplateRegistry};
use tilesight_core::config::PipelineConfig;
use tilesight_core::detection::{Detection, DetectionSet};
use tilesight_core::refdetect::detect;
use tilesight_core::scenegen::{rasterize, SceneSpec};
use tower_http::services::ServeDir;

pub use error::ApiError;

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 4 * 1024 * 1024;
/// Largest image side the service renders or decodes.
pub const MAX_IMAGE_SIDE: u32 = 2048;

/// Loaded once at startup and never mutated.
#[derive(Debug)]
pub struct ServiceState {
    pub config: PipelineConfig,
    pub catalog: Catalog,
    pub registry: TemplateRegistry,
}

impl ServiceState {
    pub fn new(config: PipelineConfig) -> tilesight_core::Result<Self> {
        let catalog = config.load_catalog()?;
        config.validate(&catalog)?;
        let registry = config.load_registry(&catalog)?;
        Ok(ServiceState {
            config,
            catalog,
            registry,
        })
    }
}

type Shared = Arc<ServiceState>;

pub fn router(state: ServiceState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/catalog", get(catalog))
        .route("/templates", get(templates))
        .route("/scenes/render", post(render))
        .route("/detect", post(detect_handler))
        .route("/compose/check", post(compose_check))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(Arc::new(state));
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the listener fails or ctrl-c arrives.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// JSON with object keys in sorted order, so equal values give equal bytes.
pub(crate) fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let body = serde_json::to_value(value).and_then(|v| serde_json::to_vec(&v));
    match body {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn ok<T: Serialize>(value: &T) -> Response {
    json_response(StatusCode::OK, value)
}

fn body(raw: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    raw.map_err(|e| {
        let status = e.status();
        let msg = if status == StatusCode::PAYLOAD_TOO_LARGE {
            format!("request body exceeds {MAX_BODY_BYTES} bytes")
        } else {
            e.body_text()
        };
        ApiError::new(status, msg)
    })
}

fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(ApiError::schema)
}

fn check_scene(scene: &SceneSpec, catalog: &Catalog) -> Result<(), ApiError> {
    let [w, h] = scene.image_size;
    if w > MAX_IMAGE_SIDE || h > MAX_IMAGE_SIDE {
        return Err(ApiError::field(
            "image_size",
            format!("sides above {MAX_IMAGE_SIDE} px are not served"),
        ));
    }
    scene.validate(catalog)?;
    Ok(())
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage, ApiError> {
    let mut reader = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    let mut limits = Limits::default();
    limits.max_image_width = Some(MAX_IMAGE_SIDE);
    limits.max_image_height = Some(MAX_IMAGE_SIDE);
    reader.limits(limits);
    let img = reader
        .decode()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("unreadable PNG: {e}")))?;
    Ok(img.to_rgb8())
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn detect_scene(state: &ServiceState, scene: &SceneSpec) -> Result<Vec<Detection>, ApiError> {
    let img = rasterize(scene, &state.catalog)?;
    Ok(detect(&img, &state.catalog, &state.config.detect)?)
}

async fn catalog(State(state): State<Shared>) -> Response {
    ok(&state.catalog)
}

async fn templates(State(state): State<Shared>) -> Response {
    ok(&state.registry.iter().collect::<Vec<_>>())
}

async fn render(State(state): State<Shared>, raw: Result<Bytes, BytesRejection>) -> Result<Response, ApiError> {
    let scene: SceneSpec = parse(&body(raw)?)?;
    check_scene(&scene, &state.catalog)?;
    let png = blocking(move || {
        let img = rasterize(&scene, &state.catalog)?;
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(out.into_inner())
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

fn is_png(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.trim_start().to_ascii_lowercase().starts_with("image/png"))
}

async fn detect_handler(
    State(state): State<Shared>,
    headers: HeaderMap,
    raw: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let bytes = body(raw)?;
    let detections = if is_png(&headers) {
        blocking(move || {
            let img = decode_png(&bytes)?;
            Ok(detect(&img, &state.catalog, &state.config.detect)?)
        })
        .await?
    } else {
        let scene: SceneSpec = parse(&bytes)?;
        check_scene(&scene, &state.catalog)?;
        blocking(move || detect_scene(&state, &scene)).await?
    };
    Ok(ok(&DetectionSet { detections }))
}

async fn compose_check(State(state): State<Shared>, raw: Result<Bytes, BytesRejection>) -> Result<Response, ApiError> {
    let req: ComposeRequest = parse(&body(raw)?)?;
    // unknown template is reported before any rendering work
    state.registry.get(&req.template_id)?;
    let detections = match (req.detections, req.scene) {
        (Some(d), None) => d,
        (None, Some(scene)) => {
            check_scene(&scene, &state.catalog)?;
            let st = Arc::clone(&state);
            blocking(move || detect_scene(&st, &scene)).await?
        }
        _ => {
            return Err(ApiError::field(
                "detections",
                "exactly one of detections and scene is required",
            ))
        }
    };
    let template = state.registry.get(&req.template_id)?;
    let result = check_composition(&detections, template, &state.catalog, &state.config.compose)?;
    Ok(ok(&ComposeResponse {
        feedback: feedback(&result),
        result,
        detections,
    }))
}
