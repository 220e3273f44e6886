//! Thin async client for the tilesight service.

use reqwest::header::CONTENT_TYPE;
use reqwest::{RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tilesight_core::api::{ComposeRequest, ComposeResponse, ErrorBody};
use tilesight_core::catalog::Catalog;
use tilesight_core::compose::CompositionTemplate;
use tilesight_core::detection::DetectionSet;
use tilesight_core::scenegen::SceneSpec;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server returned {status}: {}", .body.error)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("unexpected response body: {0}")]
    Decode(#[from] serde_json::Error),
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Http(e) => e.status(),
            ClientError::Decode(_) => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Clone, Debug)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    /// `base_url` like `http://127.0.0.1:8080`.
    pub fn new(base_url: &str) -> Self {
        Client {
            http: reqwest::Client::new(),
            base: base_url.trim_end_matches('/').to_string(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn send(req: RequestBuilder) -> Result<Vec<u8>> {
        let resp = req.send().await?;
        let status = resp.status();
        let bytes = resp.bytes().await?;
        if status.is_success() {
            return Ok(bytes.to_vec());
        }
        let body = serde_json::from_slice(&bytes).unwrap_or_else(|_| ErrorBody {
            error: String::from_utf8_lossy(&bytes).into_owned(),
            fields: Vec::new(),
        });
        Err(ClientError::Api { status, body })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let bytes = Self::send(self.http.get(self.url(path))).await?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    async fn post_json<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let bytes = Self::send(self.http.post(self.url(path)).json(body)).await?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub async fn catalog(&self) -> Result<Catalog> {
        self.get("/catalog").await
    }

    pub async fn templates(&self) -> Result<Vec<CompositionTemplate>> {
        self.get("/templates").await
    }

    /// PNG bytes of the rendered scene.
    pub async fn render(&self, scene: &SceneSpec) -> Result<Vec<u8>> {
        Self::send(self.http.post(self.url("/scenes/render")).json(scene)).await
    }

    pub async fn detect_scene(&self, scene: &SceneSpec) -> Result<DetectionSet> {
        self.post_json("/detect", scene).await
    }

    pub async fn detect_png(&self, png: Vec<u8>) -> Result<DetectionSet> {
        let req = self
            .http
            .post(self.url("/detect"))
            .header(CONTENT_TYPE, "image/png")
            .body(png);
        Ok(serde_json::from_slice(&Self::send(req).await?)?)
    }

    pub async fn compose_check(&self, req: &ComposeRequest) -> Result<ComposeResponse> {
        self.post_json("/compose/check", req).await
    }
}
