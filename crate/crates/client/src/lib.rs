//! Async client for the layoutforge service.

use layoutforge_core::eval::ValidationReport;
use layoutforge_core::scene::{Layout, TaskSpec};
use layoutforge_core::session::{
    CreateSession, EditRequest, ErrorBody, HistoryEntry, LayoutResult, Session, SessionCreated, ValidateRequest,
};
use reqwest::Method;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{status} {code}: {message}")]
    Api { status: u16, code: String, message: String },
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("unexpected response ({status}): {message}")]
    Decode { status: u16, message: String },
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            Self::Api { status, .. } | Self::Decode { status, .. } => Some(*status),
            Self::Transport(e) => e.status().map(|s| s.as_u16()),
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base: base_url.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub async fn create_session(&self, task: &TaskSpec) -> Result<String> {
        let body = CreateSession { task: task.clone() };
        let created: SessionCreated = self.json(Method::POST, "/sessions", Some(&body)).await?;
        Ok(created.session_id)
    }

    pub async fn session(&self, id: &str) -> Result<Session> {
        self.json::<(), _>(Method::GET, &format!("/sessions/{id}"), None).await
    }

    pub async fn generate(&self, id: &str) -> Result<LayoutResult> {
        self.json::<(), _>(Method::POST, &format!("/sessions/{id}/generate"), None).await
    }

    pub async fn edit(&self, id: &str, instruction: &str) -> Result<LayoutResult> {
        let body = EditRequest {
            instruction: instruction.to_string(),
        };
        self.json(Method::POST, &format!("/sessions/{id}/edit"), Some(&body)).await
    }

    pub async fn layout(&self, id: &str) -> Result<Layout> {
        self.json::<(), _>(Method::GET, &format!("/sessions/{id}/layout"), None).await
    }

    pub async fn history(&self, id: &str) -> Result<Vec<HistoryEntry>> {
        self.json::<(), _>(Method::GET, &format!("/sessions/{id}/history"), None).await
    }

    pub async fn render_svg(&self, id: &str) -> Result<String> {
        let resp = self.send::<()>(Method::GET, &format!("/sessions/{id}/render.svg"), None).await?;
        Ok(resp.text().await?)
    }

    pub async fn validate(&self, layout: &Layout, task: Option<&TaskSpec>) -> Result<ValidationReport> {
        let body = ValidateRequest {
            layout: layout.clone(),
            task: task.cloned(),
        };
        self.json(Method::POST, "/validate", Some(&body)).await
    }

    async fn send<B: Serialize>(&self, method: Method, path: &str, body: Option<&B>) -> Result<reqwest::Response> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await?;
        Err(match serde_json::from_str::<ErrorBody>(&text) {
            Ok(e) => ClientError::Api {
                status: status.as_u16(),
                code: e.code,
                message: e.message,
            },
            Err(_) => ClientError::Decode {
                status: status.as_u16(),
                message: text,
            },
        })
    }

    async fn json<B: Serialize, T: DeserializeOwned>(&self, method: Method, path: &str, body: Option<&B>) -> Result<T> {
        let resp = self.send(method, path, body).await?;
        let status = resp.status();
        let bytes = resp.bytes().await?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode {
            status: status.as_u16(),
            message: e.to_string(),
        })
    }
}
