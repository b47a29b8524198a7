//! Chat-completion backends: an OpenAI-compatible HTTP client and two
//! deterministic mocks.

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures::future::BoxFuture;
use futures::FutureExt;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::geometry::{containment_violation, footprint, overlap_area, FootprintMode, OrientedRect2D};
use crate::prompt::{format_completion, BoundInput, EditKind, PromptBundle};
use crate::scene::{slug, tokens, BoxSize, Layout, PlacedObject, Placement, Point3, TaskSpec};

pub const ENV_URL: &str = "LAYOUTFORGE_LLM_URL";
pub const ENV_API_KEY: &str = "LAYOUTFORGE_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("script exhausted for prompt {fingerprint}")]
    ScriptExhausted { fingerprint: String },
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected backend response: {0}")]
    Protocol(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub model_name: String,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_tokens: 2048,
            seed: None,
            model_name: "default".to_string(),
        }
    }
}

impl GenerationParams {
    pub fn check(&self) -> Result<(), GatewayError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(GatewayError::Config(format!("temperature {} must be finite and >= 0", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    MockScripted,
    MockTemplate,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "http_chat" | "http" => Ok(Self::HttpChat),
            "mock_scripted" | "scripted" => Ok(Self::MockScripted),
            "mock_template" | "template" => Ok(Self::MockTemplate),
            _ => Err(format!("unknown backend `{s}` (http_chat, mock_scripted, mock_template)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credentials: Option<String>,
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// JSONL script for `mock_scripted`.
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
}

impl BackendConfig {
    pub fn template() -> Self {
        Self {
            kind: BackendKind::MockTemplate,
            endpoint: None,
            credentials: None,
            max_in_flight: 8,
            retry: RetryPolicy::default(),
            script: None,
            timeout_ms: None,
        }
    }

    /// HTTP backend configured from `LAYOUTFORGE_LLM_URL`.
    pub fn http_from_env() -> Result<Self, GatewayError> {
        let endpoint = std::env::var(ENV_URL).map_err(|_| GatewayError::Config(format!("{ENV_URL} is not set")))?;
        Ok(Self {
            kind: BackendKind::HttpChat,
            endpoint: Some(endpoint),
            credentials: Some(ENV_API_KEY.to_string()),
            ..Self::template()
        })
    }

    pub fn check(&self) -> Result<(), GatewayError> {
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be positive".into()));
        }
        if self.retry.attempts == 0 {
            return Err(GatewayError::Config("retry.attempts must be positive".into()));
        }
        match (self.kind, &self.endpoint) {
            (BackendKind::HttpChat, None) => Err(GatewayError::Config("http_chat needs an endpoint".into())),
            (BackendKind::HttpChat, Some(_)) => Ok(()),
            (_, Some(_)) => Err(GatewayError::Config("endpoint is only valid for http_chat".into())),
            (BackendKind::MockScripted, None) if self.script.is_none() => {
                Err(GatewayError::Config("mock_scripted needs a script file".into()))
            }
            _ => Ok(()),
        }
    }
}

/// One scripted response, optionally bound to a prompt fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    pub response: String,
}

#[derive(Debug, Default)]
struct ScriptQueues {
    keyed: HashMap<String, VecDeque<String>>,
    shared: VecDeque<String>,
}

#[derive(Debug)]
pub struct Script {
    queues: Mutex<ScriptQueues>,
}

impl Script {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let mut q = ScriptQueues::default();
        for e in entries {
            match e.fingerprint {
                Some(f) => q.keyed.entry(f).or_default().push_back(e.response),
                None => q.shared.push_back(e.response),
            }
        }
        Self { queues: Mutex::new(q) }
    }

    /// Unkeyed responses served in order.
    pub fn from_responses<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::new(
            responses
                .into_iter()
                .map(|r| ScriptEntry {
                    fingerprint: None,
                    response: r.into(),
                })
                .collect(),
        )
    }

    pub fn load(path: &std::path::Path) -> Result<Self, GatewayError> {
        let entries = crate::jsonl::read_path(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(entries))
    }

    /// Next response for `fingerprint`: its own queue first, then the shared one.
    fn next(&self, fingerprint: &str) -> Option<String> {
        let mut q = self.queues.lock().expect("script lock poisoned");
        if let Some(r) = q.keyed.get_mut(fingerprint).and_then(VecDeque::pop_front) {
            return Some(r);
        }
        q.shared.pop_front()
    }

    pub fn remaining(&self) -> usize {
        let q = self.queues.lock().expect("script lock poisoned");
        q.shared.len() + q.keyed.values().map(VecDeque::len).sum::<usize>()
    }
}

struct HttpBackend {
    client: reqwest::Client,
    url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

enum Backend {
    Http(HttpBackend),
    Scripted { script: Script, latency: Duration },
    Template,
}

struct Inner {
    backend: Backend,
    permits: Arc<Semaphore>,
    max_in_flight: usize,
    in_flight: AtomicUsize,
    max_observed: AtomicUsize,
}

/// Shared handle to a completion backend. Cloning is cheap.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.inner.backend {
            Backend::Http(_) => "http_chat",
            Backend::Scripted { .. } => "mock_scripted",
            Backend::Template => "mock_template",
        };
        f.debug_struct("Gateway")
            .field("backend", &kind)
            .field("max_in_flight", &self.inner.max_in_flight)
            .finish()
    }
}

fn chat_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim_end_matches('/');
    if trimmed.ends_with("/chat/completions") {
        trimmed.to_string()
    } else {
        format!("{trimmed}/chat/completions")
    }
}

impl Gateway {
    fn with_backend(backend: Backend, max_in_flight: usize) -> Self {
        let max_in_flight = max_in_flight.max(1);
        Self {
            inner: Arc::new(Inner {
                backend,
                permits: Arc::new(Semaphore::new(max_in_flight)),
                max_in_flight,
                in_flight: AtomicUsize::new(0),
                max_observed: AtomicUsize::new(0),
            }),
        }
    }

    pub fn from_config(config: &BackendConfig) -> Result<Self, GatewayError> {
        config.check()?;
        match config.kind {
            BackendKind::HttpChat => {
                let api_key = config
                    .credentials
                    .as_deref()
                    .and_then(|var| std::env::var(var).ok())
                    .filter(|k| !k.is_empty());
                Self::http(
                    config.endpoint.as_deref().unwrap_or_default(),
                    api_key,
                    config.retry,
                    config.max_in_flight,
                    config.timeout_ms.map(Duration::from_millis),
                )
            }
            BackendKind::MockScripted => {
                let path = config.script.as_ref().expect("checked above");
                Ok(Self::scripted(Script::load(path)?, config.max_in_flight))
            }
            BackendKind::MockTemplate => Ok(Self::template(config.max_in_flight)),
        }
    }

    pub fn http(
        endpoint: &str,
        api_key: Option<String>,
        retry: RetryPolicy,
        max_in_flight: usize,
        timeout: Option<Duration>,
    ) -> Result<Self, GatewayError> {
        let client = reqwest::Client::builder()
            .timeout(timeout.unwrap_or(Duration::from_secs(120)))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self::with_backend(
            Backend::Http(HttpBackend {
                client,
                url: chat_url(endpoint),
                api_key,
                retry,
            }),
            max_in_flight,
        ))
    }

    pub fn scripted(script: Script, max_in_flight: usize) -> Self {
        Self::scripted_with_latency(script, max_in_flight, Duration::ZERO)
    }

    /// Scripted backend that sleeps `latency` per call, for concurrency tests.
    pub fn scripted_with_latency(script: Script, max_in_flight: usize, latency: Duration) -> Self {
        Self::with_backend(Backend::Scripted { script, latency }, max_in_flight)
    }

    pub fn template(max_in_flight: usize) -> Self {
        Self::with_backend(Backend::Template, max_in_flight)
    }

    pub fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight
    }

    /// Highest number of simultaneously outstanding requests seen so far.
    pub fn max_observed_in_flight(&self) -> usize {
        self.inner.max_observed.load(Ordering::SeqCst)
    }

    pub fn in_flight(&self) -> usize {
        self.inner.in_flight.load(Ordering::SeqCst)
    }

    pub fn script_remaining(&self) -> Option<usize> {
        match &self.inner.backend {
            Backend::Scripted { script, .. } => Some(script.remaining()),
            _ => None,
        }
    }

    /// Starts a request. Script consumption happens here, synchronously, so
    /// responses are handed out in call order.
    fn dispatch(&self, bundle: &PromptBundle, params: &GenerationParams) -> BoxFuture<'static, Result<String, GatewayError>> {
        let inner = Arc::clone(&self.inner);
        let fut: BoxFuture<'static, Result<String, GatewayError>> = match &self.inner.backend {
            Backend::Scripted { script, latency } => {
                let fingerprint = bundle.fingerprint();
                let result = script.next(&fingerprint).ok_or(GatewayError::ScriptExhausted { fingerprint });
                let latency = *latency;
                async move {
                    if !latency.is_zero() {
                        tokio::time::sleep(latency).await;
                    }
                    result
                }
                .boxed()
            }
            Backend::Template => {
                let result = Ok(mock_template(bundle));
                async move { result }.boxed()
            }
            Backend::Http(_) => {
                let bundle = bundle.clone();
                let params = params.clone();
                let inner = Arc::clone(&self.inner);
                async move {
                    let Backend::Http(http) = &inner.backend else { unreachable!() };
                    http_complete(http, &bundle, &params).await
                }
                .boxed()
            }
        };
        async move {
            let now = inner.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            inner.max_observed.fetch_max(now, Ordering::SeqCst);
            let out = fut.await;
            inner.in_flight.fetch_sub(1, Ordering::SeqCst);
            out
        }
        .boxed()
    }

    pub async fn complete(&self, bundle: &PromptBundle, params: &GenerationParams) -> Result<String, GatewayError> {
        params.check()?;
        let _permit = Arc::clone(&self.inner.permits)
            .acquire_owned()
            .await
            .expect("semaphore never closed");
        self.dispatch(bundle, params).await
    }

    /// Completes every bundle with at most `max_in_flight` outstanding.
    /// Output order matches input order; failures stay per item.
    pub async fn complete_batch(
        &self,
        bundles: &[PromptBundle],
        params: &GenerationParams,
    ) -> Vec<Result<String, GatewayError>> {
        if let Err(e) = params.check() {
            return bundles.iter().map(|_| Err(e.clone())).collect();
        }
        let mut handles = Vec::with_capacity(bundles.len());
        for bundle in bundles {
            let permit = Arc::clone(&self.inner.permits)
                .acquire_owned()
                .await
                .expect("semaphore never closed");
            let fut = self.dispatch(bundle, params);
            handles.push(tokio::spawn(async move {
                let out = fut.await;
                drop(permit);
                out
            }));
        }
        let mut out = Vec::with_capacity(handles.len());
        for h in handles {
            out.push(h.await.unwrap_or_else(|e| Err(GatewayError::Protocol(format!("request task failed: {e}")))));
        }
        out
    }
}

async fn http_complete(http: &HttpBackend, bundle: &PromptBundle, params: &GenerationParams) -> Result<String, GatewayError> {
    let mut body = json!({
        "model": params.model_name,
        "messages": [
            { "role": "system", "content": bundle.system_text },
            { "role": "user", "content": bundle.user_text },
        ],
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
    });
    if let Some(seed) = params.seed {
        body["seed"] = json!(seed);
    }
    let attempts = http.retry.attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = http.retry.backoff_ms.saturating_mul(1u64 << (attempt - 1).min(20));
            tokio::time::sleep(Duration::from_millis(delay)).await;
        }
        let mut req = http.client.post(&http.url).json(&body);
        if let Some(key) = &http.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(attempt = attempt + 1, error = %e, "chat request failed");
                last = e.to_string();
                continue;
            }
        };
        let status = resp.status().as_u16();
        let text = resp.text().await.unwrap_or_default();
        match status {
            200..=299 => return extract_content(&text),
            401 | 403 => return Err(GatewayError::Auth(format!("HTTP {status}: {}", truncate(&text)))),
            429 | 500..=599 => {
                tracing::warn!(attempt = attempt + 1, status, "retryable chat response");
                last = format!("HTTP {status}: {}", truncate(&text));
            }
            _ => {
                return Err(GatewayError::Status {
                    status,
                    body: truncate(&text),
                })
            }
        }
    }
    Err(GatewayError::Transport { attempts, message: last })
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

fn extract_content(text: &str) -> Result<String, GatewayError> {
    let v: Value = serde_json::from_str(text).map_err(|e| GatewayError::Protocol(format!("response is not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GatewayError::Protocol("missing choices[0].message.content".into()))
}

const SCAN_STEP: f64 = 0.1;
const DEFAULT_ADDED_SIZE: (f64, f64, f64) = (0.5, 0.5, 0.75);
const PREPOSITIONS: &[&str] = &[
    "near", "beside", "next", "by", "on", "in", "at", "to", "against", "under", "between", "close", "along", "behind",
    "opposite", "facing", "inside", "into", "onto", "with",
];
const FILLERS: &[&str] = &["a", "an", "the", "one", "another", "some", "new", "please", "add", "place", "put"];

/// Deterministic completion for a bundle, in the tagged response format.
pub fn mock_template(bundle: &PromptBundle) -> String {
    match &bundle.bound {
        BoundInput::Task { task } => {
            let layout = grid_layout(task);
            format_completion(
                "Objects are placed in row-major cells across the floor, each fully inside the room.",
                &layout,
            )
        }
        BoundInput::Edit { layout, instruction, edit } => {
            let (revised, note) = match edit {
                EditKind::Remove => remove_matching(layout, instruction),
                EditKind::Add => add_from_phrase(layout, instruction),
            };
            format_completion(&note, &revised)
        }
        BoundInput::Judge { .. } => json!({
            "functionality_score": 5,
            "layout_score": 5,
            "aesthetics_score": 5,
            "overall_score": 5,
            "comments": "Template backend: neutral score, no assessment performed.",
        })
        .to_string(),
        BoundInput::Summary { layout } => {
            let names: Vec<&str> = layout.objects.iter().map(|o| o.description.as_str()).collect();
            format!(
                "A {} containing {} objects: {}.",
                layout.room_type.display_name().to_lowercase(),
                names.len(),
                names.join(", ")
            )
        }
    }
}

/// First row-major position (top row first, left to right) where the object
/// fits inside the floor. Free positions are preferred over overlapping ones.
fn place_scan(layout_floor: &crate::scene::FloorPlan, placed: &[OrientedRect2D], size: &BoxSize) -> Placement {
    let (lo, hi) = layout_floor.polygon().bounds().expect("floor has vertices");
    let mut fallback: Option<Placement> = None;
    for rotation in [0.0, std::f64::consts::FRAC_PI_2] {
        let probe = footprint(&Placement::new(Point3::new(0.0, 0.0, 0.0), rotation), size, FootprintMode::Oriented);
        let (hw, hd) = probe.aabb_half_extents();
        let mut y = hi.y - hd;
        while y >= lo.y + hd - 1e-9 {
            let mut x = lo.x + hw;
            while x <= hi.x - hw + 1e-9 {
                let p = Placement::new(Point3::new(x, y, 0.0), rotation);
                let rect = footprint(&p, size, FootprintMode::Oriented);
                if containment_violation(&rect, layout_floor) <= 1e-9 {
                    if placed.iter().all(|r| overlap_area(r, &rect) == 0.0) {
                        return p;
                    }
                    fallback.get_or_insert(p);
                }
                x += SCAN_STEP;
            }
            y -= SCAN_STEP;
        }
    }
    fallback.unwrap_or_else(|| {
        let c = crate::geometry::polygon_centroid(&layout_floor.polygon())
            .unwrap_or_else(|_| crate::geometry::Point2::new(0.0, 0.0));
        Placement::new(Point3::new(c.x, c.y, 0.0), 0.0)
    })
}

fn grid_layout(task: &TaskSpec) -> Layout {
    let mut rects = Vec::new();
    let mut objects = Vec::new();
    for (id, spec) in task.instance_ids() {
        let size = spec.size.unwrap_or_else(|| {
            let (w, d, h) = DEFAULT_ADDED_SIZE;
            BoxSize::new(w, d, h).expect("positive")
        });
        let placement = place_scan(&task.floor, &rects, &size);
        rects.push(footprint(&placement, &size, FootprintMode::Oriented));
        let mut obj = PlacedObject::new(id, spec.description.clone(), size, placement);
        obj.asset_id = spec.asset_id.clone();
        objects.push(obj);
    }
    Layout::new(task.room_type, task.floor.clone(), objects).expect("generated ids are unique")
}

fn remove_matching(layout: &Layout, instruction: &str) -> (Layout, String) {
    let want = tokens(instruction);
    let best = layout
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let have = tokens(&o.description);
            let hits = have.iter().filter(|t| want.contains(t)).count();
            (hits, std::cmp::Reverse(i))
        })
        .filter(|(hits, _)| *hits > 0)
        .max();
    let mut revised = layout.clone();
    let note = match best {
        Some((_, std::cmp::Reverse(i))) => {
            let removed = revised.objects.remove(i);
            format!("Removed {} ({}).", removed.instance_id, removed.description)
        }
        None => "No object matches the instruction; the layout is unchanged.".to_string(),
    };
    (revised, note)
}

/// Noun phrase of an addition: the words after the verb, up to the first preposition.
pub fn added_object_phrase(instruction: &str) -> String {
    let words: Vec<String> = instruction
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric() && c != '-').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect();
    let mut phrase = Vec::new();
    for w in words.iter().skip_while(|w| !matches!(w.as_str(), "add" | "place" | "put")).skip(1) {
        if PREPOSITIONS.contains(&w.as_str()) {
            break;
        }
        if phrase.is_empty() && FILLERS.contains(&w.as_str()) {
            continue;
        }
        phrase.push(w.as_str());
    }
    if phrase.is_empty() {
        "object".to_string()
    } else {
        phrase.join(" ")
    }
}

fn add_from_phrase(layout: &Layout, instruction: &str) -> (Layout, String) {
    let description = added_object_phrase(instruction);
    let base = slug(&description);
    let mut k = 1;
    let id = loop {
        let id = format!("{base}_{k}");
        if layout.object(&id).is_none() {
            break id;
        }
        k += 1;
    };
    let (w, d, h) = DEFAULT_ADDED_SIZE;
    let size = BoxSize::new(w, d, h).expect("positive");
    let rects: Vec<_> = layout
        .objects
        .iter()
        .map(|o| footprint(&o.placement, &o.size, FootprintMode::Oriented))
        .collect();
    let placement = place_scan(&layout.floor, &rects, &size);
    let mut revised = layout.clone();
    revised.objects.push(PlacedObject::new(id.clone(), description.clone(), size, placement));
    (revised, format!("Added {id} ({description}) at the first free spot."))
}
