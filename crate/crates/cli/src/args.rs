use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, ValueEnum};
use layoutforge_core::eval::ValidationThresholds;
use layoutforge_core::gateway::{BackendConfig, BackendKind, Gateway, GenerationParams, RetryPolicy, ENV_API_KEY, ENV_URL};

#[derive(Args, Debug, Clone)]
pub struct BackendArgs {
    /// http_chat, mock_scripted or mock_template.
    #[arg(long, default_value = "mock_template")]
    pub backend: BackendKind,
    /// Chat-completions base URL; defaults to $LAYOUTFORGE_LLM_URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// JSONL script for mock_scripted.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    #[arg(long, default_value = "default")]
    pub model: String,
    #[arg(long, default_value_t = 0.7)]
    pub temperature: f64,
    #[arg(long, default_value_t = 2048)]
    pub max_tokens: u32,
}

impl BackendArgs {
    pub fn gateway(&self) -> anyhow::Result<Gateway> {
        let endpoint = match self.backend {
            BackendKind::HttpChat => Some(
                self.endpoint
                    .clone()
                    .or_else(|| std::env::var(ENV_URL).ok())
                    .with_context(|| format!("http_chat needs --endpoint or {ENV_URL}"))?,
            ),
            _ => None,
        };
        let config = BackendConfig {
            kind: self.backend,
            endpoint,
            credentials: Some(ENV_API_KEY.to_string()),
            max_in_flight: self.max_in_flight,
            retry: RetryPolicy {
                attempts: self.retries,
                backoff_ms: self.backoff_ms,
            },
            script: self.script.clone(),
            timeout_ms: self.timeout_ms,
        };
        Ok(Gateway::from_config(&config)?)
    }

    pub fn params(&self, seed: Option<u64>) -> GenerationParams {
        GenerationParams {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            seed,
            model_name: self.model.clone(),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ThresholdArgs {
    /// Largest tolerated pairwise overlap, in m².
    #[arg(long, default_value_t = ValidationThresholds::default().max_pair_overlap)]
    pub max_overlap: f64,
    /// Largest tolerated area outside the floor per object, in m².
    #[arg(long, default_value_t = ValidationThresholds::default().max_boundary_violation)]
    pub max_boundary: f64,
    /// Require the object counts to match the task.
    #[arg(long)]
    pub require_counts: bool,
}

impl ThresholdArgs {
    pub fn get(&self) -> anyhow::Result<ValidationThresholds> {
        let t = ValidationThresholds {
            max_pair_overlap: self.max_overlap,
            max_boundary_violation: self.max_boundary,
            require_counts_match: self.require_counts,
        };
        t.check().map_err(anyhow::Error::msg)?;
        Ok(t)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum PromptKind {
    Generate,
    Edit,
    Judge,
    Summarize,
}

#[derive(Debug, Clone, Copy)]
pub struct StartPose(pub f64, pub f64, pub f64);

impl FromStr for StartPose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [x, y, h] => Ok(Self(x, y, h)),
            _ => Err(format!("expected x,y,heading, got `{s}`")),
        }
    }
}
