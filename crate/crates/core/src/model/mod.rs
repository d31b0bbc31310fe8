//! Language model backends.
//!
//! A [`ModelBackend`] turns one [`PromptBundle`] into raw text. The
//! [`ModelClient`] wrapped around it enforces the vision capability gate,
//! retries transport failures with exponential backoff and keeps a log of
//! every exchange.

mod http;
mod replay;
mod scripted;

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::{PromptBundle, PromptFlavor};

pub use http::HttpChatBackend;
pub use replay::{RecordReplayBackend, ReplayMode, StoredExchange};
pub use scripted::{Matcher, ScriptEntry, ScriptFile, ScriptedBackend};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend {0} does not accept images")]
    VisionUnsupported(String),
    #[error("model request timed out: {0}")]
    Timeout(String),
    #[error("no recorded exchange for prompt {0}")]
    ReplayMiss(String),
    /// Retryable failure reaching the backend.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

impl ModelError {
    fn retryable(&self) -> bool {
        matches!(self, ModelError::Transport(_) | ModelError::Timeout(_))
    }
}

pub trait ModelBackend: Send + Sync {
    fn name(&self) -> &str;
    fn supports_vision(&self) -> bool;
    fn complete(&self, bundle: &PromptBundle) -> Result<String, ModelError>;
}

/// Connection settings for an HTTP backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBackendConfig {
    pub endpoint: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    pub supports_vision: bool,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub temperature: f64,
}

impl Default for ModelBackendConfig {
    fn default() -> Self {
        ModelBackendConfig {
            endpoint: String::new(),
            model_name: String::new(),
            api_key_env: None,
            supports_vision: true,
            timeout_secs: 120.0,
            max_retries: 3,
            temperature: 0.2,
        }
    }
}

impl ModelBackendConfig {
    pub fn api_key(&self) -> Option<String> {
        self.api_key_env
            .as_deref()
            .and_then(|v| std::env::var(v).ok())
            .filter(|k| !k.is_empty())
    }
}

/// One logged query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExchange {
    pub exchange_index: usize,
    pub step_index: usize,
    pub flavor: PromptFlavor,
    pub prompt: String,
    #[serde(default)]
    pub image_digest: Option<String>,
    pub raw_response: String,
    #[serde(default)]
    pub error: Option<String>,
    pub latency_secs: f64,
    pub backend: String,
}

pub fn image_digest(png: &[u8]) -> String {
    hex::encode(Sha256::digest(png))
}

/// Retrying, logging front end over a backend.
pub struct ModelClient {
    backend: Arc<dyn ModelBackend>,
    max_retries: u32,
    backoff: Duration,
    log: Mutex<Vec<ModelExchange>>,
}

impl ModelClient {
    pub fn new(backend: Arc<dyn ModelBackend>) -> Self {
        ModelClient {
            backend,
            max_retries: 3,
            backoff: Duration::from_millis(250),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    pub fn backend(&self) -> &Arc<dyn ModelBackend> {
        &self.backend
    }

    pub fn supports_vision(&self) -> bool {
        self.backend.supports_vision()
    }

    /// Sends the prompt and logs the exchange, failed or not.
    pub fn query(&self, bundle: &PromptBundle, step_index: usize) -> Result<(String, usize), ModelError> {
        let started = Instant::now();
        let result = if bundle.image.is_some() && !self.backend.supports_vision() {
            Err(ModelError::VisionUnsupported(self.backend.name().to_string()))
        } else {
            self.with_retry(bundle)
        };
        let mut log = self.log.lock().expect("exchange log poisoned");
        let exchange_index = log.len();
        log.push(ModelExchange {
            exchange_index,
            step_index,
            flavor: bundle.flavor,
            prompt: bundle.text.clone(),
            image_digest: bundle.image.as_deref().map(image_digest),
            raw_response: result.as_ref().cloned().unwrap_or_default(),
            error: result.as_ref().err().map(|e| e.to_string()),
            latency_secs: started.elapsed().as_secs_f64(),
            backend: self.backend.name().to_string(),
        });
        result.map(|r| (r, exchange_index))
    }

    fn with_retry(&self, bundle: &PromptBundle) -> Result<String, ModelError> {
        let mut attempt = 0;
        loop {
            match self.backend.complete(bundle) {
                Err(e) if e.retryable() && attempt < self.max_retries => {
                    log::warn!("model query failed ({e}), retry {}", attempt + 1);
                    thread::sleep(self.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
                Err(ModelError::Transport(m)) => return Err(ModelError::BackendUnavailable(m)),
                other => return other,
            }
        }
    }

    pub fn exchanges(&self) -> Vec<ModelExchange> {
        self.log.lock().expect("exchange log poisoned").clone()
    }

    pub fn last_exchange(&self) -> Option<ModelExchange> {
        self.log.lock().expect("exchange log poisoned").last().cloned()
    }

    pub fn exchange_count(&self) -> usize {
        self.log.lock().expect("exchange log poisoned").len()
    }
}
