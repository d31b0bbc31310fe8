use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::{ModelBackend, ModelBackendConfig, ModelError};
use crate::prompt::PromptBundle;

/// OpenAI-compatible chat-completion client. One prompt is one single-turn
/// user message; the screenshot travels as a base64 PNG data URL.
pub struct HttpChatBackend {
    agent: ureq::Agent,
    url: String,
    config: ModelBackendConfig,
    api_key: Option<String>,
}

impl HttpChatBackend {
    pub fn new(config: ModelBackendConfig) -> Result<Self, ModelError> {
        let url = chat_url(&config.endpoint)?;
        if !(config.timeout_secs > 0.0) {
            return Err(ModelError::Config("timeout must be positive".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .build()
            .into();
        let api_key = config.api_key();
        Ok(HttpChatBackend {
            agent,
            url,
            config,
            api_key,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn request_body(&self, bundle: &PromptBundle) -> Value {
        let content = match &bundle.image {
            Some(png) => {
                let data = base64::engine::general_purpose::STANDARD.encode(png);
                json!([
                    {"type": "text", "text": bundle.text},
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{data}")}},
                ])
            }
            None => json!(bundle.text),
        };
        json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.config.temperature,
            "stream": false,
        })
    }
}

/// Accepts either a full `/chat/completions` URL or a base such as
/// `http://host:8000/v1`.
fn chat_url(endpoint: &str) -> Result<String, ModelError> {
    let parsed = url::Url::parse(endpoint)
        .map_err(|e| ModelError::Config(format!("model endpoint {endpoint:?}: {e}")))?;
    if parsed.path().trim_end_matches('/').ends_with("chat/completions") {
        return Ok(parsed.to_string());
    }
    let base = endpoint.trim_end_matches('/');
    Ok(format!("{base}/chat/completions"))
}

fn extract_content(payload: &Value) -> Option<String> {
    let content = &payload["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p["text"].as_str())
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}

impl ModelBackend for HttpChatBackend {
    fn name(&self) -> &str {
        &self.config.model_name
    }

    fn supports_vision(&self) -> bool {
        self.config.supports_vision
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<String, ModelError> {
        let mut request = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let response = request.send_json(self.request_body(bundle)).map_err(|e| match e {
            ureq::Error::Timeout(_) => ModelError::Timeout(format!("{}: {e}", self.url)),
            other => ModelError::Transport(format!("{}: {other}", self.url)),
        })?;
        let status = response.status().as_u16();
        let body = response
            .into_body()
            .read_to_string()
            .map_err(|e| ModelError::Transport(format!("{}: {e}", self.url)))?;
        if status == 429 || status >= 500 {
            return Err(ModelError::Transport(format!("{}: HTTP {status}", self.url)));
        }
        if status >= 400 {
            return Err(ModelError::BackendUnavailable(format!("{}: HTTP {status}: {body}", self.url)));
        }
        let payload: Value = serde_json::from_str(&body)
            .map_err(|e| ModelError::BackendUnavailable(format!("unreadable completion: {e}")))?;
        extract_content(&payload)
            .ok_or_else(|| ModelError::BackendUnavailable("completion without message content".into()))
    }
}
