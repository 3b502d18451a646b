//! Chat-completions style HTTP provider.
//!
//! `POST <base>/chat/completions` with
//! `{"model", "messages": [system, user], "temperature", "seed", "response_format"}`;
//! the generated object is read from `choices[0].message.content`.

use std::collections::BTreeMap;
use std::time::Duration;

use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{GatewayError, GenerationRequest, Provider, ProviderError};

/// Where a provider credential comes from. Secrets are never stored in
/// configuration, only the name of the environment variable holding them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "name")]
pub enum SecretRef {
    None,
    Env(String),
}

impl SecretRef {
    fn resolve(&self) -> Result<Option<String>, ProviderError> {
        match self {
            SecretRef::None => Ok(None),
            SecretRef::Env(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ProviderError::Auth(format!("environment variable {var} is not set"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpProvider {
    base: url::Url,
    credentials: SecretRef,
    model: String,
    timeout: Duration,
}

impl HttpProvider {
    pub fn new(endpoint: &str, credentials: SecretRef) -> Result<Self, GatewayError> {
        let base = url::Url::parse(endpoint)
            .map_err(|_| GatewayError::InvalidEndpoint(endpoint.to_string()))?;
        if !matches!(base.scheme(), "http" | "https") || base.host().is_none() {
            return Err(GatewayError::InvalidEndpoint(endpoint.to_string()));
        }
        Ok(HttpProvider {
            base,
            credentials,
            model: "default".into(),
            timeout: Duration::from_secs(120),
        })
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.base.as_str().trim_end_matches('/'))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl Provider for HttpProvider {
    fn complete(&self, request: &GenerationRequest, _attempt: u32) -> Result<String, ProviderError> {
        let token = self.credentials.resolve()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let body = json!({
            "model": self.model,
            "temperature": request.temperature,
            "seed": request.seed,
            "messages": [
                {"role": "system", "content": request.system_preamble},
                {"role": "user", "content": request.user_message()},
            ],
            "response_format": {
                "type": "json_schema",
                "json_schema": {"name": "hint_batch", "schema": request.output_schema.json_schema()},
            },
        });
        let mut req = client.post(self.url()).json(&body);
        if let Some(token) = token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        match status {
            StatusCode::TOO_MANY_REQUESTS => return Err(ProviderError::RateLimited),
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                return Err(ProviderError::Auth(format!("HTTP {}", status.as_u16())))
            }
            s if !s.is_success() => {
                return Err(ProviderError::Http {
                    status: s.as_u16(),
                    body: resp.text().unwrap_or_default(),
                })
            }
            _ => {}
        }
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        // A body that is not a chat response is passed through as-is so the
        // schema check sees and logs it.
        match serde_json::from_str::<ChatResponse>(&text) {
            Ok(parsed) => Ok(parsed
                .choices
                .into_iter()
                .next()
                .map(|c| c.message.content)
                .unwrap_or_default()),
            Err(_) => Ok(text),
        }
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("provider".to_string(), "http".to_string()),
            ("endpoint".to_string(), self.base.to_string()),
            ("model".to_string(), self.model.clone()),
        ])
    }
}
