use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{CompletionProvider, CompletionRequest, ProviderFailure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HttpProviderConfig {
    /// Base URL of a text-completion API, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

/// Text-completion endpoint: `POST {base}/completions` with
/// `{model, prompt, temperature, max_tokens}`; the completion is read from
/// `choices[0].text`, or from a top-level `text` field.
pub struct HttpProvider {
    client: reqwest::Client,
    config: HttpProviderConfig,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireChoice {
    #[serde(default)]
    text: Option<String>,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    text: Option<String>,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderFailure> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderFailure::Fatal(e.to_string()))?;
        Ok(HttpProvider { client, config })
    }

    fn endpoint(&self) -> String {
        format!("{}/completions", self.config.base_url.trim_end_matches('/'))
    }
}

#[async_trait]
impl CompletionProvider for HttpProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderFailure> {
        let body = WireRequest {
            model: &request.params.model_name,
            prompt: &request.prompt,
            temperature: request.params.temperature,
            max_tokens: request.params.max_tokens,
        };
        let mut builder = self.client.post(self.endpoint()).json(&body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().await.map_err(|e| {
            if e.is_timeout() {
                ProviderFailure::Timeout
            } else {
                ProviderFailure::Transient(e.to_string())
            }
        })?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(ProviderFailure::Auth(format!("HTTP {status}")));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ProviderFailure::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let detail = response.text().await.unwrap_or_default();
            return Err(ProviderFailure::Fatal(format!("HTTP {status}: {detail}")));
        }
        let parsed: WireResponse = response
            .json()
            .await
            .map_err(|e| ProviderFailure::Transient(format!("bad response body: {e}")))?;
        Ok(parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.text)
            .or(parsed.text)
            .unwrap_or_default())
    }
}
