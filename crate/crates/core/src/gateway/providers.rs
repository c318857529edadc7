//! HTTP chat-completion adapters for the provider families used in
//! the experiments: OpenAI-compatible endpoints (GPT, DeepSeek,
//! Llama-hosting services), Anthropic, and Google. Payload assembly
//! and response parsing are pure functions so they can be tested
//! without a network.

use serde_json::{json, Value};

use super::{log_wire, CallError, Provider, ProviderConfig, ProviderReply};

/// Wire-format family, inferred from the provider name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderFamily {
    Mock,
    Anthropic,
    Google,
    OpenAiCompatible,
}

impl ProviderFamily {
    pub fn of(provider_name: &str) -> Self {
        let name = provider_name.to_lowercase();
        if name.contains("mock") {
            ProviderFamily::Mock
        } else if name.contains("claude") || name.contains("anthropic") {
            ProviderFamily::Anthropic
        } else if name.contains("gemini") || name.contains("google") {
            ProviderFamily::Google
        } else {
            // gpt, deepseek, llama, and most hosted endpoints speak
            // the OpenAI chat-completions dialect
            ProviderFamily::OpenAiCompatible
        }
    }
}

/// Request body for one prompt in the family's wire format.
pub fn build_payload(family: ProviderFamily, model_id: &str, prompt: &str) -> Value {
    match family {
        ProviderFamily::Anthropic => json!({
            "model": model_id,
            "max_tokens": 1024,
            "messages": [{"role": "user", "content": prompt}],
        }),
        ProviderFamily::Google => json!({
            "contents": [{"parts": [{"text": prompt}]}],
        }),
        ProviderFamily::OpenAiCompatible | ProviderFamily::Mock => json!({
            "model": model_id,
            "messages": [{"role": "user", "content": prompt}],
        }),
    }
}

/// Auth headers for the family. The credential lives only in the
/// process environment and in these headers.
pub fn auth_headers(family: ProviderFamily, key: &str) -> Vec<(&'static str, String)> {
    match family {
        ProviderFamily::Anthropic => vec![
            ("x-api-key", key.to_string()),
            ("anthropic-version", "2023-06-01".to_string()),
        ],
        ProviderFamily::Google => vec![("x-goog-api-key", key.to_string())],
        ProviderFamily::OpenAiCompatible | ProviderFamily::Mock => {
            vec![("Authorization", format!("Bearer {key}"))]
        }
    }
}

fn str_at<'v>(value: &'v Value, path: &[&str]) -> Option<&'v str> {
    let mut cursor = value;
    for step in path {
        cursor = match step.parse::<usize>() {
            Ok(i) => cursor.get(i)?,
            Err(_) => cursor.get(step)?,
        };
    }
    cursor.as_str()
}

fn u64_at(value: &Value, path: &[&str]) -> Option<u64> {
    let mut cursor = value;
    for step in path {
        cursor = match step.parse::<usize>() {
            Ok(i) => cursor.get(i)?,
            Err(_) => cursor.get(step)?,
        };
    }
    cursor.as_u64()
}

/// Extract reply text and token usage from a response body.
pub fn parse_response(family: ProviderFamily, body: &Value) -> Result<ProviderReply, CallError> {
    let (text, prompt_tokens, completion_tokens) = match family {
        ProviderFamily::Anthropic => (
            str_at(body, &["content", "0", "text"]),
            u64_at(body, &["usage", "input_tokens"]),
            u64_at(body, &["usage", "output_tokens"]),
        ),
        ProviderFamily::Google => (
            str_at(body, &["candidates", "0", "content", "parts", "0", "text"]),
            u64_at(body, &["usageMetadata", "promptTokenCount"]),
            u64_at(body, &["usageMetadata", "candidatesTokenCount"]),
        ),
        ProviderFamily::OpenAiCompatible | ProviderFamily::Mock => (
            str_at(body, &["choices", "0", "message", "content"]),
            u64_at(body, &["usage", "prompt_tokens"]),
            u64_at(body, &["usage", "completion_tokens"]),
        ),
    };
    match text {
        Some(text) => Ok(ProviderReply {
            text: text.to_string(),
            prompt_tokens,
            completion_tokens,
            latency_override: None,
        }),
        None => Err(CallError::Fatal(format!(
            "response body missing completion text for {family:?}"
        ))),
    }
}

/// Live HTTP provider for one configured endpoint.
pub struct HttpProvider {
    family: ProviderFamily,
    endpoint: String,
    model_id: String,
    key: String,
    client: reqwest::Client,
}

impl HttpProvider {
    pub fn new(family: ProviderFamily, config: &ProviderConfig, key: String) -> Self {
        let client = reqwest::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout))
            .build()
            .expect("reqwest client");
        HttpProvider {
            family,
            endpoint: config.endpoint.clone(),
            model_id: config.model_id.clone(),
            key,
            client,
        }
    }
}

#[async_trait::async_trait]
impl Provider for HttpProvider {
    async fn call(&self, prompt: &str) -> Result<ProviderReply, CallError> {
        let payload = build_payload(self.family, &self.model_id, prompt);
        log_wire("request", &payload.to_string(), &self.key);

        let mut request = self.client.post(&self.endpoint).json(&payload);
        for (name, value) in auth_headers(self.family, &self.key) {
            request = request.header(name, value);
        }

        let response = request.send().await.map_err(|e| {
            if e.is_timeout() || e.is_connect() {
                CallError::Transient(format!("transport: {e}"))
            } else {
                CallError::Fatal(format!("transport: {e}"))
            }
        })?;

        let status = response.status();
        let body = response
            .text()
            .await
            .map_err(|e| CallError::Transient(format!("read body: {e}")))?;
        log_wire("response", &body, &self.key);

        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(CallError::Auth(format!("status {status}")));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(CallError::Transient(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(CallError::Fatal(format!(
                "status {status}: {}",
                body.chars().take(200).collect::<String>()
            )));
        }

        let value: Value = serde_json::from_str(&body)
            .map_err(|e| CallError::Fatal(format!("invalid response JSON: {e}")))?;
        parse_response(self.family, &value)
    }
}
