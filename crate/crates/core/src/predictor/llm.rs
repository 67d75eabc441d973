//! Blocking client for OpenAI-compatible chat-completions endpoints.

use std::time::Duration;

use serde_json::{json, Value};

use super::prompt::Prompt;
use super::PredictorConfig;
use crate::error::PredictError;

pub const MAX_COMPLETION_TOKENS: u32 = 2048;

enum Failure {
    Retryable(String),
    Fatal(String),
}

/// Sends `prompt` and returns the first choice's message content.
///
/// Transport errors, 429 and 5xx responses are retried with exponential
/// backoff; other failures end the call at once.
pub fn complete(config: &PredictorConfig, prompt: &Prompt) -> Result<String, PredictError> {
    let (Some(base), Some(model)) = (&config.endpoint_url, &config.model_name) else {
        return Err(PredictError::Config(
            "llm strategy needs endpoint_url and model_name".into(),
        ));
    };
    let url = format!("{}/chat/completions", base.trim_end_matches('/'));
    let body = json!({
        "model": model,
        "messages": [
            {"role": "system", "content": prompt.system},
            {"role": "user", "content": prompt.user},
        ],
        "temperature": config.temperature,
        "max_completion_tokens": MAX_COMPLETION_TOKENS,
    });
    let key = std::env::var(&config.api_key_env).ok();
    if key.is_none() {
        log::warn!("{} is unset; sending request without credentials", config.api_key_env);
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();

    let attempts = config.max_retries + 1;
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = config.retry_base_delay_ms.saturating_mul(1 << (attempt - 1).min(16));
            std::thread::sleep(Duration::from_millis(delay));
        }
        match send(&agent, &url, key.as_deref(), &body) {
            Ok(content) => return Ok(content),
            Err(Failure::Retryable(msg)) => {
                log::warn!("llm attempt {} of {attempts} failed: {msg}", attempt + 1);
                last = msg;
            }
            Err(Failure::Fatal(msg)) => {
                return Err(PredictError::Transport {
                    attempts: attempt + 1,
                    message: msg,
                })
            }
        }
    }
    Err(PredictError::Transport {
        attempts,
        message: last,
    })
}

fn send(agent: &ureq::Agent, url: &str, key: Option<&str>, body: &Value) -> Result<String, Failure> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(k) = key {
        req = req.header("Authorization", &format!("Bearer {k}"));
    }
    let mut resp = req
        .send(body.to_string())
        .map_err(|e| Failure::Retryable(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| Failure::Retryable(e.to_string()))?;
    match status {
        200..=299 => {}
        429 | 500..=599 => return Err(Failure::Retryable(format!("HTTP {status}: {text}"))),
        _ => return Err(Failure::Fatal(format!("HTTP {status}: {text}"))),
    }
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Fatal(format!("response is not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Failure::Fatal("response lacks choices[0].message.content".into()))
}
