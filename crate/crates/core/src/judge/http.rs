//! HTTP transport for the judge protocol.
//!
//! One POST endpoint, task-discriminated JSON bodies:
//!
//! ```json
//! {"version": 1, "model": "...", "task": "entity_match",
//!  "items": [{"id": "0", "candidate": "sofa", "reference": "couch", "context": ""}]}
//! ```
//!
//! The response carries `{"results": [{"id": "0", "verdict": true}, ...]}`
//! with exactly one of `verdict`/`score`/`units` per result. Items are sent
//! in bounded-size batches; transport failures and 5xx responses retry with
//! exponential backoff, 4xx responses fail fast as protocol errors.

use std::time::Duration;

use serde::Serialize;

use super::{
    validate_results, Judge, JudgeError, JudgeRequest, JudgeResponse, JudgeTask, WireResult,
};

/// Connection settings for a judge endpoint. URL and credentials normally
/// arrive via environment variables (see the CLI docs).
#[derive(Debug, Clone)]
pub struct HttpJudgeConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub batch_size: usize,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for HttpJudgeConfig {
    fn default() -> Self {
        HttpJudgeConfig {
            url: String::new(),
            api_key: None,
            model: "judge".into(),
            batch_size: 16,
            max_retries: 3,
            initial_backoff: Duration::from_millis(100),
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    version: u32,
    model: &'a str,
    task: JudgeTask,
    items: &'a [super::JudgeItem],
}

#[derive(serde::Deserialize)]
struct WireResponse {
    results: Vec<WireResult>,
}

/// Blocking HTTP judge client.
pub struct HttpJudge {
    config: HttpJudgeConfig,
    agent: ureq::Agent,
}

enum AttemptError {
    /// Transport-level or 5xx failure; worth retrying.
    Retry(String),
    /// Definitive failure; retrying would not help.
    Fatal(JudgeError),
}

impl HttpJudge {
    pub fn new(config: HttpJudgeConfig) -> Result<Self, JudgeError> {
        if config.url.is_empty() {
            return Err(JudgeError::Config("judge endpoint URL is empty".into()));
        }
        if config.batch_size == 0 {
            return Err(JudgeError::Config("judge batch size must be >= 1".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpJudge { config, agent })
    }

    fn post_once(&self, body: &WireRequest<'_>) -> Result<String, AttemptError> {
        let mut request = self.agent.post(&self.config.url);
        if let Some(key) = &self.config.api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| AttemptError::Retry(format!("request failed: {e}")))?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| AttemptError::Retry(format!("reading response body failed: {e}")))?;
        if status.is_success() {
            Ok(text)
        } else if status.is_server_error() || status.as_u16() == 429 {
            Err(AttemptError::Retry(format!("judge returned {status}")))
        } else {
            Err(AttemptError::Fatal(JudgeError::Protocol {
                detail: format!("judge returned {status}"),
                payload: text,
            }))
        }
    }

    fn post_with_retries(&self, body: &WireRequest<'_>) -> Result<String, JudgeError> {
        let mut attempt = 0u32;
        loop {
            match self.post_once(body) {
                Ok(text) => return Ok(text),
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Retry(detail)) => {
                    if attempt >= self.config.max_retries {
                        return Err(JudgeError::Transport(format!(
                            "{detail} (after {} attempts)",
                            attempt + 1
                        )));
                    }
                    let backoff = self.config.initial_backoff * 2u32.saturating_pow(attempt);
                    std::thread::sleep(backoff);
                    attempt += 1;
                }
            }
        }
    }
}

impl Judge for HttpJudge {
    fn judge_batch(&self, request: &JudgeRequest) -> Result<JudgeResponse, JudgeError> {
        request.validate()?;
        let mut results = Vec::with_capacity(request.items.len());
        for chunk in request.items.chunks(self.config.batch_size) {
            let body = WireRequest {
                version: 1,
                model: &self.config.model,
                task: request.task,
                items: chunk,
            };
            let text = self.post_with_retries(&body)?;
            let wire: WireResponse =
                serde_json::from_str(&text).map_err(|e| JudgeError::Protocol {
                    detail: format!("unparseable judge response: {e}"),
                    payload: text.clone(),
                })?;
            results.extend(validate_results(chunk, request.task, wire.results, &text)?);
        }
        Ok(JudgeResponse { results })
    }

    fn model_id(&self) -> &str {
        &self.config.model
    }
}
