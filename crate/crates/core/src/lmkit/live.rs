//! HTTP client for an OpenAI-compatible `/completions` endpoint.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{CompletionRequest, CompletionResult, LmError, Provider};

pub const API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, initial_backoff_ms: 500, multiplier: 2.0 }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64 * self.multiplier.powi(attempt as i32);
        Duration::from_millis(ms as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub base_url: String,
    pub model: String,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    /// Hard cap on requests issued by this client; `None` is unlimited.
    pub max_requests: Option<usize>,
    pub timeout_secs: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "text-davinci-003".into(),
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            max_requests: None,
            timeout_secs: 60,
        }
    }
}

/// Counting semaphore for the in-flight cap.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().expect("gate poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate poisoned");
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate poisoned") += 1;
        self.0.cv.notify_one();
    }
}

enum Failure {
    Transient(String),
    Fatal(LmError),
}

#[derive(Debug)]
pub struct OpenAiCompletions {
    cfg: LiveConfig,
    api_key: String,
    http: reqwest::blocking::Client,
    gate: Gate,
    issued: AtomicUsize,
}

impl OpenAiCompletions {
    pub fn new(cfg: LiveConfig, api_key: impl Into<String>) -> Result<Self, LmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| LmError::InvalidRequest(e.to_string()))?;
        Ok(OpenAiCompletions {
            gate: Gate::new(cfg.max_in_flight),
            cfg,
            api_key: api_key.into(),
            http,
            issued: AtomicUsize::new(0),
        })
    }

    /// Reads the API key from [`API_KEY_ENV`].
    pub fn from_env(cfg: LiveConfig) -> Result<Self, LmError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| LmError::MissingCredential(API_KEY_ENV.into()))?;
        Self::new(cfg, key)
    }

    pub fn requests_issued(&self) -> usize {
        self.issued.load(Ordering::SeqCst)
    }

    /// JSON body for a request. Only integer-like keys of `logit_bias` are
    /// sent, since the endpoint addresses tokens by id.
    pub fn request_body(&self, req: &CompletionRequest) -> Value {
        let bias: Map<String, Value> = req
            .logit_bias
            .iter()
            .filter(|(k, _)| k.parse::<u64>().is_ok())
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect();
        let mut body = json!({
            "model": self.cfg.model,
            "prompt": req.prompt,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "logprobs": req.top_logprobs,
            "logit_bias": bias,
        });
        if !req.stop.is_empty() {
            body["stop"] = json!(req.stop);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<CompletionResult, Failure> {
        let url = format!("{}/completions", self.cfg.base_url.trim_end_matches('/'));
        let resp = self
            .http
            .post(url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Failure::Transient(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(LmError::Rejected(format!("HTTP {status}: {text}"))));
        }
        parse_response(&text).map_err(Failure::Fatal)
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    text: String,
    #[serde(default)]
    logprobs: Option<WireLogprobs>,
}

#[derive(Deserialize)]
struct WireLogprobs {
    #[serde(default)]
    top_logprobs: Vec<Option<Map<String, Value>>>,
}

/// Parses a `/completions` response, keeping the first token's alternatives.
pub fn parse_response(text: &str) -> Result<CompletionResult, LmError> {
    let wire: WireResponse =
        serde_json::from_str(text).map_err(|e| LmError::Malformed(e.to_string()))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LmError::Malformed("no choices".into()))?;
    let alternatives = choice
        .logprobs
        .and_then(|lp| lp.top_logprobs.into_iter().next().flatten())
        .map(|first| {
            first
                .into_iter()
                .filter_map(|(tok, v)| v.as_f64().map(|lp| (tok, lp)))
                .collect()
        })
        .unwrap_or_default();
    Ok(CompletionResult::new(choice.text, alternatives))
}

impl Provider for OpenAiCompletions {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LmError> {
        request.validate()?;
        if let Some(cap) = self.cfg.max_requests {
            let prev = self.issued.fetch_add(1, Ordering::SeqCst);
            if prev >= cap {
                return Err(LmError::BudgetExhausted(cap));
            }
        } else {
            self.issued.fetch_add(1, Ordering::SeqCst);
        }
        let body = self.request_body(request);
        let _slot = self.gate.acquire();
        let attempts = self.cfg.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match self.attempt(&body) {
                Ok(result) => return Ok(result),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(msg)) => {
                    log::warn!("completion attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                    if attempt + 1 < attempts {
                        thread::sleep(self.cfg.retry.backoff(attempt));
                    }
                }
            }
        }
        Err(LmError::Exhausted { attempts, message: last })
    }
}
