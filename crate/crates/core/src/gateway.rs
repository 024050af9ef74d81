//! Access to chat-completion models: a scripted mock and a live HTTP client.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const API_KEY_VAR: &str = "OLIGOLAB_API_KEY";
pub const API_URL_VAR: &str = "OLIGOLAB_API_URL";
pub const DEFAULT_API_URL: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("gateway configuration: {0}")]
    Config(String),

    #[error("request for firm {firm} failed after {attempts} attempt(s): {message}")]
    Transport {
        firm: usize,
        attempts: u32,
        message: String,
    },

    #[error("cannot read mock script {path}: {message}")]
    Script { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayKind {
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_timeout_secs: f64,
    pub max_transport_retries: u32,
    pub backoff_base_secs: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            model_id: "gpt-4o-2024-08-06".into(),
            temperature: 1.0,
            max_output_tokens: 4096,
            request_timeout_secs: 120.0,
            max_transport_retries: 5,
            backoff_base_secs: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.model_id.trim().is_empty() {
            out.push(format!("{prefix}.model_id: must not be empty"));
        }
        if !(self.temperature.is_finite() && (0.0..=2.0).contains(&self.temperature)) {
            out.push(format!(
                "{prefix}.temperature: must lie in [0, 2], got {}",
                self.temperature
            ));
        }
        if self.max_output_tokens == 0 {
            out.push(format!("{prefix}.max_output_tokens: must be positive"));
        }
        if !(self.request_timeout_secs.is_finite() && self.request_timeout_secs > 0.0) {
            out.push(format!("{prefix}.request_timeout_secs: must be positive"));
        }
        if !(self.backoff_base_secs.is_finite() && self.backoff_base_secs >= 0.0) {
            out.push(format!("{prefix}.backoff_base_secs: must be nonnegative"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn add(&mut self, other: TokenUsage) {
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
    }
}

/// One request/response pair, successful or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionExchange {
    pub firm: usize,
    pub attempt: u32,
    pub model_id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub usage: TokenUsage,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub exchanges: Vec<CompletionExchange>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub requests: u64,
    pub failed_requests: u64,
    pub total: TokenUsage,
    pub per_firm: Vec<TokenUsage>,
}

impl UsageTotals {
    pub fn record(&mut self, exchange: &CompletionExchange) {
        if self.per_firm.len() <= exchange.firm {
            self.per_firm.resize(exchange.firm + 1, TokenUsage::default());
        }
        self.requests += 1;
        if exchange.error.is_some() {
            self.failed_requests += 1;
        }
        self.total.add(exchange.usage);
        self.per_firm[exchange.firm].add(exchange.usage);
    }

    pub fn from_exchanges<'a>(n_firms: usize, exchanges: impl IntoIterator<Item = &'a CompletionExchange>) -> Self {
        let mut out = Self {
            per_firm: vec![TokenUsage::default(); n_firms],
            ..Self::default()
        };
        for e in exchanges {
            out.record(e);
        }
        out
    }
}

pub struct Reply {
    pub text: String,
    pub usage: TokenUsage,
}

pub struct TransportFailure {
    pub retryable: bool,
    pub message: String,
}

pub trait Transport: Send + Sync {
    fn kind(&self) -> GatewayKind;
    fn send(&self, firm: usize, prompt: &str, model: &ModelConfig) -> Result<Reply, TransportFailure>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Fail { fail: String },
}

/// Scripted replies, one queue per firm, consumed in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub agents: Vec<Vec<MockReply>>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let err = |message: String| GatewayError::Script {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

pub struct MockTransport {
    queues: Vec<Mutex<VecDeque<MockReply>>>,
}

impl MockTransport {
    pub fn new(script: MockScript) -> Self {
        Self {
            queues: script.agents.into_iter().map(|q| Mutex::new(q.into())).collect(),
        }
    }

    /// Drops the first `n` scripted replies of `firm`, used when resuming.
    pub fn skip(&self, firm: usize, n: usize) {
        if let Some(q) = self.queues.get(firm) {
            let mut q = q.lock().expect("mock queue");
            let n = n.min(q.len());
            q.drain(..n);
        }
    }

    pub fn remaining(&self, firm: usize) -> usize {
        self.queues.get(firm).map_or(0, |q| q.lock().expect("mock queue").len())
    }
}

impl Transport for MockTransport {
    fn kind(&self) -> GatewayKind {
        GatewayKind::Mock
    }

    fn send(&self, firm: usize, prompt: &str, _model: &ModelConfig) -> Result<Reply, TransportFailure> {
        let next = self
            .queues
            .get(firm)
            .and_then(|q| q.lock().expect("mock queue").pop_front());
        match next {
            Some(MockReply::Text(text)) => Ok(Reply {
                usage: TokenUsage {
                    input_tokens: word_count(prompt),
                    output_tokens: word_count(&text),
                },
                text,
            }),
            Some(MockReply::Fail { fail }) => Err(TransportFailure {
                retryable: true,
                message: fail,
            }),
            None => Err(TransportFailure {
                retryable: false,
                message: format!("mock script for firm {} is exhausted", firm + 1),
            }),
        }
    }
}

/// OpenAI-compatible chat completions over HTTP.
pub struct LiveTransport {
    agent: ureq::Agent,
    url: String,
    api_key: String,
}

impl LiveTransport {
    pub fn new(url: String, api_key: String, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, url, api_key }
    }

    /// Reads credentials from the environment; fails before any request is made.
    pub fn from_env(timeout: Duration) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_VAR)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| GatewayError::Config(format!("{API_KEY_VAR} is not set")))?;
        let url = std::env::var(API_URL_VAR).unwrap_or_else(|_| DEFAULT_API_URL.to_string());
        Ok(Self::new(url, key, timeout))
    }
}

impl Transport for LiveTransport {
    fn kind(&self) -> GatewayKind {
        GatewayKind::Live
    }

    fn send(&self, _firm: usize, prompt: &str, model: &ModelConfig) -> Result<Reply, TransportFailure> {
        let body = json!({
            "model": model.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": model.temperature,
            "max_tokens": model.max_output_tokens,
        });
        let response = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body);
        let mut response = response.map_err(|e| TransportFailure {
            retryable: true,
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().unwrap_or_default();
        if !(200..300).contains(&status) {
            return Err(TransportFailure {
                retryable: status == 429 || status >= 500,
                message: format!("HTTP {status}: {}", text.chars().take(300).collect::<String>()),
            });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| TransportFailure {
            retryable: true,
            message: format!("malformed API response: {e}"),
        })?;
        let content = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportFailure {
                retryable: true,
                message: "API response has no message content".into(),
            })?
            .to_string();
        let usage = TokenUsage {
            input_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            output_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        };
        Ok(Reply { text: content, usage })
    }
}

/// Retry, backoff and journaling around a transport.
pub struct Gateway {
    transport: Box<dyn Transport>,
    sleep: bool,
    journal: Option<Mutex<BufWriter<File>>>,
    jitter: Mutex<ChaCha8Rng>,
}

impl Gateway {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        let sleep = transport.kind() == GatewayKind::Live;
        Self {
            transport,
            sleep,
            journal: None,
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(0x6a69_7474_6572)),
        }
    }

    pub fn mock(script: MockScript) -> (Self, std::sync::Arc<MockTransport>) {
        let transport = std::sync::Arc::new(MockTransport::new(script));
        (Self::new(Box::new(SharedMock(transport.clone()))), transport)
    }

    /// Appends a line to `path` before every live request so spend is never unrecorded.
    pub fn with_intent_journal(mut self, path: &Path) -> Result<Self, GatewayError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::Config(format!("cannot open intent journal {}: {e}", path.display())))?;
        self.journal = Some(Mutex::new(BufWriter::new(file)));
        Ok(self)
    }

    pub fn kind(&self) -> GatewayKind {
        self.transport.kind()
    }

    fn write_intent(&self, firm: usize, attempt: u32, prompt: &str, model: &ModelConfig) -> Result<(), GatewayError> {
        let Some(journal) = &self.journal else {
            return Ok(());
        };
        let unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let line = json!({
            "firm": firm + 1,
            "attempt": attempt,
            "model_id": model.model_id,
            "prompt_sha256": prompt_digest(prompt),
            "unix_ms": unix_ms,
        });
        let mut w = journal.lock().expect("journal");
        writeln!(w, "{line}")
            .and_then(|_| w.flush())
            .map_err(|e| GatewayError::Config(format!("cannot write intent journal: {e}")))
    }

    fn backoff(&self, model: &ModelConfig, attempt: u32) -> Duration {
        let base = model.backoff_base_secs * 2f64.powi(attempt as i32 - 1);
        let jitter: f64 = self.jitter.lock().expect("jitter").random_range(0.0..0.25);
        Duration::from_secs_f64((base * (1.0 + jitter)).min(60.0))
    }

    pub fn complete(&self, firm: usize, prompt: &str, model: &ModelConfig) -> Result<Completion, GatewayError> {
        let mut exchanges = Vec::new();
        let max_attempts = model.max_transport_retries + 1;
        for attempt in 1..=max_attempts {
            self.write_intent(firm, attempt, prompt, model)?;
            let started = Instant::now();
            let result = self.transport.send(firm, prompt, model);
            let latency_ms = if self.sleep {
                started.elapsed().as_millis() as u64
            } else {
                0
            };
            match result {
                Ok(reply) => {
                    exchanges.push(CompletionExchange {
                        firm,
                        attempt,
                        model_id: model.model_id.clone(),
                        prompt: prompt.to_string(),
                        response: Some(reply.text.clone()),
                        error: None,
                        usage: reply.usage,
                        latency_ms,
                    });
                    return Ok(Completion {
                        text: reply.text,
                        exchanges,
                    });
                }
                Err(failure) => {
                    tracing::warn!(firm = firm + 1, attempt, "request failed: {}", failure.message);
                    exchanges.push(CompletionExchange {
                        firm,
                        attempt,
                        model_id: model.model_id.clone(),
                        prompt: prompt.to_string(),
                        response: None,
                        error: Some(failure.message.clone()),
                        usage: TokenUsage::default(),
                        latency_ms,
                    });
                    if !failure.retryable || attempt == max_attempts {
                        return Err(GatewayError::Transport {
                            firm: firm + 1,
                            attempts: attempt,
                            message: failure.message,
                        });
                    }
                    if self.sleep {
                        std::thread::sleep(self.backoff(model, attempt));
                    }
                }
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}

struct SharedMock(std::sync::Arc<MockTransport>);

impl Transport for SharedMock {
    fn kind(&self) -> GatewayKind {
        GatewayKind::Mock
    }

    fn send(&self, firm: usize, prompt: &str, model: &ModelConfig) -> Result<Reply, TransportFailure> {
        self.0.send(firm, prompt, model)
    }
}

pub fn prompt_digest(prompt: &str) -> String {
    format!("{:x}", Sha256::digest(prompt.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(replies: Vec<MockReply>) -> MockScript {
        MockScript {
            agents: vec![replies, vec![]],
        }
    }

    #[test]
    fn mock_passes_text_through() {
        let raw = "  {\"weird\": \"\\u00e9\"}\n\n trailing ";
        let (g, _) = Gateway::mock(script(vec![MockReply::Text(raw.into())]));
        let c = g.complete(0, "one two three", &ModelConfig::default()).unwrap();
        assert_eq!(c.text, raw);
        assert_eq!(c.exchanges.len(), 1);
        assert_eq!(c.exchanges[0].usage.input_tokens, 3);
        assert_eq!(c.exchanges[0].latency_ms, 0);
    }

    #[test]
    fn mock_retries_transport_failures() {
        let (g, _) = Gateway::mock(script(vec![
            MockReply::Fail {
                fail: "rate limited".into(),
            },
            MockReply::Fail {
                fail: "rate limited".into(),
            },
            MockReply::Text("ok".into()),
        ]));
        let c = g.complete(0, "p", &ModelConfig::default()).unwrap();
        assert_eq!(c.text, "ok");
        assert_eq!(c.exchanges.len(), 3);
        assert_eq!(c.exchanges[0].error.as_deref(), Some("rate limited"));
        assert_eq!(c.exchanges[2].attempt, 3);
    }

    #[test]
    fn mock_gives_up_after_retry_budget() {
        let fails = (0..10).map(|_| MockReply::Fail { fail: "down".into() }).collect();
        let (g, _) = Gateway::mock(script(fails));
        let model = ModelConfig {
            max_transport_retries: 2,
            ..ModelConfig::default()
        };
        let err = g.complete(0, "p", &model).unwrap_err();
        assert_eq!(
            err,
            GatewayError::Transport {
                firm: 1,
                attempts: 3,
                message: "down".into()
            }
        );
    }

    #[test]
    fn exhausted_script_is_fatal() {
        let (g, mock) = Gateway::mock(script(vec![MockReply::Text("a".into()), MockReply::Text("b".into())]));
        mock.skip(0, 1);
        assert_eq!(mock.remaining(0), 1);
        assert_eq!(g.complete(0, "p", &ModelConfig::default()).unwrap().text, "b");
        let err = g.complete(0, "p", &ModelConfig::default()).unwrap_err();
        assert!(matches!(err, GatewayError::Transport { attempts: 1, .. }));
        assert!(g.complete(1, "p", &ModelConfig::default()).is_err());
    }

    #[test]
    fn script_file_format() {
        let s: MockScript = serde_json::from_str(r#"{"agents": [["x", {"fail": "boom"}], []]}"#).unwrap();
        assert_eq!(s.agents[0][1], MockReply::Fail { fail: "boom".into() });
    }

    #[test]
    fn usage_totals() {
        let e = |firm, i, o, err: bool| CompletionExchange {
            firm,
            attempt: 1,
            model_id: "m".into(),
            prompt: String::new(),
            response: None,
            error: err.then(|| "x".to_string()),
            usage: TokenUsage {
                input_tokens: i,
                output_tokens: o,
            },
            latency_ms: 0,
        };
        let ex = [e(0, 10, 2, false), e(1, 5, 1, false), e(1, 0, 0, true)];
        let u = UsageTotals::from_exchanges(2, &ex);
        assert_eq!(u.requests, 3);
        assert_eq!(u.failed_requests, 1);
        assert_eq!(
            u.total,
            TokenUsage {
                input_tokens: 15,
                output_tokens: 3
            }
        );
        assert_eq!(u.per_firm[1].input_tokens, 5);
    }

    #[test]
    fn model_config_problems_are_named() {
        let bad = ModelConfig {
            temperature: 3.0,
            model_id: " ".into(),
            ..ModelConfig::default()
        };
        let p = bad.problems("gateway.model");
        assert_eq!(p.len(), 2);
        assert!(p[0].starts_with("gateway.model.model_id"));
    }

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(
            prompt_digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
