//! Provider-agnostic chat-completion gateway.
//!
//! One `Gateway` owns a provider (HTTP adapter or the built-in mock),
//! a token-bucket rate limiter, and a retry policy. `run_batch` is the
//! only concurrent surface: bounded worker parallelism, results merged
//! through an order-restoring buffer so the resume log and the returned
//! records are always in input order. The resume log is the same JSONL
//! prediction-record stream the evaluation harness reads; restarting a
//! batch skips every sample id already logged for the same
//! (model, run, task) key.

mod mock;
mod providers;

pub use mock::{fnv1a64, MockBehavior, MockProvider};
pub use providers::{auth_headers, build_payload, parse_response, HttpProvider, ProviderFamily};

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{mpsc, Mutex, Semaphore};

use crate::corpus::{self, Label, PredictionRecord, Task};

/// Connection and accounting settings for one model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_name: String,
    pub endpoint: String,
    pub model_id: String,
    /// Name of the environment variable holding the API key. The key
    /// itself never appears in config files or logs.
    pub credential_env_var: String,
    #[serde(default = "defaults::max_concurrent")]
    pub max_concurrent: usize,
    #[serde(default = "defaults::requests_per_minute")]
    pub requests_per_minute: u32,
    /// Per-request timeout in seconds.
    #[serde(default = "defaults::timeout")]
    pub timeout: u64,
    #[serde(default = "defaults::max_retries")]
    pub max_retries: u32,
    /// Currency per 1K prompt tokens.
    #[serde(default)]
    pub price_in: f64,
    /// Currency per 1K completion tokens.
    #[serde(default)]
    pub price_out: f64,
}

mod defaults {
    pub fn max_concurrent() -> usize {
        4
    }
    pub fn requests_per_minute() -> u32 {
        60
    }
    pub fn timeout() -> u64 {
        120
    }
    pub fn max_retries() -> u32 {
        3
    }
}

impl ProviderConfig {
    /// A mock-provider config with generous limits, used wherever
    /// `--mock` forces the offline provider.
    pub fn mock() -> Self {
        ProviderConfig {
            provider_name: "mock".to_string(),
            endpoint: String::new(),
            model_id: "mock".to_string(),
            credential_env_var: String::new(),
            max_concurrent: 8,
            requests_per_minute: 600_000,
            timeout: 30,
            max_retries: 2,
            price_in: 0.0,
            price_out: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_concurrent < 1 {
            return Err(GatewayError::InvalidConfig("max_concurrent must be >= 1".into()));
        }
        if self.requests_per_minute < 1 {
            return Err(GatewayError::InvalidConfig(
                "requests_per_minute must be >= 1".into(),
            ));
        }
        if self.timeout == 0 {
            return Err(GatewayError::InvalidConfig("timeout must be positive".into()));
        }
        if self.price_in < 0.0 || self.price_out < 0.0 {
            return Err(GatewayError::InvalidConfig("prices must be >= 0".into()));
        }
        Ok(())
    }

    pub fn family(&self) -> ProviderFamily {
        ProviderFamily::of(&self.provider_name)
    }
}

/// One finished round trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResult {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Milliseconds.
    pub latency: u64,
    pub attempts: u32,
}

/// What a provider hands back on success. Token counts are taken from
/// the provider when present and estimated otherwise; a latency
/// override lets scripted providers report fixed timings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub latency_override: Option<u64>,
}

impl ProviderReply {
    pub fn text(text: impl Into<String>) -> Self {
        ProviderReply {
            text: text.into(),
            prompt_tokens: None,
            completion_tokens: None,
            latency_override: None,
        }
    }
}

/// Provider-level call failure, classified for retry handling.
#[derive(Debug, Error)]
pub enum CallError {
    /// Timeouts, rate-limit replies, 5xx-class statuses. Retried.
    #[error("transient failure: {0}")]
    Transient(String),
    /// Rejected credentials. Never retried.
    #[error("authentication failed: {0}")]
    Auth(String),
    /// Anything that retrying cannot fix (malformed response, 4xx).
    #[error("{0}")]
    Fatal(String),
}

/// A chat-completion backend: one prompt in, one reply out.
#[async_trait::async_trait]
pub trait Provider: Send + Sync {
    async fn call(&self, prompt: &str) -> Result<ProviderReply, CallError>;
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("retries exhausted after {attempts} attempts: {last}")]
    RetriesExhausted {
        attempts: u32,
        last: String,
        /// One line per failed attempt.
        attempt_log: Vec<String>,
    },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request failed: {0}")]
    Fatal(String),
    #[error("invalid gateway config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
}

/// Exponential backoff parameters for transient failures.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    /// Randomize each delay within [d/2, d). Timing only; never
    /// affects outputs.
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base_delay_ms: 500,
            max_delay_ms: 30_000,
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    fn delay(&self, attempt: u32) -> Duration {
        let exp = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.min(20).saturating_sub(1));
        let capped = exp.min(self.max_delay_ms).max(1);
        let ms = if self.jitter {
            let half = capped / 2;
            half + rand::thread_rng().gen_range(0..=capped - half)
        } else {
            capped
        };
        Duration::from_millis(ms)
    }
}

/// Where record timestamps come from. `Fixed` makes mock runs byte
/// deterministic.
#[derive(Debug, Clone, Copy)]
pub enum TimestampSource {
    System,
    Fixed { base_unix_ms: i64, step_ms: i64 },
}

impl TimestampSource {
    /// A fixed source used by `--mock` runs.
    pub fn fixed_default() -> Self {
        // 2025-02-03T00:00:00Z, one second per record
        TimestampSource::Fixed {
            base_unix_ms: 1_738_540_800_000,
            step_ms: 1_000,
        }
    }

    pub fn stamp(&self, index: u64) -> String {
        match self {
            TimestampSource::System => {
                Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
            }
            TimestampSource::Fixed { base_unix_ms, step_ms } => {
                let ms = base_unix_ms + step_ms * index as i64;
                DateTime::<Utc>::from_timestamp_millis(ms)
                    .expect("fixed timestamp in range")
                    .to_rfc3339_opts(SecondsFormat::Millis, true)
            }
        }
    }
}

/// Fallback token estimate when the provider reports no usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Token-bucket rate limiter: capacity and refill rate derived from a
/// requests-per-minute budget.
pub struct TokenBucket {
    capacity: f64,
    rate_per_sec: f64,
    state: Mutex<BucketState>,
}

struct BucketState {
    tokens: f64,
    last: tokio::time::Instant,
}

impl TokenBucket {
    pub fn new(requests_per_minute: u32) -> Self {
        let capacity = f64::from(requests_per_minute.max(1));
        TokenBucket {
            capacity,
            rate_per_sec: capacity / 60.0,
            state: Mutex::new(BucketState {
                tokens: capacity,
                last: tokio::time::Instant::now(),
            }),
        }
    }

    pub async fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().await;
                let now = tokio::time::Instant::now();
                let elapsed = now.duration_since(s.last).as_secs_f64();
                s.tokens = (s.tokens + elapsed * self.rate_per_sec).min(self.capacity);
                s.last = now;
                if s.tokens >= 1.0 {
                    s.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - s.tokens) / self.rate_per_sec)
            };
            tokio::time::sleep(wait).await;
        }
    }
}

/// Identifies which logical run a batch belongs to; resume matching is
/// scoped to this key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunKey {
    pub model_id: String,
    pub run_id: String,
    pub task: Task,
}

/// One prompt with the sample id its prediction will carry.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub id: String,
    pub prompt: String,
}

/// Batch outcome: records in input order plus issue accounting.
#[derive(Debug)]
pub struct BatchOutput {
    pub records: Vec<PredictionRecord>,
    /// Requests actually sent this run.
    pub issued: usize,
    /// Items satisfied from the resume log.
    pub skipped: usize,
}

pub struct Gateway {
    config: ProviderConfig,
    provider: Arc<dyn Provider>,
    limiter: Arc<TokenBucket>,
    retry: RetryPolicy,
    timestamps: TimestampSource,
}

impl Gateway {
    /// Build a gateway from config. Non-mock providers fail fast here
    /// if the credential environment variable is unset, before any
    /// request is attempted.
    pub fn new(config: ProviderConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let provider: Arc<dyn Provider> = match config.family() {
            ProviderFamily::Mock => Arc::new(MockProvider::deterministic()),
            family => {
                let key = std::env::var(&config.credential_env_var)
                    .map_err(|_| GatewayError::MissingCredential(config.credential_env_var.clone()))?;
                Arc::new(HttpProvider::new(family, &config, key))
            }
        };
        Ok(Self::assemble(config, provider))
    }

    /// Build a gateway around an explicit provider (scripted mocks in
    /// tests, custom adapters). No credential check.
    pub fn with_provider(config: ProviderConfig, provider: Arc<dyn Provider>) -> Result<Self, GatewayError> {
        config.validate()?;
        Ok(Self::assemble(config, provider))
    }

    fn assemble(config: ProviderConfig, provider: Arc<dyn Provider>) -> Self {
        let limiter = Arc::new(TokenBucket::new(config.requests_per_minute));
        Gateway {
            provider,
            limiter,
            retry: RetryPolicy::default(),
            timestamps: TimestampSource::System,
            config,
        }
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_timestamps(mut self, source: TimestampSource) -> Self {
        self.timestamps = source;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// One completion with retry, rate limiting, and timeout applied.
    pub async fn complete(&self, prompt: &str) -> Result<CompletionResult, GatewayError> {
        complete_with(&self.provider, &self.limiter, &self.config, self.retry, prompt).await
    }

    /// Run a prompt batch: bounded concurrency, per-item retry, resume
    /// from the log, output in input order. Individual failures become
    /// Unparsed records and the batch continues; authentication
    /// failures abort the whole batch.
    pub async fn run_batch<F>(
        &self,
        key: &RunKey,
        items: &[BatchItem],
        resume_log: &Path,
        parse: F,
    ) -> Result<BatchOutput, GatewayError>
    where
        F: Fn(&str) -> Label + Send + Sync + 'static,
    {
        let mut seen = HashSet::new();
        for item in items {
            if !seen.insert(item.id.as_str()) {
                return Err(GatewayError::InvalidConfig(format!(
                    "duplicate sample id '{}' in batch",
                    item.id
                )));
            }
        }

        // Resume: sample ids already logged under this key are not
        // re-issued, whatever their recorded outcome was.
        let mut logged: BTreeMap<String, PredictionRecord> = BTreeMap::new();
        if resume_log.exists() {
            for record in corpus::load_predictions(resume_log)? {
                if record.model_id == key.model_id
                    && record.run_id == key.run_id
                    && record.task == key.task
                {
                    logged.insert(record.sample_id.clone(), record);
                }
            }
        }

        let mut pending: Vec<(usize, BatchItem)> = Vec::new();
        for (i, item) in items.iter().enumerate() {
            if !logged.contains_key(&item.id) {
                pending.push((i, item.clone()));
            }
        }
        let issued = pending.len();
        let skipped = items.len() - issued;

        let parse = Arc::new(parse);
        let semaphore = Arc::new(Semaphore::new(self.config.max_concurrent));
        let (tx, mut rx) = mpsc::unbounded_channel::<(usize, Result<PredictionRecord, GatewayError>)>();

        let shared = Arc::new(SharedBatch {
            provider: Arc::clone(&self.provider),
            limiter: Arc::clone(&self.limiter),
            config: self.config.clone(),
            retry: self.retry,
            timestamps: self.timestamps,
        });

        let mut handles = Vec::with_capacity(pending.len());
        for (index, item) in pending {
            let semaphore = Arc::clone(&semaphore);
            let tx = tx.clone();
            let parse = Arc::clone(&parse);
            let shared = Arc::clone(&shared);
            let record_key = key.clone();
            handles.push(tokio::spawn(async move {
                let _permit = semaphore.acquire().await.expect("semaphore open");
                let outcome = shared.complete_one(&item.prompt).await;
                let record = match outcome {
                    Ok(result) => Ok(PredictionRecord {
                        sample_id: item.id.clone(),
                        model_id: record_key.model_id.clone(),
                        run_id: record_key.run_id.clone(),
                        timestamp: shared.timestamps.stamp(index as u64),
                        task: record_key.task,
                        predicted: parse(&result.text),
                        raw_response: result.text,
                        prompt_tokens: result.prompt_tokens,
                        completion_tokens: result.completion_tokens,
                        latency: result.latency,
                    }),
                    Err(err @ (GatewayError::Auth(_) | GatewayError::InvalidConfig(_))) => Err(err),
                    Err(err) => Ok(PredictionRecord {
                        sample_id: item.id.clone(),
                        model_id: record_key.model_id.clone(),
                        run_id: record_key.run_id.clone(),
                        timestamp: shared.timestamps.stamp(index as u64),
                        task: record_key.task,
                        predicted: Label::Unparsed,
                        raw_response: format!("<error: {err}>"),
                        prompt_tokens: 0,
                        completion_tokens: 0,
                        latency: 0,
                    }),
                };
                let _ = tx.send((index, record));
            }));
        }
        drop(tx);

        // Order-restoring merge: append to the resume log in input
        // order as soon as a contiguous prefix has completed.
        let mut buffer: BTreeMap<usize, PredictionRecord> = BTreeMap::new();
        let mut by_index: BTreeMap<usize, PredictionRecord> = BTreeMap::new();
        let mut next_flush = items
            .iter()
            .enumerate()
            .find(|(_, item)| !logged.contains_key(&item.id))
            .map(|(i, _)| i);
        let mut abort: Option<GatewayError> = None;
        while let Some((index, outcome)) = rx.recv().await {
            match outcome {
                Ok(record) => {
                    buffer.insert(index, record);
                    while let Some(flush_at) = next_flush {
                        match buffer.remove(&flush_at) {
                            Some(record) => {
                                corpus::append_jsonl(resume_log, &record)?;
                                by_index.insert(flush_at, record);
                                next_flush = items
                                    .iter()
                                    .enumerate()
                                    .skip(flush_at + 1)
                                    .find(|(_, item)| !logged.contains_key(&item.id))
                                    .map(|(i, _)| i);
                            }
                            None => break,
                        }
                    }
                }
                Err(err) => {
                    abort.get_or_insert(err);
                }
            }
        }
        for handle in handles {
            let _ = handle.await;
        }
        if let Some(err) = abort {
            return Err(err);
        }

        let mut records = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if let Some(r) = logged.remove(&item.id) {
                records.push(r);
            } else if let Some(r) = by_index.remove(&i) {
                records.push(r);
            } else {
                // unreachable unless a worker panicked
                return Err(GatewayError::Fatal(format!(
                    "no result produced for sample '{}'",
                    item.id
                )));
            }
        }
        Ok(BatchOutput { records, issued, skipped })
    }
}

/// State shared by batch workers.
struct SharedBatch {
    provider: Arc<dyn Provider>,
    limiter: Arc<TokenBucket>,
    config: ProviderConfig,
    retry: RetryPolicy,
    timestamps: TimestampSource,
}

impl SharedBatch {
    async fn complete_one(&self, prompt: &str) -> Result<CompletionResult, GatewayError> {
        complete_with(&self.provider, &self.limiter, &self.config, self.retry, prompt).await
    }
}

/// The retry loop behind every completion: rate-limit, call with a
/// timeout, retry transient failures with backoff, surface auth and
/// fatal errors immediately.
async fn complete_with(
    provider: &Arc<dyn Provider>,
    limiter: &TokenBucket,
    config: &ProviderConfig,
    retry: RetryPolicy,
    prompt: &str,
) -> Result<CompletionResult, GatewayError> {
    let mut attempts: u32 = 0;
    let mut attempt_log: Vec<String> = Vec::new();
    let timeout = Duration::from_secs(config.timeout);
    loop {
        attempts += 1;
        limiter.acquire().await;
        let started = std::time::Instant::now();
        let outcome = tokio::time::timeout(timeout, provider.call(prompt)).await;
        let failure = match outcome {
            Ok(Ok(reply)) => {
                let latency = reply
                    .latency_override
                    .unwrap_or_else(|| started.elapsed().as_millis() as u64);
                return Ok(CompletionResult {
                    prompt_tokens: reply
                        .prompt_tokens
                        .unwrap_or_else(|| estimate_tokens(prompt)),
                    completion_tokens: reply
                        .completion_tokens
                        .unwrap_or_else(|| estimate_tokens(&reply.text)),
                    text: reply.text,
                    latency,
                    attempts,
                });
            }
            Ok(Err(CallError::Auth(m))) => return Err(GatewayError::Auth(m)),
            Ok(Err(CallError::Fatal(m))) => return Err(GatewayError::Fatal(m)),
            Ok(Err(CallError::Transient(m))) => m,
            Err(_) => format!("timeout after {}s", config.timeout),
        };
        attempt_log.push(format!("attempt {attempts}: {failure}"));
        if attempts > config.max_retries {
            return Err(GatewayError::RetriesExhausted {
                attempts,
                last: failure,
                attempt_log,
            });
        }
        tokio::time::sleep(retry.delay(attempts)).await;
    }
}

/// Batch cost at the configured prices:
/// Σ (prompt/1000 · price_in + completion/1000 · price_out).
pub fn estimate_cost(results: &[CompletionResult], config: &ProviderConfig) -> f64 {
    results
        .iter()
        .map(|r| {
            r.prompt_tokens as f64 / 1000.0 * config.price_in
                + r.completion_tokens as f64 / 1000.0 * config.price_out
        })
        .sum()
}

/// Record a wire payload at debug level with the credential scrubbed.
pub fn log_wire(direction: &str, payload: &str, credential: &str) {
    let safe = if credential.is_empty() {
        payload.to_string()
    } else {
        payload.replace(credential, "***")
    };
    log::debug!("{direction}: {safe}");
}

/// A resume-log path for one (task, model, run) inside an output dir.
pub fn default_log_path(out_dir: &Path, key: &RunKey) -> PathBuf {
    out_dir.join(format!(
        "predictions_{}_{}_{}.jsonl",
        key.task, key.model_id, key.run_id
    ))
}
