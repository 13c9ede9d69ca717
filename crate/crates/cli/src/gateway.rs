//! Deterministic model access: a chat-completion transport with retry and
//! backoff, a tokens-per-minute admission budget, and an on-disk replay
//! cache keyed by request fingerprint.
//!
//! Cache hits return before any credential check or network activity, so a
//! fully populated cache supports offline, byte-identical reruns.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use regolith_core::prompt::{CompletionResponse, PromptRequest};

/// Raw endpoint reply before caching metadata is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportReply {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Error)]
pub enum TransportError {
    /// Worth retrying: rate limits, server errors, network failures.
    #[error("transient endpoint failure{}: {message}", status_suffix(.status))]
    Transient { status: Option<u16>, message: String },
    /// Not worth retrying: the endpoint rejected the request.
    #[error("endpoint rejected request (status {status}): {message}")]
    Rejected { status: u16, message: String },
}

fn status_suffix(status: &Option<u16>) -> String {
    status.map(|s| format!(" (status {s})")).unwrap_or_default()
}

impl TransportError {
    fn status(&self) -> Option<u16> {
        match self {
            TransportError::Transient { status, .. } => *status,
            TransportError::Rejected { status, .. } => Some(*status),
        }
    }
}

/// A synchronous chat-completion endpoint.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &PromptRequest) -> Result<TransportReply, TransportError>;
}

pub const API_BASE_ENV: &str = "REGOLITH_API_BASE";
pub const API_KEY_ENV: &str = "REGOLITH_API_KEY";
const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

/// JSON-over-HTTP chat-completion transport (single user message, no
/// system prompt). Base URL and credential come from the environment.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: String,
}

impl HttpTransport {
    pub fn from_env() -> Result<Self, GatewayError> {
        let api_key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GatewayError::Config(format!("{API_KEY_ENV} is not set")))?;
        let base_url =
            std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_API_BASE.to_owned());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(180))
            .build()
            .map_err(|err| GatewayError::Config(format!("cannot build HTTP client: {err}")))?;
        Ok(Self {
            client,
            base_url: base_url.trim_end_matches('/').to_owned(),
            api_key,
        })
    }
}

#[derive(Serialize)]
struct ChatRequestBody<'a> {
    model: &'a str,
    temperature: f64,
    messages: [ChatMessage<'a>; 1],
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponseBody {
    #[serde(default)]
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &PromptRequest) -> Result<TransportReply, TransportError> {
        let body = ChatRequestBody {
            model: &request.model_id,
            temperature: request.temperature,
            messages: [ChatMessage {
                role: "user",
                content: &request.prompt_text,
            }],
        };
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|err| TransportError::Transient {
                status: None,
                message: err.to_string(),
            })?;

        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::Transient {
                status: Some(status.as_u16()),
                message: response.text().unwrap_or_default(),
            });
        }
        if !status.is_success() {
            return Err(TransportError::Rejected {
                status: status.as_u16(),
                message: response.text().unwrap_or_default(),
            });
        }
        let parsed: ChatResponseBody =
            response.json().map_err(|err| TransportError::Rejected {
                status: status.as_u16(),
                message: format!("unparseable response body: {err}"),
            })?;
        let usage = parsed.usage.unwrap_or(ChatUsage {
            prompt_tokens: 0,
            completion_tokens: 0,
        });
        Ok(TransportReply {
            text: parsed
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .unwrap_or_default(),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
        })
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("{0}")]
    Config(String),
    #[error("endpoint failed after {attempts} attempt(s){}: {message}", status_suffix(.last_status))]
    Exhausted {
        attempts: u32,
        last_status: Option<u16>,
        message: String,
    },
    #[error("endpoint rejected request: {0}")]
    Rejected(String),
}

/// Sliding-window tokens-per-minute budget. Admission reserves an estimate
/// and blocks until the window has room; [`TokenBudget::settle`] replaces
/// the estimate with the usage the endpoint reported.
pub struct TokenBudget {
    tokens_per_minute: u64,
    epoch: Instant,
    state: Mutex<BudgetState>,
    freed: Condvar,
}

#[derive(Default)]
struct BudgetState {
    next_id: u64,
    entries: VecDeque<BudgetEntry>,
}

struct BudgetEntry {
    id: u64,
    at_ms: u64,
    tokens: u64,
}

/// Handle for one admitted reservation.
#[derive(Debug)]
pub struct Reservation {
    id: u64,
}

const WINDOW_MS: u64 = 60_000;

impl TokenBudget {
    pub fn new(tokens_per_minute: u64) -> Self {
        Self {
            tokens_per_minute,
            epoch: Instant::now(),
            state: Mutex::new(BudgetState::default()),
            freed: Condvar::new(),
        }
    }

    fn now_ms(&self) -> u64 {
        self.epoch.elapsed().as_millis() as u64
    }

    /// Blocks until `estimate` tokens fit in the current window, then
    /// records the reservation. An estimate larger than the whole budget is
    /// admitted alone (it could never fit otherwise).
    pub fn acquire(&self, estimate: u64) -> Reservation {
        let mut state = self.state.lock().unwrap();
        loop {
            let now = self.now_ms();
            match Self::try_admit(
                &mut state,
                now,
                estimate,
                self.tokens_per_minute,
            ) {
                Ok(id) => return Reservation { id },
                Err(wait_ms) => {
                    let (next, _) = self
                        .freed
                        .wait_timeout(state, Duration::from_millis(wait_ms))
                        .unwrap();
                    state = next;
                }
            }
        }
    }

    /// Non-blocking admission step: returns the reservation id, or how long
    /// to wait for the oldest window entry to expire.
    fn try_admit(
        state: &mut BudgetState,
        now_ms: u64,
        estimate: u64,
        capacity: u64,
    ) -> Result<u64, u64> {
        state
            .entries
            .retain(|e| e.at_ms + WINDOW_MS > now_ms);
        let used: u64 = state.entries.iter().map(|e| e.tokens).sum();
        let fits = used + estimate <= capacity;
        let oversized_alone = estimate > capacity && state.entries.is_empty();
        if fits || oversized_alone {
            let id = state.next_id;
            state.next_id += 1;
            state.entries.push_back(BudgetEntry {
                id,
                at_ms: now_ms,
                tokens: estimate,
            });
            return Ok(id);
        }
        let wait = state
            .entries
            .front()
            .map(|e| (e.at_ms + WINDOW_MS).saturating_sub(now_ms).max(1))
            .unwrap_or(1);
        Err(wait)
    }

    /// Replaces the reserved estimate with the actual reported usage.
    pub fn settle(&self, reservation: Reservation, actual_tokens: u64) {
        let mut state = self.state.lock().unwrap();
        if let Some(entry) = state.entries.iter_mut().find(|e| e.id == reservation.id) {
            entry.tokens = actual_tokens;
        }
        drop(state);
        self.freed.notify_all();
    }
}

/// On-disk response store, one JSON file per request fingerprint. Entries
/// carry the full request alongside the response so they can be audited and
/// diffed by hand.
pub struct ReplayCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    fingerprint: String,
    model_id: String,
    temperature: f64,
    prompt_text: String,
    response: CachedResponse,
}

#[derive(Serialize, Deserialize)]
struct CachedResponse {
    text: String,
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl ReplayCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|err| {
            GatewayError::Config(format!(
                "cannot create cache dir {}: {err}",
                dir.display()
            ))
        })?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    /// Stores a response. Each writer uses its own temp file and the final
    /// rename is atomic, so concurrent stores of one fingerprint serialize
    /// on the final name without interleaving.
    pub fn store(
        &self,
        request: &PromptRequest,
        response: &CompletionResponse,
    ) -> std::io::Result<()> {
        static WRITE_SEQ: AtomicU64 = AtomicU64::new(0);
        let entry = CacheEntry {
            fingerprint: request.fingerprint().to_owned(),
            model_id: request.model_id.clone(),
            temperature: request.temperature,
            prompt_text: request.prompt_text.clone(),
            response: CachedResponse {
                text: response.text.clone(),
                prompt_tokens: response.prompt_tokens,
                completion_tokens: response.completion_tokens,
            },
        };
        let final_path = self.entry_path(request.fingerprint());
        let tmp_path = self.dir.join(format!(
            "{}.tmp-{}-{}",
            request.fingerprint(),
            std::process::id(),
            WRITE_SEQ.fetch_add(1, Ordering::Relaxed)
        ));
        let mut file = fs::File::create(&tmp_path)?;
        file.write_all(serde_json::to_string_pretty(&entry)?.as_bytes())?;
        file.write_all(b"\n")?;
        file.sync_all()?;
        drop(file);
        fs::rename(&tmp_path, &final_path)
    }

    /// Looks up a fingerprint. A corrupt entry is treated as a miss with a
    /// warning, never a failure.
    pub fn lookup(&self, fingerprint: &str) -> Option<CompletionResponse> {
        let path = self.entry_path(fingerprint);
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => return None,
            Err(err) => {
                log::warn!("cache entry {} unreadable: {err}", path.display());
                return None;
            }
        };
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) if entry.fingerprint == fingerprint => Some(CompletionResponse {
                text: entry.response.text,
                prompt_tokens: entry.response.prompt_tokens,
                completion_tokens: entry.response.completion_tokens,
                from_cache: true,
            }),
            Ok(entry) => {
                log::warn!(
                    "cache entry {} holds fingerprint {}; treating as miss",
                    path.display(),
                    entry.fingerprint
                );
                None
            }
            Err(err) => {
                log::warn!(
                    "cache entry {} corrupt ({err}); treating as miss",
                    path.display()
                );
                None
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub backoff_factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            backoff_base: Duration::from_secs(1),
            backoff_factor: 2,
        }
    }
}

impl RetryPolicy {
    fn backoff_before(&self, attempt: u32) -> Duration {
        // attempt is 1-based; the first retry waits the base duration
        self.backoff_base * self.backoff_factor.saturating_pow(attempt - 1)
    }
}

/// Live counters for one run, reported in the manifest.
#[derive(Debug, Default)]
pub struct GatewayStats {
    pub cache_hits: AtomicU64,
    pub cache_misses: AtomicU64,
    pub network_calls: AtomicU64,
    pub attempts: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CacheStatsSnapshot {
    pub hits: u64,
    pub misses: u64,
    pub network_calls: u64,
    pub attempts: u64,
}

impl GatewayStats {
    pub fn snapshot(&self) -> CacheStatsSnapshot {
        CacheStatsSnapshot {
            hits: self.cache_hits.load(Ordering::Relaxed),
            misses: self.cache_misses.load(Ordering::Relaxed),
            network_calls: self.network_calls.load(Ordering::Relaxed),
            attempts: self.attempts.load(Ordering::Relaxed),
        }
    }
}

enum TransportSlot {
    Ready(Box<dyn ChatTransport>),
    /// Construction failed (for example, no credential); the error is
    /// surfaced only if a cache miss actually needs the network.
    Unconfigured(String),
}

/// Cached, budgeted, retrying front door to the model endpoint.
pub struct Gateway {
    transport: TransportSlot,
    cache: ReplayCache,
    budget: Option<TokenBudget>,
    retry: RetryPolicy,
    stats: GatewayStats,
    /// Completion-token allowance reserved per request before usage is known.
    completion_allowance: u64,
}

impl Gateway {
    pub fn new(
        transport: Box<dyn ChatTransport>,
        cache: ReplayCache,
        budget: Option<TokenBudget>,
        retry: RetryPolicy,
    ) -> Self {
        Self {
            transport: TransportSlot::Ready(transport),
            cache,
            budget,
            retry,
            stats: GatewayStats::default(),
            completion_allowance: 1024,
        }
    }

    /// Gateway that serves cache hits and fails misses with `error`.
    /// Lets replay-only runs work with no endpoint configured.
    pub fn unconfigured(
        error: String,
        cache: ReplayCache,
        budget: Option<TokenBudget>,
        retry: RetryPolicy,
    ) -> Self {
        Self {
            transport: TransportSlot::Unconfigured(error),
            cache,
            budget,
            retry,
            stats: GatewayStats::default(),
            completion_allowance: 1024,
        }
    }

    pub fn from_env(
        cache: ReplayCache,
        budget: Option<TokenBudget>,
        retry: RetryPolicy,
    ) -> Self {
        match HttpTransport::from_env() {
            Ok(transport) => Self::new(Box::new(transport), cache, budget, retry),
            Err(err) => Self::unconfigured(err.to_string(), cache, budget, retry),
        }
    }

    pub fn stats(&self) -> &GatewayStats {
        &self.stats
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }

    /// Resolves a request: replay-cache first, then the endpoint with
    /// exponential backoff on transient failures. Successful network
    /// responses are stored back into the cache.
    pub fn complete(&self, request: &PromptRequest) -> Result<CompletionResponse, GatewayError> {
        if let Some(hit) = self.cache.lookup(request.fingerprint()) {
            self.stats.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.stats.cache_misses.fetch_add(1, Ordering::Relaxed);

        let transport = match &self.transport {
            TransportSlot::Ready(transport) => transport.as_ref(),
            TransportSlot::Unconfigured(error) => {
                return Err(GatewayError::Config(error.clone()));
            }
        };

        // Rough 4-chars-per-token estimate plus a completion allowance,
        // reconciled against reported usage after the call.
        let estimate = (request.prompt_text.len() as u64) / 4 + self.completion_allowance;

        let mut last_error: Option<TransportError> = None;
        for attempt in 1..=self.retry.max_attempts.max(1) {
            if attempt > 1 {
                std::thread::sleep(self.retry.backoff_before(attempt - 1));
            }
            let reservation = self.budget.as_ref().map(|b| b.acquire(estimate));
            self.stats.attempts.fetch_add(1, Ordering::Relaxed);
            match transport.send(request) {
                Ok(reply) => {
                    self.stats.network_calls.fetch_add(1, Ordering::Relaxed);
                    if let (Some(budget), Some(reservation)) = (&self.budget, reservation) {
                        budget.settle(reservation, reply.prompt_tokens + reply.completion_tokens);
                    }
                    let response = CompletionResponse {
                        text: reply.text,
                        prompt_tokens: reply.prompt_tokens,
                        completion_tokens: reply.completion_tokens,
                        from_cache: false,
                    };
                    if let Err(err) = self.cache.store(request, &response) {
                        log::warn!(
                            "could not store cache entry {}: {err}",
                            request.fingerprint()
                        );
                    }
                    return Ok(response);
                }
                Err(err) => {
                    self.stats.network_calls.fetch_add(1, Ordering::Relaxed);
                    if let (Some(budget), Some(reservation)) = (&self.budget, reservation) {
                        // failed call: free the reservation
                        budget.settle(reservation, 0);
                    }
                    match err {
                        TransportError::Transient { .. } => last_error = Some(err),
                        TransportError::Rejected { .. } => {
                            return Err(GatewayError::Rejected(err.to_string()));
                        }
                    }
                }
            }
        }

        let last = last_error.expect("loop ran at least once");
        Err(GatewayError::Exhausted {
            attempts: self.retry.max_attempts.max(1),
            last_status: last.status(),
            message: last.to_string(),
        })
    }
}
