//! Completion-provider abstraction with a response cache and retry backoff.

mod http;
mod mock;

use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use lru::LruCache;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpProvider, HttpProviderConfig};
pub use mock::{fixture_record, sha256_hex, MockFixtureRecord, MockProvider, ScriptedProvider};

use crate::prompt::PromptKind;

pub const DEFAULT_MODEL: &str = "text-davinci-002";
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_CACHE_CAPACITY: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LlmParams {
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmParams {
    /// Generation parameters used for each prompt kind.
    pub fn for_kind(kind: PromptKind) -> Self {
        let max_tokens = match kind {
            PromptKind::ClassSuggestion => 8,
            PromptKind::AttributeSuggestion => 40,
            PromptKind::AttributeType
            | PromptKind::AssociationName
            | PromptKind::AssociationType
            | PromptKind::InheritanceDirection => 2,
        };
        LlmParams {
            model_name: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.model_name.trim().is_empty() {
            return Err(GatewayError::InvalidParams("model name is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) || self.temperature.is_nan() {
            return Err(GatewayError::InvalidParams(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidParams("max tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub params: LlmParams,
    /// Index among repeated samples of the same prompt. Each index is
    /// cached on its own, so sample 1 is a fresh draw even when sample 0
    /// is cached.
    pub sample: u32,
}

impl CompletionRequest {
    pub fn new(prompt: &str, params: LlmParams) -> Self {
        CompletionRequest {
            prompt: prompt.to_string(),
            params,
            sample: 0,
        }
    }

    pub fn with_sample(mut self, sample: u32) -> Self {
        self.sample = sample;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResponse {
    /// Raw completion; empty when the provider returned nothing.
    pub text: String,
    pub latency: Duration,
    pub cache_hit: bool,
    /// Provider calls made for this response (0 on a cache hit).
    pub attempts: u32,
}

/// Failure reported by a provider for a single call.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderFailure {
    /// Worth retrying: rate limits, 5xx, connection errors.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider call timed out")]
    Timeout,
    #[error("authentication failed: {0}")]
    Auth(String),
    /// Request rejected for good; retrying will not help.
    #[error("request rejected: {0}")]
    Fatal(String),
    #[error("no mock response for prompt (nearest recorded prompt: {nearest:?})")]
    MockMiss { nearest: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("provider failed after {attempts} attempt(s): {message}")]
    Provider { attempts: u32, message: String },
    #[error("provider timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("no mock response for prompt (nearest recorded prompt: {nearest:?})")]
    MockMiss { nearest: Option<String> },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
}

impl GatewayError {
    pub fn attempts(&self) -> u32 {
        match self {
            GatewayError::Provider { attempts, .. } | GatewayError::Timeout { attempts } => *attempts,
            GatewayError::Auth(_) | GatewayError::MockMiss { .. } => 1,
            GatewayError::InvalidParams(_) => 0,
        }
    }
}

#[async_trait]
pub trait CompletionProvider: Send + Sync {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderFailure>;
}

/// Waits between retries. Tests substitute [`FakeClock`].
#[async_trait]
pub trait Sleeper: Send + Sync {
    async fn sleep(&self, delay: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct TokioSleeper;

#[async_trait]
impl Sleeper for TokioSleeper {
    async fn sleep(&self, delay: Duration) {
        tokio::time::sleep(delay).await;
    }
}

/// Virtual clock: sleeping returns immediately and only advances time.
#[derive(Debug, Default)]
pub struct FakeClock {
    slept: Mutex<Vec<Duration>>,
}

impl FakeClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn delays(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }

    pub fn elapsed(&self) -> Duration {
        self.slept.lock().unwrap().iter().sum()
    }
}

#[async_trait]
impl Sleeper for FakeClock {
    async fn sleep(&self, delay: Duration) {
        self.slept.lock().unwrap().push(delay);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BackoffPolicy {
    pub base_delay: Duration,
    pub factor: f64,
    pub max_attempts: u32,
    pub max_delay: Duration,
    pub jitter_fraction: f64,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        BackoffPolicy {
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            max_attempts: 5,
            max_delay: Duration::from_secs(32),
            jitter_fraction: 0.1,
        }
    }
}

impl BackoffPolicy {
    /// Delay before retry number `k + 1` (k = 0 after the first failure),
    /// without jitter.
    pub fn nominal_delay(&self, k: u32) -> Duration {
        let secs = self.base_delay.as_secs_f64() * self.factor.powi(k as i32);
        let capped = secs.min(self.max_delay.as_secs_f64());
        Duration::from_secs_f64(capped.max(0.0))
    }

    /// Nominal delay scaled by a uniform factor in `1 ± jitter_fraction`.
    pub fn delay<R: Rng>(&self, k: u32, rng: &mut R) -> Duration {
        let nominal = self.nominal_delay(k);
        if self.jitter_fraction <= 0.0 {
            return nominal;
        }
        let j = self.jitter_fraction.min(1.0);
        let scale = 1.0 + rng.random_range(-j..=j);
        Duration::from_secs_f64(nominal.as_secs_f64() * scale)
    }
}

/// Cache key: every field that influences the completion.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    prompt: String,
    model_name: String,
    temperature_bits: u64,
    max_tokens: u32,
}

impl CacheKey {
    pub fn of(request: &CompletionRequest) -> Self {
        CacheKey {
            prompt: request.prompt.clone(),
            model_name: request.params.model_name.clone(),
            temperature_bits: request.params.temperature.to_bits(),
            max_tokens: request.params.max_tokens,
        }
    }
}

/// Bounded least-recently-used map from request to the completion texts
/// drawn for it, one slot per sample index.
pub struct PromptCache {
    inner: Mutex<LruCache<CacheKey, Vec<Option<String>>>>,
}

impl PromptCache {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("positive");
        PromptCache {
            inner: Mutex::new(LruCache::new(cap)),
        }
    }

    pub fn get(&self, key: &CacheKey, sample: u32) -> Option<String> {
        let mut inner = self.inner.lock().unwrap();
        inner.get(key)?.get(sample as usize).cloned().flatten()
    }

    pub fn insert(&self, key: CacheKey, sample: u32, text: String) {
        let mut inner = self.inner.lock().unwrap();
        let slots = inner.get_or_insert_mut(key, Vec::new);
        let i = sample as usize;
        if slots.len() <= i {
            slots.resize(i + 1, None);
        }
        slots[i] = Some(text);
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.inner.lock().unwrap().cap().get()
    }
}

/// Shared entry point for all completions. Safe to use from many tasks at
/// once; identical concurrent requests may each reach the provider.
pub struct Gateway {
    provider: Arc<dyn CompletionProvider>,
    cache: PromptCache,
    backoff: BackoffPolicy,
    sleeper: Arc<dyn Sleeper>,
    jitter_rng: Mutex<ChaCha8Rng>,
    call_timeout: Option<Duration>,
    model_name: Option<String>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn CompletionProvider>) -> Self {
        Gateway {
            provider,
            cache: PromptCache::new(DEFAULT_CACHE_CAPACITY),
            backoff: BackoffPolicy::default(),
            sleeper: Arc::new(TokioSleeper),
            jitter_rng: Mutex::new(ChaCha8Rng::seed_from_u64(0)),
            call_timeout: None,
            model_name: None,
        }
    }

    /// Sends every request with this model name instead of the one in
    /// its parameters.
    pub fn with_model_name(mut self, name: &str) -> Self {
        self.model_name = Some(name.to_string());
        self
    }

    pub fn with_backoff(mut self, backoff: BackoffPolicy) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_cache_capacity(mut self, capacity: usize) -> Self {
        self.cache = PromptCache::new(capacity);
        self
    }

    pub fn with_call_timeout(mut self, timeout: Duration) -> Self {
        self.call_timeout = Some(timeout);
        self
    }

    pub fn with_jitter_seed(self, seed: u64) -> Self {
        *self.jitter_rng.lock().unwrap() = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn cache(&self) -> &PromptCache {
        &self.cache
    }

    pub fn backoff(&self) -> &BackoffPolicy {
        &self.backoff
    }

    async fn call_once(&self, request: &CompletionRequest) -> Result<String, ProviderFailure> {
        match self.call_timeout {
            Some(limit) => tokio::time::timeout(limit, self.provider.complete(request))
                .await
                .unwrap_or(Err(ProviderFailure::Timeout)),
            None => self.provider.complete(request).await,
        }
    }

    /// Cache first; on a miss call the provider, retrying transient
    /// failures with exponential backoff.
    pub async fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, GatewayError> {
        let renamed;
        let request = match &self.model_name {
            Some(name) if *name != request.params.model_name => {
                let mut r = request.clone();
                r.params.model_name = name.clone();
                renamed = r;
                &renamed
            }
            _ => request,
        };
        request.params.validate()?;
        let started = Instant::now();
        let key = CacheKey::of(request);
        if let Some(text) = self.cache.get(&key, request.sample) {
            return Ok(CompletionResponse {
                text,
                latency: started.elapsed(),
                cache_hit: true,
                attempts: 0,
            });
        }

        let max_attempts = self.backoff.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let failure = match self.call_once(request).await {
                Ok(text) => {
                    self.cache.insert(key, request.sample, text.clone());
                    return Ok(CompletionResponse {
                        text,
                        latency: started.elapsed(),
                        cache_hit: false,
                        attempts: attempt,
                    });
                }
                Err(ProviderFailure::Auth(msg)) => return Err(GatewayError::Auth(msg)),
                Err(ProviderFailure::MockMiss { nearest }) => {
                    return Err(GatewayError::MockMiss { nearest })
                }
                Err(ProviderFailure::Fatal(message)) => {
                    return Err(GatewayError::Provider {
                        attempts: attempt,
                        message,
                    })
                }
                Err(other) => other,
            };
            if attempt >= max_attempts {
                return Err(match failure {
                    ProviderFailure::Timeout => GatewayError::Timeout { attempts: attempt },
                    other => GatewayError::Provider {
                        attempts: attempt,
                        message: other.to_string(),
                    },
                });
            }
            let delay = {
                let mut rng = self.jitter_rng.lock().unwrap();
                self.backoff.delay(attempt - 1, &mut *rng)
            };
            tracing::debug!(attempt, ?delay, %failure, "retrying completion");
            self.sleeper.sleep(delay).await;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
        failure: ProviderFailure,
    }

    #[async_trait]
    impl CompletionProvider for Flaky {
        async fn complete(&self, _: &CompletionRequest) -> Result<String, ProviderFailure> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(self.failure.clone())
            } else {
                Ok("ok".into())
            }
        }
    }

    fn request() -> CompletionRequest {
        CompletionRequest::new("Generate attribute type:\nage =>", LlmParams::for_kind(PromptKind::AttributeType))
    }

    fn no_jitter() -> BackoffPolicy {
        BackoffPolicy {
            jitter_fraction: 0.0,
            ..BackoffPolicy::default()
        }
    }

    #[test]
    fn table_defaults() {
        let p = LlmParams::for_kind(PromptKind::ClassSuggestion);
        assert_eq!((p.temperature, p.max_tokens), (0.7, 8));
        assert_eq!(LlmParams::for_kind(PromptKind::AttributeSuggestion).max_tokens, 40);
        for k in [
            PromptKind::AttributeType,
            PromptKind::AssociationName,
            PromptKind::AssociationType,
            PromptKind::InheritanceDirection,
        ] {
            assert_eq!(LlmParams::for_kind(k).max_tokens, 2);
        }
    }

    #[test]
    fn nominal_delays_cap() {
        let b = no_jitter();
        let secs: Vec<f64> = (0..8).map(|k| b.nominal_delay(k).as_secs_f64()).collect();
        assert_eq!(secs, [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 32.0, 32.0]);
    }

    #[test]
    fn jitter_stays_in_band() {
        let b = BackoffPolicy::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..6 {
            let d = b.delay(k, &mut rng).as_secs_f64();
            let n = b.nominal_delay(k).as_secs_f64();
            assert!(d >= n * 0.9 - 1e-9 && d <= n * 1.1 + 1e-9);
        }
    }

    #[tokio::test]
    async fn auth_is_terminal() {
        let provider = Arc::new(Flaky {
            failures: 10,
            calls: AtomicU32::new(0),
            failure: ProviderFailure::Auth("bad key".into()),
        });
        let clock = Arc::new(FakeClock::new());
        let gw = Gateway::new(provider.clone()).with_sleeper(clock.clone());
        let err = gw.complete(&request()).await.unwrap_err();
        assert_eq!(err, GatewayError::Auth("bad key".into()));
        assert_eq!(provider.calls.load(Ordering::SeqCst), 1);
        assert!(clock.delays().is_empty());
    }

    #[tokio::test]
    async fn timeouts_surface_after_retries() {
        let provider = Arc::new(Flaky {
            failures: 10,
            calls: AtomicU32::new(0),
            failure: ProviderFailure::Timeout,
        });
        let gw = Gateway::new(provider)
            .with_backoff(no_jitter())
            .with_sleeper(Arc::new(FakeClock::new()));
        assert_eq!(
            gw.complete(&request()).await.unwrap_err(),
            GatewayError::Timeout { attempts: 5 }
        );
    }

    #[tokio::test]
    async fn invalid_params_rejected_before_calling() {
        let provider = Arc::new(Flaky {
            failures: 0,
            calls: AtomicU32::new(0),
            failure: ProviderFailure::Timeout,
        });
        let gw = Gateway::new(provider.clone());
        let mut req = request();
        req.params.temperature = 2.5;
        assert!(matches!(
            gw.complete(&req).await,
            Err(GatewayError::InvalidParams(_))
        ));
        assert_eq!(provider.calls.load(Ordering::SeqCst), 0);
    }

    #[tokio::test]
    async fn lru_evicts_oldest() {
        let provider = Arc::new(Flaky {
            failures: 0,
            calls: AtomicU32::new(0),
            failure: ProviderFailure::Timeout,
        });
        let gw = Gateway::new(provider.clone()).with_cache_capacity(2);
        let mk = |p: &str| CompletionRequest::new(p, LlmParams::for_kind(PromptKind::AttributeType));
        gw.complete(&mk("a")).await.unwrap();
        gw.complete(&mk("b")).await.unwrap();
        gw.complete(&mk("c")).await.unwrap();
        assert_eq!(gw.cache().len(), 2);
        assert!(!gw.complete(&mk("a")).await.unwrap().cache_hit);
        assert!(gw.complete(&mk("c")).await.unwrap().cache_hit);
        assert_eq!(provider.calls.load(Ordering::SeqCst), 4);
    }

    #[tokio::test]
    async fn samples_are_cached_separately() {
        let provider = Arc::new(Flaky {
            failures: 0,
            calls: AtomicU32::new(0),
            failure: ProviderFailure::Timeout,
        });
        let gw = Gateway::new(provider.clone());
        for k in [0, 1, 2, 0, 1, 2] {
            gw.complete(&request().with_sample(k)).await.unwrap();
        }
        assert_eq!(provider.calls.load(Ordering::SeqCst), 3);
        assert_eq!(gw.cache().len(), 1);
    }

    #[tokio::test]
    async fn model_override_reaches_provider() {
        let provider = Arc::new(ScriptedProvider::new(|req, _| Ok(req.params.model_name.clone())));
        let gw = Gateway::new(provider).with_model_name("local-7b");
        assert_eq!(gw.complete(&request()).await.unwrap().text, "local-7b");
    }
}
