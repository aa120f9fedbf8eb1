//! Backoff schedule, cache reuse and cache key sensitivity.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;

use modelassist_core::gateway::{
    BackoffPolicy, CacheKey, CompletionProvider, CompletionRequest, FakeClock, Gateway, LlmParams, ProviderFailure,
};
use modelassist_core::prompt::PromptKind;

use crate::gen;

/// Fails the first `failures` calls, then answers.
pub struct FailFirst {
    failures: u32,
    failure: ProviderFailure,
    pub calls: AtomicU32,
}

#[async_trait]
impl CompletionProvider for FailFirst {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderFailure> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if n < self.failures {
            Err(self.failure.clone())
        } else {
            Ok(format!("answer to {}", request.prompt.len()))
        }
    }
}

pub fn flaky(failures: u32, failure: ProviderFailure) -> Arc<FailFirst> {
    Arc::new(FailFirst {
        failures,
        failure,
        calls: AtomicU32::new(0),
    })
}

pub fn request(prompt: &str) -> CompletionRequest {
    CompletionRequest::new(prompt, LlmParams::for_kind(PromptKind::ClassSuggestion))
}

pub fn policy(base_ms: u64, factor: f64, max_ms: u64, attempts: u32) -> BackoffPolicy {
    BackoffPolicy {
        base_delay: Duration::from_millis(base_ms),
        factor,
        max_attempts: attempts,
        max_delay: Duration::from_millis(max_ms),
        jitter_fraction: 0.0,
    }
}

/// base * factor^k capped at max, in whole milliseconds.
pub fn expected_delays(base_ms: u64, factor: u64, max_ms: u64, retries: u32) -> Vec<Duration> {
    (0..retries)
        .map(|k| Duration::from_millis((base_ms * factor.pow(k)).min(max_ms)))
        .collect()
}

/// Fails `attempts - 1` times with no jitter; the fake clock must record
/// `base * factor^k` capped at `max` for each retry.
pub async fn check_backoff(base_ms: u64, factor: u64, max_ms: u64, attempts: u32) {
    let provider = flaky(attempts - 1, ProviderFailure::Transient("503".into()));
    let clock = Arc::new(FakeClock::new());
    let gw = Gateway::new(provider.clone())
        .with_backoff(policy(base_ms, factor as f64, max_ms, attempts))
        .with_sleeper(clock.clone());
    let r = gw.complete(&request("p")).await.unwrap();
    assert_eq!(r.attempts, attempts);
    assert_eq!(clock.delays(), expected_delays(base_ms, factor, max_ms, attempts - 1));
    assert_eq!(provider.calls.load(Ordering::SeqCst), attempts);
}

pub async fn check_cache_reuse() {
    let provider = flaky(0, ProviderFailure::Timeout);
    let gw = Gateway::new(provider.clone()).with_sleeper(Arc::new(FakeClock::new()));
    let first = gw.complete(&request("same")).await.unwrap();
    assert!(!first.cache_hit);
    for _ in 0..5 {
        let again = gw.complete(&request("same")).await.unwrap();
        assert!(again.cache_hit);
        assert_eq!(again.attempts, 0);
        assert_eq!(again.text, first.text);
    }
    assert_eq!(provider.calls.load(Ordering::SeqCst), 1);
}

/// Changing any one of prompt, model, temperature or max tokens changes
/// the key; an identical copy keeps it.
pub fn check_cache_key(seed: u64) {
    let mut rng = gen::rng(seed);
    let base = CompletionRequest::new(
        &gen::word(&mut rng, false),
        LlmParams {
            model_name: gen::word(&mut rng, false),
            temperature: rng.random_range(0.0..2.0),
            max_tokens: rng.random_range(1..100),
        },
    );
    let key = CacheKey::of(&base);
    assert_eq!(key, CacheKey::of(&base.clone()));
    let mut r = base.clone();
    r.prompt.push('.');
    assert_ne!(key, CacheKey::of(&r));
    let mut r = base.clone();
    r.params.model_name.push('x');
    assert_ne!(key, CacheKey::of(&r));
    let mut r = base.clone();
    r.params.temperature += 0.01;
    assert_ne!(key, CacheKey::of(&r));
    let mut r = base.clone();
    r.params.max_tokens += 1;
    assert_ne!(key, CacheKey::of(&r));
}
