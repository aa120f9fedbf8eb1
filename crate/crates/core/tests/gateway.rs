use std::path::PathBuf;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;
use tokio::io::{AsyncReadExt, AsyncWriteExt};

use modelassist_core::gateway::{
    BackoffPolicy, CacheKey, CompletionProvider, CompletionRequest, FakeClock, Gateway, GatewayError,
    HttpProvider, HttpProviderConfig, LlmParams, MockProvider, ProviderFailure,
};
use modelassist_testkit::gateway::{expected_delays, flaky, policy, request};

#[tokio::test]
async fn retry_delays_follow_capped_geometric_series() {
    let provider = flaky(6, ProviderFailure::Transient("503".into()));
    let clock = Arc::new(FakeClock::new());
    let gw = Gateway::new(provider.clone())
        .with_backoff(policy(100, 2.0, 1000, 7))
        .with_sleeper(clock.clone());
    let r = gw.complete(&request("p")).await.unwrap();
    assert_eq!(r.attempts, 7);
    assert_eq!(clock.delays(), expected_delays(100, 2, 1000, 6));
    assert_eq!(clock.elapsed(), Duration::from_millis(100 + 200 + 400 + 800 + 1000 + 1000));
}

#[tokio::test]
async fn exhausted_retries_report_attempts() {
    let provider = flaky(u32::MAX, ProviderFailure::Timeout);
    let clock = Arc::new(FakeClock::new());
    let gw = Gateway::new(provider.clone())
        .with_backoff(policy(50, 3.0, 10_000, 4))
        .with_sleeper(clock.clone());
    assert_eq!(gw.complete(&request("p")).await, Err(GatewayError::Timeout { attempts: 4 }));
    assert_eq!(clock.delays(), expected_delays(50, 3, 10_000, 3));
    assert_eq!(provider.calls.load(Ordering::SeqCst), 4);
}

#[tokio::test]
async fn auth_and_fatal_are_not_retried() {
    for failure in [ProviderFailure::Auth("bad key".into()), ProviderFailure::Fatal("400".into())] {
        let provider = flaky(u32::MAX, failure);
        let clock = Arc::new(FakeClock::new());
        let gw = Gateway::new(provider.clone()).with_sleeper(clock.clone());
        assert!(gw.complete(&request("p")).await.is_err());
        assert_eq!(provider.calls.load(Ordering::SeqCst), 1);
        assert!(clock.delays().is_empty());
    }
}

#[tokio::test]
async fn repeated_request_makes_no_extra_call() {
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

#[tokio::test]
async fn invalid_params_never_reach_provider() {
    let provider = flaky(0, ProviderFailure::Timeout);
    let gw = Gateway::new(provider.clone());
    let mut r = request("p");
    r.params.temperature = 3.5;
    assert!(matches!(gw.complete(&r).await, Err(GatewayError::InvalidParams(_))));
    r.params.temperature = 0.7;
    r.params.max_tokens = 0;
    assert!(matches!(gw.complete(&r).await, Err(GatewayError::InvalidParams(_))));
    assert_eq!(provider.calls.load(Ordering::SeqCst), 0);
}

proptest! {
    #[test]
    fn cache_key_sees_every_field(
        prompt in ".{0,40}",
        other in ".{0,40}",
        model in "[a-z0-9-]{1,12}",
        t in 0.0f64..2.0,
        u in 0.0f64..2.0,
        max in 1u32..100,
        max2 in 1u32..100,
    ) {
        let base = CompletionRequest::new(&prompt, LlmParams { model_name: model.clone(), temperature: t, max_tokens: max });
        let key = CacheKey::of(&base);
        prop_assert_eq!(&key, &CacheKey::of(&base.clone()));

        let mut r = base.clone();
        r.prompt = other.clone();
        prop_assert_eq!(key == CacheKey::of(&r), prompt == other);

        let mut r = base.clone();
        r.params.model_name = format!("{model}x");
        prop_assert_ne!(&key, &CacheKey::of(&r));

        let mut r = base.clone();
        r.params.temperature = u;
        prop_assert_eq!(key == CacheKey::of(&r), t == u);

        let mut r = base.clone();
        r.params.max_tokens = max2;
        prop_assert_eq!(key == CacheKey::of(&r), max == max2);
    }

    #[test]
    fn nominal_delays_are_capped_and_monotone(base in 1u64..5000, factor in 1.0f64..4.0, cap in 1u64..60_000) {
        let p = BackoffPolicy {
            base_delay: Duration::from_millis(base),
            factor,
            max_attempts: 10,
            max_delay: Duration::from_millis(cap),
            jitter_fraction: 0.0,
        };
        let mut previous = Duration::ZERO;
        for k in 0..10 {
            let d = p.nominal_delay(k);
            prop_assert!(d <= Duration::from_millis(cap));
            prop_assert!(d >= previous);
            previous = d;
        }
    }

    #[test]
    fn jitter_stays_in_band(seed in any::<u64>(), k in 0u32..6) {
        use rand::SeedableRng;
        let p = BackoffPolicy { jitter_fraction: 0.25, ..BackoffPolicy::default() };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nominal = p.nominal_delay(k).as_secs_f64();
        let d = p.delay(k, &mut rng).as_secs_f64();
        prop_assert!(d >= nominal * 0.75 - 1e-9 && d <= nominal * 1.25 + 1e-9);
    }
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/hospital.mock.json")
}

#[tokio::test]
async fn mock_fixture_answers_and_reports_misses() {
    let mock = Arc::new(MockProvider::from_file(&fixture_path()).unwrap());
    assert!(!mock.is_empty());
    let gw = Gateway::new(mock.clone());
    let hit = request("Select the  super class  in this UML inheritance relationship:");
    let miss = gw.complete(&hit).await.unwrap_err();
    let GatewayError::MockMiss { nearest: Some(nearest) } = miss else {
        panic!("expected a miss with a hint, got {miss:?}");
    };
    assert!(nearest.starts_with("Select the"));
    assert!(MockProvider::from_json(r#"[{"promptSha256":"00","promptText":"a","responseText":"b"}]"#).is_err());
}

/// Minimal one-shot HTTP server answering each connection with `reply`.
async fn serve(reply: &'static str) -> (String, tokio::task::JoinHandle<Vec<String>>) {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = tokio::spawn(async move {
        let mut seen = Vec::new();
        while let Ok(Ok((mut socket, _))) =
            tokio::time::timeout(Duration::from_millis(500), listener.accept()).await
        {
            let mut buf = vec![0u8; 16 * 1024];
            let mut read = 0;
            loop {
                let n = socket.read(&mut buf[read..]).await.unwrap();
                read += n;
                let text = String::from_utf8_lossy(&buf[..read]).to_string();
                if let Some(split) = text.find("\r\n\r\n") {
                    let len: usize = text
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
                        .unwrap_or(0);
                    if read >= split + 4 + len || n == 0 {
                        seen.push(text);
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            socket.write_all(reply.as_bytes()).await.unwrap();
            socket.shutdown().await.ok();
        }
        seen
    });
    (format!("http://{addr}/v1"), handle)
}

fn http(base_url: String) -> HttpProvider {
    HttpProvider::new(HttpProviderConfig {
        base_url,
        api_key: Some("secret".into()),
        timeout: Duration::from_secs(2),
    })
    .unwrap()
}

#[tokio::test]
async fn http_provider_reads_choices() {
    let body = r#"{"choices":[{"text":" [Patient, Room]"}]}"#;
    let reply: &'static str = Box::leak(
        format!("HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}", body.len())
            .into_boxed_str(),
    );
    let (url, server) = serve(reply).await;
    let text = http(url).complete(&request("Generate related concepts:")).await.unwrap();
    assert_eq!(text, " [Patient, Room]");
    let seen = server.await.unwrap();
    assert!(seen[0].starts_with("POST /v1/completions"));
    assert!(seen[0].to_ascii_lowercase().contains("authorization: bearer secret"));
    assert!(seen[0].contains("\"max_tokens\":8"));
}

#[tokio::test]
async fn http_status_codes_map_to_failures() {
    for (status, check) in [
        ("401 Unauthorized", (|f: &ProviderFailure| matches!(f, ProviderFailure::Auth(_))) as fn(&ProviderFailure) -> bool),
        ("429 Too Many Requests", |f| matches!(f, ProviderFailure::Transient(_))),
        ("503 Service Unavailable", |f| matches!(f, ProviderFailure::Transient(_))),
        ("400 Bad Request", |f| matches!(f, ProviderFailure::Fatal(_))),
    ] {
        let reply: &'static str =
            Box::leak(format!("HTTP/1.1 {status}\r\ncontent-length: 0\r\nconnection: close\r\n\r\n").into_boxed_str());
        let (url, _server) = serve(reply).await;
        let failure = http(url).complete(&request("p")).await.unwrap_err();
        assert!(check(&failure), "{status}: {failure:?}");
    }
}
