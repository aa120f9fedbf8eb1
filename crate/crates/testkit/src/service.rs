//! Session registries over scripted providers, served on ephemeral ports.

use std::sync::Arc;
use std::time::Duration;

use chrono::NaiveDateTime;

use modelassist_core::gateway::{BackoffPolicy, CompletionProvider, FakeClock, Gateway, ProviderFailure, ScriptedProvider};
use modelassist_core::prompt::{PromptKind, ShotCatalog};
use modelassist_core::recommend::{Recommender, RecommenderConfig};
use modelassist_core::session::{SessionConfig, SessionRegistry, StepClock};

pub const POOL: [&str; 10] = ["Patient", "Room", "Ward", "Nurse", "Invoice", "Bed", "Visit", "Clinic", "Drug", "Shift"];

fn fnv(text: &str, salt: u32) -> usize {
    let mut h: u64 = 0xcbf29ce484222325 ^ salt as u64;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h as usize
}

fn class_names_in(prompt: &str) -> Vec<String> {
    let last = prompt.lines().last().unwrap_or("");
    let body = last.split_once(": ").map(|(_, b)| b).unwrap_or("");
    body.split("; ")
        .filter_map(|c| c.split_once(':').map(|(n, _)| n.trim().to_string()))
        .collect()
}

/// Answers that depend only on the prompt text and sample index, so two
/// registries fed the same operations see the same responses.
pub fn answer(prompt: &str, sample: u32) -> String {
    let first = prompt.lines().next().unwrap_or("");
    let h = fnv(prompt, sample);
    let pick = |k: usize| POOL[(h / 7 + k * 3) % POOL.len()];
    if first == PromptKind::ClassSuggestion.instruction() {
        format!("[{}, {}], [{}, {}]", pick(0), pick(1), pick(2), pick(4))
    } else if first == PromptKind::AttributeSuggestion.instruction() {
        class_names_in(prompt)
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c}: [code{}, label, created at]", (h + i) % 3))
            .collect::<Vec<_>>()
            .join("; ")
    } else if first == PromptKind::AttributeType.instruction() {
        ["String", "int", "Date"][h % 3].into()
    } else if first == PromptKind::AssociationType.instruction() {
        ["association", "composition", "inheritance", "no", "aggregation"][h % 5].into()
    } else if first == PromptKind::InheritanceDirection.instruction() {
        let last = prompt.lines().last().unwrap_or("");
        last.split(',').next().unwrap_or("").trim().to_string()
    } else {
        "has".into()
    }
}

pub fn start() -> NaiveDateTime {
    NaiveDateTime::parse_from_str("2024-03-01 09:00:00", "%Y-%m-%d %H:%M:%S").unwrap()
}

pub fn registry_with(provider: Arc<dyn CompletionProvider>, repetitions: u32, seed: u64) -> Arc<SessionRegistry> {
    let gateway = Gateway::new(provider)
        .with_backoff(BackoffPolicy {
            max_attempts: 3,
            ..BackoffPolicy::default()
        })
        .with_sleeper(Arc::new(FakeClock::new()));
    let recommender = Arc::new(Recommender::new(
        Arc::new(gateway),
        Arc::new(ShotCatalog::bundled()),
        RecommenderConfig::with_repetitions(repetitions),
    ));
    let defaults = SessionConfig {
        package_name: "Clinic".into(),
        debounce: Duration::ZERO,
        seed,
        ..SessionConfig::default()
    };
    Arc::new(SessionRegistry::new(
        recommender,
        Arc::new(StepClock::new(start(), Duration::from_millis(1500))),
        defaults,
    ))
}

pub fn scripted_registry(seed: u64) -> Arc<SessionRegistry> {
    let provider = Arc::new(ScriptedProvider::new(|req, _| Ok(answer(&req.prompt, req.sample))));
    registry_with(provider, 2, seed)
}

pub fn failing_registry() -> Arc<SessionRegistry> {
    let provider = Arc::new(ScriptedProvider::new(|_, _| Err(ProviderFailure::Transient("503".into()))));
    registry_with(provider, 1, 0)
}

/// Serves the registry on an ephemeral port and returns its base URL.
pub async fn spawn(registry: Arc<SessionRegistry>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(modelassist_service::serve(listener, registry));
    format!("http://{addr}")
}
