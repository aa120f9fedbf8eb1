//! Class ranking against a brute-force tally of scripted responses.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use modelassist_core::gateway::{BackoffPolicy, FakeClock, Gateway, ProviderFailure, ScriptedProvider};
use modelassist_core::model::{CandidateKind, CandidatePayload, DomainModel};
use modelassist_core::prompt::ShotCatalog;
use modelassist_core::recommend::{Recommender, RecommenderConfig};

use crate::gen;

const HEADS: [&str; 8] = ["Ka", "Lo", "Mer", "No", "Pra", "Ru", "Sel", "Tam"];
const TAILS: [&str; 6] = ["ton", "vik", "dar", "bel", "sin", "gor"];

pub fn pool() -> Vec<String> {
    HEADS
        .iter()
        .flat_map(|h| TAILS.iter().map(move |t| format!("{h}{t}")))
        .collect()
}

/// One response: `None` is a provider failure, otherwise bracket groups
/// of canonical names together with how each is spelled.
struct Scripted {
    groups: Option<Vec<Vec<(String, String)>>>,
    prose: bool,
}

fn spell(rng: &mut ChaCha8Rng, name: &str) -> String {
    match rng.random_range(0..5) {
        0 => name.to_lowercase(),
        1 => format!("{name}{}", rng.random_range(0..100)),
        2 => format!("  {name} "),
        _ => name.to_string(),
    }
}

fn script(rng: &mut ChaCha8Rng, names: &[String], calls: u32) -> Vec<Scripted> {
    (0..calls)
        .map(|_| {
            if rng.random_bool(0.1) {
                return Scripted {
                    groups: None,
                    prose: false,
                };
            }
            let groups = (0..rng.random_range(0..6))
                .map(|_| {
                    let size = *[1usize, 2, 2, 2, 3].choose(rng).unwrap();
                    (0..size)
                        .map(|_| {
                            let n = names.choose(rng).unwrap().clone();
                            let s = spell(rng, &n);
                            (n, s)
                        })
                        .collect()
                })
                .collect();
            Scripted {
                groups: Some(groups),
                prose: rng.random_bool(0.2),
            }
        })
        .collect()
}

fn render(s: &Scripted) -> Result<String, ProviderFailure> {
    let Some(groups) = &s.groups else {
        return Err(ProviderFailure::Fatal("scripted failure".into()));
    };
    let body: Vec<String> = groups
        .iter()
        .map(|g| format!("[{}]", g.iter().map(|(_, s)| s.as_str()).collect::<Vec<_>>().join(", ")))
        .collect();
    let mut text = body.join(", ");
    if s.prose {
        text = format!("Here are some ideas: {text} and more");
    }
    Ok(text)
}

/// Responses mentioning each new name, counted once per response.
fn brute_force(canvas: &BTreeSet<String>, responses: &[Scripted]) -> BTreeMap<String, u32> {
    let mut tally = BTreeMap::new();
    for r in responses {
        let Some(groups) = &r.groups else { continue };
        let mut seen = BTreeSet::new();
        for g in groups {
            for (name, _) in g {
                if !canvas.contains(name) && seen.insert(name.clone()) {
                    *tally.entry(name.clone()).or_insert(0) += 1;
                }
            }
        }
    }
    tally
}

pub fn recommender(responses: Vec<String>, failures: Vec<bool>, n: u32) -> (Recommender, Arc<ScriptedProvider>) {
    let provider = Arc::new(ScriptedProvider::new(move |_, i| {
        let i = i as usize;
        if failures[i] {
            Err(ProviderFailure::Fatal("scripted failure".into()))
        } else {
            Ok(responses[i].clone())
        }
    }));
    let gateway = Gateway::new(provider.clone())
        .with_backoff(BackoffPolicy {
            max_attempts: 1,
            ..BackoffPolicy::default()
        })
        .with_sleeper(Arc::new(FakeClock::new()));
    let r = Recommender::new(
        Arc::new(gateway),
        Arc::new(ShotCatalog::bundled()),
        RecommenderConfig::with_repetitions(n),
    );
    (r, provider)
}

/// One random canvas and script: harvest tally, minimum frequency and
/// the top-20 presentation order must match the brute-force count.
pub async fn check_script(seed: u64) {
    let mut rng = gen::rng(seed);
    let mut names = pool();
    names.shuffle(&mut rng);
    let mut model = DomainModel::new("Scripted");
    for c in &names[..rng.random_range(1..5)] {
        model.add_class(c).unwrap();
    }
    let canvas: BTreeSet<String> = model.class_names().map(str::to_string).collect();
    let n = rng.random_range(1..7u32);
    let responses = script(&mut rng, &names, n);
    let texts: Vec<String> = responses.iter().map(|r| render(r).unwrap_or_default()).collect();
    let failures: Vec<bool> = responses.iter().map(|r| r.groups.is_none()).collect();
    let (rec, provider) = recommender(texts, failures.clone(), n);

    let mut order_rng = gen::rng(seed ^ 0xABCD);
    let outcome = rec.suggest_classes(&model, None, &mut order_rng).await;
    assert_eq!(provider.calls(), n, "seed {seed}: one call per repetition");
    if failures.iter().all(|f| *f) {
        assert!(outcome.is_err(), "seed {seed}: all calls failed");
        return;
    }
    let harvest = outcome.unwrap();

    let min_frequency = if n >= 3 { 2 } else { 1 };
    let expected: BTreeMap<String, u32> = brute_force(&canvas, &responses)
        .into_iter()
        .filter(|(_, c)| *c >= min_frequency)
        .collect();
    let got: BTreeMap<String, u32> = harvest
        .items
        .iter()
        .map(|(p, c)| (p.key().to_string(), *c))
        .collect();
    assert_eq!(got, expected, "seed {seed}: harvest tally");

    harvest.apply(&mut model);
    let listed = model.candidates().list(CandidateKind::Class, 20);
    let mut ranked: Vec<(String, u32)> = expected.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(20);
    let shown: Vec<(String, u32)> = listed
        .iter()
        .map(|c| match &c.payload {
            CandidatePayload::Class(s) => (s.name.clone(), c.confidence),
            other => panic!("unexpected {other:?}"),
        })
        .collect();
    assert_eq!(shown, ranked, "seed {seed}: presentation order");
}

