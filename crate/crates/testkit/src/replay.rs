//! Scripted sessions, their logs and replay.

use std::sync::Arc;
use std::time::Duration;

use chrono::NaiveDateTime;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use modelassist_core::gateway::{Gateway, ScriptedProvider};
use modelassist_core::logging::{read_log, render_log, replay, LogRecord, HEADER};
use modelassist_core::metrics::{acceptance_rate, contribution_rate};
use modelassist_core::model::{CandidateKind, DomainModel};
use modelassist_core::prompt::{PromptKind, ShotCatalog};
use modelassist_core::recommend::{Recommender, RecommenderConfig};
use modelassist_core::session::{EditOp, Session, SessionConfig, StepClock, SuggestionMode};

use crate::gen;

const MODES: [&str; 4] = ["none", "auto", "request", "end"];
const OPS: [&str; 6] = ["create-class", "accept-class", "suggestions", "dismiss", "task-start", "delete-attribute:error"];

pub fn start() -> NaiveDateTime {
    NaiveDateTime::parse_from_str("2024-03-01 09:00:00", "%Y-%m-%d %H:%M:%S").unwrap()
}

pub fn random_records(seed: u64) -> Vec<LogRecord> {
    let mut rng = gen::rng(seed);
    let mut t = start();
    (0..rng.random_range(0..6))
        .map(|i| {
            let mut m = gen::random_model(seed.wrapping_add(i));
            let first = m.class_names().next().map(str::to_string);
            if let Some(c) = first {
                let _ = m.add_attribute(&c, "rooms number", "int");
            }
            gen::add_random_candidates(&mut m, seed.wrapping_mul(31).wrapping_add(i));
            t += chrono::Duration::milliseconds(rng.random_range(0..90_000));
            LogRecord::capture(t, MODES.choose(&mut rng).unwrap(), OPS.choose(&mut rng).unwrap(), &m, 20)
        })
        .collect()
}

const POOL: [&str; 12] = [
    "Patient", "Room", "Ward", "Nurse", "Invoice", "Bed", "Visit", "Clinic", "Drug", "Shift", "Bill", "Lab",
];

fn class_names_in(prompt: &str) -> Vec<String> {
    let last = prompt.lines().last().unwrap_or("");
    let body = last.split_once(": ").map(|(_, b)| b).unwrap_or("");
    body.split("; ")
        .filter_map(|c| c.split_once(':').map(|(n, _)| n.trim().to_string()))
        .collect()
}

/// Deterministic answers that vary with the call index.
pub fn answer(prompt: &str, call: u32) -> String {
    let first = prompt.lines().next().unwrap_or("");
    let pick = |k: u32| POOL[((call.wrapping_mul(7) + k) as usize) % POOL.len()];
    if first == PromptKind::ClassSuggestion.instruction() {
        format!("[{}, {}], [{}, {}]", pick(0), pick(1), pick(2), pick(5))
    } else if first == PromptKind::AttributeSuggestion.instruction() {
        class_names_in(prompt)
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c}: [code{i}, label, created at]"))
            .collect::<Vec<_>>()
            .join("; ")
    } else if first == PromptKind::AttributeType.instruction() {
        ["String", "int", "Date"][call as usize % 3].into()
    } else if first == PromptKind::AssociationType.instruction() {
        ["association", "composition", "inheritance", "no", "aggregation"][call as usize % 5].into()
    } else if first == PromptKind::InheritanceDirection.instruction() {
        let last = prompt.lines().last().unwrap_or("");
        last.split(',').next().unwrap_or("").trim().to_string()
    } else {
        "has".into()
    }
}

pub fn session(seed: u64, mode: SuggestionMode, log_dir: Option<std::path::PathBuf>) -> Arc<Session> {
    let provider = Arc::new(ScriptedProvider::new(|req, call| Ok(answer(&req.prompt, call))));
    let recommender = Arc::new(Recommender::new(
        Arc::new(Gateway::new(provider)),
        Arc::new(ShotCatalog::bundled()),
        RecommenderConfig::with_repetitions(2),
    ));
    let config = SessionConfig {
        package_name: "Clinic".into(),
        mode,
        debounce: Duration::ZERO,
        seed,
        log_dir,
        ..SessionConfig::default()
    };
    let clock = StepClock::new(start(), Duration::from_millis(1500));
    Session::new(&format!("run{seed}"), DomainModel::new("Clinic"), config, recommender, Arc::new(clock)).unwrap()
}

pub fn random_op(rng: &mut ChaCha8Rng, model: &DomainModel) -> EditOp {
    let classes: Vec<String> = model.class_names().map(str::to_string).collect();
    let any_class = |rng: &mut ChaCha8Rng| {
        classes
            .choose(rng)
            .cloned()
            .unwrap_or_else(|| POOL.choose(rng).unwrap().to_string())
    };
    let candidate = |rng: &mut ChaCha8Rng, kind: CandidateKind| {
        model
            .candidates()
            .list(kind, 20)
            .choose(rng)
            .map(|c| c.id.clone())
            .unwrap_or_else(|| "c999".into())
    };
    match rng.random_range(0..11) {
        0 | 1 => EditOp::CreateClass {
            name: POOL.choose(rng).unwrap().to_string(),
        },
        2 => EditOp::DeleteClass { name: any_class(rng) },
        3 => EditOp::CreateAttribute {
            class: any_class(rng),
            name: ["name", "price", "code"].choose(rng).unwrap().to_string(),
            type_name: "String".into(),
        },
        4 => EditOp::CreateAssociation {
            source: any_class(rng),
            target: any_class(rng),
            association_kind: *gen::KINDS.choose(rng).unwrap(),
            name: None,
        },
        5 => EditOp::AcceptClass {
            candidate_id: candidate(rng, CandidateKind::Class),
        },
        6 => EditOp::AcceptAttribute {
            candidate_id: candidate(rng, CandidateKind::Attribute),
        },
        7 => EditOp::AcceptAssociation {
            candidate_id: candidate(rng, CandidateKind::Association),
        },
        8 => EditOp::Dismiss {
            candidate_id: candidate(rng, CandidateKind::Class),
        },
        9 => EditOp::DeleteAttribute {
            class: any_class(rng),
            name: "name".into(),
        },
        _ => EditOp::RequestSuggestions { filter: None },
    }
}

pub async fn scripted_run(seed: u64, log_dir: Option<std::path::PathBuf>) -> Arc<Session> {
    let s = session(seed, SuggestionMode::OnRequest, log_dir);
    let mut rng = gen::rng(seed);
    s.apply_edit(EditOp::TaskStart).await.unwrap();
    for _ in 0..rng.random_range(5..40) {
        let op = random_op(&mut rng, &s.model());
        let _ = s.apply_edit(op).await;
    }
    s.apply_edit(EditOp::TaskEnd).await.unwrap();
    s
}

/// Rendering random records and reading them back is the identity.
pub fn check_records(seed: u64) {
    let records = random_records(seed);
    let text = render_log(&records);
    assert!(text.starts_with(HEADER));
    let back = read_log(&text).unwrap();
    assert_eq!(back, records, "seed {seed}");
    assert_eq!(render_log(&back), text, "seed {seed}");
}

/// Replaying a scripted session's log rebuilds its final model.
pub async fn check_replay(seed: u64) {
    let s = scripted_run(seed, None).await;
    let log = s.log();
    let rebuilt = replay(&log, "Clinic").unwrap();
    assert_eq!(rebuilt, s.model().without_candidates(), "seed {seed}");
    assert_eq!(read_log(&render_log(&log)).unwrap(), log, "seed {seed}");
    let acceptance = acceptance_rate(&log);
    let contribution = contribution_rate(&rebuilt, &log).unwrap();
    assert!((0.0..=1.0).contains(&acceptance.value), "seed {seed}: {acceptance:?}");
    assert!((0.0..=1.0).contains(&contribution.value), "seed {seed}: {contribution:?}");
    assert!(contribution.numerator <= acceptance.numerator, "seed {seed}");
}
