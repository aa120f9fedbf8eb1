//! Random operation sequences sent over HTTP and applied directly to a
//! second registry, compared step by step.

use std::sync::Arc;
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

use modelassist_core::logging::render_log;
use modelassist_core::model::{AssociationKind, CandidateKind, DomainModel};
use modelassist_core::session::{EditOp, Session, SessionError, SuggestionMode};
use modelassist_core::text::{parse_model, to_interchange};
use modelassist_service::ApiError;

use crate::service;

#[derive(Debug, Clone)]
enum Step {
    Edit(EditOp),
    Accept(String),
    Dismiss(String),
    Mode(String),
    Finalize,
}

const NAMES: [&str; 6] = ["Patient", "Room", "Ward", "Nurse", "Bed", "ward"];
const MODES: [&str; 5] = ["none", "request", "auto", "end", "fast"];
const KINDS: [AssociationKind; 3] = [AssociationKind::Association, AssociationKind::Aggregation, AssociationKind::Inheritance];

fn random_step(rng: &mut ChaCha8Rng, model: &DomainModel) -> Step {
    let classes: Vec<String> = model.class_names().map(str::to_string).collect();
    let class = |rng: &mut ChaCha8Rng| classes.choose(rng).cloned().unwrap_or_else(|| "Ghost".into());
    let candidate = |rng: &mut ChaCha8Rng| {
        let all: Vec<String> = model.candidates().iter().map(|c| c.id.clone()).collect();
        if rng.random_bool(0.1) {
            "c9999".to_string()
        } else {
            all.choose(rng).cloned().unwrap_or_else(|| "c1".into())
        }
    };
    match rng.random_range(0..14) {
        0 | 1 => Step::Edit(EditOp::CreateClass {
            name: NAMES.choose(rng).unwrap().to_string(),
        }),
        2 => Step::Edit(EditOp::DeleteClass { name: class(rng) }),
        3 => Step::Edit(EditOp::CreateAttribute {
            class: class(rng),
            name: ["name", "code", "floor"].choose(rng).unwrap().to_string(),
            type_name: "int".into(),
        }),
        4 => Step::Edit(EditOp::CreateAssociation {
            source: class(rng),
            target: class(rng),
            association_kind: *KINDS.choose(rng).unwrap(),
            name: rng.random_bool(0.3).then(|| "has".to_string()),
        }),
        5 => Step::Edit(EditOp::DeleteAttribute {
            class: class(rng),
            name: "name".into(),
        }),
        6 => Step::Edit(EditOp::RequestSuggestions {
            filter: rng.random_bool(0.5).then(|| vec![CandidateKind::Class]),
        }),
        7 | 8 => Step::Accept(candidate(rng)),
        9 => Step::Dismiss(candidate(rng)),
        10 => Step::Mode(MODES.choose(rng).unwrap().to_string()),
        11 => Step::Finalize,
        12 => Step::Edit(EditOp::ModeSwitch {
            mode: *SuggestionMode::ALL.choose(rng).unwrap(),
        }),
        _ => Step::Edit(if rng.random_bool(0.7) { EditOp::TaskStart } else { EditOp::TaskEnd }),
    }
}

/// Outcome of one step: the revision or the error code token.
type Outcome = Result<u64, String>;

fn code(e: SessionError) -> String {
    ApiError::from(e).code.to_string()
}

async fn direct(session: &Arc<Session>, step: &Step) -> Outcome {
    let out = match step {
        Step::Edit(op) => session.apply_edit(op.clone()).await.map_err(code),
        Step::Accept(id) => session.apply_edit(session.accept_op(id)).await.map_err(code),
        Step::Dismiss(id) => session
            .apply_edit(EditOp::Dismiss {
                candidate_id: id.clone(),
            })
            .await
            .map_err(code),
        Step::Mode(token) => match SuggestionMode::from_token(token) {
            Some(m) => session.set_mode(m).map_err(code),
            None => Err("unknown-mode".to_string()),
        },
        Step::Finalize => session.finalize().await.map(|_| session.revision()).map_err(code),
    };
    session.wait_idle().await;
    out
}

struct Remote {
    client: Client,
    base: String,
    id: String,
}

impl Remote {
    async fn send(&self, step: &Step) -> Outcome {
        let url = |tail: &str| format!("{}/sessions/{}/{tail}", self.base, self.id);
        let r = match step {
            Step::Edit(op) => self.client.post(url("edits")).json(op),
            Step::Accept(id) => self.client.post(url(&format!("suggestions/{id}/accept"))),
            Step::Dismiss(id) => self.client.post(url(&format!("suggestions/{id}/dismiss"))),
            Step::Mode(token) => self.client.post(url("mode")).json(&json!({ "mode": token })),
            Step::Finalize => self.client.post(url("finalize")),
        }
        .send()
        .await
        .unwrap();
        let status = r.status();
        let body: Value = r.json().await.unwrap();
        let out = if status == StatusCode::OK {
            Ok(match step {
                Step::Finalize => self.view().await["revision"].as_u64().unwrap(),
                _ => body["revision"].as_u64().unwrap(),
            })
        } else {
            Err(body["code"].as_str().unwrap().to_string())
        };
        self.settle().await;
        out
    }

    async fn view(&self) -> Value {
        let url = format!("{}/sessions/{}", self.base, self.id);
        self.client.get(url).send().await.unwrap().json().await.unwrap()
    }

    /// Polls until no refresh is running.
    async fn settle(&self) {
        while self.view().await["refreshPending"].as_bool().unwrap() {
            tokio::time::sleep(Duration::from_millis(2)).await;
        }
    }

    async fn text(&self, tail: &str) -> String {
        let url = format!("{}/sessions/{}/{tail}", self.base, self.id);
        self.client.get(url).send().await.unwrap().text().await.unwrap()
    }
}

/// Returns how many steps succeeded and how many of those were accepts.
pub async fn run_sequence(seed: u64, client: &Client) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mode = *["none", "request", "auto", "end"].choose(&mut rng).unwrap();
    let source = rng.random_bool(0.5).then(|| "package Clinic\nclass Ward {\n  floor: int\n}\nclass Nurse {}\nWard o-- Nurse\n");

    let local = service::scripted_registry(seed);
    let served = service::scripted_registry(seed);
    let base = service::spawn(served.clone()).await;
    let model = source.map(|s| parse_model(s).unwrap());
    let session = local.create(model, SuggestionMode::from_token(mode)).unwrap();
    let mut body = json!({ "mode": mode });
    if let Some(s) = source {
        body["modelSource"] = json!(s);
    }
    let created: Value = client.post(format!("{base}/sessions")).json(&body).send().await.unwrap().json().await.unwrap();
    let remote = Remote {
        client: client.clone(),
        base,
        id: created["id"].as_str().unwrap().to_string(),
    };
    assert_eq!(remote.id, session.id());

    let (mut ok, mut accepted) = (0, 0);
    for i in 0..rng.random_range(5..30) {
        let step = random_step(&mut rng, &session.model());
        let want = direct(&session, &step).await;
        if want.is_ok() {
            ok += 1;
            accepted += matches!(step, Step::Accept(_)) as usize;
        }
        let got = remote.send(&step).await;
        assert_eq!(got, want, "seed {seed} step {i}: {step:?}");
        let view = remote.view().await;
        assert_eq!(view["model"], serde_json::to_value(session.model()).unwrap(), "seed {seed} step {i}: {step:?}");
        assert_eq!(view["revision"].as_u64().unwrap(), session.revision());
    }
    let model: Value = client
        .get(format!("{}/sessions/{}/model", remote.base, remote.id))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(model["model"], to_interchange(&session.model()), "seed {seed}");
    assert_eq!(model["mode"], json!(session.mode().token()));
    assert_eq!(remote.text("log").await, render_log(&session.log()), "seed {seed}");
    let served_session = served.get(&remote.id).unwrap();
    assert_eq!(served_session.log(), session.log());
    (ok, accepted)
}

fn letters(mut i: usize) -> String {
    let mut out = String::new();
    loop {
        out.push((b'a' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            return out;
        }
    }
}

/// A writer mutates the session while a client long-polls with
/// `sinceRevision`; every revision change must be reported.
pub async fn check_polling() {
    let registry = service::scripted_registry(11);
    let base = service::spawn(registry.clone()).await;
    let client = Client::new();
    let created: Value = client
        .post(format!("{base}/sessions"))
        .json(&json!({"mode": "auto", "modelSource": "package Clinic\nclass Ward {}\n"}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = created["id"].as_str().unwrap().to_string();
    let session = registry.get(&id).unwrap();

    let writer = {
        let session = session.clone();
        tokio::spawn(async move {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for i in 0..60 {
                let op = match rng.random_range(0..3) {
                    0 => EditOp::CreateClass { name: format!("Room{}", letters(i)) },
                    1 => EditOp::CreateAttribute {
                        class: "Ward".into(),
                        name: ["code", "floor", "wing", "size", "label"][i % 5].to_string(),
                        type_name: "String".into(),
                    },
                    _ => EditOp::TaskStart,
                };
                let _ = session.apply_edit(op).await;
                tokio::time::sleep(Duration::from_micros(rng.random_range(0..800))).await;
            }
            session.wait_idle().await;
        })
    };

    let mut seen = created["revision"].as_u64().unwrap();
    let mut polls = 0;
    let mut changes = 0;
    while !writer.is_finished() || seen < session.revision() {
        let before = session.revision();
        let r = client
            .get(format!("{base}/sessions/{id}/model?sinceRevision={seen}"))
            .send()
            .await
            .unwrap();
        polls += 1;
        if before > seen {
            assert_eq!(r.status(), StatusCode::OK, "revision {before} happened after {seen}");
        }
        if r.status() == StatusCode::OK {
            let revision = r.json::<Value>().await.unwrap()["revision"].as_u64().unwrap();
            assert!(revision > seen && revision >= before);
            seen = revision;
            changes += 1;
        } else {
            assert_eq!(r.status(), StatusCode::NO_CONTENT);
        }
    }
    writer.await.unwrap();
    assert_eq!(seen, session.revision());
    assert!(changes > 1 && polls >= changes);
}
