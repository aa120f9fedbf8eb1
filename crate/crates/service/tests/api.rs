use std::sync::Arc;
use std::time::Duration;

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

use modelassist_core::gateway::MockProvider;
use modelassist_testkit::service as common;
use modelassist_testkit::fixtures;

async fn create(client: &Client, base: &str, body: Value) -> Value {
    let r = client.post(format!("{base}/sessions")).json(&body).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    r.json().await.unwrap()
}

async fn error_code(r: reqwest::Response) -> (StatusCode, String, Value) {
    let status = r.status();
    let body: Value = r.json().await.unwrap();
    (status, body["code"].as_str().unwrap_or_default().to_string(), body)
}

#[tokio::test]
async fn health_reports_sessions() {
    let base = common::spawn(common::scripted_registry(0)).await;
    let client = Client::new();
    create(&client, &base, json!({})).await;
    let body: Value = client.get(format!("{base}/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(body, json!({"status": "ok", "sessions": 1}));
}

#[tokio::test]
async fn automatic_refresh_shows_up_when_polling() {
    let base = common::spawn(common::scripted_registry(4)).await;
    let client = Client::new();
    let source = std::fs::read_to_string(fixtures().join("hospital.dm")).unwrap();
    let created = create(&client, &base, json!({"modelSource": source, "mode": "auto"})).await;
    let id = created["id"].as_str().unwrap();
    assert_eq!(created["mode"], "auto");
    assert_eq!(created["model"]["packageName"], "HospitalSystem");

    let r = client
        .post(format!("{base}/sessions/{id}/edits"))
        .json(&json!({"kind": "create-class", "name": "Ward"}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let edited = r.json::<Value>().await.unwrap()["revision"].as_u64().unwrap();

    let mut seen = edited;
    for _ in 0..200 {
        let r = client
            .get(format!("{base}/sessions/{id}/model?sinceRevision={seen}"))
            .send()
            .await
            .unwrap();
        if r.status() == StatusCode::OK {
            let body: Value = r.json().await.unwrap();
            seen = body["revision"].as_u64().unwrap();
            if !body["refreshPending"].as_bool().unwrap() {
                break;
            }
        } else {
            assert_eq!(r.status(), StatusCode::NO_CONTENT);
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
    }
    assert!(seen > edited);
    let s: Value = client.get(format!("{base}/sessions/{id}/suggestions")).send().await.unwrap().json().await.unwrap();
    assert!(!s["classes"].as_array().unwrap().is_empty());
    assert!(s["classes"][0]["confidence"].as_u64().unwrap() >= 1);
    let r = client
        .get(format!("{base}/sessions/{id}/model?sinceRevision={seen}"))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::NO_CONTENT);
}

#[tokio::test]
async fn accepted_candidate_lands_in_log() {
    let base = common::spawn(common::scripted_registry(1)).await;
    let client = Client::new();
    let created = create(&client, &base, json!({"modelSource": "package Clinic\nclass Ward {}\nclass Nurse {}\n", "mode": "request"})).await;
    let id = created["id"].as_str().unwrap();
    let r = client
        .post(format!("{base}/sessions/{id}/edits"))
        .json(&json!({"kind": "request-suggestions"}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let s: Value = client.get(format!("{base}/sessions/{id}/suggestions")).send().await.unwrap().json().await.unwrap();
    let candidate = s["classes"][0]["id"].as_str().unwrap();
    let name = s["classes"][0]["payload"]["name"].as_str().unwrap().to_string();
    let r = client
        .post(format!("{base}/sessions/{id}/suggestions/{candidate}/accept"))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);

    let r = client.get(format!("{base}/sessions/{id}/log")).send().await.unwrap();
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("text/csv"));
    let log = r.text().await.unwrap();
    let row = log.lines().find(|l| l.contains(", accept-class, ")).unwrap();
    assert!(row.contains(&name), "{row}");

    let source = client.get(format!("{base}/sessions/{id}/source")).send().await.unwrap().text().await.unwrap();
    assert!(source.contains(&format!("class {name}")));
}

#[tokio::test]
async fn error_statuses() {
    let base = common::spawn(common::scripted_registry(0)).await;
    let client = Client::new();
    let id = create(&client, &base, json!({"mode": "request"})).await["id"].as_str().unwrap().to_string();

    let r = client.get(format!("{base}/sessions/s404/model")).send().await.unwrap();
    assert_eq!(error_code(r).await.1, "unknown-session");

    let r = client.post(format!("{base}/sessions/{id}/suggestions/c77/accept")).send().await.unwrap();
    let (status, code, _) = error_code(r).await;
    assert_eq!((status, code.as_str()), (StatusCode::NOT_FOUND, "unknown-candidate"));

    let r = client.post(format!("{base}/sessions")).json(&json!({"modelSource": "package P\nclass {"})).send().await.unwrap();
    let (status, code, body) = error_code(r).await;
    assert_eq!((status, code.as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "parse-error"));
    assert!(body["message"].as_str().unwrap().contains("2:"));

    let r = client
        .post(format!("{base}/sessions/{id}/edits"))
        .json(&json!({"kind": "create-attribute", "class": "Nope", "name": "x"}))
        .send()
        .await
        .unwrap();
    let (status, code, _) = error_code(r).await;
    assert_eq!((status, code.as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "unknown-class"));

    let r = client.post(format!("{base}/sessions/{id}/edits")).json(&json!({"kind": "fly"})).send().await.unwrap();
    assert_eq!(error_code(r).await.1, "invalid-body");

    let r = client.post(format!("{base}/sessions/{id}/mode")).json(&json!({"mode": "fast"})).send().await.unwrap();
    assert_eq!(error_code(r).await.1, "unknown-mode");

    let r = client.post(format!("{base}/sessions/{id}/finalize")).send().await.unwrap();
    let (status, code, _) = error_code(r).await;
    assert_eq!((status, code.as_str()), (StatusCode::CONFLICT, "wrong-mode"));

    let r = client.post(format!("{base}/sessions/{id}/edits")).json(&json!({"kind": "task-end"})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let r = client.post(format!("{base}/sessions/{id}/mode")).json(&json!({"mode": "auto"})).send().await.unwrap();
    let (status, code, _) = error_code(r).await;
    assert_eq!((status, code.as_str()), (StatusCode::CONFLICT, "session-ended"));

    let log = client.get(format!("{base}/sessions/{id}/log")).send().await.unwrap().text().await.unwrap();
    assert!(log.contains("create-attribute:error"));
}

#[tokio::test]
async fn provider_failure_passes_through_with_attempts() {
    let base = common::spawn(common::failing_registry()).await;
    let client = Client::new();
    let created = create(&client, &base, json!({"modelSource": "package P\nclass Ward {}\n", "mode": "request"})).await;
    let id = created["id"].as_str().unwrap();
    let r = client
        .post(format!("{base}/sessions/{id}/edits"))
        .json(&json!({"kind": "request-suggestions", "filter": ["class"]}))
        .send()
        .await
        .unwrap();
    let (status, code, body) = error_code(r).await;
    assert_eq!((status, code.as_str()), (StatusCode::BAD_GATEWAY, "provider-error"));
    assert_eq!(body["attempts"], 3);
    let view: Value = client.get(format!("{base}/sessions/{id}")).send().await.unwrap().json().await.unwrap();
    assert!(view["lastError"].as_str().unwrap().contains("3 attempt"));
}

#[tokio::test]
async fn recorded_fixture_drives_end_mode() {
    let mock = MockProvider::from_file(&fixtures().join("hospital.mock.json")).unwrap();
    let base = common::spawn(common::registry_with(Arc::new(mock), 3, 0)).await;
    let client = Client::new();
    let source = std::fs::read_to_string(fixtures().join("hospital.dm")).unwrap();
    let created = create(&client, &base, json!({"modelSource": source, "mode": "end"})).await;
    let id = created["id"].as_str().unwrap();
    let r = client.post(format!("{base}/sessions/{id}/finalize")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let set: Value = r.json().await.unwrap();
    let mut names: Vec<&str> = set["classes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["payload"]["name"].as_str().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["Address", "Appointment", "Patient"]);
    assert!(!set["attributes"].as_array().unwrap().is_empty());
}
