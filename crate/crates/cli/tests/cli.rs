use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use modelassist_core::text::parse_model;
use modelassist_testkit::{e2e, fixtures};

fn bin() -> &'static Path {
    Path::new(env!("CARGO_BIN_EXE_modelassist"))
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("MODELASSIST_PROVIDER_URL")
        .env_remove("MODELASSIST_MOCK")
        .output()
        .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ma-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn hospital_completion_is_exact_and_repeatable() {
    e2e::check_hospital_completion(bin(), 3);
}

#[test]
fn text_report_lists_every_kind() {
    let f = fixtures();
    let out = run(&["complete", path(&f.join("hospital.dm")), "--mock", path(&f)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["Classes", "Patient", "Address.postalCode", "Doctor -|> Staff"] {
        assert!(text.contains(needle), "{needle} missing from\n{text}");
    }
}

#[test]
fn kinds_restrict_the_pass() {
    let f = fixtures();
    let out = run(&["complete", path(&f.join("hospital.dm")), "--mock", path(&f), "--kinds", "class", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["classes"].as_array().unwrap().len(), 3);
    assert!(v["attributes"].as_array().unwrap().is_empty());
    assert!(v["associations"].as_array().unwrap().is_empty());
}

#[test]
fn apply_all_writes_completed_model() {
    let f = fixtures();
    let out_file = scratch("apply").join("out.dm");
    let out = run(&["complete", path(&f.join("hospital.dm")), "--mock", path(&f), "--apply-all", path(&out_file)]);
    assert_eq!(out.status.code(), Some(0));
    let model = parse_model(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    for c in e2e::CLASSES {
        assert!(model.has_class(c), "{c}");
    }
    assert!(model.class("Address").unwrap().has_attribute("postalCode"));
    assert!(model
        .associations()
        .iter()
        .any(|a| a.source == "Doctor" && a.target == "Staff" && a.kind.as_str() == "inheritance"));
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    let f = fixtures();

    let out = run(&["complete", path(&dir.join("missing.dm")), "--mock", path(&f)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.dm"));

    let broken = dir.join("broken.dm");
    std::fs::write(&broken, "package P\nclass {\n").unwrap();
    assert_eq!(run(&["complete", path(&broken), "--mock", path(&f)]).status.code(), Some(1));

    let empty = dir.join("empty.dm");
    std::fs::write(&empty, "package P\n").unwrap();
    assert_eq!(run(&["complete", path(&empty), "--mock", path(&f)]).status.code(), Some(1));

    let out = run(&["complete", path(&f.join("hospital.dm"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no provider configured"));

    let zoo = dir.join("zoo.dm");
    std::fs::write(&zoo, "package P\nclass Zoo {}\n").unwrap();
    let out = run(&["complete", path(&zoo), "--mock", path(&f)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no mock response"));

    assert_eq!(run(&["complete", path(&zoo), "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", path(&dir.join("nothing"))]).status.code(), Some(1));
}

#[test]
fn config_file_supplies_mock_and_flags_override_it() {
    let dir = scratch("config");
    let f = fixtures();
    let config = dir.join("modelassist.toml");
    std::fs::write(&config, format!("mock = {:?}\n", path(&f))).unwrap();
    let out = run(&["complete", path(&f.join("hospital.dm")), "--config", path(&config)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["complete", path(&f.join("hospital.dm")), "--config", path(&config), "--mock", path(&dir)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_reports_fixture() {
    let root = fixtures().join("analyze");
    let out = run(&["analyze", path(&root)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Completion time") && text.contains("Kruskal-Wallis"), "{text}");

    let out = run(&["analyze", path(&root), "--json", "--limit", "9:00"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["limitSecs"], 540.0);
    assert_eq!(v["logs"].as_array().unwrap().len(), 12);
}

#[test]
fn serve_answers_health_and_rejects_busy_port() {
    let f = fixtures();
    let mut child = Command::new(bin())
        .args(["serve", "--port", "0", "--mock", path(&f)])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let base = line.trim().strip_prefix("listening on ").unwrap().to_string();
    let port = base.rsplit(':').next().unwrap().to_string();

    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let health: serde_json::Value = rt.block_on(async {
        let client = reqwest::Client::builder().timeout(Duration::from_secs(5)).build().unwrap();
        client.get(format!("{base}/health")).send().await.unwrap().json().await.unwrap()
    });
    assert_eq!(health["status"], "ok");

    let busy = run(&["serve", "--port", &port, "--mock", path(&f)]);
    assert_eq!(busy.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&busy.stderr).contains("cannot listen"));

    child.kill().unwrap();
    child.wait().unwrap();
}
