use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionProvider, CompletionRequest, ProviderFailure};

/// One canned completion in a mock fixture file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MockFixtureRecord {
    pub prompt_sha256: String,
    pub prompt_text: String,
    pub response_text: String,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn fixture_record(prompt: &str, response: &str) -> MockFixtureRecord {
    MockFixtureRecord {
        prompt_sha256: sha256_hex(prompt),
        prompt_text: prompt.to_string(),
        response_text: response.to_string(),
    }
}

/// Answers prompts from a fixture by exact text match.
#[derive(Debug, Default)]
pub struct MockProvider {
    responses: HashMap<String, String>,
    calls: AtomicU32,
}

impl MockProvider {
    pub fn from_records(records: Vec<MockFixtureRecord>) -> Result<Self, String> {
        let mut responses = HashMap::new();
        for (i, r) in records.into_iter().enumerate() {
            if !r.prompt_sha256.is_empty() && r.prompt_sha256 != sha256_hex(&r.prompt_text) {
                return Err(format!("record {i}: promptSha256 does not match promptText"));
            }
            responses.insert(r.prompt_text, r.response_text);
        }
        Ok(MockProvider {
            responses,
            calls: AtomicU32::new(0),
        })
    }

    /// A fixture file, or every `*.mock.json` file of a directory merged.
    pub fn load(path: &Path) -> Result<Self, String> {
        if !path.is_dir() {
            return Self::from_file(path);
        }
        let entries = std::fs::read_dir(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut files: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".mock.json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(format!("{}: no *.mock.json files", path.display()));
        }
        let mut records = Vec::new();
        for f in &files {
            let text = std::fs::read_to_string(f).map_err(|e| format!("{}: {e}", f.display()))?;
            let batch: Vec<MockFixtureRecord> =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", f.display()))?;
            records.extend(batch);
        }
        Self::from_records(records)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let records: Vec<MockFixtureRecord> =
            serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::from_records(records)
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Exact-match lookup. A miss reports the recorded prompt sharing the
    /// longest prefix with `prompt`, cut just past the shared part.
    pub fn lookup(&self, prompt: &str) -> Result<String, ProviderFailure> {
        if let Some(text) = self.responses.get(prompt) {
            return Ok(text.clone());
        }
        let shared = |key: &str| {
            key.chars()
                .zip(prompt.chars())
                .take_while(|(a, b)| a == b)
                .count()
        };
        let nearest = self
            .responses
            .keys()
            .map(|k| (shared(k), k))
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(a.1)))
            .map(|(n, k)| k.chars().take(n + 1).collect::<String>());
        Err(ProviderFailure::MockMiss { nearest })
    }
}

#[async_trait]
impl CompletionProvider for MockProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderFailure> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.lookup(&request.prompt)
    }
}

type Script = dyn Fn(&CompletionRequest, u32) -> Result<String, ProviderFailure> + Send + Sync;

/// Provider driven by a closure; receives the request and the 0-based call
/// index. Records every prompt it sees.
pub struct ScriptedProvider {
    script: Box<Script>,
    calls: AtomicU32,
    seen: Mutex<Vec<String>>,
}

impl ScriptedProvider {
    pub fn new<F>(script: F) -> Self
    where
        F: Fn(&CompletionRequest, u32) -> Result<String, ProviderFailure> + Send + Sync + 'static,
    {
        ScriptedProvider {
            script: Box::new(script),
            calls: AtomicU32::new(0),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.seen.lock().unwrap().clone()
    }
}

#[async_trait]
impl CompletionProvider for ScriptedProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderFailure> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().unwrap().push(request.prompt.clone());
        (self.script)(request, n)
    }
}
