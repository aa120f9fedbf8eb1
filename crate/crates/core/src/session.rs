//! Modeling sessions: edits, suggestion modes, background refreshes and
//! the per-session log.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::watch;

use crate::logging::{LogError, LogRecord, LogWriter};
use crate::model::{
    AppliedElement, Association, AssociationKind, CandidateKind, DomainModel,
    ModelError, MAX_PRESENTED,
};
use crate::recommend::{Iteration, RecommendError, Recommender, SuggestionSet};
use crate::text::serialize_model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SuggestionMode {
    #[serde(rename = "none")]
    NoAssistance,
    #[serde(rename = "auto")]
    Automatic,
    #[serde(rename = "request")]
    OnRequest,
    #[serde(rename = "end")]
    AtEnd,
}

impl SuggestionMode {
    pub const ALL: [SuggestionMode; 4] = [
        SuggestionMode::NoAssistance,
        SuggestionMode::Automatic,
        SuggestionMode::OnRequest,
        SuggestionMode::AtEnd,
    ];

    /// Token used in logs and on the wire.
    pub fn token(self) -> &'static str {
        match self {
            SuggestionMode::NoAssistance => "none",
            SuggestionMode::Automatic => "auto",
            SuggestionMode::OnRequest => "request",
            SuggestionMode::AtEnd => "end",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.token() == token)
    }
}

/// One user action. The tag values are the operation tokens of the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", rename_all_fields = "camelCase")]
pub enum EditOp {
    CreateClass {
        name: String,
    },
    DeleteClass {
        name: String,
    },
    CreateAttribute {
        class: String,
        name: String,
        #[serde(rename = "type", default = "default_type")]
        type_name: String,
    },
    DeleteAttribute {
        class: String,
        name: String,
    },
    CreateAssociation {
        source: String,
        target: String,
        association_kind: AssociationKind,
        #[serde(default)]
        name: Option<String>,
    },
    DeleteAssociation {
        source: String,
        target: String,
        association_kind: AssociationKind,
    },
    AcceptClass {
        candidate_id: String,
    },
    AcceptAttribute {
        candidate_id: String,
    },
    AcceptAssociation {
        candidate_id: String,
    },
    Dismiss {
        candidate_id: String,
    },
    RequestSuggestions {
        #[serde(default)]
        filter: Option<Vec<CandidateKind>>,
    },
    ModeSwitch {
        mode: SuggestionMode,
    },
    TaskStart,
    TaskEnd,
}

fn default_type() -> String {
    "String".to_string()
}

impl EditOp {
    pub fn token(&self) -> &'static str {
        match self {
            EditOp::CreateClass { .. } => "create-class",
            EditOp::DeleteClass { .. } => "delete-class",
            EditOp::CreateAttribute { .. } => "create-attribute",
            EditOp::DeleteAttribute { .. } => "delete-attribute",
            EditOp::CreateAssociation { .. } => "create-association",
            EditOp::DeleteAssociation { .. } => "delete-association",
            EditOp::AcceptClass { .. } => "accept-class",
            EditOp::AcceptAttribute { .. } => "accept-attribute",
            EditOp::AcceptAssociation { .. } => "accept-association",
            EditOp::Dismiss { .. } => "dismiss",
            EditOp::RequestSuggestions { .. } => "request-suggestions",
            EditOp::ModeSwitch { .. } => "mode-switch",
            EditOp::TaskStart => "task-start",
            EditOp::TaskEnd => "task-end",
        }
    }

    /// Whether a successful application changes the model.
    fn edits_model(&self) -> bool {
        !matches!(
            self,
            EditOp::RequestSuggestions { .. }
                | EditOp::ModeSwitch { .. }
                | EditOp::TaskStart
                | EditOp::TaskEnd
        )
    }
}

/// Log operation for a refresh that delivered suggestions.
pub const SUGGESTIONS_TOKEN: &str = "suggestions";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{operation} is not available in mode {mode}")]
    WrongMode { operation: String, mode: &'static str },
    #[error("the session has ended")]
    SessionEnded,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Log(#[from] LogError),
}

pub trait Clock: Send + Sync {
    fn now(&self) -> NaiveDateTime;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> NaiveDateTime {
        chrono::Local::now().naive_local()
    }
}

/// Deterministic clock: every reading is one step later than the previous.
#[derive(Debug)]
pub struct StepClock {
    start: NaiveDateTime,
    step: TimeDelta,
    ticks: AtomicU64,
}

impl StepClock {
    pub fn new(start: NaiveDateTime, step: Duration) -> Self {
        StepClock {
            start,
            step: TimeDelta::from_std(step).expect("step fits"),
            ticks: AtomicU64::new(0),
        }
    }
}

impl Clock for StepClock {
    fn now(&self) -> NaiveDateTime {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + self.step * n as i32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionConfig {
    pub package_name: String,
    pub mode: SuggestionMode,
    /// Pause between an edit and the automatic refresh it triggers.
    pub debounce: Duration,
    pub reco_limit: usize,
    pub seed: u64,
    /// Directory for the session's log file, if any.
    pub log_dir: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            package_name: "Model".to_string(),
            mode: SuggestionMode::NoAssistance,
            debounce: Duration::from_millis(500),
            reco_limit: MAX_PRESENTED,
            seed: 0,
            log_dir: None,
        }
    }
}

/// Consistent read of a session.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub id: String,
    pub revision: u64,
    pub mode: SuggestionMode,
    pub ended: bool,
    pub refresh_pending: bool,
    pub model: DomainModel,
    pub suggestions: SuggestionSet,
    pub last_error: Option<String>,
}

#[derive(Debug, Default)]
struct RefreshState {
    running: bool,
    queued: bool,
    completed: u64,
}

struct State {
    model: DomainModel,
    mode: SuggestionMode,
    revision: u64,
    started_at: NaiveDateTime,
    ended_at: Option<NaiveDateTime>,
    log: Vec<LogRecord>,
    writer: Option<LogWriter<File>>,
    focus: Option<String>,
    pre_suggestion: Option<DomainModel>,
    refresh: RefreshState,
    iterations: u64,
    last_error: Option<String>,
}

pub struct Session {
    id: String,
    config: SessionConfig,
    recommender: Arc<Recommender>,
    clock: Arc<dyn Clock>,
    state: Mutex<State>,
    idle: watch::Sender<bool>,
}

impl Session {
    pub fn new(
        id: &str,
        model: DomainModel,
        config: SessionConfig,
        recommender: Arc<Recommender>,
        clock: Arc<dyn Clock>,
    ) -> Result<Arc<Self>, SessionError> {
        let writer = match &config.log_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(LogError::Io)?;
                let file = File::create(dir.join(format!("{id}.csv"))).map_err(LogError::Io)?;
                Some(LogWriter::new(file)?)
            }
            None => None,
        };
        let started_at = clock.now();
        let (idle, _) = watch::channel(true);
        Ok(Arc::new(Session {
            id: id.to_string(),
            state: Mutex::new(State {
                model,
                mode: config.mode,
                revision: 0,
                started_at,
                ended_at: None,
                log: Vec::new(),
                writer,
                focus: None,
                pre_suggestion: None,
                refresh: RefreshState::default(),
                iterations: 0,
                last_error: None,
            }),
            config,
            recommender,
            clock,
            idle,
        }))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn view(&self) -> SessionView {
        let st = self.lock();
        SessionView {
            id: self.id.clone(),
            revision: st.revision,
            mode: st.mode,
            ended: st.ended_at.is_some(),
            refresh_pending: st.refresh.running,
            model: st.model.clone(),
            suggestions: SuggestionSet::of(&st.model, self.config.reco_limit),
            last_error: st.last_error.clone(),
        }
    }

    pub fn revision(&self) -> u64 {
        self.lock().revision
    }

    pub fn mode(&self) -> SuggestionMode {
        self.lock().mode
    }

    pub fn model(&self) -> DomainModel {
        self.lock().model.clone()
    }

    pub fn log(&self) -> Vec<LogRecord> {
        self.lock().log.clone()
    }

    pub fn started_at(&self) -> NaiveDateTime {
        self.lock().started_at
    }

    pub fn ended_at(&self) -> Option<NaiveDateTime> {
        self.lock().ended_at
    }

    /// Model as it was before the first end-of-task suggestions.
    pub fn pre_suggestion_model(&self) -> Option<DomainModel> {
        self.lock().pre_suggestion.clone()
    }

    /// Number of automatic refreshes that ran to completion.
    pub fn refreshes_completed(&self) -> u64 {
        self.lock().refresh.completed
    }

    fn record(&self, st: &mut State, operation: &str) -> Result<(), SessionError> {
        let row = LogRecord::capture(
            self.clock.now(),
            st.mode.token(),
            operation,
            &st.model,
            self.config.reco_limit,
        );
        if let Some(w) = st.writer.as_mut() {
            w.write_record(&row)?;
        }
        st.log.push(row);
        Ok(())
    }

    /// Applies one action and returns the new revision. A rejected model
    /// edit is still logged, with `:error` after the operation token.
    pub async fn apply_edit(self: &Arc<Self>, op: EditOp) -> Result<u64, SessionError> {
        match op {
            EditOp::RequestSuggestions { filter } => {
                let kinds = filter.unwrap_or_else(|| {
                    vec![CandidateKind::Class, CandidateKind::Attribute, CandidateKind::Association]
                });
                self.request_suggestions(&kinds).await?;
                Ok(self.revision())
            }
            EditOp::ModeSwitch { mode } => self.set_mode(mode),
            op => self.apply_sync(op),
        }
    }

    fn apply_sync(self: &Arc<Self>, op: EditOp) -> Result<u64, SessionError> {
        let mut st = self.lock();
        if st.ended_at.is_some() {
            return Err(SessionError::SessionEnded);
        }
        let token = op.token();
        let result = apply_to_model(&mut st, &op);
        match result {
            Ok(()) => {
                if op == EditOp::TaskStart {
                    st.started_at = self.clock.now();
                }
                if op == EditOp::TaskEnd {
                    st.ended_at = Some(self.clock.now());
                    self.persist_model(&st.model)?;
                }
                st.revision += 1;
                self.record(&mut st, token)?;
                let refresh = op.edits_model() && st.mode == SuggestionMode::Automatic;
                let revision = st.revision;
                drop(st);
                if refresh {
                    self.schedule_refresh();
                }
                Ok(revision)
            }
            Err(e) => {
                self.record(&mut st, &format!("{token}:error"))?;
                Err(e.into())
            }
        }
    }

    /// The accept operation matching the candidate's kind. Unknown ids
    /// map to `accept-class`, which then fails and is logged as such.
    pub fn accept_op(&self, candidate_id: &str) -> EditOp {
        let candidate_id = candidate_id.to_string();
        match self.lock().model.candidates().get(&candidate_id).map(|c| c.kind()) {
            Some(CandidateKind::Attribute) => EditOp::AcceptAttribute { candidate_id },
            Some(CandidateKind::Association) => EditOp::AcceptAssociation { candidate_id },
            _ => EditOp::AcceptClass { candidate_id },
        }
    }

    fn persist_model(&self, model: &DomainModel) -> Result<(), SessionError> {
        if let Some(dir) = &self.config.log_dir {
            std::fs::write(dir.join(format!("{}.dm", self.id)), serialize_model(model)).map_err(LogError::Io)?;
        }
        Ok(())
    }

    pub fn set_mode(self: &Arc<Self>, mode: SuggestionMode) -> Result<u64, SessionError> {
        let mut st = self.lock();
        if st.ended_at.is_some() {
            return Err(SessionError::SessionEnded);
        }
        st.mode = mode;
        st.revision += 1;
        self.record(&mut st, "mode-switch")?;
        let revision = st.revision;
        drop(st);
        if mode == SuggestionMode::Automatic {
            self.schedule_refresh();
        }
        Ok(revision)
    }

    fn snapshot(&self, st: &mut State) -> (DomainModel, Option<String>, u64) {
        st.iterations += 1;
        (
            st.model.clone(),
            st.focus.clone(),
            self.config.seed.wrapping_add(st.iterations),
        )
    }

    async fn run(
        &self,
        kinds: &[CandidateKind],
        model: &DomainModel,
        focus: Option<&str>,
        seed: u64,
    ) -> Result<Iteration, RecommendError> {
        let iteration = self.recommender.run_kinds(model, focus, seed, kinds).await?;
        if iteration.harvests.is_empty() {
            if let Some((_, e)) = iteration.failures.first() {
                return Err(e.clone());
            }
        }
        Ok(iteration)
    }

    /// Runs the selected suggestion kinds now. Only in on-request mode.
    pub async fn request_suggestions(
        self: &Arc<Self>,
        kinds: &[CandidateKind],
    ) -> Result<SuggestionSet, SessionError> {
        let (model, focus, seed) = {
            let mut st = self.lock();
            if st.ended_at.is_some() {
                return Err(SessionError::SessionEnded);
            }
            if st.mode != SuggestionMode::OnRequest {
                return Err(SessionError::WrongMode {
                    operation: "request-suggestions".into(),
                    mode: st.mode.token(),
                });
            }
            self.snapshot(&mut st)
        };
        let iteration = self.run(kinds, &model, focus.as_deref(), seed).await;
        let mut st = self.lock();
        let iteration = match iteration {
            Ok(it) => it,
            Err(e) => {
                st.last_error = Some(e.to_string());
                return Err(e.into());
            }
        };
        iteration.apply(&mut st.model);
        st.revision += 1;
        self.record(&mut st, "request-suggestions")?;
        Ok(SuggestionSet::of(&st.model, self.config.reco_limit))
    }

    /// End-of-task suggestions. The first call keeps the model as it was
    /// before any of them.
    pub async fn finalize(self: &Arc<Self>) -> Result<SuggestionSet, SessionError> {
        let (model, focus, seed) = {
            let mut st = self.lock();
            if st.ended_at.is_some() {
                return Err(SessionError::SessionEnded);
            }
            if st.mode != SuggestionMode::AtEnd {
                return Err(SessionError::WrongMode {
                    operation: "finalize".into(),
                    mode: st.mode.token(),
                });
            }
            if st.pre_suggestion.is_none() {
                st.pre_suggestion = Some(st.model.without_candidates());
            }
            self.snapshot(&mut st)
        };
        let iteration = self
            .run(
                &[CandidateKind::Class, CandidateKind::Attribute, CandidateKind::Association],
                &model,
                focus.as_deref(),
                seed,
            )
            .await;
        let mut st = self.lock();
        let iteration = match iteration {
            Ok(it) => it,
            Err(e) => {
                st.last_error = Some(e.to_string());
                return Err(e.into());
            }
        };
        iteration.apply(&mut st.model);
        st.revision += 1;
        self.record(&mut st, SUGGESTIONS_TOKEN)?;
        Ok(SuggestionSet::of(&st.model, self.config.reco_limit))
    }

    /// Starts a background refresh, or marks one as queued if a refresh is
    /// already running. Requires a tokio runtime.
    fn schedule_refresh(self: &Arc<Self>) {
        {
            let mut st = self.lock();
            if st.refresh.running {
                st.refresh.queued = true;
                return;
            }
            st.refresh.running = true;
        }
        self.idle.send_replace(false);
        let session = Arc::clone(self);
        tokio::spawn(async move { session.refresh_loop().await });
    }

    async fn refresh_loop(self: Arc<Self>) {
        loop {
            if !self.config.debounce.is_zero() {
                tokio::time::sleep(self.config.debounce).await;
            }
            let snapshot = {
                let mut st = self.lock();
                st.refresh.queued = false;
                if st.mode != SuggestionMode::Automatic || st.ended_at.is_some() {
                    None
                } else {
                    Some(self.snapshot(&mut st))
                }
            };
            let Some((model, focus, seed)) = snapshot else {
                self.finish_refresh();
                return;
            };
            let result = if model.classes().is_empty() {
                Ok(Iteration::default())
            } else {
                self.run(
                    &[CandidateKind::Class, CandidateKind::Attribute, CandidateKind::Association],
                    &model,
                    focus.as_deref(),
                    seed,
                )
                .await
            };
            {
                let mut st = self.lock();
                st.refresh.completed += 1;
                match result {
                    Ok(iteration) => {
                        if st.mode == SuggestionMode::Automatic && st.ended_at.is_none() {
                            iteration.apply(&mut st.model);
                            st.revision += 1;
                            if let Err(e) = self.record(&mut st, SUGGESTIONS_TOKEN) {
                                st.last_error = Some(e.to_string());
                            }
                        }
                    }
                    Err(e) => {
                        tracing::warn!(session = %self.id, error = %e, "refresh failed");
                        st.last_error = Some(e.to_string());
                    }
                }
                if st.refresh.queued {
                    continue;
                }
                st.refresh.running = false;
            }
            self.idle.send_replace(true);
            return;
        }
    }

    fn finish_refresh(&self) {
        self.lock().refresh.running = false;
        self.idle.send_replace(true);
    }

    /// Resolves once no refresh is running or queued.
    pub async fn wait_idle(&self) {
        let mut rx = self.idle.subscribe();
        let _ = rx.wait_for(|idle| *idle).await;
    }
}

fn apply_to_model(st: &mut State, op: &EditOp) -> Result<(), ModelError> {
    let model = &mut st.model;
    match op {
        EditOp::CreateClass { name } => {
            model.add_class(name)?;
            st.focus = Some(name.clone());
        }
        EditOp::DeleteClass { name } => {
            model.remove_class(name)?;
            if st.focus.as_deref() == Some(name) {
                st.focus = None;
            }
        }
        EditOp::CreateAttribute {
            class,
            name,
            type_name,
        } => {
            model.add_attribute(class, name, type_name)?;
            st.focus = Some(class.clone());
        }
        EditOp::DeleteAttribute { class, name } => {
            model.remove_attribute(class, name)?;
        }
        EditOp::CreateAssociation {
            source,
            target,
            association_kind,
            name,
        } => {
            let mut a = Association::new(source, target, *association_kind);
            a.name = name.clone();
            model.add_association(a)?;
            st.focus = Some(source.clone());
        }
        EditOp::DeleteAssociation {
            source,
            target,
            association_kind,
        } => {
            model.remove_association(source, target, *association_kind)?;
        }
        EditOp::AcceptClass { candidate_id }
        | EditOp::AcceptAttribute { candidate_id }
        | EditOp::AcceptAssociation { candidate_id } => {
            let expected = match op {
                EditOp::AcceptClass { .. } => CandidateKind::Class,
                EditOp::AcceptAttribute { .. } => CandidateKind::Attribute,
                _ => CandidateKind::Association,
            };
            let kind = model
                .candidates()
                .get(candidate_id)
                .map(|c| c.kind())
                .ok_or_else(|| ModelError::UnknownCandidate(candidate_id.clone()))?;
            if kind != expected {
                return Err(ModelError::UnknownCandidate(candidate_id.clone()));
            }
            match model.accept_candidate(candidate_id)? {
                AppliedElement::Class { name, .. } => st.focus = Some(name),
                AppliedElement::Attribute { owner, .. } => st.focus = Some(owner),
                AppliedElement::Association(a) => st.focus = Some(a.source),
            }
        }
        EditOp::Dismiss { candidate_id } => {
            model.dismiss_candidate(candidate_id)?;
        }
        EditOp::TaskStart | EditOp::TaskEnd => {}
        EditOp::RequestSuggestions { .. } | EditOp::ModeSwitch { .. } => {
            unreachable!("handled by apply_edit")
        }
    }
    Ok(())
}

/// Owns all live sessions; ids are `s1`, `s2`, ...
pub struct SessionRegistry {
    recommender: Arc<Recommender>,
    clock: Arc<dyn Clock>,
    defaults: SessionConfig,
    sessions: Mutex<BTreeMap<String, Arc<Session>>>,
    next: AtomicU64,
}

impl SessionRegistry {
    pub fn new(recommender: Arc<Recommender>, clock: Arc<dyn Clock>, defaults: SessionConfig) -> Self {
        SessionRegistry {
            recommender,
            clock,
            defaults,
            sessions: Mutex::new(BTreeMap::new()),
            next: AtomicU64::new(0),
        }
    }

    pub fn defaults(&self) -> &SessionConfig {
        &self.defaults
    }

    pub fn create(
        &self,
        model: Option<DomainModel>,
        mode: Option<SuggestionMode>,
    ) -> Result<Arc<Session>, SessionError> {
        let n = self.next.fetch_add(1, Ordering::SeqCst) + 1;
        let id = format!("s{n}");
        let mut config = self.defaults.clone();
        if let Some(m) = mode {
            config.mode = m;
        }
        let model = model.unwrap_or_else(|| DomainModel::new(&config.package_name));
        let session = Session::new(&id, model, config, self.recommender.clone(), self.clock.clone())?;
        self.sessions
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id, session.clone());
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, ScriptedProvider};
    use crate::prompt::ShotCatalog;
    use crate::recommend::RecommenderConfig;

    fn recommender(answer: &'static str) -> Arc<Recommender> {
        let provider = Arc::new(ScriptedProvider::new(move |_, _| Ok(answer.to_string())));
        Arc::new(Recommender::new(
            Arc::new(Gateway::new(provider)),
            Arc::new(ShotCatalog::bundled()),
            RecommenderConfig::with_repetitions(1),
        ))
    }

    fn session(mode: SuggestionMode, answer: &'static str) -> Arc<Session> {
        let clock = StepClock::new(
            NaiveDateTime::parse_from_str("2023-05-08 12:00:00", "%Y-%m-%d %H:%M:%S").unwrap(),
            Duration::from_millis(100),
        );
        let config = SessionConfig {
            mode,
            debounce: Duration::ZERO,
            ..SessionConfig::default()
        };
        Session::new("s1", DomainModel::new("School"), config, recommender(answer), Arc::new(clock))
            .unwrap()
    }

    fn create(name: &str) -> EditOp {
        EditOp::CreateClass { name: name.into() }
    }

    #[test]
    fn edit_op_wire_format() {
        let op: EditOp = serde_json::from_str(
            r#"{"kind":"create-association","source":"A","target":"B","associationKind":"composition"}"#,
        )
        .unwrap();
        assert_eq!(op.token(), "create-association");
        let json = serde_json::to_value(EditOp::AcceptClass { candidate_id: "c1".into() }).unwrap();
        assert_eq!(json, serde_json::json!({"kind": "accept-class", "candidateId": "c1"}));
        assert_eq!(
            serde_json::to_value(SuggestionMode::Automatic).unwrap(),
            serde_json::json!("auto")
        );
    }

    #[tokio::test]
    async fn automatic_mode_refreshes_after_edit() {
        let s = session(SuggestionMode::Automatic, "[Teacher, Student], [School, Student]");
        s.apply_edit(create("Student")).await.unwrap();
        s.wait_idle().await;
        assert!(s.refreshes_completed() >= 1);
        let log = s.log();
        assert_eq!(log[0].operation, "create-class");
        assert_eq!(log.last().unwrap().operation, SUGGESTIONS_TOKEN);
        assert!(log.last().unwrap().class_reco.contains(&"Teacher".to_string()));
    }

    #[tokio::test]
    async fn no_assistance_never_refreshes() {
        let s = session(SuggestionMode::NoAssistance, "[Teacher]");
        s.apply_edit(create("Student")).await.unwrap();
        s.wait_idle().await;
        assert_eq!(s.refreshes_completed(), 0);
        assert!(s.model().candidates().is_empty());
    }

    #[tokio::test]
    async fn request_needs_request_mode() {
        let s = session(SuggestionMode::AtEnd, "[Teacher]");
        s.apply_edit(create("Student")).await.unwrap();
        assert!(matches!(
            s.request_suggestions(&[CandidateKind::Class]).await,
            Err(SessionError::WrongMode { .. })
        ));
        s.set_mode(SuggestionMode::OnRequest).unwrap();
        let set = s.request_suggestions(&[CandidateKind::Class]).await.unwrap();
        assert_eq!(set.classes.len(), 1);
        assert!(set.attributes.is_empty());
    }

    #[tokio::test]
    async fn finalize_keeps_first_snapshot() {
        let s = session(SuggestionMode::AtEnd, "[Teacher, Student]");
        s.apply_edit(create("Student")).await.unwrap();
        let set = s.finalize().await.unwrap();
        assert_eq!(set.classes.len(), 1);
        let id = set.classes[0].id.clone();
        s.apply_edit(EditOp::AcceptClass { candidate_id: id }).await.unwrap();
        s.finalize().await.unwrap();
        let pre = s.pre_suggestion_model().unwrap();
        assert_eq!(pre.class_names().collect::<Vec<_>>(), ["Student"]);
        s.set_mode(SuggestionMode::Automatic).unwrap();
        assert!(matches!(s.finalize().await, Err(SessionError::WrongMode { .. })));
    }

    #[tokio::test]
    async fn failed_edit_is_logged_and_end_is_final() {
        let s = session(SuggestionMode::NoAssistance, "");
        s.apply_edit(create("Student")).await.unwrap();
        let rev = s.revision();
        assert!(s.apply_edit(create("Student")).await.is_err());
        assert_eq!(s.revision(), rev);
        assert_eq!(s.log().last().unwrap().operation, "create-class:error");
        s.apply_edit(EditOp::TaskEnd).await.unwrap();
        assert!(matches!(
            s.set_mode(SuggestionMode::Automatic),
            Err(SessionError::SessionEnded)
        ));
        let log = s.log();
        assert!(log.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[tokio::test]
    async fn registry_ids_are_sequential() {
        let reg = SessionRegistry::new(
            recommender(""),
            Arc::new(SystemClock),
            SessionConfig::default(),
        );
        assert_eq!(reg.create(None, None).unwrap().id(), "s1");
        assert_eq!(reg.create(None, Some(SuggestionMode::Automatic)).unwrap().id(), "s2");
        assert!(reg.get("s2").is_some());
        assert!(reg.get("s3").is_none());
    }
}
