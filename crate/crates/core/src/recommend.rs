//! Repeated prompting, frequency tallies and follow-up chains that turn a
//! model snapshot into ranked candidates.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};
use crate::model::{
    Association, AssociationKind, AttributeSuggestion, Candidate, CandidateKind, CandidatePayload,
    ClassPair, ClassSuggestion, DomainModel, MAX_PRESENTED,
};
use crate::prompt::{
    build_association_name_prompt, build_association_type_prompt, build_attribute_prompt,
    build_attribute_type_prompt, build_class_prompt, build_inheritance_direction_prompt,
    PairSelection, Prompt, PromptError, ShotCatalog,
};
use crate::response::{
    parse_association_name_response, parse_association_type_response,
    parse_attribute_response, parse_attribute_type_response, parse_class_response,
    parse_inheritance_direction_response, KindAnswer,
};

const ALL_KINDS: [CandidateKind; 3] =
    [CandidateKind::Class, CandidateKind::Attribute, CandidateKind::Association];

/// Type given to an attribute whose type lookup failed.
pub const FALLBACK_TYPE: &str = "String";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecommenderConfig {
    pub repetitions: u32,
    pub min_frequency: u32,
    pub max_presented: usize,
    pub max_canvas_pairs: usize,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        Self::with_repetitions(3)
    }
}

impl RecommenderConfig {
    /// `n` repetitions; a candidate must show up in two responses when
    /// `n >= 3`, otherwise in one.
    pub fn with_repetitions(n: u32) -> Self {
        let n = n.max(1);
        RecommenderConfig {
            repetitions: n,
            min_frequency: if n >= 3 { 2 } else { 1 },
            max_presented: MAX_PRESENTED,
            max_canvas_pairs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecommendError {
    #[error("the model has no classes")]
    EmptyModel,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Result of one suggestion step, computed against a snapshot and applied
/// to a model afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Harvest {
    pub kind: CandidateKind,
    /// Payload and how many times it was recommended.
    pub items: Vec<(CandidatePayload, u32)>,
    pub calls: u32,
    /// Failed calls whose items were skipped or defaulted.
    pub errors: Vec<GatewayError>,
    pub warnings: Vec<String>,
}

impl Harvest {
    fn new(kind: CandidateKind) -> Self {
        Harvest {
            kind,
            items: Vec::new(),
            calls: 0,
            errors: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Upserts every item; items that became real elements in the meantime
    /// are skipped. Returns the touched candidate ids.
    pub fn apply(&self, model: &mut DomainModel) -> Vec<String> {
        let mut ids = Vec::new();
        for (payload, n) in &self.items {
            if let Ok(c) = model.upsert_candidate_by(payload.clone(), *n) {
                ids.push(c.id.clone());
            }
        }
        ids
    }
}

/// Top candidates of each kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuggestionSet {
    pub classes: Vec<Candidate>,
    pub attributes: Vec<Candidate>,
    pub associations: Vec<Candidate>,
}

impl SuggestionSet {
    pub fn of(model: &DomainModel, limit: usize) -> Self {
        let store = model.candidates();
        SuggestionSet {
            classes: store.list(CandidateKind::Class, limit),
            attributes: store.list(CandidateKind::Attribute, limit),
            associations: store.list(CandidateKind::Association, limit),
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len() + self.attributes.len() + self.associations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of one full pass (classes, attributes, associations).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Iteration {
    pub harvests: Vec<Harvest>,
    /// Steps that produced nothing because every primary call failed.
    pub failures: Vec<(CandidateKind, RecommendError)>,
}

impl Iteration {
    pub fn apply(&self, model: &mut DomainModel) -> Vec<String> {
        self.harvests.iter().flat_map(|h| h.apply(model)).collect()
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.harvests
            .iter()
            .flat_map(|h| h.warnings.iter().map(String::as_str))
    }

    /// Every gateway error seen, including ones that were worked around.
    pub fn gateway_errors(&self) -> Vec<&GatewayError> {
        let mut out: Vec<&GatewayError> = self.harvests.iter().flat_map(|h| &h.errors).collect();
        for (_, e) in &self.failures {
            if let RecommendError::Gateway(g) = e {
                out.push(g);
            }
        }
        out
    }
}

pub struct Recommender {
    gateway: Arc<Gateway>,
    catalog: Arc<ShotCatalog>,
    config: RecommenderConfig,
}

impl Recommender {
    pub fn new(gateway: Arc<Gateway>, catalog: Arc<ShotCatalog>, config: RecommenderConfig) -> Self {
        Recommender {
            gateway,
            catalog,
            config,
        }
    }

    pub fn config(&self) -> &RecommenderConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    async fn ask(&self, prompt: &Prompt, sample: u32, harvest: &mut Harvest) -> Result<String, GatewayError> {
        harvest.calls += 1;
        match self.gateway.complete(&prompt.request().with_sample(sample)).await {
            Ok(r) => Ok(r.text),
            Err(e) => {
                tracing::warn!(kind = %prompt.kind, error = %e, "completion failed");
                harvest.errors.push(e.clone());
                Err(e)
            }
        }
    }

    /// Class candidates from `repetitions` prompts, each with its own
    /// permutation of the query pairs.
    pub async fn suggest_classes(
        &self,
        model: &DomainModel,
        focus: Option<&str>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Harvest, RecommendError> {
        if model.classes().is_empty() {
            return Err(RecommendError::EmptyModel);
        }
        let base = PairSelection::from_model(model, focus);
        let seeds: Vec<u64> = (0..self.config.repetitions).map(|_| rng.random()).collect();
        let mut harvest = Harvest::new(CandidateKind::Class);
        let mut tally: BTreeMap<String, u32> = BTreeMap::new();
        let mut first_seen: Vec<String> = Vec::new();
        let mut companions: HashMap<String, Vec<ClassPair>> = HashMap::new();
        let mut answered = 0;
        for (sample, seed) in (0u32..).zip(seeds) {
            let prompt = build_class_prompt(model, &self.catalog, &base.clone().permuted(seed))?;
            let Ok(text) = self.ask(&prompt, sample, &mut harvest).await else {
                continue;
            };
            answered += 1;
            let batch = parse_class_response(&text);
            for name in batch.new_classes(model) {
                if !tally.contains_key(&name) {
                    first_seen.push(name.clone());
                }
                *tally.entry(name).or_default() += 1;
            }
            for (a, b) in &batch.pairs {
                let pair = ClassPair::new(a, b);
                for end in [a, b] {
                    if model.has_class(end) {
                        continue;
                    }
                    let list = companions.entry(end.clone()).or_default();
                    if !list.iter().any(|p| p.same_endpoints(&pair)) {
                        list.push(pair.clone());
                    }
                }
            }
        }
        if answered == 0 {
            return Err(first_error(harvest));
        }
        for name in first_seen {
            let count = tally[&name];
            if count < self.config.min_frequency {
                continue;
            }
            let payload = CandidatePayload::Class(ClassSuggestion {
                companions: companions.remove(&name).unwrap_or_default(),
                name,
            });
            harvest.items.push((payload, count));
        }
        Ok(harvest)
    }

    /// Attribute candidates for the canvas plus the listed class
    /// candidates, each typed by a follow-up prompt.
    pub async fn suggest_attributes(&self, model: &DomainModel) -> Result<Harvest, RecommendError> {
        if model.classes().is_empty() {
            return Err(RecommendError::EmptyModel);
        }
        let projected = self.projected(model);
        let prompt = build_attribute_prompt(&projected, &self.catalog)?;
        let mut harvest = Harvest::new(CandidateKind::Attribute);
        let mut tally: BTreeMap<(String, String), u32> = BTreeMap::new();
        let mut first_seen = Vec::new();
        let mut answered = 0;
        for sample in 0..self.config.repetitions {
            let Ok(text) = self.ask(&prompt, sample, &mut harvest).await else {
                continue;
            };
            answered += 1;
            let batch = parse_attribute_response(&text, &projected);
            for (class, name) in batch.pairs() {
                let key = (class.to_string(), name.to_string());
                if !tally.contains_key(&key) {
                    first_seen.push(key.clone());
                }
                *tally.entry(key).or_default() += 1;
            }
        }
        if answered == 0 {
            return Err(first_error(harvest));
        }

        let mut types: HashMap<String, Option<String>> = HashMap::new();
        for (owner, name) in first_seen {
            let count = tally[&(owner.clone(), name.clone())];
            if count < self.config.min_frequency {
                continue;
            }
            if !types.contains_key(&name) {
                let found = self.lookup_type(&name, &mut harvest).await;
                types.insert(name.clone(), found);
            }
            let (type_name, type_fallback) = match &types[&name] {
                Some(t) => (t.clone(), false),
                None => (FALLBACK_TYPE.to_string(), true),
            };
            if type_fallback {
                harvest.warnings.push(format!(
                    "type of {owner}.{name} unknown, defaulted to {FALLBACK_TYPE}"
                ));
            }
            let payload = CandidatePayload::Attribute(AttributeSuggestion {
                owner,
                name,
                type_name,
                type_fallback,
            });
            harvest.items.push((payload, count));
        }
        Ok(harvest)
    }

    async fn lookup_type(&self, name: &str, harvest: &mut Harvest) -> Option<String> {
        let prompt = build_attribute_type_prompt(name, &self.catalog).ok()?;
        let text = self.ask(&prompt, 0, harvest).await.ok()?;
        match parse_attribute_type_response(&text) {
            Ok(t) => Some(t),
            Err(e) => {
                harvest.warnings.push(format!("attribute type for {name}: {e}"));
                None
            }
        }
    }

    /// Canvas plus the currently listed class candidates as empty classes.
    fn projected(&self, model: &DomainModel) -> DomainModel {
        let mut projected = model.without_candidates();
        for c in model.candidates().list(CandidateKind::Class, self.config.max_presented) {
            if let CandidatePayload::Class(s) = &c.payload {
                let _ = projected.add_class(&s.name);
            }
        }
        projected
    }

    /// Pairs worth asking about: companions of class candidates, then
    /// canvas pairs that are unrelated or only linked by an unnamed plain
    /// association, nearest to `focus` first.
    pub fn association_pairs(&self, model: &DomainModel, focus: Option<&str>) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        let mut push = |a: &str, b: &str, out: &mut Vec<(String, String)>| {
            let key = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
            if a != b && seen.insert(key) {
                out.push((a.to_string(), b.to_string()));
            }
        };

        for c in model.candidates().list(CandidateKind::Class, self.config.max_presented) {
            if let CandidatePayload::Class(s) = &c.payload {
                for p in &s.companions {
                    if !model.related(&p.first, &p.second) {
                        push(&p.first, &p.second, &mut out);
                    }
                }
            }
        }

        let rank = distance_rank(model, focus);
        let names: Vec<&str> = model.class_names().collect();
        let mut canvas: Vec<(usize, usize, &str, &str)> = Vec::new();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                if !open_pair(model, a, b) {
                    continue;
                }
                let (ra, rb) = (rank[*a], rank[*b]);
                let (x, y, rx, ry) = if ra <= rb { (a, b, ra, rb) } else { (b, a, rb, ra) };
                canvas.push((rx, ry, x, y));
            }
        }
        canvas.sort();
        for (_, _, a, b) in canvas.into_iter().take(self.config.max_canvas_pairs) {
            push(a, b, &mut out);
        }
        out
    }

    /// Kind prompt per pair; inheritance is oriented by a direction prompt,
    /// other kinds are labeled by a name prompt.
    pub async fn suggest_associations(
        &self,
        model: &DomainModel,
        focus: Option<&str>,
    ) -> Result<Harvest, RecommendError> {
        let mut harvest = Harvest::new(CandidateKind::Association);
        let pairs = self.association_pairs(model, focus);
        let mut answered = 0;
        for (a, b) in &pairs {
            let prompt = build_association_type_prompt(a, b, &self.catalog)?;
            let Ok(text) = self.ask(&prompt, 0, &mut harvest).await else {
                continue;
            };
            answered += 1;
            let kind = match parse_association_type_response(&text) {
                Ok(KindAnswer::No) => continue,
                Ok(KindAnswer::Kind(k)) => k,
                Err(e) => {
                    harvest.warnings.push(format!("{a}, {b}: {e}"));
                    continue;
                }
            };
            let plain_link = model.related(a, b);
            let assoc = match kind {
                AssociationKind::Inheritance => {
                    let prompt = build_inheritance_direction_prompt(a, b, &self.catalog)?;
                    let Ok(text) = self.ask(&prompt, 0, &mut harvest).await else {
                        continue;
                    };
                    match parse_inheritance_direction_response(&text, a, b) {
                        Ok(sup) => {
                            let sub = if &sup == a { b } else { a };
                            Association::new(sub, &sup, AssociationKind::Inheritance)
                        }
                        Err(e) => {
                            harvest.warnings.push(format!("{a}, {b}: {e}"));
                            continue;
                        }
                    }
                }
                AssociationKind::Association if plain_link => continue,
                other => {
                    let prompt = build_association_name_prompt(a, b, &self.catalog)?;
                    let assoc = Association::new(a, b, other);
                    match self.ask(&prompt, 0, &mut harvest).await {
                        Ok(text) => match parse_association_name_response(&text) {
                            Ok(label) => assoc.named(&label),
                            Err(_) => assoc,
                        },
                        Err(_) => assoc,
                    }
                }
            };
            harvest.items.push((CandidatePayload::Association(assoc), 1));
        }
        if !pairs.is_empty() && answered == 0 {
            return Err(first_error(harvest));
        }
        Ok(harvest)
    }

    /// One pass over classes, attributes and associations. Each step sees
    /// the candidates of the steps before it; `snapshot` itself is not
    /// modified.
    pub async fn run_iteration(
        &self,
        snapshot: &DomainModel,
        focus: Option<&str>,
        seed: u64,
    ) -> Result<Iteration, RecommendError> {
        self.run_kinds(snapshot, focus, seed, &ALL_KINDS).await
    }

    /// Like [`Recommender::run_iteration`] restricted to `kinds`, which run
    /// in the usual class, attribute, association order.
    pub async fn run_kinds(
        &self,
        snapshot: &DomainModel,
        focus: Option<&str>,
        seed: u64,
        kinds: &[CandidateKind],
    ) -> Result<Iteration, RecommendError> {
        if snapshot.classes().is_empty() {
            return Err(RecommendError::EmptyModel);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut work = snapshot.clone();
        let mut iteration = Iteration::default();

        for kind in ALL_KINDS.into_iter().filter(|k| kinds.contains(k)) {
            let result = match kind {
                CandidateKind::Class => self.suggest_classes(&work, focus, &mut rng).await,
                CandidateKind::Attribute => self.suggest_attributes(&work).await,
                CandidateKind::Association => self.suggest_associations(&work, focus).await,
            };
            match result {
                Ok(h) => {
                    h.apply(&mut work);
                    iteration.harvests.push(h);
                }
                Err(e) => iteration.failures.push((kind, e)),
            }
        }
        Ok(iteration)
    }
}

fn first_error(harvest: Harvest) -> RecommendError {
    harvest
        .errors
        .into_iter()
        .next()
        .map(RecommendError::Gateway)
        .unwrap_or(RecommendError::EmptyModel)
}

/// Unrelated, or related only through unnamed plain associations.
fn open_pair(model: &DomainModel, a: &str, b: &str) -> bool {
    model
        .associations()
        .iter()
        .filter(|x| x.connects(a, b))
        .all(|x| x.kind == AssociationKind::Association && x.name.is_none())
}

/// Sort key per class: breadth-first distance from the focus (the last
/// class when `None`), unreachable classes after, ties by model order.
fn distance_rank<'a>(model: &'a DomainModel, focus: Option<&str>) -> HashMap<&'a str, usize> {
    let names: Vec<&str> = model.class_names().collect();
    let start = focus
        .and_then(|f| names.iter().copied().find(|n| *n == f))
        .or_else(|| names.last().copied());
    let mut dist: HashMap<&str, usize> = HashMap::new();
    if let Some(start) = start {
        dist.insert(start, 0);
        let mut queue = VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur];
            for a in model.associations() {
                if !a.touches(cur) {
                    continue;
                }
                let other = if a.source == cur { &a.target } else { &a.source };
                if let Some(n) = names.iter().copied().find(|n| *n == other.as_str()) {
                    if !dist.contains_key(n) {
                        dist.insert(n, d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    let width = names.len() + 1;
    names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let d = dist.get(n).copied().unwrap_or(width);
            (*n, d * width + i)
        })
        .collect()
}
