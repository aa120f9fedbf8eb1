//! Class diagrams and their suggested (candidate) counterparts.
//!
//! A [`DomainModel`] owns the real elements the modeler has placed on the
//! canvas plus a [`CandidateStore`] of elements suggested by the language
//! model. Every mutation goes through methods on `DomainModel` so the
//! structural invariants hold after each call.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Attribute types the prompts and catalog know about. Anything else is
/// kept as a free token.
pub const KNOWN_TYPES: [&str; 6] = ["String", "int", "float", "double", "boolean", "Date"];

/// Maximum number of candidates presented per kind.
pub const MAX_PRESENTED: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("name must not be empty")]
    EmptyName,
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("class `{0}` already exists")]
    DuplicateName(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{class}` already has an attribute `{name}`")]
    DuplicateAttribute { class: String, name: String },
    #[error("unknown attribute `{class}.{name}`")]
    UnknownAttribute { class: String, name: String },
    #[error("association from `{0}` to itself is not allowed")]
    SelfLoopForbidden(String),
    #[error("a {kind} between `{a}` and `{b}` already exists")]
    DuplicatePair { a: String, b: String, kind: AssociationKind },
    #[error("no {kind} between `{a}` and `{b}`")]
    UnknownAssociation { a: String, b: String, kind: AssociationKind },
    #[error("unknown candidate `{0}`")]
    UnknownCandidate(String),
    #[error("`{0}` is already part of the model")]
    AlreadyInModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssociationKind {
    Association,
    Aggregation,
    Composition,
    Inheritance,
}

impl AssociationKind {
    pub const ALL: [AssociationKind; 4] = [
        AssociationKind::Association,
        AssociationKind::Aggregation,
        AssociationKind::Composition,
        AssociationKind::Inheritance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AssociationKind::Association => "association",
            AssociationKind::Aggregation => "aggregation",
            AssociationKind::Composition => "composition",
            AssociationKind::Inheritance => "inheritance",
        }
    }
}

impl fmt::Display for AssociationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Attribute {
    pub name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassEntity {
    pub name: String,
    pub attributes: Vec<Attribute>,
}

impl ClassEntity {
    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attribute(name).is_some()
    }
}

/// A directed edge between two classes. For inheritance the source is the
/// subclass and the target the superclass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Association {
    pub source: String,
    pub target: String,
    pub kind: AssociationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Association {
    pub fn new(source: &str, target: &str, kind: AssociationKind) -> Self {
        Association {
            source: source.to_string(),
            target: target.to_string(),
            kind,
            name: None,
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn connects(&self, a: &str, b: &str) -> bool {
        (self.source == a && self.target == b) || (self.source == b && self.target == a)
    }

    pub fn touches(&self, class: &str) -> bool {
        self.source == class || self.target == class
    }

    /// Identity used for duplicate detection: unordered endpoint pair plus kind.
    pub fn identity(&self) -> (String, String, AssociationKind) {
        let (a, b) = ordered_pair(&self.source, &self.target);
        (a, b, self.kind)
    }
}

fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Two related class names, as produced by a class suggestion (`[A, B]`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassPair {
    pub first: String,
    pub second: String,
}

impl ClassPair {
    pub fn new(first: &str, second: &str) -> Self {
        ClassPair {
            first: first.to_string(),
            second: second.to_string(),
        }
    }

    pub fn same_endpoints(&self, other: &ClassPair) -> bool {
        (self.first == other.first && self.second == other.second)
            || (self.first == other.second && self.second == other.first)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassSuggestion {
    pub name: String,
    /// Pairs this class appeared in, materialized as associations on accept.
    #[serde(default)]
    pub companions: Vec<ClassPair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributeSuggestion {
    pub owner: String,
    pub name: String,
    pub type_name: String,
    /// Set when the type lookup failed and the default type was used.
    #[serde(default)]
    pub type_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum CandidatePayload {
    Class(ClassSuggestion),
    Attribute(AttributeSuggestion),
    Association(Association),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CandidateKind {
    Class,
    Attribute,
    Association,
}

impl CandidatePayload {
    pub fn kind(&self) -> CandidateKind {
        match self {
            CandidatePayload::Class(_) => CandidateKind::Class,
            CandidatePayload::Attribute(_) => CandidateKind::Attribute,
            CandidatePayload::Association(_) => CandidateKind::Association,
        }
    }

    pub fn key(&self) -> CandidateKey {
        match self {
            CandidatePayload::Class(c) => CandidateKey::Class(c.name.clone()),
            CandidatePayload::Attribute(a) => {
                CandidateKey::Attribute(a.owner.clone(), a.name.clone())
            }
            CandidatePayload::Association(a) => {
                let (x, y, k) = a.identity();
                CandidateKey::Association(x, y, k)
            }
        }
    }
}

/// Canonical identity of a candidate payload. Orders classes before
/// attributes before associations, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CandidateKey {
    Class(String),
    Attribute(String, String),
    Association(String, String, AssociationKind),
}

impl fmt::Display for CandidateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateKey::Class(n) => write!(f, "{n}"),
            CandidateKey::Attribute(c, a) => write!(f, "{c}.{a}"),
            CandidateKey::Association(a, b, k) => write!(f, "{a}-{b} ({k})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub id: String,
    pub payload: CandidatePayload,
    pub confidence: u32,
}

impl Candidate {
    pub fn kind(&self) -> CandidateKind {
        self.payload.kind()
    }
}

/// Ordering used for presentation: confidence descending, then identity.
pub fn presentation_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.confidence
        .cmp(&a.confidence)
        .then_with(|| a.payload.key().cmp(&b.payload.key()))
}

/// Suggested elements keyed by canonical identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "StoreRepr", into = "StoreRepr")]
pub struct CandidateStore {
    entries: BTreeMap<CandidateKey, Candidate>,
    next_id: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct StoreRepr {
    next_id: u64,
    items: Vec<Candidate>,
}

impl From<StoreRepr> for CandidateStore {
    fn from(repr: StoreRepr) -> Self {
        let entries = repr
            .items
            .into_iter()
            .map(|c| (c.payload.key(), c))
            .collect();
        CandidateStore {
            entries,
            next_id: repr.next_id,
        }
    }
}

impl From<CandidateStore> for StoreRepr {
    fn from(store: CandidateStore) -> Self {
        StoreRepr {
            next_id: store.next_id,
            items: store.entries.into_values().collect(),
        }
    }
}

impl CandidateStore {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate> {
        self.entries.values()
    }

    pub fn get(&self, id: &str) -> Option<&Candidate> {
        self.entries.values().find(|c| c.id == id)
    }

    pub fn get_by_key(&self, key: &CandidateKey) -> Option<&Candidate> {
        self.entries.get(key)
    }

    /// Top candidates of one kind in presentation order, capped at `limit`.
    pub fn list(&self, kind: CandidateKind, limit: usize) -> Vec<Candidate> {
        let mut out: Vec<Candidate> = self
            .entries
            .values()
            .filter(|c| c.kind() == kind)
            .cloned()
            .collect();
        out.sort_by(presentation_order);
        out.truncate(limit);
        out
    }

    fn bump(&mut self, payload: CandidatePayload, count: u32) -> &Candidate {
        let key = payload.key();
        if !self.entries.contains_key(&key) {
            self.next_id += 1;
            let id = format!("c{}", self.next_id);
            self.entries.insert(
                key.clone(),
                Candidate {
                    id,
                    payload,
                    confidence: count,
                },
            );
        } else {
            let existing = self.entries.get_mut(&key).expect("checked above");
            existing.confidence += count;
            if let (CandidatePayload::Class(old), CandidatePayload::Class(new)) =
                (&mut existing.payload, payload)
            {
                for pair in new.companions {
                    if !old.companions.iter().any(|p| p.same_endpoints(&pair)) {
                        old.companions.push(pair);
                    }
                }
            }
        }
        &self.entries[&key]
    }

    fn remove_key(&mut self, key: &CandidateKey) -> Option<Candidate> {
        self.entries.remove(key)
    }

    fn remove_id(&mut self, id: &str) -> Option<Candidate> {
        let key = self.entries.values().find(|c| c.id == id)?.payload.key();
        self.entries.remove(&key)
    }
}

/// What an accepted candidate turned into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AppliedElement {
    Class {
        name: String,
        /// Companion pairs materialized as associations.
        materialized: Vec<Association>,
        /// Companion pairs whose other endpoint is missing, re-queued as
        /// association candidates (candidate ids).
        requeued: Vec<String>,
    },
    Attribute { owner: String, name: String },
    Association(Association),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DomainModel {
    package_name: String,
    classes: Vec<ClassEntity>,
    associations: Vec<Association>,
    #[serde(default)]
    candidates: CandidateStore,
}

/// Letters only: no digits, whitespace or punctuation.
pub fn is_identifier(name: &str) -> bool {
    !name.is_empty() && name.chars().all(char::is_alphabetic)
}

impl DomainModel {
    pub fn new(package_name: &str) -> Self {
        DomainModel {
            package_name: package_name.to_string(),
            classes: Vec::new(),
            associations: Vec::new(),
            candidates: CandidateStore::default(),
        }
    }

    pub fn package_name(&self) -> &str {
        &self.package_name
    }

    pub fn classes(&self) -> &[ClassEntity] {
        &self.classes
    }

    pub fn associations(&self) -> &[Association] {
        &self.associations
    }

    pub fn candidates(&self) -> &CandidateStore {
        &self.candidates
    }

    pub fn class(&self, name: &str) -> Option<&ClassEntity> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn has_class(&self, name: &str) -> bool {
        self.class(name).is_some()
    }

    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.name.as_str())
    }

    /// Classes plus attributes plus associations.
    pub fn element_count(&self) -> usize {
        self.classes.len()
            + self.classes.iter().map(|c| c.attributes.len()).sum::<usize>()
            + self.associations.len()
    }

    /// True if any association links the two classes, in either direction.
    pub fn related(&self, a: &str, b: &str) -> bool {
        self.associations.iter().any(|x| x.connects(a, b))
    }

    fn class_mut(&mut self, name: &str) -> Result<&mut ClassEntity, ModelError> {
        self.classes
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| ModelError::UnknownClass(name.to_string()))
    }

    pub fn add_class(&mut self, name: &str) -> Result<&ClassEntity, ModelError> {
        if name.is_empty() {
            return Err(ModelError::EmptyName);
        }
        if name.chars().any(char::is_numeric) || name.chars().any(char::is_whitespace) {
            return Err(ModelError::InvalidName(name.to_string()));
        }
        if self.has_class(name) {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        self.classes.push(ClassEntity {
            name: name.to_string(),
            attributes: Vec::new(),
        });
        self.candidates
            .remove_key(&CandidateKey::Class(name.to_string()));
        Ok(self.classes.last().expect("just pushed"))
    }

    /// Removes a class together with every association touching it.
    pub fn remove_class(&mut self, name: &str) -> Result<ClassEntity, ModelError> {
        let idx = self
            .classes
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| ModelError::UnknownClass(name.to_string()))?;
        self.associations.retain(|a| !a.touches(name));
        Ok(self.classes.remove(idx))
    }

    pub fn add_attribute(
        &mut self,
        class: &str,
        name: &str,
        type_name: &str,
    ) -> Result<&Attribute, ModelError> {
        if name.trim().is_empty() {
            return Err(ModelError::EmptyName);
        }
        let entity = self.class_mut(class)?;
        if entity.has_attribute(name) {
            return Err(ModelError::DuplicateAttribute {
                class: class.to_string(),
                name: name.to_string(),
            });
        }
        entity.attributes.push(Attribute {
            name: name.to_string(),
            type_name: type_name.to_string(),
        });
        self.candidates
            .remove_key(&CandidateKey::Attribute(class.to_string(), name.to_string()));
        let entity = self.class(class).expect("class exists");
        Ok(entity.attributes.last().expect("just pushed"))
    }

    pub fn remove_attribute(&mut self, class: &str, name: &str) -> Result<Attribute, ModelError> {
        let entity = self.class_mut(class)?;
        let idx = entity
            .attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| ModelError::UnknownAttribute {
                class: class.to_string(),
                name: name.to_string(),
            })?;
        Ok(entity.attributes.remove(idx))
    }

    fn check_association(&self, assoc: &Association) -> Result<(), ModelError> {
        for end in [&assoc.source, &assoc.target] {
            if !self.has_class(end) {
                return Err(ModelError::UnknownClass(end.clone()));
            }
        }
        if assoc.source == assoc.target {
            return Err(ModelError::SelfLoopForbidden(assoc.source.clone()));
        }
        if self
            .associations
            .iter()
            .any(|a| a.identity() == assoc.identity())
        {
            let (a, b, kind) = assoc.identity();
            return Err(ModelError::DuplicatePair { a, b, kind });
        }
        Ok(())
    }

    pub fn add_association(&mut self, assoc: Association) -> Result<&Association, ModelError> {
        self.check_association(&assoc)?;
        let (a, b, k) = assoc.identity();
        self.candidates
            .remove_key(&CandidateKey::Association(a, b, k));
        self.associations.push(assoc);
        Ok(self.associations.last().expect("just pushed"))
    }

    pub fn remove_association(
        &mut self,
        a: &str,
        b: &str,
        kind: AssociationKind,
    ) -> Result<Association, ModelError> {
        let idx = self
            .associations
            .iter()
            .position(|x| x.kind == kind && x.connects(a, b))
            .ok_or_else(|| ModelError::UnknownAssociation {
                a: a.to_string(),
                b: b.to_string(),
                kind,
            })?;
        Ok(self.associations.remove(idx))
    }

    /// Whether the payload names an element already present on the canvas.
    pub fn contains_payload(&self, payload: &CandidatePayload) -> bool {
        match payload {
            CandidatePayload::Class(c) => self.has_class(&c.name),
            CandidatePayload::Attribute(a) => self
                .class(&a.owner)
                .is_some_and(|c| c.has_attribute(&a.name)),
            CandidatePayload::Association(x) => self
                .associations
                .iter()
                .any(|a| a.identity() == x.identity()),
        }
    }

    /// Records one more recommendation of `payload`.
    pub fn upsert_candidate(&mut self, payload: CandidatePayload) -> Result<&Candidate, ModelError> {
        self.upsert_candidate_by(payload, 1)
    }

    /// Records `count` recommendations of `payload` at once.
    pub fn upsert_candidate_by(
        &mut self,
        payload: CandidatePayload,
        count: u32,
    ) -> Result<&Candidate, ModelError> {
        match &payload {
            CandidatePayload::Class(c) => {
                if !is_identifier(&c.name) {
                    return Err(ModelError::InvalidName(c.name.clone()));
                }
            }
            CandidatePayload::Attribute(a) => {
                if a.name.trim().is_empty() || a.owner.is_empty() {
                    return Err(ModelError::EmptyName);
                }
            }
            CandidatePayload::Association(a) => {
                if a.source.is_empty() || a.target.is_empty() {
                    return Err(ModelError::EmptyName);
                }
                if a.source == a.target {
                    return Err(ModelError::SelfLoopForbidden(a.source.clone()));
                }
            }
        }
        if self.contains_payload(&payload) {
            return Err(ModelError::AlreadyInModel(payload.key().to_string()));
        }
        Ok(self.candidates.bump(payload, count.max(1)))
    }

    /// Drops a candidate without applying it.
    pub fn dismiss_candidate(&mut self, id: &str) -> Result<Candidate, ModelError> {
        self.candidates
            .remove_id(id)
            .ok_or_else(|| ModelError::UnknownCandidate(id.to_string()))
    }

    /// Turns a candidate into real model elements. On error the model is
    /// left unchanged.
    pub fn accept_candidate(&mut self, id: &str) -> Result<AppliedElement, ModelError> {
        let candidate = self
            .candidates
            .get(id)
            .cloned()
            .ok_or_else(|| ModelError::UnknownCandidate(id.to_string()))?;
        match candidate.payload {
            CandidatePayload::Class(suggestion) => {
                self.candidates.remove_id(id);
                if !self.has_class(&suggestion.name) {
                    self.add_class(&suggestion.name)?;
                }
                let mut materialized = Vec::new();
                let mut requeued = Vec::new();
                for pair in &suggestion.companions {
                    let assoc = Association::new(&pair.first, &pair.second, AssociationKind::Association);
                    if pair.first == pair.second {
                        continue;
                    }
                    if self.has_class(&pair.first) && self.has_class(&pair.second) {
                        if self.related(&pair.first, &pair.second) {
                            continue;
                        }
                        if let Ok(a) = self.add_association(assoc) {
                            materialized.push(a.clone());
                        }
                    } else if let Ok(c) =
                        self.upsert_candidate(CandidatePayload::Association(assoc))
                    {
                        requeued.push(c.id.clone());
                    }
                }
                Ok(AppliedElement::Class {
                    name: suggestion.name,
                    materialized,
                    requeued,
                })
            }
            CandidatePayload::Attribute(a) => {
                if !self.has_class(&a.owner) {
                    return Err(ModelError::UnknownClass(a.owner));
                }
                self.candidates.remove_id(id);
                if !self.class(&a.owner).is_some_and(|c| c.has_attribute(&a.name)) {
                    self.add_attribute(&a.owner, &a.name, &a.type_name)?;
                }
                Ok(AppliedElement::Attribute {
                    owner: a.owner,
                    name: a.name,
                })
            }
            CandidatePayload::Association(assoc) => {
                match self.check_association(&assoc) {
                    Ok(()) => {
                        self.candidates.remove_id(id);
                        // An unnamed plain link only says the pair is related;
                        // the accepted edge replaces it.
                        self.associations.retain(|a| {
                            !(a.connects(&assoc.source, &assoc.target)
                                && a.kind == AssociationKind::Association
                                && a.name.is_none())
                        });
                        self.add_association(assoc.clone())?;
                    }
                    Err(ModelError::DuplicatePair { .. }) => {
                        self.candidates.remove_id(id);
                    }
                    Err(e) => return Err(e),
                }
                Ok(AppliedElement::Association(assoc))
            }
        }
    }

    /// Top candidates of one kind, confidence descending, at most 20.
    pub fn list_candidates(&self, kind: CandidateKind) -> Vec<Candidate> {
        self.candidates.list(kind, MAX_PRESENTED)
    }

    /// Verifies every structural invariant; returns a description of the
    /// first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, c) in self.classes.iter().enumerate() {
            if c.name.is_empty() || c.name.chars().any(char::is_numeric) {
                return Err(format!("bad class name `{}`", c.name));
            }
            if self.classes[..i].iter().any(|o| o.name == c.name) {
                return Err(format!("duplicate class `{}`", c.name));
            }
            for (j, a) in c.attributes.iter().enumerate() {
                if a.name.is_empty() {
                    return Err(format!("empty attribute name in `{}`", c.name));
                }
                if c.attributes[..j].iter().any(|o| o.name == a.name) {
                    return Err(format!("duplicate attribute `{}.{}`", c.name, a.name));
                }
            }
        }
        for (i, a) in self.associations.iter().enumerate() {
            if !self.has_class(&a.source) || !self.has_class(&a.target) {
                return Err(format!("dangling association {}-{}", a.source, a.target));
            }
            if a.source == a.target {
                return Err(format!("self loop on `{}`", a.source));
            }
            if self.associations[..i]
                .iter()
                .any(|o| o.identity() == a.identity())
            {
                return Err(format!("duplicate association {}-{}", a.source, a.target));
            }
        }
        for c in self.candidates.iter() {
            if self.contains_payload(&c.payload) {
                return Err(format!("candidate {} duplicates a model element", c.id));
            }
            if c.confidence == 0 {
                return Err(format!("candidate {} has zero confidence", c.id));
            }
        }
        Ok(())
    }

    /// Same model without any candidates.
    pub fn without_candidates(&self) -> DomainModel {
        DomainModel {
            candidates: CandidateStore::default(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hospital() -> DomainModel {
        let mut m = DomainModel::new("HospitalSystem");
        m.add_class("Hospital").unwrap();
        m.add_class("Staff").unwrap();
        m.add_class("Doctor").unwrap();
        m.add_attribute("Hospital", "name", "String").unwrap();
        m.add_association(Association::new("Hospital", "Staff", AssociationKind::Aggregation))
            .unwrap();
        m
    }

    fn class_candidate(name: &str) -> CandidatePayload {
        CandidatePayload::Class(ClassSuggestion {
            name: name.to_string(),
            companions: vec![],
        })
    }

    #[test]
    fn add_class_and_duplicates() {
        let mut m = DomainModel::new("Hospital");
        m.add_class("Hospital").unwrap();
        assert_eq!(m.classes().len(), 1);
        assert_eq!(
            m.add_class("Hospital").unwrap_err(),
            ModelError::DuplicateName("Hospital".into())
        );
        m.add_class("Staff").unwrap();
        let names: Vec<_> = m.class_names().collect();
        assert_eq!(names, ["Hospital", "Staff"]);
        assert_eq!(m.add_class("").unwrap_err(), ModelError::EmptyName);
        assert!(matches!(m.add_class("Room101"), Err(ModelError::InvalidName(_))));
    }

    #[test]
    fn add_attribute_errors() {
        let mut m = hospital();
        assert_eq!(
            m.add_attribute("Hospital", "name", "String").unwrap_err(),
            ModelError::DuplicateAttribute {
                class: "Hospital".into(),
                name: "name".into()
            }
        );
        assert_eq!(
            m.add_attribute("Clinic", "name", "String").unwrap_err(),
            ModelError::UnknownClass("Clinic".into())
        );
        m.add_attribute("Staff", "balance", "Money").unwrap();
        assert_eq!(m.class("Staff").unwrap().attributes[0].type_name, "Money");
    }

    #[test]
    fn add_association_rules() {
        let mut m = hospital();
        m.add_association(Association::new("Doctor", "Staff", AssociationKind::Inheritance))
            .unwrap();
        let inh = &m.associations()[1];
        assert_eq!((inh.source.as_str(), inh.target.as_str()), ("Doctor", "Staff"));
        assert_eq!(
            m.add_association(Association::new("Hospital", "Hospital", AssociationKind::Association))
                .unwrap_err(),
            ModelError::SelfLoopForbidden("Hospital".into())
        );
        assert!(matches!(
            m.add_association(Association::new("Staff", "Hospital", AssociationKind::Aggregation)),
            Err(ModelError::DuplicatePair { .. })
        ));
        // Same pair, different kind is a different element.
        m.add_association(Association::new("Staff", "Hospital", AssociationKind::Association))
            .unwrap();
        assert!(matches!(
            m.add_association(Association::new("Staff", "Clinic", AssociationKind::Association)),
            Err(ModelError::UnknownClass(_))
        ));
    }

    #[test]
    fn upsert_counts_and_rejects_canvas_elements() {
        let mut m = hospital();
        m.upsert_candidate(class_candidate("Patient")).unwrap();
        let c = m.upsert_candidate(class_candidate("Patient")).unwrap();
        assert_eq!(c.confidence, 2);
        assert_eq!(m.candidates().len(), 1);
        assert!(matches!(
            m.upsert_candidate(class_candidate("Hospital")),
            Err(ModelError::AlreadyInModel(_))
        ));
    }

    #[test]
    fn list_is_capped_at_twenty() {
        let mut m = hospital();
        let letters = "ABCDEFGHIJKLMNOPQRSTUVWXY";
        for (i, ch) in letters.chars().enumerate() {
            let name = format!("Class{}", ch);
            for _ in 0..(i % 3 + 1) {
                m.upsert_candidate(class_candidate(&name)).unwrap();
            }
        }
        let listed = m.list_candidates(CandidateKind::Class);
        assert_eq!(listed.len(), 20);
        for w in listed.windows(2) {
            assert_ne!(presentation_order(&w[0], &w[1]), Ordering::Greater);
        }
        assert_eq!(listed[0].confidence, 3);
    }

    #[test]
    fn accept_class_materializes_companions() {
        let mut m = hospital();
        let id = m
            .upsert_candidate(CandidatePayload::Class(ClassSuggestion {
                name: "Patient".into(),
                companions: vec![
                    ClassPair::new("Patient", "Hospital"),
                    ClassPair::new("Patient", "Appointment"),
                ],
            }))
            .unwrap()
            .id
            .clone();
        let applied = m.accept_candidate(&id).unwrap();
        match applied {
            AppliedElement::Class {
                materialized,
                requeued,
                ..
            } => {
                assert_eq!(materialized.len(), 1);
                assert_eq!(requeued.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(m.has_class("Patient"));
        assert!(m.related("Patient", "Hospital"));
        assert_eq!(
            m.accept_candidate(&id).unwrap_err(),
            ModelError::UnknownCandidate(id.clone())
        );
        // Accepting Appointment later materializes the requeued pair and
        // prunes the association candidate.
        let app = m
            .upsert_candidate(CandidatePayload::Class(ClassSuggestion {
                name: "Appointment".into(),
                companions: vec![ClassPair::new("Patient", "Appointment")],
            }))
            .unwrap()
            .id
            .clone();
        m.accept_candidate(&app).unwrap();
        assert!(m.related("Patient", "Appointment"));
        assert!(m.candidates().is_empty());
        m.check_invariants().unwrap();
    }

    #[test]
    fn accept_attribute_requires_owner() {
        let mut m = hospital();
        let id = m
            .upsert_candidate(CandidatePayload::Attribute(AttributeSuggestion {
                owner: "Patient".into(),
                name: "id".into(),
                type_name: "int".into(),
                type_fallback: false,
            }))
            .unwrap()
            .id
            .clone();
        let before = m.clone();
        assert_eq!(
            m.accept_candidate(&id).unwrap_err(),
            ModelError::UnknownClass("Patient".into())
        );
        assert_eq!(m, before);
        m.add_class("Patient").unwrap();
        m.accept_candidate(&id).unwrap();
        assert_eq!(m.class("Patient").unwrap().attributes[0].type_name, "int");
    }

    #[test]
    fn real_additions_prune_candidates() {
        let mut m = hospital();
        m.upsert_candidate(class_candidate("Patient")).unwrap();
        m.add_class("Patient").unwrap();
        assert!(m.candidates().is_empty());
        m.check_invariants().unwrap();
    }

    #[test]
    fn remove_class_drops_its_associations() {
        let mut m = hospital();
        m.remove_class("Staff").unwrap();
        assert!(m.associations().is_empty());
        m.check_invariants().unwrap();
    }
}
