//! Few-shot prompt construction for the six suggestion tasks.

mod catalog;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{CompletionRequest, LlmParams};
use crate::model::{ClassEntity, DomainModel};

pub use catalog::{
    AssociationNameShot, AssociationTypeShot, AttributeTypeShot, CatalogError, InheritanceShot,
    ShotCatalog, ShotDiagram, ShotKind,
};

/// Upper bound on query groups in a class prompt.
pub const MAX_QUERY_PAIRS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PromptKind {
    ClassSuggestion,
    AttributeSuggestion,
    AttributeType,
    AssociationName,
    AssociationType,
    InheritanceDirection,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        PromptKind::ClassSuggestion,
        PromptKind::AttributeSuggestion,
        PromptKind::AttributeType,
        PromptKind::AssociationName,
        PromptKind::AssociationType,
        PromptKind::InheritanceDirection,
    ];

    /// First line of every prompt of this kind.
    pub fn instruction(self) -> &'static str {
        match self {
            PromptKind::ClassSuggestion => "Generate related concepts:",
            PromptKind::AttributeSuggestion => {
                "Generate missing attributes for each class in this class diagram:"
            }
            PromptKind::AttributeType => "Generate attribute type:",
            PromptKind::AssociationName => "Predict association name:",
            PromptKind::AssociationType => {
                "Specify the nature of the association between these concepts: \
                 inheritance or association or composition or no:"
            }
            PromptKind::InheritanceDirection => {
                "Select the  super class  in this UML inheritance relationship:"
            }
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PromptKind::ClassSuggestion => "class",
            PromptKind::AttributeSuggestion => "attribute",
            PromptKind::AttributeType => "attribute-type",
            PromptKind::AssociationName => "association-name",
            PromptKind::AssociationType => "association-type",
            PromptKind::InheritanceDirection => "inheritance-direction",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("the model has no classes")]
    EmptyModel,
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub kind: PromptKind,
    pub text: String,
    pub params: LlmParams,
}

impl Prompt {
    fn new(kind: PromptKind, text: String) -> Self {
        Prompt {
            kind,
            text,
            params: LlmParams::for_kind(kind),
        }
    }

    pub fn request(&self) -> CompletionRequest {
        CompletionRequest::new(&self.text, self.params.clone())
    }
}

/// Query groups of a class prompt: pairs of related classes, or single
/// classes when the model has too few relationships. A seed permutes the
/// group order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSelection {
    groups: Vec<Vec<String>>,
    permutation_seed: Option<u64>,
}

impl PairSelection {
    pub fn fixed(pairs: &[(&str, &str)]) -> Self {
        PairSelection {
            groups: pairs
                .iter()
                .map(|(a, b)| vec![a.to_string(), b.to_string()])
                .collect(),
            permutation_seed: None,
        }
    }

    /// Breadth-first walk over associations starting at `focus` (the last
    /// class when `None`), collecting up to four pairs in edge direction.
    /// Fewer than two pairs falls back to single classes in walk order.
    pub fn from_model(model: &DomainModel, focus: Option<&str>) -> Self {
        let start = focus
            .filter(|f| model.has_class(f))
            .map(str::to_string)
            .or_else(|| model.classes().last().map(|c| c.name.clone()));
        let Some(start) = start else {
            return PairSelection {
                groups: Vec::new(),
                permutation_seed: None,
            };
        };

        let mut order = vec![start.clone()];
        let mut seen: BTreeSet<String> = BTreeSet::from([start.clone()]);
        let mut used = vec![false; model.associations().len()];
        let mut pairs = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(current) = queue.pop_front() {
            for (i, a) in model.associations().iter().enumerate() {
                if used[i] || !a.touches(&current) || a.source == a.target {
                    continue;
                }
                used[i] = true;
                if pairs.len() < MAX_QUERY_PAIRS {
                    pairs.push(vec![a.source.clone(), a.target.clone()]);
                }
                let other = if a.source == current { &a.target } else { &a.source };
                if seen.insert(other.clone()) {
                    order.push(other.clone());
                    queue.push_back(other.clone());
                }
            }
        }

        let groups = if pairs.len() >= 2 {
            pairs
        } else {
            for c in model.class_names() {
                if seen.insert(c.to_string()) {
                    order.push(c.to_string());
                }
            }
            order
                .into_iter()
                .take(MAX_QUERY_PAIRS)
                .map(|c| vec![c])
                .collect()
        };
        PairSelection {
            groups,
            permutation_seed: None,
        }
    }

    pub fn permuted(mut self, seed: u64) -> Self {
        self.permutation_seed = Some(seed);
        self
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }

    pub fn is_fallback(&self) -> bool {
        self.groups.iter().any(|g| g.len() == 1)
    }

    /// Groups in the order they appear in the prompt.
    pub fn ordered(&self) -> Vec<Vec<String>> {
        let mut groups = self.groups.clone();
        if let Some(seed) = self.permutation_seed {
            groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        groups
    }
}

fn bracket<S: AsRef<str>>(items: &[S]) -> String {
    let inner: Vec<&str> = items.iter().map(AsRef::as_ref).collect();
    format!("[{}]", inner.join(", "))
}

fn render_classes(classes: &[ClassEntity]) -> String {
    classes
        .iter()
        .map(|c| {
            let names: Vec<&str> = c.attributes.iter().map(|a| a.name.as_str()).collect();
            format!("{}: {}", c.name, bracket(&names))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn mentions(names: &[&str], query: &[&str]) -> bool {
    names
        .iter()
        .any(|n| query.iter().any(|q| n.eq_ignore_ascii_case(q)))
}

fn require_name(name: &str) -> Result<(), PromptError> {
    if name.trim().is_empty() {
        Err(PromptError::PreconditionViolation("empty class name".into()))
    } else {
        Ok(())
    }
}

pub fn build_class_prompt(
    model: &DomainModel,
    catalog: &ShotCatalog,
    selection: &PairSelection,
) -> Result<Prompt, PromptError> {
    if model.classes().is_empty() {
        return Err(PromptError::EmptyModel);
    }
    if selection.groups().is_empty() {
        return Err(PromptError::PreconditionViolation("empty pair selection".into()));
    }
    for name in selection.groups().iter().flatten() {
        if !model.has_class(name) {
            return Err(PromptError::PreconditionViolation(format!(
                "selected class {name} is not in the model"
            )));
        }
    }
    let mut lines = vec![PromptKind::ClassSuggestion.instruction().to_string()];
    for d in catalog.diagrams.iter().filter(|d| d.used_for(ShotKind::Class)) {
        let pairs: Vec<String> = d
            .associations
            .iter()
            .map(|a| bracket(&[&a.source, &a.target]))
            .collect();
        lines.push(format!("{}: {}", d.package_name, pairs.join(", ")));
    }
    let query: Vec<String> = selection.ordered().iter().map(|g| bracket(g)).collect();
    lines.push(format!("{}: {}", model.package_name(), query.join(", ")));
    Ok(Prompt::new(PromptKind::ClassSuggestion, lines.join("\n")))
}

pub fn build_attribute_prompt(
    model: &DomainModel,
    catalog: &ShotCatalog,
) -> Result<Prompt, PromptError> {
    if model.classes().is_empty() {
        return Err(PromptError::EmptyModel);
    }
    let mut lines = vec![PromptKind::AttributeSuggestion.instruction().to_string()];
    for d in catalog.diagrams.iter().filter(|d| d.used_for(ShotKind::Attribute)) {
        lines.push(format!(
            "package {}: {} => {}",
            d.package_name,
            render_classes(&d.classes),
            render_classes(&d.completion)
        ));
    }
    lines.push(format!(
        "package {}: {} =>",
        model.package_name(),
        render_classes(model.classes())
    ));
    Ok(Prompt::new(PromptKind::AttributeSuggestion, lines.join("\n")))
}

pub fn build_attribute_type_prompt(
    attribute_name: &str,
    catalog: &ShotCatalog,
) -> Result<Prompt, PromptError> {
    if attribute_name.trim().is_empty() {
        return Err(PromptError::PreconditionViolation("empty attribute name".into()));
    }
    let mut items: Vec<String> = catalog
        .attribute_type_pairs
        .iter()
        .filter(|s| !s.attribute_name.eq_ignore_ascii_case(attribute_name))
        .map(|s| format!("{} => {}", s.attribute_name, s.type_name))
        .collect();
    items.push(format!("{attribute_name} =>"));
    Ok(Prompt::new(
        PromptKind::AttributeType,
        format!("{}\n{}", PromptKind::AttributeType.instruction(), items.join(", ")),
    ))
}

pub fn build_association_name_prompt(
    a: &str,
    b: &str,
    catalog: &ShotCatalog,
) -> Result<Prompt, PromptError> {
    require_name(a)?;
    require_name(b)?;
    let mut items: Vec<String> = catalog
        .association_name_pairs
        .iter()
        .filter(|s| !mentions(&[&s.source, &s.target], &[a, b]))
        .map(|s| format!("{}, {} => {} ;", s.source, s.target, s.name))
        .collect();
    items.push(format!("{a}, {b} =>"));
    Ok(Prompt::new(
        PromptKind::AssociationName,
        format!("{}\n{}", PromptKind::AssociationName.instruction(), items.join(" ")),
    ))
}

pub fn build_association_type_prompt(
    a: &str,
    b: &str,
    catalog: &ShotCatalog,
) -> Result<Prompt, PromptError> {
    require_name(a)?;
    require_name(b)?;
    let mut lines = vec![PromptKind::AssociationType.instruction().to_string()];
    lines.extend(
        catalog
            .association_type_pairs
            .iter()
            .filter(|s| !mentions(&[&s.source, &s.target], &[a, b]))
            .map(|s| format!("{}, {} => {}", s.source, s.target, s.kind)),
    );
    lines.push(format!("{a}, {b} =>"));
    Ok(Prompt::new(PromptKind::AssociationType, lines.join("\n")))
}

pub fn build_inheritance_direction_prompt(
    a: &str,
    b: &str,
    catalog: &ShotCatalog,
) -> Result<Prompt, PromptError> {
    require_name(a)?;
    require_name(b)?;
    if a.eq_ignore_ascii_case(b) {
        return Err(PromptError::PreconditionViolation(format!(
            "inheritance pair needs two distinct classes, got {a} twice"
        )));
    }
    let mut lines = vec![PromptKind::InheritanceDirection.instruction().to_string()];
    lines.extend(
        catalog
            .inheritance_pairs
            .iter()
            .filter(|s| !mentions(&[&s.first, &s.second], &[a, b]))
            .map(|s| format!("{}, {} => {}", s.first, s.second, s.superclass)),
    );
    lines.push(format!("{a}, {b} =>"));
    Ok(Prompt::new(PromptKind::InheritanceDirection, lines.join("\n")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Association, AssociationKind};

    fn hospital() -> DomainModel {
        let mut m = DomainModel::new("HospitalSystem");
        for c in ["Hospital", "Staff", "Doctor"] {
            m.add_class(c).unwrap();
        }
        m.add_association(Association::new("Hospital", "Staff", AssociationKind::Aggregation))
            .unwrap();
        m.add_association(Association::new("Doctor", "Staff", AssociationKind::Association))
            .unwrap();
        m
    }

    #[test]
    fn instructions_lead_every_prompt() {
        let c = ShotCatalog::bundled();
        let m = hospital();
        let sel = PairSelection::from_model(&m, None);
        let prompts = [
            build_class_prompt(&m, &c, &sel).unwrap(),
            build_attribute_prompt(&m, &c).unwrap(),
            build_attribute_type_prompt("age", &c).unwrap(),
            build_association_name_prompt("Doctor", "Patient", &c).unwrap(),
            build_association_type_prompt("Doctor", "Staff", &c).unwrap(),
            build_inheritance_direction_prompt("staff", "doctor", &c).unwrap(),
        ];
        for p in prompts {
            assert_eq!(p.text.lines().next().unwrap(), p.kind.instruction());
        }
    }

    #[test]
    fn bfs_walks_from_focus() {
        let m = hospital();
        let sel = PairSelection::from_model(&m, None);
        assert_eq!(
            sel.groups(),
            [vec!["Doctor".to_string(), "Staff".into()], vec!["Hospital".into(), "Staff".into()]]
        );
        assert!(!sel.is_fallback());
    }

    #[test]
    fn singleton_fallback() {
        let mut m = DomainModel::new("P");
        m.add_class("Alpha").unwrap();
        let sel = PairSelection::from_model(&m, None);
        let p = build_class_prompt(&m, &ShotCatalog::default(), &sel).unwrap();
        assert_eq!(p.text, "Generate related concepts:\nP: [Alpha]");
    }

    #[test]
    fn empty_model_rejected() {
        let m = DomainModel::new("P");
        let sel = PairSelection::fixed(&[]);
        assert_eq!(
            build_class_prompt(&m, &ShotCatalog::bundled(), &sel),
            Err(PromptError::EmptyModel)
        );
        assert_eq!(
            build_attribute_prompt(&m, &ShotCatalog::bundled()),
            Err(PromptError::EmptyModel)
        );
    }

    #[test]
    fn type_prompt_drops_query_shot() {
        let p = build_attribute_type_prompt("age", &ShotCatalog::bundled()).unwrap();
        assert!(!p.text.contains("age => int"));
        assert!(p.text.ends_with(", age =>"));
        let empty = build_attribute_type_prompt("x", &ShotCatalog::default()).unwrap();
        assert_eq!(empty.text, "Generate attribute type:\nx =>");
    }

    #[test]
    fn association_prompts_drop_leaking_shots() {
        let c = ShotCatalog::bundled();
        let p = build_association_type_prompt("Plane", "Passenger", &c).unwrap();
        assert!(!p.text.contains("=> no"));
        let n = build_association_name_prompt("Doctor", "Patient", &c).unwrap();
        assert!(n.text.ends_with("employee, department => worksIn ; Doctor, Patient =>"));
        assert!(build_association_type_prompt("", "B", &c).is_err());
        assert!(build_inheritance_direction_prompt("A", "a", &c).is_err());
    }

    #[test]
    fn permutation_only_moves_query() {
        let c = ShotCatalog::bundled();
        let m = hospital();
        let base = PairSelection::from_model(&m, None);
        let texts: Vec<String> = (0..8)
            .map(|s| build_class_prompt(&m, &c, &base.clone().permuted(s)).unwrap().text)
            .collect();
        for t in &texts {
            let (head, _) = t.rsplit_once('\n').unwrap();
            assert_eq!(head, texts[0].rsplit_once('\n').unwrap().0);
        }
        assert!(texts.iter().any(|t| t != &texts[0]));
    }
}
