//! Turns completion text back into model elements.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::model::{AssociationKind, DomainModel, KNOWN_TYPES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResponseError {
    #[error("nothing usable in {0:?}")]
    Reject(String),
    #[error("unknown association kind {0:?}")]
    UnknownKind(String),
    #[error("{answer:?} is not one of ({first}, {second})")]
    NotInPair {
        answer: String,
        first: String,
        second: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameStyle {
    Pascal,
    Camel,
}

/// Cleans a raw name into an identifier: digits are dropped, any other
/// non-letter separates words, words after the first are capitalized and
/// the first letter follows `style`.
pub fn normalize_name(raw: &str, style: NameStyle) -> Result<String, ResponseError> {
    let stripped: String = raw.chars().filter(|c| !c.is_numeric()).collect();
    let mut out = String::new();
    for word in stripped.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        let mut chars = word.chars();
        let first = chars.next().expect("non-empty word");
        if out.is_empty() {
            match style {
                NameStyle::Pascal => out.extend(first.to_uppercase()),
                NameStyle::Camel => out.extend(first.to_lowercase()),
            }
        } else {
            out.extend(first.to_uppercase());
        }
        out.push_str(chars.as_str());
    }
    if out.is_empty() {
        Err(ResponseError::Reject(raw.to_string()))
    } else {
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedClassBatch {
    /// Bracketed pairs, in order of appearance.
    pub pairs: Vec<(String, String)>,
    /// Names that appeared in brackets of any other size.
    pub orphans: Vec<String>,
}

impl ParsedClassBatch {
    /// Every distinct name, first appearance first.
    pub fn names(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let all = self
            .pairs
            .iter()
            .flat_map(|(a, b)| [a, b])
            .chain(self.orphans.iter());
        for n in all {
            if seen.insert(n.clone()) {
                out.push(n.clone());
            }
        }
        out
    }

    /// Names not already on the canvas.
    pub fn new_classes(&self, model: &DomainModel) -> Vec<String> {
        self.names()
            .into_iter()
            .filter(|n| !model.has_class(n))
            .collect()
    }

    /// Renders the batch back into bracket text.
    pub fn render(&self) -> String {
        let mut groups: Vec<String> = self
            .pairs
            .iter()
            .map(|(a, b)| format!("[{a}, {b}]"))
            .collect();
        groups.extend(self.orphans.iter().map(|o| format!("[{o}]")));
        groups.join(", ")
    }
}

/// Closed `[...]` groups. A `[` inside an open group restarts it; an
/// unclosed trailing group is ignored.
fn bracket_groups(text: &str) -> Vec<&str> {
    let mut groups = Vec::new();
    let mut open: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match c {
            '[' => open = Some(i + 1),
            ']' => {
                if let Some(start) = open.take() {
                    groups.push(&text[start..i]);
                }
            }
            _ => {}
        }
    }
    groups
}

pub fn parse_class_response(text: &str) -> ParsedClassBatch {
    let mut batch = ParsedClassBatch::default();
    for group in bracket_groups(text) {
        let mut members: Vec<String> = Vec::new();
        for raw in group.split(',') {
            if let Ok(n) = normalize_name(raw, NameStyle::Pascal) {
                if !members.contains(&n) {
                    members.push(n);
                }
            }
        }
        if members.len() == 2 {
            let b = members.pop().expect("two members");
            let a = members.pop().expect("two members");
            batch.pairs.push((a, b));
        } else {
            batch.orphans.extend(members);
        }
    }
    batch
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedAttributeBatch {
    /// New attribute names per class, in order of appearance.
    pub per_class: BTreeMap<String, Vec<String>>,
}

impl ParsedAttributeBatch {
    pub fn is_empty(&self) -> bool {
        self.per_class.values().all(Vec::is_empty)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.per_class
            .iter()
            .flat_map(|(c, names)| names.iter().map(move |n| (c.as_str(), n.as_str())))
    }
}

fn segment_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(\p{Alphabetic}[\p{Alphabetic}\p{N} _]*?)\s*:?\s*\[([^\[\]]*)\]")
            .expect("valid regex")
    })
}

/// Reads `Class: [a, b]` segments (the colon is optional) and keeps, for
/// classes in `model`, the names the class does not have yet.
pub fn parse_attribute_response(text: &str, model: &DomainModel) -> ParsedAttributeBatch {
    let mut batch = ParsedAttributeBatch::default();
    for cap in segment_regex().captures_iter(text) {
        let Ok(class) = normalize_name(&cap[1], NameStyle::Pascal) else {
            continue;
        };
        let Some(entity) = model.class(&class) else {
            continue;
        };
        let existing: BTreeSet<String> = entity
            .attributes
            .iter()
            .filter_map(|a| normalize_name(&a.name, NameStyle::Camel).ok())
            .collect();
        let entry = batch.per_class.entry(class).or_default();
        for raw in cap[2].split(',') {
            let Ok(name) = normalize_name(raw, NameStyle::Camel) else {
                continue;
            };
            if !existing.contains(&name) && !entry.contains(&name) {
                entry.push(name);
            }
        }
    }
    batch.per_class.retain(|_, v| !v.is_empty());
    batch
}

fn after_last_arrow(text: &str) -> &str {
    text.rsplit_once("=>").map_or(text, |(_, tail)| tail)
}

/// The type named after the final `=>`. Known types come back in their
/// canonical spelling, anything else as a cleaned free token.
pub fn parse_attribute_type_response(text: &str) -> Result<String, ResponseError> {
    let token = after_last_arrow(text)
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .rfind(|t| t.chars().any(char::is_alphabetic))
        .ok_or_else(|| ResponseError::Reject(text.to_string()))?;
    let cleaned: String = token.chars().filter(|c| c.is_alphabetic()).collect();
    Ok(KNOWN_TYPES
        .iter()
        .find(|t| t.eq_ignore_ascii_case(&cleaned))
        .map_or(cleaned, |t| t.to_string()))
}

/// Answer to an association-type prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindAnswer {
    No,
    Kind(AssociationKind),
}

pub fn parse_association_type_response(text: &str) -> Result<KindAnswer, ResponseError> {
    let word = after_last_arrow(text)
        .split(|c: char| !c.is_alphabetic())
        .find(|w| !w.is_empty())
        .unwrap_or("")
        .to_lowercase();
    match word.as_str() {
        "no" => Ok(KindAnswer::No),
        "inheritance" => Ok(KindAnswer::Kind(AssociationKind::Inheritance)),
        "association" => Ok(KindAnswer::Kind(AssociationKind::Association)),
        "aggregation" => Ok(KindAnswer::Kind(AssociationKind::Aggregation)),
        "composition" => Ok(KindAnswer::Kind(AssociationKind::Composition)),
        _ => Err(ResponseError::UnknownKind(text.trim().to_string())),
    }
}

/// Returns whichever of `first`/`second` the answer names, in the caller's
/// spelling.
pub fn parse_inheritance_direction_response(
    text: &str,
    first: &str,
    second: &str,
) -> Result<String, ResponseError> {
    let not_in_pair = || ResponseError::NotInPair {
        answer: text.trim().to_string(),
        first: first.to_string(),
        second: second.to_string(),
    };
    let answer = after_last_arrow(text)
        .split([',', ';', '\n'])
        .find(|s| s.chars().any(char::is_alphabetic))
        .ok_or_else(not_in_pair)?;
    let answer = normalize_name(answer, NameStyle::Camel).map_err(|_| not_in_pair())?;
    [first, second]
        .into_iter()
        .find(|m| {
            normalize_name(m, NameStyle::Camel).is_ok_and(|n| n.eq_ignore_ascii_case(&answer))
        })
        .map(str::to_string)
        .ok_or_else(not_in_pair)
}

/// Association label: the first phrase after an optional `=>`, camelCased.
pub fn parse_association_name_response(text: &str) -> Result<String, ResponseError> {
    let phrase = after_last_arrow(text)
        .split([',', ';', '\n'])
        .find(|s| s.chars().any(char::is_alphabetic))
        .ok_or_else(|| ResponseError::Reject(text.to_string()))?;
    normalize_name(phrase, NameStyle::Camel)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOSPITAL_ANSWER: &str = "Hospital: [name]; Staff: [name, speciality, salary]; \
        Doctor: [speciality, qualification]; Patient: [name, id, phone number]; \
        Appointment: [date, time, doctorName]; Address: [street, city, state, postal code, country]";

    fn hospital_model() -> DomainModel {
        let mut m = DomainModel::new("Hospital");
        for c in ["Hospital", "Staff", "Doctor", "Patient", "Appointment", "Address"] {
            m.add_class(c).unwrap();
        }
        m.add_attribute("Hospital", "name", "String").unwrap();
        m.add_attribute("Hospital", "rooms number", "int").unwrap();
        m.add_attribute("Staff", "name", "String").unwrap();
        m.add_attribute("Doctor", "speciality", "String").unwrap();
        m.add_attribute("Doctor", "qualification", "String").unwrap();
        m
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_name("phone number", NameStyle::Camel).unwrap(), "phoneNumber");
        assert_eq!(normalize_name("Room101", NameStyle::Pascal).unwrap(), "Room");
        assert!(normalize_name("42", NameStyle::Pascal).is_err());
        assert_eq!(normalize_name(" doctorName ", NameStyle::Camel).unwrap(), "doctorName");
        assert_eq!(normalize_name("patient", NameStyle::Pascal).unwrap(), "Patient");
    }

    #[test]
    fn class_pairs_and_canvas() {
        let mut m = DomainModel::new("HospitalSystem");
        for c in ["Hospital", "Staff", "Doctor"] {
            m.add_class(c).unwrap();
        }
        let b = parse_class_response("[Patient, Appointment], [Address, Hospital]");
        assert_eq!(b.pairs.len(), 2);
        assert_eq!(b.new_classes(&m), ["Patient", "Appointment", "Address"]);
        assert!(parse_class_response("").pairs.is_empty());
        assert!(parse_class_response("[Hospital, Staff]").new_classes(&m).is_empty());
        let odd = parse_class_response("[A1, B], [C, D, E], [F");
        assert_eq!(odd.pairs, [("A".to_string(), "B".to_string())]);
        assert_eq!(odd.orphans, ["C", "D", "E"]);
    }

    #[test]
    fn hospital_answer_set_difference() {
        let b = parse_attribute_response(HOSPITAL_ANSWER, &hospital_model());
        assert_eq!(b.per_class["Staff"], ["speciality", "salary"]);
        assert_eq!(b.per_class["Patient"], ["name", "id", "phoneNumber"]);
        assert_eq!(b.per_class["Appointment"], ["date", "time", "doctorName"]);
        assert_eq!(
            b.per_class["Address"],
            ["street", "city", "state", "postalCode", "country"]
        );
        assert!(!b.per_class.contains_key("Hospital"));
        assert!(!b.per_class.contains_key("Doctor"));
        assert_eq!(b.pairs().count(), 13);
    }

    #[test]
    fn attribute_segments_variants() {
        let m = hospital_model();
        assert!(parse_attribute_response("Clinic: [x]", &m).is_empty());
        assert!(parse_attribute_response("Hospital: [name]", &m).is_empty());
        let b = parse_attribute_response("Patient[age];Address:[zip]", &m);
        assert_eq!(b.per_class["Patient"], ["age"]);
        assert_eq!(b.per_class["Address"], ["zip"]);
    }

    #[test]
    fn type_answers() {
        assert_eq!(parse_attribute_type_response("street => String").unwrap(), "String");
        assert_eq!(parse_attribute_type_response(" int").unwrap(), "int");
        assert_eq!(parse_attribute_type_response("Boolean").unwrap(), "boolean");
        assert!(parse_attribute_type_response("").is_err());
    }

    #[test]
    fn kind_answers() {
        assert_eq!(
            parse_association_type_response("inheritance").unwrap(),
            KindAnswer::Kind(AssociationKind::Inheritance)
        );
        assert_eq!(parse_association_type_response(" no").unwrap(), KindAnswer::No);
        assert!(matches!(
            parse_association_type_response("maybe"),
            Err(ResponseError::UnknownKind(_))
        ));
    }

    #[test]
    fn direction_answers() {
        assert_eq!(parse_inheritance_direction_response("staff", "Doctor", "Staff").unwrap(), "Staff");
        assert_eq!(parse_inheritance_direction_response("DOCTOR", "staff", "doctor").unwrap(), "doctor");
        assert!(matches!(
            parse_inheritance_direction_response("Vehicle", "dog", "animal"),
            Err(ResponseError::NotInPair { .. })
        ));
    }

    #[test]
    fn name_answers() {
        assert_eq!(parse_association_name_response(" worksIn").unwrap(), "worksIn");
        assert_eq!(parse_association_name_response("treats patients").unwrap(), "treatsPatients");
        assert!(parse_association_name_response("").is_err());
    }
}
