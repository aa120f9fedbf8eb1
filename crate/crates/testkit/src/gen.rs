//! Random models and candidate stores.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modelassist_core::model::{Association, AssociationKind, DomainModel};

pub const KINDS: [AssociationKind; 4] = [
    AssociationKind::Association,
    AssociationKind::Aggregation,
    AssociationKind::Composition,
    AssociationKind::Inheritance,
];

const TYPES: [&str; 7] = ["String", "int", "float", "boolean", "Date", "double", "Money2"];
const LETTERS: &[char] = &[
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'k', 'l', 'm', 'n', 'o', 'p', 'r', 's', 't', 'u', 'x', 'é', 'ß',
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn word(rng: &mut ChaCha8Rng, capital: bool) -> String {
    let len = rng.random_range(1..9);
    let mut s: String = (0..len).map(|_| *LETTERS.choose(rng).unwrap()).collect();
    if capital {
        let mut c = s.chars();
        let first = c.next().unwrap().to_uppercase().collect::<String>();
        s = first + c.as_str();
    }
    s
}

/// A random valid model without candidates.
pub fn random_model(seed: u64) -> DomainModel {
    let mut rng = rng(seed);
    let mut m = DomainModel::new(&word(&mut rng, true));
    let classes = rng.random_range(0..9);
    for _ in 0..classes {
        let name = word(&mut rng, true);
        if m.add_class(&name).is_err() {
            continue;
        }
        for _ in 0..rng.random_range(0..5) {
            let attr = word(&mut rng, false);
            let ty = *TYPES.choose(&mut rng).unwrap();
            let _ = m.add_attribute(&name, &attr, ty);
        }
    }
    let names: Vec<String> = m.class_names().map(str::to_string).collect();
    if names.len() >= 2 {
        for _ in 0..rng.random_range(0..names.len() * 2) {
            let a = names.choose(&mut rng).unwrap().clone();
            let b = names.choose(&mut rng).unwrap().clone();
            let kind = *KINDS.choose(&mut rng).unwrap();
            let mut assoc = Association::new(&a, &b, kind);
            if kind != AssociationKind::Inheritance && rng.random_bool(0.5) {
                assoc = assoc.named(&word(&mut rng, false));
            }
            let _ = m.add_association(assoc);
        }
    }
    m
}

/// Adds class, attribute and association candidates with random counts.
pub fn add_random_candidates(model: &mut DomainModel, seed: u64) {
    use modelassist_core::model::{AttributeSuggestion, CandidatePayload, ClassPair, ClassSuggestion};
    let mut rng = rng(seed ^ 0x5EED);
    let canvas: Vec<String> = model.class_names().map(str::to_string).collect();
    let mut suggested = Vec::new();
    for _ in 0..rng.random_range(0..6) {
        let name = word(&mut rng, true);
        let companions = match canvas.choose(&mut rng) {
            Some(c) if rng.random_bool(0.5) => vec![ClassPair::new(&name, c)],
            _ => vec![],
        };
        let payload = CandidatePayload::Class(ClassSuggestion {
            name: name.clone(),
            companions,
        });
        if model.upsert_candidate_by(payload, rng.random_range(1..5)).is_ok() {
            suggested.push(name);
        }
    }
    for _ in 0..rng.random_range(0..6) {
        let Some(owner) = canvas.choose(&mut rng).cloned() else { break };
        let payload = CandidatePayload::Attribute(AttributeSuggestion {
            owner,
            name: word(&mut rng, false),
            type_name: TYPES.choose(&mut rng).unwrap().to_string(),
            type_fallback: false,
        });
        let _ = model.upsert_candidate_by(payload, rng.random_range(1..5));
    }
    let ends: Vec<String> = canvas.iter().chain(&suggested).cloned().collect();
    if ends.len() >= 2 {
        for _ in 0..rng.random_range(0..4) {
            let a = ends.choose(&mut rng).unwrap();
            let b = ends.choose(&mut rng).unwrap();
            let kind = *KINDS.choose(&mut rng).unwrap();
            let mut assoc = Association::new(a, b, kind);
            if kind != AssociationKind::Inheritance && rng.random_bool(0.3) {
                assoc = assoc.named(&word(&mut rng, false));
            }
            let _ = model.upsert_candidate_by(CandidatePayload::Association(assoc), 1);
        }
    }
}
