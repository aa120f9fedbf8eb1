//! Regenerates `fixtures/hospital.mock.json`: runs a few recommendation
//! iterations over `fixtures/hospital.dm` against a scripted provider
//! and stores every prompt it saw with the scripted answer.
//!
//! cargo run -p modelassist-core --example record_hospital_fixture -- fixtures/hospital.dm fixtures/hospital.mock.json

use std::collections::BTreeMap;
use std::sync::Arc;

use modelassist_core::gateway::{fixture_record, Gateway, ScriptedProvider};
use modelassist_core::prompt::{PromptKind, ShotCatalog};
use modelassist_core::recommend::{Recommender, RecommenderConfig};
use modelassist_core::text::parse_model;

const CLASSES: &str = "[Patient, Appointment], [Address, Hospital]";
const ATTRIBUTES: &str = "Hospital: [name]; Staff: [name, speciality, salary]; \
Doctor: [speciality, qualification]; Patient: [name, id, phone number]; \
Appointment: [date, time, doctorName]; Address: [street, city, state, postal code, country]";

fn attribute_type(name: &str) -> &'static str {
    match name {
        "salary" => "float",
        "id" => "int",
        "date" => "Date",
        _ => "String",
    }
}

fn answer(prompt: &str) -> String {
    let first = prompt.lines().next().unwrap_or("");
    let last = prompt.lines().last().unwrap_or("");
    let query = last.rsplit(", ").next().unwrap_or(last);
    if first == PromptKind::ClassSuggestion.instruction() {
        CLASSES.into()
    } else if first == PromptKind::AttributeSuggestion.instruction() {
        ATTRIBUTES.into()
    } else if first == PromptKind::AttributeType.instruction() {
        attribute_type(query.trim_end_matches(" =>")).into()
    } else if first == PromptKind::AssociationType.instruction() {
        if last == "Doctor, Staff =>" || last == "Staff, Doctor =>" {
            "inheritance".into()
        } else {
            "no".into()
        }
    } else if first == PromptKind::InheritanceDirection.instruction() {
        "staff".into()
    } else {
        "has".into()
    }
}

#[tokio::main(flavor = "current_thread")]
async fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [model_path, out_path] = args.as_slice() else {
        eprintln!("usage: record_hospital_fixture <model.dm> <out.json>");
        std::process::exit(2);
    };
    let model = parse_model(&std::fs::read_to_string(model_path).expect("read model")).expect("parse model");
    let provider = Arc::new(ScriptedProvider::new(|req, _| Ok(answer(&req.prompt))));
    let recommender = Recommender::new(
        Arc::new(Gateway::new(provider.clone())),
        Arc::new(ShotCatalog::bundled()),
        RecommenderConfig::default(),
    );
    for seed in 0..16 {
        recommender.run_iteration(&model, None, seed).await.expect("iteration");
    }
    let prompts: BTreeMap<String, String> = provider.prompts().into_iter().map(|p| {
        let a = answer(&p);
        (p, a)
    }).collect();
    let records: Vec<_> = prompts.iter().map(|(p, a)| fixture_record(p, a)).collect();
    let json = serde_json::to_string_pretty(&records).expect("serialize");
    std::fs::write(out_path, json + "\n").expect("write fixture");
    println!("{} prompts recorded", records.len());
}
