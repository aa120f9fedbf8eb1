use std::time::Instant;

use modelassist_core::prompt::{
    build_attribute_prompt, build_attribute_type_prompt, build_class_prompt, build_inheritance_direction_prompt,
    PairSelection, PromptKind, ShotCatalog,
};

use modelassist_testkit::goldens::{hospital_canvas, hospital_with_attributes, ATTRIBUTE, ATTRIBUTE_TYPE, CLASS, INHERITANCE};

#[test]
fn class_prompt_matches_golden() {
    let m = hospital_canvas();
    let selection = PairSelection::from_model(&m, Some("Hospital"));
    let p = build_class_prompt(&m, &ShotCatalog::bundled(), &selection).unwrap();
    assert_eq!(p.kind, PromptKind::ClassSuggestion);
    assert_eq!(p.text, CLASS);
    assert_eq!(p.params.max_tokens, 8);
}

#[test]
fn attribute_prompt_matches_golden() {
    let p = build_attribute_prompt(&hospital_with_attributes(), &ShotCatalog::bundled()).unwrap();
    assert_eq!(p.text, ATTRIBUTE);
    assert_eq!(p.params.max_tokens, 40);
}

#[test]
fn attribute_type_prompt_matches_golden() {
    let p = build_attribute_type_prompt("street", &ShotCatalog::bundled()).unwrap();
    assert_eq!(p.text, ATTRIBUTE_TYPE);
    assert_eq!(p.params.max_tokens, 2);
}

#[test]
fn inheritance_prompt_matches_golden() {
    let p = build_inheritance_direction_prompt("staff", "doctor", &ShotCatalog::bundled()).unwrap();
    assert_eq!(p.text, INHERITANCE);
}

#[test]
fn goldens_are_fast_and_stable() {
    let catalog = ShotCatalog::bundled();
    let m = hospital_canvas();
    let start = Instant::now();
    for _ in 0..100 {
        let sel = PairSelection::from_model(&m, Some("Hospital"));
        assert_eq!(build_class_prompt(&m, &catalog, &sel).unwrap().text, CLASS);
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn bundled_catalog_validates() {
    ShotCatalog::bundled().validate().unwrap();
}
