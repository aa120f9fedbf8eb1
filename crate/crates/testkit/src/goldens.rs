//! Byte-exact prompts for the hospital example.

use modelassist_core::model::{Association, AssociationKind, DomainModel};
use modelassist_core::prompt::{
    build_attribute_prompt, build_attribute_type_prompt, build_class_prompt, build_inheritance_direction_prompt,
    PairSelection, ShotCatalog,
};

pub const CLASS: &str = include_str!("../../../fixtures/golden/class_prompt.txt");
pub const ATTRIBUTE: &str = include_str!("../../../fixtures/golden/attribute_prompt.txt");
pub const ATTRIBUTE_TYPE: &str = include_str!("../../../fixtures/golden/attribute_type_prompt.txt");
pub const INHERITANCE: &str = include_str!("../../../fixtures/golden/inheritance_prompt.txt");

/// Hospital, Staff and Doctor with their two associations.
pub fn hospital_canvas() -> DomainModel {
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

/// Six classes, the first three with attributes.
pub fn hospital_with_attributes() -> DomainModel {
    let mut m = DomainModel::new("Hospital");
    for c in ["Hospital", "Staff", "Doctor", "Patient", "Appointment", "Address"] {
        m.add_class(c).unwrap();
    }
    for (c, a) in [
        ("Hospital", "name"),
        ("Hospital", "rooms number"),
        ("Staff", "name"),
        ("Doctor", "speciality"),
        ("Doctor", "qualification"),
    ] {
        m.add_attribute(c, a, "String").unwrap();
    }
    m
}

/// Builds the four prompts and compares them with the golden files.
pub fn check_goldens() {
    let catalog = ShotCatalog::bundled();
    let m = hospital_canvas();
    let selection = PairSelection::from_model(&m, Some("Hospital"));
    assert_eq!(build_class_prompt(&m, &catalog, &selection).unwrap().text, CLASS);
    assert_eq!(build_attribute_prompt(&hospital_with_attributes(), &catalog).unwrap().text, ATTRIBUTE);
    assert_eq!(build_attribute_type_prompt("street", &catalog).unwrap().text, ATTRIBUTE_TYPE);
    assert_eq!(build_inheritance_direction_prompt("staff", "doctor", &catalog).unwrap().text, INHERITANCE);
}
