//! Runs the command-line binary on the hospital example.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

pub const CLASSES: [&str; 3] = ["Address", "Appointment", "Patient"];

pub const ATTRIBUTES: [&str; 13] = [
    "Staff.speciality",
    "Staff.salary",
    "Patient.name",
    "Patient.id",
    "Patient.phoneNumber",
    "Appointment.date",
    "Appointment.time",
    "Appointment.doctorName",
    "Address.street",
    "Address.city",
    "Address.state",
    "Address.postalCode",
    "Address.country",
];

pub const ASSOCIATION: (&str, &str, &str) = ("Doctor", "Staff", "inheritance");

/// `complete hospital.dm --mock fixtures --json`, returning stdout.
pub fn complete_hospital(binary: &Path) -> String {
    let fixtures = crate::fixtures();
    let out = Command::new(binary)
        .arg("complete")
        .arg(fixtures.join("hospital.dm"))
        .arg("--mock")
        .arg(&fixtures)
        .arg("--json")
        .env_remove("MODELASSIST_PROVIDER_URL")
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "exit {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn names(value: &Value, key: &str, f: impl Fn(&Value) -> String) -> BTreeSet<String> {
    value[key].as_array().expect(key).iter().map(|c| f(&c["payload"])).collect()
}

/// Exactly the expected classes, attributes and association, with the
/// same bytes on every run.
pub fn check_hospital_completion(binary: &Path, runs: usize) {
    let first = complete_hospital(binary);
    for run in 1..runs {
        assert_eq!(complete_hospital(binary), first, "run {run} differs");
    }
    let v: Value = serde_json::from_str(&first).expect("json output");
    let classes = names(&v, "classes", |p| p["name"].as_str().unwrap().to_string());
    assert_eq!(classes, CLASSES.iter().map(|s| s.to_string()).collect());
    let attributes = names(&v, "attributes", |p| {
        format!("{}.{}", p["owner"].as_str().unwrap(), p["name"].as_str().unwrap())
    });
    assert_eq!(attributes, ATTRIBUTES.iter().map(|s| s.to_string()).collect());
    let associations = names(&v, "associations", |p| {
        format!("{} {} {}", p["source"].as_str().unwrap(), p["target"].as_str().unwrap(), p["kind"].as_str().unwrap())
    });
    let (s, t, k) = ASSOCIATION;
    assert_eq!(associations, BTreeSet::from([format!("{s} {t} {k}")]));
}
