//! Metric reference values, overlap properties and the synthetic log
//! fixture with its precomputed results.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::Rng;
use serde_json::Value;

use modelassist_core::analysis::{analyze, load_dataset, AnalysisOptions};
use modelassist_core::metrics::{
    kruskal_wallis, overlap_coefficient, overlap_matrix, ElementSet, MetricsError, SynonymBags,
};

use crate::gen;

pub fn set(names: &[&str]) -> ElementSet {
    ElementSet::from_names(names.iter().copied())
}

/// Two- and three-group statistics against scipy, plus the tie cases.
pub fn check_kruskal_wallis_reference() {
    // Rank sums 6 and 15 over n = 6: 12/42 * (36/3 + 225/3) - 21.
    let derived = 12.0 / 42.0 * (36.0 / 3.0 + 225.0 / 3.0) - 21.0;
    let kw = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
    assert!((kw.h - derived).abs() < 1e-9);
    assert!((kw.h - 3.857142857142857).abs() < 1e-9);
    // scipy.stats.kruskal
    assert!((kw.p_value - 0.049534613435626915).abs() < 1e-3);
    assert_eq!(kw.dof, 1);

    let kw = kruskal_wallis(&[vec![1.0, 2.0, 2.0, 3.0], vec![2.0, 3.0, 5.0], vec![7.0, 7.0, 1.0]]).unwrap();
    assert!((kw.h - 1.784810126582273).abs() < 1e-9);
    assert!((kw.p_value - 0.4096692864086062).abs() < 1e-9);
    assert_eq!(kw.dof, 2);

    let same = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
    assert_eq!((same.h, same.p_value), (0.0, 1.0));
    let flat = kruskal_wallis(&[vec![4.0, 4.0], vec![4.0]]).unwrap();
    assert_eq!((flat.h, flat.p_value), (0.0, 1.0));

    assert!(matches!(kruskal_wallis(&[vec![1.0]]), Err(MetricsError::DegenerateInput(_))));
    assert!(matches!(kruskal_wallis(&[vec![1.0], vec![]]), Err(MetricsError::DegenerateInput(_))));
}

pub fn check_overlap_reference() {
    let v = overlap_coefficient(&set(&["a", "b", "c"]), &set(&["b", "c", "d"]), None).unwrap();
    assert_eq!(v, 2.0 / 3.0);
    let bags = SynonymBags::parse("supplier, seller").unwrap();
    let a = set(&["supplier", "x"]);
    let b = set(&["seller", "y"]);
    assert_eq!(overlap_coefficient(&a, &b, None).unwrap(), 0.0);
    assert_eq!(overlap_coefficient(&a, &b, Some(&bags)).unwrap(), 0.5);
    assert!(matches!(overlap_coefficient(&set(&[]), &a, None), Err(MetricsError::EmptySet)));

    let m = overlap_matrix(&[a.clone(), a.clone()], None).unwrap();
    assert_eq!((m.mean, m.pairs), (1.0, 1));
    let m = overlap_matrix(&[set(&["p"]), set(&["q"]), set(&["r"])], None).unwrap();
    assert_eq!((m.mean, m.pairs), (0.0, 3));
    assert!(matches!(overlap_matrix(&[a], None), Err(MetricsError::TooFewModels(_))));
}

const VOCAB: [&str; 10] = ["Bank", "Client", "Customer", "Loan", "Card", "Account", "Ledger", "Branch", "Teller", "Vault"];

pub fn pick_set(mask: u16, attr_mask: u16) -> ElementSet {
    let mut names = Vec::new();
    for (i, c) in VOCAB.iter().enumerate() {
        if mask & (1 << i) != 0 {
            names.push(c.to_string());
            if attr_mask & (1 << i) != 0 {
                names.push(format!("{c}.name"));
            }
        }
    }
    ElementSet::from_names(names)
}

pub fn bags_from(assignment: &[u8]) -> SynonymBags {
    let mut groups: BTreeMap<u8, Vec<&str>> = BTreeMap::new();
    for (name, g) in VOCAB.iter().zip(assignment) {
        groups.entry(*g).or_default().push(name);
    }
    let text: Vec<String> = groups.values().map(|g| g.join(", ")).collect();
    SynonymBags::parse(&text.join("\n")).unwrap()
}

/// True when no two elements of the set share a bag id.
pub fn injective(bags: &SynonymBags, s: &ElementSet) -> bool {
    bags.map_set(s).len() == s.len()
}

/// Symmetry, bounds, identity, disjoint bags, coarsening when bag mapping
/// is injective, and singleton bags agreeing with exact matching.
pub fn check_overlap_properties(m1: u16, m2: u16, a1: u16, a2: u16, assignment: &[u8]) {
    let (x, y) = (pick_set(m1, a1), pick_set(m2, a2));
    let bags = bags_from(assignment);
    for b in [None, Some(&bags)] {
        let xy = overlap_coefficient(&x, &y, b).unwrap();
        assert_eq!(xy, overlap_coefficient(&y, &x, b).unwrap());
        assert!((0.0..=1.0).contains(&xy));
        assert_eq!(overlap_coefficient(&x, &x, b).unwrap(), 1.0);
    }
    let bx = bags.map_set(&x);
    let by = bags.map_set(&y);
    if bx.is_disjoint(&by) {
        assert_eq!(overlap_coefficient(&x, &y, Some(&bags)).unwrap(), 0.0);
    }
    let exact = overlap_coefficient(&x, &y, None).unwrap();
    if injective(&bags, &x) && injective(&bags, &y) {
        assert!(overlap_coefficient(&x, &y, Some(&bags)).unwrap() >= exact);
    }
    let singletons: Vec<u8> = (0..10).collect();
    let identity = bags_from(&singletons);
    assert_eq!(overlap_coefficient(&x, &y, Some(&identity)).unwrap(), exact);
}

pub fn check_overlap_random(seed: u64) {
    let mut rng = gen::rng(seed);
    let assignment: Vec<u8> = (0..10).map(|_| rng.random_range(0..6)).collect();
    check_overlap_properties(
        rng.random_range(1..1024),
        rng.random_range(1..1024),
        rng.random(),
        rng.random(),
        &assignment,
    );
}

fn fixture_root() -> PathBuf {
    crate::fixtures().join("analyze")
}

fn close(a: f64, b: &Value, what: &str) {
    let b = b.as_f64().unwrap_or_else(|| panic!("{what}: expected a number, got {b}"));
    assert!((a - b).abs() < 1e-9, "{what}: {a} vs {b}");
}

/// Runs the analysis over the generated logs and compares every number
/// with the values the generator computed on its own.
pub fn check_synthetic_fixture() {
    let expected: Value = serde_json::from_str(&std::fs::read_to_string(fixture_root().join("expected.json")).unwrap()).unwrap();
    let data = load_dataset(&fixture_root(), None).unwrap();
    let report = analyze(&data, &AnalysisOptions::default()).unwrap();
    assert!(report.notices.is_empty(), "{:?}", report.notices);

    let logs = expected["logs"].as_array().unwrap();
    assert_eq!(report.logs.len(), logs.len());
    for want in logs {
        let file = want["file"].as_str().unwrap();
        let got = report.logs.iter().find(|l| l.file.ends_with(file)).unwrap();
        assert_eq!(got.mode, want["mode"].as_str().unwrap());
        for (rate, key) in [(&got.acceptance, "acceptance"), (&got.contribution, "contribution")] {
            assert_eq!(rate.numerator as u64, want[key]["numerator"].as_u64().unwrap(), "{file} {key}");
            assert_eq!(rate.denominator as u64, want[key]["denominator"].as_u64().unwrap(), "{file} {key}");
            assert!((0.0..=1.0).contains(&rate.value));
        }
        assert!(got.contribution.numerator <= got.acceptance.numerator);
        close(got.duration_secs.unwrap(), &want["durationSecs"], file);
        let log = data.logs.iter().find(|l| l.path.ends_with(file)).unwrap();
        let names: Vec<&str> = want["elements"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        assert_eq!(ElementSet::of(&log.final_model), set(&names), "{file}");
    }

    for group in &report.groups {
        let want = &expected["groups"][&group.key];
        let time = group.time.unwrap();
        close(time.mean.as_secs_f64(), &want["time"]["mean"], "time mean");
        close(time.std.as_secs_f64(), &want["time"]["std"], "time std");
        close(time.completion_ratio, &want["time"]["completionRatio"], "completion");
        for (spread, key) in [(group.acceptance, "acceptance"), (group.contribution, "contribution")] {
            match spread {
                None => assert!(want[key].is_null(), "{} {key}", group.key),
                Some(s) => {
                    close(s.mean, &want[key]["mean"], key);
                    close(s.std, &want[key]["std"], key);
                    assert_eq!(s.n as u64, want[key]["n"].as_u64().unwrap());
                }
            }
        }
        let row = report.overlap.iter().find(|r| r.mode == group.key).unwrap();
        let exact = row.exact.unwrap();
        let bagged = row.bagged.unwrap();
        close(exact.mean, &want["overlapExact"]["mean"], "exact overlap");
        close(exact.std, &want["overlapExact"]["std"], "exact overlap std");
        close(bagged.mean, &want["overlapBagged"]["mean"], "bagged overlap");
        close(bagged.std, &want["overlapBagged"]["std"], "bagged overlap std");
        assert_eq!(exact.n, 6);
    }

    for want in expected["pairwise"].as_array().unwrap() {
        let got = report
            .pairwise
            .iter()
            .find(|p| p.first == want["first"].as_str().unwrap() && p.second == want["second"].as_str().unwrap())
            .unwrap();
        for (test, key) in [(got.time, "time"), (got.acceptance, "acceptance"), (got.contribution, "contribution")] {
            match (test, want.get(key)) {
                (Some(kw), Some(p)) => close(kw.p_value, p, key),
                (None, None) => {}
                other => panic!("{key}: {other:?}"),
            }
        }
    }
}
