use std::time::Instant;

use proptest::prelude::*;
use modelassist_core::text::{from_interchange, parse_model, serialize_model, to_interchange};
use modelassist_testkit::{dsl, gen as common};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn text_round_trip(seed in any::<u64>()) {
        let m = common::random_model(seed);
        let text = serialize_model(&m);
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(serialize_model(&back), text);
    }

    #[test]
    fn interchange_round_trip(seed in any::<u64>()) {
        let m = common::random_model(seed);
        let back = from_interchange(&to_interchange(&m)).unwrap();
        prop_assert_eq!(back, m);
    }
}

/// Ten thousand malformed inputs: every one either parses to a model
/// that re-serializes stably or yields an error with a position.
#[test]
fn fuzz_corpus_never_panics() {
    let start = Instant::now();
    let parsed = dsl::fuzz_corpus(10_000).iter().filter(|input| dsl::check_fuzz_input(input)).count();
    assert!(parsed > 0);
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn interchange_rejects_garbage() {
    for doc in [
        serde_json::json!(null),
        serde_json::json!({"packageName": "P", "classes": [{"name": "A1"}]}),
        serde_json::json!({"packageName": "P", "classes": [], "associations": [{"source": "A", "target": "B", "kind": "association"}]}),
    ] {
        assert!(from_interchange(&doc).is_err(), "{doc}");
    }
}
