//! Round-trip and fuzz checks for the text notation.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use modelassist_core::text::{from_interchange, parse_model, serialize_model, to_interchange, TextError};

use crate::gen;

/// Text and interchange round trips of one random model.
pub fn check_round_trip(seed: u64) {
    let m = gen::random_model(seed);
    let text = serialize_model(&m);
    let back = parse_model(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{text}"));
    assert_eq!(back, m, "seed {seed}");
    assert_eq!(serialize_model(&back), text, "seed {seed}");
    assert_eq!(from_interchange(&to_interchange(&m)).unwrap(), m, "seed {seed}");
}

const FRAGMENTS: &[&str] = &[
    "package", "class", "{", "}", ":", "-->", "o--", "*--", "-|>", "#", "\n", "\r\n", " ", "\t", "A", "Bb", "x1",
    "String", "é", "名前", "\"", ",", "[", "]", "=>", "--", "-", "|", ">", "o", "*", "\u{0}", "\u{feff}",
];

fn fragment_soup(rng: &mut ChaCha8Rng) -> String {
    (0..rng.random_range(0..40))
        .map(|_| *FRAGMENTS.choose(rng).unwrap())
        .collect()
}

fn mutate(rng: &mut ChaCha8Rng, text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    for _ in 0..rng.random_range(1..6) {
        let pos = if chars.is_empty() { 0 } else { rng.random_range(0..=chars.len()) };
        match rng.random_range(0..4) {
            0 if pos < chars.len() => {
                chars.remove(pos);
            }
            1 => {
                let frag = FRAGMENTS.choose(rng).unwrap();
                for (i, c) in frag.chars().enumerate() {
                    chars.insert(pos + i, c);
                }
            }
            2 => chars.truncate(pos),
            _ => {
                if pos < chars.len() {
                    chars[pos] = char::from_u32(rng.random_range(0..0x3000)).unwrap_or('?');
                }
            }
        }
    }
    chars.into_iter().collect()
}

/// Malformed inputs: fragment soup and mutated valid models, alternating.
pub fn fuzz_corpus(size: u64) -> Vec<String> {
    let mut rng = gen::rng(0xF022);
    (0..size)
        .map(|i| {
            if i % 2 == 0 {
                fragment_soup(&mut rng)
            } else {
                mutate(&mut rng, &serialize_model(&gen::random_model(i)))
            }
        })
        .collect()
}

/// The input either parses to a model that re-serializes stably or yields
/// an error with a position. Returns whether it parsed.
pub fn check_fuzz_input(input: &str) -> bool {
    let outcome = std::panic::catch_unwind(|| parse_model(input));
    let result = outcome.unwrap_or_else(|_| panic!("parser panicked on {input:?}"));
    let _ = from_interchange(&serde_json::Value::String(input.to_string()));
    match result {
        Ok(m) => {
            assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m, "{input:?}");
            true
        }
        Err(TextError::Parse(e)) => {
            assert!(e.line >= 1 && e.column >= 1, "{input:?}: {e:?}");
            false
        }
        Err(TextError::Semantic { line, .. }) => {
            assert!(line >= 1);
            false
        }
        Err(TextError::Interchange(e)) => panic!("text parser reported an interchange error: {e}"),
    }
}
