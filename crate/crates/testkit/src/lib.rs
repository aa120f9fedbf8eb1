//! Random inputs, brute-force oracles and scripted harnesses shared by the
//! integration tests and the acceptance suite. Checks panic on failure.

use std::path::PathBuf;

pub mod differential;
pub mod dsl;
pub mod e2e;
pub mod gateway;
pub mod gen;
pub mod goldens;
pub mod metrics;
pub mod ranking;
pub mod replay;
pub mod service;

/// The repository's `fixtures/` directory.
pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
