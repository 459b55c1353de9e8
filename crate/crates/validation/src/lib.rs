//! Acceptance suite for `reluscape`; the criteria live in `tests/acceptance.rs`
//! and share the random instance generators of the core crate's tests.
