//! Holder crate for the acceptance runs in `tests/acceptance.rs`.
