//! Shared fixtures and an independent dense re-implementation of the ranking
//! pipeline used as a test oracle.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod dense;
pub mod graph_oracle;
pub mod http;
pub mod synth;
