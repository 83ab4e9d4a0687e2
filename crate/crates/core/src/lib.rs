//! Dual word/embedding neighbor recommendations for exploring (possibly
//! multilingual) document collections.
//!
//! Every document gets two ranked neighbor lists: *word neighbors* by TF-IDF
//! similarity over its own terms, and *embedding neighbors* found after its terms
//! are replaced by their closest terms in an aligned multilingual word embedding
//! space. The [`graph`] module measures how well connected the resulting
//! recommendation network is.

pub mod bundle;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod index;
pub mod service;

pub use error::{Error, Result};
