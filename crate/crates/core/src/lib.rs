//! Multilingual patent prior-art retrieval.
//!
//! Patents are parsed into a [`corpus::PatentStore`], analyzed into five term
//! spaces (three lemma languages, English phrases, concepts) and indexed. Each
//! topic patent is scored against every index by two models, optionally inside
//! a citation- and metadata-derived working set. The ten lists are merged with
//! regression-predicted confidences and re-ranked on metadata features.

pub mod analyze;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod index;
pub mod pipeline;
pub mod regress;
pub mod rerank;
pub mod retrieve;
pub mod syngen;
pub mod terminology;
pub mod workingset;

pub use error::{Error, Result};
