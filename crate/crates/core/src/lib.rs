//! Argumentative-segment summarization pipeline for long legal decisions.
//!
//! Documents are segmented with C99, segments are labelled argumentative or
//! not, argumentative segments are summarized by a completion model under a
//! token budget, and the result is scored with ROUGE, BLEU, METEOR and
//! BERTScore.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod labeler;
pub mod metrics;
mod parallel;
pub mod segmenter;
pub mod summarizer;
pub mod tokenize;

pub use error::{Error, Result};
