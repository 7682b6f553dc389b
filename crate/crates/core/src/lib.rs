//! Smatch graph matching for Abstract Meaning Representation (AMR) graphs,
//! together with the tooling needed to learn fast approximations of it.
//!
//! The crate is organised bottom-up:
//!
//! - [`penman`]: PENMAN parsing, serialization, linearization, grid rendering
//!   and canonical triple extraction.
//! - [`align`]: scoring under an alignment, the exact branch-and-bound
//!   maximizer, the hill-climbing heuristic and the random baseline.
//! - [`anonymize`]: pair-local integer relabeling and permutation augmentation.
//! - [`corpus`]: pair records, splits, JSONL persistence, seq2seq export and
//!   a synthetic pair generator.
//! - [`neural`]: a Siamese grid CNN with hand-written backpropagation that
//!   regresses Smatch scores directly or through per-graph vectors.
//! - [`eval`]: Pearson correlation, upper-bound gap, timed matrix fills and
//!   agglomerative clustering.
//!
//! Pair-level work runs on rayon when the `parallel` feature is enabled
//! (the default) and falls back to plain iteration otherwise; see [`par`].

pub mod align;
pub mod anonymize;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod neural;
pub mod par;
pub mod penman;
pub mod seed;

pub use error::{Error, Result};
