//! Decoding for locally normalized sequence models under surprisal-based
//! (UID) regularizers: beam search, exact best-first search, exhaustive
//! oracles, and corpus evaluation.
//!
//! Surprisals are in nats. Token ids are dense over `V ∪ {EOS}`; BOS has its
//! own id one past EOS.

pub mod error;
pub mod eval;
pub mod fixtures;
pub mod hypothesis;
pub mod model;
pub mod objectives;
pub mod search;
pub mod surprisal;
pub mod verify;
pub mod vocab;

pub use error::{Error, Result};
pub use hypothesis::{ranking, Hypothesis};
pub use model::{load_model, SequenceModel, TableModel, TableModelSpec};
pub use objectives::{score, LengthMode, Objective, RegularizerKind, ScoreBreakdown};
pub use search::{beam_search, brute_force, exact_search, greedy_search, DecodeRecord, SearchConfig};
pub use surprisal::{SurprisalStats, SurprisalTrace};
pub use vocab::{TokenId, Vocabulary};
