//! Decoders: greedy, beam, exact best-first, and exhaustive oracles.

mod beam;
mod brute;
mod exact;
mod greedy;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use beam::beam_search;
pub use brute::{brute_force, brute_force_set, enumerate_complete, BeamSetResult, BRUTE_FORCE_LIMIT};
pub use exact::{exact_search, optimistic_bound};
pub use greedy::greedy_search;

use crate::error::{contract, Result};
use crate::hypothesis::Hypothesis;

/// Only one rule exists: higher score, then higher log-probability, then the
/// lexicographically smaller token-id sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LogProbThenLexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub n_max: usize,
    pub empty_string_pruning: bool,
    pub tie_break: TieBreak,
    /// Upper limit on node expansions in exact search.
    pub node_limit: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            beam_width: 5,
            n_max: 50,
            empty_string_pruning: true,
            tie_break: TieBreak::default(),
            node_limit: 5_000_000,
        }
    }
}

impl SearchConfig {
    pub fn new(beam_width: usize, n_max: usize) -> Self {
        Self { beam_width, n_max, ..Self::default() }
    }

    pub fn with_pruning(mut self, on: bool) -> Self {
        self.empty_string_pruning = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_width < 1 {
            return contract("beam width must be at least 1");
        }
        if self.n_max < 1 {
            return contract("n_max must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRecord {
    pub best: Hypothesis,
    /// Final beam ordered by score; empty for other decoders.
    pub beam_set: Vec<Hypothesis>,
    pub nodes_expanded: usize,
    pub optimality_certificate: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}
