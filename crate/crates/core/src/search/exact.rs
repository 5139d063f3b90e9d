//! Exact decoding by best-first search.
//!
//! Nodes are popped in order of an optimistic bound on the score of any
//! completion: the log-probability term at its most favourable length, minus
//! the current value of the prefix-monotone penalties. For objectives whose
//! penalties are all prefix-monotone this bound is the prefix's own score and
//! the search is Dijkstra's algorithm. Search stops once the best complete
//! hypothesis scores strictly above every remaining bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::{DecodeRecord, SearchConfig};
use crate::error::{Error, Result};
use crate::hypothesis::{ranking, Hypothesis};
use crate::model::SequenceModel;
use crate::objectives::{monotone_penalty_floor, LengthMode, Objective};
use crate::vocab::TokenId;

struct Node {
    bound: f64,
    hyp: Hypothesis,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Max-heap: greater pops first.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| self.hyp.log_prob.total_cmp(&other.hyp.log_prob))
            .then_with(|| other.hyp.tokens.cmp(&self.hyp.tokens))
    }
}

pub fn optimistic_bound(h: &Hypothesis, objective: &Objective, n_max: usize) -> f64 {
    if h.complete {
        return h.score.total;
    }
    let (lp_term, reward) = match objective.length() {
        LengthMode::None => (h.log_prob, 0.0),
        LengthMode::Reward(l) => (h.log_prob, l * n_max as f64),
        LengthMode::Normalize => (h.log_prob / n_max as f64, 0.0),
    };
    lp_term - monotone_penalty_floor(objective, &h.trace, &h.minima) + reward
}

pub fn exact_search<M: SequenceModel + ?Sized>(
    model: &M,
    source: &[TokenId],
    objective: &Objective,
    config: &SearchConfig,
) -> Result<DecodeRecord> {
    config.validate()?;
    let start = Instant::now();
    let eos = model.vocab().eos();
    let n_max = config.n_max;
    let monotone = objective.is_prefix_monotone();

    let root = Hypothesis::root(model.vocab());
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: optimistic_bound(&root, objective, n_max), hyp: root });
    let mut floor = f64::NEG_INFINITY;
    let mut best: Option<Hypothesis> = None;
    let mut expanded = 0usize;

    while let Some(node) = heap.pop() {
        if let Some(b) = &best {
            if node.bound < b.score.total {
                break;
            }
        }
        if node.hyp.complete {
            if best.as_ref().map_or(true, |b| ranking(&node.hyp, b) == Ordering::Less) {
                best = Some(node.hyp);
            }
            continue;
        }
        if expanded >= config.node_limit {
            return Err(Error::SearchSpace {
                what: "exact search node expansions".into(),
                limit: config.node_limit as u64,
            });
        }
        let lps = model.next_log_probs(source, &node.hyp.tokens)?;
        expanded += 1;

        if config.empty_string_pruning && node.hyp.tokens.len() == 1 && lps[eos.index()].is_finite() {
            floor = node.hyp.extend(eos, &lps, eos).scored(objective)?.score.total;
        }

        for (i, lp) in lps.iter().enumerate() {
            if !lp.is_finite() {
                continue;
            }
            let mut child = node.hyp.extend(TokenId(i as u32), &lps, eos);
            if child.complete {
                child.rescore(objective)?;
            } else if child.len() >= n_max {
                continue;
            }
            let child_bound = optimistic_bound(&child, objective, n_max);
            if monotone {
                debug_assert!(child_bound <= node.bound, "monotone objective produced a rising bound");
            }
            if child_bound < floor {
                continue;
            }
            heap.push(Node { bound: child_bound, hyp: child });
        }
    }

    let best = best.ok_or(Error::NoHypothesis { n_max })?;
    Ok(DecodeRecord {
        best,
        beam_set: Vec::new(),
        nodes_expanded: expanded,
        optimality_certificate: true,
        wall_time: start.elapsed(),
    })
}
