//! Exhaustive oracles for tiny hypothesis spaces.

use std::cmp::Ordering;
use std::time::Instant;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::DecodeRecord;
use crate::error::{contract, Error, Result};
use crate::hypothesis::{ranking, Hypothesis};
use crate::model::SequenceModel;
use crate::objectives::beam_set::r_beam_cached;
use crate::objectives::{Objective, PrefixCache};
use crate::vocab::TokenId;

/// Maximum number of prefixes a single enumeration may visit.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

const SET_MAX_K: usize = 3;
const SET_MAX_OUTPUTS: usize = 4;
const SET_MAX_LEN: usize = 5;

/// Every complete hypothesis with `|y| ≤ n_max` and non-zero probability,
/// scored under the MAP objective, plus the number of prefixes visited.
pub fn enumerate_complete<M: SequenceModel + ?Sized>(
    model: &M,
    source: &[TokenId],
    n_max: usize,
) -> Result<(Vec<Hypothesis>, usize)> {
    enumerate_within(model, source, n_max, BRUTE_FORCE_LIMIT)
}

fn enumerate_within<M: SequenceModel + ?Sized>(
    model: &M,
    source: &[TokenId],
    n_max: usize,
    limit: u64,
) -> Result<(Vec<Hypothesis>, usize)> {
    if n_max < 1 {
        return contract("n_max must be at least 1");
    }
    let eos = model.vocab().eos();
    let map = Objective::map();
    let mut out = Vec::new();
    let mut visited: u64 = 0;
    let mut stack = vec![Hypothesis::root(model.vocab())];
    while let Some(h) = stack.pop() {
        visited += 1;
        if visited > limit {
            return Err(Error::SearchSpace { what: "enumerated prefixes".into(), limit });
        }
        if h.complete {
            out.push(h.scored(&map)?);
            continue;
        }
        if h.len() >= n_max {
            continue;
        }
        let lps = model.next_log_probs(source, &h.tokens)?;
        for (i, lp) in lps.iter().enumerate().rev() {
            if lp.is_finite() {
                stack.push(h.extend(TokenId(i as u32), &lps, eos));
            }
        }
    }
    Ok((out, visited as usize))
}

/// The true argmax of `objective` over complete hypotheses with `|y| ≤ n_max`.
pub fn brute_force<M: SequenceModel + ?Sized>(
    model: &M,
    source: &[TokenId],
    objective: &Objective,
    n_max: usize,
) -> Result<DecodeRecord> {
    let start = Instant::now();
    let (all, visited) = enumerate_complete(model, source, n_max)?;
    let mut best: Option<Hypothesis> = None;
    for h in all {
        let h = h.scored(objective)?;
        if best.as_ref().map_or(true, |b| ranking(&h, b) == Ordering::Less) {
            best = Some(h);
        }
    }
    let best = best.ok_or(Error::NoHypothesis { n_max })?;
    Ok(DecodeRecord {
        best,
        beam_set: Vec::new(),
        nodes_expanded: visited,
        optimality_certificate: true,
        wall_time: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSetResult {
    /// Members ordered by log-probability (MAP ranking).
    pub members: Vec<Hypothesis>,
    pub log_prob: f64,
    pub r_beam: f64,
    pub total: f64,
}

/// Maximizes `Σ log p(y) - λ·R_beam(Y)` over all `k`-subsets `Y` of complete
/// hypotheses. Ties go to the higher summed log-probability, then to the
/// lexicographically smaller sorted member list.
pub fn brute_force_set<M: SequenceModel + ?Sized>(
    model: &M,
    source: &[TokenId],
    k: usize,
    lambda: f64,
    n_max: usize,
) -> Result<BeamSetResult> {
    if k < 1 {
        return contract("k must be at least 1");
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return contract(format!("λ must be finite and non-negative, got {lambda}"));
    }
    let outputs = model.vocab().output_size();
    if k > SET_MAX_K || outputs > SET_MAX_OUTPUTS || n_max > SET_MAX_LEN {
        return Err(Error::SearchSpace {
            what: format!("set enumeration with k = {k}, |V̄| = {outputs}, n_max = {n_max}"),
            limit: 0,
        });
    }
    let (mut all, _) = enumerate_complete(model, source, n_max)?;
    if all.len() < k {
        return Err(Error::NoHypothesis { n_max });
    }
    all.sort_by(ranking);

    let mut cache = PrefixCache::new(model, source);
    let mut best: Option<(Vec<usize>, f64, f64, f64)> = None;
    for combo in (0..all.len()).combinations(k) {
        let log_prob = combo.iter().fold(0.0, |acc, &i| acc + all[i].log_prob);
        if let Some((_, best_lp, _, best_total)) = &best {
            // penalties are non-negative, so `log_prob` bounds the total
            if log_prob < *best_total || (log_prob == *best_total && log_prob < *best_lp) {
                continue;
            }
        }
        let (r, total) = if lambda > 0.0 {
            let members: Vec<Hypothesis> = combo.iter().map(|&i| all[i].clone()).collect();
            let r = r_beam_cached(&members, &mut cache, k, n_max)?;
            (r, log_prob - lambda * r)
        } else {
            (f64::NAN, log_prob)
        };
        let better = match &best {
            None => true,
            Some((idx, best_lp, _, best_total)) => total
                .total_cmp(best_total)
                .then_with(|| log_prob.total_cmp(best_lp))
                .then_with(|| member_tokens(&all, idx).cmp(&member_tokens(&all, &combo)))
                == Ordering::Greater,
        };
        if better {
            best = Some((combo, log_prob, r, total));
        }
    }

    let (idx, log_prob, mut r, total) = best.expect("at least one k-subset exists");
    let members: Vec<Hypothesis> = idx.iter().map(|&i| all[i].clone()).collect();
    if r.is_nan() {
        r = r_beam_cached(&members, &mut cache, k, n_max).unwrap_or(f64::NAN);
    }
    Ok(BeamSetResult { members, log_prob, r_beam: r, total })
}

fn member_tokens<'a>(all: &'a [Hypothesis], idx: &[usize]) -> Vec<&'a [TokenId]> {
    let mut v: Vec<&[TokenId]> = idx.iter().map(|&i| all[i].tokens.as_slice()).collect();
    v.sort();
    v
}
