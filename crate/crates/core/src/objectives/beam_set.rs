//! Set regularizer whose λ → ∞ limit is recovered by beam search.
//!
//! For a multiset `Y` of `k` complete hypotheses, `Y_t` is the multiset of
//! their length-`t` prefixes (EOS-absorbed) and `B_t` the distinct one-token
//! extensions of the distinct members of `Y_{t-1}`. The step-`t` term compares
//! the summed prefix surprisal `-log p(y_{≤t})` of `Y_t` with the smallest sum
//! attainable by any `k` members of `B_t`, which is the set beam search keeps.

use std::collections::HashMap;
use std::rc::Rc;

use crate::error::{contract, Result};
use crate::hypothesis::Hypothesis;
use crate::model::SequenceModel;
use crate::vocab::TokenId;

/// Memoized `next_log_probs` for one source sentence.
pub struct PrefixCache<'a, M: ?Sized> {
    model: &'a M,
    source: &'a [TokenId],
    map: HashMap<Vec<TokenId>, Rc<Vec<f64>>>,
}

impl<'a, M: SequenceModel + ?Sized> PrefixCache<'a, M> {
    pub fn new(model: &'a M, source: &'a [TokenId]) -> Self {
        Self { model, source, map: HashMap::new() }
    }

    pub fn model(&self) -> &'a M {
        self.model
    }

    pub fn source(&self) -> &'a [TokenId] {
        self.source
    }

    pub fn get(&mut self, prefix: &[TokenId]) -> Result<Rc<Vec<f64>>> {
        if let Some(hit) = self.map.get(prefix) {
            return Ok(Rc::clone(hit));
        }
        let lps = Rc::new(self.model.next_log_probs(self.source, prefix)?);
        self.map.insert(prefix.to_vec(), Rc::clone(&lps));
        Ok(lps)
    }
}

pub fn r_beam<M: SequenceModel + ?Sized>(
    set: &[Hypothesis],
    model: &M,
    source: &[TokenId],
    k: usize,
    n_max: usize,
) -> Result<f64> {
    let mut cache = PrefixCache::new(model, source);
    r_beam_cached(set, &mut cache, k, n_max)
}

pub(crate) fn r_beam_cached<M: SequenceModel + ?Sized>(
    set: &[Hypothesis],
    cache: &mut PrefixCache<'_, M>,
    k: usize,
    n_max: usize,
) -> Result<f64> {
    if k == 0 || set.len() != k {
        return contract(format!("set regularizer needs exactly k = {k} hypotheses, got {}", set.len()));
    }
    if let Some(h) = set.iter().find(|h| !h.complete || h.len() > n_max) {
        return contract(format!("hypothesis of length {} is incomplete or longer than n_max = {n_max}", h.len()));
    }
    let eos = cache.model().vocab().eos();

    // cumulative[i][t] = surprisal of member i's prefix of length t (absorbed after EOS)
    let cumulative: Vec<Vec<f64>> = set
        .iter()
        .map(|h| {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(n_max + 1);
            out.push(0.0);
            for t in 1..=n_max {
                if let Some(&u) = h.trace.values().get(t - 1) {
                    acc += u;
                }
                out.push(acc);
            }
            out
        })
        .collect();

    let mut total = 0.0;
    let mut candidates: Vec<f64> = Vec::new();
    let mut members: Vec<f64> = Vec::with_capacity(k);
    for t in 1..=n_max {
        members.clear();
        members.extend(cumulative.iter().map(|c| c[t]));

        let mut parents: Vec<(&[TokenId], f64)> = set
            .iter()
            .zip(&cumulative)
            .map(|(h, c)| (&h.tokens[..=(t - 1).min(h.len())], c[t - 1]))
            .collect();
        parents.sort_by(|a, b| a.0.cmp(b.0));
        parents.dedup_by(|a, b| a.0 == b.0);

        candidates.clear();
        for (prefix, cum) in parents {
            if prefix.last() == Some(&eos) {
                candidates.push(cum);
                continue;
            }
            let lps = cache.get(prefix)?;
            candidates.extend(lps.iter().filter(|lp| lp.is_finite()).map(|lp| cum + -lp));
        }
        if candidates.len() < k {
            return contract(format!("only {} candidates at step {t}, need k = {k}", candidates.len()));
        }
        let achieved = ascending_sum(&mut members, k);
        let best = ascending_sum(&mut candidates, k);
        total += (achieved - best).powi(2);
    }
    Ok(total)
}

/// Sum of the `k` smallest values, added in ascending order so that equal
/// multisets give bit-identical sums.
fn ascending_sum(values: &mut [f64], k: usize) -> f64 {
    values.sort_by(f64::total_cmp);
    values[..k].iter().fold(0.0, |acc, x| acc + x)
}
