//! Time-dependent surprisals `u_t = -ln p(y_t | x, y_<t)` and their summary
//! statistics. Values are in nats; `u_0 = 0` for BOS is implicit and not stored.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::model::SequenceModel;
use crate::vocab::TokenId;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SurprisalTrace(Vec<f64>);

impl SurprisalTrace {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, u: f64) {
        self.0.push(u);
    }

    /// Total surprisal, accumulated left to right. Equals `-log p(y | x)`.
    pub fn total(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, u| acc + u)
    }

    /// The trace with the `u_0 = 0` BOS anchor prepended.
    pub fn anchored(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(0.0);
        v.extend_from_slice(&self.0);
        v
    }

    /// Per-sentence spread used in corpus analytics: the population standard
    /// deviation over `u_0, u_1, ..., u_|y|`. Defined for every hypothesis,
    /// including `BOS EOS`.
    pub fn anchored_sigma(&self) -> f64 {
        summarize(&self.anchored()).std_dev
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurprisalStats {
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub max: f64,
    pub length: usize,
}

/// Surprisals of `tokens[1..]` under `model`; `tokens[0]` must be BOS.
/// Zero-probability steps yield `+inf`.
pub fn trace<M: SequenceModel + ?Sized>(model: &M, source: &[TokenId], tokens: &[TokenId]) -> Result<SurprisalTrace> {
    if tokens.first() != Some(&model.vocab().bos()) {
        return contract("hypothesis must start with BOS");
    }
    let mut out = SurprisalTrace::default();
    for t in 1..tokens.len() {
        let lp = model.next_log_probs(source, &tokens[..t])?;
        out.push(-lp[tokens[t].index()]);
    }
    Ok(out)
}

/// Population statistics over `u_1..u_|y|`.
pub fn stats(trace: &SurprisalTrace) -> Result<SurprisalStats> {
    if trace.is_empty() {
        return contract("surprisal statistics need at least one step");
    }
    Ok(summarize(trace.values()))
}

fn summarize(values: &[f64]) -> SurprisalStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / n;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SurprisalStats { mean, variance, std_dev: variance.sqrt(), max, length: values.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(v: &[f64]) -> SurprisalStats {
        stats(&SurprisalTrace::new(v.to_vec())).unwrap()
    }

    #[test]
    fn hand_examples() {
        let s = st(&[1.0, 1.0, 1.0]);
        assert_eq!((s.mean, s.variance, s.std_dev), (1.0, 0.0, 0.0));
        let s = st(&[0.0, 2.0]);
        assert_eq!((s.mean, s.variance, s.std_dev), (1.0, 1.0, 1.0));
        let s = st(&[3.0]);
        assert_eq!((s.mean, s.variance, s.max, s.length), (3.0, 0.0, 3.0, 1));
    }

    #[test]
    fn empty_trace_is_rejected() {
        assert!(stats(&SurprisalTrace::default()).is_err());
    }

    #[test]
    fn anchored_sigma_of_single_step() {
        // [0, u] has mean u/2 and std-dev u/2
        let t = SurprisalTrace::new(vec![3.0]);
        assert!((t.anchored_sigma() - 1.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn constant_trace_has_zero_variance(c in 0.0f64..20.0, n in 1usize..12) {
            prop_assert!(st(&vec![c; n]).variance <= 1e-24);
        }

        #[test]
        fn spread_trace_has_positive_variance(v in prop::collection::vec(0.0f64..20.0, 2..12)) {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(hi - lo > 1e-6);
            prop_assert!(st(&v).variance > 0.0);
        }

        #[test]
        fn permutation_invariant(mut v in prop::collection::vec(0.0f64..20.0, 1..12), seed in any::<u64>()) {
            let before = st(&v);
            let n = v.len();
            v.rotate_left((seed as usize) % n);
            v.reverse();
            let after = st(&v);
            prop_assert!((before.mean - after.mean).abs() < 1e-12);
            prop_assert!((before.variance - after.variance).abs() < 1e-12);
            prop_assert_eq!(before.max, after.max);
        }
    }
}
