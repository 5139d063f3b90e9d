use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::model::SequenceModel;
use crate::objectives::{score_parts, Objective, ScoreBreakdown};
use crate::surprisal::SurprisalTrace;
use crate::vocab::{TokenId, Vocabulary};

/// A BOS-initial token sequence with its per-step surprisals. `minima[t]` is
/// the smallest surprisal available at step `t` (the greedy choice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub trace: SurprisalTrace,
    pub minima: Vec<f64>,
    pub log_prob: f64,
    pub complete: bool,
    pub score: ScoreBreakdown,
}

impl Hypothesis {
    pub fn root(vocab: &Vocabulary) -> Self {
        Self {
            tokens: vec![vocab.bos()],
            trace: SurprisalTrace::default(),
            minima: Vec::new(),
            log_prob: 0.0,
            complete: false,
            score: ScoreBreakdown::unscored(0.0),
        }
    }

    /// `|y|`: number of steps after BOS, EOS included.
    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.is_empty()
    }

    /// One-step extension given the distribution that followed `self.tokens`.
    /// The child is left unscored.
    pub fn extend(&self, token: TokenId, step_log_probs: &[f64], eos: TokenId) -> Self {
        let lp = step_log_probs[token.index()];
        let best = step_log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut tokens = Vec::with_capacity(self.tokens.len() + 1);
        tokens.extend_from_slice(&self.tokens);
        tokens.push(token);
        let mut trace = self.trace.clone();
        trace.push(-lp);
        let mut minima = Vec::with_capacity(self.minima.len() + 1);
        minima.extend_from_slice(&self.minima);
        minima.push(-best);
        let log_prob = self.log_prob + lp;
        Self {
            tokens,
            trace,
            minima,
            log_prob,
            complete: token == eos,
            score: ScoreBreakdown::unscored(log_prob),
        }
    }

    /// Walks `model` along `tokens` (BOS-initial) and scores the result.
    pub fn from_tokens<M: SequenceModel + ?Sized>(
        model: &M,
        source: &[TokenId],
        tokens: &[TokenId],
        objective: &Objective,
    ) -> Result<Self> {
        let vocab = model.vocab();
        if tokens.first() != Some(&vocab.bos()) {
            return contract("hypothesis must start with BOS");
        }
        let mut h = Self::root(vocab);
        for &tok in &tokens[1..] {
            let lps = model.next_log_probs(source, &h.tokens)?;
            if tok.index() >= lps.len() {
                return contract(format!("token id {tok} is not a valid output"));
            }
            h = h.extend(tok, &lps, vocab.eos());
        }
        if tokens.len() > 1 {
            h.rescore(objective)?;
        }
        Ok(h)
    }

    pub fn rescore(&mut self, objective: &Objective) -> Result<()> {
        self.score = score_parts(&self.trace, &self.minima, self.log_prob, objective)?;
        Ok(())
    }

    pub fn scored(mut self, objective: &Objective) -> Result<Self> {
        self.rescore(objective)?;
        Ok(self)
    }

    pub fn total(&self) -> f64 {
        self.score.total
    }

    /// True for the hypothesis `BOS EOS`.
    pub fn is_empty_string(&self) -> bool {
        self.complete && self.tokens.len() == 2
    }
}

/// The decoder-wide ranking: higher total score, then higher log-probability,
/// then the lexicographically smaller token sequence. `Less` means "ranks first".
pub fn ranking(a: &Hypothesis, b: &Hypothesis) -> std::cmp::Ordering {
    b.score
        .total
        .total_cmp(&a.score.total)
        .then_with(|| b.log_prob.total_cmp(&a.log_prob))
        .then_with(|| a.tokens.cmp(&b.tokens))
}
