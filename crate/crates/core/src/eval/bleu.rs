//! Corpus BLEU-4 with a single reference per segment.
//!
//! Case-sensitive, tokens taken as given. Higher-order precisions with no
//! matches are add-one smoothed; a zero unigram precision gives BLEU 0.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// In `[0, 100]`.
    pub corpus_bleu: f64,
    /// Modified precisions `p_1..p_4` as fractions, after smoothing.
    pub precisions: [f64; MAX_ORDER],
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[Vec<H>], references: &[Vec<R>]) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return contract(format!("{} hypotheses but {} references", hypotheses.len(), references.len()));
    }
    if references.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut matches = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0u64, 0u64);
    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp: Vec<&str> = hyp.iter().map(AsRef::as_ref).collect();
        let reference: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
        hyp_len += hyp.len() as u64;
        ref_len += reference.len() as u64;
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(&reference, n);
            for (gram, count) in ngram_counts(&hyp, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += (hyp.len() + 1).saturating_sub(n) as u64;
        }
    }

    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        precisions[n] = if matches[n] > 0 {
            matches[n] as f64 / totals[n] as f64
        } else if n > 0 {
            1.0 / (totals[n] as f64 + 1.0)
        } else {
            0.0
        };
    }

    if hyp_len == 0 || matches[0] == 0 {
        return Ok(BleuReport { corpus_bleu: 0.0, precisions, matches, totals, brevity_penalty: 0.0, hyp_len, ref_len });
    }
    let brevity_penalty = if hyp_len < ref_len { (1.0 - ref_len as f64 / hyp_len as f64).exp() } else { 1.0 };
    let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
    let corpus_bleu = 100.0 * brevity_penalty * log_mean.exp();
    Ok(BleuReport { corpus_bleu, precisions, matches, totals, brevity_penalty, hyp_len, ref_len })
}
