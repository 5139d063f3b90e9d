use serde::{Deserialize, Serialize};

use super::bleu::corpus_bleu;
use crate::error::{contract, Result};
use crate::hypothesis::Hypothesis;
use crate::vocab::Vocabulary;

/// Decoder outputs for one setting, in input order.
#[derive(Debug, Clone)]
pub struct SweepBucket {
    pub lambda: f64,
    pub k: usize,
    pub outputs: Vec<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub k: usize,
    pub bleu: f64,
    /// Unweighted mean over sentences of the BOS-anchored surprisal std-dev.
    pub mean_sigma: f64,
    /// Mean number of ordinary tokens per output.
    pub mean_len: f64,
    /// Fraction of outputs equal to `BOS EOS`.
    pub empty_rate: f64,
}

pub fn sweep_aggregate<R: AsRef<str>>(
    buckets: &[SweepBucket],
    references: &[Vec<R>],
    vocab: &Vocabulary,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(buckets.len());
    for bucket in buckets {
        if bucket.outputs.len() != references.len() {
            return contract(format!(
                "bucket λ = {} k = {} covers {} inputs, expected {}",
                bucket.lambda,
                bucket.k,
                bucket.outputs.len(),
                references.len()
            ));
        }
        if bucket.outputs.iter().any(|h| !h.complete) {
            return contract("sweep outputs must be complete hypotheses");
        }
        let n = bucket.outputs.len() as f64;
        let words: Vec<Vec<String>> = bucket.outputs.iter().map(|h| vocab.words(&h.tokens)).collect();
        let bleu = corpus_bleu(&words, references)?.corpus_bleu;
        let mean_sigma = bucket.outputs.iter().map(|h| h.trace.anchored_sigma()).sum::<f64>() / n;
        let mean_len = words.iter().map(Vec::len).sum::<usize>() as f64 / n;
        let empty_rate = bucket.outputs.iter().filter(|h| h.is_empty_string()).count() as f64 / n;
        rows.push(SweepRow { lambda: bucket.lambda, k: bucket.k, bleu, mean_sigma, mean_len, empty_rate });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::m1;
    use crate::model::SequenceModel;
    use crate::objectives::Objective;

    #[test]
    fn single_sentence_row_reproduces_its_stats() {
        let m = m1();
        let tokens = m.vocab().encode_prefix("<s> a b </s>").unwrap();
        let h = Hypothesis::from_tokens(&m, &[], &tokens, &Objective::map()).unwrap();
        let refs = vec![vec!["a".to_string(), "b".to_string()]];
        let bucket = SweepBucket { lambda: 0.0, k: 1, outputs: vec![h.clone()] };
        let rows = sweep_aggregate(&[bucket], &refs, m.vocab()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_sigma, h.trace.anchored_sigma());
        assert_eq!(rows[0].mean_len, 2.0);
        assert_eq!(rows[0].empty_rate, 0.0);
        assert_eq!(rows[0].bleu, crate::eval::corpus_bleu(&[vec!["a", "b"]], &refs).unwrap().corpus_bleu);
    }

    #[test]
    fn coverage_mismatch_is_an_error() {
        let m = m1();
        let tokens = m.vocab().encode_prefix("<s> </s>").unwrap();
        let h = Hypothesis::from_tokens(&m, &[], &tokens, &Objective::map()).unwrap();
        let refs = vec![vec!["a".to_string()], vec!["b".to_string()]];
        let bucket = SweepBucket { lambda: 1.0, k: 1, outputs: vec![h] };
        assert!(sweep_aggregate(&[bucket], &refs, m.vocab()).is_err());
    }
}
