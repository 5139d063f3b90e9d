//! Locally normalized sequence models.

mod ngram;
mod table;

use std::path::Path;

pub use ngram::{train_ngram, NGramFile, NGramModel};
pub use table::{load_table_model, Distribution, TableModel, TableModelSpec};

use crate::error::{contract, Error, Result};
use crate::vocab::{TokenId, Vocabulary};

/// A next-token distribution over `V ∪ {EOS}` conditioned on a source and a
/// BOS-initial target prefix.
pub trait SequenceModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    /// Natural-log distribution for a prefix that has already been validated
    /// and does not end in EOS. Entry `i` is the log-probability of token id `i`.
    fn conditional_log_probs(&self, source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>>;

    /// Validated next-token log-probabilities. A prefix ending in EOS yields the
    /// degenerate distribution with all mass on EOS.
    fn next_log_probs(&self, source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>> {
        let vocab = self.vocab();
        validate_source(vocab, source)?;
        let ends_in_eos = validate_prefix(vocab, prefix)?;
        if ends_in_eos {
            let mut out = vec![f64::NEG_INFINITY; vocab.output_size()];
            out[vocab.eos().index()] = 0.0;
            return Ok(out);
        }
        self.conditional_log_probs(source, prefix)
    }
}

impl<M: SequenceModel + ?Sized> SequenceModel for Box<M> {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }

    fn conditional_log_probs(&self, source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>> {
        (**self).conditional_log_probs(source, prefix)
    }

    fn next_log_probs(&self, source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>> {
        (**self).next_log_probs(source, prefix)
    }
}

fn validate_source(vocab: &Vocabulary, source: &[TokenId]) -> Result<()> {
    match source.iter().find(|id| !vocab.is_ordinary(**id)) {
        Some(id) => Err(Error::Vocabulary(format!("source token id {id} is not an ordinary token"))),
        None => Ok(()),
    }
}

/// Returns whether the prefix ends in EOS.
fn validate_prefix(vocab: &Vocabulary, prefix: &[TokenId]) -> Result<bool> {
    if prefix.first() != Some(&vocab.bos()) {
        return contract("prefix must start with BOS");
    }
    let body = &prefix[1..];
    for (i, &id) in body.iter().enumerate() {
        if id == vocab.eos() {
            if i + 1 != body.len() {
                return contract("EOS may only appear as the final prefix element");
            }
        } else if !vocab.is_ordinary(id) {
            return Err(Error::Vocabulary(format!("prefix token id {id} out of range")));
        }
    }
    Ok(body.last() == Some(&vocab.eos()))
}

/// Loads either model file flavour; n-gram files carry `"kind": "ngram"`.
pub fn load_model(path: impl AsRef<Path>) -> Result<Box<dyn SequenceModel>> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}

pub fn model_from_json(text: &str) -> Result<Box<dyn SequenceModel>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("kind").and_then(|k| k.as_str()) == Some("ngram") {
        let file: NGramFile = serde_json::from_value(value)?;
        Ok(Box::new(NGramModel::from_file(file)?))
    } else {
        let spec: TableModelSpec = serde_json::from_value(value)?;
        Ok(Box::new(TableModel::from_spec(spec)?))
    }
}
