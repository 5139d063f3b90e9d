//! Add-k smoothed n-gram model over the target side only.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SequenceModel;
use crate::error::{contract, Error, Result};
use crate::vocab::{TokenId, Vocabulary, BOS_MARK, EOS_MARK};

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    per_token: Vec<u64>,
    total: u64,
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    vocab: Vocabulary,
    order: usize,
    add_k: f64,
    counts: HashMap<Vec<TokenId>, ContextCounts>,
}

/// Serialized n-gram model. Context keys are space-joined token strings with
/// `<s>` padding; the unigram context is the empty string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramFile {
    pub kind: String,
    pub order: usize,
    pub add_k: f64,
    pub vocab: Vec<String>,
    pub counts: BTreeMap<String, BTreeMap<String, u64>>,
}

pub fn train_ngram<S: AsRef<str>>(corpus: &[Vec<S>], order: usize, add_k: f64) -> Result<NGramModel> {
    check_params(order, add_k)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut types = BTreeSet::new();
    for line in corpus {
        for tok in line {
            let tok = tok.as_ref();
            if tok == BOS_MARK || tok == EOS_MARK {
                return Err(Error::Vocabulary(format!("{tok} must not appear in corpus text")));
            }
            types.insert(tok.to_string());
        }
    }
    let vocab = Vocabulary::new(types)?;
    let mut model = NGramModel { vocab, order, add_k, counts: HashMap::new() };

    for line in corpus {
        let mut padded = vec![model.vocab.bos(); order - 1];
        for tok in line {
            padded.push(model.vocab.ordinary_id(tok.as_ref())?);
        }
        padded.push(model.vocab.eos());
        for end in (order - 1)..padded.len() {
            let context = padded[end + 1 - order..end].to_vec();
            model.bump(context, padded[end], 1);
        }
    }
    Ok(model)
}

fn check_params(order: usize, add_k: f64) -> Result<()> {
    if order < 1 {
        return contract("n-gram order must be at least 1");
    }
    if !(add_k.is_finite() && add_k > 0.0) {
        return contract(format!("add_k must be positive and finite, got {add_k}"));
    }
    Ok(())
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    fn bump(&mut self, context: Vec<TokenId>, token: TokenId, by: u64) {
        let size = self.vocab.output_size();
        let slot = self.counts.entry(context).or_insert_with(|| ContextCounts {
            per_token: vec![0; size],
            total: 0,
        });
        slot.per_token[token.index()] += by;
        slot.total += by;
    }

    fn context_of(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let width = self.order - 1;
        if prefix.len() >= width {
            prefix[prefix.len() - width..].to_vec()
        } else {
            let mut ctx = vec![self.vocab.bos(); width - prefix.len()];
            ctx.extend_from_slice(prefix);
            ctx
        }
    }

    /// Smoothed probability of `token` after `prefix` (BOS-initial).
    pub fn prob(&self, prefix: &[TokenId], token: TokenId) -> f64 {
        let denom_extra = self.add_k * self.vocab.output_size() as f64;
        match self.counts.get(&self.context_of(prefix)) {
            Some(c) => (c.per_token[token.index()] as f64 + self.add_k) / (c.total as f64 + denom_extra),
            None => self.add_k / denom_extra,
        }
    }

    pub fn to_file(&self) -> Result<NGramFile> {
        let mut counts = BTreeMap::new();
        for (ctx, c) in &self.counts {
            let row: BTreeMap<String, u64> = c
                .per_token
                .iter()
                .enumerate()
                .filter(|(_, n)| **n > 0)
                .map(|(i, &n)| Ok((self.vocab.token(TokenId(i as u32))?.to_string(), n)))
                .collect::<Result<_>>()?;
            counts.insert(self.vocab.join(ctx)?, row);
        }
        Ok(NGramFile {
            kind: "ngram".into(),
            order: self.order,
            add_k: self.add_k,
            vocab: self.vocab.tokens().to_vec(),
            counts,
        })
    }

    pub fn from_file(file: NGramFile) -> Result<Self> {
        if file.kind != "ngram" {
            return Err(Error::Parse(format!("expected kind \"ngram\", got {:?}", file.kind)));
        }
        check_params(file.order, file.add_k)?;
        let vocab = Vocabulary::new(file.vocab)?;
        let mut model = NGramModel { vocab, order: file.order, add_k: file.add_k, counts: HashMap::new() };
        for (ctx, row) in file.counts {
            let context = model.vocab.encode_prefix(&ctx)?;
            if context.len() != model.order - 1 || context.contains(&model.vocab.eos()) {
                return Err(Error::Parse(format!("bad context {ctx:?} for order {}", model.order)));
            }
            for (tok, n) in row {
                let id = model.vocab.output_id(&tok)?;
                model.bump(context.clone(), id, n);
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_file()?)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

impl SequenceModel for NGramModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn conditional_log_probs(&self, _source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>> {
        Ok((0..self.vocab.output_size())
            .map(|i| self.prob(prefix, TokenId(i as u32)).ln())
            .collect())
    }
}
