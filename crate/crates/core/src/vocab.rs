//! Token inventory with distinguished sentence markers.
//!
//! Ordinary tokens occupy ids `0..|V|`, EOS is `|V|` so that the dense range
//! `0..=|V|` covers the output alphabet `V ∪ {EOS}`. BOS gets id `|V| + 1`; it is
//! never a prediction target.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOS_MARK: &str = "<s>";
pub const EOS_MARK: &str = "</s>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Vocabulary(format!("invalid token {tok:?}")));
            }
            if tok == BOS_MARK || tok == EOS_MARK {
                return Err(Error::Vocabulary(format!(
                    "{tok} is reserved and cannot be an ordinary token"
                )));
            }
            if index.insert(tok.clone(), TokenId(i as u32)).is_some() {
                return Err(Error::Vocabulary(format!("duplicate token {tok:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Number of ordinary tokens, `|V|`.
    pub fn num_ordinary(&self) -> usize {
        self.tokens.len()
    }

    /// Size of the output alphabet `|V ∪ {EOS}|`.
    pub fn output_size(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn eos(&self) -> TokenId {
        TokenId(self.tokens.len() as u32)
    }

    pub fn bos(&self) -> TokenId {
        TokenId(self.tokens.len() as u32 + 1)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_ordinary(&self, id: TokenId) -> bool {
        id.index() < self.tokens.len()
    }

    /// Resolves a token string, accepting the EOS marker but not BOS.
    pub fn output_id(&self, tok: &str) -> Result<TokenId> {
        if tok == EOS_MARK {
            return Ok(self.eos());
        }
        self.ordinary_id(tok)
    }

    pub fn ordinary_id(&self, tok: &str) -> Result<TokenId> {
        self.index
            .get(tok)
            .copied()
            .ok_or_else(|| Error::Vocabulary(format!("unknown token {tok:?}")))
    }

    /// Renders any id, including markers.
    pub fn token(&self, id: TokenId) -> Result<&str> {
        let i = id.index();
        if i < self.tokens.len() {
            Ok(&self.tokens[i])
        } else if id == self.eos() {
            Ok(EOS_MARK)
        } else if id == self.bos() {
            Ok(BOS_MARK)
        } else {
            Err(Error::Vocabulary(format!("token id {id} out of range")))
        }
    }

    /// Encodes a whitespace-tokenized line. Markers are not allowed in text.
    pub fn encode_line(&self, line: &str) -> Result<Vec<TokenId>> {
        line.split_whitespace().map(|t| self.ordinary_id(t)).collect()
    }

    /// Encodes a space-joined marker-bearing prefix such as `"<s> a b"`.
    pub fn encode_prefix(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|t| {
                if t == BOS_MARK {
                    Ok(self.bos())
                } else {
                    self.output_id(t)
                }
            })
            .collect()
    }

    pub fn join(&self, ids: &[TokenId]) -> Result<String> {
        let parts: Vec<&str> = ids.iter().map(|&id| self.token(id)).collect::<Result<_>>()?;
        Ok(parts.join(" "))
    }

    /// Ordinary tokens of a hypothesis, markers stripped.
    pub fn words(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .filter(|id| self.is_ordinary(**id))
            .map(|id| self.tokens[id.index()].clone())
            .collect()
    }
}
