//! Explicit lookup-table model, the fixture format for tests and small experiments.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::SequenceModel;
use crate::error::{contract, Error, Result};
use crate::vocab::{TokenId, Vocabulary, BOS_MARK};

/// Token string (ordinary or `</s>`) to probability. Absent tokens are forbidden.
pub type Distribution = BTreeMap<String, f64>;

const SOURCE_SEPARATOR: &str = "|||";
/// Sums within this distance of 1 are accepted after renormalization.
const LOAD_TOLERANCE: f64 = 1e-6;
/// Below this deviation the distribution is kept verbatim.
const EXACT_TOLERANCE: f64 = 1e-12;

/// On-disk form of a [`TableModel`].
///
/// Entry keys are space-joined prefixes starting with `<s>`, e.g. `"<s> a b"`.
/// With `source_keyed`, keys take the form `"<source tokens> ||| <s> a b"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableModelSpec {
    pub vocab: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub source_keyed: bool,
    pub default: Distribution,
    #[serde(default)]
    pub entries: BTreeMap<String, Distribution>,
}

impl TableModelSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct TableModel {
    vocab: Vocabulary,
    spec: TableModelSpec,
    default: Vec<f64>,
    // source key (empty when not source-keyed) -> prefix -> log-probs
    entries: HashMap<Vec<TokenId>, HashMap<Vec<TokenId>, Vec<f64>>>,
}

impl TableModel {
    pub fn from_spec(spec: TableModelSpec) -> Result<Self> {
        let vocab = Vocabulary::new(spec.vocab.iter().cloned())?;
        let mut spec = spec;
        let default_probs = dense_probs(&vocab, &spec.default, "default")?;
        spec.default = sparse_probs(&vocab, &default_probs);
        let default = to_log(&default_probs);

        let mut entries: HashMap<Vec<TokenId>, HashMap<Vec<TokenId>, Vec<f64>>> = HashMap::new();
        for (key, dist) in spec.entries.iter_mut() {
            let (source, prefix) = parse_context(&vocab, spec.source_keyed, key)?;
            let probs = dense_probs(&vocab, dist, key)?;
            *dist = sparse_probs(&vocab, &probs);
            let slot = entries.entry(source).or_default();
            if slot.insert(prefix, to_log(&probs)).is_some() {
                return Err(Error::Parse(format!("duplicate context {key:?}")));
            }
        }
        Ok(Self { vocab, spec, default, entries })
    }

    /// Builds a model from dense probability vectors indexed by token id.
    pub fn from_dense(
        vocab: Vocabulary,
        source_keyed: bool,
        default: &[f64],
        entries: Vec<(Vec<TokenId>, Vec<TokenId>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut spec = TableModelSpec {
            vocab: vocab.tokens().to_vec(),
            source_keyed,
            default: sparse_probs(&vocab, default),
            entries: BTreeMap::new(),
        };
        for (source, prefix, probs) in entries {
            if !source_keyed && !source.is_empty() {
                return contract("source given for a model that is not source-keyed");
            }
            let key = context_key(&vocab, source_keyed, &source, &prefix)?;
            spec.entries.insert(key, sparse_probs(&vocab, &probs));
        }
        Self::from_spec(spec)
    }

    pub fn spec(&self) -> &TableModelSpec {
        &self.spec
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.spec.to_json_string()?)?;
        Ok(())
    }
}

impl SequenceModel for TableModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn conditional_log_probs(&self, source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>> {
        let source_key: &[TokenId] = if self.spec.source_keyed { source } else { &[] };
        Ok(self
            .entries
            .get(source_key)
            .and_then(|by_prefix| by_prefix.get(prefix))
            .unwrap_or(&self.default)
            .clone())
    }
}

pub fn load_table_model(path: impl AsRef<Path>) -> Result<TableModel> {
    let text = std::fs::read_to_string(path)?;
    TableModel::from_spec(TableModelSpec::from_json_str(&text)?)
}

pub(crate) fn context_key(
    vocab: &Vocabulary,
    source_keyed: bool,
    source: &[TokenId],
    prefix: &[TokenId],
) -> Result<String> {
    let prefix = vocab.join(prefix)?;
    if source_keyed {
        let source = vocab.join(source)?;
        Ok(format!("{source} {SOURCE_SEPARATOR} {prefix}").trim_start().to_string())
    } else {
        Ok(prefix)
    }
}

fn parse_context(vocab: &Vocabulary, source_keyed: bool, key: &str) -> Result<(Vec<TokenId>, Vec<TokenId>)> {
    let (source, prefix_text) = if source_keyed {
        let (src, rest) = key
            .split_once(SOURCE_SEPARATOR)
            .ok_or_else(|| Error::Parse(format!("context {key:?} lacks a source part")))?;
        (vocab.encode_line(src)?, rest)
    } else {
        (Vec::new(), key)
    };
    let prefix = vocab.encode_prefix(prefix_text)?;
    if prefix.first() != Some(&vocab.bos()) {
        return Err(Error::Parse(format!("context {key:?} must start with {BOS_MARK}")));
    }
    if prefix[1..].iter().any(|id| !vocab.is_ordinary(*id)) {
        return Err(Error::Parse(format!("context {key:?} may only contain ordinary tokens after {BOS_MARK}")));
    }
    Ok((source, prefix))
}

fn dense_probs(vocab: &Vocabulary, dist: &Distribution, what: &str) -> Result<Vec<f64>> {
    let mut probs = vec![0.0; vocab.output_size()];
    for (tok, &p) in dist {
        let id = vocab.output_id(tok)?;
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Distribution(format!("{what}: probability of {tok:?} is {p}")));
        }
        probs[id.index()] = p;
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > LOAD_TOLERANCE {
        return Err(Error::Distribution(format!("{what}: probabilities sum to {sum}")));
    }
    if (sum - 1.0).abs() > EXACT_TOLERANCE {
        warn!("{what}: renormalizing distribution that sums to {sum}");
        probs.iter_mut().for_each(|p| *p /= sum);
    }
    Ok(probs)
}

fn sparse_probs(vocab: &Vocabulary, probs: &[f64]) -> Distribution {
    probs
        .iter()
        .enumerate()
        .filter(|(_, p)| **p != 0.0)
        .map(|(i, &p)| {
            let tok = vocab.token(TokenId(i as u32)).expect("dense index within output alphabet");
            (tok.to_string(), p)
        })
        .collect()
}

fn to_log(probs: &[f64]) -> Vec<f64> {
    probs.iter().map(|p| p.ln()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> TableModelSpec {
        TableModelSpec::from_json_str(
            r#"{"vocab": ["a"], "default": {"a": 0.5, "</s>": 0.5},
                "entries": {"<s> a": {"a": 0.25, "</s>": 0.75}}}"#,
        )
        .unwrap()
    }

    #[test]
    fn two_point_uniform_log_probs() {
        let m = TableModel::from_spec(two_point()).unwrap();
        let bos = m.vocab().bos();
        let lp = m.next_log_probs(&[], &[bos]).unwrap();
        assert_eq!(lp, vec![0.5f64.ln(), 0.5f64.ln()]);
    }

    #[test]
    fn eos_terminated_prefix_is_absorbing() {
        let m = TableModel::from_spec(two_point()).unwrap();
        let v = m.vocab();
        let lp = m.next_log_probs(&[], &[v.bos(), v.eos()]).unwrap();
        assert_eq!(lp, vec![f64::NEG_INFINITY, 0.0]);
    }

    #[test]
    fn contract_errors() {
        let m = TableModel::from_spec(two_point()).unwrap();
        let v = m.vocab();
        assert!(matches!(m.next_log_probs(&[], &[TokenId(0)]), Err(Error::Contract(_))));
        assert!(matches!(
            m.next_log_probs(&[], &[v.bos(), v.eos(), TokenId(0)]),
            Err(Error::Contract(_))
        ));
        assert!(matches!(m.next_log_probs(&[], &[v.bos(), TokenId(9)]), Err(Error::Vocabulary(_))));
        assert!(matches!(m.next_log_probs(&[TokenId(1)], &[v.bos()]), Err(Error::Vocabulary(_))));
    }

    #[test]
    fn round_trips_identically() {
        let spec = two_point();
        let m = TableModel::from_spec(spec.clone()).unwrap();
        assert_eq!(m.spec(), &spec);
        let text = spec.to_json_string().unwrap();
        let again = TableModel::from_spec(TableModelSpec::from_json_str(&text).unwrap()).unwrap();
        assert_eq!(again.spec().to_json_string().unwrap(), text);
    }

    #[test]
    fn rejects_bad_distributions() {
        let short = r#"{"vocab": ["a"], "default": {"a": 0.4, "</s>": 0.5}}"#;
        let err = TableModel::from_spec(TableModelSpec::from_json_str(short).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Distribution(_)));
        let negative = r#"{"vocab": ["a"], "default": {"a": 1.5, "</s>": -0.5}}"#;
        assert!(TableModel::from_spec(TableModelSpec::from_json_str(negative).unwrap()).is_err());
        let unknown = r#"{"vocab": ["a"], "default": {"z": 1.0}}"#;
        assert!(TableModel::from_spec(TableModelSpec::from_json_str(unknown).unwrap()).is_err());
        assert!(TableModelSpec::from_json_str("{not json").is_err());
    }

    #[test]
    fn small_deviation_is_renormalized() {
        let near = r#"{"vocab": ["a"], "default": {"a": 0.5000004, "</s>": 0.5}}"#;
        let m = TableModel::from_spec(TableModelSpec::from_json_str(near).unwrap()).unwrap();
        let lp = m.next_log_probs(&[], &[m.vocab().bos()]).unwrap();
        let total: f64 = lp.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_only_covers_every_context() {
        let spec = r#"{"vocab": ["a", "b"], "default": {"a": 0.2, "b": 0.3, "</s>": 0.5}}"#;
        let m = TableModel::from_spec(TableModelSpec::from_json_str(spec).unwrap()).unwrap();
        let v = m.vocab().clone();
        let expected = m.next_log_probs(&[], &[v.bos()]).unwrap();
        for prefix in [vec![v.bos(), TokenId(0)], vec![v.bos(), TokenId(1), TokenId(0), TokenId(0)]] {
            assert_eq!(m.next_log_probs(&[TokenId(1)], &prefix).unwrap(), expected);
        }
    }

    #[test]
    fn source_keyed_lookup() {
        let spec = r#"{"vocab": ["a", "x"], "source_keyed": true,
            "default": {"</s>": 1.0},
            "entries": {"x ||| <s>": {"a": 1.0}, "||| <s>": {"x": 1.0}}}"#;
        let m = TableModel::from_spec(TableModelSpec::from_json_str(spec).unwrap()).unwrap();
        let v = m.vocab().clone();
        let with_src = m.next_log_probs(&[TokenId(1)], &[v.bos()]).unwrap();
        assert_eq!(with_src[0], 0.0);
        let empty_src = m.next_log_probs(&[], &[v.bos()]).unwrap();
        assert_eq!(empty_src[1], 0.0);
        let other = m.next_log_probs(&[TokenId(0)], &[v.bos()]).unwrap();
        assert_eq!(other[v.eos().index()], 0.0);
        let rebuilt = TableModel::from_spec(m.spec().clone()).unwrap();
        assert_eq!(rebuilt.spec(), m.spec());
    }
}
