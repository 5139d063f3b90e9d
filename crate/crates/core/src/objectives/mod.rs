//! Regularized decoding scores: `log p(y|x) - Σ λ_i R_i(y)` plus an optional
//! length transform.

pub(crate) mod beam_set;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use beam_set::{r_beam, PrefixCache};

use crate::error::{contract, Error, Result};
use crate::hypothesis::Hypothesis;
use crate::model::SequenceModel;
use crate::surprisal::SurprisalTrace;
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizerKind {
    Greedy,
    Variance,
    Local,
    Max,
    Square,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 5] = [Self::Greedy, Self::Variance, Self::Local, Self::Max, Self::Square];

    pub fn name(self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::Variance => "variance",
            Self::Local => "local",
            Self::Max => "max",
            Self::Square => "square",
        }
    }

    /// Whether extending a hypothesis can never decrease the penalty.
    pub fn is_prefix_monotone(self) -> bool {
        matches!(self, Self::Greedy | Self::Max | Self::Square)
    }

    /// Penalty value; `minima` is only read by the greedy regularizer.
    pub fn evaluate(self, trace: &SurprisalTrace, minima: &[f64]) -> Result<f64> {
        match self {
            Self::Greedy => r_greedy(trace, minima),
            Self::Variance => r_variance(trace),
            Self::Local => r_local(trace),
            Self::Max => r_max(trace),
            Self::Square => r_square(trace),
        }
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::ObjectiveSpec(format!("unknown regularizer {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthMode {
    #[default]
    None,
    /// Adds `λ·|y|`.
    Reward(f64),
    /// Divides the log-probability term by `|y|`.
    Normalize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Objective {
    regularizers: Vec<(RegularizerKind, f64)>,
    length: LengthMode,
}

impl Objective {
    /// Plain MAP objective.
    pub fn map() -> Self {
        Self::default()
    }

    pub fn new(regularizers: Vec<(RegularizerKind, f64)>, length: LengthMode) -> Result<Self> {
        for (i, (kind, lambda)) in regularizers.iter().enumerate() {
            if !(lambda.is_finite() && *lambda >= 0.0) {
                return Err(Error::ObjectiveSpec(format!("{kind}: λ must be finite and non-negative, got {lambda}")));
            }
            if regularizers[..i].iter().any(|(k, _)| k == kind) {
                return Err(Error::ObjectiveSpec(format!("{kind} given twice")));
            }
        }
        if let LengthMode::Reward(l) = length {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::ObjectiveSpec(format!("length reward must be finite and non-negative, got {l}")));
            }
        }
        Ok(Self { regularizers, length })
    }

    pub fn single(kind: RegularizerKind, lambda: f64) -> Result<Self> {
        Self::new(vec![(kind, lambda)], LengthMode::None)
    }

    pub fn regularizers(&self) -> &[(RegularizerKind, f64)] {
        &self.regularizers
    }

    pub fn length(&self) -> LengthMode {
        self.length
    }

    /// Regularizers with `λ > 0`.
    pub fn active(&self) -> impl Iterator<Item = (RegularizerKind, f64)> + '_ {
        self.regularizers.iter().copied().filter(|(_, l)| *l > 0.0)
    }

    /// The score of a prefix is an upper bound on the score of all of its
    /// extensions when every active penalty is prefix-monotone and no length
    /// transform is applied.
    pub fn is_prefix_monotone(&self) -> bool {
        self.length == LengthMode::None && self.active().all(|(k, _)| k.is_prefix_monotone())
    }

    /// Parses the CLI form, e.g. `greedy=5,square=2` or `len=reward:0.5`, `len=norm`.
    /// The empty string is the MAP objective.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut regs = Vec::new();
        let mut length = None;
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::ObjectiveSpec(format!("expected key=value, got {item:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "len" {
                if length.is_some() {
                    return Err(Error::ObjectiveSpec("length mode given twice".into()));
                }
                length = Some(parse_length(value)?);
            } else {
                let kind: RegularizerKind = key.parse()?;
                let lambda = parse_number(value)?;
                regs.push((kind, lambda));
            }
        }
        Self::new(regs, length.unwrap_or_default())
    }
}

fn parse_number(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::ObjectiveSpec(format!("invalid number {s:?}")))
}

fn parse_length(s: &str) -> Result<LengthMode> {
    match s {
        "norm" | "normalize" => Ok(LengthMode::Normalize),
        "none" => Ok(LengthMode::None),
        _ => match s.strip_prefix("reward:") {
            Some(v) => Ok(LengthMode::Reward(parse_number(v)?)),
            None => Err(Error::ObjectiveSpec(format!("invalid length mode {s:?}"))),
        },
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.regularizers.iter().map(|(k, l)| format!("{k}={l}")).collect();
        match self.length {
            LengthMode::None => {}
            LengthMode::Reward(l) => parts.push(format!("len=reward:{l}")),
            LengthMode::Normalize => parts.push("len=norm".into()),
        }
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

fn nonempty(trace: &SurprisalTrace) -> Result<&[f64]> {
    if trace.is_empty() {
        return contract("regularizers need a trace of length at least 1");
    }
    Ok(trace.values())
}

/// `Σ_t (u_t - min_t)^2`.
pub fn r_greedy(trace: &SurprisalTrace, minima: &[f64]) -> Result<f64> {
    if trace.len() != minima.len() {
        return contract(format!("trace has {} steps but {} minima were given", trace.len(), minima.len()));
    }
    Ok(trace.values().iter().zip(minima).map(|(u, m)| (u - m).powi(2)).sum())
}

/// Population variance of the surprisals.
pub fn r_variance(trace: &SurprisalTrace) -> Result<f64> {
    let u = nonempty(trace)?;
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    Ok(u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

/// Mean squared difference of adjacent surprisals, anchored at `u_0 = 0`.
pub fn r_local(trace: &SurprisalTrace) -> Result<f64> {
    let u = nonempty(trace)?;
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &x in u {
        acc += (x - prev).powi(2);
        prev = x;
    }
    Ok(acc / u.len() as f64)
}

pub fn r_max(trace: &SurprisalTrace) -> Result<f64> {
    Ok(nonempty(trace)?.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

pub fn r_square(trace: &SurprisalTrace) -> Result<f64> {
    Ok(nonempty(trace)?.iter().map(|x| x * x).sum())
}

/// Running value of the prefix-monotone penalties on a possibly empty prefix.
/// Every extension of the prefix carries at least this much penalty.
pub(crate) fn monotone_penalty_floor(objective: &Objective, trace: &SurprisalTrace, minima: &[f64]) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    objective
        .active()
        .filter(|(k, _)| k.is_prefix_monotone())
        .map(|(k, l)| l * k.evaluate(trace, minima).expect("non-empty trace with matching minima"))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub kind: RegularizerKind,
    pub lambda: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub log_prob: f64,
    pub penalties: Vec<Penalty>,
    /// Contribution of the length transform: the reward, or `log p/|y| - log p`.
    pub length_term: f64,
    pub total: f64,
}

impl ScoreBreakdown {
    pub(crate) fn unscored(log_prob: f64) -> Self {
        Self { log_prob, penalties: Vec::new(), length_term: 0.0, total: log_prob }
    }
}

/// Scores a trace. `log_prob` must be `-Σ trace`; it is passed separately so
/// that callers accumulating it step by step get bit-identical totals.
pub fn score_parts(
    trace: &SurprisalTrace,
    minima: &[f64],
    log_prob: f64,
    objective: &Objective,
) -> Result<ScoreBreakdown> {
    let n = trace.len();
    let lp_term = match objective.length {
        LengthMode::Normalize if n == 0 => return contract("length normalization of an empty hypothesis"),
        LengthMode::Normalize => log_prob / n as f64,
        _ => log_prob,
    };
    let reward = match objective.length {
        LengthMode::Reward(l) => l * n as f64,
        _ => 0.0,
    };

    let mut penalties = Vec::with_capacity(objective.regularizers.len());
    let mut penalty_sum = 0.0;
    for &(kind, lambda) in &objective.regularizers {
        let value = if log_prob == f64::NEG_INFINITY { f64::INFINITY } else { kind.evaluate(trace, minima)? };
        if lambda > 0.0 {
            penalty_sum += lambda * value;
        }
        penalties.push(Penalty { kind, lambda, value });
    }

    let total = if log_prob == f64::NEG_INFINITY { f64::NEG_INFINITY } else { lp_term - penalty_sum + reward };
    Ok(ScoreBreakdown { log_prob, penalties, length_term: lp_term - log_prob + reward, total })
}

/// Scores a BOS-initial token sequence by walking the model.
pub fn score<M: SequenceModel + ?Sized>(
    tokens: &[TokenId],
    objective: &Objective,
    model: &M,
    source: &[TokenId],
) -> Result<ScoreBreakdown> {
    if tokens.len() < 2 && objective.length == LengthMode::Normalize {
        return contract("length normalization of an empty hypothesis");
    }
    Ok(Hypothesis::from_tokens(model, source, tokens, objective)?.score)
}
