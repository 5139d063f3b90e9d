//! Model generators and shipped fixture models.
//!
//! Random table models back the verification suites. The `m3_*` and
//! `degradation_*` families are constructed so that their search behaviour is
//! known in closed form; see the individual constructors.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::model::{Distribution, TableModel, TableModelSpec};
use crate::vocab::{TokenId, Vocabulary, EOS_MARK};

pub const M1_JSON: &str = include_str!("../fixtures/m1.json");
pub const M2_JSON: &str = include_str!("../fixtures/m2.json");
pub const M3_JSON: &str = include_str!("../fixtures/m3.json");
pub const M3_SOURCES: &str = include_str!("../fixtures/m3.src");
pub const DEGRADATION_JSON: &str = include_str!("../fixtures/degradation.json");
pub const DEGRADATION_VALID_SRC: &str = include_str!("../fixtures/degradation.valid.src");
pub const DEGRADATION_VALID_REF: &str = include_str!("../fixtures/degradation.valid.ref");
pub const DEGRADATION_TEST_SRC: &str = include_str!("../fixtures/degradation.test.src");
pub const DEGRADATION_TEST_REF: &str = include_str!("../fixtures/degradation.test.ref");
pub const BLEU20_HYP: &str = include_str!("../fixtures/bleu20.hyp");
pub const BLEU20_REF: &str = include_str!("../fixtures/bleu20.ref");

/// Two-token model with hand-picked conditionals over prefixes up to length 2.
pub fn m1() -> TableModel {
    TableModel::from_spec(TableModelSpec::from_json_str(M1_JSON).expect("m1.json parses")).expect("m1.json is valid")
}

/// `p(EOS | BOS)` is the largest first step, yet `a b EOS` wins under a
/// length reward of 0.5 once the beam is wide enough to keep `a`.
pub fn m2() -> TableModel {
    TableModel::from_spec(TableModelSpec::from_json_str(M2_JSON).expect("m2.json parses")).expect("m2.json is valid")
}

pub fn m3() -> TableModel {
    TableModel::from_spec(TableModelSpec::from_json_str(M3_JSON).expect("m3.json parses")).expect("m3.json is valid")
}

pub fn degradation() -> TableModel {
    TableModel::from_spec(TableModelSpec::from_json_str(DEGRADATION_JSON).expect("degradation.json parses"))
        .expect("degradation.json is valid")
}

/// Splits a text corpus into whitespace-tokenized lines.
pub fn lines(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split_whitespace().map(String::from).collect()).collect()
}

// ---------------------------------------------------------------------------
// Random table models

#[derive(Debug, Clone, PartialEq)]
pub struct RandomModelOptions {
    pub min_ordinary: usize,
    pub max_ordinary: usize,
    pub min_n_max: usize,
    pub max_n_max: usize,
    /// Upper bound on the number of explicit prefix entries; `n_max` is capped to fit.
    pub prefix_budget: usize,
    /// Mixing weight of the uniform distribution, keeping every log-probability bounded.
    pub uniform_mix: f64,
    /// Chance that an ordinary token is forbidden in a given context.
    pub forbid_rate: f64,
    /// Minimum surprisal gap between the best and second-best token of every entry.
    pub min_gap: Option<f64>,
    /// Make EOS the argmax of every entry at depth `n_max - 1`, so greedy search terminates.
    pub force_final_eos: bool,
}

impl RandomModelOptions {
    pub fn exactness() -> Self {
        Self {
            min_ordinary: 1,
            max_ordinary: 5,
            min_n_max: 2,
            max_n_max: 8,
            prefix_budget: 5000,
            uniform_mix: 0.05,
            forbid_rate: 0.1,
            min_gap: None,
            force_final_eos: false,
        }
    }

    pub fn tie_free() -> Self {
        Self { forbid_rate: 0.0, min_gap: Some(0.05), force_final_eos: true, ..Self::exactness() }
    }

    /// `|V̄| ≤ 4` and `|V̄| ≥ k`, `n_max ≤ 5`.
    pub fn tiny_set(k: usize) -> Self {
        Self {
            min_ordinary: k.saturating_sub(1).max(1),
            max_ordinary: 3,
            min_n_max: 2,
            max_n_max: 5,
            forbid_rate: 0.0,
            min_gap: Some(0.05),
            ..Self::exactness()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub model: TableModel,
    pub n_max: usize,
}

fn prefix_count(v: usize, n_max: usize) -> usize {
    (0..n_max).map(|t| v.pow(t as u32)).sum()
}

/// Draws a table model with an explicit entry for every ordinary-token prefix
/// shorter than `n_max`.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, opts: &RandomModelOptions) -> Result<RandomInstance> {
    let v = rng.gen_range(opts.min_ordinary..=opts.max_ordinary);
    let mut top = opts.max_n_max;
    while top > opts.min_n_max && prefix_count(v, top) > opts.prefix_budget {
        top -= 1;
    }
    let n_max = rng.gen_range(opts.min_n_max..=top);

    let vocab = Vocabulary::new((0..v).map(|i| format!("t{i}")))?;
    let outputs = vocab.output_size();
    let eos = vocab.eos().index();

    let mut entries = Vec::with_capacity(prefix_count(v, n_max));
    let mut frontier = vec![vec![vocab.bos()]];
    for depth in 0..n_max {
        let mut next = Vec::with_capacity(frontier.len() * v);
        for prefix in frontier {
            let mut probs = random_distribution(rng, outputs, eos, opts);
            if opts.force_final_eos && depth + 1 == n_max {
                let argmax = argmax(&probs);
                probs.swap(argmax, eos);
            }
            if depth + 1 < n_max {
                for i in 0..v {
                    let mut child = prefix.clone();
                    child.push(TokenId(i as u32));
                    next.push(child);
                }
            }
            entries.push((Vec::new(), prefix, probs));
        }
        frontier = next;
    }
    let uniform = vec![1.0 / outputs as f64; outputs];
    let model = TableModel::from_dense(vocab, false, &uniform, entries)?;
    Ok(RandomInstance { model, n_max })
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

fn random_distribution<R: Rng + ?Sized>(rng: &mut R, outputs: usize, eos: usize, opts: &RandomModelOptions) -> Vec<f64> {
    // exponential draws give a flat Dirichlet after normalization
    let mut w: Vec<f64> = (0..outputs).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let sum: f64 = w.iter().sum();
    let mix = opts.uniform_mix;
    for x in w.iter_mut() {
        *x = (1.0 - mix) * *x / sum + mix / outputs as f64;
    }
    if opts.forbid_rate > 0.0 {
        for (i, x) in w.iter_mut().enumerate() {
            if i != eos && rng.gen::<f64>() < opts.forbid_rate {
                *x = 0.0;
            }
        }
    }
    if let Some(gap) = opts.min_gap {
        let best = argmax(&w);
        let runner_up = w.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, x)| *x).fold(0.0, f64::max);
        if runner_up > 0.0 && (w[best] / runner_up).ln() < 2.0 * gap {
            w[best] = runner_up * (2.0 * gap).exp();
        }
    }
    let sum: f64 = w.iter().sum();
    w.iter().map(|x| x / sum).collect()
}

// ---------------------------------------------------------------------------
// Empty-string family

/// First-step probability of the greedy path.
pub const M3_GREEDY_FIRST: f64 = 0.5;
/// Probability of every later greedy step, including the final EOS.
pub const M3_GREEDY_STEP: f64 = 0.8;
pub const M3_PATH_LEN: usize = 3;
/// Switch points of the greedy-regularizer sweep, one per input.
pub const M3_TARGET_SWITCH: [f64; 6] = [0.5, 1.5, 3.0, 6.0, 12.0, 100.0];
/// Sweep grid separating the switch points.
pub const M3_SWEEP: [f64; 7] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 1e6];

/// Probability of the full greedy path `g1 .. gL EOS`.
pub fn m3_greedy_path_prob() -> f64 {
    M3_GREEDY_FIRST * M3_GREEDY_STEP.powi(M3_PATH_LEN as i32)
}

/// The greedy-regularizer weight at which `g1 .. gL EOS` overtakes `EOS` when
/// the first-step EOS probability is `p_eos`.
pub fn m3_switch_lambda(p_eos: f64) -> f64 {
    (p_eos / m3_greedy_path_prob()).ln() / (M3_GREEDY_FIRST / p_eos).ln().powi(2)
}

/// Inverts [`m3_switch_lambda`] on `(P(greedy path), p(g1))`, rounded to 1e-6.
pub fn m3_eos_prob_for(target: f64) -> f64 {
    let (mut lo, mut hi) = (m3_greedy_path_prob(), M3_GREEDY_FIRST);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m3_switch_lambda(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi) * 1e6).round() / 1e6
}

const M3_WORDS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
const M3_DISTRACTORS: [&str; 2] = ["x", "y"];

/// Source line of input `i`.
pub fn m3_source(i: usize) -> String {
    format!("s{i}")
}

/// Greedy path of input `i`.
pub fn m3_path(i: usize) -> Vec<&'static str> {
    (0..M3_PATH_LEN).map(|t| M3_WORDS[(i + 2 * t) % M3_WORDS.len()]).collect()
}

/// Every input's MAP optimum is `EOS`, greedy search follows a 3-token path,
/// and the greedy regularizer flips input `i` to that path once
/// `λ > M3_TARGET_SWITCH[i]`. Unlisted contexts emit EOS with certainty.
pub fn m3_spec() -> TableModelSpec {
    let n = M3_TARGET_SWITCH.len();
    let mut vocab: Vec<String> = (0..n).map(m3_source).collect();
    vocab.extend(M3_WORDS.iter().chain(&M3_DISTRACTORS).map(|w| w.to_string()));

    let mut entries = std::collections::BTreeMap::new();
    for (i, &target) in M3_TARGET_SWITCH.iter().enumerate() {
        let src = m3_source(i);
        let path = m3_path(i);
        let p_eos = m3_eos_prob_for(target);
        let rest = 1.0 - M3_GREEDY_FIRST - p_eos;
        entries.insert(
            format!("{src} ||| <s>"),
            dist(&[(path[0], M3_GREEDY_FIRST), (EOS_MARK, p_eos), ("x", rest / 2.0), ("y", rest / 2.0)]),
        );
        let mut ctx = String::from("<s>");
        for t in 0..M3_PATH_LEN {
            ctx.push(' ');
            ctx.push_str(path[t]);
            let step = if t + 1 < M3_PATH_LEN {
                dist(&[(path[t + 1], M3_GREEDY_STEP), (EOS_MARK, 0.05), ("x", 0.15)])
            } else {
                dist(&[(EOS_MARK, M3_GREEDY_STEP), ("y", 1.0 - M3_GREEDY_STEP)])
            };
            entries.insert(format!("{src} ||| {ctx}"), step);
        }
    }
    TableModelSpec { vocab, source_keyed: true, default: dist(&[(EOS_MARK, 1.0)]), entries }
}

fn dist(pairs: &[(&str, f64)]) -> Distribution {
    pairs.iter().map(|(t, p)| (t.to_string(), *p)).collect()
}

// ---------------------------------------------------------------------------
// Beam-degradation family

pub const DEGRADATION_FIRST: f64 = 0.3;
pub const DEGRADATION_EOS: f64 = 0.04;
pub const DEGRADATION_STEP: f64 = 0.5;
pub const DEGRADATION_N_MAX: usize = 8;
pub const DEGRADATION_BEAMS: [usize; 4] = [1, 2, 4, 8];
/// Candidate weights for the validation sweep.
pub const DEGRADATION_LAMBDAS: [f64; 6] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0];

const DEGRADATION_VOCAB: usize = 30;
const HIGH_DISTRACTOR: f64 = 0.06;
const MID_DISTRACTOR: f64 = 0.035;
const FIRST_STEP_OTHERS: usize = 7;
const THIN_TOKENS: usize = 12;
const ALTERNATIVES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationInput {
    pub path: Vec<String>,
    /// Rank of EOS among first-step tokens (1-based). Beams at least this wide
    /// keep `EOS`, which outscores the reference path under MAP.
    pub eos_rank: usize,
}

#[derive(Debug, Clone)]
pub struct DegradationFamily {
    pub spec: TableModelSpec,
    pub valid: Vec<DegradationInput>,
    pub test: Vec<DegradationInput>,
}

fn degradation_word(i: usize) -> String {
    format!("w{i:02}")
}

/// Copy-task inputs: the source and reference are both the greedy path, of
/// length 4 or 5. Greedy continuation steps have probability 0.5, so the path
/// is less likely than `EOS` (0.04) at every length used. The first-step EOS
/// rank cycles through 2..=9, one input per rank in each split.
pub fn degradation_family<R: Rng + ?Sized>(rng: &mut R) -> DegradationFamily {
    let words: Vec<String> = (0..DEGRADATION_VOCAB).map(degradation_word).collect();
    let mut used = BTreeSet::new();
    let mut draw_inputs = |rng: &mut R| -> Vec<DegradationInput> {
        (2..=9)
            .map(|eos_rank| loop {
                let len = rng.gen_range(4..=5);
                let path: Vec<String> = words.choose_multiple(rng, len).cloned().collect();
                if used.insert(path.clone()) {
                    break DegradationInput { path, eos_rank };
                }
            })
            .collect()
    };
    let valid = draw_inputs(rng);
    let test = draw_inputs(rng);

    let mut entries = std::collections::BTreeMap::new();
    for input in valid.iter().chain(&test) {
        add_degradation_entries(rng, &words, input, &mut entries);
    }
    let uniform = 1.0 / (DEGRADATION_VOCAB + 1) as f64;
    let default = words.iter().map(|w| (w.clone(), uniform)).chain([(EOS_MARK.to_string(), uniform)]).collect();
    DegradationFamily { spec: TableModelSpec { vocab: words, source_keyed: true, default, entries }, valid, test }
}

fn add_degradation_entries<R: Rng + ?Sized>(
    rng: &mut R,
    words: &[String],
    input: &DegradationInput,
    entries: &mut std::collections::BTreeMap<String, Distribution>,
) {
    let src = input.path.join(" ");
    let first = &input.path[0];
    let others: Vec<&String> = words.iter().filter(|w| *w != first).collect();
    let picked: Vec<&String> = others.choose_multiple(rng, FIRST_STEP_OTHERS + THIN_TOKENS).copied().collect();

    let high = input.eos_rank - 2;
    let mut d = Distribution::new();
    d.insert(first.clone(), DEGRADATION_FIRST);
    d.insert(EOS_MARK.to_string(), DEGRADATION_EOS);
    for (j, w) in picked[..FIRST_STEP_OTHERS].iter().enumerate() {
        d.insert((*w).clone(), if j < high { HIGH_DISTRACTOR } else { MID_DISTRACTOR });
    }
    let used: f64 = d.values().sum();
    let thin = (1.0 - used) / THIN_TOKENS as f64;
    for w in &picked[FIRST_STEP_OTHERS..] {
        d.insert((*w).clone(), thin);
    }
    entries.insert(format!("{src} ||| <s>"), d);

    let mut ctx = String::from("<s>");
    for (t, w) in input.path.iter().enumerate() {
        ctx.push(' ');
        ctx.push_str(w);
        let next = input.path.get(t + 1);
        let mut d = Distribution::new();
        let keep = match next {
            Some(n) => {
                d.insert(n.clone(), DEGRADATION_STEP);
                d.insert(EOS_MARK.to_string(), 0.01);
                n.as_str()
            }
            None => {
                d.insert(EOS_MARK.to_string(), DEGRADATION_STEP);
                ""
            }
        };
        let alt = (1.0 - d.values().sum::<f64>()) / ALTERNATIVES as f64;
        let pool: Vec<&String> = words.iter().filter(|x| x.as_str() != keep).collect();
        for x in pool.choose_multiple(rng, ALTERNATIVES) {
            d.insert((*x).clone(), alt);
        }
        entries.insert(format!("{src} ||| {ctx}"), d);
    }
}

/// Seed that produced the shipped degradation fixture files.
pub const DEGRADATION_SEED: u64 = 20;
