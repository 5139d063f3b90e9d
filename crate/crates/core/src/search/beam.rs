use std::time::Instant;

use super::{DecodeRecord, SearchConfig};
use crate::error::{Error, Result};
use crate::hypothesis::{ranking, Hypothesis};
use crate::model::SequenceModel;
use crate::objectives::Objective;
use crate::vocab::TokenId;

/// Keeps the `k` best prefixes by objective score at every step. Complete
/// hypotheses stay in the candidate pool with their score unchanged. Members
/// still lacking EOS after `n_max` steps are dropped.
pub fn beam_search<M: SequenceModel + ?Sized>(
    model: &M,
    source: &[TokenId],
    objective: &Objective,
    config: &SearchConfig,
) -> Result<DecodeRecord> {
    config.validate()?;
    let start = Instant::now();
    let eos = model.vocab().eos();
    let mut beam = vec![Hypothesis::root(model.vocab())];
    let mut expanded = 0;

    for _ in 0..config.n_max {
        if beam.iter().all(|h| h.complete) {
            break;
        }
        let mut candidates = Vec::with_capacity(beam.len() * model.vocab().output_size());
        for h in beam {
            if h.complete {
                candidates.push(h);
                continue;
            }
            let lps = model.next_log_probs(source, &h.tokens)?;
            expanded += 1;
            for (i, lp) in lps.iter().enumerate() {
                if lp.is_finite() {
                    candidates.push(h.extend(TokenId(i as u32), &lps, eos).scored(objective)?);
                }
            }
        }
        candidates.sort_by(ranking);
        candidates.truncate(config.beam_width);
        beam = candidates;
    }

    beam.retain(|h| h.complete);
    if beam.is_empty() {
        return Err(Error::NoHypothesis { n_max: config.n_max });
    }
    Ok(DecodeRecord {
        best: beam[0].clone(),
        beam_set: beam,
        nodes_expanded: expanded,
        optimality_certificate: false,
        wall_time: start.elapsed(),
    })
}
