use std::time::Instant;

use super::{DecodeRecord, SearchConfig};
use crate::error::{Error, Result};
use crate::hypothesis::Hypothesis;
use crate::model::SequenceModel;
use crate::objectives::Objective;
use crate::vocab::TokenId;

/// Stepwise argmax; ties go to the lowest token id. The result is scored under
/// the MAP objective.
pub fn greedy_search<M: SequenceModel + ?Sized>(
    model: &M,
    source: &[TokenId],
    config: &SearchConfig,
) -> Result<DecodeRecord> {
    config.validate()?;
    let start = Instant::now();
    let eos = model.vocab().eos();
    let mut h = Hypothesis::root(model.vocab());
    let mut expanded = 0;
    while !h.complete && h.len() < config.n_max {
        let lps = model.next_log_probs(source, &h.tokens)?;
        expanded += 1;
        let mut pick = 0;
        for (i, lp) in lps.iter().enumerate() {
            if *lp > lps[pick] {
                pick = i;
            }
        }
        if lps[pick] == f64::NEG_INFINITY {
            break;
        }
        h = h.extend(TokenId(pick as u32), &lps, eos);
    }
    if !h.complete {
        return Err(Error::NoHypothesis { n_max: config.n_max });
    }
    let best = h.scored(&Objective::map())?;
    Ok(DecodeRecord {
        best,
        beam_set: Vec::new(),
        nodes_expanded: expanded,
        optimality_certificate: false,
        wall_time: start.elapsed(),
    })
}
