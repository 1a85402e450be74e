use std::cmp::Ordering;

use super::{context_state, log_softmax, HredError, HredParams};
use crate::corpus::{WordId, EOU};
use crate::scalar::Scalar;

struct Hypothesis<T> {
    tokens: Vec<WordId>,
    score: f64,
    state: Vec<T>,
}

fn next_log_probs<T: Scalar>(p: &HredParams<T>, h: &Hypothesis<T>) -> Vec<T> {
    let zero = vec![T::zero(); p.embeddings.cols()];
    let w_prev = h.tokens.last().map_or(&zero[..], |&t| p.embedding(t));
    log_softmax(&p.logits_raw(&p.predicted_embedding(&h.state, w_prev)))
}

/// Beam search over the decoder's next-word distributions.
///
/// Hypotheses finish at the end-of-utterance id or after `max_len` tokens.
/// Scores are summed log-probabilities without length normalisation; ties go
/// to the lower token id. Returns the best finished hypothesis, including its
/// end-of-utterance id when one was produced.
pub fn generate<T: Scalar>(
    p: &HredParams<T>,
    context: &[Vec<WordId>],
    beams: usize,
    max_len: usize,
) -> Result<Vec<WordId>, HredError> {
    if beams == 0 {
        return Err(HredError::InvalidConfig("beams must be at least 1".into()));
    }
    if max_len == 0 {
        return Err(HredError::InvalidConfig("max_len must be at least 1".into()));
    }
    let c = context_state(p, context)?;
    let mut live = vec![Hypothesis { tokens: Vec::new(), score: 0.0, state: p.decoder_init_raw(c.as_slice()) }];
    let mut finished: Vec<(Vec<WordId>, f64)> = Vec::new();

    while !live.is_empty() {
        let mut expansions: Vec<(f64, WordId, usize)> = Vec::new();
        for (parent, h) in live.iter().enumerate() {
            for (token, lp) in next_log_probs(p, h).into_iter().enumerate() {
                expansions.push((h.score + lp.to_f64_lossy(), token as WordId, parent));
            }
        }
        expansions
            .sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        expansions.truncate(beams);

        let mut next = Vec::with_capacity(beams);
        for (score, token, parent) in expansions {
            let h = &live[parent];
            let mut tokens = h.tokens.clone();
            tokens.push(token);
            if token == EOU || tokens.len() >= max_len {
                finished.push((tokens, score));
            } else {
                let state = p.dec.forward(&h.state, p.embedding(token)).h;
                next.push(Hypothesis { tokens, score, state });
            }
        }
        live = next;

        // Scores only decrease as hypotheses grow, so stop once nothing live can win.
        let best_finished = finished.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
        if live.iter().all(|h| h.score <= best_finished) {
            break;
        }
    }

    finished.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    Ok(finished.into_iter().next().map(|f| f.0).unwrap_or_default())
}

/// Argmax decoding, kept separate from [`generate`] as a reference.
pub fn greedy_decode<T: Scalar>(
    p: &HredParams<T>,
    context: &[Vec<WordId>],
    max_len: usize,
) -> Result<Vec<WordId>, HredError> {
    let c = context_state(p, context)?;
    let mut h = Hypothesis { tokens: Vec::new(), score: 0.0, state: p.decoder_init_raw(c.as_slice()) };
    while h.tokens.len() < max_len {
        let lp = next_log_probs(p, &h);
        let mut best = 0;
        for (i, v) in lp.iter().enumerate() {
            if *v > lp[best] {
                best = i;
            }
        }
        let token = best as WordId;
        h.tokens.push(token);
        if token == EOU {
            break;
        }
        h.state = p.dec.forward(&h.state, p.embedding(token)).h;
    }
    Ok(h.tokens)
}
