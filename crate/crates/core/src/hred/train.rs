use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gru::GruCache;
use super::{log_softmax, HredError, HredParams};
use crate::corpus::WordId;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm cap; `0` disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, epochs: 10, seed: 42, clip_norm: 1.0 }
    }
}

struct DecodeTrace<T> {
    /// Index of the context embedding the decoder starts from; `None` means `c_0 = 0`.
    context: Option<usize>,
    d0: Vec<T>,
    /// Decoder state fed to each prediction.
    states: Vec<Vec<T>>,
    predicted: Vec<Vec<T>>,
    probs: Vec<Vec<T>>,
    steps: Vec<GruCache<T>>,
}

struct Forward<T> {
    utt: Vec<Vec<GruCache<T>>>,
    ctx: Vec<GruCache<T>>,
    decodes: Vec<DecodeTrace<T>>,
    nll: f64,
    words: usize,
}

fn validate<T: Scalar>(p: &HredParams<T>, dialogue: &[Vec<WordId>]) -> Result<(), HredError> {
    if dialogue.is_empty() {
        return Err(HredError::EmptyContext);
    }
    for u in dialogue {
        if u.is_empty() {
            return Err(HredError::EmptySequence);
        }
        p.check_ids(u)?;
    }
    Ok(())
}

fn forward<T: Scalar>(p: &HredParams<T>, dialogue: &[Vec<WordId>]) -> Forward<T> {
    let utt_hidden = p.utt.hidden_dim();
    let embed = p.embeddings.cols();
    let mut utt = Vec::with_capacity(dialogue.len());
    let mut ctx: Vec<GruCache<T>> = Vec::with_capacity(dialogue.len());
    for ids in dialogue {
        let mut h = vec![T::zero(); utt_hidden];
        let mut caches = Vec::with_capacity(ids.len());
        for &id in ids {
            let c = p.utt.forward(&h, p.embedding(id));
            h = c.h.clone();
            caches.push(c);
        }
        let c_prev = ctx.last().map_or_else(|| vec![T::zero(); p.ctx.hidden_dim()], |c| c.h.clone());
        ctx.push(p.ctx.forward(&c_prev, &h));
        utt.push(caches);
    }

    let zero_word = vec![T::zero(); embed];
    let mut decodes = Vec::with_capacity(dialogue.len());
    let mut nll = 0.0;
    let mut words = 0;
    for (m, targets) in dialogue.iter().enumerate() {
        let context = m.checked_sub(1);
        let c = context.map_or_else(|| vec![T::zero(); p.ctx.hidden_dim()], |i| ctx[i].h.clone());
        let d0 = p.decoder_init_raw(&c);
        let mut state = d0.clone();
        let mut trace = DecodeTrace {
            context,
            d0,
            states: Vec::with_capacity(targets.len()),
            predicted: Vec::with_capacity(targets.len()),
            probs: Vec::with_capacity(targets.len()),
            steps: Vec::with_capacity(targets.len()),
        };
        for (n, &target) in targets.iter().enumerate() {
            let w_prev = if n == 0 { &zero_word[..] } else { p.embedding(targets[n - 1]) };
            let predicted = p.predicted_embedding(&state, w_prev);
            let log_probs = log_softmax(&p.logits_raw(&predicted));
            nll -= log_probs[target as usize].to_f64_lossy();
            words += 1;
            trace.states.push(state.clone());
            trace.predicted.push(predicted);
            trace.probs.push(log_probs.into_iter().map(|l| l.exp()).collect());
            if n + 1 < targets.len() {
                let step = p.dec.forward(&state, p.embedding(target));
                state = step.h.clone();
                trace.steps.push(step);
            }
        }
        decodes.push(trace);
    }
    Forward { utt, ctx, decodes, nll, words }
}

/// Summed negative log-likelihood of every word of every utterance, each
/// utterance decoded from the context of the utterances before it, and the
/// number of predicted words.
pub fn dialogue_loss<T: Scalar>(p: &HredParams<T>, dialogue: &[Vec<WordId>]) -> Result<(f64, usize), HredError> {
    validate(p, dialogue)?;
    let f = forward(p, dialogue);
    Ok((f.nll, f.words))
}

/// Mean per-word negative log-likelihood over a corpus.
pub fn corpus_loss<T: Scalar>(p: &HredParams<T>, corpus: &[Vec<Vec<WordId>>]) -> Result<f64, HredError> {
    let (mut nll, mut words) = (0.0, 0usize);
    for d in corpus {
        let (n, w) = dialogue_loss(p, d)?;
        nll += n;
        words += w;
    }
    if words == 0 {
        return Err(HredError::EmptyCorpus);
    }
    Ok(nll / words as f64)
}

/// Gradient of the dialogue's mean per-word negative log-likelihood with
/// respect to every parameter, along with that mean loss.
pub fn loss_gradient<T: Scalar>(
    p: &HredParams<T>,
    dialogue: &[Vec<WordId>],
) -> Result<(HredParams<T>, f64), HredError> {
    validate(p, dialogue)?;
    let f = forward(p, dialogue);
    let mut g = HredParams::zeros(p.dims());
    backward(p, dialogue, &f, &mut g);
    Ok((g, f.nll / f.words as f64))
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

fn backward<T: Scalar>(p: &HredParams<T>, dialogue: &[Vec<WordId>], f: &Forward<T>, g: &mut HredParams<T>) {
    let scale = T::one() / T::lit(f.words as f64);
    let embed = p.embeddings.cols();
    let dec_hidden = p.dec.hidden_dim();
    let mut d_context = vec![vec![T::zero(); p.ctx.hidden_dim()]; dialogue.len()];

    for (targets, trace) in dialogue.iter().zip(&f.decodes) {
        let mut d_next = vec![T::zero(); dec_hidden];
        for n in (0..targets.len()).rev() {
            let mut d_state = vec![T::zero(); dec_hidden];
            if n + 1 < targets.len() {
                let mut dx = vec![T::zero(); embed];
                p.dec.backward(&trace.steps[n], &d_next, &mut g.dec, Some(&mut dx), &mut d_state);
                add_into(g.embeddings.row_mut(targets[n] as usize), &dx);
            }

            let mut d_logits: Vec<T> = trace.probs[n].iter().map(|&q| q * scale).collect();
            let t = targets[n] as usize;
            d_logits[t] = d_logits[t] - scale;
            let mut d_pred = vec![T::zero(); embed];
            p.embeddings.t_mul_add(&d_logits, &mut d_pred);
            g.embeddings.add_outer(&d_logits, &trace.predicted[n]);

            g.h0.add_outer(&d_pred, &trace.states[n]);
            p.h0.t_mul_add(&d_pred, &mut d_state);
            add_into(&mut g.b0_out, &d_pred);
            if n > 0 {
                let prev = targets[n - 1];
                g.e0.add_outer(&d_pred, p.embedding(prev));
                let mut dw = vec![T::zero(); embed];
                p.e0.t_mul_add(&d_pred, &mut dw);
                add_into(g.embeddings.row_mut(prev as usize), &dw);
            }
            d_next = d_state;
        }

        let da: Vec<T> = d_next.iter().zip(&trace.d0).map(|(&d, &y)| d * (T::one() - y * y)).collect();
        add_into(&mut g.b0_init, &da);
        if let Some(ci) = trace.context {
            g.d0.add_outer(&da, &f.ctx[ci].h);
            p.d0.t_mul_add(&da, &mut d_context[ci]);
        }
    }

    let mut d_carry = vec![T::zero(); p.ctx.hidden_dim()];
    for j in (0..dialogue.len()).rev() {
        let mut dc = d_context[j].clone();
        add_into(&mut dc, &d_carry);
        let mut d_prev = vec![T::zero(); p.ctx.hidden_dim()];
        let mut dh = vec![T::zero(); p.utt.hidden_dim()];
        p.ctx.backward(&f.ctx[j], &dc, &mut g.ctx, Some(&mut dh), &mut d_prev);
        d_carry = d_prev;

        for (step, &id) in f.utt[j].iter().zip(&dialogue[j]).rev() {
            let mut dh_prev = vec![T::zero(); p.utt.hidden_dim()];
            let mut dx = vec![T::zero(); embed];
            p.utt.backward(step, &dh, &mut g.utt, Some(&mut dx), &mut dh_prev);
            add_into(g.embeddings.row_mut(id as usize), &dx);
            dh = dh_prev;
        }
    }
}

fn global_norm<T: Scalar>(g: &HredParams<T>) -> f64 {
    g.tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|v| {
            let v = v.to_f64_lossy();
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Stochastic gradient descent, one update per dialogue in a seeded shuffled
/// order, with teacher forcing. Returns the trained parameters and the mean
/// per-word loss of each epoch.
pub fn train<T: Scalar>(
    mut p: HredParams<T>,
    corpus: &[Vec<Vec<WordId>>],
    config: &TrainConfig,
) -> Result<(HredParams<T>, Vec<f64>), HredError> {
    if corpus.is_empty() {
        return Err(HredError::EmptyCorpus);
    }
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(HredError::InvalidConfig("learning_rate must be finite and non-negative".into()));
    }
    if config.clip_norm.is_nan() || config.clip_norm < 0.0 {
        return Err(HredError::InvalidConfig("clip_norm must be non-negative".into()));
    }
    for d in corpus {
        validate(&p, d)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut nll, mut words) = (0.0, 0usize);
        for &i in &order {
            let f = forward(&p, &corpus[i]);
            if !f.nll.is_finite() {
                return Err(HredError::NonFiniteLoss { epoch, dialogue: i });
            }
            nll += f.nll;
            words += f.words;
            let mut g = HredParams::zeros(p.dims());
            backward(&p, &corpus[i], &f, &mut g);

            let norm = global_norm(&g);
            let mut step = config.learning_rate;
            if config.clip_norm > 0.0 && norm > config.clip_norm {
                step *= config.clip_norm / norm;
            }
            let step = T::lit(step);
            for (w, dw) in p.tensors_mut().into_iter().zip(g.tensors()) {
                for (a, &b) in w.iter_mut().zip(dw) {
                    *a = *a - step * b;
                }
            }
        }
        let epoch_loss = nll / words as f64;
        log::debug!("epoch {epoch}: loss {epoch_loss:.6}");
        losses.push(epoch_loss);
    }
    Ok((p, losses))
}
