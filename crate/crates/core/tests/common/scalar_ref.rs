//! Loop-only double precision model evaluation. Reads parameters entry by
//! entry and never calls the library's arithmetic.

#![allow(clippy::needless_range_loop)]

use hredlsh::hred::{GruParams, HredParams};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn gru(p: &GruParams<f64>, h_prev: &[f64], x: &[f64]) -> Vec<f64> {
    let hidden = p.b_z.len();
    let mut z = vec![0.0; hidden];
    let mut r = vec![0.0; hidden];
    for i in 0..hidden {
        let mut az = p.b_z[i];
        let mut ar = p.b_r[i];
        for j in 0..x.len() {
            az += p.w_z.get(i, j) * x[j];
            ar += p.w_r.get(i, j) * x[j];
        }
        for j in 0..hidden {
            az += p.u_z.get(i, j) * h_prev[j];
            ar += p.u_r.get(i, j) * h_prev[j];
        }
        z[i] = sigmoid(az);
        r[i] = sigmoid(ar);
    }
    let mut out = vec![0.0; hidden];
    for i in 0..hidden {
        let mut a = p.b_h[i];
        for j in 0..x.len() {
            a += p.w_h.get(i, j) * x[j];
        }
        for j in 0..hidden {
            a += p.u_h.get(i, j) * (r[j] * h_prev[j]);
        }
        let cand = a.tanh();
        out[i] = z[i] * h_prev[i] + (1.0 - z[i]) * cand;
    }
    out
}

pub fn embedding(p: &HredParams<f64>, id: u32) -> Vec<f64> {
    (0..p.embeddings.cols()).map(|j| p.embeddings.get(id as usize, j)).collect()
}

pub fn encode_utterance(p: &HredParams<f64>, ids: &[u32]) -> Vec<f64> {
    let mut h = vec![0.0; p.utt.b_z.len()];
    for &id in ids {
        h = gru(&p.utt, &h, &embedding(p, id));
    }
    h
}

pub fn encode_context(p: &HredParams<f64>, utterances: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut c = vec![0.0; p.ctx.b_z.len()];
    let mut out = Vec::new();
    for h in utterances {
        c = gru(&p.ctx, &c, h);
        out.push(c.clone());
    }
    out
}

pub fn decoder_init(p: &HredParams<f64>, c: &[f64]) -> Vec<f64> {
    let rows = p.b0_init.len();
    let mut out = vec![0.0; rows];
    for i in 0..rows {
        let mut a = p.b0_init[i];
        for j in 0..c.len() {
            a += p.d0.get(i, j) * c[j];
        }
        out[i] = a.tanh();
    }
    out
}

pub fn logits(p: &HredParams<f64>, d: &[f64], w_prev: &[f64]) -> Vec<f64> {
    let embed = p.b0_out.len();
    let mut pred = vec![0.0; embed];
    for i in 0..embed {
        let mut a = p.b0_out[i];
        for j in 0..d.len() {
            a += p.h0.get(i, j) * d[j];
        }
        for j in 0..w_prev.len() {
            a += p.e0.get(i, j) * w_prev[j];
        }
        pred[i] = a;
    }
    let vocab = p.embeddings.rows();
    let mut out = vec![0.0; vocab];
    for v in 0..vocab {
        let mut a = 0.0;
        for i in 0..embed {
            a += p.embeddings.get(v, i) * pred[i];
        }
        out[v] = a;
    }
    out
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut max = f64::NEG_INFINITY;
    for &l in logits {
        if l > max {
            max = l;
        }
    }
    let mut total = 0.0;
    let mut out = vec![0.0; logits.len()];
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in &mut out {
        *o /= total;
    }
    out
}

/// Per-word negative log-likelihood of a dialogue under teacher forcing:
/// every utterance is decoded from the context of the utterances before it.
pub fn mean_nll(p: &HredParams<f64>, dialogue: &[Vec<u32>]) -> f64 {
    let hs: Vec<Vec<f64>> = dialogue.iter().map(|u| encode_utterance(p, u)).collect();
    let cs = encode_context(p, &hs);
    let zero_ctx = vec![0.0; p.ctx.b_z.len()];
    let mut nll = 0.0;
    let mut words = 0usize;
    for (m, u) in dialogue.iter().enumerate() {
        let c_prev = if m == 0 { &zero_ctx } else { &cs[m - 1] };
        let mut d = decoder_init(p, c_prev);
        let mut w_prev = vec![0.0; p.embeddings.cols()];
        for &t in u {
            let probs = softmax(&logits(p, &d, &w_prev));
            nll -= probs[t as usize].ln();
            words += 1;
            w_prev = embedding(p, t);
            d = gru(&p.dec, &d, &w_prev);
        }
    }
    nll / words as f64
}
