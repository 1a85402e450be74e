//! Hierarchical recurrent encoder-decoder over GRU cells.
//!
//! Three stacked recurrences: a word-level utterance encoder producing `h_m`,
//! an utterance-level context encoder producing `c_m`, and a word-level
//! decoder initialised from `c_{m-1}` whose predicted word embedding is
//! scored against every vocabulary embedding.

mod beam;
mod gru;
mod matrix;
mod train;

use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use beam::{generate, greedy_decode};
pub use gru::{gru_step, GruParams};
pub use matrix::Matrix;
pub use train::{corpus_loss, dialogue_loss, loss_gradient, train, TrainConfig};

use crate::corpus::WordId;
use crate::scalar::Scalar;
use crate::vecspace::{dot_slice, VecError, Vector};
use matrix::affine;

#[derive(Debug, Error)]
pub enum HredError {
    #[error("{what} has dimension {got}, expected {expected}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("utterance has no words")]
    EmptySequence,
    #[error("context has no utterances")]
    EmptyContext,
    #[error("word id {id} outside vocabulary of size {vocab}")]
    WordOutOfRange { id: WordId, vocab: usize },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss in epoch {epoch} at dialogue {dialogue}")]
    NonFiniteLoss { epoch: usize, dialogue: usize },
    #[error("invalid embedding file on line {line}: {reason}")]
    InvalidEmbeddings { line: usize, reason: String },
    #[error(transparent)]
    Vector(#[from] VecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HredDims {
    pub vocab: usize,
    pub embed: usize,
    pub utt_hidden: usize,
    pub ctx_hidden: usize,
    pub dec_hidden: usize,
}

impl HredDims {
    pub fn validate(&self) -> Result<(), HredError> {
        let named = [
            ("vocab", self.vocab),
            ("embed", self.embed),
            ("utt_hidden", self.utt_hidden),
            ("ctx_hidden", self.ctx_hidden),
            ("dec_hidden", self.dec_hidden),
        ];
        for (name, v) in named {
            if v == 0 {
                return Err(HredError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Every trainable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct HredParams<T> {
    /// `vocab × embed`; row `v` is the embedding `e_v`.
    pub embeddings: Matrix<T>,
    pub utt: GruParams<T>,
    pub ctx: GruParams<T>,
    pub dec: GruParams<T>,
    /// Context-to-decoder projection, `dec_hidden × ctx_hidden`.
    pub d0: Matrix<T>,
    pub b0_init: Vec<T>,
    /// Decoder state to predicted embedding, `embed × dec_hidden`.
    pub h0: Matrix<T>,
    /// Previous word embedding to predicted embedding, `embed × embed`.
    pub e0: Matrix<T>,
    pub b0_out: Vec<T>,
}

impl<T: Scalar> HredParams<T> {
    pub fn zeros(dims: HredDims) -> Self {
        Self {
            embeddings: Matrix::zeros(dims.vocab, dims.embed),
            utt: GruParams::zeros(dims.embed, dims.utt_hidden),
            ctx: GruParams::zeros(dims.utt_hidden, dims.ctx_hidden),
            dec: GruParams::zeros(dims.embed, dims.dec_hidden),
            d0: Matrix::zeros(dims.dec_hidden, dims.ctx_hidden),
            b0_init: vec![T::zero(); dims.dec_hidden],
            h0: Matrix::zeros(dims.embed, dims.dec_hidden),
            e0: Matrix::zeros(dims.embed, dims.embed),
            b0_out: vec![T::zero(); dims.embed],
        }
    }

    /// Uniform initialisation in `[-0.1, 0.1]` from a seeded generator.
    pub fn random(dims: HredDims, seed: u64) -> Self {
        Self::uniform(dims, 0.1, seed)
    }

    pub fn uniform(dims: HredDims, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let embeddings = Matrix::uniform(dims.vocab, dims.embed, scale, rng);
        let utt = GruParams::uniform(dims.embed, dims.utt_hidden, scale, rng);
        let ctx = GruParams::uniform(dims.utt_hidden, dims.ctx_hidden, scale, rng);
        let dec = GruParams::uniform(dims.embed, dims.dec_hidden, scale, rng);
        let d0 = Matrix::uniform(dims.dec_hidden, dims.ctx_hidden, scale, rng);
        let b0_init = Matrix::uniform(1, dims.dec_hidden, scale, rng).as_slice().to_vec();
        let h0 = Matrix::uniform(dims.embed, dims.dec_hidden, scale, rng);
        let e0 = Matrix::uniform(dims.embed, dims.embed, scale, rng);
        let b0_out = Matrix::uniform(1, dims.embed, scale, rng).as_slice().to_vec();
        Self { embeddings, utt, ctx, dec, d0, b0_init, h0, e0, b0_out }
    }

    pub fn dims(&self) -> HredDims {
        HredDims {
            vocab: self.embeddings.rows(),
            embed: self.embeddings.cols(),
            utt_hidden: self.utt.hidden_dim(),
            ctx_hidden: self.ctx.hidden_dim(),
            dec_hidden: self.dec.hidden_dim(),
        }
    }

    pub fn tensor_names() -> Vec<String> {
        let gru = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];
        let mut names = vec!["embeddings".to_string()];
        for cell in ["utt", "ctx", "dec"] {
            names.extend(gru.iter().map(|g| format!("{cell}.{g}")));
        }
        names.extend(["d0", "b0_init", "h0", "e0", "b0_out"].map(String::from));
        names
    }

    /// All tensors in the fixed declaration order used by checkpoints.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = vec![self.embeddings.as_slice()];
        out.extend(self.utt.tensors());
        out.extend(self.ctx.tensors());
        out.extend(self.dec.tensors());
        out.extend([self.d0.as_slice(), &self.b0_init, self.h0.as_slice(), self.e0.as_slice(), &self.b0_out]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.embeddings.as_mut_slice()];
        out.extend(self.utt.tensors_mut());
        out.extend(self.ctx.tensors_mut());
        out.extend(self.dec.tensors_mut());
        out.extend([
            self.d0.as_mut_slice(),
            &mut self.b0_init,
            self.h0.as_mut_slice(),
            self.e0.as_mut_slice(),
            &mut self.b0_out,
        ]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Rounds every parameter to `f32` precision.
    pub fn round_f32(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = v.round_f32());
        }
    }

    /// Overwrites embedding rows from `word v_1 ... v_d` lines.
    ///
    /// `words` lists the vocabulary in id order; lines for unknown words are
    /// ignored. Returns the number of rows replaced.
    pub fn load_embeddings<R: BufRead>(&mut self, words: &[String], reader: R) -> Result<usize, HredError> {
        let index: std::collections::HashMap<&str, usize> =
            words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let embed = self.embeddings.cols();
        let mut loaded = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| HredError::InvalidEmbeddings { line: i + 1, reason: e.to_string() })?;
            if values.len() != embed {
                return Err(HredError::InvalidEmbeddings {
                    line: i + 1,
                    reason: format!("expected {embed} values, found {}", values.len()),
                });
            }
            if let Some(&row) = index.get(word) {
                if row < self.embeddings.rows() {
                    for (dst, v) in self.embeddings.row_mut(row).iter_mut().zip(&values) {
                        *dst = T::lit(*v);
                    }
                    loaded += 1;
                }
            }
        }
        Ok(loaded)
    }

    pub(crate) fn check_ids(&self, ids: &[WordId]) -> Result<(), HredError> {
        let vocab = self.embeddings.rows();
        match ids.iter().find(|&&id| id as usize >= vocab) {
            Some(&id) => Err(HredError::WordOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    pub(crate) fn embedding(&self, id: WordId) -> &[T] {
        self.embeddings.row(id as usize)
    }

    pub(crate) fn encode_utterance_raw(&self, ids: &[WordId]) -> Vec<T> {
        let mut h = vec![T::zero(); self.utt.hidden_dim()];
        for &id in ids {
            h = self.utt.forward(&h, self.embedding(id)).h;
        }
        h
    }

    pub(crate) fn decoder_init_raw(&self, c_prev: &[T]) -> Vec<T> {
        let mut d = affine(&self.d0, c_prev, &self.b0_init);
        d.iter_mut().for_each(|v| *v = v.tanh());
        d
    }

    pub(crate) fn predicted_embedding(&self, d_prev: &[T], w_prev: &[T]) -> Vec<T> {
        let mut w = affine(&self.h0, d_prev, &self.b0_out);
        self.e0.mul_add(w_prev, &mut w);
        w
    }

    pub(crate) fn logits_raw(&self, predicted: &[T]) -> Vec<T> {
        (0..self.embeddings.rows()).map(|v| dot_slice(self.embeddings.row(v), predicted)).collect()
    }
}

/// Utterance and context embeddings of one dialogue.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDialogue<T> {
    pub dialogue: usize,
    pub utterance_embeddings: Vec<Vector<T>>,
    pub context_embeddings: Vec<Vector<T>>,
}

/// Folds the utterance GRU over the word embeddings from a zero state and
/// returns the final hidden state.
pub fn encode_utterance<T: Scalar>(p: &HredParams<T>, word_ids: &[WordId]) -> Result<Vector<T>, HredError> {
    if word_ids.is_empty() {
        return Err(HredError::EmptySequence);
    }
    p.check_ids(word_ids)?;
    Ok(Vector::new(p.encode_utterance_raw(word_ids))?)
}

/// Runs the context GRU over utterance embeddings from a zero state,
/// returning `c_1..c_M`.
pub fn encode_context<T: Scalar>(
    p: &HredParams<T>,
    utterance_embeddings: &[Vector<T>],
) -> Result<Vec<Vector<T>>, HredError> {
    if utterance_embeddings.is_empty() {
        return Err(HredError::EmptyContext);
    }
    let mut c = vec![T::zero(); p.ctx.hidden_dim()];
    let mut out = Vec::with_capacity(utterance_embeddings.len());
    for h in utterance_embeddings {
        if h.dim() != p.ctx.input_dim() {
            return Err(HredError::Shape { what: "utterance embedding", expected: p.ctx.input_dim(), got: h.dim() });
        }
        c = p.ctx.forward(&c, h.as_slice()).h;
        out.push(Vector::new(c.clone())?);
    }
    Ok(out)
}

pub fn encode_dialogue<T: Scalar>(
    p: &HredParams<T>,
    dialogue: usize,
    utterances: &[&[WordId]],
) -> Result<EncodedDialogue<T>, HredError> {
    let utterance_embeddings = utterances.iter().map(|ids| encode_utterance(p, ids)).collect::<Result<Vec<_>, _>>()?;
    let context_embeddings = encode_context(p, &utterance_embeddings)?;
    Ok(EncodedDialogue { dialogue, utterance_embeddings, context_embeddings })
}

/// Last context embedding of a (possibly empty) utterance prefix; the zero
/// vector when there is no context.
pub fn context_state<T: Scalar>(p: &HredParams<T>, context: &[Vec<WordId>]) -> Result<Vector<T>, HredError> {
    let mut c = vec![T::zero(); p.ctx.hidden_dim()];
    for ids in context {
        let h = encode_utterance(p, ids)?;
        c = p.ctx.forward(&c, h.as_slice()).h;
    }
    Ok(Vector::new(c)?)
}

/// `tanh(D_0 c + b_0)`: the decoder's initial state.
pub fn decoder_init<T: Scalar>(p: &HredParams<T>, c_prev: &Vector<T>) -> Result<Vector<T>, HredError> {
    if c_prev.dim() != p.d0.cols() {
        return Err(HredError::Shape { what: "context embedding", expected: p.d0.cols(), got: c_prev.dim() });
    }
    Ok(Vector::new(p.decoder_init_raw(c_prev.as_slice()))?)
}

/// Scores of every vocabulary word: `e_v · (H_0 d + E_0 w + b_0)`.
pub fn predict_word_logits<T: Scalar>(
    p: &HredParams<T>,
    d_prev: &Vector<T>,
    w_prev: &Vector<T>,
) -> Result<Vec<T>, HredError> {
    if d_prev.dim() != p.h0.cols() {
        return Err(HredError::Shape { what: "decoder state", expected: p.h0.cols(), got: d_prev.dim() });
    }
    if w_prev.dim() != p.e0.cols() {
        return Err(HredError::Shape { what: "previous word embedding", expected: p.e0.cols(), got: w_prev.dim() });
    }
    Ok(p.logits_raw(&p.predicted_embedding(d_prev.as_slice(), w_prev.as_slice())))
}

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let total = logits.iter().fold(T::zero(), |a, &l| a + (l - max).exp());
    let log_z = max + total.ln();
    logits.iter().map(|&l| l - log_z).collect()
}
