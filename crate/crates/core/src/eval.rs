//! Recall@k evaluation over held-out dialogues.
//!
//! Each sample pairs the context before a turn with `n` answer options: the
//! turn's first utterance and `n − 1` distractor responses. A model produces
//! an answer embedding, options are ranked by cosine to it, and a hit at `k`
//! means the true response landed in the top `k`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::{CorpusError, Dialogue, Speaker, WordId};
use crate::hred::{context_state, encode_utterance, generate, HredError, HredParams};
use crate::lsh_forest::LshForest;
use crate::ranking::{retrieve_and_rank, CandidateStore, RankingError, RetrievalConfig};
use crate::scalar::Scalar;
use crate::vecspace::{cosine_slice, VecError, Vector};

pub const DEFAULT_KS: [usize; 3] = [1, 2, 5];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 answer options, got {0}")]
    TooFewOptions(usize),
    #[error("held-out set has {available} eligible distinct responses for a sample needing {needed} distractors")]
    NotEnoughResponses { needed: usize, available: usize },
    #[error("no evaluation samples")]
    NoSamples,
    #[error("cut-offs must be at least 1")]
    BadCutoff,
    #[error("answer embedding has dimension {got}, options have {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("reports cannot be merged: {0}")]
    Merge(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Hred(#[from] HredError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Vector(#[from] VecError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub tokens: Vec<String>,
    /// Includes the trailing end-of-utterance id.
    pub word_ids: Vec<WordId>,
}

impl Response {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSample {
    /// Index of the source dialogue in the held-out set.
    pub dialogue: usize,
    /// Index of the target turn in that dialogue.
    pub turn: usize,
    pub speaker: Speaker,
    /// Every utterance before the target turn.
    pub context: Vec<Vec<WordId>>,
    pub truth: Response,
    pub distractors: Vec<Response>,
    /// Where the truth sits among [`EvalSample::options`].
    pub truth_position: usize,
}

impl EvalSample {
    pub fn option_count(&self) -> usize {
        self.distractors.len() + 1
    }

    /// Truth at `truth_position`, distractors in sampled order around it.
    pub fn options(&self) -> Vec<&Response> {
        let mut out: Vec<&Response> = self.distractors.iter().collect();
        out.insert(self.truth_position, &self.truth);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleConfig {
    /// Answer options per sample, truth included.
    pub options: usize,
    pub seed: u64,
    /// Only build samples whose true response is by this speaker.
    pub speaker: Option<Speaker>,
    /// Draw distractors only from responses that occur in some other dialogue.
    pub exclude_same_dialogue: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { options: 10, seed: 11, speaker: None, exclude_same_dialogue: true }
    }
}

struct PoolEntry {
    response: Response,
    dialogues: Vec<usize>,
}

/// One sample per turn that has a preceding turn. The distractor pool holds
/// each distinct response text once; a response is the first utterance of
/// any such turn. Dialogues must be encoded.
pub fn make_samples(heldout: &[Dialogue], config: &SampleConfig) -> Result<Vec<EvalSample>, EvalError> {
    let n = config.options;
    if n < 2 {
        return Err(EvalError::TooFewOptions(n));
    }

    let mut pool: Vec<PoolEntry> = Vec::new();
    let mut by_text: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut targets: Vec<(usize, usize, usize)> = Vec::new();
    for (di, d) in heldout.iter().enumerate() {
        let ids = d.id_sequences()?;
        for (ti, turn) in d.turns().iter().enumerate().skip(1) {
            let u = &d.utterances()[turn.start];
            let slot = *by_text.entry(u.tokens().to_vec()).or_insert_with(|| {
                pool.push(PoolEntry {
                    response: Response { tokens: u.tokens().to_vec(), word_ids: ids[turn.start].to_vec() },
                    dialogues: Vec::new(),
                });
                pool.len() - 1
            });
            if pool[slot].dialogues.last() != Some(&di) {
                pool[slot].dialogues.push(di);
            }
            if config.speaker.as_ref().is_none_or(|s| *s == turn.speaker) {
                targets.push((di, ti, slot));
            }
        }
    }
    if pool.len() < n {
        return Err(EvalError::NotEnoughResponses { needed: n - 1, available: pool.len().saturating_sub(1) });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(targets.len());
    for (di, ti, slot) in targets {
        let d = &heldout[di];
        let turn = &d.turns()[ti];
        let eligible: Vec<usize> = (0..pool.len())
            .filter(|&j| j != slot && (!config.exclude_same_dialogue || pool[j].dialogues.iter().any(|&o| o != di)))
            .collect();
        if eligible.len() < n - 1 {
            return Err(EvalError::NotEnoughResponses { needed: n - 1, available: eligible.len() });
        }
        let distractors = sample_indices(&mut rng, eligible.len(), n - 1)
            .into_iter()
            .map(|i| pool[eligible[i]].response.clone())
            .collect();
        let truth_position = rng.random_range(0..n);
        let ids = d.id_sequences()?;
        samples.push(EvalSample {
            dialogue: di,
            turn: ti,
            speaker: turn.speaker.clone(),
            context: ids[..turn.start].iter().map(|s| s.to_vec()).collect(),
            truth: pool[slot].response.clone(),
            distractors,
            truth_position,
        });
    }
    Ok(samples)
}

/// Option indices by descending cosine to `answer`, ties to the lower index.
/// A zero vector on either side scores 0.
pub fn rank_answers<T: Scalar>(answer: &Vector<T>, options: &[Vector<T>]) -> Result<Vec<usize>, EvalError> {
    let mut scored = Vec::with_capacity(options.len());
    for (i, o) in options.iter().enumerate() {
        if o.dim() != answer.dim() {
            return Err(EvalError::Dimension { expected: o.dim(), got: answer.dim() });
        }
        let s = match cosine_slice(answer.as_slice(), o.as_slice()) {
            Ok(s) => s,
            Err(VecError::ZeroNorm) => T::zero(),
            Err(e) => return Err(e.into()),
        };
        scored.push((i, s));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().map(|(i, _)| i).collect())
}

/// Produces an answer embedding for a sample. `options` are the sample's
/// option embeddings in [`EvalSample::options`] order.
pub trait AnswerModel<T> {
    fn name(&self) -> String;
    fn answer(&mut self, sample: &EvalSample, options: &[Vector<T>]) -> Result<Vector<T>, EvalError>;
}

/// Beam-search a response from the context, then encode it.
pub struct GenerativeModel<'a, T> {
    pub params: &'a HredParams<T>,
    pub beams: usize,
    pub max_len: usize,
}

impl<T: Scalar> AnswerModel<T> for GenerativeModel<'_, T> {
    fn name(&self) -> String {
        "HRED".into()
    }

    fn answer(&mut self, sample: &EvalSample, _options: &[Vector<T>]) -> Result<Vector<T>, EvalError> {
        let ids = generate(self.params, &sample.context, self.beams, self.max_len)?;
        Ok(encode_utterance(self.params, &ids)?)
    }
}

/// Response embedding of the top-ranked retrieved candidate.
pub struct RetrievalModel<'a, T> {
    pub params: &'a HredParams<T>,
    pub store: &'a CandidateStore<T>,
    pub forest: &'a LshForest<T>,
    pub config: RetrievalConfig,
}

impl<T: Scalar> AnswerModel<T> for RetrievalModel<'_, T> {
    fn name(&self) -> String {
        format!("HRED-{}", self.config.method)
    }

    fn answer(&mut self, sample: &EvalSample, _options: &[Vector<T>]) -> Result<Vector<T>, EvalError> {
        let c_q = context_state(self.params, &sample.context)?;
        let ranked = retrieve_and_rank(&c_q, self.store, self.forest, &self.config)?;
        let best = ranked.first().ok_or(RankingError::NoCandidates)?;
        Ok(self.store.get(best.candidate.id).ok_or(RankingError::NoCandidates)?.response_embedding.clone())
    }
}

/// Standard-normal answer vectors from a seeded generator.
pub struct RandomModel {
    rng: ChaCha8Rng,
}

impl RandomModel {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl<T: Scalar> AnswerModel<T> for RandomModel {
    fn name(&self) -> String {
        "random".into()
    }

    fn answer(&mut self, _sample: &EvalSample, options: &[Vector<T>]) -> Result<Vector<T>, EvalError> {
        let dim = options.first().map_or(1, Vector::dim);
        let v: Vec<f64> = (0..dim).map(|_| self.rng.sample(StandardNormal)).collect();
        Ok(Vector::new(v.into_iter().map(T::lit).collect())?)
    }
}

/// Answers with the true response's embedding.
pub struct OracleModel;

impl<T: Scalar> AnswerModel<T> for OracleModel {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn answer(&mut self, sample: &EvalSample, options: &[Vector<T>]) -> Result<Vector<T>, EvalError> {
        Ok(options[sample.truth_position].clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecallReport {
    pub model: String,
    pub ks: Vec<usize>,
    /// Hit counts aligned with `ks`.
    pub hits: Vec<usize>,
    pub samples: usize,
}

impl RecallReport {
    pub fn new(model: impl Into<String>, ks: &[usize]) -> Self {
        Self { model: model.into(), ks: ks.to_vec(), hits: vec![0; ks.len()], samples: 0 }
    }

    /// Records one sample whose truth was ranked `rank` (1-based).
    pub fn record(&mut self, rank: usize) {
        self.samples += 1;
        for (k, h) in self.ks.iter().zip(&mut self.hits) {
            if rank <= *k {
                *h += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &RecallReport) -> Result<(), EvalError> {
        if self.ks != other.ks {
            return Err(EvalError::Merge(format!("cut-offs {:?} vs {:?}", self.ks, other.ks)));
        }
        if self.model != other.model {
            return Err(EvalError::Merge(format!("models {} vs {}", self.model, other.model)));
        }
        self.samples += other.samples;
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        Ok(())
    }

    fn position(&self, k: usize) -> Option<usize> {
        self.ks.iter().position(|&x| x == k)
    }

    pub fn recall(&self, k: usize) -> Option<f64> {
        let i = self.position(k)?;
        (self.samples > 0).then(|| self.hits[i] as f64 / self.samples as f64)
    }

    /// 95% normal-approximation half-width, `1.96·sqrt(p(1−p)/N)`.
    pub fn half_width(&self, k: usize) -> Option<f64> {
        let p = self.recall(k)?;
        Some(1.96 * (p * (1.0 - p) / self.samples as f64).sqrt())
    }

    pub fn write_kv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "model={}", self.model)?;
        writeln!(w, "samples={}", self.samples)?;
        for (&k, &h) in self.ks.iter().zip(&self.hits) {
            writeln!(w, "hits@{k}={h}")?;
            writeln!(w, "recall@{k}={:.6}", self.recall(k).unwrap_or(0.0))?;
            writeln!(w, "half_width@{k}={:.6}", self.half_width(k).unwrap_or(0.0))?;
        }
        Ok(())
    }
}

/// Fixed-width table, one row per report, recall as percentages.
pub fn render_table(reports: &[RecallReport]) -> String {
    let mut ks: Vec<usize> = reports.iter().flat_map(|r| r.ks.iter().copied()).collect();
    ks.sort_unstable();
    ks.dedup();
    let width = reports.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}", "Model");
    for k in &ks {
        let _ = write!(out, "  {:>14}", format!("R@{k}"));
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<width$}", r.model);
        for &k in &ks {
            let cell = match (r.recall(k), r.half_width(k)) {
                (Some(p), Some(hw)) => format!("{:.1} ± {:.1}", 100.0 * p, 100.0 * hw),
                _ => "-".into(),
            };
            let _ = write!(out, "  {cell:>14}");
        }
        out.push('\n');
    }
    out
}

/// Ranks each sample's options against the model's answer and tallies hits.
/// `embed` maps an option's word ids to its embedding.
pub fn recall_at_k<T: Scalar>(
    samples: &[EvalSample],
    mut embed: impl FnMut(&[WordId]) -> Result<Vector<T>, EvalError>,
    model: &mut dyn AnswerModel<T>,
    ks: &[usize],
) -> Result<RecallReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    if ks.contains(&0) {
        return Err(EvalError::BadCutoff);
    }
    let mut report = RecallReport::new(model.name(), ks);
    for s in samples {
        let options = s.options().into_iter().map(|o| embed(&o.word_ids)).collect::<Result<Vec<_>, EvalError>>()?;
        let answer = model.answer(s, &options)?;
        let order = rank_answers(&answer, &options)?;
        let rank = order.iter().position(|&i| i == s.truth_position).expect("truth is an option") + 1;
        report.record(rank);
    }
    Ok(report)
}

/// Option embedder backed by the utterance encoder.
pub fn hred_embedder<T: Scalar>(p: &HredParams<T>) -> impl FnMut(&[WordId]) -> Result<Vector<T>, EvalError> + '_ {
    move |ids| Ok(encode_utterance(p, ids)?)
}
