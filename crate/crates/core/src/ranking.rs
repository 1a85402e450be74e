//! Candidate retrieval and response ranking.
//!
//! Scores are similarities to maximise. CR compares the query context with
//! each candidate's context; AR rewards responses similar to the other
//! retrieved responses; CAR does the same against only the CR-best `n`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{CorpusError, Dialogue};
use crate::hred::{encode_dialogue, HredError, HredParams};
use crate::lsh_forest::{sort_scored, ForestConfig, LshError, LshForest, RecordId};
use crate::scalar::Scalar;
use crate::vecspace::{cosine_similarity, VecError, Vector};

/// Query contexts at least this similar to a stored context count as the same conversation.
pub const DUPLICATE_THRESHOLD: f64 = 1.0 - 1e-9;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("candidate store is empty")]
    EmptyStore,
    #[error("no candidates to rank")]
    NoCandidates,
    #[error("CAR pool size {n} exceeds candidate count {k}")]
    PoolTooLarge { n: usize, k: usize },
    #[error("CAR pool size must be at least 1")]
    EmptyPool,
    #[error("record {0} has a zero embedding")]
    ZeroEmbedding(RecordId),
    #[error("record ids must be 0..n in order; found {found} at position {position}")]
    BadRecordId { position: usize, found: RecordId },
    #[error("unknown ranking method {0:?}; expected cr, ar or car")]
    UnknownMethod(String),
    #[error(transparent)]
    Lsh(#[from] LshError),
    #[error(transparent)]
    Hred(#[from] HredError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Vector(#[from] VecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cr,
    Ar,
    Car,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cr => "CR",
            Method::Ar => "AR",
            Method::Car => "CAR",
        })
    }
}

impl FromStr for Method {
    type Err = RankingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cr" => Ok(Method::Cr),
            "ar" => Ok(Method::Ar),
            "car" => Ok(Method::Car),
            _ => Err(RankingError::UnknownMethod(s.to_owned())),
        }
    }
}

/// A stored (context, response) pair: `context_embedding` summarises the
/// dialogue up to the utterance before the response.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord<T> {
    pub id: RecordId,
    pub context_embedding: Vector<T>,
    pub response_embedding: Vector<T>,
    pub response_text: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedCandidate<T> {
    pub id: RecordId,
    pub score: T,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateStore<T> {
    records: Vec<CandidateRecord<T>>,
}

impl<T: Scalar> CandidateStore<T> {
    /// Record ids must equal their positions.
    pub fn new(records: Vec<CandidateRecord<T>>) -> Result<Self, RankingError> {
        if records.is_empty() {
            return Err(RankingError::EmptyStore);
        }
        for (position, r) in records.iter().enumerate() {
            if r.id as usize != position {
                return Err(RankingError::BadRecordId { position, found: r.id });
            }
            if r.context_embedding.norm() == T::zero() || r.response_embedding.norm() == T::zero() {
                return Err(RankingError::ZeroEmbedding(r.id));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[CandidateRecord<T>] {
        &self.records
    }

    pub fn get(&self, id: RecordId) -> Option<&CandidateRecord<T>> {
        self.records.get(id as usize)
    }

    /// Rounds both embeddings of every record to `f32` precision.
    pub fn round_f32(&mut self) {
        for r in &mut self.records {
            r.context_embedding = r.context_embedding.round_f32();
            r.response_embedding = r.response_embedding.round_f32();
        }
    }

    pub fn build_forest(&self, config: ForestConfig) -> Result<LshForest<T>, RankingError> {
        let dim = self.records[0].context_embedding.dim();
        let mut forest = LshForest::new(dim, config)?;
        for r in &self.records {
            forest.insert(r.id, r.context_embedding.clone())?;
        }
        Ok(forest)
    }
}

/// One record per utterance after the first: the context before it and the
/// utterance itself. Dialogues must already be encoded.
pub fn collect_records<T: Scalar>(
    p: &HredParams<T>,
    dialogues: &[Dialogue],
) -> Result<Vec<CandidateRecord<T>>, RankingError> {
    let mut records = Vec::new();
    for (i, d) in dialogues.iter().enumerate() {
        if d.utterances().len() < 2 {
            continue;
        }
        let ids = d.id_sequences()?;
        let enc = encode_dialogue(p, i, &ids)?;
        for m in 1..d.utterances().len() {
            records.push(CandidateRecord {
                id: records.len() as RecordId,
                context_embedding: enc.context_embeddings[m - 1].clone(),
                response_embedding: enc.utterance_embeddings[m].clone(),
                response_text: d.utterances()[m].tokens().to_vec(),
            });
        }
    }
    Ok(records)
}

pub fn build_store<T: Scalar>(
    p: &HredParams<T>,
    dialogues: &[Dialogue],
    config: ForestConfig,
) -> Result<(CandidateStore<T>, LshForest<T>), RankingError> {
    let store = CandidateStore::new(collect_records(p, dialogues)?)?;
    let forest = store.build_forest(config)?;
    Ok((store, forest))
}

fn finish<T: Scalar>(mut scored: Vec<(RecordId, T)>, method: Method) -> Vec<RankedCandidate<T>> {
    sort_scored(&mut scored);
    scored.into_iter().map(|(id, score)| RankedCandidate { id, score, method }).collect()
}

fn nonempty<T>(candidates: &[&CandidateRecord<T>]) -> Result<(), RankingError> {
    if candidates.is_empty() {
        return Err(RankingError::NoCandidates);
    }
    Ok(())
}

/// Context relevance: `cos(c_r, c_q)`.
pub fn score_cr<T: Scalar>(
    c_q: &Vector<T>,
    candidates: &[&CandidateRecord<T>],
) -> Result<Vec<RankedCandidate<T>>, RankingError> {
    nonempty(candidates)?;
    let scored = candidates
        .iter()
        .map(|c| Ok((c.id, cosine_similarity(&c.context_embedding, c_q)?)))
        .collect::<Result<Vec<_>, RankingError>>()?;
    Ok(finish(scored, Method::Cr))
}

/// Summation order for pooled scores, so input order cannot perturb rounding.
fn by_id<'a, T>(candidates: &[&'a CandidateRecord<T>]) -> Vec<&'a CandidateRecord<T>> {
    let mut pool = candidates.to_vec();
    pool.sort_by_key(|c| c.id);
    pool
}

fn mean_response_similarity<T: Scalar>(
    x: &CandidateRecord<T>,
    pool: &[&CandidateRecord<T>],
    include_self: bool,
    normaliser: usize,
) -> Result<T, RankingError> {
    let mut sum = T::zero();
    let mut has_self = false;
    for other in pool {
        if other.id == x.id {
            has_self = true;
            continue;
        }
        sum = sum + cosine_similarity(&x.response_embedding, &other.response_embedding)?;
    }
    // cos(h, h) = 1; added last so rankings do not depend on where x sits in the pool.
    if include_self && has_self {
        sum = sum + T::one();
    }
    Ok(sum / T::lit(normaliser as f64))
}

/// Answer relevance: mean cosine between a candidate's response and every
/// candidate response, `1/k Σ_i cos(h_x, h_i)`. With `include_self = false`
/// the `i = x` term is dropped, which shifts every score by `1/k` and leaves
/// the ranking unchanged.
pub fn score_ar<T: Scalar>(
    candidates: &[&CandidateRecord<T>],
    include_self: bool,
) -> Result<Vec<RankedCandidate<T>>, RankingError> {
    nonempty(candidates)?;
    let k = candidates.len();
    let pool = by_id(candidates);
    let scored = candidates
        .iter()
        .map(|x| Ok((x.id, mean_response_similarity(x, &pool, include_self, k)?)))
        .collect::<Result<Vec<_>, RankingError>>()?;
    Ok(finish(scored, Method::Ar))
}

/// Combined relevance: mean response cosine against the `n` candidates with
/// the best context relevance.
pub fn score_car<T: Scalar>(
    c_q: &Vector<T>,
    candidates: &[&CandidateRecord<T>],
    n: usize,
) -> Result<Vec<RankedCandidate<T>>, RankingError> {
    nonempty(candidates)?;
    if n == 0 {
        return Err(RankingError::EmptyPool);
    }
    if n > candidates.len() {
        return Err(RankingError::PoolTooLarge { n, k: candidates.len() });
    }
    let cr = score_cr(c_q, candidates)?;
    let top: Vec<RecordId> = cr[..n].iter().map(|r| r.id).collect();
    let pool: Vec<&CandidateRecord<T>> = by_id(candidates).into_iter().filter(|c| top.contains(&c.id)).collect();
    let scored = candidates
        .iter()
        .map(|x| Ok((x.id, mean_response_similarity(x, &pool, true, n)?)))
        .collect::<Result<Vec<_>, RankingError>>()?;
    Ok(finish(scored, Method::Car))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrievalConfig {
    pub method: Method,
    /// Candidate budget requested from the forest.
    pub candidates: usize,
    /// CAR pool size, clamped to the number retrieved.
    pub pool: usize,
    /// Keep the `i = x` term of AR.
    pub ar_include_self: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { method: Method::Ar, candidates: 15, pool: 5, ar_include_self: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedResponse<T> {
    pub candidate: RankedCandidate<T>,
    pub text: String,
}

/// Retrieves up to `config.candidates` records whose contexts are near `c_q`
/// (excluding exact duplicates of the query context) and ranks them.
pub fn retrieve_and_rank<T: Scalar>(
    c_q: &Vector<T>,
    store: &CandidateStore<T>,
    forest: &LshForest<T>,
    config: &RetrievalConfig,
) -> Result<Vec<RankedResponse<T>>, RankingError> {
    if store.is_empty() || forest.is_empty() {
        return Err(RankingError::EmptyStore);
    }
    let m = config.candidates.max(1);
    let threshold = T::lit(DUPLICATE_THRESHOLD);
    let mut budget = m;
    let ids: Vec<RecordId> = loop {
        let hits = forest.query_scored(c_q, budget)?;
        let available = hits.len();
        let kept: Vec<RecordId> = hits.into_iter().filter(|(_, s)| *s < threshold).map(|(id, _)| id).collect();
        if kept.len() >= m || available < budget {
            break kept.into_iter().take(m).collect();
        }
        budget = m + (available - kept.len());
    };

    let candidates: Vec<&CandidateRecord<T>> =
        ids.iter().map(|&id| store.get(id).ok_or(LshError::UnknownId(id))).collect::<Result<_, _>>()?;
    if candidates.is_empty() {
        return Err(RankingError::NoCandidates);
    }
    let ranked = match config.method {
        Method::Cr => score_cr(c_q, &candidates)?,
        Method::Ar => score_ar(&candidates, config.ar_include_self)?,
        Method::Car => score_car(c_q, &candidates, config.pool.clamp(1, candidates.len()))?,
    };
    Ok(ranked
        .into_iter()
        .map(|candidate| RankedResponse {
            candidate,
            text: store.get(candidate.id).expect("ranked ids are stored").response_text.join(" "),
        })
        .collect())
}
