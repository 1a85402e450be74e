//! Retrieval-based dialogue response engine.
//!
//! Conversations are encoded with a hierarchical GRU encoder into utterance
//! and context embeddings ([`hred`]), context embeddings are indexed in an
//! LSH Forest ([`lsh_forest`]), retrieved candidates are ranked by context
//! and answer relevance ([`ranking`]) and ranking quality is measured with
//! Recall@k ([`eval`]).
//!
//! Numeric types are generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below are the double-precision instantiations used throughout
//! the command-line tools.

pub mod corpus;
pub mod eval;
pub mod hred;
pub mod lsh_forest;
pub mod ranking;
mod scalar;
pub mod vecspace;

pub use scalar::Scalar;

pub type VectorF64 = vecspace::Vector<f64>;
pub type VectorF32 = vecspace::Vector<f32>;
pub type HredParamsF64 = hred::HredParams<f64>;
pub type HredParamsF32 = hred::HredParams<f32>;
pub type LshForestF64 = lsh_forest::LshForest<f64>;
pub type LshForestF32 = lsh_forest::LshForest<f32>;
pub type CandidateStoreF64 = ranking::CandidateStore<f64>;
pub type CandidateStoreF32 = ranking::CandidateStore<f32>;
