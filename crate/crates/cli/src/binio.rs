//! On-disk formats for checkpoints, candidate stores and forests.
//!
//! Each file starts with an 8-byte magic, a `u32` version and a
//! length-prefixed echo of the producing configuration. Integers are
//! little-endian `u32`/`u64`, reals little-endian `f32`.

use hredlsh::hred::{HredDims, HredParams};
use hredlsh::lsh_forest::{ForestConfig, HashFunction, LshForest, RecordId, TrieToken};
use hredlsh::ranking::{CandidateRecord, CandidateStore};
use hredlsh::vecspace::Vector;
use thiserror::Error;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HREDCKPT";
pub const STORE_MAGIC: &[u8; 8] = b"HREDSTOR";
pub const FOREST_MAGIC: &[u8; 8] = b"LSHFORST";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad {0} header")]
    BadHeader(&'static str),
    #[error("unsupported {kind} version {version}")]
    Version { kind: &'static str, version: u32 },
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("invalid {kind}: {reason}")]
    Invalid { kind: &'static str, reason: String },
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(magic: &[u8; 8], config_echo: &str) -> Self {
        let mut w = Self { buf: magic.to_vec() };
        w.u32(VERSION);
        w.bytes(config_echo.as_bytes());
        w
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits in u32"));
    }

    fn bytes(&mut self, b: &[u8]) {
        self.len(b.len());
        self.buf.extend_from_slice(b);
    }

    fn reals(&mut self, xs: &[f64]) {
        self.len(xs.len());
        for &x in xs {
            self.buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    kind: &'static str,
}

impl<'a> Reader<'a> {
    /// Checks magic and version; returns the reader and the config echo.
    fn open(data: &'a [u8], magic: &[u8; 8], kind: &'static str) -> Result<(Self, String), FormatError> {
        if data.len() < 8 || &data[..8] != magic {
            return Err(FormatError::BadHeader(kind));
        }
        let mut r = Self { data, pos: 8, kind };
        let version = r.u32()?;
        if version != VERSION {
            return Err(FormatError::Version { kind, version });
        }
        let echo = String::from_utf8(r.bytes()?.to_vec()).map_err(|_| r.invalid("config echo is not UTF-8"))?;
        Ok((r, echo))
    }

    fn invalid(&self, reason: impl Into<String>) -> FormatError {
        FormatError::Invalid { kind: self.kind, reason: reason.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or(FormatError::Truncated(self.kind))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize, FormatError> {
        Ok(self.u32()? as usize)
    }

    fn bytes(&mut self) -> Result<&'a [u8], FormatError> {
        let n = self.len()?;
        self.take(n)
    }

    fn reals(&mut self) -> Result<Vec<f64>, FormatError> {
        let n = self.len()?;
        let raw = self.take(n.checked_mul(4).ok_or(FormatError::Truncated(self.kind))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }

    fn vector(&mut self) -> Result<Vector<f64>, FormatError> {
        let v = self.reals()?;
        Vector::new(v).map_err(|e| self.invalid(e.to_string()))
    }

    fn finish(self) -> Result<(), FormatError> {
        if self.pos != self.data.len() {
            return Err(self.invalid("trailing bytes"));
        }
        Ok(())
    }
}

pub fn write_checkpoint(p: &HredParams<f64>, config_echo: &str) -> Vec<u8> {
    let mut w = Writer::new(CHECKPOINT_MAGIC, config_echo);
    let d = p.dims();
    for v in [d.vocab, d.embed, d.utt_hidden, d.ctx_hidden, d.dec_hidden] {
        w.len(v);
    }
    let tensors = p.tensors();
    w.len(tensors.len());
    for t in tensors {
        w.reals(t);
    }
    w.buf
}

pub fn read_checkpoint(data: &[u8]) -> Result<(HredParams<f64>, String), FormatError> {
    let (mut r, echo) = Reader::open(data, CHECKPOINT_MAGIC, "checkpoint")?;
    let dims =
        HredDims { vocab: r.len()?, embed: r.len()?, utt_hidden: r.len()?, ctx_hidden: r.len()?, dec_hidden: r.len()? };
    dims.validate().map_err(|e| r.invalid(e.to_string()))?;
    let mut p = HredParams::zeros(dims);
    let count = r.len()?;
    let mut slots = p.tensors_mut();
    if count != slots.len() {
        return Err(r.invalid(format!("expected {} tensors, found {count}", slots.len())));
    }
    for (i, slot) in slots.iter_mut().enumerate() {
        let values = r.reals()?;
        if values.len() != slot.len() {
            return Err(r.invalid(format!("tensor {i} has {} values, expected {}", values.len(), slot.len())));
        }
        slot.copy_from_slice(&values);
    }
    r.finish()?;
    Ok((p, echo))
}

pub fn write_store(store: &CandidateStore<f64>, config_echo: &str) -> Vec<u8> {
    let mut w = Writer::new(STORE_MAGIC, config_echo);
    w.len(store.len());
    for r in store.records() {
        w.u32(r.id);
        w.reals(r.context_embedding.as_slice());
        w.reals(r.response_embedding.as_slice());
        w.len(r.response_text.len());
        for t in &r.response_text {
            w.bytes(t.as_bytes());
        }
    }
    w.buf
}

pub fn read_store(data: &[u8]) -> Result<(CandidateStore<f64>, String), FormatError> {
    let (mut r, echo) = Reader::open(data, STORE_MAGIC, "store")?;
    let n = r.len()?;
    let mut records = Vec::new();
    for _ in 0..n {
        let id = r.u32()?;
        let context_embedding = r.vector()?;
        let response_embedding = r.vector()?;
        let tokens = r.len()?;
        let mut response_text = Vec::new();
        for _ in 0..tokens {
            let b = r.bytes()?;
            response_text.push(String::from_utf8(b.to_vec()).map_err(|_| r.invalid("token is not UTF-8"))?);
        }
        records.push(CandidateRecord { id, context_embedding, response_embedding, response_text });
    }
    r.finish()?;
    let store =
        CandidateStore::new(records).map_err(|e| FormatError::Invalid { kind: "store", reason: e.to_string() })?;
    Ok((store, echo))
}

pub fn write_forest(forest: &LshForest<f64>, config_echo: &str) -> Vec<u8> {
    let mut w = Writer::new(FOREST_MAGIC, config_echo);
    let c = forest.config();
    w.len(c.trees);
    w.len(c.max_label_len);
    w.u64(c.seed);
    w.len(forest.dim());
    for tree in forest.trees() {
        for h in tree.hash_functions() {
            w.reals(h.hyperplane().as_slice());
        }
    }
    w.len(forest.len());
    for (id, v) in forest.records() {
        w.u32(id);
        w.reals(v.as_slice());
    }
    for tree in forest.trees() {
        let tokens = tree.preorder();
        w.len(tokens.len());
        for t in tokens {
            match t {
                TrieToken::Empty => w.u8(0),
                TrieToken::Internal => w.u8(1),
                TrieToken::Leaf(ids) => {
                    w.u8(2);
                    w.len(ids.len());
                    ids.iter().for_each(|&id| w.u32(id));
                }
            }
        }
    }
    w.buf
}

pub fn read_forest(data: &[u8]) -> Result<(LshForest<f64>, String), FormatError> {
    let (mut r, echo) = Reader::open(data, FOREST_MAGIC, "forest")?;
    let config = ForestConfig { trees: r.len()?, max_label_len: r.len()?, seed: r.u64()? };
    let dim = r.len()?;
    let mut hashes = Vec::new();
    for _ in 0..config.trees {
        let mut tree = Vec::new();
        for _ in 0..config.max_label_len {
            let h = r.vector()?;
            tree.push(HashFunction::new(h).map_err(|e| r.invalid(e.to_string()))?);
        }
        hashes.push(tree);
    }
    let n = r.len()?;
    let mut records: Vec<(RecordId, Vector<f64>)> = Vec::new();
    for _ in 0..n {
        let id = r.u32()?;
        records.push((id, r.vector()?));
    }
    let mut tries = Vec::new();
    for _ in 0..config.trees {
        let count = r.len()?;
        let mut tokens = Vec::new();
        for _ in 0..count {
            tokens.push(match r.u8()? {
                0 => TrieToken::Empty,
                1 => TrieToken::Internal,
                2 => {
                    let k = r.len()?;
                    TrieToken::Leaf((0..k).map(|_| r.u32()).collect::<Result<_, _>>()?)
                }
                t => return Err(r.invalid(format!("unknown trie tag {t}"))),
            });
        }
        tries.push(tokens);
    }
    r.finish()?;
    let forest = LshForest::from_parts(config, dim, hashes, records, tries)
        .map_err(|e| FormatError::Invalid { kind: "forest", reason: e.to_string() })?;
    Ok((forest, echo))
}
