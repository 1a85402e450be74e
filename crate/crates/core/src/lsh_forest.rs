//! LSH Forest over sign-random-projection hashes.
//!
//! Each tree is a binary trie keyed by a record's hash bits, one hyperplane
//! per level. A record's leaf sits at the shortest prefix that separates it
//! from every other record, or at depth `max_label_len` when no such prefix
//! exists. The trie shape is therefore a function of the stored label set
//! alone, which makes insert/remove round-trips structurally exact.
//!
//! Queries descend every tree along the query's label, then collect records
//! bottom-up, synchronously across trees, from the deepest matched level
//! until enough distinct candidates are gathered. Candidates are re-ranked by
//! exact cosine similarity.

use std::collections::{BTreeMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::vecspace::{cosine_slice, dot_slice, VecError, Vector};

pub type RecordId = u32;

pub const MAX_LABEL_BITS: usize = 64;

#[derive(Debug, Error)]
pub enum LshError {
    #[error("record {0} is already indexed")]
    DuplicateId(RecordId),
    #[error("record {0} is not indexed")]
    UnknownId(RecordId),
    #[error("forest holds no records")]
    EmptyForest,
    #[error("vector has dimension {got}, index expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("cannot index or query a zero vector")]
    ZeroVector,
    #[error("invalid forest configuration: {0}")]
    InvalidConfig(String),
    #[error("serialized trie {tree} does not match its records")]
    InconsistentTrie { tree: usize },
    #[error(transparent)]
    Vector(#[from] VecError),
}

/// One sign-of-projection hash: bit 1 when `hyperplane · p ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HashFunction<T> {
    hyperplane: Vector<T>,
}

impl<T: Scalar> HashFunction<T> {
    pub fn new(hyperplane: Vector<T>) -> Result<Self, LshError> {
        if hyperplane.norm() == T::zero() {
            return Err(LshError::ZeroVector);
        }
        Ok(Self { hyperplane })
    }

    /// Standard normal coordinates, rounded to `f32` so the function
    /// survives single-precision serialization unchanged.
    pub fn sample<R: rand::Rng>(dim: usize, rng: &mut R) -> Self {
        loop {
            let values: Vec<T> = (0..dim)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(rng);
                    T::lit(x as f32 as f64)
                })
                .collect();
            if values.iter().any(|v| *v != T::zero()) {
                return Self { hyperplane: Vector::from_vec_unchecked(values) };
            }
        }
    }

    pub fn hyperplane(&self) -> &Vector<T> {
        &self.hyperplane
    }

    fn bit(&self, p: &[T]) -> bool {
        dot_slice(self.hyperplane.as_slice(), p) >= T::zero()
    }
}

pub fn hash_bit<T: Scalar>(h: &HashFunction<T>, p: &Vector<T>) -> Result<bool, LshError> {
    if h.hyperplane.dim() != p.dim() {
        return Err(LshError::Dimension { expected: h.hyperplane.dim(), got: p.dim() });
    }
    Ok(h.bit(p.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    /// Sorted record ids.
    Leaf(Vec<RecordId>),
    Internal(Box<[Option<Node>; 2]>),
}

/// Pre-order trie encoding used for serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrieToken {
    Empty,
    Internal,
    Leaf(Vec<RecordId>),
}

fn bit_at(label: u64, depth: usize) -> usize {
    ((label >> depth) & 1) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct LshTree<T> {
    hashes: Vec<HashFunction<T>>,
    root: Option<Node>,
}

impl<T: Scalar> LshTree<T> {
    fn label(&self, p: &[T]) -> u64 {
        self.hashes.iter().enumerate().fold(0u64, |acc, (i, h)| acc | ((h.bit(p) as u64) << i))
    }

    pub fn hash_functions(&self) -> &[HashFunction<T>] {
        &self.hashes
    }

    fn max_depth(&self) -> usize {
        self.hashes.len()
    }

    /// `(path bits, record ids)` for every leaf, in pre-order.
    pub fn leaves(&self) -> Vec<(Vec<bool>, Vec<RecordId>)> {
        fn walk(node: &Node, path: &mut Vec<bool>, out: &mut Vec<(Vec<bool>, Vec<RecordId>)>) {
            match node {
                Node::Leaf(ids) => out.push((path.clone(), ids.clone())),
                Node::Internal(children) => {
                    for (b, child) in children.iter().enumerate() {
                        if let Some(c) = child {
                            path.push(b == 1);
                            walk(c, path, out);
                            path.pop();
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            walk(root, &mut Vec::new(), &mut out);
        }
        out
    }

    pub fn preorder(&self) -> Vec<TrieToken> {
        fn walk(node: Option<&Node>, out: &mut Vec<TrieToken>) {
            match node {
                None => out.push(TrieToken::Empty),
                Some(Node::Leaf(ids)) => out.push(TrieToken::Leaf(ids.clone())),
                Some(Node::Internal(children)) => {
                    out.push(TrieToken::Internal);
                    walk(children[0].as_ref(), out);
                    walk(children[1].as_ref(), out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self.root.as_ref(), &mut out);
        out
    }

    fn from_preorder(tokens: &[TrieToken]) -> Option<Option<Node>> {
        fn read(tokens: &[TrieToken], pos: &mut usize) -> Option<Option<Node>> {
            let t = tokens.get(*pos)?;
            *pos += 1;
            Some(match t {
                TrieToken::Empty => None,
                TrieToken::Leaf(ids) => Some(Node::Leaf(ids.clone())),
                TrieToken::Internal => {
                    let a = read(tokens, pos)?;
                    let b = read(tokens, pos)?;
                    Some(Node::Internal(Box::new([a, b])))
                }
            })
        }
        let mut pos = 0;
        let root = read(tokens, &mut pos)?;
        (pos == tokens.len()).then_some(root)
    }

    fn insert(&mut self, id: RecordId, label: u64, label_of: &dyn Fn(RecordId) -> u64) {
        fn go(
            slot: &mut Option<Node>,
            id: RecordId,
            label: u64,
            depth: usize,
            max: usize,
            labels: &dyn Fn(RecordId) -> u64,
        ) {
            match slot.take() {
                None => *slot = Some(Node::Leaf(vec![id])),
                Some(Node::Leaf(mut ids)) if depth == max => {
                    let pos = ids.binary_search(&id).unwrap_or_else(|p| p);
                    ids.insert(pos, id);
                    *slot = Some(Node::Leaf(ids));
                }
                Some(Node::Leaf(ids)) => {
                    let mut children: [Option<Node>; 2] = [None, None];
                    for existing in ids {
                        let l = labels(existing);
                        go(&mut children[bit_at(l, depth)], existing, l, depth + 1, max, labels);
                    }
                    go(&mut children[bit_at(label, depth)], id, label, depth + 1, max, labels);
                    *slot = Some(Node::Internal(Box::new(children)));
                }
                Some(Node::Internal(mut children)) => {
                    go(&mut children[bit_at(label, depth)], id, label, depth + 1, max, labels);
                    *slot = Some(Node::Internal(children));
                }
            }
        }
        let max = self.max_depth();
        go(&mut self.root, id, label, 0, max, label_of);
    }

    fn remove(&mut self, id: RecordId, label: u64) -> bool {
        fn go(slot: &mut Option<Node>, id: RecordId, label: u64, depth: usize) -> bool {
            let found = match slot {
                None => false,
                Some(Node::Leaf(ids)) => match ids.binary_search(&id) {
                    Ok(pos) => {
                        ids.remove(pos);
                        true
                    }
                    Err(_) => false,
                },
                Some(Node::Internal(children)) => go(&mut children[bit_at(label, depth)], id, label, depth + 1),
            };
            if found {
                normalize(slot);
            }
            found
        }
        // Restores the canonical shape: no empty leaves, and no internal node
        // whose subtree holds a single record.
        fn normalize(slot: &mut Option<Node>) {
            match slot {
                Some(Node::Leaf(ids)) if ids.is_empty() => *slot = None,
                Some(Node::Internal(children)) => {
                    let collapsed = match &children[..] {
                        [None, None] => Some(None),
                        [Some(Node::Leaf(ids)), None] | [None, Some(Node::Leaf(ids))] if ids.len() == 1 => {
                            Some(Some(Node::Leaf(ids.clone())))
                        }
                        _ => None,
                    };
                    if let Some(replacement) = collapsed {
                        *slot = replacement;
                    }
                }
                _ => {}
            }
        }
        go(&mut self.root, id, label, 0)
    }

    /// Nodes along the query label from the root to the deepest match.
    fn descend(&self, label: u64) -> Vec<&Node> {
        let mut path = Vec::new();
        let mut node = self.root.as_ref();
        let mut depth = 0;
        while let Some(n) = node {
            path.push(n);
            node = match n {
                Node::Internal(children) => children[bit_at(label, depth)].as_ref(),
                Node::Leaf(_) => None,
            };
            depth += 1;
        }
        path
    }
}

fn collect(node: &Node, out: &mut HashSet<RecordId>) {
    match node {
        Node::Leaf(ids) => out.extend(ids.iter().copied()),
        Node::Internal(children) => children.iter().flatten().for_each(|c| collect(c, out)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_label_len: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { trees: 10, max_label_len: 32, seed: 7 }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), LshError> {
        if self.trees == 0 {
            return Err(LshError::InvalidConfig("trees must be at least 1".into()));
        }
        if self.max_label_len == 0 || self.max_label_len > MAX_LABEL_BITS {
            return Err(LshError::InvalidConfig(format!("max_label_len must be in 1..={MAX_LABEL_BITS}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Record<T> {
    vector: Vector<T>,
    labels: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LshForest<T> {
    config: ForestConfig,
    dim: usize,
    trees: Vec<LshTree<T>>,
    records: BTreeMap<RecordId, Record<T>>,
}

impl<T: Scalar> LshForest<T> {
    pub fn new(dim: usize, config: ForestConfig) -> Result<Self, LshError> {
        config.validate()?;
        if dim == 0 {
            return Err(LshError::InvalidConfig("dimension must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let trees = (0..config.trees)
            .map(|_| LshTree {
                hashes: (0..config.max_label_len).map(|_| HashFunction::sample(dim, &mut rng)).collect(),
                root: None,
            })
            .collect();
        Ok(Self { config, dim, trees, records: BTreeMap::new() })
    }

    /// Reassembles a forest from serialized parts, checking that every trie
    /// is exactly the one its records induce.
    pub fn from_parts(
        config: ForestConfig,
        dim: usize,
        hash_functions: Vec<Vec<HashFunction<T>>>,
        records: Vec<(RecordId, Vector<T>)>,
        tries: Vec<Vec<TrieToken>>,
    ) -> Result<Self, LshError> {
        config.validate()?;
        if hash_functions.len() != config.trees || tries.len() != config.trees {
            return Err(LshError::InvalidConfig("tree count does not match configuration".into()));
        }
        for hs in &hash_functions {
            if hs.len() != config.max_label_len {
                return Err(LshError::InvalidConfig("hash count does not match max_label_len".into()));
            }
            if let Some(h) = hs.iter().find(|h| h.hyperplane.dim() != dim) {
                return Err(LshError::Dimension { expected: dim, got: h.hyperplane.dim() });
            }
        }
        let trees = hash_functions.into_iter().map(|hashes| LshTree { hashes, root: None }).collect();
        let mut forest = Self { config, dim, trees, records: BTreeMap::new() };
        for (id, v) in records {
            forest.insert(id, v)?;
        }
        for (i, tokens) in tries.iter().enumerate() {
            let root = LshTree::<T>::from_preorder(tokens).ok_or(LshError::InconsistentTrie { tree: i })?;
            if root != forest.trees[i].root {
                return Err(LshError::InconsistentTrie { tree: i });
            }
        }
        Ok(forest)
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn trees(&self) -> &[LshTree<T>] {
        &self.trees
    }

    pub fn records(&self) -> impl Iterator<Item = (RecordId, &Vector<T>)> {
        self.records.iter().map(|(&id, r)| (id, &r.vector))
    }

    pub fn get(&self, id: RecordId) -> Option<&Vector<T>> {
        self.records.get(&id).map(|r| &r.vector)
    }

    /// Hash label of `p` in tree `tree`, bit `i` from level `i`.
    pub fn label(&self, tree: usize, p: &Vector<T>) -> u64 {
        self.trees[tree].label(p.as_slice())
    }

    fn check(&self, p: &Vector<T>) -> Result<(), LshError> {
        if p.dim() != self.dim {
            return Err(LshError::Dimension { expected: self.dim, got: p.dim() });
        }
        if p.norm() == T::zero() {
            return Err(LshError::ZeroVector);
        }
        Ok(())
    }

    pub fn insert(&mut self, id: RecordId, p: Vector<T>) -> Result<(), LshError> {
        if self.records.contains_key(&id) {
            return Err(LshError::DuplicateId(id));
        }
        self.check(&p)?;
        let labels: Vec<u64> = self.trees.iter().map(|t| t.label(p.as_slice())).collect();
        let records = &self.records;
        for (i, tree) in self.trees.iter_mut().enumerate() {
            tree.insert(id, labels[i], &|rid| records[&rid].labels[i]);
        }
        self.records.insert(id, Record { vector: p, labels });
        Ok(())
    }

    pub fn remove(&mut self, id: RecordId) -> Result<Vector<T>, LshError> {
        let record = self.records.remove(&id).ok_or(LshError::UnknownId(id))?;
        for (tree, &label) in self.trees.iter_mut().zip(&record.labels) {
            let found = tree.remove(id, label);
            debug_assert!(found, "record {id} missing from a tree");
        }
        Ok(record.vector)
    }

    /// Up to `m` record ids by descending cosine similarity to `q`, ties to
    /// the lower id.
    pub fn query(&self, q: &Vector<T>, m: usize) -> Result<Vec<RecordId>, LshError> {
        Ok(self.query_scored(q, m)?.into_iter().map(|(id, _)| id).collect())
    }

    pub fn query_scored(&self, q: &Vector<T>, m: usize) -> Result<Vec<(RecordId, T)>, LshError> {
        if m == 0 {
            return Err(LshError::InvalidConfig("m must be at least 1".into()));
        }
        if self.records.is_empty() {
            return Err(LshError::EmptyForest);
        }
        self.check(q)?;
        let candidates = self.candidates(q, m);
        let mut scored: Vec<(RecordId, T)> = candidates
            .into_iter()
            .map(|id| {
                let v = &self.records[&id].vector;
                cosine_slice(v.as_slice(), q.as_slice()).map(|s| (id, s))
            })
            .collect::<Result<_, _>>()?;
        sort_scored(&mut scored);
        scored.truncate(m);
        Ok(scored)
    }

    /// Descent then synchronous bottom-up accumulation; returns the
    /// unranked candidate set.
    pub fn candidates(&self, q: &Vector<T>, m: usize) -> HashSet<RecordId> {
        let labels: Vec<u64> = self.trees.iter().map(|t| t.label(q.as_slice())).collect();
        let paths: Vec<Vec<&Node>> = self.trees.iter().zip(&labels).map(|(t, &l)| t.descend(l)).collect();
        let deepest = paths.iter().map(|p| p.len().saturating_sub(1)).max().unwrap_or(0);

        let mut found = HashSet::new();
        for level in (0..=deepest).rev() {
            for (path, &label) in paths.iter().zip(&labels) {
                let Some(last) = path.len().checked_sub(1) else { continue };
                if level == last {
                    collect(path[level], &mut found);
                } else if level < last {
                    // The on-path child was gathered at the level below.
                    if let Node::Internal(children) = path[level] {
                        if let Some(other) = &children[1 - bit_at(label, level)] {
                            collect(other, &mut found);
                        }
                    }
                }
            }
            if found.len() >= m {
                break;
            }
        }
        found
    }

    /// Exhaustive cosine ranking, the reference for [`LshForest::query`].
    pub fn brute_force(&self, q: &Vector<T>, m: usize) -> Result<Vec<(RecordId, T)>, LshError> {
        self.check(q)?;
        let mut scored: Vec<(RecordId, T)> = self
            .records
            .iter()
            .map(|(&id, r)| cosine_slice(r.vector.as_slice(), q.as_slice()).map(|s| (id, s)))
            .collect::<Result<_, _>>()?;
        sort_scored(&mut scored);
        scored.truncate(m);
        Ok(scored)
    }
}

pub(crate) fn sort_scored<T: Scalar>(scored: &mut [(RecordId, T)]) {
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
}
