//! Seeded benchmarks whose outcomes are checked against the brute-force oracles.

use hredlsh::lsh_forest::{ForestConfig, LshForest};
use hredlsh::ranking::{score_ar, score_car, score_cr, CandidateRecord};
use hredlsh::vecspace::Vector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::brute;

pub const ANN_POINTS: usize = 1000;
pub const ANN_QUERIES: usize = 100;
pub const ANN_DIM: usize = 16;

fn vector(x: &[f64]) -> Vector<f64> {
    Vector::from_f64(x).unwrap()
}

/// Queries (of 100) whose exact nearest neighbour is in the forest's top 10.
pub fn ann_hits(trees: usize, max_label_len: usize) -> usize {
    let points = brute::gaussian_vectors(ANN_POINTS, ANN_DIM, 2024);
    let queries = brute::gaussian_vectors(ANN_QUERIES, ANN_DIM, 4048);
    let mut forest = LshForest::new(ANN_DIM, ForestConfig { trees, max_label_len, seed: 7 }).unwrap();
    for (i, p) in points.iter().enumerate() {
        forest.insert(i as u32, vector(p)).unwrap();
    }
    queries
        .iter()
        .filter(|q| {
            let nn = brute::nearest(q, &points);
            forest.query(&vector(q), 10).unwrap().contains(&nn)
        })
        .count()
}

/// Store points with deliberate exact ties: duplicates and power-of-two rescalings.
fn tie_heavy_points(size: usize, seed: u64) -> Vec<Vec<f64>> {
    let base = brute::gaussian_vectors(size, 4, seed);
    base.iter()
        .enumerate()
        .map(|(i, p)| match i % 5 {
            3 => base[i - 1].clone(),
            4 => base[i - 2].iter().map(|x| x * 2.0).collect(),
            _ => p.clone(),
        })
        .collect()
}

/// First store size (1..=64) where a full-budget query disagrees with the brute-force ranking.
pub fn exact_sort_mismatch() -> Option<String> {
    for size in 1..=64usize {
        let points = tie_heavy_points(size, size as u64);
        let mut forest = LshForest::new(4, ForestConfig { trees: 3, max_label_len: 8, seed: size as u64 }).unwrap();
        for (i, p) in points.iter().enumerate() {
            forest.insert(i as u32, vector(p)).unwrap();
        }
        let indexed: Vec<(u32, Vec<f64>)> = points.iter().cloned().enumerate().map(|(i, p)| (i as u32, p)).collect();
        let mut queries = brute::gaussian_vectors(4, 4, 1000 + size as u64);
        queries.push(points[size / 2].clone());
        for q in &queries {
            let expected = brute::cosine_ranking(q, &indexed);
            for m in [size, size + 3] {
                let got = forest.query(&vector(q), m).unwrap();
                if got != expected {
                    return Some(format!("store size {size}, m {m}: {got:?} vs {expected:?}"));
                }
            }
        }
    }
    None
}

fn records(k: usize, seed: u64) -> (Vec<CandidateRecord<f64>>, Vec<f64>) {
    let ctx = brute::gaussian_vectors(k, 5, seed);
    let resp = brute::gaussian_vectors(k, 5, seed ^ 0x5eed);
    let q = brute::gaussian_vectors(1, 5, seed ^ 0xface).remove(0);
    let recs = (0..k)
        .map(|i| CandidateRecord {
            id: (i * 7 % 11) as u32,
            context_embedding: vector(&ctx[i]),
            response_embedding: vector(&resp[i]),
            response_text: vec![format!("r{i}")],
        })
        .collect();
    (recs, q)
}

fn ids<T>(r: &[hredlsh::ranking::RankedCandidate<T>]) -> Vec<u32> {
    r.iter().map(|c| c.id).collect()
}

/// Checks the ranking identities for every k ≤ 8 over `trials` seeded candidate sets.
pub fn scoring_identity_failure(trials: u64) -> Option<String> {
    for k in 1..=8usize {
        for t in 0..trials {
            let (recs, q) = records(k, k as u64 * 1000 + t);
            let cands: Vec<&CandidateRecord<f64>> = recs.iter().collect();
            let qv = vector(&q);
            let ar = score_ar(&cands, true).unwrap();
            let ar_excl = score_ar(&cands, false).unwrap();
            if ids(&ar) != ids(&ar_excl) {
                return Some(format!("k {k}, trial {t}: AR self-term changes ranking"));
            }
            let car = score_car(&qv, &cands, k).unwrap();
            if ids(&car) != ids(&ar) {
                return Some(format!("k {k}, trial {t}: CAR n=k differs from AR"));
            }
            let contexts: Vec<(u32, Vec<f64>)> =
                recs.iter().map(|r| (r.id, r.context_embedding.as_slice().to_vec())).collect();
            let responses: Vec<(u32, Vec<f64>)> =
                recs.iter().map(|r| (r.id, r.response_embedding.as_slice().to_vec())).collect();
            if ids(&score_cr(&qv, &cands).unwrap()) != brute::cosine_ranking(&q, &contexts) {
                return Some(format!("k {k}, trial {t}: CR differs from brute-force sort"));
            }
            if !brute::ranking_consistent(&ids(&ar), &brute::ar_scores(&responses), 1e-12) {
                return Some(format!("k {k}, trial {t}: AR differs from reference scores"));
            }
        }
    }
    None
}

/// Shuffled input orders must give identical rankings for every scorer.
pub fn permutation_failure(trials: u64) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 1..=8usize {
        for t in 0..trials {
            let (recs, q) = records(k, 77 + k as u64 * 100 + t);
            let qv = vector(&q);
            let base: Vec<&CandidateRecord<f64>> = recs.iter().collect();
            let reference = [
                score_cr(&qv, &base).unwrap(),
                score_ar(&base, true).unwrap(),
                score_car(&qv, &base, k.min(3)).unwrap(),
            ];
            for _ in 0..10 {
                let mut shuffled = base.clone();
                shuffled.shuffle(&mut rng);
                let got = [
                    score_cr(&qv, &shuffled).unwrap(),
                    score_ar(&shuffled, true).unwrap(),
                    score_car(&qv, &shuffled, k.min(3)).unwrap(),
                ];
                for (g, r) in got.iter().zip(&reference) {
                    if ids(g) != ids(r) {
                        return Some(format!("k {k}, trial {t}: ranking depends on input order"));
                    }
                }
            }
        }
    }
    None
}
