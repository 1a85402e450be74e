//! Brute-force similarity oracles over plain `f64` slices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

/// Ids by descending score, ties to the lower id. Plain insertion sort.
pub fn rank(scores: &[(u32, f64)]) -> Vec<u32> {
    let mut out: Vec<(u32, f64)> = Vec::new();
    for &(id, s) in scores {
        let mut at = out.len();
        for (i, &(oid, os)) in out.iter().enumerate() {
            if s > os || (s == os && id < oid) {
                at = i;
                break;
            }
        }
        out.insert(at, (id, s));
    }
    out.into_iter().map(|(id, _)| id).collect()
}

pub fn cosine_ranking(q: &[f64], points: &[(u32, Vec<f64>)]) -> Vec<u32> {
    let scores: Vec<(u32, f64)> = points.iter().map(|(id, p)| (*id, cosine(q, p))).collect();
    rank(&scores)
}

pub fn nearest(q: &[f64], points: &[Vec<f64>]) -> u32 {
    cosine_ranking(q, &points.iter().enumerate().map(|(i, p)| (i as u32, p.clone())).collect::<Vec<_>>())[0]
}

pub fn gaussian_vectors(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// `(1/k) Σ_i cos(resp_x, resp_i)` over the whole set.
pub fn ar_scores(responses: &[(u32, Vec<f64>)]) -> Vec<(u32, f64)> {
    let k = responses.len() as f64;
    responses.iter().map(|(id, x)| (*id, responses.iter().map(|(_, y)| cosine(x, y)).sum::<f64>() / k)).collect()
}

/// Two-stage score: context cosine picks the pool, then mean response cosine over it.
pub fn car_scores(q: &[f64], contexts: &[(u32, Vec<f64>)], responses: &[(u32, Vec<f64>)], n: usize) -> Vec<(u32, f64)> {
    let order = cosine_ranking(q, contexts);
    let pool: Vec<&Vec<f64>> =
        order[..n].iter().map(|id| &responses.iter().find(|(rid, _)| rid == id).unwrap().1).collect();
    responses.iter().map(|(id, x)| (*id, pool.iter().map(|y| cosine(x, y)).sum::<f64>() / n as f64)).collect()
}

/// Whether `ranking` sorts `scores` descending, treating scores within `tol`
/// as tied and requiring ascending ids inside a tie.
pub fn ranking_consistent(ranking: &[u32], scores: &[(u32, f64)], tol: f64) -> bool {
    let score = |id: u32| scores.iter().find(|(i, _)| *i == id).map(|s| s.1);
    if ranking.len() != scores.len() {
        return false;
    }
    ranking.windows(2).all(|w| match (score(w[0]), score(w[1])) {
        (Some(a), Some(b)) if (a - b).abs() <= tol => w[0] < w[1],
        (Some(a), Some(b)) => a > b,
        _ => false,
    })
}
