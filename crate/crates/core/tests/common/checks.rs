//! Oracle comparisons returning the first disagreement found.

use hredlsh::corpus::{encode_dialogue, Dialogue, Vocabulary};
use hredlsh::eval::{make_samples, recall_at_k, AnswerModel, OracleModel, RandomModel, RecallReport, SampleConfig};
use hredlsh::hred::{
    decoder_init, dialogue_loss, encode_context, encode_utterance, gru_step, predict_word_logits, softmax, GruParams,
    HredDims, HredParams,
};
use hredlsh::vecspace::Vector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{gradcheck, scalar_ref};

pub const TOL: f64 = 1e-12;

fn mismatch(what: &str, a: &[f64], b: &[f64], tol: f64) -> Option<String> {
    if a.len() != b.len() {
        return Some(format!("{what}: length {} vs {}", a.len(), b.len()));
    }
    let (i, d) = a.iter().zip(b).map(|(x, y)| (x - y).abs()).enumerate().fold((0, 0.0), |m, (i, d)| {
        if d > m.1 || d.is_nan() {
            (i, d)
        } else {
            m
        }
    });
    (d > tol || d.is_nan()).then(|| format!("{what}: index {i} differs by {d:e}"))
}

pub fn fixture_model() -> HredParams<f64> {
    let dims = HredDims { vocab: 7, embed: 3, utt_hidden: 4, ctx_hidden: 3, dec_hidden: 2 };
    HredParams::uniform(dims, 0.8, 42)
}

pub const DIALOGUE: [&[u32]; 3] = [&[3, 4, 5, 2], &[6, 2], &[1, 3, 3, 2]];

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn gru_failure() -> Option<String> {
    let p = GruParams::<f64>::random(2, 3, 1.0, 42);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = vec![(vec![0.25, -0.5, 0.9], vec![0.7, -1.3])];
    cases.extend((0..50).map(|_| (uniform(&mut rng, 3, 1.0), uniform(&mut rng, 2, 3.0))));
    for (h, x) in cases {
        let got = gru_step(&p, &Vector::from_f64(&h).unwrap(), &Vector::from_f64(&x).unwrap()).unwrap();
        if let Some(m) = mismatch("gru_step", got.as_slice(), &scalar_ref::gru(&p, &h, &x), TOL) {
            return Some(m);
        }
    }
    None
}

pub fn encoder_failure() -> Option<String> {
    let p = fixture_model();
    let mut hs = Vec::new();
    let mut hs_ref = Vec::new();
    for u in DIALOGUE {
        let h = encode_utterance(&p, u).unwrap();
        let h_ref = scalar_ref::encode_utterance(&p, u);
        if let Some(m) = mismatch("encode_utterance", h.as_slice(), &h_ref, TOL) {
            return Some(m);
        }
        hs.push(h);
        hs_ref.push(h_ref);
    }
    let cs = encode_context(&p, &hs).unwrap();
    let cs_ref = scalar_ref::encode_context(&p, &hs_ref);
    if cs.len() != cs_ref.len() {
        return Some(format!("encode_context: {} states vs {}", cs.len(), cs_ref.len()));
    }
    cs.iter().zip(&cs_ref).find_map(|(c, r)| mismatch("encode_context", c.as_slice(), r, TOL))
}

pub fn decoder_failure() -> Option<String> {
    let p = fixture_model();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let c = uniform(&mut rng, 3, 1.0);
        let d = decoder_init(&p, &Vector::from_f64(&c).unwrap()).unwrap();
        let d_ref = scalar_ref::decoder_init(&p, &c);
        if let Some(m) = mismatch("decoder_init", d.as_slice(), &d_ref, TOL) {
            return Some(m);
        }
        let w = uniform(&mut rng, 3, 1.0);
        let logits = predict_word_logits(&p, &d, &Vector::from_f64(&w).unwrap()).unwrap();
        let logits_ref = scalar_ref::logits(&p, &d_ref, &w);
        if let Some(m) = mismatch("predict_word_logits", &logits, &logits_ref, TOL) {
            return Some(m);
        }
        let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        if argmax(&logits) != argmax(&logits_ref) {
            return Some("predict_word_logits: argmax differs".into());
        }
    }
    None
}

pub fn loss_failure() -> Option<String> {
    let p = fixture_model();
    let dialogue: Vec<Vec<u32>> = DIALOGUE.iter().map(|u| u.to_vec()).collect();
    let (nll, words) = dialogue_loss(&p, &dialogue).unwrap();
    let reference = scalar_ref::mean_nll(&p, &dialogue);
    if words != 10 {
        return Some(format!("loss counted {words} words, expected 10"));
    }
    ((nll / words as f64 - reference).abs() >= TOL).then(|| format!("mean loss {} vs {reference}", nll / words as f64))
}

/// Every scalar-reference comparison in turn.
pub fn scalar_oracle_failure() -> Option<String> {
    gru_failure().or_else(encoder_failure).or_else(decoder_failure)
}

/// Largest relative gradient error over three seeded models and every tensor.
pub fn worst_gradient_error() -> (String, f64) {
    let dims = HredDims { vocab: 8, embed: 4, utt_hidden: 3, ctx_hidden: 4, dec_hidden: 3 };
    let dialogue = vec![vec![3, 4, 2], vec![5, 6, 7, 2], vec![1, 2]];
    let mut worst = (String::new(), 0.0);
    for seed in [5, 6, 7] {
        let p = HredParams::uniform(dims, 0.5, seed);
        for (name, err) in gradcheck::relative_errors(&p, &dialogue, 1e-5) {
            if err > worst.1 || err.is_nan() {
                worst = (format!("seed {seed}, {name}"), err);
            }
        }
    }
    worst
}

/// Worst `|Σ softmax − 1|` over 1000 seeded logit vectors up to ±50, or the
/// first departure from the reference.
pub fn softmax_check() -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let len = rng.random_range(1..64);
        let scale = if i % 2 == 0 { 50.0 } else { 5.0 };
        let mut logits: Vec<f64> = (0..len).map(|_| rng.random_range(-scale..=scale)).collect();
        if i % 10 == 0 {
            logits[0] = 50.0;
            *logits.last_mut().unwrap() = -50.0;
        }
        let probs = softmax(&logits);
        if !probs.iter().all(|p| p.is_finite() && *p >= 0.0) {
            return Err(format!("vector {i}: probability outside [0, inf)"));
        }
        if let Some(m) = mismatch("softmax", &probs, &scalar_ref::softmax(&logits), TOL) {
            return Err(format!("vector {i}: {m}"));
        }
        worst = worst.max((probs.iter().sum::<f64>() - 1.0).abs());
    }
    Ok(worst)
}

/// Held-out dialogues of random three-word utterances, speakers alternating.
fn random_heldout(dialogues: usize, utterances: usize, seed: u64) -> Vec<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Dialogue> = (0..dialogues)
        .map(|_| {
            let texts: Vec<String> = (0..utterances)
                .map(|_| (0..3).map(|_| format!("w{}", rng.random_range(0..40))).collect::<Vec<_>>().join(" "))
                .collect();
            let pairs = texts.iter().enumerate().map(|(i, t)| (if i % 2 == 0 { "A" } else { "B" }, t.as_str()));
            Dialogue::from_pairs(pairs).unwrap()
        })
        .collect();
    let vocab = Vocabulary::build(&raw, 1);
    raw.iter().map(|d| encode_dialogue(d, &vocab)).collect()
}

/// Reports for the random and oracle models on at least 2,000 samples with
/// 10 options. Option embeddings are independent Gaussians, so every option
/// is equally likely to land closest to a random answer.
pub fn protocol_reports() -> (RecallReport, RecallReport) {
    let heldout = random_heldout(400, 6, 31);
    let samples = make_samples(&heldout, &SampleConfig { options: 10, seed: 11, ..SampleConfig::default() }).unwrap();
    assert!(samples.len() >= 2000, "{} samples", samples.len());
    let ks = [1, 2, 5, 10];
    let run = |model: &mut dyn AnswerModel<f64>, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embed = move |_: &[u32]| {
            let v: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
            Ok(Vector::new(v).unwrap())
        };
        recall_at_k(&samples, embed, model, &ks).unwrap()
    };
    (run(&mut RandomModel::new(5), 77), run(&mut OracleModel, 78))
}

pub fn monotone(report: &RecallReport) -> bool {
    let r: Vec<f64> = report.ks.iter().map(|&k| report.recall(k).unwrap()).collect();
    r.windows(2).all(|w| w[0] <= w[1]) && r.iter().all(|&x| x <= 1.0)
}
