//! Pipeline steps. Each reads its inputs from the work directory and writes
//! its outputs back there.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hredlsh::corpus::{
    anonymize, compute_stats, encode_dialogue, filter_dialogues, parse_corpus, parse_line, AnonymizeRules, Dialogue,
    LineFormat, Vocabulary,
};
use hredlsh::eval::{
    hred_embedder, make_samples, recall_at_k, render_table, GenerativeModel, RecallReport, RetrievalModel,
};
use hredlsh::hred::{context_state, train, HredParams};
use hredlsh::lsh_forest::LshForest;
use hredlsh::ranking::{collect_records, retrieve_and_rank, CandidateStore, Method};
use log::info;

use crate::binio;
use crate::config::PipelineConfig;

pub const CORPUS_FILE: &str = "corpus.txt";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const STATS_FILE: &str = "stats.txt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSS_FILE: &str = "loss.txt";
pub const STORE_FILE: &str = "store.bin";
pub const FOREST_FILE: &str = "forest.bin";

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn rules(cfg: &PipelineConfig) -> Result<AnonymizeRules> {
    if !cfg.anonymize {
        return Ok(AnonymizeRules::empty());
    }
    match &cfg.rules {
        Some(path) => {
            let text = String::from_utf8(read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))?;
            Ok(AnonymizeRules::from_text(&text)?)
        }
        None => Ok(AnonymizeRules::default_rules()),
    }
}

fn anonymized(ds: Vec<Dialogue>, rules: &AnonymizeRules) -> Result<Vec<Dialogue>> {
    if rules.is_empty() {
        return Ok(ds);
    }
    Ok(ds.iter().map(|d| d.map_tokens(|t| anonymize(t, rules))).collect::<Result<_, _>>()?)
}

/// Parses, anonymizes and length-filters a raw corpus file.
pub fn preprocess(path: &Path, cfg: &PipelineConfig) -> Result<Vec<Dialogue>> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let parsed = parse_corpus(BufReader::new(file), &cfg.line_format())?;
    if parsed.skipped > 0 {
        info!("{}: skipped {} records", path.display(), parsed.skipped);
    }
    let ds = filter_dialogues(anonymized(parsed.dialogues, &rules(cfg)?)?, cfg.min_turns);
    if ds.is_empty() {
        bail!("empty corpus after filtering");
    }
    Ok(ds)
}

/// One dialogue per line, every utterance speaker-tagged.
fn render_corpus(ds: &[Dialogue]) -> String {
    let mut out = String::new();
    for d in ds {
        let line: Vec<String> =
            d.utterances().iter().map(|u| format!("{}: {} __eou__", u.speaker, u.tokens().join(" "))).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub struct Workspace {
    pub dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn vocab(&self) -> Result<Vocabulary> {
        let path = self.path(VOCAB_FILE);
        let file = File::open(&path).with_context(|| format!("cannot read {}", path.display()))?;
        Ok(Vocabulary::read_tsv(BufReader::new(file))?)
    }

    /// The ingested corpus, encoded against `vocab`.
    pub fn corpus(&self, vocab: &Vocabulary) -> Result<Vec<Dialogue>> {
        let text = String::from_utf8(read(&self.path(CORPUS_FILE))?).context("corpus is not UTF-8")?;
        let format = LineFormat::default();
        Ok(text.lines().filter_map(|l| parse_line(l, &format)).map(|d| encode_dialogue(&d, vocab)).collect())
    }

    pub fn checkpoint(&self) -> Result<HredParams<f64>> {
        let path = self.path(CHECKPOINT_FILE);
        let (p, _) = binio::read_checkpoint(&read(&path)?).with_context(|| format!("{}", path.display()))?;
        Ok(p)
    }

    /// Checkpoint whose vocabulary matches the ingested one.
    pub fn model(&self) -> Result<(Vocabulary, HredParams<f64>)> {
        let vocab = self.vocab()?;
        let p = self.checkpoint()?;
        if p.dims().vocab != vocab.len() {
            bail!("checkpoint vocabulary size {} does not match {} ({})", p.dims().vocab, VOCAB_FILE, vocab.len());
        }
        Ok((vocab, p))
    }

    pub fn index(&self) -> Result<(CandidateStore<f64>, LshForest<f64>)> {
        let sp = self.path(STORE_FILE);
        let (store, _) = binio::read_store(&read(&sp)?).with_context(|| format!("{}", sp.display()))?;
        let fp = self.path(FOREST_FILE);
        let (forest, _) = binio::read_forest(&read(&fp)?).with_context(|| format!("{}", fp.display()))?;
        if forest.len() != store.len() {
            bail!("forest holds {} records but the store holds {}", forest.len(), store.len());
        }
        Ok((store, forest))
    }
}

pub fn ingest(ws: &Workspace, cfg: &PipelineConfig, corpus: &Path) -> Result<()> {
    let ds = preprocess(corpus, cfg)?;
    let vocab = Vocabulary::build(&ds, cfg.min_count);
    info!("{} dialogues, vocabulary of {} entries", ds.len(), vocab.len());
    fs::create_dir_all(&ws.dir).with_context(|| format!("cannot create {}", ws.dir.display()))?;
    write(&ws.path(CORPUS_FILE), render_corpus(&ds).as_bytes())?;
    let mut v = Vec::new();
    vocab.write_tsv(&mut v)?;
    write(&ws.path(VOCAB_FILE), &v)?;
    let encoded: Vec<Dialogue> = ds.iter().map(|d| encode_dialogue(d, &vocab)).collect();
    let mut s = Vec::new();
    compute_stats(&encoded, &vocab).write_report(&mut s)?;
    write(&ws.path(STATS_FILE), &s)?;
    Ok(())
}

pub fn train_model(ws: &Workspace, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    let vocab = ws.vocab()?;
    let ds = ws.corpus(&vocab)?;
    let ids: Vec<Vec<Vec<u32>>> = ds
        .iter()
        .map(|d| d.id_sequences().map(|s| s.iter().map(|u| u.to_vec()).collect()))
        .collect::<Result<_, _>>()?;
    let dims = cfg.dims(vocab.len());
    dims.validate()?;
    let mut init = HredParams::<f64>::random(dims, cfg.train_seed);
    if let Some(path) = &cfg.embeddings {
        let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
        let loaded = init.load_embeddings(vocab.words(), BufReader::new(file))?;
        info!("initialized {loaded} embedding rows from {}", path.display());
    }
    init.round_f32();
    info!("training {} parameters on {} dialogues for {} epochs", init.parameter_count(), ids.len(), cfg.epochs);
    let (mut p, losses) = train(init, &ids, &cfg.train_config())?;
    p.round_f32();
    for (e, l) in losses.iter().enumerate() {
        info!("epoch {}: mean loss {l}", e + 1);
    }
    write(&ws.path(CHECKPOINT_FILE), &binio::write_checkpoint(&p, &cfg.to_text()))?;
    let trace: String = losses.iter().enumerate().map(|(e, l)| format!("{}\t{l}\n", e + 1)).collect();
    write(&ws.path(LOSS_FILE), trace.as_bytes())?;
    Ok(losses)
}

pub fn index(ws: &Workspace, cfg: &PipelineConfig) -> Result<usize> {
    let (vocab, p) = ws.model()?;
    let ds = ws.corpus(&vocab)?;
    let mut store = CandidateStore::new(collect_records(&p, &ds)?)?;
    store.round_f32();
    let forest = store.build_forest(cfg.forest_config())?;
    info!("indexed {} candidate records", store.len());
    let echo = cfg.to_text();
    write(&ws.path(STORE_FILE), &binio::write_store(&store, &echo))?;
    write(&ws.path(FOREST_FILE), &binio::write_forest(&forest, &echo))?;
    Ok(store.len())
}

/// Preprocesses a context given in the corpus line format.
fn context_dialogue(text: &str, cfg: &PipelineConfig, vocab: &Vocabulary) -> Result<Dialogue> {
    let d = parse_line(text, &cfg.line_format()).ok_or_else(|| anyhow!("empty context"))?;
    let d = anonymized(vec![d], &rules(cfg)?)?.remove(0);
    Ok(encode_dialogue(&d, vocab))
}

pub fn query(ws: &Workspace, cfg: &PipelineConfig, context: &str, top: usize, out: &mut dyn Write) -> Result<()> {
    let (vocab, p) = ws.model()?;
    let (store, forest) = ws.index()?;
    let d = context_dialogue(context, cfg, &vocab)?;
    let ids: Vec<Vec<u32>> = d.id_sequences()?.iter().map(|s| s.to_vec()).collect();
    let c_q = context_state(&p, &ids)?;
    let ranked = retrieve_and_rank(&c_q, &store, &forest, &cfg.retrieval_config(cfg.method))?;
    for (i, r) in ranked.iter().take(top).enumerate() {
        writeln!(out, "{}\t{:.6}\t{}\t{}", i + 1, r.candidate.score, r.candidate.method, r.text)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Generative,
    Retrieval(Method),
}

impl FromStr for EvalMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("generative") {
            return Ok(Self::Generative);
        }
        s.parse::<Method>().map(Self::Retrieval).map_err(|_| anyhow!("unknown eval mode `{s}`"))
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Generative => f.write_str("generative"),
            Self::Retrieval(m) => write!(f, "{}", m.to_string().to_lowercase()),
        }
    }
}

/// Scores each mode on the held-out corpus, writing `eval_<mode>.txt` and
/// `eval_<mode>.kv`.
pub fn eval(ws: &Workspace, cfg: &PipelineConfig, heldout: &Path, modes: &[EvalMode]) -> Result<Vec<RecallReport>> {
    let (vocab, p) = ws.model()?;
    let ds: Vec<Dialogue> = preprocess(heldout, cfg)?.iter().map(|d| encode_dialogue(d, &vocab)).collect();
    let samples = make_samples(&ds, &cfg.sample_config())?;
    info!("{} evaluation samples with {} options each", samples.len(), cfg.eval_options);
    let index = if modes.iter().any(|m| matches!(m, EvalMode::Retrieval(_))) { Some(ws.index()?) } else { None };

    let mut reports = Vec::new();
    for &mode in modes {
        let report = match mode {
            EvalMode::Generative => {
                let mut model = GenerativeModel { params: &p, beams: cfg.beams, max_len: cfg.max_len };
                recall_at_k(&samples, hred_embedder(&p), &mut model, &cfg.eval_ks)?
            }
            EvalMode::Retrieval(method) => {
                let (store, forest) = index.as_ref().expect("index loaded for retrieval modes");
                let mut model = RetrievalModel { params: &p, store, forest, config: cfg.retrieval_config(method) };
                recall_at_k(&samples, hred_embedder(&p), &mut model, &cfg.eval_ks)?
            }
        };
        write(&ws.path(&format!("eval_{mode}.txt")), render_table(std::slice::from_ref(&report)).as_bytes())?;
        let mut kv = BufWriter::new(Vec::new());
        report.write_kv(&mut kv)?;
        write(&ws.path(&format!("eval_{mode}.kv")), &kv.into_inner()?)?;
        reports.push(report);
    }
    Ok(reports)
}

/// Statistics of a raw corpus, or of the ingested one when `corpus` is unset.
pub fn stats(ws: &Workspace, cfg: &PipelineConfig, corpus: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let (ds, vocab) = match corpus {
        Some(path) => {
            let ds = preprocess(path, cfg)?;
            let vocab = Vocabulary::build(&ds, cfg.min_count);
            (ds, vocab)
        }
        None => {
            let vocab = ws.vocab()?;
            (ws.corpus(&vocab)?, vocab)
        }
    };
    compute_stats(&ds, &vocab).write_report(out)?;
    Ok(())
}
