//! Flat `key = value` pipeline configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use hredlsh::corpus::LineFormat;
use hredlsh::corpus::Speaker;
use hredlsh::eval::SampleConfig;
use hredlsh::hred::{HredDims, TrainConfig};
use hredlsh::lsh_forest::{ForestConfig, MAX_LABEL_BITS};
use hredlsh::ranking::{Method, RetrievalConfig};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value {value:?} for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("invalid config: {field} {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub embed_dim: usize,
    pub utterance_hidden: usize,
    pub context_hidden: usize,
    pub decoder_hidden: usize,

    pub min_count: u64,
    pub min_turns: usize,
    pub lowercase: bool,
    pub split_punctuation: bool,
    pub anonymize: bool,
    /// Anonymization rule file; the built-in rules when unset.
    pub rules: Option<PathBuf>,

    /// Word-embedding initialization file.
    pub embeddings: Option<PathBuf>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub clip_norm: f64,
    pub train_seed: u64,

    pub trees: usize,
    pub max_label_len: usize,
    pub forest_seed: u64,

    pub method: Method,
    pub candidates: usize,
    pub pool: usize,
    pub ar_include_self: bool,

    pub beams: usize,
    pub max_len: usize,

    pub eval_options: usize,
    pub eval_ks: Vec<usize>,
    pub eval_seed: u64,
    pub eval_speaker: Option<String>,
    pub exclude_same_dialogue: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            utterance_hidden: 32,
            context_hidden: 32,
            decoder_hidden: 32,
            min_count: 10,
            min_turns: 5,
            lowercase: false,
            split_punctuation: false,
            anonymize: true,
            rules: None,
            embeddings: None,
            learning_rate: 0.1,
            epochs: 10,
            clip_norm: 1.0,
            train_seed: 42,
            trees: 10,
            max_label_len: 32,
            forest_seed: 7,
            method: Method::Ar,
            candidates: 15,
            pool: 5,
            ar_include_self: true,
            beams: 5,
            max_len: 20,
            eval_options: 10,
            eval_ks: vec![1, 2, 5],
            eval_seed: 11,
            eval_speaker: None,
            exclude_same_dialogue: true,
        }
    }
}

pub const KEYS: &[&str] = &[
    "embed_dim",
    "utterance_hidden",
    "context_hidden",
    "decoder_hidden",
    "min_count",
    "min_turns",
    "lowercase",
    "split_punctuation",
    "anonymize",
    "rules",
    "embeddings",
    "learning_rate",
    "epochs",
    "clip_norm",
    "train_seed",
    "trees",
    "max_label_len",
    "forest_seed",
    "method",
    "candidates",
    "pool",
    "ar_include_self",
    "beams",
    "max_len",
    "eval_options",
    "eval_ks",
    "eval_seed",
    "eval_speaker",
    "exclude_same_dialogue",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: e.to_string(),
    })
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_owned())
}

impl PipelineConfig {
    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "utterance_hidden" => self.utterance_hidden = parse(key, value)?,
            "context_hidden" => self.context_hidden = parse(key, value)?,
            "decoder_hidden" => self.decoder_hidden = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "min_turns" => self.min_turns = parse(key, value)?,
            "lowercase" => self.lowercase = parse(key, value)?,
            "split_punctuation" => self.split_punctuation = parse(key, value)?,
            "anonymize" => self.anonymize = parse(key, value)?,
            "rules" => self.rules = optional(value).map(PathBuf::from),
            "embeddings" => self.embeddings = optional(value).map(PathBuf::from),
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "clip_norm" => self.clip_norm = parse(key, value)?,
            "train_seed" => self.train_seed = parse(key, value)?,
            "trees" => self.trees = parse(key, value)?,
            "max_label_len" => self.max_label_len = parse(key, value)?,
            "forest_seed" => self.forest_seed = parse(key, value)?,
            "method" => self.method = parse(key, value)?,
            "candidates" => self.candidates = parse(key, value)?,
            "pool" => self.pool = parse(key, value)?,
            "ar_include_self" => self.ar_include_self = parse(key, value)?,
            "beams" => self.beams = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "eval_options" => self.eval_options = parse(key, value)?,
            "eval_ks" => {
                self.eval_ks =
                    value.split(',').map(|k| parse(key, k.trim())).collect::<Result<Vec<usize>, ConfigError>>()?
            }
            "eval_seed" => self.eval_seed = parse(key, value)?,
            "eval_speaker" => self.eval_speaker = optional(value),
            "exclude_same_dialogue" => self.exclude_same_dialogue = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_owned())),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        match key {
            "embed_dim" => self.embed_dim.to_string(),
            "utterance_hidden" => self.utterance_hidden.to_string(),
            "context_hidden" => self.context_hidden.to_string(),
            "decoder_hidden" => self.decoder_hidden.to_string(),
            "min_count" => self.min_count.to_string(),
            "min_turns" => self.min_turns.to_string(),
            "lowercase" => self.lowercase.to_string(),
            "split_punctuation" => self.split_punctuation.to_string(),
            "anonymize" => self.anonymize.to_string(),
            "rules" => path(&self.rules),
            "embeddings" => path(&self.embeddings),
            "learning_rate" => self.learning_rate.to_string(),
            "epochs" => self.epochs.to_string(),
            "clip_norm" => self.clip_norm.to_string(),
            "train_seed" => self.train_seed.to_string(),
            "trees" => self.trees.to_string(),
            "max_label_len" => self.max_label_len.to_string(),
            "forest_seed" => self.forest_seed.to_string(),
            "method" => self.method.to_string(),
            "candidates" => self.candidates.to_string(),
            "pool" => self.pool.to_string(),
            "ar_include_self" => self.ar_include_self.to_string(),
            "beams" => self.beams.to_string(),
            "max_len" => self.max_len.to_string(),
            "eval_options" => self.eval_options.to_string(),
            "eval_ks" => self.eval_ks.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            "eval_seed" => self.eval_seed.to_string(),
            "eval_speaker" => self.eval_speaker.clone().unwrap_or_default(),
            "exclude_same_dialogue" => self.exclude_same_dialogue.to_string(),
            _ => unreachable!("every key in KEYS is handled"),
        }
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |field: &'static str, reason: &str| Err(ConfigError::Invalid { field, reason: reason.to_owned() });
        for (field, v) in [
            ("embed_dim", self.embed_dim),
            ("utterance_hidden", self.utterance_hidden),
            ("context_hidden", self.context_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("trees", self.trees),
            ("candidates", self.candidates),
            ("pool", self.pool),
            ("beams", self.beams),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return fail(field, "must be at least 1");
            }
        }
        if self.min_count == 0 {
            return fail("min_count", "must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate", "must be positive and finite");
        }
        if !(self.clip_norm.is_finite() && self.clip_norm >= 0.0) {
            return fail("clip_norm", "must be non-negative and finite");
        }
        if self.max_label_len == 0 || self.max_label_len > MAX_LABEL_BITS {
            return fail("max_label_len", &format!("must be between 1 and {MAX_LABEL_BITS}"));
        }
        if self.pool > self.candidates {
            return fail("pool", "must not exceed candidates");
        }
        if self.eval_options < 2 {
            return fail("eval_options", "must be at least 2");
        }
        if self.eval_ks.is_empty() || self.eval_ks.contains(&0) {
            return fail("eval_ks", "must list cut-offs of at least 1");
        }
        Ok(())
    }

    pub fn line_format(&self) -> LineFormat {
        LineFormat { lowercase: self.lowercase, split_punctuation: self.split_punctuation, ..LineFormat::default() }
    }

    pub fn dims(&self, vocab: usize) -> HredDims {
        HredDims {
            vocab,
            embed: self.embed_dim,
            utt_hidden: self.utterance_hidden,
            ctx_hidden: self.context_hidden,
            dec_hidden: self.decoder_hidden,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed: self.train_seed,
            clip_norm: self.clip_norm,
        }
    }

    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig { trees: self.trees, max_label_len: self.max_label_len, seed: self.forest_seed }
    }

    pub fn retrieval_config(&self, method: Method) -> RetrievalConfig {
        RetrievalConfig { method, candidates: self.candidates, pool: self.pool, ar_include_self: self.ar_include_self }
    }

    pub fn sample_config(&self) -> SampleConfig {
        SampleConfig {
            options: self.eval_options,
            seed: self.eval_seed,
            speaker: self.eval_speaker.as_deref().map(Speaker::new),
            exclude_same_dialogue: self.exclude_same_dialogue,
        }
    }
}
