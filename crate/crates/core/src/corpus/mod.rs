//! Dialogue corpora: parsing, anonymization, vocabulary and statistics.

mod anonymize;
mod parse;
mod stats;
mod vocab;

use std::fmt;

use thiserror::Error;

pub use anonymize::{anonymize, AnonymizeRule, AnonymizeRules};
pub use parse::{parse_corpus, parse_line, tokenize, LineFormat, ParseOutcome};
pub use stats::{compute_stats, CorpusStats};
pub use vocab::{
    encode_dialogue, encode_tokens, Vocabulary, WordCounts, WordId, EOU, EOU_TOKEN, PAD, PAD_TOKEN, UNK, UNK_TOKEN,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("dialogue has no utterances")]
    EmptyDialogue,
    #[error("utterance has no tokens")]
    EmptyUtterance,
    #[error("utterance {utterance} has no word ids; encode the dialogue first")]
    NotEncoded { utterance: usize },
    #[error("invalid anonymization rule on line {line}: {reason}")]
    InvalidRule { line: usize, reason: String },
    #[error("invalid vocabulary file on line {line}: {reason}")]
    InvalidVocabulary { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Speaker(pub String);

impl Speaker {
    pub fn new(tag: impl Into<String>) -> Self {
        Self(tag.into())
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub speaker: Speaker,
    tokens: Vec<String>,
    word_ids: Option<Vec<WordId>>,
}

impl Utterance {
    pub fn new(speaker: Speaker, tokens: Vec<String>) -> Result<Self, CorpusError> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptyUtterance);
        }
        Ok(Self { speaker, tokens, word_ids: None })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Vocabulary ids of the tokens followed by the end-of-utterance id.
    pub fn word_ids(&self) -> Option<&[WordId]> {
        self.word_ids.as_deref()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Maximal run of consecutive utterances by one speaker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub speaker: Speaker,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    utterances: Vec<Utterance>,
    turns: Vec<Turn>,
}

impl Dialogue {
    pub fn new(utterances: Vec<Utterance>) -> Result<Self, CorpusError> {
        if utterances.is_empty() {
            return Err(CorpusError::EmptyDialogue);
        }
        let mut turns: Vec<Turn> = Vec::new();
        for (i, u) in utterances.iter().enumerate() {
            match turns.last_mut() {
                Some(t) if t.speaker == u.speaker => t.len += 1,
                _ => turns.push(Turn { speaker: u.speaker.clone(), start: i, len: 1 }),
            }
        }
        Ok(Self { utterances, turns })
    }

    /// Builds a dialogue from `(speaker, text)` pairs, whitespace tokenized.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, CorpusError> {
        let utterances = pairs
            .into_iter()
            .map(|(s, text)| Utterance::new(Speaker::new(s), text.split_whitespace().map(str::to_owned).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(utterances)
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn word_count(&self) -> usize {
        self.utterances.iter().map(|u| u.tokens.len()).sum()
    }

    pub fn is_encoded(&self) -> bool {
        self.utterances.iter().all(|u| u.word_ids.is_some())
    }

    /// Encoded id sequences of every utterance.
    pub fn id_sequences(&self) -> Result<Vec<&[WordId]>, CorpusError> {
        self.utterances
            .iter()
            .enumerate()
            .map(|(i, u)| u.word_ids().ok_or(CorpusError::NotEncoded { utterance: i }))
            .collect()
    }

    /// Replaces every utterance's tokens, keeping speakers. Used by anonymization.
    pub fn map_tokens(&self, mut f: impl FnMut(&[String]) -> Vec<String>) -> Result<Self, CorpusError> {
        let utterances = self
            .utterances
            .iter()
            .map(|u| Utterance::new(u.speaker.clone(), f(&u.tokens)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(utterances)
    }
}

/// Keeps the dialogues with at least `min_turns` turns, in order.
pub fn filter_dialogues(ds: Vec<Dialogue>, min_turns: usize) -> Vec<Dialogue> {
    ds.into_iter().filter(|d| d.turns.len() >= min_turns).collect()
}
