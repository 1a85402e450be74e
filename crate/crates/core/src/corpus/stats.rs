use std::io::Write;

use super::{Dialogue, Vocabulary, UNK};

/// Corpus totals in the shape of the usual dialogue-corpus statistics table.
///
/// Totals are additive: `compute_stats(a ++ b) == compute_stats(a).merge(compute_stats(b))`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CorpusStats {
    pub dialogues: u64,
    pub turns: u64,
    pub utterances: u64,
    pub words: u64,
    pub unknown_words: u64,
    /// Sum over dialogues of the per-dialogue unknown fraction.
    pub unknown_rate_sum: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl CorpusStats {
    pub fn avg_words_per_dialogue(&self) -> f64 {
        ratio(self.words, self.dialogues)
    }

    pub fn avg_turns_per_dialogue(&self) -> f64 {
        ratio(self.turns, self.dialogues)
    }

    pub fn avg_words_per_turn(&self) -> f64 {
        ratio(self.words, self.turns)
    }

    pub fn avg_utterances_per_dialogue(&self) -> f64 {
        ratio(self.utterances, self.dialogues)
    }

    pub fn avg_words_per_utterance(&self) -> f64 {
        ratio(self.words, self.utterances)
    }

    /// Mean over dialogues of the fraction of `<unk>` tokens, in `[0, 1]`.
    pub fn unknown_rate(&self) -> f64 {
        if self.dialogues == 0 {
            0.0
        } else {
            self.unknown_rate_sum / self.dialogues as f64
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            dialogues: self.dialogues + other.dialogues,
            turns: self.turns + other.turns,
            utterances: self.utterances + other.utterances,
            words: self.words + other.words,
            unknown_words: self.unknown_words + other.unknown_words,
            unknown_rate_sum: self.unknown_rate_sum + other.unknown_rate_sum,
        }
    }

    pub fn write_report<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "Total # of dialogues\t{}", self.dialogues)?;
        writeln!(w, "Total # of turns\t{}", self.turns)?;
        writeln!(w, "Total # of utterances\t{}", self.utterances)?;
        writeln!(w, "Total # of words\t{}", self.words)?;
        writeln!(w, "Avg. # of words per dialogue\t{:.3}", self.avg_words_per_dialogue())?;
        writeln!(w, "Avg. # of turns per dialogue\t{:.3}", self.avg_turns_per_dialogue())?;
        writeln!(w, "Avg. # of words per turn\t{:.3}", self.avg_words_per_turn())?;
        writeln!(w, "Avg. # of utterances per dialogue\t{:.3}", self.avg_utterances_per_dialogue())?;
        writeln!(w, "Avg. # of words per utterance\t{:.3}", self.avg_words_per_utterance())?;
        writeln!(w, "Avg. % of unknowns per dialogue\t{:.3}", 100.0 * self.unknown_rate())?;
        Ok(())
    }
}

pub fn compute_stats(ds: &[Dialogue], v: &Vocabulary) -> CorpusStats {
    let mut s = CorpusStats::default();
    for d in ds {
        let words = d.word_count() as u64;
        let unknown: u64 = d
            .utterances()
            .iter()
            .map(|u| match u.word_ids() {
                Some(ids) => ids[..u.tokens().len()].iter().filter(|&&i| i == UNK).count(),
                None => u.tokens().iter().filter(|t| v.id_or_unk(t) == UNK).count(),
            } as u64)
            .sum();
        s.dialogues += 1;
        s.turns += d.turns().len() as u64;
        s.utterances += d.utterances().len() as u64;
        s.words += words;
        s.unknown_words += unknown;
        s.unknown_rate_sum += ratio(unknown, words);
    }
    s
}
