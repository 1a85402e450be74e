use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{CorpusError, Dialogue, Utterance};

pub type WordId = u32;

pub const PAD: WordId = 0;
pub const UNK: WordId = 1;
pub const EOU: WordId = 2;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const EOU_TOKEN: &str = "__eou__";

const RESERVED: [&str; 3] = [PAD_TOKEN, UNK_TOKEN, EOU_TOKEN];

/// Word frequencies; merging is associative so counts can be sharded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordCounts {
    counts: HashMap<String, u64>,
    utterances: u64,
}

impl WordCounts {
    pub fn from_dialogues(ds: &[Dialogue]) -> Self {
        let mut c = Self::default();
        for d in ds {
            c.add_dialogue(d);
        }
        c
    }

    pub fn add_dialogue(&mut self, d: &Dialogue) {
        for u in d.utterances() {
            self.utterances += 1;
            for t in u.tokens() {
                *self.counts.entry(t.clone()).or_default() += 1;
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (w, c) in other.counts {
            *self.counts.entry(w).or_default() += c;
        }
        self.utterances += other.utterances;
        self
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }
}

/// Word/id bijection over the kept words plus the reserved meta-tokens
/// `<pad>`, `<unk>` and the end-of-utterance marker at ids 0, 1 and 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, WordId>,
    min_count: u64,
}

impl Vocabulary {
    pub fn build(ds: &[Dialogue], min_count: u64) -> Self {
        Self::from_counts(&WordCounts::from_dialogues(ds), min_count)
    }

    /// Keeps words with frequency at least `min_count`, ordered by
    /// descending count then lexicographically.
    pub fn from_counts(counts: &WordCounts, min_count: u64) -> Self {
        let min_count = min_count.max(1);
        let mut kept: Vec<(&String, u64)> = counts
            .counts
            .iter()
            .filter(|(w, &c)| c >= min_count && !RESERVED.contains(&w.as_str()))
            .map(|(w, &c)| (w, c))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let kept_total: u64 = kept.iter().map(|(_, c)| c).sum();
        let all_total: u64 =
            counts.counts.iter().filter(|(w, _)| !RESERVED.contains(&w.as_str())).map(|(_, c)| c).sum();

        let mut words: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut freq = vec![
            counts.get(PAD_TOKEN),
            counts.get(UNK_TOKEN) + (all_total - kept_total),
            counts.get(EOU_TOKEN) + counts.utterances,
        ];
        for (w, c) in kept {
            words.push(w.clone());
            freq.push(c);
        }
        Self::from_parts(words, freq, min_count)
    }

    fn from_parts(words: Vec<String>, counts: Vec<u64>, min_count: u64) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as WordId)).collect();
        Self { words, counts, index, min_count }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn id_or_unk(&self, word: &str) -> WordId {
        self.id(word).unwrap_or(UNK)
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: WordId) -> Option<u64> {
        self.counts.get(id as usize).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Maps ids back to words, dropping a trailing end-of-utterance marker.
    pub fn decode(&self, ids: &[WordId]) -> Vec<String> {
        let ids = ids.strip_suffix(&[EOU]).unwrap_or(ids);
        ids.iter().map(|&i| self.word(i).unwrap_or(UNK_TOKEN).to_owned()).collect()
    }

    /// Writes `word<TAB>count` lines in id order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(w, "{word}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, CorpusError> {
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let invalid = |reason: &str| CorpusError::InvalidVocabulary { line: i + 1, reason: reason.into() };
            let (word, count) = line.split_once('\t').ok_or_else(|| invalid("missing tab"))?;
            let count: u64 = count.parse().map_err(|_| invalid("count is not an integer"))?;
            if i < RESERVED.len() && word != RESERVED[i] {
                return Err(invalid("reserved token out of place"));
            }
            words.push(word.to_owned());
            counts.push(count);
        }
        if words.len() < RESERVED.len() {
            return Err(CorpusError::InvalidVocabulary {
                line: words.len() + 1,
                reason: "missing reserved tokens".into(),
            });
        }
        let min_count = counts[RESERVED.len()..].iter().copied().min().unwrap_or(1);
        let vocab = Self::from_parts(words, counts, min_count);
        if vocab.index.len() != vocab.words.len() {
            return Err(CorpusError::InvalidVocabulary { line: 0, reason: "duplicate word".into() });
        }
        Ok(vocab)
    }
}

/// Token ids followed by the end-of-utterance id; unknown words map to `<unk>`.
pub fn encode_tokens(tokens: &[String], v: &Vocabulary) -> Vec<WordId> {
    tokens.iter().map(|t| v.id_or_unk(t)).chain(std::iter::once(EOU)).collect()
}

pub fn encode_dialogue(d: &Dialogue, v: &Vocabulary) -> Dialogue {
    let utterances = d
        .utterances()
        .iter()
        .map(|u| Utterance {
            speaker: u.speaker.clone(),
            tokens: u.tokens.clone(),
            word_ids: Some(encode_tokens(&u.tokens, v)),
        })
        .collect();
    Dialogue { utterances, turns: d.turns().to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(lines: &[&str]) -> Vec<Dialogue> {
        lines.iter().map(|l| Dialogue::from_pairs([("A", *l)]).unwrap()).collect()
    }

    #[test]
    fn min_count_threshold() {
        let v = Vocabulary::build(&corpus(&["a a b", "a"]), 2);
        assert_eq!(v.len(), 4);
        assert_eq!(v.id("a"), Some(3));
        assert_eq!(v.id("b"), None);
        assert_eq!(v.count(UNK), Some(1));
        assert_eq!(v.count(EOU), Some(2));
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let v = Vocabulary::build(&corpus(&["x y z", "z"]), 1);
        assert_eq!(v.len(), 3 + 3);
    }

    #[test]
    fn twelve_words_fixture() {
        // Hand-counted: 12 distinct words, each appearing at least twice.
        let ds = corpus(&[
            "alpha beta gamma delta epsilon zeta",
            "eta theta iota kappa lambda mu",
            "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu",
            "mu mu once",
        ]);
        let v = Vocabulary::build(&ds, 2);
        assert_eq!(v.len(), 12 + 3);
    }

    #[test]
    fn ids_ordered_by_count_then_word() {
        let v = Vocabulary::build(&corpus(&["b a c c", "b a"]), 1);
        assert_eq!(&v.words()[3..], ["a", "b", "c"]);
        let v = Vocabulary::build(&corpus(&["b c c c b"]), 1);
        assert_eq!(&v.words()[3..], ["c", "b"]);
    }

    #[test]
    fn encode_examples() {
        let v = Vocabulary::build(&corpus(&["hi"]), 1);
        let hi = v.id("hi").unwrap();
        let enc = |s: &str| {
            let d = Dialogue::from_pairs([("A", s)]).unwrap();
            encode_dialogue(&d, &v).utterances()[0].word_ids().unwrap().to_vec()
        };
        assert_eq!(enc("hi"), vec![hi, EOU]);
        assert_eq!(enc("zzz"), vec![UNK, EOU]);
        assert_eq!(enc("hi zzz"), vec![hi, UNK, EOU]);
    }

    #[test]
    fn tsv_roundtrip() {
        let v = Vocabulary::build(&corpus(&["a a b", "c"]), 1);
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().next(), Some("<pad>\t0"));
        let back = Vocabulary::read_tsv(buf.as_slice()).unwrap();
        assert_eq!(back.words(), v.words());
        let mut again = Vec::new();
        back.write_tsv(&mut again).unwrap();
        assert_eq!(buf, again);
        assert!(Vocabulary::read_tsv("<unk>\t0\n".as_bytes()).is_err());
    }

    #[test]
    fn counts_merge_matches_whole() {
        let ds = corpus(&["a b", "b c", "c c d"]);
        let whole = WordCounts::from_dialogues(&ds);
        let parts = WordCounts::from_dialogues(&ds[..1]).merge(WordCounts::from_dialogues(&ds[1..]));
        assert_eq!(whole, parts);
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(
            train in prop::collection::vec("[a-e]{1,2}", 1..30),
            probe in prop::collection::vec("[a-f]{1,2}", 1..10),
            min_count in 1u64..4,
        ) {
            let v = Vocabulary::build(&corpus(&[&train.join(" ")]), min_count);
            let d = Dialogue::from_pairs([("A", probe.join(" ").as_str())]).unwrap();
            let enc = encode_dialogue(&d, &v);
            let decoded = v.decode(enc.utterances()[0].word_ids().unwrap());
            let expected: Vec<String> = probe
                .iter()
                .map(|w| if v.id(w).is_some() { w.clone() } else { UNK_TOKEN.to_string() })
                .collect();
            prop_assert_eq!(decoded, expected);
            for id in enc.utterances()[0].word_ids().unwrap() {
                prop_assert!((*id as usize) < v.len());
            }
        }
    }
}
