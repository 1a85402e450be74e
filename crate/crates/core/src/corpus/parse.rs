use std::io::BufRead;

use log::warn;

use super::{Dialogue, Speaker, Utterance};

/// How one corpus line is split into utterances and turns.
///
/// Each line holds one dialogue. Utterances are separated by
/// `utterance_delimiter`. An utterance may start with a speaker tag such as
/// `A:`; untagged utterances keep the previous speaker, except that crossing a
/// `turn_delimiter` alternates between `A` and `B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineFormat {
    pub utterance_delimiter: String,
    pub turn_delimiter: Option<String>,
    pub split_punctuation: bool,
    pub lowercase: bool,
}

impl Default for LineFormat {
    fn default() -> Self {
        Self {
            utterance_delimiter: "__eou__".into(),
            turn_delimiter: Some("__eot__".into()),
            split_punctuation: false,
            lowercase: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseOutcome {
    pub dialogues: Vec<Dialogue>,
    /// Records that were not blank but produced no utterance, or were not UTF-8.
    pub skipped: usize,
}

pub fn parse_corpus<R: BufRead>(mut reader: R, format: &LineFormat) -> std::io::Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let Ok(line) = std::str::from_utf8(&buf) else {
            warn!("line {line_no}: not valid UTF-8, skipped");
            out.skipped += 1;
            continue;
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line, format) {
            Some(d) => out.dialogues.push(d),
            None => {
                warn!("line {line_no}: no utterances, skipped");
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

/// Parses one dialogue record; `None` when the record holds no tokens.
pub fn parse_line(line: &str, format: &LineFormat) -> Option<Dialogue> {
    let turn_segments: Vec<&str> = match &format.turn_delimiter {
        Some(td) if !td.is_empty() => line.split(td.as_str()).collect(),
        _ => vec![line],
    };
    let mut utterances = Vec::new();
    let mut speaker: Option<Speaker> = None;
    let mut new_turn = false;
    for segment in turn_segments {
        for raw in segment.split(format.utterance_delimiter.as_str()) {
            let mut words = raw.split_whitespace().peekable();
            let tagged = words.peek().and_then(|w| speaker_tag(w));
            let current = match tagged {
                Some(tag) => {
                    words.next();
                    tag
                }
                None => match (&speaker, new_turn) {
                    (Some(prev), true) => alternate(prev),
                    (Some(prev), false) => prev.clone(),
                    (None, _) => Speaker::new("A"),
                },
            };
            let tokens: Vec<String> = words.flat_map(|w| tokenize(w, format)).collect();
            if tokens.is_empty() {
                continue;
            }
            new_turn = false;
            speaker = Some(current.clone());
            utterances.push(Utterance::new(current, tokens).expect("tokens are nonempty"));
        }
        if speaker.is_some() {
            new_turn = true;
        }
    }
    Dialogue::new(utterances).ok()
}

fn speaker_tag(word: &str) -> Option<Speaker> {
    let tag = word.strip_suffix(':')?;
    let mut chars = tag.chars();
    let first = chars.next()?;
    (first.is_ascii_alphabetic() && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')).then(|| Speaker::new(tag))
}

fn alternate(prev: &Speaker) -> Speaker {
    Speaker::new(if prev.0 == "A" { "B" } else { "A" })
}

/// Splits one whitespace-delimited word into tokens.
///
/// With `split_punctuation`, runs of alphanumeric characters and each
/// punctuation character become separate tokens; `<meta>` tokens stay whole.
pub fn tokenize(word: &str, format: &LineFormat) -> Vec<String> {
    let word = if format.lowercase { word.to_lowercase() } else { word.to_owned() };
    let is_meta = word.len() > 2 && word.starts_with('<') && word.ends_with('>');
    if !format.split_punctuation || is_meta {
        return vec![word];
    }
    let mut out = Vec::new();
    let mut run = String::new();
    for c in word.chars() {
        if c.is_alphanumeric() || c == '_' || c == '\'' {
            run.push(c);
        } else {
            if !run.is_empty() {
                out.push(std::mem::take(&mut run));
            }
            out.push(c.to_string());
        }
    }
    if !run.is_empty() {
        out.push(run);
    }
    out
}
