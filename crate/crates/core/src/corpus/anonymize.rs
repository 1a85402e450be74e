use regex::Regex;

use super::CorpusError;

#[derive(Debug, Clone)]
pub enum AnonymizeRule {
    /// Replaces a single token that fully matches the pattern.
    Pattern { regex: Regex, token: String },
    /// Replaces any listed (case-insensitive) phrase with one meta-token.
    Phrases { phrases: Vec<Vec<String>>, token: String },
}

/// Ordered rule table. Phrase rules take precedence (longest match first),
/// then the first matching pattern rule.
#[derive(Debug, Clone, Default)]
pub struct AnonymizeRules {
    rules: Vec<AnonymizeRule>,
}

const MONTHS: &[&str] = &[
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
    "januari",
    "februari",
    "maart",
    "mei",
    "juni",
    "juli",
    "augustus",
];

const CITIES: &[&str] = &[
    "amsterdam",
    "rotterdam",
    "utrecht",
    "eindhoven",
    "groningen",
    "tilburg",
    "almere",
    "breda",
    "nijmegen",
    "haarlem",
    "arnhem",
    "maastricht",
    "leiden",
    "delft",
    "den haag",
    "london",
    "new york",
    "berlin",
    "paris",
];

impl AnonymizeRules {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Digit runs to `<number>`, months to `<month>`, a short city list to
    /// `<city>` and street-like words to `<street_name>`.
    pub fn default_rules() -> Self {
        Self::empty()
            .with_phrases("<city>", CITIES.iter().copied())
            .with_phrases("<month>", MONTHS.iter().copied())
            .with_pattern("<street_name>", r"(?i)[a-z]+(straat|laan|weg|plein|gracht|street|avenue|road)")
            .expect("built-in pattern compiles")
            .with_pattern("<number>", r"\+?[0-9][0-9\-./]*")
            .expect("built-in pattern compiles")
    }

    pub fn with_pattern(mut self, token: &str, pattern: &str) -> Result<Self, regex::Error> {
        let regex = Regex::new(&format!("^(?:{pattern})$"))?;
        self.rules.push(AnonymizeRule::Pattern { regex, token: token.to_owned() });
        Ok(self)
    }

    pub fn with_phrases<'a>(mut self, token: &str, phrases: impl IntoIterator<Item = &'a str>) -> Self {
        let phrases = phrases
            .into_iter()
            .map(|p| p.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>())
            .filter(|p| !p.is_empty())
            .collect();
        self.rules.push(AnonymizeRule::Phrases { phrases, token: token.to_owned() });
        self
    }

    /// Reads a rule table, one rule per line:
    ///
    /// ```text
    /// pattern<TAB><token><TAB><regex>
    /// phrases<TAB><token><TAB>phrase one|phrase two
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        let mut rules = Self::empty();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, '\t').collect();
            let invalid = |reason: String| CorpusError::InvalidRule { line: line_no, reason };
            let [kind, token, body] = fields[..] else {
                return Err(invalid("expected three tab-separated fields".into()));
            };
            rules = match kind {
                "pattern" => rules.with_pattern(token, body).map_err(|e| invalid(e.to_string()))?,
                "phrases" => rules.with_phrases(token, body.split('|')),
                other => return Err(invalid(format!("unknown rule kind {other:?}"))),
            };
        }
        Ok(rules)
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn longest_phrase(&self, tokens: &[String]) -> Option<(usize, &str)> {
        let mut best: Option<(usize, &str)> = None;
        for rule in &self.rules {
            let AnonymizeRule::Phrases { phrases, token } = rule else { continue };
            for p in phrases {
                let fits = p.len() <= tokens.len() && p.iter().zip(tokens).all(|(a, b)| *a == b.to_lowercase());
                if fits && best.is_none_or(|(len, _)| p.len() > len) {
                    best = Some((p.len(), token.as_str()));
                }
            }
        }
        best
    }

    fn pattern_match(&self, word: &str) -> Option<&str> {
        self.rules.iter().find_map(|rule| match rule {
            AnonymizeRule::Pattern { regex, token } if regex.is_match(word) => Some(token.as_str()),
            _ => None,
        })
    }
}

/// Replaces personal data with meta-tokens.
///
/// Single-token rules preserve the sequence length; a multi-word phrase rule
/// collapses the phrase into one meta-token.
pub fn anonymize(tokens: &[String], rules: &AnonymizeRules) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if let Some((len, token)) = rules.longest_phrase(&tokens[i..]) {
            out.push(token.to_owned());
            i += len;
        } else if let Some(token) = rules.pattern_match(&tokens[i]) {
            out.push(token.to_owned());
            i += 1;
        } else {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}
