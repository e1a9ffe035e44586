//! Lexicon sentiment.

use std::collections::HashMap;

use crate::types::Sentiment;

use super::RuleError;

const NEGATORS: &[&str] = &[
    "not", "never", "don't", "dont", "doesn't", "didn't", "isn't", "wasn't", "aren't", "weren't", "can't",
    "won't", "wouldn't", "no", "nothing", "hardly",
];

/// How many tokens back a negator still applies.
const NEGATION_WINDOW: usize = 3;

#[derive(Debug, Clone, Default)]
pub struct SentimentLexicon {
    scores: HashMap<String, i32>,
}

impl SentimentLexicon {
    /// Parses `word<TAB>score` rows.
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut scores = HashMap::new();
        for (line, row) in super::rows(text) {
            let [word, score] = super::fields::<2>(line, &row)?;
            let score: i32 = score.trim().parse().map_err(|_| RuleError::new(line, format!("bad score `{score}`")))?;
            scores.insert(word.trim().to_lowercase(), score);
        }
        Ok(Self { scores })
    }

    pub fn score(&self, utterance: &str) -> i32 {
        let lowered = utterance.to_lowercase();
        let tokens: Vec<&str> = lowered.split_whitespace().collect();
        let mut total = 0;
        for (i, token) in tokens.iter().enumerate() {
            let Some(&s) = self.scores.get(*token) else { continue };
            let window = &tokens[i.saturating_sub(NEGATION_WINDOW)..i];
            let negated = window.iter().any(|t| NEGATORS.contains(t));
            // a bare "no" counts for itself, not as a negator of what follows
            total += if negated && !(NEGATORS.contains(token)) { -s } else { s };
        }
        total
    }

    pub fn classify(&self, utterance: &str) -> Sentiment {
        match self.score(utterance) {
            s if s > 0 => Sentiment::Positive,
            s if s < 0 => Sentiment::Negative,
            _ => Sentiment::Neutral,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::Resources;

    fn lex() -> &'static SentimentLexicon {
        &Resources::bundled().nlp.sentiment
    }

    #[test]
    fn polarity() {
        assert_eq!(lex().classify("i love cats"), Sentiment::Positive);
        assert_eq!(lex().classify("i hate cats"), Sentiment::Negative);
        assert_eq!(lex().classify("my name is chris"), Sentiment::Neutral);
        assert_eq!(lex().classify(""), Sentiment::Neutral);
    }

    #[test]
    fn negation_flips_within_window() {
        assert_eq!(lex().classify("i don't like cats"), Sentiment::Negative);
        assert_eq!(lex().classify("you are not very smart"), Sentiment::Negative);
        assert_eq!(lex().classify("not that bad"), Sentiment::Positive);
        // four tokens away: out of the window
        assert_eq!(lex().classify("not one bit of it good"), Sentiment::Positive);
    }

    #[test]
    fn bare_answers() {
        assert_eq!(lex().classify("yes"), Sentiment::Positive);
        assert_eq!(lex().classify("no"), Sentiment::Negative);
        assert_eq!(lex().classify("nope"), Sentiment::Negative);
    }
}
