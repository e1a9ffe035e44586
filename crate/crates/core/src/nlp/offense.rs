//! Offensive-phrase blacklist and criticism detection.

use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::RuleError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OffenseType {
    Sexual,
    Insult,
    Criticism,
    InappropriateTopic,
    BodilyHarm,
    /// Offensive, but no labeled example matched.
    Error,
    #[default]
    None,
}

impl OffenseType {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sexual => "SEXUAL",
            Self::Insult => "INSULT",
            Self::Criticism => "CRITICISM",
            Self::InappropriateTopic => "INAPPROPRIATE_TOPIC",
            Self::BodilyHarm => "BODILY_HARM",
            Self::Error => "ERROR",
            Self::None => "NONE",
        }
    }
}

impl fmt::Display for OffenseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OffenseType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Self::Sexual,
            Self::Insult,
            Self::Criticism,
            Self::InappropriateTopic,
            Self::BodilyHarm,
            Self::Error,
            Self::None,
        ]
        .into_iter()
        .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| format!("unknown offense type `{s}`"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffenseResult {
    pub offensive: bool,
    pub critical: bool,
    pub offense_type: OffenseType,
    /// The blacklisted phrase that fired, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OffenseDetector {
    blacklist: Option<Regex>,
    typed: Vec<(OffenseType, Regex)>,
    criticism: Vec<Regex>,
}

fn phrase_regex(phrases: &[String]) -> Result<Option<Regex>, regex::Error> {
    if phrases.is_empty() {
        return Ok(None);
    }
    let mut sorted: Vec<&String> = phrases.iter().collect();
    // longest first so "fuck you" beats "fuck"
    sorted.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let alternation: Vec<String> = sorted.iter().map(|p| regex::escape(p)).collect();
    Regex::new(&format!(r"\b(?:{})\b", alternation.join("|"))).map(Some)
}

impl OffenseDetector {
    /// `blacklist`: one phrase per line. `types`: `TYPE<TAB>phrase` rows.
    /// `criticism`: one regex per line.
    pub fn parse(blacklist: &str, types: &str, criticism: &str) -> Result<Self, RuleError> {
        let phrases: Vec<String> = super::lines(blacklist).map(|(_, l)| l.to_lowercase()).collect();
        let blacklist = phrase_regex(&phrases).map_err(|e| RuleError::new(0, e.to_string()))?;

        let mut typed = Vec::new();
        for (line, row) in super::rows(types) {
            let [kind, phrase] = super::fields::<2>(line, &row)?;
            let kind: OffenseType = kind.parse().map_err(|e: String| RuleError::new(line, e))?;
            let regex = Regex::new(&format!(r"\b{}\b", regex::escape(&phrase.to_lowercase())))
                .map_err(|e| RuleError::new(line, e.to_string()))?;
            typed.push((kind, regex));
        }

        let mut patterns = Vec::new();
        for (line, pattern) in super::lines(criticism) {
            patterns.push(Regex::new(pattern).map_err(|e| RuleError::new(line, e.to_string()))?);
        }
        Ok(Self { blacklist, typed, criticism: patterns })
    }

    /// Checks the blacklist only. Also used to screen bot-bound text.
    pub fn is_offensive(&self, text: &str) -> bool {
        let lowered = text.to_lowercase();
        self.blacklist.as_ref().is_some_and(|r| r.is_match(&lowered))
    }

    pub fn detect(&self, utterance: &str) -> OffenseResult {
        let lowered = utterance.to_lowercase();
        let matched = self.blacklist.as_ref().and_then(|r| r.find(&lowered)).map(|m| m.as_str().to_string());
        let critical = self.criticism.iter().any(|r| r.is_match(&lowered));
        let offense_type = if matched.is_some() {
            self.typed
                .iter()
                .find(|(_, r)| r.is_match(&lowered))
                .map(|(t, _)| *t)
                .unwrap_or(OffenseType::Error)
        } else if critical {
            OffenseType::Criticism
        } else {
            OffenseType::None
        };
        OffenseResult { offensive: matched.is_some(), critical, offense_type, matched }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::Resources;

    fn detector() -> &'static OffenseDetector {
        &Resources::bundled().nlp.offense
    }

    #[test]
    fn blacklisted_phrase_is_offensive() {
        let r = detector().detect("you are a bitch");
        assert!(r.offensive);
        assert_eq!(r.offense_type, OffenseType::Insult);
        assert_eq!(r.matched.as_deref(), Some("bitch"));
    }

    #[test]
    fn criticism_is_critical_not_offensive() {
        let r = detector().detect("you are not very smart");
        assert!(r.critical);
        assert!(!r.offensive);
        assert_eq!(r.offense_type, OffenseType::Criticism);
    }

    #[test]
    fn benign() {
        assert_eq!(detector().detect("i love cats"), OffenseResult::default());
        assert_eq!(detector().detect(""), OffenseResult::default());
        // word boundaries: "sextant" and "dickens" are fine
        assert!(!detector().detect("i read dickens with a sextant").offensive);
    }

    #[test]
    fn untyped_blacklist_hit_is_error_type() {
        let d = OffenseDetector::parse("zorp\n", "SEXUAL\tsex\n", "").unwrap();
        let r = d.detect("zorp");
        assert!(r.offensive);
        assert_eq!(r.offense_type, OffenseType::Error);
    }

    #[test]
    fn longest_phrase_reported() {
        assert_eq!(detector().detect("fuck you").matched.as_deref(), Some("fuck you"));
    }

    #[test]
    fn type_is_none_iff_neither_flag() {
        for u in ["you are not very smart", "sexy", "hello there", "you suck", "kill you", "shit happens"] {
            let r = detector().detect(u);
            assert_eq!(r.offense_type == OffenseType::None, !(r.offensive || r.critical), "{u}");
        }
    }

    #[test]
    fn parse_rejects_unknown_type() {
        assert!(OffenseDetector::parse("", "RUDE\tfoo\n", "").is_err());
    }
}
