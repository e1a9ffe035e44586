//! Vocabulary shared by the tracker, the treelet engine, the response
//! generators and the dialogue manager.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How strongly a response generator wants its response to be used.
///
/// Declared from most to least important; [`ResponsePriority::rank`] gives
/// the numeric order used by the ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResponsePriority {
    ForceStart,
    StrongContinue,
    CanStart,
    WeakContinue,
    UniversalFallback,
}

impl ResponsePriority {
    pub const ALL: [ResponsePriority; 5] = [
        ResponsePriority::ForceStart,
        ResponsePriority::StrongContinue,
        ResponsePriority::CanStart,
        ResponsePriority::WeakContinue,
        ResponsePriority::UniversalFallback,
    ];

    /// Higher is more important.
    pub fn rank(self) -> u8 {
        match self {
            ResponsePriority::ForceStart => 4,
            ResponsePriority::StrongContinue => 3,
            ResponsePriority::CanStart => 2,
            ResponsePriority::WeakContinue => 1,
            ResponsePriority::UniversalFallback => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ResponsePriority::ForceStart => "FORCE_START",
            ResponsePriority::StrongContinue => "STRONG_CONTINUE",
            ResponsePriority::CanStart => "CAN_START",
            ResponsePriority::WeakContinue => "WEAK_CONTINUE",
            ResponsePriority::UniversalFallback => "UNIVERSAL_FALLBACK",
        }
    }
}

impl fmt::Display for ResponsePriority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResponsePriority {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ResponsePriority::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown response priority `{s}`"))
    }
}

/// Priority attached to a prompt; FORCE_START short-circuits sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PromptPriority {
    ForceStart,
    CurrentTopic,
    Contextual,
    Generic,
}

impl PromptPriority {
    pub const ALL: [PromptPriority; 4] = [
        PromptPriority::ForceStart,
        PromptPriority::CurrentTopic,
        PromptPriority::Contextual,
        PromptPriority::Generic,
    ];

    /// The priorities that take part in weighted sampling.
    pub const SAMPLED: [PromptPriority; 3] = [
        PromptPriority::CurrentTopic,
        PromptPriority::Contextual,
        PromptPriority::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptPriority::ForceStart => "FORCE_START",
            PromptPriority::CurrentTopic => "CURRENT_TOPIC",
            PromptPriority::Contextual => "CONTEXTUAL",
            PromptPriority::Generic => "GENERIC",
        }
    }
}

impl fmt::Display for PromptPriority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptPriority {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptPriority::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown prompt priority `{s}`"))
    }
}

/// What the entity tracker should do with the current entity if a
/// candidate is selected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(tag = "action", content = "entity", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityDirective {
    Set(String),
    Clear,
    #[default]
    Keep,
}

impl fmt::Display for EntityDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityDirective::Set(id) => write!(f, "SET({id})"),
            EntityDirective::Clear => f.write_str("CLEAR"),
            EntityDirective::Keep => f.write_str("KEEP"),
        }
    }
}

/// Coarse polarity produced by the sentiment annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sentiment {
    Positive,
    Negative,
    #[default]
    Neutral,
}

impl FromStr for Sentiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "positive" => Ok(Sentiment::Positive),
            "negative" => Ok(Sentiment::Negative),
            "neutral" => Ok(Sentiment::Neutral),
            other => Err(format!("unknown sentiment `{other}`")),
        }
    }
}

/// Strips a trailing parenthetical disambiguator: `Neo (The Matrix)` -> `Neo`.
pub fn display_name(entity_id: &str) -> &str {
    match entity_id.find(" (") {
        Some(pos) if entity_id.ends_with(')') => &entity_id[..pos],
        _ => entity_id,
    }
}
