//! Handles offensive and critical user utterances.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{names, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::nlp::OffenseType;
use crate::types::ResponsePriority;

pub const CRITICAL_RESPONSE: &str = "I know you feel frustrated. I'm always trying to get better.";
const WHY: &str = "Why did you say that";
const AVOID: &str = "I'd rather not talk about that";
const AFTER_WHY: &str = "OK.";

/// How the bot answers an offensive remark.
///
/// Asking why cannot be combined with avoidance or with a prompt, and the
/// type makes such a combination impossible to write:
///
/// ```compile_fail
/// use socialbot_core::rgs::OffenseStrategy;
/// let _ = OffenseStrategy::Why { name: true, prompt: true };
/// ```
///
/// ```compile_fail
/// use socialbot_core::rgs::OffenseStrategy;
/// let _ = OffenseStrategy::WhyAvoidance { name: false };
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OffenseStrategy {
    Why { name: bool },
    Avoidance { name: bool, prompt: bool },
    CounterPrompt,
    EmpatheticPrompt,
}

impl OffenseStrategy {
    pub const ALL: [OffenseStrategy; 8] = [
        Self::Why { name: false },
        Self::Why { name: true },
        Self::Avoidance { name: false, prompt: false },
        Self::Avoidance { name: true, prompt: false },
        Self::Avoidance { name: false, prompt: true },
        Self::Avoidance { name: true, prompt: true },
        Self::CounterPrompt,
        Self::EmpatheticPrompt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Why { name: false } => "WHY",
            Self::Why { name: true } => "WHY_NAME",
            Self::Avoidance { name: false, prompt: false } => "AVOIDANCE",
            Self::Avoidance { name: true, prompt: false } => "AVOIDANCE_NAME",
            Self::Avoidance { name: false, prompt: true } => "AVOIDANCE_PROMPT",
            Self::Avoidance { name: true, prompt: true } => "AVOIDANCE_NAME_PROMPT",
            Self::CounterPrompt => "COUNTER_PROMPT",
            Self::EmpatheticPrompt => "EMPATHETIC_PROMPT",
        }
    }

    pub fn uses_name(self) -> bool {
        matches!(self, Self::Why { name: true } | Self::Avoidance { name: true, .. })
    }

    pub fn wants_prompt(self) -> bool {
        !matches!(self, Self::Why { .. } | Self::Avoidance { prompt: false, .. })
    }
}

impl fmt::Display for OffenseStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OffenseStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().replace(['+', '-'], "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(&wanted))
            .ok_or_else(|| format!("unknown offense strategy `{s}`"))
    }
}

impl Serialize for OffenseStrategy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for OffenseStrategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct OffenseState {
    asked_why: bool,
}

pub struct OffensiveUser {
    world: Arc<World>,
}

impl OffensiveUser {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }

    fn reply(&self, style: &str, kind: OffenseType) -> String {
        let replies = &self.world.knowledge.offense_replies;
        replies
            .get(&(style.to_string(), kind))
            .or_else(|| replies.get(&(style.to_string(), OffenseType::Error)))
            .cloned()
            .unwrap_or_else(|| format!("{AVOID}."))
    }

    /// The bot's words for an offensive remark under `strategy`.
    pub fn text_for(&self, strategy: OffenseStrategy, kind: OffenseType, name: Option<&str>) -> String {
        let named = |base: &str, terminal: char| match name.filter(|_| strategy.uses_name()) {
            Some(n) => format!("{base}, {n}{terminal}"),
            None => format!("{base}{terminal}"),
        };
        match strategy {
            OffenseStrategy::Why { .. } => named(WHY, '?'),
            OffenseStrategy::Avoidance { .. } => named(AVOID, '.'),
            OffenseStrategy::CounterPrompt => self.reply("counter", kind),
            OffenseStrategy::EmpatheticPrompt => self.reply("empathetic", kind),
        }
    }
}

impl ResponseGenerator for OffensiveUser {
    fn name(&self) -> &str {
        names::OFFENSIVE_USER
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let rg = names::OFFENSIVE_USER;
        let offense = &snap.annotations.offense;
        if offense.offensive {
            let strategy = snap.assignments.offense_strategy;
            let name = snap.user_name();
            let text = self.text_for(strategy, offense.offense_type, name.as_deref());
            let state = OffenseState { asked_why: matches!(strategy, OffenseStrategy::Why { .. }) };
            return Ok(Some(
                ResponseCandidate::new(rg, text, ResponsePriority::ForceStart)
                    .needs_prompt(strategy.wants_prompt())
                    .state(state),
            ));
        }
        if offense.critical {
            return Ok(Some(
                ResponseCandidate::new(rg, CRITICAL_RESPONSE, ResponsePriority::ForceStart)
                    .needs_prompt(true)
                    .state(OffenseState::default()),
            ));
        }
        if let Some(OffenseState { asked_why: true }) = snap.continuing_state(rg) {
            return Ok(Some(
                ResponseCandidate::new(rg, AFTER_WHY, ResponsePriority::StrongContinue)
                    .needs_prompt(true)
                    .state(OffenseState::default()),
            ));
        }
        Ok(None)
    }
}
