//! Apologizes when the user complains about the bot.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{names, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::nlp::DialogueAct;
use crate::types::ResponsePriority;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplaintKind {
    Misheard,
    Clarification,
    Repetition,
    Privacy,
    Generic,
}

impl ComplaintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Misheard => "misheard",
            Self::Clarification => "clarification",
            Self::Repetition => "repetition",
            Self::Privacy => "privacy",
            Self::Generic => "generic",
        }
    }
}

impl fmt::Display for ComplaintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComplaintKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Misheard, Self::Clarification, Self::Repetition, Self::Privacy, Self::Generic]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown complaint kind `{s}`"))
    }
}

pub struct Complaint {
    world: Arc<World>,
}

impl Complaint {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }

    /// Which complaint, if any, the utterance voices, with the reply for it.
    pub fn classify(&self, snap: &Snapshot) -> Option<(ComplaintKind, &str)> {
        let lowered = snap.utterance.trim().to_lowercase();
        let rules = &self.world.knowledge.complaints;
        let specific = rules.iter().find(|r| r.pattern.as_ref().is_some_and(|p| p.is_match(&lowered)));
        let rule = specific.or_else(|| {
            (snap.act() == DialogueAct::Complaint).then(|| rules.iter().find(|r| r.pattern.is_none())).flatten()
        })?;
        let kind = rule.kind.parse().unwrap_or(ComplaintKind::Generic);
        Some((kind, rule.text.as_str()))
    }
}

impl ResponseGenerator for Complaint {
    fn name(&self) -> &str {
        names::COMPLAINT
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let Some((kind, text)) = self.classify(snap) else { return Ok(None) };
        let (priority, needs_prompt) = match kind {
            // a refusal to share is often a fair answer to the question just asked
            ComplaintKind::Privacy => (ResponsePriority::CanStart, true),
            ComplaintKind::Misheard => (ResponsePriority::ForceStart, false),
            _ => (ResponsePriority::ForceStart, true),
        };
        Ok(Some(ResponseCandidate::new(names::COMPLAINT, text, priority).needs_prompt(needs_prompt)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgs::testkit::{self, snap};

    #[test]
    fn subtypes_and_generic() {
        let world = testkit::world();
        let rg = Complaint::new(world.clone());
        let kind = |u: &str| rg.classify(&snap(&world, u, None, None)).map(|(k, _)| k);
        assert_eq!(kind("that's not what i said"), Some(ComplaintKind::Misheard));
        assert_eq!(kind("what do you mean"), Some(ComplaintKind::Clarification));
        assert_eq!(kind("you already said that"), Some(ComplaintKind::Repetition));
        assert_eq!(kind("none of your business"), Some(ComplaintKind::Privacy));
        assert_eq!(kind("you are so annoying"), Some(ComplaintKind::Generic));
        assert_eq!(kind("i like cats"), None);
    }

    #[test]
    fn privacy_yields_to_the_asking_rg() {
        let world = testkit::world();
        let rg = Complaint::new(world.clone());
        let r = rg.get_response(&snap(&world, "i'd rather not say", None, None)).unwrap().unwrap();
        assert_eq!(r.priority, ResponsePriority::CanStart);
    }
}
