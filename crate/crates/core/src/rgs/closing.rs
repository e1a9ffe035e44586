//! Checks whether a user who sounds like they are leaving really wants to.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{names, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::nlp::DialogueAct;
use crate::types::ResponsePriority;

const CONFIRM: &str = "It sounds like you might want to end our conversation. Would you like to stop chatting?";
const GOODBYE: &str = "Okay, it was really nice talking with you. Goodbye!";
const STAY: &str = "Great, I'm glad you want to keep chatting!";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct ClosingState {
    awaiting: bool,
}

pub struct ClosingConfirmation {
    world: Arc<World>,
}

impl ClosingConfirmation {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }

    fn sounds_like_leaving(&self, snap: &Snapshot) -> bool {
        let lowered = snap.utterance.trim().to_lowercase();
        snap.act() == DialogueAct::Closing || self.world.knowledge.closing.iter().any(|r| r.is_match(&lowered))
    }
}

impl ResponseGenerator for ClosingConfirmation {
    fn name(&self) -> &str {
        names::CLOSING_CONFIRMATION
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let rg = names::CLOSING_CONFIRMATION;
        if let Some(ClosingState { awaiting: true }) = snap.continuing_state(rg) {
            if snap.said_yes() || self.sounds_like_leaving(snap) {
                return Ok(Some(
                    ResponseCandidate::new(rg, GOODBYE, ResponsePriority::StrongContinue)
                        .ends_conversation()
                        .state(ClosingState::default()),
                ));
            }
            if snap.said_no() {
                return Ok(Some(
                    ResponseCandidate::new(rg, STAY, ResponsePriority::StrongContinue)
                        .needs_prompt(true)
                        .state(ClosingState::default()),
                ));
            }
            return Ok(None);
        }
        Ok(self.sounds_like_leaving(snap).then(|| {
            ResponseCandidate::new(rg, CONFIRM, ResponsePriority::ForceStart).state(ClosingState { awaiting: true })
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgs::testkit::{self, snap, with_state};

    #[test]
    fn confirms_then_ends() {
        let world = testkit::world();
        let rg = ClosingConfirmation::new(world.clone());
        let r = rg.get_response(&snap(&world, "i have to go", None, None)).unwrap().unwrap();
        assert_eq!(r.text, CONFIRM);
        assert!(!r.ends_conversation);

        let s = snap(&world, "yes", None, Some((CONFIRM, names::CLOSING_CONFIRMATION)));
        let s = with_state(s, names::CLOSING_CONFIRMATION, ClosingState { awaiting: true });
        assert!(rg.get_response(&s).unwrap().unwrap().ends_conversation);

        let s = snap(&world, "no", None, Some((CONFIRM, names::CLOSING_CONFIRMATION)));
        let s = with_state(s, names::CLOSING_CONFIRMATION, ClosingState { awaiting: true });
        let r = rg.get_response(&s).unwrap().unwrap();
        assert!(!r.ends_conversation && r.needs_prompt);
    }

    #[test]
    fn ordinary_talk_is_ignored() {
        let world = testkit::world();
        let rg = ClosingConfirmation::new(world.clone());
        assert!(rg.get_response(&snap(&world, "i went to the park", None, None)).unwrap().is_none());
        assert!(rg.get_response(&snap(&world, "do you just keep talking", None, None)).unwrap().is_some());
    }
}
