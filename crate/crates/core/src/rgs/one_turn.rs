//! Canned replies to a fixed set of whole-utterance patterns.

use std::sync::Arc;

use super::{names, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::types::ResponsePriority;

pub struct OneTurnScripted {
    world: Arc<World>,
}

impl OneTurnScripted {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }
}

impl ResponseGenerator for OneTurnScripted {
    fn name(&self) -> &str {
        names::ONE_TURN_SCRIPTED
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let lowered = snap.utterance.trim().to_lowercase();
        let lowered = lowered.trim_end_matches(['?', '!', '.']);
        Ok(self.world.knowledge.one_turn.iter().find(|r| r.pattern.is_match(lowered)).map(|r| {
            ResponseCandidate::new(names::ONE_TURN_SCRIPTED, r.text.clone(), ResponsePriority::ForceStart)
                .needs_prompt(r.needs_prompt)
        }))
    }
}
