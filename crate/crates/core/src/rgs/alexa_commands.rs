//! Requests meant for a voice assistant, which a chat bot cannot carry out.

use std::sync::Arc;

use super::{names, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::nlp::DialogueAct;
use crate::types::ResponsePriority;

const REPLY: &str = "I'm just a social bot, so I can't do that, but I'm happy to keep chatting. If you want to leave, you can just say stop.";

pub struct AlexaCommands {
    world: Arc<World>,
}

impl AlexaCommands {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }
}

impl ResponseGenerator for AlexaCommands {
    fn name(&self) -> &str {
        names::ALEXA_COMMANDS
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let lowered = snap.utterance.trim().to_lowercase();
        let hit = snap.act() == DialogueAct::DevCommand || self.world.knowledge.commands.iter().any(|r| r.is_match(&lowered));
        Ok(hit.then(|| ResponseCandidate::new(names::ALEXA_COMMANDS, REPLY, ResponsePriority::ForceStart).needs_prompt(true)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgs::testkit::{self, snap};

    #[test]
    fn device_requests_are_declined() {
        let world = testkit::world();
        let rg = AlexaCommands::new(world.clone());
        assert!(rg.get_response(&snap(&world, "play some taylor swift", None, None)).unwrap().is_some());
        assert!(rg.get_response(&snap(&world, "set a timer for ten minutes", None, None)).unwrap().is_some());
        assert!(rg.get_response(&snap(&world, "i like to play tennis", None, None)).unwrap().is_none());
    }
}
