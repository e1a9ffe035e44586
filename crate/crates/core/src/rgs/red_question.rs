//! Declines questions that call for medical, legal or financial advice.

use std::sync::{Arc, LazyLock};

use regex::Regex;

use super::{names, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::types::ResponsePriority;

const REPLY: &str = "I'm sorry, but I'm not able to give advice on that. It's best to ask a professional.";

static ADVICE_SEEKING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:should i|can i|is it safe|is it okay|is it ok|do i need|what should i|how much should i)\b")
        .expect("advice pattern")
});

pub struct RedQuestion {
    world: Arc<World>,
}

impl RedQuestion {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }

    /// The matching domain, if the utterance is a question in one.
    pub fn domain(&self, snap: &Snapshot) -> Option<&str> {
        let lowered = snap.utterance.trim().to_lowercase();
        if !(snap.annotations.is_question || ADVICE_SEEKING.is_match(&lowered)) {
            return None;
        }
        self.world.knowledge.red_questions.iter().find(|(_, r)| r.is_match(&lowered)).map(|(d, _)| d.as_str())
    }
}

impl ResponseGenerator for RedQuestion {
    fn name(&self) -> &str {
        names::RED_QUESTION
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        Ok(self
            .domain(snap)
            .map(|_| ResponseCandidate::new(names::RED_QUESTION, REPLY, ResponsePriority::ForceStart).needs_prompt(true)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgs::testkit::{self, snap};

    #[test]
    fn only_questions_in_a_domain() {
        let world = testkit::world();
        let rg = RedQuestion::new(world.clone());
        let s = snap(&world, "should i buy bitcoin", None, None);
        assert_eq!(rg.domain(&s), Some("financial"));
        let s = snap(&world, "what medication should i take for a headache", None, None);
        assert_eq!(rg.domain(&s), Some("medical"));
        assert!(rg.get_response(&snap(&world, "my aunt is a lawyer", None, None)).unwrap().is_none());
        assert!(rg.get_response(&snap(&world, "what is your favorite movie", None, None)).unwrap().is_none());
    }
}
