//! The last resort: always answers, and always has a prompt to offer.

use super::{names, PromptCandidate, ResponseCandidate, ResponseGenerator, RgError, Snapshot};
use crate::types::{PromptPriority, ResponsePriority};

pub const FALLBACK_RESPONSE: &str = "Sorry, I'm not sure how to answer that.";
pub const FALLBACK_PROMPT: &str = "So, what are you interested in?";

pub struct Fallback;

impl ResponseGenerator for Fallback {
    fn name(&self) -> &str {
        names::FALLBACK
    }

    fn get_response(&self, _snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        Ok(Some(
            ResponseCandidate::new(names::FALLBACK, FALLBACK_RESPONSE, ResponsePriority::UniversalFallback).needs_prompt(true),
        ))
    }

    fn get_prompt(&self, _snap: &Snapshot) -> Result<Option<PromptCandidate>, RgError> {
        Ok(Some(PromptCandidate::new(names::FALLBACK, FALLBACK_PROMPT, PromptPriority::Generic)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_answers_and_prompts() {
        let snap = Snapshot::default();
        let r = Fallback.get_response(&snap).unwrap().unwrap();
        assert_eq!(r.priority, ResponsePriority::UniversalFallback);
        assert!(r.needs_prompt);
        assert_eq!(Fallback.get_prompt(&snap).unwrap().unwrap().text, FALLBACK_PROMPT);
    }
}
