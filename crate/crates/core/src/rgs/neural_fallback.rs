//! A generated reply used only when nothing else has anything to say.

use std::sync::{Arc, LazyLock};

use regex::Regex;

use super::{names, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::neural::{generate_exact, truncate_history, GenerationKind, GenerationRequest};
use crate::nlp::detect_question;
use crate::types::ResponsePriority;

static ADVICE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:you should|you shouldn't|you could try|you need to|you have to|you must|try to|i suggest|i recommend|i'd recommend|make sure|don't forget)\b")
        .expect("advice pattern")
});

/// Samples that neither ask nor advise.
pub(crate) fn usable(sample: &str) -> bool {
    let lowered = sample.to_lowercase();
    !sample.contains('?') && !detect_question(&lowered).is_question && !ADVICE.is_match(&lowered)
}

pub struct NeuralFallback {
    world: Arc<World>,
}

impl NeuralFallback {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }
}

impl ResponseGenerator for NeuralFallback {
    fn name(&self) -> &str {
        names::NEURAL_FALLBACK
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let mut history = snap.transcript();
        history.push(snap.utterance.clone());
        let request = GenerationRequest {
            kind: GenerationKind::Fallback,
            history: truncate_history(&history, self.world.max_history_tokens),
            n: self.world.neural_samples,
        };
        let samples = generate_exact(self.world.adapter.as_ref(), &request).map_err(|e| RgError::Adapter(e.to_string()))?;
        Ok(samples.into_iter().find(|s| usable(s) && self.world.is_clean(s)).map(|text| {
            ResponseCandidate::new(names::NEURAL_FALLBACK, text, ResponsePriority::UniversalFallback).needs_prompt(true)
        }))
    }
}
