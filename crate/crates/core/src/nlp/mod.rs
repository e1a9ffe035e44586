//! Utterance annotation: navigational intent, dialogue acts, questions,
//! sentiment, offense and entity links, run as a dependency DAG.

pub mod dialogue_act;
pub mod nav_intent;
pub mod offense;
pub mod pipeline;
pub mod question;
pub mod sentiment;

use serde::{Deserialize, Serialize};

use crate::linker::LinkerOutput;
use crate::types::Sentiment;

pub use dialogue_act::{DialogueAct, DialogueActClassifier, DialogueActRules};
pub use nav_intent::{NavIntent, NavIntentRules};
pub use offense::{OffenseDetector, OffenseResult, OffenseType};
pub use pipeline::{AnnotationContext, AnnotatorId, Pipeline, PipelineConfig, PipelineReport, Scheduling};
pub use question::{detect_question, QuestionForm, QuestionInfo, QuestionType};
pub use sentiment::SentimentLexicon;

/// A malformed row in one of the rule tables.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rule table line {line}: {message}")]
pub struct RuleError {
    pub line: usize,
    pub message: String,
}

impl RuleError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

/// Non-empty, non-comment lines with 1-based line numbers.
pub(crate) fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches(['\r', '\n'])))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

pub(crate) fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    lines(text).map(|(n, l)| (n, l.split('\t').collect()))
}

pub(crate) fn fields<'a, const N: usize>(line: usize, row: &[&'a str]) -> Result<[&'a str; N], RuleError> {
    <[&str; N]>::try_from(row).map_err(|_| RuleError::new(line, format!("expected {N} tab-separated fields, got {}", row.len())))
}

/// Every annotation for one user turn. Fields are always populated; a failed
/// annotator leaves its neutral default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    pub nav_intent: NavIntent,
    pub dialogue_act: DialogueAct,
    pub is_question: bool,
    pub question_type: QuestionType,
    #[serde(default)]
    pub question_form: QuestionForm,
    pub sentiment: Sentiment,
    pub offense: OffenseResult,
    pub linker: LinkerOutput,
}

/// The parsed rule tables.
#[derive(Debug, Clone)]
pub struct NlpRules {
    pub nav: NavIntentRules,
    pub dialogue_acts: DialogueActRules,
    pub sentiment: SentimentLexicon,
    pub offense: OffenseDetector,
}
