//! Dialogue-act labels and the rule-table classifier.

use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::question::{QuestionForm, QuestionInfo, QuestionType};
use super::RuleError;

macro_rules! acts {
    ($($variant:ident => $label:literal),+ $(,)?) => {
        /// The 24-label dialogue-act space.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum DialogueAct {
            $(#[serde(rename = $label)] $variant,)+
        }

        impl DialogueAct {
            pub const ALL: [DialogueAct; 24] = [$(DialogueAct::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $(DialogueAct::$variant => $label),+ }
            }
        }
    };
}

acts! {
    Statement => "statement",
    BackChanneling => "back_channeling",
    Opinion => "opinion",
    PosAnswer => "pos_answer",
    NegAnswer => "neg_answer",
    OtherAnswers => "other_answers",
    Abandon => "abandon",
    Comment => "comment",
    Hold => "hold",
    Complaint => "complaint",
    Appreciation => "appreciation",
    Nonsense => "nonsense",
    Opening => "opening",
    Closing => "closing",
    Command => "command",
    DevCommand => "dev_command",
    FactualQuestion => "factual_question",
    OpenQuestionFactual => "open_question_factual",
    OpenQuestionOpinion => "open_question_opinion",
    Correction => "correction",
    Clarification => "clarification",
    Uncertain => "uncertain",
    NonCompliant => "non_compliant",
    PersonalQuestion => "personal_question",
}

impl Default for DialogueAct {
    fn default() -> Self {
        DialogueAct::Statement
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DialogueAct {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown dialogue act `{s}`"))
    }
}

/// Anything that labels a user turn given the bot turn before it. A learned
/// classifier can be plugged in here.
pub trait DialogueActClassifier: Send + Sync {
    fn classify(&self, bot_utterance: Option<&str>, user_utterance: &str, question: &QuestionInfo) -> DialogueAct;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Context {
    Any,
    AfterQuestion,
    AfterYesNo,
}

#[derive(Debug, Clone)]
struct ActRule {
    act: DialogueAct,
    context: Context,
    regex: Regex,
}

#[derive(Debug, Clone)]
pub struct DialogueActRules {
    rules: Vec<ActRule>,
}

/// Words that open a yes/no question in bot text.
const YES_NO_LEADS: &[&str] = &[
    "do", "does", "did", "is", "are", "was", "were", "can", "could", "will", "would", "should", "have", "has",
    "had", "wanna", "want", "may", "shall", "am", "isn't", "don't",
];

/// `(ends with a question, ends with a yes/no question)` for a bot turn.
pub fn bot_question_context(bot_utterance: &str) -> (bool, bool) {
    let trimmed = bot_utterance.trim();
    if !trimmed.ends_with('?') {
        return (false, false);
    }
    let body = &trimmed[..trimmed.len() - 1];
    let last = body.rfind(['.', '!', '?']).map_or(body, |i| &body[i + 1..]);
    let lead = last
        .split_whitespace()
        .next()
        .unwrap_or_default()
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .to_lowercase();
    (true, YES_NO_LEADS.contains(&lead.as_str()))
}

impl DialogueActRules {
    /// Parses `label<TAB>context<TAB>regex` rows.
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        for (line, row) in super::rows(text) {
            let [label, context, pattern] = super::fields::<3>(line, &row)?;
            let act: DialogueAct = label.parse().map_err(|e: String| RuleError::new(line, e))?;
            let context = match context {
                "any" => Context::Any,
                "after_question" => Context::AfterQuestion,
                "after_yes_no" => Context::AfterYesNo,
                other => return Err(RuleError::new(line, format!("unknown context `{other}`"))),
            };
            let regex = Regex::new(pattern).map_err(|e| RuleError::new(line, e.to_string()))?;
            rules.push(ActRule { act, context, regex });
        }
        Ok(Self { rules })
    }
}

impl DialogueActClassifier for DialogueActRules {
    fn classify(&self, bot_utterance: Option<&str>, user_utterance: &str, question: &QuestionInfo) -> DialogueAct {
        let text = user_utterance.trim().to_lowercase();
        if text.is_empty() {
            return DialogueAct::Statement;
        }
        let (after_question, after_yes_no) = bot_utterance.map(bot_question_context).unwrap_or_default();
        for rule in &self.rules {
            let applies = match rule.context {
                Context::Any => true,
                Context::AfterQuestion => after_question,
                Context::AfterYesNo => after_yes_no,
            };
            if applies && rule.regex.is_match(&text) {
                return rule.act;
            }
        }
        match (question.form, question.question_type) {
            (QuestionForm::Wh, QuestionType::Opinion) => DialogueAct::OpenQuestionOpinion,
            (QuestionForm::Wh, _) => DialogueAct::OpenQuestionFactual,
            (QuestionForm::YesNo, _) => DialogueAct::FactualQuestion,
            (QuestionForm::NotQuestion, _) => DialogueAct::Statement,
        }
    }
}
