//! Question detection over unpunctuated ASR text.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuestionType {
    Factual,
    Opinion,
    #[default]
    None,
}

/// How the question was recognized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionForm {
    #[default]
    NotQuestion,
    /// Leads with an interrogative word.
    Wh,
    /// Auxiliary inversion, a yes/no question.
    YesNo,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionInfo {
    pub is_question: bool,
    pub question_type: QuestionType,
    pub form: QuestionForm,
}

const FILLERS: &[&str] = &[
    "so", "and", "but", "well", "um", "uh", "hmm", "hey", "alexa", "okay", "ok", "oh", "then", "like", "also",
    "actually", "wait",
];

const WH: &[&str] = &[
    "what", "what's", "whats", "who", "who's", "whos", "where", "where's", "when", "why", "how", "how's", "which",
    "whose", "whom",
];

const AUX: &[&str] = &[
    "do", "does", "did", "is", "are", "was", "were", "can", "could", "will", "would", "should", "shall", "may",
    "might", "am", "have", "has", "had", "don't", "doesn't", "didn't", "isn't", "aren't", "wasn't", "can't",
    "won't", "wouldn't", "couldn't", "shouldn't", "haven't", "hasn't",
];

/// Subjects that may follow an inverted auxiliary.
const SUBJECTS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "there", "that", "this", "these", "those", "the", "a", "an",
    "my", "your", "his", "her", "its", "our", "their", "any", "anyone", "anybody", "someone", "somebody",
    "everyone", "people", "ya", "u",
];

static OPINION_MARKERS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(?:you|ya|u) (?:think|feel|find|like|love|prefer|enjoy|recommend|rather|believe|want|wanna|consider)\b|\byour (?:favorite|favourite|opinion|thoughts|take|view)\b|\b(?:best|worst|better|worse|favorite|favourite)\b",
    )
    .expect("opinion marker regex")
});

/// Rule-based stand-in for a learned question classifier.
pub fn detect_question(utterance: &str) -> QuestionInfo {
    let lowered = utterance.trim().to_lowercase();
    let tokens: Vec<&str> = lowered.split_whitespace().collect();
    let start = tokens.iter().take_while(|t| FILLERS.contains(t)).count();
    let Some(&lead) = tokens.get(start) else {
        return QuestionInfo::default();
    };
    let next = tokens.get(start + 1).copied();

    let form = if WH.contains(&lead) {
        // "what a day" is an exclamation, "how about you" is a question
        match next {
            Some("a") | Some("an") if lead == "what" => QuestionForm::NotQuestion,
            None if lead != "why" && lead != "how" && lead != "what" => QuestionForm::NotQuestion,
            _ => QuestionForm::Wh,
        }
    } else if AUX.contains(&lead) {
        match next {
            Some(n) if SUBJECTS.contains(&n) => QuestionForm::YesNo,
            Some(_) if !matches!(lead, "have" | "has" | "had" | "do" | "don't") => QuestionForm::YesNo,
            _ => QuestionForm::NotQuestion,
        }
    } else if lowered.ends_with(" or not") || (lowered.ends_with(" right") && tokens.len() > 3) {
        QuestionForm::YesNo
    } else {
        QuestionForm::NotQuestion
    };

    if form == QuestionForm::NotQuestion {
        return QuestionInfo::default();
    }
    let question_type = if OPINION_MARKERS.is_match(&lowered) { QuestionType::Opinion } else { QuestionType::Factual };
    QuestionInfo { is_question: true, question_type, form }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(u: &str) -> (bool, QuestionType) {
        let info = detect_question(u);
        (info.is_question, info.question_type)
    }

    #[test]
    fn examples() {
        assert_eq!(q("what do you find interesting"), (true, QuestionType::Opinion));
        assert_eq!(q("i like cats"), (false, QuestionType::None));
        assert_eq!(q("how tall is mount everest"), (true, QuestionType::Factual));
    }

    #[test]
    fn yes_no_questions() {
        assert_eq!(q("do you like cats"), (true, QuestionType::Opinion));
        assert_eq!(q("is it raining in paris"), (true, QuestionType::Factual));
        assert_eq!(q("so are you a robot"), (true, QuestionType::Factual));
        assert_eq!(detect_question("can you sing").form, QuestionForm::YesNo);
    }

    #[test]
    fn statements_and_exclamations() {
        assert!(!q("what a great day").0);
        assert!(!q("have fun").0);
        assert!(!q("tell me about dogs").0);
        assert!(!q("").0);
        assert!(!q("um").0);
        assert!(!q("my name is chris").0);
    }

    #[test]
    fn fillers_are_skipped() {
        assert_eq!(detect_question("so um what is your favorite movie").form, QuestionForm::Wh);
        assert_eq!(q("oh why"), (true, QuestionType::Factual));
    }
}
