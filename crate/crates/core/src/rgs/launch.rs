//! Opens the conversation and learns the user's name.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{capitalize, names, ResponseCandidate, ResponseGenerator, RgError, Snapshot};
use crate::nlp::DialogueAct;
use crate::types::ResponsePriority;

const GREETING: &str = "Hi, this is an Alexa Prize Socialbot. I'd love to get to know you a bit better before we chat! Is it all right if I ask for your name?";
const ASK_AGAIN: &str = "Great! What's your name?";
const NAMELESS: &str = "Well it's nice to meet you! I'm excited to chat with you today.";
const DECLINED: &str = "That's okay, no problem. I'm excited to chat with you today.";

static NAME_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"\bmy name is ([a-z][a-z'-]*)",
        r"\bmy name's ([a-z][a-z'-]*)",
        r"\bcall me ([a-z][a-z'-]*)",
        r"\bthey call me ([a-z][a-z'-]*)",
        r"\bi am ([a-z][a-z'-]*)",
        r"\bi'm ([a-z][a-z'-]*)",
        r"\bit's ([a-z][a-z'-]*)",
        r"\bit is ([a-z][a-z'-]*)",
        r"\bthis is ([a-z][a-z'-]*)",
        r"^(?:yes |sure |yeah |ok |okay )?([a-z][a-z'-]*)$",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("name pattern"))
    .collect()
});

static REFUSAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:rather not|don't want to|do not want to|not telling|no you can't|no you may not|prefer not|none of your business)\b")
        .expect("refusal pattern")
});

/// Words that follow "i'm" or stand alone without being a name.
const NOT_NAMES: &[&str] = &[
    "yes", "yeah", "yep", "sure", "ok", "okay", "no", "nope", "not", "fine", "good", "great", "well", "here", "so",
    "a", "an", "the", "just", "going", "doing", "happy", "sad", "tired", "bored", "alexa", "hi", "hello", "hey",
    "what", "why", "who", "it", "that", "this", "sorry", "alright", "maybe", "pretty", "really", "very", "of",
    "course", "absolutely", "definitely", "hmm", "um", "uh",
];

/// The user's first name, capitalized, if the utterance gives one.
pub fn extract_name(utterance: &str) -> Option<String> {
    let lowered = utterance.trim().to_lowercase();
    NAME_PATTERNS.iter().find_map(|re| {
        let name = re.captures(&lowered)?.get(1)?.as_str().trim_matches(['\'', '-']);
        (!name.is_empty() && !NOT_NAMES.contains(&name)).then(|| capitalize(name))
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Stage {
    #[default]
    Start,
    AskedName,
    Done,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct LaunchState {
    stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

#[derive(Debug, Default)]
pub struct Launch;

impl Launch {
    pub fn new() -> Self {
        Self
    }
}

impl ResponseGenerator for Launch {
    fn name(&self) -> &str {
        names::LAUNCH
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        if snap.history.is_empty() {
            let state = LaunchState { stage: Stage::AskedName, name: None };
            return Ok(Some(ResponseCandidate::new(names::LAUNCH, GREETING, ResponsePriority::ForceStart).state(state)));
        }
        let Some(state) = snap.continuing_state::<LaunchState>(names::LAUNCH) else { return Ok(None) };
        if state.stage != Stage::AskedName {
            return Ok(None);
        }
        let lowered = snap.utterance.to_lowercase();
        let candidate = |text: String, state: LaunchState, needs_prompt| {
            Some(
                ResponseCandidate::new(names::LAUNCH, text, ResponsePriority::StrongContinue)
                    .needs_prompt(needs_prompt)
                    .state(state),
            )
        };
        if REFUSAL.is_match(&lowered) || snap.act() == DialogueAct::NonCompliant {
            return Ok(candidate(DECLINED.into(), LaunchState { stage: Stage::Done, name: None }, true));
        }
        if let Some(name) = extract_name(&snap.utterance) {
            let text = format!("Well it's nice to meet you, {name}! I'm excited to chat with you today.");
            return Ok(candidate(text, LaunchState { stage: Stage::Done, name: Some(name) }, true));
        }
        if snap.said_yes() && state.name.is_none() && snap.word_count() <= 3 {
            // "sure" without a name: ask once more
            return Ok(candidate(ASK_AGAIN.into(), LaunchState { stage: Stage::AskedName, name: None }, false));
        }
        if snap.said_no() {
            return Ok(candidate(DECLINED.into(), LaunchState { stage: Stage::Done, name: None }, true));
        }
        Ok(candidate(NAMELESS.into(), LaunchState { stage: Stage::Done, name: None }, true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgs::testkit::{self, snap, with_state};

    #[test]
    fn names_are_extracted() {
        assert_eq!(extract_name("my name is chris").as_deref(), Some("Chris"));
        assert_eq!(extract_name("i'm peter").as_deref(), Some("Peter"));
        assert_eq!(extract_name("sure it's anna").as_deref(), Some("Anna"));
        assert_eq!(extract_name("maria").as_deref(), Some("Maria"));
        assert_eq!(extract_name("yes"), None);
        assert_eq!(extract_name("i'm not sure"), None);
        assert_eq!(extract_name("i'd rather not say"), None);
    }

    #[test]
    fn first_turn_asks_for_the_name() {
        let world = testkit::world();
        let r = Launch.get_response(&snap(&world, "let's chat", None, None)).unwrap().unwrap();
        assert_eq!(r.priority, ResponsePriority::ForceStart);
        assert!(r.text.ends_with("Is it all right if I ask for your name?"));
    }

    fn after_greeting(utterance: &str) -> ResponseCandidate {
        let world = testkit::world();
        let s = snap(&world, utterance, None, Some((GREETING, names::LAUNCH)));
        let s = with_state(s, names::LAUNCH, LaunchState { stage: Stage::AskedName, name: None });
        Launch.get_response(&s).unwrap().unwrap()
    }

    #[test]
    fn greets_by_name_and_hands_off() {
        let r = after_greeting("my name is chris");
        assert_eq!(r.text, "Well it's nice to meet you, Chris! I'm excited to chat with you today.");
        assert_eq!(r.priority, ResponsePriority::StrongContinue);
        assert!(r.needs_prompt);
        assert_eq!(r.new_rg_state["name"], "Chris");
    }

    #[test]
    fn refusal_gets_a_nameless_greeting() {
        let r = after_greeting("i'd rather not say");
        assert_eq!(r.text, DECLINED);
        assert!(r.needs_prompt);
        assert!(r.new_rg_state.get("name").is_none());
    }

    #[test]
    fn silent_after_the_launch_window() {
        let world = testkit::world();
        let s = snap(&world, "hello", None, Some(("Something else.", names::WIKI)));
        assert!(Launch.get_response(&s).unwrap().is_none());
    }
}
