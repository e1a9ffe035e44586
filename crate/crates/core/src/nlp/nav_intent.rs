//! Navigational intent: does the user want to start or stop talking about
//! something?

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::RuleError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavIntent {
    pub positive: bool,
    pub negative: bool,
    pub positive_topic: Option<String>,
    pub negative_topic: Option<String>,
    pub refers_current_topic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone)]
struct NavRule {
    polarity: Polarity,
    regex: Regex,
}

/// Words that point back at whatever is being discussed.
const DEICTIC: &[&str] = &[
    "this", "that", "it", "this topic", "that topic", "this one", "that one", "them", "these", "those",
    "this stuff", "that stuff", "this thing", "that thing",
];

/// Topics meaning "anything but the current one".
const ELSEWHERE: &[&str] = &[
    "something else",
    "anything else",
    "something different",
    "other things",
    "another topic",
    "a different topic",
    "other stuff",
];

#[derive(Debug, Clone)]
pub struct NavIntentRules {
    rules: Vec<NavRule>,
}

impl NavIntentRules {
    /// Parses `polarity<TAB>regex` rows.
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        for (line, row) in super::rows(text) {
            let [polarity, pattern] = super::fields::<2>(line, &row)?;
            let polarity = match polarity {
                "positive" => Polarity::Positive,
                "negative" => Polarity::Negative,
                other => return Err(RuleError::new(line, format!("unknown polarity `{other}`"))),
            };
            let regex = Regex::new(pattern).map_err(|e| RuleError::new(line, e.to_string()))?;
            rules.push(NavRule { polarity, regex });
        }
        Ok(Self { rules })
    }

    pub fn classify(&self, utterance: &str) -> NavIntent {
        let text = utterance.trim().to_lowercase();
        let mut intent = NavIntent::default();
        let mut negative_spans: Vec<(usize, usize)> = Vec::new();

        for rule in self.rules.iter().filter(|r| r.polarity == Polarity::Negative) {
            let Some(caps) = rule.regex.captures(&text) else { continue };
            let whole = caps.get(0).expect("group 0");
            negative_spans.push((whole.start(), whole.end()));
            if intent.negative {
                continue;
            }
            intent.negative = true;
            match caps.name("topic").map(|m| clean_topic(m.as_str())) {
                Some(topic) if is_deictic(&topic) || ELSEWHERE.contains(&topic.as_str()) => {
                    intent.refers_current_topic = true;
                }
                Some(topic) if !topic.is_empty() => intent.negative_topic = Some(topic),
                _ => intent.refers_current_topic = true,
            }
        }

        for rule in self.rules.iter().filter(|r| r.polarity == Polarity::Positive) {
            let Some(caps) = rule.regex.captures(&text) else { continue };
            let whole = caps.get(0).expect("group 0");
            let overlaps = negative_spans.iter().any(|&(s, e)| whole.start() < e && s < whole.end());
            if overlaps {
                continue;
            }
            let topic = caps.name("topic").map(|m| clean_topic(m.as_str()));
            if let Some(t) = &topic {
                if ELSEWHERE.contains(&t.as_str()) {
                    continue;
                }
            }
            intent.positive = true;
            match topic {
                Some(t) if is_deictic(&t) => intent.refers_current_topic = true,
                Some(t) if !t.is_empty() => intent.positive_topic = Some(t),
                _ => {}
            }
            break;
        }
        intent
    }
}

fn clean_topic(raw: &str) -> String {
    let mut topic = raw.trim().to_string();
    for suffix in [" more", " please", " instead", " anymore", " any more"] {
        if let Some(stripped) = topic.strip_suffix(suffix) {
            topic = stripped.trim_end().to_string();
        }
    }
    topic
}

fn is_deictic(topic: &str) -> bool {
    DEICTIC.contains(&topic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::Resources;

    fn rules() -> NavIntentRules {
        Resources::bundled().nlp.nav.clone()
    }

    #[test]
    fn minecraft_examples() {
        let r = rules();
        let pos = r.classify("can we talk about minecraft");
        assert!(pos.positive && !pos.negative);
        assert_eq!(pos.positive_topic.as_deref(), Some("minecraft"));

        let neg = r.classify("stop talking about minecraft");
        assert!(neg.negative && !neg.positive);
        assert_eq!(neg.negative_topic.as_deref(), Some("minecraft"));
        assert!(!neg.refers_current_topic);
    }

    #[test]
    fn something_else_rejects_the_current_topic() {
        let nav = rules().classify("i want to talk about something else");
        assert!(nav.negative);
        assert!(!nav.positive);
        assert!(nav.refers_current_topic);
    }

    #[test]
    fn discuss_this_more_refers_to_current() {
        let nav = rules().classify("let's discuss this more");
        assert!(nav.positive);
        assert!(nav.refers_current_topic);
        assert_eq!(nav.positive_topic, None);
    }

    #[test]
    fn both_polarities_can_hold() {
        let nav = rules().classify("i don't want to talk about movies any more let's chat about you");
        assert!(nav.negative && nav.positive);
        assert_eq!(nav.negative_topic.as_deref(), Some("movies"));
        assert_eq!(nav.positive_topic.as_deref(), Some("you"));
    }

    #[test]
    fn no_pattern_no_intent() {
        assert_eq!(rules().classify("tell me a joke"), NavIntent::default());
        assert_eq!(rules().classify(""), NavIntent::default());
        assert_eq!(rules().classify("i love cats"), NavIntent::default());
    }

    #[test]
    fn table_one_commentary() {
        let r = rules();
        for (utterance, positive, negative) in [
            ("let's chat", true, false),
            ("my name is chris", false, false),
            ("hang out with my friends", false, false),
            ("maybe watch a movie", false, false),
            ("i saw the matrix", false, false),
            ("i loved it neo is amazing", false, false),
            ("i want to talk about something else", false, true),
            ("i love cats", false, false),
            ("hmm i love cats because they are fluffy", false, false),
            ("you are not very smart", false, false),
            ("what do you find interesting", false, false),
            ("sure", false, false),
            ("morpheus teaching jujitsu to neo", false, false),
            ("i want to stop talking", false, false),
        ] {
            let nav = r.classify(utterance);
            assert_eq!((nav.positive, nav.negative), (positive, negative), "{utterance}");
        }
    }
}
