//! Open-ended chit-chat driven by a sampled text generator. A discussion
//! opens with a handwritten starter question and continues while the
//! generator keeps offering questions.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{names, PromptCandidate, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::neural::{generate_exact, truncate_history, GenerationKind, GenerationRequest};
use crate::types::{PromptPriority, ResponsePriority};

pub const BASE_EMOTION_QUESTION: &str = "I hope you don't mind me asking, how are you feeling?";

/// Generic starter areas, in the order they are offered.
const GENERIC_AREAS: &[&str] = &["future", "general", "emotions", "family", "living", "food", "current"];

static PARTNER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\bmy (wife|husband|girlfriend|boyfriend|partner|fiance|fiancee)\b").expect("partner pattern")
});
static FAMILY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\bmy (mom|mother|dad|father|parents|sister|brother|son|daughter|kids|children|grandma|grandmother|grandpa|grandfather|family)\b",
    )
    .expect("family pattern")
});

/// Preamble variants for the emotion starter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmotionStrategy {
    NoShare,
    PosOthers,
    PosBot,
    PosBotStory,
    NegOthers,
    NegBot,
    NegBotStory,
    NegoptOthers,
    NegoptBot,
    NegoptBotStory,
}

impl EmotionStrategy {
    pub const ALL: [EmotionStrategy; 10] = [
        Self::NoShare,
        Self::PosOthers,
        Self::PosBot,
        Self::PosBotStory,
        Self::NegOthers,
        Self::NegBot,
        Self::NegBotStory,
        Self::NegoptOthers,
        Self::NegoptBot,
        Self::NegoptBotStory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoShare => "NO_SHARE",
            Self::PosOthers => "POS_OTHERS",
            Self::PosBot => "POS_BOT",
            Self::PosBotStory => "POS_BOT_STORY",
            Self::NegOthers => "NEG_OTHERS",
            Self::NegBot => "NEG_BOT",
            Self::NegBotStory => "NEG_BOT_STORY",
            Self::NegoptOthers => "NEGOPT_OTHERS",
            Self::NegoptBot => "NEGOPT_BOT",
            Self::NegoptBotStory => "NEGOPT_BOT_STORY",
        }
    }

    /// The bot's lead-in before the feelings question.
    pub fn preamble(self) -> String {
        const OPTIMISM: &str = "But I think its important to remember that things will get better.";
        match self {
            Self::NoShare => "I wanted to check in with you.".into(),
            Self::PosOthers => "I've noticed that a lot of people are feeling pretty positive today!".into(),
            Self::PosBot => "I wanted to say that I'm feeling pretty positive today!".into(),
            Self::PosBotStory => format!(
                "{} I just went for a walk outside, and it felt great to get some fresh air.",
                Self::PosBot.preamble()
            ),
            Self::NegOthers => "I've noticed that a lot of people are feeling kind of down recently.".into(),
            Self::NegBot => "I wanted to say that I've been feeling kind of down recently.".into(),
            Self::NegBotStory => format!(
                "{} I've been missing my friends a lot and finding it hard to focus.",
                Self::NegBot.preamble()
            ),
            Self::NegoptOthers => format!("{} {OPTIMISM}", Self::NegOthers.preamble()),
            Self::NegoptBot => format!("{} {OPTIMISM}", Self::NegBot.preamble()),
            Self::NegoptBotStory => format!(
                "{} Just earlier today I took a walk outside and the fresh air helped me get some perspective.",
                Self::NegoptBot.preamble()
            ),
        }
    }
}

impl fmt::Display for EmotionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown emotion strategy `{s}`"))
    }
}

impl Serialize for EmotionStrategy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EmotionStrategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// The full emotion starter question for `strategy`.
pub fn emotion_starter(strategy: EmotionStrategy) -> String {
    format!("{} {BASE_EMOTION_QUESTION}", strategy.preamble())
}

/// Which sample to say, and whether the discussion goes on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionRatioChoice {
    pub index: usize,
    pub text: String,
    pub continues: bool,
}

fn has_question(s: &str) -> bool {
    s.contains('?')
}

/// Continue with the first question-bearing sample when at least a third
/// of the samples ask something; otherwise end on the first statement.
pub fn choose_by_question_ratio(samples: &[String]) -> Option<QuestionRatioChoice> {
    let questions = samples.iter().filter(|s| has_question(s)).count();
    let continues = questions > 0 && 3 * questions >= samples.len();
    let index = samples.iter().position(|s| has_question(s) == continues)?;
    Some(QuestionRatioChoice { index, text: samples[index].clone(), continues })
}

fn time_of_day(hour: u8) -> &'static str {
    match hour {
        0..=10 => "morning",
        11..=16 => "afternoon",
        _ => "evening",
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
struct ChatState {
    active: bool,
    area: Option<String>,
    used_areas: BTreeSet<String>,
    turns: u32,
}

pub struct NeuralChat {
    world: Arc<World>,
}

impl NeuralChat {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }

    /// The starter question for `area` at the conversation's hour.
    pub fn starter(&self, area: &str, snap: &Snapshot) -> Option<String> {
        let tod = time_of_day(snap.hour);
        let starters = &self.world.knowledge.starters;
        let row = starters
            .iter()
            .find(|s| s.area == area && s.time == tod)
            .or_else(|| starters.iter().find(|s| s.area == area && s.time == "any"))?;
        Some(row.text.replace("{emotion}", &emotion_starter(snap.assignments.emotion_strategy)))
    }

    fn open(&self, snap: &Snapshot, area: &str, text: String, priority: PromptPriority) -> PromptCandidate {
        let mut state: ChatState = snap.state(names::NEURAL_CHAT);
        state.active = true;
        state.area = Some(area.to_string());
        state.used_areas.insert(area.to_string());
        state.turns = 0;
        PromptCandidate::new(names::NEURAL_CHAT, text, priority).state(state)
    }
}

impl ResponseGenerator for NeuralChat {
    fn name(&self) -> &str {
        names::NEURAL_CHAT
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let Some(mut state) = snap.continuing_state::<ChatState>(names::NEURAL_CHAT) else { return Ok(None) };
        let nav = &snap.annotations.nav_intent;
        if !state.active || nav.negative || (nav.positive && nav.positive_topic.is_some()) {
            return Ok(None);
        }
        let mut history = snap.transcript();
        history.push(snap.utterance.clone());
        let request = GenerationRequest {
            kind: GenerationKind::Chat,
            history: truncate_history(&history, self.world.max_history_tokens),
            n: self.world.neural_samples,
        };
        let samples = generate_exact(self.world.adapter.as_ref(), &request).map_err(|e| RgError::Adapter(e.to_string()))?;
        let clean: Vec<String> = samples.into_iter().filter(|s| self.world.is_clean(s)).collect();
        let Some(choice) = choose_by_question_ratio(&clean) else { return Ok(None) };
        state.turns += 1;
        state.active = choice.continues;
        Ok(Some(
            ResponseCandidate::new(names::NEURAL_CHAT, choice.text, ResponsePriority::StrongContinue)
                .needs_prompt(!choice.continues)
                .state(state),
        ))
    }

    fn get_prompt(&self, snap: &Snapshot) -> Result<Option<PromptCandidate>, RgError> {
        let state: ChatState = snap.state(names::NEURAL_CHAT);
        if snap.response.as_ref().is_some_and(|r| r.rg == names::LAUNCH) {
            if let Some(text) = self.starter("current", snap) {
                return Ok(Some(self.open(snap, "current", text, PromptPriority::ForceStart)));
            }
        }
        let lowered = snap.utterance.to_lowercase();
        for (re, follow_up) in [(&*PARTNER, "How did you two meet?"), (&*FAMILY, "What do you like to do together?")] {
            if let Some(c) = re.captures(&lowered) {
                let text = format!("You mentioned your {}. {follow_up}", &c[1]);
                return Ok(Some(self.open(snap, "contextual", text, PromptPriority::Contextual)));
            }
        }
        for area in GENERIC_AREAS {
            if state.used_areas.contains(*area) {
                continue;
            }
            if let Some(text) = self.starter(area, snap) {
                return Ok(Some(self.open(snap, area, text, PromptPriority::Generic)));
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{AdapterError, GeneratorAdapter};
    use crate::rgs::testkit::{self, snap, with_state};
    use crate::rgs::ChosenResponse;
    use proptest::prelude::*;

    fn samples(questions: usize, total: usize) -> Vec<String> {
        (0..total).map(|i| if i < questions { format!("q{i}?") } else { format!("s{i}.") }).collect()
    }

    #[test]
    fn ratio_examples() {
        let c = choose_by_question_ratio(&samples(12, 20)).unwrap();
        assert!(c.continues);
        assert_eq!(c.text, "q0?");
        let c = choose_by_question_ratio(&samples(4, 20)).unwrap();
        assert!(!c.continues);
        assert_eq!(c.text, "s4.");
        assert!(choose_by_question_ratio(&[]).is_none());
    }

    proptest! {
        #[test]
        fn continues_iff_a_third_ask(flags in proptest::collection::vec(any::<bool>(), 1..40)) {
            let s: Vec<String> = flags.iter().map(|q| if *q { "what?".to_string() } else { "ok.".to_string() }).collect();
            let q = flags.iter().filter(|f| **f).count();
            match choose_by_question_ratio(&s) {
                Some(c) => {
                    prop_assert_eq!(c.continues, 3 * q >= s.len());
                    prop_assert_eq!(has_question(&c.text), c.continues);
                }
                None => prop_assert!(false, "a choice always exists for non-empty input"),
            }
        }
    }

    #[test]
    fn emotion_starters() {
        assert_eq!(
            emotion_starter(EmotionStrategy::NoShare),
            "I wanted to check in with you. I hope you don't mind me asking, how are you feeling?"
        );
        assert_eq!(
            EmotionStrategy::NegoptBot.preamble(),
            format!("{} But I think its important to remember that things will get better.", EmotionStrategy::NegBot.preamble())
        );
        assert!(EmotionStrategy::NegoptBotStory.preamble().starts_with(&EmotionStrategy::NegoptBot.preamble()));
        assert!("SOMETIMES_SHARE".parse::<EmotionStrategy>().is_err());
        for s in EmotionStrategy::ALL {
            assert_eq!(s.as_str().parse::<EmotionStrategy>().unwrap(), s);
        }
    }

    #[test]
    fn food_starter_follows_the_clock() {
        let world = testkit::world();
        let rg = NeuralChat::new(world.clone());
        let mut s = snap(&world, "hi", None, None);
        for (hour, meal) in [(9, "breakfast"), (14, "lunch"), (19, "dinner")] {
            s.hour = hour;
            assert_eq!(rg.starter("food", &s).unwrap(), format!("What did you have for {meal} today?"));
        }
    }

    #[test]
    fn launch_handoff_forces_the_current_activity_starter() {
        let world = testkit::world();
        let rg = NeuralChat::new(world.clone());
        let mut s = snap(&world, "my name is chris", None, None);
        s.response = Some(ChosenResponse {
            rg: names::LAUNCH.into(),
            text: "Well it's nice to meet you, Chris!".into(),
            priority: ResponsePriority::StrongContinue,
        });
        let p = rg.get_prompt(&s).unwrap().unwrap();
        assert_eq!(p.priority, PromptPriority::ForceStart);
        assert_eq!(p.text, "I hope your afternoon is going well. What are your plans for the rest of today?");
    }

    #[test]
    fn family_mentions_are_contextual() {
        let world = testkit::world();
        let rg = NeuralChat::new(world.clone());
        let p = rg.get_prompt(&snap(&world, "i went hiking with my wife", None, None)).unwrap().unwrap();
        assert_eq!(p.priority, PromptPriority::Contextual);
        assert_eq!(p.text, "You mentioned your wife. How did you two meet?");
    }

    struct Fixed(Vec<String>);
    impl GeneratorAdapter for Fixed {
        fn generate(&self, _r: &GenerationRequest) -> Result<Vec<String>, AdapterError> {
            Ok(self.0.clone())
        }
    }

    struct Down;
    impl GeneratorAdapter for Down {
        fn generate(&self, _r: &GenerationRequest) -> Result<Vec<String>, AdapterError> {
            Err(AdapterError::Unavailable("timeout".into()))
        }
    }

    fn active(world: &World) -> Snapshot {
        let s = snap(world, "i'm going to hang out with friends", None, Some(("What are your plans?", names::NEURAL_CHAT)));
        with_state(s, names::NEURAL_CHAT, ChatState { active: true, area: Some("current".into()), ..Default::default() })
    }

    #[test]
    fn yields_when_the_user_asks_for_a_topic() {
        let world = testkit::world_with(Arc::new(Fixed(samples(12, 20))));
        let s = snap(&world, "let's talk about cats", None, Some(("What are your plans?", names::NEURAL_CHAT)));
        let s = with_state(s, names::NEURAL_CHAT, ChatState { active: true, ..Default::default() });
        assert!(NeuralChat::new(world.clone()).get_response(&s).unwrap().is_none());
    }

    #[test]
    fn continues_or_ends_by_ratio() {
        let world = testkit::world_with(Arc::new(Fixed(samples(12, 20))));
        let r = NeuralChat::new(world.clone()).get_response(&active(&world)).unwrap().unwrap();
        assert!(!r.needs_prompt);
        assert_eq!(r.priority, ResponsePriority::StrongContinue);

        let world = testkit::world_with(Arc::new(Fixed(samples(4, 20))));
        let r = NeuralChat::new(world.clone()).get_response(&active(&world)).unwrap().unwrap();
        assert!(r.needs_prompt);
        assert_eq!(r.new_rg_state["active"], false);
    }

    #[test]
    fn adapter_failure_is_an_error_not_a_candidate() {
        let world = testkit::world_with(Arc::new(Down));
        assert!(NeuralChat::new(world.clone()).get_response(&active(&world)).is_err());
    }
}
