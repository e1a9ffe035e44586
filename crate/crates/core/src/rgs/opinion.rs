//! Exchanges opinions on whitelisted entities under one of three agreement
//! policies, then moves on to a related entity where it always agrees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::{names, words, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::knowledge::OpinionEntry;
use crate::types::{ResponsePriority, Sentiment};

/// Words that show a short reply is still engaged.
pub const AGREEMENT_WORDS: &[&str] = &["same", "me too", "agree", "totally", "exactly", "right"];

static TWEET: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\bi (love|like|admire|adore|hate|don't like|do not like|dislike) (.+?)(?: because (.+))?$")
        .expect("opinion pattern")
});

/// A reply of fewer than four words with no agreement word.
pub fn is_disinterested(utterance: &str) -> bool {
    let w = words(utterance);
    if w.len() >= 4 {
        return false;
    }
    let joined = format!(" {} ", w.join(" "));
    !AGREEMENT_WORDS.iter().any(|a| joined.contains(&format!(" {a} ")))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum OpinionPolicy {
    #[default]
    AlwaysAgree,
    ListenFirstDisagree,
    ConvincedAgree,
}

impl OpinionPolicy {
    pub const ALL: [OpinionPolicy; 3] = [Self::AlwaysAgree, Self::ListenFirstDisagree, Self::ConvincedAgree];
    /// Share of conversations each policy is assigned to, in `ALL` order.
    pub const TRAFFIC: [f64; 3] = [0.5, 0.3, 0.2];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AlwaysAgree => "ALWAYS_AGREE",
            Self::ListenFirstDisagree => "LISTEN_FIRST_DISAGREE",
            Self::ConvincedAgree => "CONVINCED_AGREE",
        }
    }
}

impl fmt::Display for OpinionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpinionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown opinion policy `{s}`"))
    }
}

impl Serialize for OpinionPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for OpinionPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Where the discussion stands; each names the question the bot just asked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpinionPhase {
    #[default]
    Idle,
    /// "Do you like X?"
    AskedOpinion,
    /// Agreed and gave a reason; asked what the user thinks.
    SharedReason,
    /// Asked for the user's reason before disagreeing.
    AskedReason,
    /// Disagreed up front; asked for the user's reason.
    Disagreed,
    /// Asked whether the user agrees with the bot's reason.
    AskedAgree,
    /// "What about Y? Do you like Y?"
    RelatedAskedOpinion,
    RelatedShared,
    RelatedAskedSame,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpinionState {
    pub policy: OpinionPolicy,
    pub phase: OpinionPhase,
    pub entity: Option<String>,
    pub user_sentiment: Sentiment,
    /// `entity|reason` keys already said.
    pub used_reasons: BTreeSet<String>,
    pub discussed: BTreeSet<String>,
    /// Opinions the user has voiced, whether or not Opinion was talking.
    pub known: BTreeMap<String, Sentiment>,
    /// A related entity has already been brought up.
    pub switched: bool,
}

pub struct Opinion {
    world: Arc<World>,
    whitelist: BTreeMap<String, OpinionEntry>,
}

fn polarity(sentiment: Sentiment) -> Sentiment {
    if sentiment == Sentiment::Negative {
        Sentiment::Negative
    } else {
        Sentiment::Positive
    }
}

fn opposite(sentiment: Sentiment) -> Sentiment {
    if sentiment == Sentiment::Negative {
        Sentiment::Positive
    } else {
        Sentiment::Negative
    }
}

fn padded_contains(haystack: &str, needle: &str) -> bool {
    format!(" {} ", haystack.trim()).contains(&format!(" {} ", needle.trim()))
}

impl Opinion {
    /// Reasons that fail the offense screen never make it into the whitelist.
    pub fn new(world: Arc<World>) -> Self {
        let whitelist = world
            .knowledge
            .opinions
            .iter()
            .map(|(id, e)| {
                let mut e = e.clone();
                e.positive.retain(|r| world.is_clean(r));
                e.negative.retain(|r| world.is_clean(r));
                (id.clone(), e)
            })
            .collect();
        Self { world, whitelist }
    }

    fn entry(&self, id: &str) -> Option<&OpinionEntry> {
        self.whitelist.get(id).filter(|e| !e.positive.is_empty() || !e.negative.is_empty())
    }

    fn topic(&self, id: &str) -> String {
        self.whitelist.get(id).map(|e| e.topic.clone()).unwrap_or_else(|| crate::types::display_name(id).to_lowercase())
    }

    /// The first unused reason of the given polarity, marked as used.
    fn take_reason(&self, state: &mut OpinionState, id: &str, sentiment: Sentiment) -> Option<String> {
        let entry = self.entry(id)?;
        let reason = entry.reasons(polarity(sentiment)).iter().find(|r| !state.used_reasons.contains(&format!("{id}|{r}")))?;
        state.used_reasons.insert(format!("{id}|{reason}"));
        Some(reason.clone())
    }

    /// The user's stated opinion on a linked entity, from "i love X because Y".
    fn voiced(&self, snap: &Snapshot) -> Option<(String, Sentiment)> {
        let lowered = snap.utterance.trim().to_lowercase();
        let caps = TWEET.captures(&lowered)?;
        let sentiment = match &caps[1] {
            "hate" | "don't like" | "do not like" | "dislike" => Sentiment::Negative,
            _ => Sentiment::Positive,
        };
        let topic = caps.get(2)?.as_str();
        let entity = snap
            .annotations
            .linker
            .candidates
            .iter()
            .find(|c| padded_contains(topic, &c.span) && self.whitelist.contains_key(&c.entity_id))?;
        Some((entity.entity_id.clone(), sentiment))
    }

    fn learn(&self, state: &mut OpinionState, snap: &Snapshot) -> bool {
        match self.voiced(snap) {
            Some((id, s)) if state.known.get(&id) != Some(&s) => {
                state.known.insert(id, s);
                true
            }
            _ => false,
        }
    }

    fn answer_sentiment(snap: &Snapshot) -> Sentiment {
        if snap.said_yes() {
            Sentiment::Positive
        } else if snap.said_no() {
            Sentiment::Negative
        } else {
            snap.annotations.sentiment
        }
    }

    fn reply(&self, text: String, state: OpinionState, priority: ResponsePriority) -> ResponseCandidate {
        ResponseCandidate::new(names::OPINION, text, priority).state(state)
    }

    /// Ends the discussion and asks for someone else's prompt.
    fn hand_off(&self, mut state: OpinionState, text: String, priority: ResponsePriority) -> ResponseCandidate {
        if let Some(id) = state.entity.take() {
            state.discussed.insert(id);
        }
        state.phase = OpinionPhase::Idle;
        self.reply(text, state, priority).needs_prompt(true)
    }

    fn close(&self, mut state: OpinionState, id: &str) -> ResponseCandidate {
        let t = self.topic(id);
        state.discussed.insert(id.to_string());
        state.entity = None;
        state.phase = OpinionPhase::Idle;
        let text = format!("Thanks for sharing! It's nice to know your likes and dislikes. Do you want to know more about {t}?");
        self.reply(text, state, ResponsePriority::StrongContinue)
    }

    fn switch_or_close(&self, mut state: OpinionState, id: &str) -> ResponseCandidate {
        let related = (!state.switched)
            .then(|| self.entry(id))
            .flatten()
            .and_then(|e| e.related.iter().find(|r| self.entry(r).is_some() && !state.discussed.contains(*r)).cloned());
        let Some(r) = related else { return self.close(state, id) };
        state.discussed.insert(id.to_string());
        state.switched = true;
        state.entity = Some(r.clone());
        state.phase = OpinionPhase::RelatedAskedOpinion;
        let rt = self.topic(&r);
        let directive = self.world.set_if_known(&r);
        self.reply(format!("What about {rt}? Do you like {rt}?"), state, ResponsePriority::StrongContinue).directive(directive)
    }

    /// The policy's reaction once the user's sentiment is known. `asked`
    /// says whether the bot asked for it or the user volunteered it.
    fn react(&self, mut state: OpinionState, id: &str, sentiment: Sentiment, asked: bool, priority: ResponsePriority) -> Option<ResponseCandidate> {
        let t = self.topic(id);
        let pos = sentiment != Sentiment::Negative;
        state.user_sentiment = polarity(sentiment);
        state.entity = Some(id.to_string());
        let text = match state.policy {
            OpinionPolicy::AlwaysAgree => {
                let r = self.take_reason(&mut state, id, sentiment)?;
                state.phase = OpinionPhase::SharedReason;
                if pos {
                    format!("Sounds like you like {t}. Me too! I feel like {r}. What about you?")
                } else {
                    format!("Sounds like you don't like {t}. Me neither! I feel like {r}. What about you?")
                }
            }
            OpinionPolicy::ListenFirstDisagree => {
                self.entry(id)?.reasons(opposite(sentiment)).first()?;
                state.phase = OpinionPhase::AskedReason;
                if pos {
                    format!("What's your favorite thing about {t}?")
                } else {
                    format!("What's your least favorite thing about {t}?")
                }
            }
            OpinionPolicy::ConvincedAgree => {
                let r = self.take_reason(&mut state, id, opposite(sentiment))?;
                state.phase = OpinionPhase::Disagreed;
                match (asked, pos) {
                    (true, true) => format!("Glad to meet a fan of {t}! I have to be honest though, I'm not a big fan of {t} actually. I feel like {r}. But I'm interested to hear why you like {t}?"),
                    (true, false) => format!("Sounds like you're not a fan of {t}. I have to be honest though, I'm actually a big fan of {t}. I feel like {r}. But I'm interested to hear why you don't like {t}?"),
                    (false, true) => format!("Good to hear you like {t}. I have to be honest though, I'm not a big fan of {t}. I feel like {r}, but I would love to hear why you like {t}?"),
                    (false, false) => format!("Sorry to hear you don't like {t}. I have to be honest though, I'm a big fan of {t}. I feel like {r}, but I would love to hear why you don't like {t}?"),
                }
            }
        };
        Some(self.reply(text, state, priority))
    }

    fn related_reaction(&self, mut state: OpinionState, id: &str, sentiment: Sentiment) -> ResponseCandidate {
        let rt = self.topic(id);
        state.user_sentiment = polarity(sentiment);
        let Some(r) = self.take_reason(&mut state, id, sentiment) else { return self.close(state, id) };
        state.phase = OpinionPhase::RelatedShared;
        let text = if sentiment == Sentiment::Negative {
            format!("Me neither! You know, I think the reason I'm not a fan of {rt} is because {r}. What do you think?")
        } else {
            format!("Me too! You know, I think the reason I'm a fan of {rt} is because {r}. What do you think?")
        };
        self.reply(text, state, ResponsePriority::StrongContinue)
    }

    fn continue_discussion(&self, mut state: OpinionState, id: String, snap: &Snapshot) -> Option<ResponseCandidate> {
        let t = self.topic(&id);
        let answering_ask = matches!(state.phase, OpinionPhase::AskedOpinion | OpinionPhase::RelatedAskedOpinion);
        if snap.annotations.nav_intent.negative || (!answering_ask && is_disinterested(&snap.utterance)) {
            return Some(self.hand_off(state, "Okay, no worries.".into(), ResponsePriority::WeakContinue));
        }
        let keep = ResponsePriority::StrongContinue;
        let user = state.user_sentiment;
        let pos = user != Sentiment::Negative;
        match state.phase {
            OpinionPhase::Idle => None,
            OpinionPhase::AskedOpinion | OpinionPhase::RelatedAskedOpinion => {
                let s = Self::answer_sentiment(snap);
                if s == Sentiment::Neutral {
                    let text = format!("That's fair. Not everyone has strong feelings about {t}.");
                    return Some(self.hand_off(state, text, keep));
                }
                if state.phase == OpinionPhase::RelatedAskedOpinion {
                    return Some(self.related_reaction(state, &id, s));
                }
                self.react(state.clone(), &id, s, true, keep).or_else(|| Some(self.switch_or_close(state, &id)))
            }
            OpinionPhase::SharedReason => {
                let Some(r) = self.take_reason(&mut state, &id, user) else { return Some(self.switch_or_close(state, &id)) };
                state.phase = OpinionPhase::AskedAgree;
                let feel = if pos { "love" } else { "don't like" };
                let text = format!("That's so true. That reminds me of another reason I {feel} {t}. I feel like {r}. Do you agree?");
                Some(self.reply(text, state, keep))
            }
            OpinionPhase::AskedReason => {
                let Some(r) = self.take_reason(&mut state, &id, opposite(user)) else { return Some(self.switch_or_close(state, &id)) };
                state.phase = OpinionPhase::AskedAgree;
                let stance = if pos { format!("I'm not a big fan of {t} actually") } else { format!("I'm actually a big fan of {t}") };
                let text = format!("That make sense. I have to be honest though, {stance}. I feel like {r}. Can we agree on that?");
                Some(self.reply(text, state, keep))
            }
            OpinionPhase::Disagreed => {
                let Some(r) = self.take_reason(&mut state, &id, user) else { return Some(self.switch_or_close(state, &id)) };
                let has_related = !state.switched
                    && self
                        .entry(&id)
                        .is_some_and(|e| e.related.iter().any(|x| self.entry(x).is_some() && !state.discussed.contains(x)));
                if has_related {
                    state.phase = OpinionPhase::AskedAgree;
                    let like = if pos { "like" } else { "don't like" };
                    let text = format!(
                        "That make sense. Now that I think about it, there are a few things I {like} about {t}. For example, {r}. What do you think?"
                    );
                    Some(self.reply(text, state, keep))
                } else {
                    let why = if pos { "to like" } else { "not to like" };
                    let text = format!("That make sense. Now that I think about it, one good reason {why} {t} is that {r}.");
                    Some(self.hand_off(state, text, keep))
                }
            }
            OpinionPhase::AskedAgree => Some(self.switch_or_close(state, &id)),
            OpinionPhase::RelatedShared => {
                let Some(r) = self.take_reason(&mut state, &id, user) else { return Some(self.close(state, &id)) };
                state.phase = OpinionPhase::RelatedAskedSame;
                let like = if pos { "like" } else { "don't like" };
                let text = format!("Totally. I also {like} {t} because {r}. Do you feel the same way?");
                Some(self.reply(text, state, keep))
            }
            OpinionPhase::RelatedAskedSame => Some(self.close(state, &id)),
        }
    }

    fn start(&self, mut state: OpinionState, snap: &Snapshot) -> Option<ResponseCandidate> {
        let id = snap.current_entity()?.to_string();
        let entry = self.entry(&id)?;
        if entry.positive.is_empty() || entry.negative.is_empty() || state.discussed.contains(&id) {
            return None;
        }
        if !(snap.entity_changed() || snap.annotations.nav_intent.positive) {
            return None;
        }
        state.policy = snap.assignments.opinion_policy;
        state.switched = false;
        if let Some(s) = state.known.get(&id).copied() {
            return self.react(state, &id, s, false, ResponsePriority::CanStart);
        }
        let t = self.topic(&id);
        state.entity = Some(id);
        state.phase = OpinionPhase::AskedOpinion;
        Some(self.reply(format!("Ok! Do you like {t}?"), state, ResponsePriority::CanStart))
    }
}

impl ResponseGenerator for Opinion {
    fn name(&self) -> &str {
        names::OPINION
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let mut state: OpinionState = snap.state(names::OPINION);
        self.learn(&mut state, snap);
        if snap.holds_floor(names::OPINION) && state.phase != OpinionPhase::Idle {
            if let Some(id) = state.entity.clone() {
                return Ok(self.continue_discussion(state, id, snap));
            }
        }
        state.phase = OpinionPhase::Idle;
        state.entity = None;
        Ok(self.start(state, snap))
    }

    fn update_state_if_not_chosen(&self, snap: &Snapshot) -> Option<Value> {
        let mut state: OpinionState = snap.state(names::OPINION);
        self.learn(&mut state, snap).then(|| serde_json::to_value(state).ok()).flatten()
    }
}
