//! Response generators and the contract the dialogue manager drives them
//! through.
//!
//! An RG is a stateless object. Everything it knows about a conversation
//! arrives in a [`Snapshot`], and anything it wants to remember goes back
//! out as the `new_rg_state` of a candidate. The manager stores that state
//! only if the candidate is used.

mod acknowledgment;
mod alexa_commands;
mod categories;
mod closing;
mod complaint;
mod fallback;
mod launch;
mod movies;
mod music;
mod neural_chat;
mod neural_fallback;
mod offensive_user;
mod one_turn;
mod opinion;
mod red_question;
mod wiki;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{Entity, EntityIndex};
use crate::knowledge::Knowledge;
use crate::neural::GeneratorAdapter;
use crate::nlp::{Annotations, DialogueAct, OffenseDetector};
use crate::tracker::EntityTrackerState;
use crate::types::{EntityDirective, PromptPriority, ResponsePriority};

pub use acknowledgment::Acknowledgment;
pub use alexa_commands::AlexaCommands;
pub use categories::{Categories, CategoriesStrategy};
pub use closing::ClosingConfirmation;
pub use complaint::{Complaint, ComplaintKind};
pub use fallback::{Fallback, FALLBACK_PROMPT, FALLBACK_RESPONSE};
pub use launch::{extract_name, Launch};
pub use movies::Movies;
pub use music::Music;
pub use neural_chat::{
    choose_by_question_ratio, emotion_starter, EmotionStrategy, NeuralChat, QuestionRatioChoice, BASE_EMOTION_QUESTION,
};
pub use neural_fallback::NeuralFallback;
pub use offensive_user::{OffenseStrategy, OffensiveUser, CRITICAL_RESPONSE};
pub use one_turn::OneTurnScripted;
pub use opinion::{is_disinterested, Opinion, OpinionPhase, OpinionPolicy, OpinionState, AGREEMENT_WORDS};
pub use red_question::RedQuestion;
pub use wiki::{select_snippet, Wiki};

pub mod names {
    pub const OFFENSIVE_USER: &str = "Offensive User";
    pub const LAUNCH: &str = "Launch";
    pub const COMPLAINT: &str = "Complaint";
    pub const CLOSING_CONFIRMATION: &str = "Closing Confirmation";
    pub const ALEXA_COMMANDS: &str = "Alexa Commands";
    pub const RED_QUESTION: &str = "Red Question";
    pub const ONE_TURN_SCRIPTED: &str = "One-Turn Scripted";
    pub const MOVIES: &str = "Movies";
    pub const MUSIC: &str = "Music";
    pub const OPINION: &str = "Opinion";
    pub const WIKI: &str = "Wiki";
    pub const CATEGORIES: &str = "Categories";
    pub const NEURAL_CHAT: &str = "Neural Chat";
    pub const ACKNOWLEDGMENT: &str = "Acknowledgment";
    pub const NEURAL_FALLBACK: &str = "Neural Fallback";
    pub const FALLBACK: &str = "Fallback";
}

/// Default tie-break order, most preferred first.
pub const DEFAULT_TIE_BREAK: [&str; 16] = [
    names::OFFENSIVE_USER,
    names::LAUNCH,
    names::COMPLAINT,
    names::CLOSING_CONFIRMATION,
    names::ALEXA_COMMANDS,
    names::RED_QUESTION,
    names::ONE_TURN_SCRIPTED,
    names::MOVIES,
    names::MUSIC,
    names::OPINION,
    names::WIKI,
    names::CATEGORIES,
    names::NEURAL_CHAT,
    names::ACKNOWLEDGMENT,
    names::NEURAL_FALLBACK,
    names::FALLBACK,
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RgError {
    #[error("generator adapter: {0}")]
    Adapter(String),
    #[error("{0}")]
    Data(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCandidate {
    pub rg: String,
    pub text: String,
    pub priority: ResponsePriority,
    pub needs_prompt: bool,
    pub directive: EntityDirective,
    #[serde(default)]
    pub new_rg_state: Value,
    #[serde(default)]
    pub expected_types_next: BTreeSet<String>,
    #[serde(default)]
    pub ends_conversation: bool,
}

impl ResponseCandidate {
    pub fn new(rg: &str, text: impl Into<String>, priority: ResponsePriority) -> Self {
        Self {
            rg: rg.to_string(),
            text: text.into(),
            priority,
            needs_prompt: false,
            directive: EntityDirective::Keep,
            new_rg_state: Value::Null,
            expected_types_next: BTreeSet::new(),
            ends_conversation: false,
        }
    }

    pub fn needs_prompt(mut self, yes: bool) -> Self {
        self.needs_prompt = yes;
        self
    }

    pub fn directive(mut self, directive: EntityDirective) -> Self {
        self.directive = directive;
        self
    }

    pub fn state(mut self, state: impl Serialize) -> Self {
        self.new_rg_state = serde_json::to_value(state).unwrap_or(Value::Null);
        self
    }

    pub fn expect(mut self, types: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.expected_types_next = types.into_iter().map(Into::into).collect();
        self
    }

    pub fn ends_conversation(mut self) -> Self {
        self.ends_conversation = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCandidate {
    pub rg: String,
    pub text: String,
    pub priority: PromptPriority,
    pub directive: EntityDirective,
    #[serde(default)]
    pub new_rg_state: Value,
    #[serde(default)]
    pub expected_types_next: BTreeSet<String>,
}

impl PromptCandidate {
    pub fn new(rg: &str, text: impl Into<String>, priority: PromptPriority) -> Self {
        Self {
            rg: rg.to_string(),
            text: text.into(),
            priority,
            directive: EntityDirective::Keep,
            new_rg_state: Value::Null,
            expected_types_next: BTreeSet::new(),
        }
    }

    pub fn directive(mut self, directive: EntityDirective) -> Self {
        self.directive = directive;
        self
    }

    pub fn state(mut self, state: impl Serialize) -> Self {
        self.new_rg_state = serde_json::to_value(state).unwrap_or(Value::Null);
        self
    }

    pub fn expect(mut self, types: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.expected_types_next = types.into_iter().map(Into::into).collect();
        self
    }
}

/// One completed user/bot exchange.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub user: String,
    pub bot: String,
    #[serde(default)]
    pub response_rg: Option<String>,
    #[serde(default)]
    pub prompt_rg: Option<String>,
}

impl Exchange {
    /// The RG whose words ended the bot turn, and so the one the user is
    /// answering.
    pub fn floor_holder(&self) -> Option<&str> {
        self.prompt_rg.as_deref().or(self.response_rg.as_deref())
    }
}

/// What an RG last stored, and when.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RgStateRecord {
    pub last_active_turn: u64,
    #[serde(default)]
    pub data: Value,
}

/// Per-conversation experiment arms, fixed at the first turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignments {
    pub opinion_policy: OpinionPolicy,
    pub offense_strategy: OffenseStrategy,
    pub categories_strategy: CategoriesStrategy,
    pub emotion_strategy: EmotionStrategy,
}

impl Default for Assignments {
    fn default() -> Self {
        Self {
            opinion_policy: OpinionPolicy::AlwaysAgree,
            offense_strategy: OffenseStrategy::Avoidance { name: true, prompt: true },
            categories_strategy: CategoriesStrategy::StatementQuestion,
            emotion_strategy: EmotionStrategy::NoShare,
        }
    }
}

/// The response already chosen this turn, visible to prompt generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChosenResponse {
    pub rg: String,
    pub text: String,
    pub priority: ResponsePriority,
}

/// The immutable view of the conversation every RG receives.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub session_id: String,
    /// 1 for the first user turn.
    pub turn: u64,
    pub utterance: String,
    pub annotations: Annotations,
    pub history: Vec<Exchange>,
    /// The current entity before this turn's user utterance was processed.
    pub previous_entity: Option<String>,
    pub tracker: EntityTrackerState,
    pub rg_states: BTreeMap<String, RgStateRecord>,
    pub assignments: Assignments,
    /// Local hour of day when the conversation started, 0..24.
    pub hour: u8,
    /// Set while prompts are being gathered.
    pub response: Option<ChosenResponse>,
}

impl Snapshot {
    pub fn floor_holder(&self) -> Option<&str> {
        self.history.last().and_then(Exchange::floor_holder)
    }

    pub fn holds_floor(&self, rg: &str) -> bool {
        self.floor_holder() == Some(rg)
    }

    pub fn last_bot(&self) -> Option<&str> {
        self.history.last().map(|e| e.bot.as_str())
    }

    pub fn raw_state(&self, rg: &str) -> Option<&Value> {
        self.rg_states.get(rg).map(|r| &r.data).filter(|v| !v.is_null())
    }

    /// The RG's stored state, or its default when absent or unreadable.
    pub fn state<T: DeserializeOwned + Default>(&self, rg: &str) -> T {
        self.raw_state(rg).and_then(|v| serde_json::from_value(v.clone()).ok()).unwrap_or_default()
    }

    /// The RG's stored state, but only while the user is answering it.
    pub fn continuing_state<T: DeserializeOwned + Default>(&self, rg: &str) -> Option<T> {
        self.holds_floor(rg).then(|| self.state(rg))
    }

    pub fn current_entity(&self) -> Option<&str> {
        self.tracker.current.as_deref()
    }

    /// The user's words moved the tracker to a different, non-empty entity.
    pub fn entity_changed(&self) -> bool {
        self.tracker.current.is_some() && self.tracker.current != self.previous_entity
    }

    pub fn act(&self) -> DialogueAct {
        self.annotations.dialogue_act
    }

    pub fn said_yes(&self) -> bool {
        self.annotations.dialogue_act == DialogueAct::PosAnswer
    }

    pub fn said_no(&self) -> bool {
        self.annotations.dialogue_act == DialogueAct::NegAnswer
    }

    pub fn word_count(&self) -> usize {
        self.utterance.split_whitespace().count()
    }

    /// The name the user gave during the launch sequence.
    pub fn user_name(&self) -> Option<String> {
        self.raw_state(names::LAUNCH)?.get("name")?.as_str().map(String::from).filter(|n| !n.is_empty())
    }

    /// Text of every earlier turn, oldest first, alternating user and bot.
    pub fn transcript(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.history.len() * 2 + 1);
        for e in &self.history {
            out.push(e.user.clone());
            if !e.bot.is_empty() {
                out.push(e.bot.clone());
            }
        }
        out
    }
}

/// Shared, read-only resources every RG may consult.
pub struct World {
    pub index: Arc<EntityIndex>,
    pub knowledge: Arc<Knowledge>,
    pub adapter: Arc<dyn GeneratorAdapter>,
    pub offense: OffenseDetector,
    pub stopwords: Arc<HashSet<String>>,
    /// How many samples to draw from the adapter per neural turn.
    pub neural_samples: usize,
    /// Whitespace-token budget for history sent to the adapter.
    pub max_history_tokens: usize,
}

impl World {
    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.index.get(id)
    }

    /// SET when the index knows the entity, otherwise KEEP.
    pub fn set_if_known(&self, id: &str) -> EntityDirective {
        if self.index.contains(id) {
            EntityDirective::Set(id.to_string())
        } else {
            EntityDirective::Keep
        }
    }

    pub fn is_clean(&self, text: &str) -> bool {
        !self.offense.is_offensive(&text.to_lowercase())
    }
}

pub trait ResponseGenerator: Send + Sync {
    fn name(&self) -> &str;

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError>;

    fn get_prompt(&self, _snap: &Snapshot) -> Result<Option<PromptCandidate>, RgError> {
        Ok(None)
    }

    /// Lets an RG learn from a turn it did not win. The returned state
    /// replaces its stored one.
    fn update_state_if_not_chosen(&self, _snap: &Snapshot) -> Option<Value> {
        None
    }
}

/// Every built-in RG, in default tie-break order.
pub fn standard_registry(world: &Arc<World>) -> Vec<Arc<dyn ResponseGenerator>> {
    vec![
        Arc::new(OffensiveUser::new(world.clone())),
        Arc::new(Launch::new()),
        Arc::new(Complaint::new(world.clone())),
        Arc::new(ClosingConfirmation::new(world.clone())),
        Arc::new(AlexaCommands::new(world.clone())),
        Arc::new(RedQuestion::new(world.clone())),
        Arc::new(OneTurnScripted::new(world.clone())),
        Arc::new(Movies::new(world.clone())),
        Arc::new(Music::new(world.clone())),
        Arc::new(Opinion::new(world.clone())),
        Arc::new(Wiki::new(world.clone())),
        Arc::new(Categories::new(world.clone())),
        Arc::new(NeuralChat::new(world.clone())),
        Arc::new(Acknowledgment::new(world.clone())),
        Arc::new(NeuralFallback::new(world.clone())),
        Arc::new(Fallback),
    ]
}

/// Lowercased words with apostrophes kept and other punctuation dropped.
pub(crate) fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

/// Runs one treelet node against the snapshot's user turn.
pub(crate) fn step_graph(
    world: &World,
    graph: &crate::treelet::TreeletGraph,
    node: &str,
    snap: &Snapshot,
    slots: BTreeMap<String, String>,
) -> Result<crate::treelet::StepOutput, RgError> {
    let entity = snap.current_entity().and_then(|id| world.entity(id));
    let mut slots = slots;
    if let Some(name) = snap.user_name() {
        slots.entry("user_name".into()).or_insert(name);
    }
    let input = crate::treelet::StepInput {
        utterance: &snap.utterance,
        annotations: Some(&snap.annotations),
        current_entity: snap.current_entity(),
        current_entity_name: entity.map(|e| e.talkable()),
        current_categories: entity.map(|e| e.categories.clone()).unwrap_or_default(),
        entity_changed: snap.entity_changed(),
        slots,
    };
    crate::treelet::step(graph, node, &input).map_err(|e| RgError::Data(e.to_string()))
}

pub(crate) fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
pub(crate) mod testkit {
    //! Builds snapshots from real annotations for RG unit tests.

    use super::*;
    use crate::corpus::Entity;
    use crate::neural::MockAdapter;
    use crate::nlp::{AnnotationContext, Pipeline, PipelineConfig, Scheduling};
    use crate::resources::Resources;

    pub fn index() -> Arc<EntityIndex> {
        let mut cat = Entity::new("Cat", 20_000, &[("cat", 100), ("cats", 40)]).with_categories(&["animal"]);
        cat.talkable_name = Some("cat".into());
        cat.tils = vec!["cats sleep for around thirteen hours a day".into()];
        cat.article_sentences = vec![
            "The cat is a small domesticated carnivorous mammal.".into(),
            "Cats purr when they are content.".into(),
        ];
        let mut dog = Entity::new("Dog", 20_000, &[("dog", 100), ("dogs", 60)]).with_categories(&["animal"]);
        dog.talkable_name = Some("dog".into());
        let matrix = Entity::new("The Matrix", 30_000, &[("the matrix", 90), ("matrix", 10)]).with_categories(&["film"]);
        let keanu = Entity::new("Keanu Reeves", 15_000, &[("keanu reeves", 50), ("keanu", 10)]).with_categories(&["actor"]);
        let book = Entity::new("Dune (novel)", 12_000, &[("dune", 30)]).with_categories(&["book"]);
        let animal = Entity::new("Animal", 5_000, &[("animals", 10), ("animal", 10)]);
        let film = Entity::new("Film", 5_000, &[("movies", 10), ("film", 10)]);
        let instrument = Entity::new("Musical instrument", 5_000, &[("instrument", 10)]);
        let mut violin = Entity::new("Violin", 15_000, &[("violin", 20)]).with_categories(&["instrument"]);
        violin.talkable_name = Some("violin".into());
        Arc::new(EntityIndex::build(vec![cat, dog, matrix, keanu, book, animal, film, instrument, violin]).unwrap())
    }

    pub fn world() -> Arc<World> {
        world_with(Arc::new(MockAdapter::default()))
    }

    pub fn world_with(adapter: Arc<dyn GeneratorAdapter>) -> Arc<World> {
        let resources = Resources::bundled();
        Arc::new(World {
            index: index(),
            knowledge: Arc::new(Knowledge::bundled().clone()),
            adapter,
            offense: resources.nlp.offense.clone(),
            stopwords: Arc::new(resources.linker_resources.stopwords.clone()),
            neural_samples: 20,
            max_history_tokens: 800,
        })
    }

    pub fn annotate(world: &World, utterance: &str, last_bot: Option<&str>) -> Annotations {
        let resources = Resources::bundled();
        let pipeline = Pipeline::standard(
            Arc::new(resources.nlp.clone()),
            Arc::new(resources.linker()),
            world.index.clone(),
            PipelineConfig::default(),
        );
        let mut ctx = AnnotationContext::new(utterance);
        ctx.last_bot_utterance = last_bot.map(String::from);
        pipeline.annotate_with(ctx, Scheduling::Sequential { seed: 0 }).0
    }

    /// A snapshot for `utterance` with the given current entity, answered
    /// after `last` (bot text and floor holder).
    pub fn snap(world: &World, utterance: &str, current: Option<&str>, last: Option<(&str, &str)>) -> Snapshot {
        let history = last
            .map(|(bot, rg)| vec![Exchange { user: "hi".into(), bot: bot.into(), response_rg: Some(rg.into()), prompt_rg: None }])
            .unwrap_or_default();
        let mut tracker = EntityTrackerState::default();
        tracker.current = current.map(String::from);
        Snapshot {
            session_id: "test".into(),
            turn: history.len() as u64 + 1,
            utterance: utterance.into(),
            annotations: annotate(world, utterance, last.map(|l| l.0)),
            history,
            previous_entity: None,
            tracker,
            rg_states: BTreeMap::new(),
            assignments: Assignments::default(),
            hour: 14,
            response: None,
        }
    }

    pub fn with_state(mut snap: Snapshot, rg: &str, state: impl Serialize) -> Snapshot {
        snap.rg_states.insert(
            rg.to_string(),
            RgStateRecord { last_active_turn: snap.turn.saturating_sub(1), data: serde_json::to_value(state).unwrap() },
        );
        snap
    }
}
