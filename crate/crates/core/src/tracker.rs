//! The entity tracker: one current entity, updated at most three times per
//! turn (after the user utterance, after the response, after the prompt).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::EntityIndex;
use crate::linker::LinkedSpan;
use crate::nlp::Annotations;
use crate::types::EntityDirective;

/// Scores above this may set the entity when backed by navigational intent
/// or an expected type.
pub const LOW_THRESHOLD: f64 = 1_000.0;
/// Scores above this set the entity on their own.
pub const HIGH_THRESHOLD: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub entity_id: String,
    pub turn: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntityTrackerState {
    pub current: Option<String>,
    /// Rejected or completed entities.
    pub finished: BTreeSet<String>,
    /// Categories the last bot turn asked the user for.
    pub expected_types: BTreeSet<String>,
    /// The current entity at the time `expected_types` were declared.
    pub anchor: Option<String>,
    /// Entities the user mentioned with a score above the low threshold,
    /// most recent last, one entry per entity.
    pub user_mentioned: Vec<Mention>,
}

impl EntityTrackerState {
    pub fn is_finished(&self, entity_id: &str) -> bool {
        self.finished.contains(entity_id)
    }

    fn set_current(&mut self, entity_id: Option<String>) {
        if let Some(id) = &entity_id {
            self.finished.remove(id);
        }
        self.current = entity_id;
    }

    fn note_mention(&mut self, entity_id: &str, turn: u64) {
        self.user_mentioned.retain(|m| m.entity_id != entity_id);
        self.user_mentioned.push(Mention { entity_id: entity_id.to_string(), turn });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    User,
    Response,
    Prompt,
    Stop,
}

/// Which phase-1 rule decided the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserRule {
    NegativeNav,
    PositiveNav,
    ExpectedType,
    HighScore,
    /// Expected types went unanswered, so the placeholder entity they were
    /// asked under is dropped.
    ExpectationLapsed,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub phase: Phase,
    pub before: Option<String>,
    pub after: Option<String>,
    /// Phase-1 rules that fired, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<UserRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directive: Option<EntityDirective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Whether `span` occurs as whole words inside `topic`.
fn span_within(span: &str, topic: &str) -> bool {
    let padded = format!(" {} ", topic.trim());
    padded.contains(&format!(" {} ", span.trim()))
}

fn topic_names(candidates: &[LinkedSpan], topic: &str, entity_id: &str) -> bool {
    candidates.iter().any(|c| c.entity_id == entity_id && span_within(&c.span, topic))
}

/// Phase 1: the user's utterance.
pub fn update_after_user(
    state: &EntityTrackerState,
    annotations: &Annotations,
    turn: u64,
) -> (EntityTrackerState, Transition) {
    let mut next = state.clone();
    let before = state.current.clone();
    let nav = &annotations.nav_intent;
    let candidates = &annotations.linker.candidates;
    let mut rules = Vec::new();

    for c in candidates.iter().filter(|c| c.score > LOW_THRESHOLD) {
        next.note_mention(&c.entity_id, turn);
    }

    // (1) negative navigational intent towards the current entity
    if nav.negative {
        if let Some(current) = next.current.clone() {
            let at_current = nav.refers_current_topic
                || match &nav.negative_topic {
                    None => true,
                    Some(topic) => topic_names(candidates, topic, &current),
                };
            if at_current {
                next.finished.insert(current);
                next.current = None;
                rules.push(UserRule::NegativeNav);
            }
        }
        if let Some(topic) = &nav.negative_topic {
            for c in candidates.iter().filter(|c| span_within(&c.span, topic)) {
                if next.current.as_deref() != Some(c.entity_id.as_str()) {
                    next.finished.insert(c.entity_id.clone());
                }
            }
        }
    }

    let expected = std::mem::take(&mut next.expected_types);
    let anchor = next.anchor.take();

    // (2) positive navigational intent with a topic
    let mut chosen: Option<(UserRule, String)> = None;
    if nav.positive {
        if let Some(topic) = &nav.positive_topic {
            if let Some(c) = candidates.iter().find(|c| c.score > LOW_THRESHOLD && span_within(&c.span, topic)) {
                chosen = Some((UserRule::PositiveNav, c.entity_id.clone()));
            }
        }
    }
    // (3) a candidate of the expected type
    if chosen.is_none() && !expected.is_empty() {
        if let Some(c) = candidates
            .iter()
            .find(|c| c.expected_type_match && c.score > LOW_THRESHOLD && !next.is_finished(&c.entity_id))
        {
            chosen = Some((UserRule::ExpectedType, c.entity_id.clone()));
        }
    }
    // (4) a high-scoring candidate
    if chosen.is_none() {
        if let Some(c) = candidates.iter().find(|c| c.score > HIGH_THRESHOLD && !next.is_finished(&c.entity_id)) {
            chosen = Some((UserRule::HighScore, c.entity_id.clone()));
        }
    }

    match chosen {
        Some((rule, entity_id)) => {
            next.set_current(Some(entity_id));
            rules.push(rule);
        }
        None => {
            if !expected.is_empty() && anchor.is_some() && next.current == anchor {
                next.current = None;
                rules.push(UserRule::ExpectationLapsed);
            } else if rules.is_empty() {
                rules.push(UserRule::Unchanged);
            }
        }
    }

    let transition =
        Transition { phase: Phase::User, before, after: next.current.clone(), rules, directive: None, error: None };
    (next, transition)
}

fn apply_directive(
    state: &EntityTrackerState,
    directive: &EntityDirective,
    expected_types: Option<&BTreeSet<String>>,
    index: &EntityIndex,
    phase: Phase,
) -> (EntityTrackerState, Transition) {
    let mut next = state.clone();
    let before = state.current.clone();
    let mut error = None;
    match directive {
        EntityDirective::Set(id) if index.contains(id) => next.set_current(Some(id.clone())),
        EntityDirective::Set(id) => error = Some(format!("SET of unknown entity `{id}` ignored")),
        EntityDirective::Clear => {
            if let Some(current) = next.current.take() {
                next.finished.insert(current);
            }
        }
        EntityDirective::Keep => {}
    }
    if let Some(types) = expected_types {
        next.expected_types = types.clone();
        next.anchor = if types.is_empty() { None } else { next.current.clone() };
    }
    if let Some(e) = &error {
        tracing::warn!(phase = ?phase, "{e}");
    }
    let transition = Transition {
        phase,
        before,
        after: next.current.clone(),
        rules: Vec::new(),
        directive: Some(directive.clone()),
        error,
    };
    (next, transition)
}

/// Phase 2: the winning response's directive and the categories it expects
/// next.
pub fn update_after_response(
    state: &EntityTrackerState,
    directive: &EntityDirective,
    expected_types: &BTreeSet<String>,
    index: &EntityIndex,
) -> (EntityTrackerState, Transition) {
    apply_directive(state, directive, Some(expected_types), index, Phase::Response)
}

/// Phase 3: the chosen prompt's directive. The prompt ends the bot turn, so
/// its expected types replace the response's.
pub fn update_after_prompt(
    state: &EntityTrackerState,
    directive: &EntityDirective,
    expected_types: &BTreeSet<String>,
    index: &EntityIndex,
) -> (EntityTrackerState, Transition) {
    apply_directive(state, directive, Some(expected_types), index, Phase::Prompt)
}

/// The conversation is over: nothing is current any more.
pub fn end_conversation(state: &EntityTrackerState) -> (EntityTrackerState, Transition) {
    let mut next = state.clone();
    next.current = None;
    next.expected_types.clear();
    next.anchor = None;
    let transition = Transition {
        phase: Phase::Stop,
        before: state.current.clone(),
        after: None,
        rules: Vec::new(),
        directive: None,
        error: None,
    };
    (next, transition)
}
