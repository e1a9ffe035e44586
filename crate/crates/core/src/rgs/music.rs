//! Talks about music by walking the music treelet graph. Offers its topics
//! as prompts, and chains into the next topic on its own when one ends.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{names, step_graph, PromptCandidate, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::knowledge::TopicPrompt;
use crate::types::{EntityDirective, PromptPriority, ResponsePriority};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
struct MusicState {
    node: Option<String>,
    used_topics: BTreeSet<String>,
}

/// The graph node that handles the answer to a topic's question.
fn topic_node(topic: &str) -> Option<&'static str> {
    match topic {
        "instruments" => Some("ask_instrument"),
        "musicians" => Some("ask_musician"),
        "songs" => Some("ask_song"),
        _ => None,
    }
}

pub struct Music {
    world: Arc<World>,
}

impl Music {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }

    fn next_topic(&self, state: &MusicState) -> Option<&TopicPrompt> {
        self.world
            .knowledge
            .music_prompts
            .iter()
            .find(|t| !state.used_topics.contains(&t.topic) && topic_node(&t.topic).is_some())
    }

    fn open_topic(&self, topic: &TopicPrompt, state: &mut MusicState) -> EntityDirective {
        state.used_topics.insert(topic.topic.clone());
        state.node = topic_node(&topic.topic).map(String::from);
        topic.entity.as_deref().map(|e| self.world.set_if_known(e)).unwrap_or_default()
    }
}

impl ResponseGenerator for Music {
    fn name(&self) -> &str {
        names::MUSIC
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let graph = &self.world.knowledge.music_graph;
        let mut state: MusicState = snap.state(names::MUSIC);
        let continuing = snap.holds_floor(names::MUSIC) && state.node.is_some();
        let (node, default_priority) = if continuing {
            (state.node.clone().unwrap_or_default(), ResponsePriority::StrongContinue)
        } else {
            (graph.entry.clone(), ResponsePriority::CanStart)
        };
        let out = step_graph(&self.world, graph, &node, snap, BTreeMap::new())?;
        let Some(mut text) = out.text else { return Ok(None) };
        state.node = out.next.clone();
        if node == "ask_musician" || out.next.as_deref() == Some("ask_musician") {
            state.used_topics.insert("musicians".into());
        }
        let mut needs_prompt = out.needs_prompt;
        let mut directive = out.directive;
        let mut expected = out.expected_types;
        if out.next.is_none() && needs_prompt && out.branch != "declined" {
            if let Some(topic) = self.next_topic(&state).cloned() {
                directive = self.open_topic(&topic, &mut state);
                expected = topic.expected_type.iter().cloned().collect();
                text = format!("{text} {}", topic.text);
                needs_prompt = false;
            }
        }
        Ok(Some(
            ResponseCandidate::new(names::MUSIC, text, out.priority.unwrap_or(default_priority))
                .needs_prompt(needs_prompt)
                .directive(directive)
                .expect(expected)
                .state(state),
        ))
    }

    fn get_prompt(&self, snap: &Snapshot) -> Result<Option<PromptCandidate>, RgError> {
        let mut state: MusicState = snap.state(names::MUSIC);
        let Some(topic) = self.next_topic(&state).cloned() else { return Ok(None) };
        let directive = self.open_topic(&topic, &mut state);
        Ok(Some(
            PromptCandidate::new(names::MUSIC, topic.text.clone(), PromptPriority::Generic)
                .directive(directive)
                .expect(topic.expected_type.clone())
                .state(state),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgs::testkit::{self, snap, with_state};

    #[test]
    fn instruments_are_offered_first() {
        let world = testkit::world();
        let rg = Music::new(world.clone());
        let p = rg.get_prompt(&snap(&world, "whatever", None, None)).unwrap().unwrap();
        assert_eq!(
            p.text,
            "I've been listening to some new music today and I wanted to chat about instruments. If you were a musical instrument which one would you be?"
        );
        assert_eq!(p.directive, EntityDirective::Set("Musical instrument".into()));
        assert!(p.expected_types_next.contains("instrument"));
    }

    #[test]
    fn silent_without_an_instrument_and_chains_after_one() {
        let world = testkit::world();
        let rg = Music::new(world.clone());
        let p = rg.get_prompt(&snap(&world, "whatever", None, None)).unwrap().unwrap();
        let asked = Some((p.text.as_str(), names::MUSIC));

        let s = with_state(snap(&world, "what do you think", None, asked), names::MUSIC, p.new_rg_state.clone());
        assert!(rg.get_response(&s).unwrap().is_none());

        let s = with_state(snap(&world, "the violin", Some("Violin"), asked), names::MUSIC, p.new_rg_state.clone());
        let r = rg.get_response(&s).unwrap().unwrap();
        assert_eq!(r.text, "The violin is a great choice! It has such a beautiful sound. So, who's your favorite musician?");
        assert!(!r.needs_prompt);
        assert!(r.expected_types_next.contains("musician"));
    }
}
