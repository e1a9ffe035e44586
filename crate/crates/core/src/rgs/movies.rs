//! Talks about movies by walking the movies treelet graph, with cast and
//! trivia from the movie table.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{names, step_graph, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::types::{display_name, ResponsePriority};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub(crate) struct GraphState {
    pub node: Option<String>,
    pub slots: BTreeMap<String, String>,
}

pub struct Movies {
    world: Arc<World>,
}

impl Movies {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }

    /// Remembered slots plus what the movie table says about the movie.
    fn slots(&self, snap: &Snapshot, remembered: &BTreeMap<String, String>) -> BTreeMap<String, String> {
        let mut slots = remembered.clone();
        let current_film = snap
            .current_entity()
            .and_then(|id| self.world.entity(id))
            .filter(|e| e.has_category("film"))
            .map(|e| e.id.clone());
        let Some(movie) = remembered.get("movie_id").cloned().or(current_film) else { return slots };
        let kb = &self.world.knowledge.movies;
        if let Some(actor) = kb.cast.get(&movie).and_then(|c| c.first()) {
            slots.entry("actor_id".into()).or_insert_with(|| actor.clone());
            slots.entry("actor".into()).or_insert_with(|| display_name(actor).to_string());
        }
        if let Some(actor) = slots.get("actor_id").cloned() {
            if let Some(other) = kb.filmography.get(&actor).and_then(|f| f.iter().find(|m| **m != movie)) {
                slots.entry("other_movie".into()).or_insert_with(|| display_name(other).to_string());
            }
        }
        if let Some(fact) = kb.facts.get(&movie).and_then(|f| f.first()) {
            slots.entry("fact".into()).or_insert_with(|| fact.clone());
        }
        slots
    }
}

impl ResponseGenerator for Movies {
    fn name(&self) -> &str {
        names::MOVIES
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let graph = &self.world.knowledge.movies_graph;
        let continuing = snap.continuing_state::<GraphState>(names::MOVIES).filter(|s| s.node.is_some());
        let (node, remembered, default_priority) = match &continuing {
            Some(s) => (s.node.clone().unwrap_or_default(), s.slots.clone(), ResponsePriority::StrongContinue),
            None => (graph.entry.clone(), BTreeMap::new(), ResponsePriority::CanStart),
        };
        let out = step_graph(&self.world, graph, &node, snap, self.slots(snap, &remembered))?;
        let Some(text) = out.text else { return Ok(None) };
        let mut slots = remembered;
        slots.extend(out.remember);
        let state = GraphState { node: out.next, slots };
        Ok(Some(
            ResponseCandidate::new(names::MOVIES, text, out.priority.unwrap_or(default_priority))
                .needs_prompt(out.needs_prompt)
                .directive(out.directive)
                .expect(out.expected_types)
                .state(state),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgs::testkit::{self, snap, with_state};
    use crate::types::EntityDirective;

    #[test]
    fn movie_keyword_forces_a_start() {
        let world = testkit::world();
        let rg = Movies::new(world.clone());
        let r = rg.get_response(&snap(&world, "maybe watch a movie", Some("Film"), None)).unwrap().unwrap();
        assert_eq!(r.priority, ResponsePriority::ForceStart);
        assert!(r.text.ends_with("Have you seen any movies recently?"));
        assert_eq!(r.directive, EntityDirective::Set("Film".into()));
        assert!(r.expected_types_next.contains("film"));
    }

    #[test]
    fn walks_movie_then_actor() {
        let world = testkit::world();
        let rg = Movies::new(world.clone());
        let asked = "Have you seen any movies recently?";
        let s = snap(&world, "i saw the matrix", Some("The Matrix"), Some((asked, names::MOVIES)));
        let s = with_state(s, names::MOVIES, GraphState { node: Some("ask_movie".into()), slots: BTreeMap::new() });
        let r = rg.get_response(&s).unwrap().unwrap();
        assert_eq!(r.text, "Nice! Did you like The Matrix?");
        assert_eq!(r.priority, ResponsePriority::StrongContinue);

        let mut s = snap(&world, "yeah it was great", Some("The Matrix"), Some((&r.text, names::MOVIES)));
        s.previous_entity = Some("The Matrix".into());
        let s = with_state(s, names::MOVIES, r.new_rg_state.clone());
        let r = rg.get_response(&s).unwrap().unwrap();
        assert_eq!(
            r.text,
            "Oooh, yeah, I agree. Hey, isn't Keanu Reeves in that movie? What do you think about Keanu Reeves?"
        );
        assert_eq!(r.directive, EntityDirective::Set("Keanu Reeves".into()));

        let s = snap(&world, "can we talk about something else", None, Some((&r.text, names::MOVIES)));
        let s = with_state(s, names::MOVIES, r.new_rg_state.clone());
        let r = rg.get_response(&s).unwrap().unwrap();
        assert_eq!(r.text, "OK, no problem.");
        assert!(r.needs_prompt);
        assert_eq!(r.new_rg_state["node"], serde_json::Value::Null);
    }

    #[test]
    fn unrelated_talk_is_not_ours() {
        let world = testkit::world();
        let rg = Movies::new(world.clone());
        assert!(rg.get_response(&snap(&world, "i like cats", Some("Cat"), None)).unwrap().is_none());
    }
}
