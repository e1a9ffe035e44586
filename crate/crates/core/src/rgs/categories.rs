//! Asks about broad categories (animals, travel, food...) to draw out an
//! entity the user cares about.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{names, PromptCandidate, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::knowledge::CategoryEntry;
use crate::nlp::DialogueAct;
use crate::types::{PromptPriority, ResponsePriority};

const TRANSITION: &str = "There's actually something else I wanted to ask you about.";
const DONT_KNOW: &str = "No worries, that's a tough one.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CategoriesStrategy {
    Question,
    Statement,
    StatementQuestion,
}

impl CategoriesStrategy {
    pub const ALL: [CategoriesStrategy; 3] = [Self::Question, Self::Statement, Self::StatementQuestion];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Question => "QUESTION",
            Self::Statement => "STATEMENT",
            Self::StatementQuestion => "STATEMENT_QUESTION",
        }
    }

    /// The strategy's surface form for one category.
    pub fn surface(self, entry: &CategoryEntry) -> String {
        match self {
            Self::Question => entry.question.clone(),
            Self::Statement => entry.statement.clone(),
            Self::StatementQuestion => format!("{} {}", entry.statement, entry.question),
        }
    }

    fn asks(self) -> bool {
        self != Self::Statement
    }
}

impl fmt::Display for CategoriesStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CategoriesStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown categories strategy `{s}`"))
    }
}

impl Serialize for CategoriesStrategy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CategoriesStrategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
struct CategoriesState {
    used: BTreeSet<String>,
    asked: Option<String>,
}

pub struct Categories {
    world: Arc<World>,
}

impl Categories {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }

    fn next_unused<'a>(&'a self, state: &CategoriesState) -> Option<&'a CategoryEntry> {
        self.world.knowledge.categories.iter().find(|c| !state.used.contains(&c.name))
    }

    fn directive(&self, entry: &CategoryEntry) -> crate::types::EntityDirective {
        entry.entity.as_deref().map(|e| self.world.set_if_known(e)).unwrap_or_default()
    }

    fn ask(&self, mut state: CategoriesState, entry: &CategoryEntry, strategy: CategoriesStrategy) -> (String, CategoriesState) {
        state.used.insert(entry.name.clone());
        state.asked = strategy.asks().then(|| entry.name.clone());
        (strategy.surface(entry), state)
    }
}

impl ResponseGenerator for Categories {
    fn name(&self) -> &str {
        names::CATEGORIES
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let rg = names::CATEGORIES;
        let strategy = snap.assignments.categories_strategy;
        let state: CategoriesState = snap.state(rg);
        if let Some(continuing) = snap.continuing_state::<CategoriesState>(rg).filter(|s| s.asked.is_some()) {
            if snap.act() != DialogueAct::Uncertain {
                // the user named something, or said something another RG should handle
                return Ok(None);
            }
            let Some(entry) = self.next_unused(&continuing) else { return Ok(None) };
            let directive = self.directive(entry);
            let expected = entry.expected_type.clone();
            let (text, state) = self.ask(continuing, entry, strategy);
            return Ok(Some(
                ResponseCandidate::new(rg, format!("{DONT_KNOW} {text}"), ResponsePriority::StrongContinue)
                    .directive(directive)
                    .expect([expected])
                    .needs_prompt(!strategy.asks())
                    .state(state),
            ));
        }
        // the user raised one of the categories directly
        if !snap.entity_changed() {
            return Ok(None);
        }
        let current = snap.current_entity();
        let categories = &self.world.knowledge.categories;
        let Some(entry) = categories.iter().find(|c| c.entity.as_deref() == current && !state.used.contains(&c.name))
        else {
            return Ok(None);
        };
        let expected = entry.expected_type.clone();
        let (text, state) = self.ask(state, entry, strategy);
        Ok(Some(
            ResponseCandidate::new(rg, text, ResponsePriority::CanStart)
                .expect([expected])
                .needs_prompt(!strategy.asks())
                .state(state),
        ))
    }

    fn get_prompt(&self, snap: &Snapshot) -> Result<Option<PromptCandidate>, RgError> {
        let strategy = snap.assignments.categories_strategy;
        let state: CategoriesState = snap.state(names::CATEGORIES);
        let Some(entry) = self.next_unused(&state) else { return Ok(None) };
        let directive = self.directive(entry);
        let expected = entry.expected_type.clone();
        let (surface, state) = self.ask(state, entry, strategy);
        let text = if strategy.asks() { format!("{TRANSITION} {surface}") } else { surface };
        Ok(Some(
            PromptCandidate::new(names::CATEGORIES, text, PromptPriority::Generic)
                .directive(directive)
                .expect([expected])
                .state(state),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::Knowledge;
    use crate::rgs::testkit::{self, snap, with_state};
    use crate::rgs::Assignments;
    use crate::types::EntityDirective;

    fn travel() -> CategoryEntry {
        Knowledge::bundled().categories.iter().find(|c| c.name == "travel").unwrap().clone()
    }

    #[test]
    fn surface_forms() {
        let t = travel();
        assert_eq!(CategoriesStrategy::Question.surface(&t), "Where's a place you would love to visit?");
        assert_eq!(CategoriesStrategy::Statement.surface(&t), "Mexico is one of my favorite places. I love the food and beaches!");
        assert_eq!(
            CategoriesStrategy::StatementQuestion.surface(&t),
            format!("{} {}", t.statement, t.question)
        );
    }

    #[test]
    fn prompt_walks_the_bank_in_order() {
        let world = testkit::world();
        let rg = Categories::new(world.clone());
        let mut s = snap(&world, "no", None, None);
        s.assignments = Assignments { categories_strategy: CategoriesStrategy::Question, ..Default::default() };
        let p = rg.get_prompt(&s).unwrap().unwrap();
        assert_eq!(p.text, "There's actually something else I wanted to ask you about. What's your favorite animal?");
        assert_eq!(p.directive, EntityDirective::Set("Animal".into()));
        assert!(p.expected_types_next.contains("animal"));

        let s = with_state(s, names::CATEGORIES, p.new_rg_state.clone());
        let p = rg.get_prompt(&s).unwrap().unwrap();
        assert_eq!(p.text, "There's actually something else I wanted to ask you about. Where's a place you would love to visit?");
    }

    #[test]
    fn dont_know_gets_a_new_question_and_names_defer() {
        let world = testkit::world();
        let rg = Categories::new(world.clone());
        let asked = CategoriesState { used: ["animal".to_string()].into(), asked: Some("animal".into()) };
        let mk = |u: &str| {
            let mut s = snap(&world, u, None, Some(("What's your favorite animal?", names::CATEGORIES)));
            s.assignments = Assignments { categories_strategy: CategoriesStrategy::Question, ..Default::default() };
            with_state(s, names::CATEGORIES, asked.clone())
        };
        let r = rg.get_response(&mk("i don't know")).unwrap().unwrap();
        assert_eq!(r.text, "No worries, that's a tough one. Where's a place you would love to visit?");
        assert!(rg.get_response(&mk("cat")).unwrap().is_none());
    }

    #[test]
    fn exhausted_bank_gives_nothing() {
        let world = testkit::world();
        let rg = Categories::new(world.clone());
        let used = world.knowledge.categories.iter().map(|c| c.name.clone()).collect();
        let s = with_state(snap(&world, "hi", None, None), names::CATEGORIES, CategoriesState { used, asked: None });
        assert!(rg.get_prompt(&s).unwrap().is_none());
    }
}
