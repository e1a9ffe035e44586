//! A one-line reaction to a newly raised entity, picked by its category.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{names, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::types::ResponsePriority;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct AckState {
    acknowledged: BTreeSet<String>,
}

pub struct Acknowledgment {
    world: Arc<World>,
}

impl Acknowledgment {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }
}

impl ResponseGenerator for Acknowledgment {
    fn name(&self) -> &str {
        names::ACKNOWLEDGMENT
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        if !snap.entity_changed() {
            return Ok(None);
        }
        let Some(entity) = snap.current_entity().and_then(|id| self.world.entity(id)) else { return Ok(None) };
        let mut state: AckState = snap.state(names::ACKNOWLEDGMENT);
        if state.acknowledged.contains(&entity.id) {
            return Ok(None);
        }
        let acks = &self.world.knowledge.acknowledgments;
        let Some(template) = entity.categories.iter().find_map(|c| acks.get(c)) else { return Ok(None) };
        state.acknowledged.insert(entity.id.clone());
        let text = template.replace("{entity}", entity.name());
        Ok(Some(
            ResponseCandidate::new(names::ACKNOWLEDGMENT, text, ResponsePriority::CanStart).needs_prompt(true).state(state),
        ))
    }
}
