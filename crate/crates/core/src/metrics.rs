//! Engagement metrics over one conversation's log.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::store::ConversationLogEntry;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EngagementMetrics {
    pub turns: usize,
    /// Distinct entities the tracker made current at some point.
    pub distinct_entities: usize,
    /// Mean length in characters.
    pub avg_user_chars: f64,
    pub avg_bot_chars: f64,
}

fn mean(lengths: impl Iterator<Item = usize>) -> f64 {
    let (sum, n) = lengths.fold((0usize, 0usize), |(s, n), l| (s + l, n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Entities come from tracker transitions that moved to a new entity.
pub fn compute_metrics(log: &[ConversationLogEntry]) -> EngagementMetrics {
    let entities: BTreeSet<&str> = log
        .iter()
        .flat_map(|e| &e.debug.tracker)
        .filter(|t| t.after.is_some() && t.after != t.before)
        .filter_map(|t| t.after.as_deref())
        .collect();
    EngagementMetrics {
        turns: log.len(),
        distinct_entities: entities.len(),
        avg_user_chars: mean(log.iter().map(|e| e.user.chars().count())),
        avg_bot_chars: mean(log.iter().map(|e| e.bot.chars().count())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_log_is_all_zero() {
        assert_eq!(compute_metrics(&[]), EngagementMetrics::default());
    }
}
