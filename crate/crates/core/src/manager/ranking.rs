//! Picking the response and sampling the prompt.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rgs::{PromptCandidate, ResponseCandidate, DEFAULT_TIE_BREAK};
use crate::types::PromptPriority;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("no response candidates; the fallback generator must always answer")]
    NoResponses,
    #[error("no prompt candidates")]
    NoPrompts,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SamplerConfigError {
    #[error("priority weights sum to {0}, not 1")]
    Sum(String),
    #[error("priority weights must satisfy CURRENT_TOPIC > CONTEXTUAL > GENERIC")]
    Order,
    #[error("weight for {0} is negative or not finite")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub priority_weights: BTreeMap<PromptPriority, f64>,
    /// Missing entries weigh 1.
    pub rg_weights_by_priority: BTreeMap<PromptPriority, BTreeMap<String, f64>>,
    pub tie_break_order: Vec<String>,
    pub rng_seed: Option<u64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        let priority_weights = BTreeMap::from([
            (PromptPriority::CurrentTopic, 0.8),
            (PromptPriority::Contextual, 0.15),
            (PromptPriority::Generic, 0.05),
        ]);
        let rg_weights_by_priority =
            BTreeMap::from([(PromptPriority::Generic, BTreeMap::from([(crate::rgs::names::FALLBACK.to_string(), 0.0)]))]);
        Self {
            priority_weights,
            rg_weights_by_priority,
            tie_break_order: DEFAULT_TIE_BREAK.iter().map(|s| s.to_string()).collect(),
            rng_seed: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerConfigError> {
        let w = |p| self.priority_weights.get(&p).copied().unwrap_or(0.0);
        for p in PromptPriority::SAMPLED {
            if !w(p).is_finite() || w(p) < 0.0 {
                return Err(SamplerConfigError::Invalid(p.to_string()));
            }
        }
        for (p, rgs) in &self.rg_weights_by_priority {
            if let Some((rg, _)) = rgs.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
                return Err(SamplerConfigError::Invalid(format!("{p}/{rg}")));
            }
        }
        let sum: f64 = PromptPriority::SAMPLED.iter().map(|p| w(*p)).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(SamplerConfigError::Sum(format!("{sum}")));
        }
        if !(w(PromptPriority::CurrentTopic) > w(PromptPriority::Contextual)
            && w(PromptPriority::Contextual) > w(PromptPriority::Generic))
        {
            return Err(SamplerConfigError::Order);
        }
        Ok(())
    }

    fn rg_weight(&self, priority: PromptPriority, rg: &str) -> f64 {
        self.rg_weights_by_priority.get(&priority).and_then(|m| m.get(rg)).copied().unwrap_or(1.0)
    }
}

/// Position of `rg` in the tie-break order; unknown RGs sort after all
/// known ones.
pub fn tie_break_position(order: &[String], rg: &str) -> usize {
    order.iter().position(|r| r == rg).unwrap_or(order.len())
}

fn by_tie_break<'a, T>(items: &'a [T], order: &[String], rg: impl Fn(&T) -> &str) -> Vec<&'a T> {
    let mut v: Vec<&T> = items.iter().collect();
    v.sort_by(|a, b| {
        let (ra, rb) = (rg(a), rg(b));
        tie_break_position(order, ra).cmp(&tie_break_position(order, rb)).then_with(|| ra.cmp(rb))
    });
    v
}

/// The highest-priority response, ties going to the RG earliest in
/// `tie_break_order`.
pub fn rank_responses<'a>(
    candidates: &'a [ResponseCandidate],
    tie_break_order: &[String],
) -> Result<&'a ResponseCandidate, SelectionError> {
    let sorted = by_tie_break(candidates, tie_break_order, |c| c.rg.as_str());
    let mut best: Option<&ResponseCandidate> = None;
    for c in sorted {
        if best.is_none_or(|b| c.priority.rank() > b.priority.rank()) {
            best = Some(c);
        }
    }
    best.ok_or(SelectionError::NoResponses)
}

/// A FORCE_START prompt if there is one; otherwise a priority drawn from
/// the configured weights renormalized over the priorities present, then
/// an RG drawn by its weight within that priority.
pub fn sample_prompt<'a, R: Rng + ?Sized>(
    candidates: &'a [PromptCandidate],
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<&'a PromptCandidate, SelectionError> {
    if candidates.is_empty() {
        return Err(SelectionError::NoPrompts);
    }
    let sorted = by_tie_break(candidates, &config.tie_break_order, |c| c.rg.as_str());
    if let Some(forced) = sorted.iter().find(|c| c.priority == PromptPriority::ForceStart) {
        return Ok(forced);
    }
    let present: Vec<PromptPriority> =
        PromptPriority::SAMPLED.into_iter().filter(|p| sorted.iter().any(|c| c.priority == *p)).collect();
    let priority = pick(&present, |p| config.priority_weights.get(p).copied().unwrap_or(0.0), rng);
    let pool: Vec<&PromptCandidate> = sorted.into_iter().filter(|c| c.priority == priority).collect();
    Ok(pick(&pool, |c| config.rg_weight(priority, &c.rg), rng))
}

/// Weighted draw. Zero weights only count when every weight is zero, in
/// which case the draw is uniform.
fn pick<T: Copy, R: Rng + ?Sized>(items: &[T], weight: impl Fn(&T) -> f64, rng: &mut R) -> T {
    let mut weights: Vec<f64> = items.iter().map(|i| weight(i).max(0.0)).collect();
    if weights.iter().all(|w| *w == 0.0) {
        weights.iter_mut().for_each(|w| *w = 1.0);
    }
    match WeightedIndex::new(&weights) {
        Ok(dist) => items[dist.sample(rng)],
        Err(_) => items[0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ResponsePriority;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn resp(rg: &str, p: ResponsePriority) -> ResponseCandidate {
        ResponseCandidate::new(rg, "x", p)
    }

    fn prompt(rg: &str, p: PromptPriority) -> PromptCandidate {
        PromptCandidate::new(rg, "x", p)
    }

    fn order() -> Vec<String> {
        SamplerConfig::default().tie_break_order
    }

    #[test]
    fn force_start_beats_continuing_chat() {
        let c = vec![resp("Neural Chat", ResponsePriority::StrongContinue), resp("Movies", ResponsePriority::ForceStart)];
        assert_eq!(rank_responses(&c, &order()).unwrap().rg, "Movies");
    }

    #[test]
    fn fallbacks_tie_break() {
        let c = vec![resp("Fallback", ResponsePriority::UniversalFallback), resp("Neural Fallback", ResponsePriority::UniversalFallback)];
        assert_eq!(rank_responses(&c, &order()).unwrap().rg, "Neural Fallback");
        assert_eq!(rank_responses(&[], &order()), Err(SelectionError::NoResponses));
    }

    #[test]
    fn only_generic_prompts_still_sample() {
        let c = vec![prompt("Music", PromptPriority::Generic), prompt("Fallback", PromptPriority::Generic)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_prompt(&c, &SamplerConfig::default(), &mut rng).unwrap().rg, "Music");
        }
        let only = vec![prompt("Fallback", PromptPriority::Generic)];
        assert_eq!(sample_prompt(&only, &SamplerConfig::default(), &mut rng).unwrap().rg, "Fallback");
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        let mut c = SamplerConfig::default();
        c.priority_weights.insert(PromptPriority::Generic, 0.5);
        assert!(matches!(c.validate(), Err(SamplerConfigError::Sum(_))));
        let mut c = SamplerConfig::default();
        c.priority_weights = BTreeMap::from([
            (PromptPriority::CurrentTopic, 0.4),
            (PromptPriority::Contextual, 0.4),
            (PromptPriority::Generic, 0.2),
        ]);
        assert_eq!(c.validate(), Err(SamplerConfigError::Order));
    }
}
