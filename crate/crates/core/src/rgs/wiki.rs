//! Talks about an entity using its article: offers interesting facts, asks
//! open questions, and answers with the article sentence closest to what
//! the user said, reworded by the generator.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{names, words, PromptCandidate, ResponseCandidate, ResponseGenerator, RgError, Snapshot, World};
use crate::corpus::Entity;
use crate::neural::{generate_exact, GenerationKind, GenerationRequest};
use crate::tracker::LOW_THRESHOLD;
use crate::types::{PromptPriority, ResponsePriority};

/// Minimum cosine similarity for a sentence to count as relevant.
pub const SNIPPET_THRESHOLD: f64 = 0.1;

/// A sentence made fit to follow "that": trailing period dropped and a
/// leading article or pronoun lowercased.
fn embedded(sentence: &str) -> String {
    const LEADING: &[&str] = &["The", "A", "An", "It", "Its", "They", "There", "This", "These", "In", "On"];
    let s = sentence.trim().trim_end_matches('.');
    match s.split_once(' ') {
        Some((first, rest)) if LEADING.contains(&first) => format!("{} {rest}", first.to_lowercase()),
        _ => s.to_string(),
    }
}

const GENERIC_QUESTION: &str = "What do you find interesting about {entity}?";

fn terms(text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    words(text).into_iter().filter(|w| !stopwords.contains(w)).collect()
}

/// Cosine similarity of the utterance to every sentence, using raw term
/// counts weighted by `ln(1 + N/df)` with document frequencies taken over
/// the sentences.
pub(crate) fn snippet_scores(utterance: &str, sentences: &[String], stopwords: &HashSet<String>) -> Vec<f64> {
    let docs: Vec<HashMap<String, f64>> = sentences
        .iter()
        .map(|s| {
            let mut tf = HashMap::new();
            for t in terms(s, stopwords) {
                *tf.entry(t).or_insert(0.0) += 1.0;
            }
            tf
        })
        .collect();
    let n = docs.len() as f64;
    let mut df: HashMap<&str, f64> = HashMap::new();
    for d in &docs {
        for t in d.keys() {
            *df.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
    }
    let idf = |t: &str| df.get(t).map(|d| (1.0 + n / d).ln()).unwrap_or(0.0);
    let weigh = |tf: &HashMap<String, f64>| -> HashMap<String, f64> {
        tf.iter().map(|(t, c)| (t.clone(), c * idf(t))).filter(|(_, w)| *w > 0.0).collect()
    };
    let mut q = HashMap::new();
    for t in terms(utterance, stopwords) {
        *q.entry(t).or_insert(0.0) += 1.0;
    }
    let q = weigh(&q);
    let norm = |v: &HashMap<String, f64>| v.values().map(|w| w * w).sum::<f64>().sqrt();
    let qn = norm(&q);
    docs.iter()
        .map(|d| {
            let d = weigh(d);
            let dn = norm(&d);
            if qn == 0.0 || dn == 0.0 {
                return 0.0;
            }
            q.iter().map(|(t, w)| w * d.get(t).copied().unwrap_or(0.0)).sum::<f64>() / (qn * dn)
        })
        .collect()
}

/// Scores closer than this are ties; summation order alone can separate
/// two sentences with the same terms by a few ulps.
const TIE_EPSILON: f64 = 1e-12;

fn best(scores: &[f64], usable: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
    let mut out: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s < SNIPPET_THRESHOLD || !usable(i) {
            continue;
        }
        if out.is_none_or(|(_, b)| s > b + TIE_EPSILON) {
            out = Some((i, s));
        }
    }
    out
}

/// The index and score of the sentence most similar to `utterance`, if any
/// reaches [`SNIPPET_THRESHOLD`]. The earliest sentence wins ties.
pub fn select_snippet(utterance: &str, sentences: &[String], stopwords: &HashSet<String>) -> Option<(usize, f64)> {
    best(&snippet_scores(utterance, sentences, stopwords), |_| true)
}

fn overlap(a: &str, b: &str) -> usize {
    let b: HashSet<String> = words(b).into_iter().collect();
    words(a).into_iter().collect::<HashSet<_>>().intersection(&b).count()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Stage {
    #[default]
    Idle,
    /// Offered an interesting fact about the entity.
    OfferedFact,
    /// Reminded the user of an entity they mentioned earlier.
    OfferedTopic,
    /// Told a fact and asked what the user thinks.
    ToldFact,
    /// Asked an open question about the entity.
    AskedOpen,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
struct WikiState {
    entity: Option<String>,
    stage: Stage,
    offered: BTreeSet<String>,
    discussed: BTreeSet<String>,
    /// `entity|index` keys of facts and sentences already used.
    used: BTreeSet<String>,
    /// Open questions asked so far per category, to rotate templates.
    questions_asked: BTreeMap<String, usize>,
}

impl WikiState {
    fn finish(&mut self) {
        if let Some(id) = self.entity.take() {
            self.discussed.insert(id);
        }
        self.stage = Stage::Idle;
    }
}

pub struct Wiki {
    world: Arc<World>,
}

impl Wiki {
    pub fn new(world: Arc<World>) -> Self {
        Self { world }
    }

    fn content(&self, id: &str) -> Option<&Entity> {
        self.world.entity(id).filter(|e| e.has_wiki_content())
    }

    fn unused_fact(&self, state: &WikiState, e: &Entity) -> Option<(String, String)> {
        let tils = e.tils.iter().enumerate().map(|(i, t)| (format!("{}|til{i}", e.id), t));
        let sentences = e.article_sentences.iter().enumerate().map(|(i, s)| (format!("{}|{i}", e.id), s));
        tils.chain(sentences)
            .find(|(k, t)| !state.used.contains(k) && self.world.is_clean(t))
            .map(|(k, t)| (k, embedded(t)))
    }

    /// The next open question for `e`, rotating through its category's
    /// templates.
    fn open_question(&self, state: &mut WikiState, e: &Entity) -> String {
        let templates = &self.world.knowledge.wiki_questions;
        let found = e.categories.iter().find_map(|c| templates.get(&c.to_lowercase()).map(|t| (c.to_lowercase(), t)));
        let template = match found {
            Some((category, list)) if !list.is_empty() => {
                let n = state.questions_asked.entry(category).or_insert(0);
                let t = list[*n % list.len()].clone();
                *n += 1;
                t
            }
            _ => GENERIC_QUESTION.to_string(),
        };
        template.replace("{entity}", e.name())
    }

    fn ask_open(&self, mut state: WikiState, e: &Entity, prefix: Option<String>, priority: ResponsePriority) -> ResponseCandidate {
        let q = self.open_question(&mut state, e);
        state.entity = Some(e.id.clone());
        state.stage = Stage::AskedOpen;
        let text = match prefix {
            Some(p) => format!("{p} {q}"),
            None => q,
        };
        ResponseCandidate::new(names::WIKI, text, priority).state(state)
    }

    fn hand_off(&self, mut state: WikiState, text: &str) -> ResponseCandidate {
        state.finish();
        ResponseCandidate::new(names::WIKI, text, ResponsePriority::StrongContinue).needs_prompt(true).state(state)
    }

    /// Rewords `knowledge`, keeping the clean sample closest to it.
    fn paraphrase(&self, knowledge: &str, snap: &Snapshot) -> Result<String, RgError> {
        let request = GenerationRequest {
            kind: GenerationKind::Paraphrase { knowledge: knowledge.to_string() },
            history: vec![snap.utterance.clone()],
            n: self.world.neural_samples.max(1),
        };
        let samples =
            generate_exact(self.world.adapter.as_ref(), &request).map_err(|e| RgError::Adapter(e.to_string()))?;
        let mut best: Option<(usize, String)> = None;
        for s in samples.into_iter().filter(|s| !s.trim().is_empty() && self.world.is_clean(s)) {
            let o = overlap(&s, knowledge);
            if best.as_ref().is_none_or(|(b, _)| o > *b) {
                best = Some((o, s));
            }
        }
        Ok(best.map(|(_, s)| s).unwrap_or_else(|| format!("{knowledge}.")))
    }

    /// Another entity the user linked this turn that Wiki could move to.
    fn switch_target(&self, state: &WikiState, current: &str, snap: &Snapshot) -> Option<&Entity> {
        let mut linked: Vec<_> = snap
            .annotations
            .linker
            .candidates
            .iter()
            .filter(|c| c.score > LOW_THRESHOLD && c.entity_id != current && !state.discussed.contains(&c.entity_id))
            .collect();
        linked.sort_by(|a, b| b.score.total_cmp(&a.score));
        linked.into_iter().find_map(|c| self.content(&c.entity_id))
    }

    fn answer_open(&self, mut state: WikiState, e: &Entity, snap: &Snapshot) -> Result<ResponseCandidate, RgError> {
        let scores = snippet_scores(&snap.utterance, &e.article_sentences, &self.world.stopwords);
        let chosen = best(&scores, |i| {
            !state.used.contains(&format!("{}|{i}", e.id)) && self.world.is_clean(&e.article_sentences[i])
        });
        let Some((i, _)) = chosen else {
            if let Some((key, fact)) = self.unused_fact(&state, e) {
                state.used.insert(key);
                state.stage = Stage::ToldFact;
                let text = format!("That's really interesting. I also learned that {fact}. What do you think about that?");
                return Ok(ResponseCandidate::new(names::WIKI, text, ResponsePriority::StrongContinue).state(state));
            }
            return Ok(self.hand_off(state, "That's really interesting."));
        };
        state.used.insert(format!("{}|{i}", e.id));
        let said = self.paraphrase(e.article_sentences[i].trim().trim_end_matches('.'), snap)?;
        if let Some(next) = self.switch_target(&state, &e.id, snap) {
            state.discussed.insert(e.id.clone());
            let directive = self.world.set_if_known(&next.id);
            return Ok(self.ask_open(state, next, Some(said), ResponsePriority::StrongContinue).directive(directive));
        }
        Ok(self.hand_off(state, &said))
    }

    fn respond(&self, mut state: WikiState, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let Some(e) = state.entity.as_deref().and_then(|id| self.content(id)) else { return Ok(None) };
        let declined = snap.said_no() || snap.annotations.nav_intent.negative;
        let accepted = snap.said_yes() || snap.annotations.nav_intent.positive;
        let keep = ResponsePriority::StrongContinue;
        match state.stage {
            Stage::Idle => Ok(None),
            Stage::OfferedFact | Stage::OfferedTopic if declined => Ok(Some(self.hand_off(state, "OK, no problem."))),
            Stage::OfferedFact => {
                let Some((key, fact)) = self.unused_fact(&state, e) else { return Ok(Some(self.hand_off(state, "OK."))) };
                state.used.insert(key);
                state.stage = Stage::ToldFact;
                let text = format!("I learned that {fact}. What do you think about that?");
                Ok(Some(ResponseCandidate::new(names::WIKI, text, keep).state(state)))
            }
            Stage::OfferedTopic if accepted => Ok(Some(self.ask_open(state, e, None, keep))),
            Stage::OfferedTopic => Ok(None),
            Stage::ToldFact if declined => Ok(Some(self.hand_off(state, "OK, no problem."))),
            Stage::ToldFact => Ok(Some(self.ask_open(state, e, None, keep))),
            Stage::AskedOpen if declined => Ok(Some(self.hand_off(state, "OK, no problem."))),
            Stage::AskedOpen => self.answer_open(state, e, snap).map(Some),
        }
    }

    fn start(&self, mut state: WikiState, snap: &Snapshot) -> Option<ResponseCandidate> {
        let e = snap.current_entity().and_then(|id| self.content(id))?;
        if state.discussed.contains(&e.id) {
            return None;
        }
        let invited = (snap.entity_changed() && snap.annotations.nav_intent.positive) || snap.said_yes();
        if !invited {
            return None;
        }
        state.offered.insert(e.id.clone());
        Some(self.ask_open(state, e, None, ResponsePriority::CanStart))
    }
}

impl ResponseGenerator for Wiki {
    fn name(&self) -> &str {
        names::WIKI
    }

    fn get_response(&self, snap: &Snapshot) -> Result<Option<ResponseCandidate>, RgError> {
        let mut state: WikiState = snap.state(names::WIKI);
        if snap.holds_floor(names::WIKI) {
            if let Some(r) = self.respond(state.clone(), snap)? {
                return Ok(Some(r));
            }
        }
        state.entity = None;
        state.stage = Stage::Idle;
        Ok(self.start(state, snap))
    }

    fn get_prompt(&self, snap: &Snapshot) -> Result<Option<PromptCandidate>, RgError> {
        let mut state: WikiState = snap.state(names::WIKI);
        let fresh = |s: &WikiState, id: &str| !s.offered.contains(id) && !s.discussed.contains(id);
        if let Some(e) = snap.current_entity().and_then(|id| self.content(id)) {
            if fresh(&state, &e.id) && self.unused_fact(&state, e).is_some() {
                state.offered.insert(e.id.clone());
                state.entity = Some(e.id.clone());
                state.stage = Stage::OfferedFact;
                let text = format!("Wanna know something interesting about {}?", e.talkable());
                return Ok(Some(PromptCandidate::new(names::WIKI, text, PromptPriority::CurrentTopic).state(state)));
            }
        }
        let current = snap.current_entity();
        let earlier = snap.tracker.user_mentioned.iter().rev().find_map(|m| {
            let id = m.entity_id.as_str();
            let usable = fresh(&state, id) && Some(id) != current && !snap.tracker.is_finished(id);
            usable.then(|| self.content(id)).flatten()
        });
        let Some(e) = earlier else { return Ok(None) };
        state.offered.insert(e.id.clone());
        state.entity = Some(e.id.clone());
        state.stage = Stage::OfferedTopic;
        let text = format!("I remember you mentioned {}. Would you like to talk more about it?", e.name());
        let directive = self.world.set_if_known(&e.id);
        Ok(Some(PromptCandidate::new(names::WIKI, text, PromptPriority::Contextual).directive(directive).state(state)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgs::testkit::{self, snap, with_state};
    use proptest::prelude::*;

    fn stop() -> HashSet<String> {
        ["the", "a", "is", "to", "and", "of"].iter().map(|s| s.to_string()).collect()
    }

    /// Independent reimplementation over dense vectors.
    fn oracle(utterance: &str, sentences: &[String], stop: &HashSet<String>) -> Vec<f64> {
        let toks: Vec<Vec<String>> = sentences.iter().map(|s| terms(s, stop)).collect();
        let mut vocab: Vec<String> = toks.iter().flatten().cloned().collect();
        vocab.sort();
        vocab.dedup();
        let n = sentences.len() as f64;
        let idf: Vec<f64> = vocab
            .iter()
            .map(|v| {
                let df = toks.iter().filter(|t| t.contains(v)).count() as f64;
                (1.0 + n / df).ln()
            })
            .collect();
        let vec_of = |t: &[String]| -> Vec<f64> {
            vocab.iter().zip(&idf).map(|(v, w)| t.iter().filter(|x| *x == v).count() as f64 * w).collect()
        };
        let q = vec_of(&terms(utterance, stop));
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        toks.iter()
            .map(|t| {
                let d = vec_of(t);
                let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                if qn == 0.0 || dn == 0.0 {
                    0.0
                } else {
                    q.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / (qn * dn)
                }
            })
            .collect()
    }

    proptest! {
        #[test]
        fn scores_match_the_dense_oracle(
            sentences in proptest::collection::vec(proptest::collection::vec("(cat|dog|purr|the|fluffy|neo|is|run)", 1..8), 1..6),
            query in proptest::collection::vec("(cat|dog|purr|the|fluffy|neo|zebra)", 0..6),
        ) {
            let sentences: Vec<String> = sentences.iter().map(|s| s.join(" ")).collect();
            let query = query.join(" ");
            let got = snippet_scores(&query, &sentences, &stop());
            let want = oracle(&query, &sentences, &stop());
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() < 1e-9, "{g} vs {w}");
                prop_assert!((-1e-9..=1.0 + 1e-9).contains(g));
            }
            match select_snippet(&query, &sentences, &stop()) {
                Some((i, s)) => {
                    prop_assert!(s >= SNIPPET_THRESHOLD);
                    prop_assert!(want.iter().all(|w| *w <= s + 1e-9));
                    prop_assert!(want[..i].iter().all(|w| *w < s - TIE_EPSILON / 10.0));
                }
                None => prop_assert!(want.iter().all(|w| *w < SNIPPET_THRESHOLD)),
            }
        }
    }

    #[test]
    fn embedded_facts_drop_the_capital_on_articles_only() {
        assert_eq!(embedded("The cat is a small mammal."), "the cat is a small mammal");
        assert_eq!(embedded("Neo was portrayed by Keanu Reeves."), "Neo was portrayed by Keanu Reeves");
    }

    #[test]
    fn picks_the_matching_sentence() {
        let sentences = vec!["Neo is the chosen one.".to_string(), "Morpheus trains Neo in jujitsu.".to_string()];
        assert_eq!(select_snippet("morpheus teaching jujitsu to neo", &sentences, &stop()).unwrap().0, 1);
        assert!(select_snippet("pizza", &sentences, &stop()).is_none());
    }

    #[test]
    fn offers_a_fact_about_the_current_entity_then_tells_it() {
        let world = testkit::world();
        let rg = Wiki::new(world.clone());
        let s = snap(&world, "i love cats", Some("Cat"), None);
        let p = rg.get_prompt(&s).unwrap().unwrap();
        assert_eq!(p.text, "Wanna know something interesting about cat?");
        assert_eq!(p.priority, PromptPriority::CurrentTopic);

        let next = with_state(snap(&world, "yes", Some("Cat"), Some((&p.text, names::WIKI))), names::WIKI, &p.new_rg_state);
        let r = rg.get_response(&next).unwrap().unwrap();
        assert!(r.text.contains("thirteen hours"), "{}", r.text);
        assert_eq!(r.priority, ResponsePriority::StrongContinue);
    }

    #[test]
    fn reminds_of_earlier_mentions_most_recent_first() {
        let world = testkit::world();
        let rg = Wiki::new(world.clone());
        let mut s = snap(&world, "ok", None, None);
        for (i, id) in ["Dune (novel)", "Cat"].iter().enumerate() {
            s.tracker.user_mentioned.push(crate::tracker::Mention { entity_id: id.to_string(), turn: i as u64 });
        }
        let p = rg.get_prompt(&s).unwrap().unwrap();
        assert_eq!(p.text, "I remember you mentioned Cat. Would you like to talk more about it?");
        assert_eq!(p.priority, PromptPriority::Contextual);
        assert_eq!(p.directive, crate::types::EntityDirective::Set("Cat".into()));

        let offered = with_state(s, names::WIKI, &p.new_rg_state);
        assert!(rg.get_prompt(&offered).unwrap().is_none());
    }

    #[test]
    fn open_questions_rotate_per_category() {
        let world = testkit::world();
        let rg = Wiki::new(world.clone());
        let cat = world.entity("Cat").unwrap();
        let mut state = WikiState::default();
        let a = rg.open_question(&mut state, cat);
        assert_eq!(a, "What do you find most fascinating about Cat?");
        assert_eq!(state.questions_asked["animal"], 1);
        let keanu = world.entity("Keanu Reeves").unwrap();
        assert_eq!(rg.open_question(&mut state, keanu), "What do you find interesting about Keanu Reeves?");
    }
}
