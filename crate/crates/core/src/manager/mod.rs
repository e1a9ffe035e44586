//! The per-turn conductor.
//!
//! A turn runs: annotation, tracker update for the user's words, every
//! RG's `get_response` in parallel, ranking, tracker update for the chosen
//! response, then (if the response asks for it) every other RG's
//! `get_prompt` in parallel, prompt sampling and a last tracker update.
//! The engine holds no per-session memory; everything lives in the
//! [`SessionRecord`].

pub mod ranking;

use std::collections::BTreeMap;
use std::sync::{Arc, LazyLock};
use std::time::{Duration, Instant};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::concurrency::{run_all, Job, JobStatus};
use crate::nlp::{AnnotationContext, Annotations, Pipeline, PipelineReport, Scheduling};
use crate::rgs::{
    names, Assignments, CategoriesStrategy, ChosenResponse, EmotionStrategy, Exchange, Fallback, OffenseStrategy,
    OpinionPolicy, PromptCandidate, ResponseCandidate, ResponseGenerator, RgError, RgStateRecord, Snapshot, World,
};
use crate::store::{ConversationLogEntry, SessionRecord, Store, StoreError};
use crate::tracker::{self, Transition};
use crate::types::{PromptPriority, ResponsePriority};

pub use ranking::{rank_responses, sample_prompt, tie_break_position, SamplerConfig, SamplerConfigError, SelectionError};

static STOP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:alexa,? )?(?:(?:i want to|i'd like to|i would like to|i wanna|let's|can we|please|just) )?(?:stop|quit|exit|end)(?: (?:talking|chatting|the conversation|this conversation|this chat|this))?(?: (?:now|please))*$",
    )
    .expect("stop pattern")
});

/// An explicit request to end the conversation. Vaguer closings are left
/// to the Closing Confirmation RG.
pub fn detect_stop(utterance: &str) -> bool {
    let cleaned: String =
        utterance.to_lowercase().chars().filter(|c| !matches!(c, '.' | '!' | '?')).collect::<String>();
    STOP.is_match(cleaned.split_whitespace().collect::<Vec<_>>().join(" ").as_str())
}

/// What happened when one RG was asked for a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Candidate,
    Declined,
    Error,
    Panicked,
    TimedOut,
    /// Returned a candidate that breaks the candidate contract.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgRun<T> {
    pub rg: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_ms: f64,
}

/// Everything worth inspecting about one turn.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurnDebug {
    pub turn_number: u64,
    pub annotations: Annotations,
    pub pipeline: PipelineReport,
    pub responses: Vec<RgRun<ResponseCandidate>>,
    pub response_rg: Option<String>,
    pub response_priority: Option<ResponsePriority>,
    pub response_text: String,
    pub prompts: Vec<RgRun<PromptCandidate>>,
    pub prompt_rg: Option<String>,
    pub prompt_priority: Option<PromptPriority>,
    pub prompt_text: Option<String>,
    /// Tracker transitions in phase order.
    pub tracker: Vec<Transition>,
    /// The current entity once the turn is over.
    pub entity: Option<String>,
    pub stop_detected: bool,
    pub conversation_ended: bool,
    pub assignments: Assignments,
    pub hour: u8,
    pub timings_ms: BTreeMap<String, f64>,
}

/// Experiment arms, seed and clock for a new session. Unset fields are
/// drawn at random from the session seed. Ignored after the first turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionOverrides {
    pub opinion_policy: Option<OpinionPolicy>,
    pub offense_strategy: Option<OffenseStrategy>,
    pub categories_strategy: Option<CategoriesStrategy>,
    pub emotion_strategy: Option<EmotionStrategy>,
    pub seed: Option<u64>,
    pub start_hour: Option<u8>,
}

impl SessionOverrides {
    /// Fields set in `self` win over `base`.
    pub fn or(&self, base: &SessionOverrides) -> SessionOverrides {
        SessionOverrides {
            opinion_policy: self.opinion_policy.or(base.opinion_policy),
            offense_strategy: self.offense_strategy.or(base.offense_strategy),
            categories_strategy: self.categories_strategy.or(base.categories_strategy),
            emotion_strategy: self.emotion_strategy.or(base.emotion_strategy),
            seed: self.seed.or(base.seed),
            start_hour: self.start_hour.or(base.start_hour),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub sampler: SamplerConfig,
    /// Budget for each RG fan-out.
    pub rg_timeout: Duration,
    /// Defaults for new sessions; the seed falls back to 0.
    pub session: SessionOverrides,
    /// Run annotators one at a time instead of in parallel.
    pub sequential_annotation: bool,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            rg_timeout: Duration::from_secs(1),
            session: SessionOverrides::default(),
            sequential_annotation: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnInput {
    pub session_id: String,
    pub utterance: String,
    #[serde(default)]
    pub overrides: SessionOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub session_id: String,
    pub turn_number: u64,
    pub bot_utterance: String,
    pub conversation_ended: bool,
    pub debug: TurnDebug,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("session id must not be empty")]
    EmptySession,
    #[error("conversation `{0}` has already ended")]
    Ended(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// FNV-1a over the seed, the session id and the turn.
pub fn derive_seed(seed: u64, session_id: &str, turn: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = seed.to_le_bytes().into_iter().chain(session_id.bytes()).chain([0xff]).chain(turn.to_le_bytes());
    for b in bytes {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A new session's record with its experiment arms and clock fixed.
pub fn new_session(session_id: &str, overrides: &SessionOverrides) -> SessionRecord {
    let seed = overrides.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, session_id, 0));
    let opinion = WeightedIndex::new(OpinionPolicy::TRAFFIC).map(|d| OpinionPolicy::ALL[d.sample(&mut rng)]);
    let assignments = Assignments {
        opinion_policy: overrides.opinion_policy.unwrap_or(opinion.unwrap_or_default()),
        offense_strategy: overrides
            .offense_strategy
            .unwrap_or(*OffenseStrategy::ALL.choose(&mut rng).expect("strategies")),
        categories_strategy: overrides
            .categories_strategy
            .unwrap_or(*CategoriesStrategy::ALL.choose(&mut rng).expect("strategies")),
        emotion_strategy: overrides
            .emotion_strategy
            .unwrap_or(*EmotionStrategy::ALL.choose(&mut rng).expect("strategies")),
    };
    let hour = overrides.start_hour.map(|h| h % 24).unwrap_or_else(|| rng.random_range(0..24));
    SessionRecord { session_id: session_id.to_string(), assignments, hour, seed, ..Default::default() }
}

fn valid_response(rg: &str, c: &ResponseCandidate) -> Result<(), String> {
    if c.rg != rg {
        return Err(format!("candidate claims to come from `{}`", c.rg));
    }
    if c.text.trim().is_empty() {
        return Err("empty response text".into());
    }
    if c.priority == ResponsePriority::UniversalFallback && rg != names::FALLBACK && rg != names::NEURAL_FALLBACK {
        return Err("UNIVERSAL_FALLBACK is reserved for the fallback generators".into());
    }
    Ok(())
}

fn valid_prompt(rg: &str, c: &PromptCandidate) -> Result<(), String> {
    if c.rg != rg {
        return Err(format!("candidate claims to come from `{}`", c.rg));
    }
    if c.text.trim().is_empty() {
        return Err("empty prompt text".into());
    }
    Ok(())
}

fn run_status<T>(
    rg: &str,
    status: &JobStatus,
    elapsed_ms: f64,
    result: Option<Result<Option<T>, RgError>>,
    validate: impl Fn(&str, &T) -> Result<(), String>,
) -> RgRun<T> {
    let (status, candidate, error) = match (status, result) {
        (JobStatus::Panicked(msg), _) => (RunStatus::Panicked, None, Some(msg.clone())),
        (JobStatus::TimedOut, _) | (JobStatus::Ok, None) => (RunStatus::TimedOut, None, None),
        (JobStatus::Ok, Some(Err(e))) => (RunStatus::Error, None, Some(e.to_string())),
        (JobStatus::Ok, Some(Ok(None))) => (RunStatus::Declined, None, None),
        (JobStatus::Ok, Some(Ok(Some(c)))) => match validate(rg, &c) {
            Ok(()) => (RunStatus::Candidate, Some(c), None),
            Err(e) => (RunStatus::Rejected, None, Some(e)),
        },
    };
    if let Some(e) = &error {
        tracing::warn!(rg, ?status, error = %e, "generator produced no candidate");
    }
    RgRun { rg: rg.to_string(), status, candidate, error, elapsed_ms }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

pub struct Engine {
    world: Arc<World>,
    pipeline: Arc<Pipeline>,
    registry: Vec<Arc<dyn ResponseGenerator>>,
    settings: EngineSettings,
    store: Arc<dyn Store>,
}

impl Engine {
    pub fn new(
        world: Arc<World>,
        pipeline: Arc<Pipeline>,
        registry: Vec<Arc<dyn ResponseGenerator>>,
        settings: EngineSettings,
        store: Arc<dyn Store>,
    ) -> Self {
        Self { world, pipeline, registry, settings, store }
    }

    pub fn world(&self) -> &Arc<World> {
        &self.world
    }

    pub fn store(&self) -> &Arc<dyn Store> {
        &self.store
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    /// One full turn against the store: fetch, run, write, log.
    pub fn process(&self, input: &TurnInput) -> Result<TurnOutcome, EngineError> {
        let started = Instant::now();
        let previous = self.store.fetch(&input.session_id)?;
        let (mut outcome, record, mut entry) = self.run_turn(previous, input)?;
        let t = Instant::now();
        self.store.write(&record)?;
        self.store.append_log(&entry)?;
        outcome.debug.timings_ms.insert("store".into(), ms(t));
        outcome.debug.timings_ms.insert("total".into(), ms(started));
        entry.timings_ms = outcome.debug.timings_ms.clone();
        Ok(outcome)
    }

    /// Computes a turn from the previous record without touching the store.
    pub fn run_turn(
        &self,
        previous: Option<SessionRecord>,
        input: &TurnInput,
    ) -> Result<(TurnOutcome, SessionRecord, ConversationLogEntry), EngineError> {
        if input.session_id.trim().is_empty() {
            return Err(EngineError::EmptySession);
        }
        let mut record = match previous {
            Some(r) if r.ended => return Err(EngineError::Ended(r.session_id)),
            Some(r) => r,
            None => new_session(&input.session_id, &input.overrides.or(&self.settings.session)),
        };
        let turn = record.history.len() as u64 + 1;
        let mut debug = TurnDebug { turn_number: turn, assignments: record.assignments, hour: record.hour, ..Default::default() };

        let t = Instant::now();
        let mut ctx = AnnotationContext::new(input.utterance.clone());
        ctx.last_bot_utterance = record.history.last().map(|e| e.bot.clone());
        ctx.expected_types = record.tracker.expected_types.clone();
        let scheduling = if self.settings.sequential_annotation {
            Scheduling::Sequential { seed: derive_seed(record.seed, &record.session_id, turn) }
        } else {
            Scheduling::Parallel
        };
        let (annotations, report) = self.pipeline.annotate_with(ctx, scheduling);
        let pipeline_failed = !report.runs.is_empty() && report.failures().count() == report.runs.len();
        debug.timings_ms.insert("annotate".into(), ms(t));
        debug.annotations = annotations.clone();
        debug.pipeline = report;

        let exchange;
        if detect_stop(&input.utterance) {
            let (tracker, transition) = tracker::end_conversation(&record.tracker);
            debug.tracker.push(transition);
            debug.stop_detected = true;
            debug.conversation_ended = true;
            record.tracker = tracker;
            record.ended = true;
            exchange = Exchange { user: input.utterance.clone(), bot: String::new(), response_rg: None, prompt_rg: None };
        } else {
            exchange = self.respond(&mut record, &mut debug, input, annotations.clone(), turn, pipeline_failed)?;
        }

        debug.entity = record.tracker.current.clone();
        let bot = exchange.bot.clone();
        record.history.push(exchange);
        record.turn_number = record.history.len() as u64;
        record.annotations_last = annotations;

        let entry = ConversationLogEntry {
            session_id: record.session_id.clone(),
            turn_number: turn,
            user: input.utterance.clone(),
            bot: bot.clone(),
            debug: debug.clone(),
            timings_ms: debug.timings_ms.clone(),
        };
        let outcome = TurnOutcome {
            session_id: record.session_id.clone(),
            turn_number: turn,
            bot_utterance: bot,
            conversation_ended: record.ended,
            debug,
        };
        Ok((outcome, record, entry))
    }

    fn generators(&self, fallback_only: bool) -> Vec<Arc<dyn ResponseGenerator>> {
        if !fallback_only {
            return self.registry.clone();
        }
        let only: Vec<_> = self.registry.iter().filter(|r| r.name() == names::FALLBACK).cloned().collect();
        if only.is_empty() {
            vec![Arc::new(Fallback)]
        } else {
            only
        }
    }

    fn respond(
        &self,
        record: &mut SessionRecord,
        debug: &mut TurnDebug,
        input: &TurnInput,
        annotations: Annotations,
        turn: u64,
        fallback_only: bool,
    ) -> Result<Exchange, EngineError> {
        let (tracker_1, transition) = tracker::update_after_user(&record.tracker, &annotations, turn);
        debug.tracker.push(transition);
        let snapshot = Arc::new(Snapshot {
            session_id: record.session_id.clone(),
            turn,
            utterance: input.utterance.clone(),
            annotations,
            history: record.history.clone(),
            previous_entity: record.tracker.current.clone(),
            tracker: tracker_1,
            rg_states: record.rg_states.clone(),
            assignments: record.assignments,
            hour: record.hour,
            response: None,
        });
        let generators = self.generators(fallback_only);

        let t = Instant::now();
        type ResponseJob = (Result<Option<ResponseCandidate>, RgError>, Option<Value>);
        let jobs: Vec<Job<ResponseJob>> = generators
            .iter()
            .map(|rg| {
                let (rg, snap) = (rg.clone(), snapshot.clone());
                Box::new(move || (rg.get_response(&snap), rg.update_state_if_not_chosen(&snap))) as Job<ResponseJob>
            })
            .collect();
        let results = run_all(jobs, self.settings.rg_timeout);
        let mut learned: BTreeMap<String, Value> = BTreeMap::new();
        for (rg, r) in generators.iter().zip(results) {
            let (response, update) = match r.value {
                Some((resp, upd)) => (Some(resp), upd),
                None => (None, None),
            };
            if let Some(v) = update {
                learned.insert(rg.name().to_string(), v);
            }
            debug.responses.push(run_status(rg.name(), &r.status, r.elapsed_ms, response, valid_response));
        }
        debug.timings_ms.insert("responses".into(), ms(t));

        let candidates: Vec<ResponseCandidate> = debug.responses.iter().filter_map(|r| r.candidate.clone()).collect();
        let winner = rank_responses(&candidates, &self.settings.sampler.tie_break_order)?.clone();
        debug.response_rg = Some(winner.rg.clone());
        debug.response_priority = Some(winner.priority);
        debug.response_text = winner.text.clone();

        let (mut tracker_now, transition) = tracker::update_after_response(
            &snapshot.tracker,
            &winner.directive,
            &winner.expected_types_next,
            &self.world.index,
        );
        debug.tracker.push(transition);

        let mut states = record.rg_states.clone();
        let put = |states: &mut BTreeMap<String, RgStateRecord>, rg: &str, data: Value| {
            states.insert(rg.to_string(), RgStateRecord { last_active_turn: turn, data });
        };
        for (rg, v) in learned {
            if rg != winner.rg {
                put(&mut states, &rg, v);
            }
        }
        put(&mut states, &winner.rg, winner.new_rg_state.clone());

        let mut text = winner.text.trim().to_string();
        let mut prompt_rg = None;
        if winner.needs_prompt && !winner.ends_conversation {
            let t = Instant::now();
            let mut prompt_snap = (*snapshot).clone();
            prompt_snap.tracker = tracker_now.clone();
            prompt_snap.rg_states = states.clone();
            prompt_snap.response =
                Some(ChosenResponse { rg: winner.rg.clone(), text: winner.text.clone(), priority: winner.priority });
            let prompt_snap = Arc::new(prompt_snap);
            let prompters: Vec<_> = generators.iter().filter(|g| g.name() != winner.rg).cloned().collect();
            let jobs: Vec<Job<Result<Option<PromptCandidate>, RgError>>> = prompters
                .iter()
                .map(|rg| {
                    let (rg, snap) = (rg.clone(), prompt_snap.clone());
                    Box::new(move || rg.get_prompt(&snap)) as Job<_>
                })
                .collect();
            for (rg, r) in prompters.iter().zip(run_all(jobs, self.settings.rg_timeout)) {
                debug.prompts.push(run_status(rg.name(), &r.status, r.elapsed_ms, r.value, valid_prompt));
            }
            debug.timings_ms.insert("prompts".into(), ms(t));

            let prompts: Vec<PromptCandidate> = debug.prompts.iter().filter_map(|r| r.candidate.clone()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(record.seed, &record.session_id, turn));
            match sample_prompt(&prompts, &self.settings.sampler, &mut rng) {
                Ok(prompt) => {
                    let (next, transition) = tracker::update_after_prompt(
                        &tracker_now,
                        &prompt.directive,
                        &prompt.expected_types_next,
                        &self.world.index,
                    );
                    debug.tracker.push(transition);
                    tracker_now = next;
                    put(&mut states, &prompt.rg, prompt.new_rg_state.clone());
                    text = format!("{text} {}", prompt.text.trim());
                    debug.prompt_rg = Some(prompt.rg.clone());
                    debug.prompt_priority = Some(prompt.priority);
                    debug.prompt_text = Some(prompt.text.clone());
                    prompt_rg = Some(prompt.rg.clone());
                }
                Err(e) => tracing::warn!(error = %e, "response asked for a prompt but none was offered"),
            }
        }

        if winner.ends_conversation {
            let (next, transition) = tracker::end_conversation(&tracker_now);
            debug.tracker.push(transition);
            tracker_now = next;
            record.ended = true;
            debug.conversation_ended = true;
        }
        record.tracker = tracker_now;
        record.rg_states = states;
        Ok(Exchange { user: input.utterance.clone(), bot: text, response_rg: Some(winner.rg), prompt_rg })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_phrases() {
        for yes in ["i want to stop talking", "stop", "Stop.", "alexa stop", "let's end this conversation", "quit please"] {
            assert!(detect_stop(yes), "{yes}");
        }
        for no in ["do you just keep talking", "tell me about dogs", "stop talking about cats", "goodbye", "i can't stop eating"] {
            assert!(!detect_stop(no), "{no}");
        }
    }

    #[test]
    fn seeds_differ_by_session_and_turn() {
        assert_ne!(derive_seed(1, "a", 1), derive_seed(1, "a", 2));
        assert_ne!(derive_seed(1, "a", 1), derive_seed(1, "b", 1));
        assert_ne!(derive_seed(1, "a", 1), derive_seed(2, "a", 1));
        assert_eq!(derive_seed(7, "s", 3), derive_seed(7, "s", 3));
    }

    #[test]
    fn overrides_fix_session_arms() {
        let o = SessionOverrides {
            opinion_policy: Some(OpinionPolicy::ConvincedAgree),
            start_hour: Some(14),
            ..Default::default()
        };
        let r = new_session("s", &o);
        assert_eq!(r.assignments.opinion_policy, OpinionPolicy::ConvincedAgree);
        assert_eq!(r.hour, 14);
        assert_eq!(new_session("s", &o), r);
    }
}
