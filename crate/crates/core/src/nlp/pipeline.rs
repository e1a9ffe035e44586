//! The annotator DAG.
//!
//! Each annotator declares the annotators it depends on and only ever sees
//! their outputs. An annotator is launched as soon as all of its
//! dependencies have finished; a panic or an overrun of the per-annotator
//! timeout substitutes that annotator's default value.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Annotations, DialogueAct, DialogueActClassifier, NavIntent, NlpRules, OffenseResult, QuestionInfo};
use crate::corpus::EntityIndex;
use crate::linker::{EntityLinker, LinkerOutput};
use crate::types::Sentiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorId {
    NavIntent,
    Question,
    DialogueAct,
    Sentiment,
    Offense,
    Linker,
}

impl AnnotatorId {
    pub const ALL: [AnnotatorId; 6] = [
        AnnotatorId::NavIntent,
        AnnotatorId::Question,
        AnnotatorId::DialogueAct,
        AnnotatorId::Sentiment,
        AnnotatorId::Offense,
        AnnotatorId::Linker,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NavIntent => "nav_intent",
            Self::Question => "question",
            Self::DialogueAct => "dialogue_act",
            Self::Sentiment => "sentiment",
            Self::Offense => "offense",
            Self::Linker => "linker",
        }
    }
}

/// One annotator's output.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnotationValue {
    NavIntent(NavIntent),
    Question(QuestionInfo),
    DialogueAct(DialogueAct),
    Sentiment(Sentiment),
    Offense(OffenseResult),
    Linker(LinkerOutput),
}

impl AnnotationValue {
    pub fn id(&self) -> AnnotatorId {
        match self {
            Self::NavIntent(_) => AnnotatorId::NavIntent,
            Self::Question(_) => AnnotatorId::Question,
            Self::DialogueAct(_) => AnnotatorId::DialogueAct,
            Self::Sentiment(_) => AnnotatorId::Sentiment,
            Self::Offense(_) => AnnotatorId::Offense,
            Self::Linker(_) => AnnotatorId::Linker,
        }
    }

    pub fn default_for(id: AnnotatorId) -> Self {
        match id {
            AnnotatorId::NavIntent => Self::NavIntent(NavIntent::default()),
            AnnotatorId::Question => Self::Question(QuestionInfo::default()),
            AnnotatorId::DialogueAct => Self::DialogueAct(DialogueAct::default()),
            AnnotatorId::Sentiment => Self::Sentiment(Sentiment::default()),
            AnnotatorId::Offense => Self::Offense(OffenseResult::default()),
            AnnotatorId::Linker => Self::Linker(LinkerOutput::default()),
        }
    }

    fn apply(self, out: &mut Annotations) {
        match self {
            Self::NavIntent(v) => out.nav_intent = v,
            Self::Question(q) => {
                out.is_question = q.is_question;
                out.question_type = q.question_type;
                out.question_form = q.form;
            }
            Self::DialogueAct(v) => out.dialogue_act = v,
            Self::Sentiment(v) => out.sentiment = v,
            Self::Offense(v) => out.offense = v,
            Self::Linker(v) => out.linker = v,
        }
    }
}

/// What annotators may read about the turn.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationContext {
    pub utterance: String,
    pub last_bot_utterance: Option<String>,
    pub expected_types: BTreeSet<String>,
}

impl AnnotationContext {
    pub fn new(utterance: impl Into<String>) -> Self {
        Self { utterance: utterance.into(), ..Self::default() }
    }
}

/// The outputs of an annotator's declared dependencies, and nothing else.
#[derive(Debug, Default)]
pub struct DepView {
    values: BTreeMap<AnnotatorId, AnnotationValue>,
    undeclared_reads: Mutex<BTreeSet<AnnotatorId>>,
}

impl DepView {
    fn new(values: BTreeMap<AnnotatorId, AnnotationValue>) -> Self {
        Self { values, undeclared_reads: Mutex::default() }
    }

    pub fn get(&self, id: AnnotatorId) -> Option<&AnnotationValue> {
        let value = self.values.get(&id);
        if value.is_none() {
            self.undeclared_reads.lock().expect("dep view lock").insert(id);
        }
        value
    }

    pub fn question(&self) -> Option<QuestionInfo> {
        match self.get(AnnotatorId::Question) {
            Some(AnnotationValue::Question(q)) => Some(*q),
            _ => None,
        }
    }

    /// Ids an annotator asked for without declaring them.
    pub fn undeclared_reads(&self) -> BTreeSet<AnnotatorId> {
        self.undeclared_reads.lock().expect("dep view lock").clone()
    }
}

pub trait Annotator: Send + Sync {
    fn id(&self) -> AnnotatorId;
    fn deps(&self) -> Vec<AnnotatorId> {
        Vec::new()
    }
    fn run(&self, ctx: &AnnotationContext, deps: &DepView) -> AnnotationValue;
}

pub struct NavIntentAnnotator(pub Arc<NlpRules>);

impl Annotator for NavIntentAnnotator {
    fn id(&self) -> AnnotatorId {
        AnnotatorId::NavIntent
    }
    fn run(&self, ctx: &AnnotationContext, _: &DepView) -> AnnotationValue {
        AnnotationValue::NavIntent(self.0.nav.classify(&ctx.utterance))
    }
}

pub struct QuestionAnnotator;

impl Annotator for QuestionAnnotator {
    fn id(&self) -> AnnotatorId {
        AnnotatorId::Question
    }
    fn run(&self, ctx: &AnnotationContext, _: &DepView) -> AnnotationValue {
        AnnotationValue::Question(super::detect_question(&ctx.utterance))
    }
}

pub struct DialogueActAnnotator(pub Arc<dyn DialogueActClassifier>);

impl Annotator for DialogueActAnnotator {
    fn id(&self) -> AnnotatorId {
        AnnotatorId::DialogueAct
    }
    fn deps(&self) -> Vec<AnnotatorId> {
        vec![AnnotatorId::Question]
    }
    fn run(&self, ctx: &AnnotationContext, deps: &DepView) -> AnnotationValue {
        let question = deps.question().unwrap_or_default();
        AnnotationValue::DialogueAct(self.0.classify(ctx.last_bot_utterance.as_deref(), &ctx.utterance, &question))
    }
}

pub struct SentimentAnnotator(pub Arc<NlpRules>);

impl Annotator for SentimentAnnotator {
    fn id(&self) -> AnnotatorId {
        AnnotatorId::Sentiment
    }
    fn run(&self, ctx: &AnnotationContext, _: &DepView) -> AnnotationValue {
        AnnotationValue::Sentiment(self.0.sentiment.classify(&ctx.utterance))
    }
}

pub struct OffenseAnnotator(pub Arc<NlpRules>);

impl Annotator for OffenseAnnotator {
    fn id(&self) -> AnnotatorId {
        AnnotatorId::Offense
    }
    fn run(&self, ctx: &AnnotationContext, _: &DepView) -> AnnotationValue {
        AnnotationValue::Offense(self.0.offense.detect(&ctx.utterance))
    }
}

pub struct LinkerAnnotator {
    pub linker: Arc<EntityLinker>,
    pub index: Arc<EntityIndex>,
}

impl Annotator for LinkerAnnotator {
    fn id(&self) -> AnnotatorId {
        AnnotatorId::Linker
    }
    fn run(&self, ctx: &AnnotationContext, _: &DepView) -> AnnotationValue {
        AnnotationValue::Linker(self.linker.link(&self.index, &ctx.utterance, &ctx.expected_types))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub annotator_timeout_ms: u64,
    /// Wall-clock budget for the whole annotation stage.
    pub budget_ms: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { annotator_timeout_ms: 200, budget_ms: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduling {
    /// Each annotator on its own thread, launched when its inputs are ready.
    Parallel,
    /// One at a time on the calling thread, in a seeded random topological
    /// order.
    Sequential { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorStatus {
    Ok,
    Panicked,
    TimedOut,
    /// Never launched because the stage budget ran out.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorRun {
    pub id: AnnotatorId,
    pub status: AnnotatorStatus,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub runs: Vec<AnnotatorRun>,
    pub total_ms: f64,
}

impl PipelineReport {
    pub fn failures(&self) -> impl Iterator<Item = &AnnotatorRun> {
        self.runs.iter().filter(|r| r.status != AnnotatorStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("annotator `{0}` registered twice")]
    Duplicate(&'static str),
    #[error("annotator `{annotator}` depends on unregistered `{dep}`")]
    MissingDependency { annotator: &'static str, dep: &'static str },
    #[error("dependency cycle through `{0}`")]
    Cycle(&'static str),
}

struct Node {
    annotator: Arc<dyn Annotator>,
    deps: Vec<AnnotatorId>,
}

pub struct Pipeline {
    nodes: BTreeMap<AnnotatorId, Node>,
    config: PipelineConfig,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("annotators", &self.nodes.keys().collect::<Vec<_>>())
            .field("config", &self.config)
            .finish()
    }
}

impl Pipeline {
    pub fn new(annotators: Vec<Arc<dyn Annotator>>, config: PipelineConfig) -> Result<Self, PipelineError> {
        let mut nodes = BTreeMap::new();
        for annotator in annotators {
            let id = annotator.id();
            let deps = annotator.deps();
            if nodes.insert(id, Node { annotator, deps }).is_some() {
                return Err(PipelineError::Duplicate(id.as_str()));
            }
        }
        for (id, node) in &nodes {
            for dep in &node.deps {
                if !nodes.contains_key(dep) {
                    return Err(PipelineError::MissingDependency { annotator: id.as_str(), dep: dep.as_str() });
                }
            }
        }
        let pipeline = Self { nodes, config };
        pipeline.topological_order()?;
        Ok(pipeline)
    }

    /// The six built-in annotators.
    pub fn standard(
        rules: Arc<NlpRules>,
        linker: Arc<EntityLinker>,
        index: Arc<EntityIndex>,
        config: PipelineConfig,
    ) -> Self {
        let dialogue_acts: Arc<dyn DialogueActClassifier> = Arc::new(rules.dialogue_acts.clone());
        let annotators: Vec<Arc<dyn Annotator>> = vec![
            Arc::new(NavIntentAnnotator(rules.clone())),
            Arc::new(QuestionAnnotator),
            Arc::new(DialogueActAnnotator(dialogue_acts)),
            Arc::new(SentimentAnnotator(rules.clone())),
            Arc::new(OffenseAnnotator(rules)),
            Arc::new(LinkerAnnotator { linker, index }),
        ];
        Self::new(annotators, config).expect("built-in annotator graph is well formed")
    }

    /// Swaps in a different implementation for one annotator id.
    pub fn replace(mut self, annotator: Arc<dyn Annotator>) -> Result<Self, PipelineError> {
        let deps = annotator.deps();
        self.nodes.insert(annotator.id(), Node { annotator, deps });
        let annotators = self.nodes.into_values().map(|n| n.annotator).collect();
        Self::new(annotators, self.config)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn dependencies(&self, id: AnnotatorId) -> Option<&[AnnotatorId]> {
        self.nodes.get(&id).map(|n| n.deps.as_slice())
    }

    fn topological_order(&self) -> Result<Vec<AnnotatorId>, PipelineError> {
        let mut done: BTreeSet<AnnotatorId> = BTreeSet::new();
        let mut order = Vec::new();
        while done.len() < self.nodes.len() {
            let ready: Vec<AnnotatorId> = self
                .nodes
                .iter()
                .filter(|(id, n)| !done.contains(id) && n.deps.iter().all(|d| done.contains(d)))
                .map(|(id, _)| *id)
                .collect();
            if ready.is_empty() {
                let stuck = self.nodes.keys().find(|id| !done.contains(id)).expect("some node remains");
                return Err(PipelineError::Cycle(stuck.as_str()));
            }
            done.extend(ready.iter().copied());
            order.extend(ready);
        }
        Ok(order)
    }

    fn dep_view(&self, id: AnnotatorId, done: &BTreeMap<AnnotatorId, AnnotationValue>) -> DepView {
        let values = self.nodes[&id].deps.iter().map(|d| (*d, done[d].clone())).collect();
        DepView::new(values)
    }

    pub fn annotate(&self, ctx: AnnotationContext) -> (Annotations, PipelineReport) {
        self.annotate_with(ctx, Scheduling::Parallel)
    }

    pub fn annotate_with(&self, ctx: AnnotationContext, scheduling: Scheduling) -> (Annotations, PipelineReport) {
        let started = Instant::now();
        let ctx = Arc::new(ctx);
        let (values, mut runs) = match scheduling {
            Scheduling::Parallel => self.run_parallel(&ctx, started),
            Scheduling::Sequential { seed } => self.run_sequential(&ctx, started, seed),
        };
        let mut annotations = Annotations::default();
        for id in AnnotatorId::ALL {
            let value = values.get(&id).cloned().unwrap_or_else(|| AnnotationValue::default_for(id));
            value.apply(&mut annotations);
        }
        runs.sort_by_key(|r| r.id);
        for run in runs.iter().filter(|r| r.status != AnnotatorStatus::Ok) {
            tracing::warn!(annotator = run.id.as_str(), status = ?run.status, "annotator fell back to default");
        }
        let report = PipelineReport { runs, total_ms: started.elapsed().as_secs_f64() * 1000.0 };
        (annotations, report)
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.config.annotator_timeout_ms)
    }

    fn run_parallel(
        &self,
        ctx: &Arc<AnnotationContext>,
        started: Instant,
    ) -> (BTreeMap<AnnotatorId, AnnotationValue>, Vec<AnnotatorRun>) {
        let budget_end = started + Duration::from_millis(self.config.budget_ms);
        let mut done: BTreeMap<AnnotatorId, AnnotationValue> = BTreeMap::new();
        let mut runs = Vec::new();
        let mut launched: BTreeSet<AnnotatorId> = BTreeSet::new();
        let mut running: BTreeMap<AnnotatorId, (Instant, Instant)> = BTreeMap::new();
        type Outcome = (AnnotatorId, Option<AnnotationValue>);
        let (tx, rx) = mpsc::channel::<Outcome>();

        loop {
            let ready: Vec<AnnotatorId> = self
                .nodes
                .iter()
                .filter(|(id, n)| !launched.contains(id) && n.deps.iter().all(|d| done.contains_key(d)))
                .map(|(id, _)| *id)
                .collect();
            for id in ready {
                launched.insert(id);
                let now = Instant::now();
                if now >= budget_end {
                    done.insert(id, AnnotationValue::default_for(id));
                    runs.push(AnnotatorRun { id, status: AnnotatorStatus::Skipped, elapsed_ms: 0.0 });
                    continue;
                }
                let annotator = self.nodes[&id].annotator.clone();
                let view = self.dep_view(id, &done);
                let ctx = ctx.clone();
                let tx = tx.clone();
                let spawned = std::thread::Builder::new().name(format!("annotator-{}", id.as_str())).spawn(move || {
                    let result = catch_unwind(AssertUnwindSafe(|| annotator.run(&ctx, &view)));
                    let _ = tx.send((id, result.ok().filter(|v| v.id() == id)));
                });
                if spawned.is_err() {
                    done.insert(id, AnnotationValue::default_for(id));
                    runs.push(AnnotatorRun { id, status: AnnotatorStatus::Panicked, elapsed_ms: 0.0 });
                    continue;
                }
                running.insert(id, (now, (now + self.timeout()).min(budget_end)));
            }
            if running.is_empty() {
                break;
            }
            let next_deadline = running.values().map(|(_, d)| *d).min().expect("running is non-empty");
            let wait = next_deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(wait) {
                Ok((id, value)) => {
                    // late results of annotators already timed out are dropped
                    let Some((launched_at, _)) = running.remove(&id) else { continue };
                    let elapsed_ms = launched_at.elapsed().as_secs_f64() * 1000.0;
                    let status = if value.is_some() { AnnotatorStatus::Ok } else { AnnotatorStatus::Panicked };
                    done.insert(id, value.unwrap_or_else(|| AnnotationValue::default_for(id)));
                    runs.push(AnnotatorRun { id, status, elapsed_ms });
                }
                Err(_) => {
                    let now = Instant::now();
                    let expired: Vec<AnnotatorId> =
                        running.iter().filter(|(_, (_, d))| *d <= now).map(|(id, _)| *id).collect();
                    for id in expired {
                        let (launched_at, _) = running.remove(&id).expect("expired id is running");
                        done.insert(id, AnnotationValue::default_for(id));
                        runs.push(AnnotatorRun {
                            id,
                            status: AnnotatorStatus::TimedOut,
                            elapsed_ms: launched_at.elapsed().as_secs_f64() * 1000.0,
                        });
                    }
                }
            }
        }
        (done, runs)
    }

    fn run_sequential(
        &self,
        ctx: &Arc<AnnotationContext>,
        started: Instant,
        seed: u64,
    ) -> (BTreeMap<AnnotatorId, AnnotationValue>, Vec<AnnotatorRun>) {
        let budget = Duration::from_millis(self.config.budget_ms);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut done: BTreeMap<AnnotatorId, AnnotationValue> = BTreeMap::new();
        let mut runs = Vec::new();
        while done.len() < self.nodes.len() {
            let ready: Vec<AnnotatorId> = self
                .nodes
                .iter()
                .filter(|(id, n)| !done.contains_key(id) && n.deps.iter().all(|d| done.contains_key(d)))
                .map(|(id, _)| *id)
                .collect();
            let id = *ready.choose(&mut rng).expect("graph is acyclic");
            if started.elapsed() >= budget {
                done.insert(id, AnnotationValue::default_for(id));
                runs.push(AnnotatorRun { id, status: AnnotatorStatus::Skipped, elapsed_ms: 0.0 });
                continue;
            }
            let view = self.dep_view(id, &done);
            let annotator = &self.nodes[&id].annotator;
            let launched_at = Instant::now();
            let result = catch_unwind(AssertUnwindSafe(|| annotator.run(ctx, &view))).ok().filter(|v| v.id() == id);
            let elapsed = launched_at.elapsed();
            let (value, status) = match result {
                Some(_) if elapsed > self.timeout() => (AnnotationValue::default_for(id), AnnotatorStatus::TimedOut),
                Some(v) => (v, AnnotatorStatus::Ok),
                None => (AnnotationValue::default_for(id), AnnotatorStatus::Panicked),
            };
            done.insert(id, value);
            runs.push(AnnotatorRun { id, status, elapsed_ms: elapsed.as_secs_f64() * 1000.0 });
        }
        (done, runs)
    }
}
