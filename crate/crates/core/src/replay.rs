//! Scripted conversations with expected tracker and RG outcomes.
//!
//! A fixture file is JSON: a config path (relative to the fixture), a
//! session id and one entry per user turn. Every expectation field is
//! optional; only the ones present are compared.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::manager::{Engine, EngineError, SessionOverrides, TurnDebug, TurnInput};
use crate::store::ConversationLogEntry;
use crate::tracker::Phase;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line} column {column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("turn {turn}: {source}")]
    Engine { turn: usize, source: EngineError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayFixture {
    pub config: PathBuf,
    #[serde(default = "default_session")]
    pub session_id: String,
    pub turns: Vec<ReplayTurn>,
}

fn default_session() -> String {
    "replay".into()
}

/// `Some(None)` in an entity field expects no current entity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayTurn {
    pub user: String,
    #[serde(default, with = "double_option", skip_serializing_if = "Option::is_none")]
    pub entity_after_user: Option<Option<String>>,
    #[serde(default, with = "double_option", skip_serializing_if = "Option::is_none")]
    pub entity_after_bot: Option<Option<String>>,
    #[serde(default, with = "double_option", skip_serializing_if = "Option::is_none")]
    pub response_rg: Option<Option<String>>,
    #[serde(default, with = "double_option", skip_serializing_if = "Option::is_none")]
    pub prompt_rg: Option<Option<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bot: Option<String>,
}

mod double_option {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Option<String>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().unwrap_or(&None).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<String>>, D::Error> {
        Option::<String>::deserialize(d).map(Some)
    }
}

impl ReplayFixture {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReplayError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| ReplayError::Io { path: path.display().to_string(), source })?;
        let mut fixture: ReplayFixture = serde_json::from_str(&text).map_err(|e| ReplayError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if fixture.config.is_relative() {
            if let Some(dir) = path.parent() {
                fixture.config = dir.join(&fixture.config);
            }
        }
        Ok(fixture)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    /// 1-based.
    pub turn: usize,
    pub field: &'static str,
    pub expected: String,
    pub got: String,
}

#[derive(Debug)]
pub struct ReplayReport {
    pub log: Vec<ConversationLogEntry>,
    pub mismatches: Vec<Mismatch>,
    pub elapsed: Duration,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// The current entity right after the user's turn was read.
pub fn entity_after_user(debug: &TurnDebug) -> Option<String> {
    match debug.tracker.iter().find(|t| t.phase == Phase::User) {
        Some(t) => t.after.clone(),
        None => debug.tracker.first().and_then(|t| t.before.clone()).filter(|_| !debug.stop_detected),
    }
}

/// Curly apostrophes count as straight ones.
pub fn normalize_text(s: &str) -> String {
    s.replace(['\u{2019}', '\u{2018}'], "'").trim().to_string()
}

fn show(v: &Option<String>) -> String {
    v.clone().unwrap_or_else(|| "-".into())
}

/// Drives every turn through `engine` and compares each expectation.
pub fn run_replay(
    engine: &Engine,
    fixture: &ReplayFixture,
    overrides: &SessionOverrides,
) -> Result<ReplayReport, ReplayError> {
    let started = Instant::now();
    let mut log = Vec::new();
    let mut mismatches = Vec::new();
    for (i, turn) in fixture.turns.iter().enumerate() {
        let n = i + 1;
        let input = TurnInput {
            session_id: fixture.session_id.clone(),
            utterance: turn.user.clone(),
            overrides: overrides.clone(),
        };
        let outcome = engine.process(&input).map_err(|source| ReplayError::Engine { turn: n, source })?;
        let debug = &outcome.debug;
        let mut check = |field: &'static str, expected: &Option<Option<String>>, got: Option<String>| {
            if let Some(expected) = expected {
                if *expected != got {
                    mismatches.push(Mismatch { turn: n, field, expected: show(expected), got: show(&got) });
                }
            }
        };
        check("entity_after_user", &turn.entity_after_user, entity_after_user(debug));
        check("entity_after_bot", &turn.entity_after_bot, debug.entity.clone());
        check("response_rg", &turn.response_rg, debug.response_rg.clone());
        check("prompt_rg", &turn.prompt_rg, debug.prompt_rg.clone());
        if let Some(bot) = &turn.bot {
            if normalize_text(bot) != normalize_text(&outcome.bot_utterance) {
                mismatches.push(Mismatch { turn: n, field: "bot", expected: bot.clone(), got: outcome.bot_utterance.clone() });
            }
        }
        log.push(ConversationLogEntry {
            session_id: outcome.session_id.clone(),
            turn_number: outcome.turn_number,
            user: turn.user.clone(),
            bot: outcome.bot_utterance.clone(),
            timings_ms: debug.timings_ms.clone(),
            debug: outcome.debug,
        });
    }
    Ok(ReplayReport { log, mismatches, elapsed: started.elapsed() })
}
