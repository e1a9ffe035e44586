//! The pluggable text generator behind Neural Chat, Neural Fallback and the
//! Wiki paraphraser, plus two deterministic stand-ins: a seeded mock and a
//! scripted adapter that replays canned samples.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerationKind {
    /// Empathetic chit-chat continuing the history.
    Chat,
    /// A response to be used when nothing else fits.
    Fallback,
    /// A conversational rewording of `knowledge`.
    Paraphrase { knowledge: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    #[serde(flatten)]
    pub kind: GenerationKind,
    /// Oldest first, already truncated to the token budget.
    pub history: Vec<String>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdapterError {
    #[error("generator unavailable: {0}")]
    Unavailable(String),
    #[error("generator returned no samples")]
    Empty,
}

pub trait GeneratorAdapter: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, AdapterError>;
}

/// Calls the adapter and returns exactly `request.n` samples, cycling through
/// what came back when the adapter returned fewer.
pub fn generate_exact(adapter: &dyn GeneratorAdapter, request: &GenerationRequest) -> Result<Vec<String>, AdapterError> {
    let samples = adapter.generate(request)?;
    if request.n == 0 {
        return Ok(Vec::new());
    }
    if samples.is_empty() {
        return Err(AdapterError::Empty);
    }
    Ok(samples.iter().cycle().take(request.n).cloned().collect())
}

/// Keeps the most recent utterances whose combined whitespace-token count
/// fits in `max_tokens`.
pub fn truncate_history(history: &[String], max_tokens: usize) -> Vec<String> {
    let mut budget = max_tokens;
    let mut kept = Vec::new();
    for utterance in history.iter().rev() {
        let n = utterance.split_whitespace().count();
        if n > budget {
            break;
        }
        budget -= n;
        kept.push(utterance.clone());
    }
    kept.reverse();
    kept
}

/// FNV-1a, used to derive a stable seed from request contents.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
}

fn request_seed(request: &GenerationRequest) -> u64 {
    let mut key = serde_json::to_string(&request.kind).unwrap_or_default();
    for h in &request.history {
        key.push('\u{1f}');
        key.push_str(h);
    }
    fnv1a(key.as_bytes())
}

const MOCK_QUESTIONS: &[&str] = &[
    "That sounds really nice. What do you enjoy most about it?",
    "Oh, I can imagine. How did that make you feel?",
    "That's great to hear! Do you do that often?",
    "I see. What made you think of that?",
    "That must have been a lot of fun. Who were you with?",
];

const MOCK_STATEMENTS: &[&str] = &[
    "That sounds really nice.",
    "I can imagine how that feels.",
    "That's great to hear.",
    "I think that's a wonderful way to spend time.",
    "I love hearing about things like that.",
];

/// Seeded stand-in for a sampling language model. Output depends only on
/// the request, so repeated calls agree.
#[derive(Debug, Clone)]
pub struct MockAdapter {
    /// Chance that a chat sample is a question.
    pub question_rate: f64,
}

impl Default for MockAdapter {
    fn default() -> Self {
        Self { question_rate: 0.5 }
    }
}

impl GeneratorAdapter for MockAdapter {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, AdapterError> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(request_seed(request));
        let out = (0..request.n)
            .map(|_| match &request.kind {
                GenerationKind::Chat => {
                    let bank = if rng.random_bool(self.question_rate) { MOCK_QUESTIONS } else { MOCK_STATEMENTS };
                    bank.choose(&mut rng).copied().unwrap_or_default().to_string()
                }
                GenerationKind::Fallback => MOCK_STATEMENTS.choose(&mut rng).copied().unwrap_or_default().to_string(),
                GenerationKind::Paraphrase { knowledge } => {
                    let k = knowledge.trim().trim_end_matches('.');
                    match rng.random_range(0..3) {
                        0 => format!("I read that {}.", lower_first(k)),
                        1 => format!("Apparently, {}.", lower_first(k)),
                        _ => format!("{k}."),
                    }
                }
            })
            .collect();
        Ok(out)
    }
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if !s.starts_with("I ") => c.to_lowercase().chain(chars).collect(),
        Some(_) => s.to_string(),
        None => String::new(),
    }
}

/// One canned answer in a script file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(flatten)]
    pub kind: ScriptKey,
    pub samples: Vec<String>,
}

/// What a script entry answers: chat or fallback keyed by the latest user
/// utterance, paraphrase keyed by the knowledge text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptKey {
    Chat { user: String },
    Fallback { user: String },
    Paraphrase { knowledge: String },
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("script line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Replays fixed samples for known inputs and defers to another adapter
/// for everything else.
pub struct ScriptedAdapter {
    entries: HashMap<ScriptKey, Vec<String>>,
    fallback: Arc<dyn GeneratorAdapter>,
}

impl ScriptedAdapter {
    pub fn new(entries: Vec<ScriptEntry>, fallback: Arc<dyn GeneratorAdapter>) -> Self {
        Self { entries: entries.into_iter().map(|e| (e.kind, e.samples)).collect(), fallback }
    }

    /// One JSON [`ScriptEntry`] per line; blank lines and `#` comments skipped.
    pub fn parse(text: &str, fallback: Arc<dyn GeneratorAdapter>) -> Result<Self, ScriptError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(line)
                .map_err(|e| ScriptError::Malformed { line: i + 1, message: e.to_string() })?;
            entries.push(entry);
        }
        Ok(Self::new(entries, fallback))
    }

    pub fn load(path: impl AsRef<Path>, fallback: Arc<dyn GeneratorAdapter>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|source| ScriptError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, fallback)
    }

    fn key(request: &GenerationRequest) -> ScriptKey {
        let user = request.history.last().cloned().unwrap_or_default();
        match &request.kind {
            GenerationKind::Chat => ScriptKey::Chat { user },
            GenerationKind::Fallback => ScriptKey::Fallback { user },
            GenerationKind::Paraphrase { knowledge } => ScriptKey::Paraphrase { knowledge: knowledge.clone() },
        }
    }
}

impl GeneratorAdapter for ScriptedAdapter {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, AdapterError> {
        match self.entries.get(&Self::key(request)) {
            Some(samples) => Ok(samples.clone()),
            None => self.fallback.generate(request),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chat(history: &[&str], n: usize) -> GenerationRequest {
        GenerationRequest { kind: GenerationKind::Chat, history: history.iter().map(|s| s.to_string()).collect(), n }
    }

    #[test]
    fn mock_is_deterministic_and_sized() {
        let m = MockAdapter::default();
        let a = m.generate(&chat(&["hello there"], 20)).unwrap();
        let b = m.generate(&chat(&["hello there"], 20)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
    }

    #[test]
    fn generate_exact_pads_short_answers() {
        let scripted = ScriptedAdapter::new(
            vec![ScriptEntry { kind: ScriptKey::Chat { user: "hi".into() }, samples: vec!["a".into(), "b?".into()] }],
            Arc::new(MockAdapter::default()),
        );
        let out = generate_exact(&scripted, &chat(&["hi"], 5)).unwrap();
        assert_eq!(out, vec!["a", "b?", "a", "b?", "a"]);
    }

    #[test]
    fn scripted_falls_back_for_unknown_inputs() {
        let scripted = ScriptedAdapter::new(Vec::new(), Arc::new(MockAdapter::default()));
        let req = chat(&["something new"], 3);
        assert_eq!(scripted.generate(&req).unwrap(), MockAdapter::default().generate(&req).unwrap());
    }

    #[test]
    fn script_lines_parse() {
        let text = r#"
# comment
{"kind":"chat","user":"hang out with my friends","samples":["That sounds great. What will you do?"]}
{"kind":"paraphrase","knowledge":"Cats purr.","samples":["I heard cats purr."]}
"#;
        let s = ScriptedAdapter::parse(text, Arc::new(MockAdapter::default())).unwrap();
        let req = GenerationRequest {
            kind: GenerationKind::Paraphrase { knowledge: "Cats purr.".into() },
            history: vec![],
            n: 1,
        };
        assert_eq!(s.generate(&req).unwrap(), vec!["I heard cats purr."]);
        assert!(ScriptedAdapter::parse("{nope", Arc::new(MockAdapter::default())).is_err());
    }

    #[test]
    fn truncation_keeps_the_most_recent_turns() {
        let h: Vec<String> = vec!["one two three".into(), "four five".into(), "six".into()];
        assert_eq!(truncate_history(&h, 3), vec!["four five", "six"]);
        assert_eq!(truncate_history(&h, 100).len(), 3);
        assert!(truncate_history(&h, 0).is_empty());
    }
}
