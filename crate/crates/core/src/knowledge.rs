//! Hand-written tables the response generators draw on: opinion reasons,
//! movie facts, prompt banks, scripted replies and the two treelet graphs.
//!
//! Every table ships inside the binary. [`Knowledge::load_dir`] reads a
//! directory and replaces whichever tables it finds there.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::nlp::{fields, rows, OffenseType, RuleError};
use crate::treelet::{TreeletError, TreeletGraph};
use crate::types::Sentiment;

macro_rules! bundled {
    ($($name:literal),+ $(,)?) => {
        /// File name and bundled contents of every table.
        pub const FILES: &[(&str, &str)] = &[$(($name, include_str!(concat!("../resources/knowledge/", $name)))),+];
    };
}

bundled!(
    "opinion.tsv",
    "movies.tsv",
    "music_prompts.tsv",
    "categories.tsv",
    "wiki_questions.tsv",
    "acknowledgments.tsv",
    "one_turn.tsv",
    "red_questions.tsv",
    "complaints.tsv",
    "commands.txt",
    "closing.txt",
    "starters.tsv",
    "offense_replies.tsv",
    "movies.toml",
    "music.toml",
);

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("{file}: {source}")]
    Rule {
        file: String,
        #[source]
        source: RuleError,
    },
    #[error("{file}: {source}")]
    Treelet {
        file: String,
        #[source]
        source: TreeletError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// What the bot thinks about one whitelisted entity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpinionEntry {
    /// The entity's name in running text, such as "cats".
    pub topic: String,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub related: Vec<String>,
}

impl OpinionEntry {
    pub fn reasons(&self, sentiment: Sentiment) -> &[String] {
        match sentiment {
            Sentiment::Negative => &self.negative,
            _ => &self.positive,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MovieFacts {
    /// Movie id to cast, lead first.
    pub cast: BTreeMap<String, Vec<String>>,
    /// Actor id to other movies.
    pub filmography: BTreeMap<String, Vec<String>>,
    pub facts: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicPrompt {
    pub topic: String,
    pub entity: Option<String>,
    pub expected_type: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryEntry {
    pub name: String,
    pub entity: Option<String>,
    pub expected_type: String,
    pub question: String,
    pub statement: String,
}

#[derive(Debug, Clone)]
pub struct ScriptedReply {
    pub pattern: Regex,
    pub needs_prompt: bool,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct ComplaintRule {
    pub kind: String,
    /// `None` for the reply used when only the dialogue act says complaint.
    pub pattern: Option<Regex>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Starter {
    pub area: String,
    /// `any`, `morning`, `afternoon` or `evening`.
    pub time: String,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Knowledge {
    pub opinions: BTreeMap<String, OpinionEntry>,
    pub movies: MovieFacts,
    pub music_prompts: Vec<TopicPrompt>,
    pub categories: Vec<CategoryEntry>,
    /// Category to open-ended questions, in file order.
    pub wiki_questions: BTreeMap<String, Vec<String>>,
    pub acknowledgments: BTreeMap<String, String>,
    pub one_turn: Vec<ScriptedReply>,
    pub red_questions: Vec<(String, Regex)>,
    pub complaints: Vec<ComplaintRule>,
    pub commands: Vec<Regex>,
    pub closing: Vec<Regex>,
    pub starters: Vec<Starter>,
    /// (style, offense type) to reply.
    pub offense_replies: BTreeMap<(String, OffenseType), String>,
    pub movies_graph: TreeletGraph,
    pub music_graph: TreeletGraph,
}

fn opt(field: &str) -> Option<String> {
    let f = field.trim();
    (!f.is_empty() && f != "-").then(|| f.to_string())
}

fn regex(line: usize, pattern: &str) -> Result<Regex, RuleError> {
    Regex::new(pattern).map_err(|e| RuleError::new(line, format!("bad regex: {e}")))
}

fn parse_opinions(text: &str) -> Result<BTreeMap<String, OpinionEntry>, RuleError> {
    let mut out: BTreeMap<String, OpinionEntry> = BTreeMap::new();
    for (n, row) in rows(text) {
        match row.first().copied() {
            Some("topic") => {
                let [_, entity, topic] = fields::<3>(n, &row)?;
                out.entry(entity.into()).or_default().topic = topic.into();
            }
            Some("related") => {
                let [_, entity, related] = fields::<3>(n, &row)?;
                out.entry(entity.into()).or_default().related.push(related.into());
            }
            Some("reason") => {
                let [_, entity, polarity, reason] = fields::<4>(n, &row)?;
                let e = out.entry(entity.into()).or_default();
                match polarity {
                    "positive" => e.positive.push(reason.into()),
                    "negative" => e.negative.push(reason.into()),
                    other => return Err(RuleError::new(n, format!("unknown polarity `{other}`"))),
                }
            }
            other => return Err(RuleError::new(n, format!("unknown row kind `{}`", other.unwrap_or("")))),
        }
    }
    if let Some((id, _)) = out.iter().find(|(_, e)| e.topic.is_empty()) {
        return Err(RuleError::new(0, format!("`{id}` has reasons but no topic row")));
    }
    Ok(out)
}

fn parse_movies(text: &str) -> Result<MovieFacts, RuleError> {
    let mut out = MovieFacts::default();
    for (n, row) in rows(text) {
        let [kind, key, value] = fields::<3>(n, &row)?;
        let map = match kind {
            "actor" => &mut out.cast,
            "film" => &mut out.filmography,
            "fact" => &mut out.facts,
            other => return Err(RuleError::new(n, format!("unknown row kind `{other}`"))),
        };
        map.entry(key.into()).or_default().push(value.into());
    }
    Ok(out)
}

fn parse_topic_prompts(text: &str) -> Result<Vec<TopicPrompt>, RuleError> {
    rows(text)
        .map(|(n, row)| {
            let [topic, entity, expected, text] = fields::<4>(n, &row)?;
            Ok(TopicPrompt { topic: topic.into(), entity: opt(entity), expected_type: opt(expected), text: text.into() })
        })
        .collect()
}

fn parse_categories(text: &str) -> Result<Vec<CategoryEntry>, RuleError> {
    rows(text)
        .map(|(n, row)| {
            let [name, entity, expected, question, statement] = fields::<5>(n, &row)?;
            Ok(CategoryEntry {
                name: name.into(),
                entity: opt(entity),
                expected_type: expected.into(),
                question: question.into(),
                statement: statement.into(),
            })
        })
        .collect()
}

fn parse_multimap(text: &str) -> Result<BTreeMap<String, Vec<String>>, RuleError> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (n, row) in rows(text) {
        let [key, value] = fields::<2>(n, &row)?;
        out.entry(key.to_lowercase()).or_default().push(value.into());
    }
    Ok(out)
}

fn parse_one_turn(text: &str) -> Result<Vec<ScriptedReply>, RuleError> {
    rows(text)
        .map(|(n, row)| {
            let [pattern, prompt, reply] = fields::<3>(n, &row)?;
            let needs_prompt = match prompt {
                "yes" => true,
                "no" => false,
                other => return Err(RuleError::new(n, format!("needs_prompt must be yes or no, got `{other}`"))),
            };
            Ok(ScriptedReply { pattern: regex(n, pattern)?, needs_prompt, text: reply.into() })
        })
        .collect()
}

fn parse_red(text: &str) -> Result<Vec<(String, Regex)>, RuleError> {
    rows(text)
        .map(|(n, row)| {
            let [domain, pattern] = fields::<2>(n, &row)?;
            Ok((domain.into(), regex(n, pattern)?))
        })
        .collect()
}

fn parse_complaints(text: &str) -> Result<Vec<ComplaintRule>, RuleError> {
    rows(text)
        .map(|(n, row)| {
            let [kind, pattern, reply] = fields::<3>(n, &row)?;
            let pattern = opt(pattern).map(|p| regex(n, &p)).transpose()?;
            Ok(ComplaintRule { kind: kind.into(), pattern, text: reply.into() })
        })
        .collect()
}

fn parse_patterns(text: &str) -> Result<Vec<Regex>, RuleError> {
    crate::nlp::lines(text).map(|(n, l)| regex(n, l.trim())).collect()
}

fn parse_starters(text: &str) -> Result<Vec<Starter>, RuleError> {
    rows(text)
        .map(|(n, row)| {
            let [area, time, text] = fields::<3>(n, &row)?;
            if !["any", "morning", "afternoon", "evening"].contains(&time) {
                return Err(RuleError::new(n, format!("unknown time of day `{time}`")));
            }
            Ok(Starter { area: area.into(), time: time.into(), text: text.into() })
        })
        .collect()
}

fn parse_offense_replies(text: &str) -> Result<BTreeMap<(String, OffenseType), String>, RuleError> {
    let mut out = BTreeMap::new();
    for (n, row) in rows(text) {
        let [style, kind, reply] = fields::<3>(n, &row)?;
        let kind: OffenseType = kind.parse().map_err(|e: String| RuleError::new(n, e))?;
        out.insert((style.to_string(), kind), reply.to_string());
    }
    Ok(out)
}

impl Knowledge {
    /// The tables compiled into the binary.
    pub fn bundled() -> &'static Knowledge {
        static BUNDLED: OnceLock<Knowledge> = OnceLock::new();
        BUNDLED.get_or_init(|| Self::from_sources(|_| None).expect("bundled knowledge parses"))
    }

    /// Bundled tables, with any file of the same name in `dir` taking their
    /// place.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        let dir = dir.as_ref();
        let mut overrides = BTreeMap::new();
        for (name, _) in FILES {
            let path = dir.join(name);
            if path.is_file() {
                let text = fs::read_to_string(&path)
                    .map_err(|source| KnowledgeError::Io { path: path.display().to_string(), source })?;
                overrides.insert(*name, text);
            }
        }
        Self::from_sources(|name| overrides.get(name).cloned())
    }

    /// Builds every table, asking `source` for replacement text first.
    pub fn from_sources(source: impl Fn(&str) -> Option<String>) -> Result<Self, KnowledgeError> {
        let text = |name: &str| {
            source(name).unwrap_or_else(|| {
                FILES.iter().find(|(n, _)| *n == name).map(|(_, t)| t.to_string()).unwrap_or_default()
            })
        };
        fn rule<T>(file: &str, r: Result<T, RuleError>) -> Result<T, KnowledgeError> {
            r.map_err(|source| KnowledgeError::Rule { file: file.into(), source })
        }
        fn graph(file: &str, text: &str) -> Result<TreeletGraph, KnowledgeError> {
            TreeletGraph::parse(text).map_err(|source| KnowledgeError::Treelet { file: file.into(), source })
        }
        let acknowledgments = rule("acknowledgments.tsv", parse_multimap(&text("acknowledgments.tsv")))?
            .into_iter()
            .filter_map(|(k, mut v)| (!v.is_empty()).then(|| (k, v.swap_remove(0))))
            .collect();
        Ok(Self {
            opinions: rule("opinion.tsv", parse_opinions(&text("opinion.tsv")))?,
            movies: rule("movies.tsv", parse_movies(&text("movies.tsv")))?,
            music_prompts: rule("music_prompts.tsv", parse_topic_prompts(&text("music_prompts.tsv")))?,
            categories: rule("categories.tsv", parse_categories(&text("categories.tsv")))?,
            wiki_questions: rule("wiki_questions.tsv", parse_multimap(&text("wiki_questions.tsv")))?,
            acknowledgments,
            one_turn: rule("one_turn.tsv", parse_one_turn(&text("one_turn.tsv")))?,
            red_questions: rule("red_questions.tsv", parse_red(&text("red_questions.tsv")))?,
            complaints: rule("complaints.tsv", parse_complaints(&text("complaints.tsv")))?,
            commands: rule("commands.txt", parse_patterns(&text("commands.txt")))?,
            closing: rule("closing.txt", parse_patterns(&text("closing.txt")))?,
            starters: rule("starters.tsv", parse_starters(&text("starters.tsv")))?,
            offense_replies: rule("offense_replies.tsv", parse_offense_replies(&text("offense_replies.tsv")))?,
            movies_graph: graph("movies.toml", &text("movies.toml"))?,
            music_graph: graph("music.toml", &text("music.toml"))?,
        })
    }

    /// Whitelisted entities, keeping only reasons that pass `clean`.
    pub fn screen_opinions(&mut self, clean: impl Fn(&str) -> bool) {
        for entry in self.opinions.values_mut() {
            entry.positive.retain(|r| clean(r));
            entry.negative.retain(|r| clean(r));
        }
    }

    pub fn categories_named(&self) -> BTreeSet<&str> {
        self.categories.iter().map(|c| c.name.as_str()).collect()
    }
}
