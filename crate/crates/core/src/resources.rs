//! Rule tables and word lists compiled into the binary.

use std::sync::OnceLock;

use crate::linker::{EntityLinker, LinkerConfig, LinkerResources};
use crate::nlp::{DialogueActRules, NavIntentRules, NlpRules, OffenseDetector, SentimentLexicon};

pub const STOPWORDS: &str = include_str!("../resources/stopwords.txt");
pub const UNIGRAM_FREQ: &str = include_str!("../resources/unigram_freq.txt");
pub const BLACKLIST: &str = include_str!("../resources/blacklist.txt");
pub const OFFENSE_TYPES: &str = include_str!("../resources/offense_types.tsv");
pub const CRITICISM: &str = include_str!("../resources/criticism.txt");
pub const NAV_INTENT: &str = include_str!("../resources/nav_intent.tsv");
pub const DIALOGUE_ACTS: &str = include_str!("../resources/dialogue_acts.tsv");
pub const SENTIMENT: &str = include_str!("../resources/sentiment_lexicon.tsv");

#[derive(Debug, Clone)]
pub struct Resources {
    pub nlp: NlpRules,
    pub linker_resources: LinkerResources,
}

impl Resources {
    /// Parses the bundled tables once per process.
    pub fn bundled() -> &'static Resources {
        static BUNDLED: OnceLock<Resources> = OnceLock::new();
        BUNDLED.get_or_init(|| Self::parse_bundled().expect("bundled resources parse"))
    }

    fn parse_bundled() -> Result<Self, String> {
        let nlp = NlpRules {
            nav: NavIntentRules::parse(NAV_INTENT).map_err(|e| format!("nav_intent.tsv: {e}"))?,
            dialogue_acts: DialogueActRules::parse(DIALOGUE_ACTS).map_err(|e| format!("dialogue_acts.tsv: {e}"))?,
            sentiment: SentimentLexicon::parse(SENTIMENT).map_err(|e| format!("sentiment_lexicon.tsv: {e}"))?,
            offense: OffenseDetector::parse(BLACKLIST, OFFENSE_TYPES, CRITICISM)
                .map_err(|e| format!("offense tables: {e}"))?,
        };
        let linker_resources = LinkerResources::parse(STOPWORDS, UNIGRAM_FREQ)?;
        Ok(Self { nlp, linker_resources })
    }

    pub fn linker(&self) -> EntityLinker {
        self.linker_with(LinkerConfig::default())
    }

    pub fn linker_with(&self, config: LinkerConfig) -> EntityLinker {
        EntityLinker::new(self.linker_resources.clone(), config)
    }
}
