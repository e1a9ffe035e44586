//! Entity records and the in-memory entity index.
//!
//! Records are read from a line-delimited JSON file, one entity per line.
//! The index keeps two posting maps: anchortext to entity ids, and per-word
//! phonetic code to `(anchortext, entity id)` pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phonetics::{DoubleMetaphoneEncoder, PhoneticEncoder};
use crate::types::display_name;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate entity id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("duplicate entity id `{0}`")]
    Duplicate(String),
    #[error("entity `{id}`: {message}")]
    Invalid { id: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A linkable topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub pageviews: u64,
    pub anchortexts: BTreeMap<String, u64>,
    #[serde(default)]
    pub categories: BTreeSet<String>,
    #[serde(default)]
    pub article_sentences: Vec<String>,
    #[serde(default)]
    pub tils: Vec<String>,
    /// How the bot says the entity's name in running text ("cat" rather
    /// than "Cat"). Defaults to the id without its disambiguator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub talkable_name: Option<String>,
}

impl Entity {
    pub fn new(id: impl Into<String>, pageviews: u64, anchortexts: &[(&str, u64)]) -> Self {
        Self {
            id: id.into(),
            pageviews,
            anchortexts: anchortexts.iter().map(|(a, c)| (a.to_string(), *c)).collect(),
            categories: BTreeSet::new(),
            article_sentences: Vec::new(),
            tils: Vec::new(),
            talkable_name: None,
        }
    }

    pub fn with_categories(mut self, categories: &[&str]) -> Self {
        self.categories = categories.iter().map(|c| c.to_string()).collect();
        self
    }

    pub fn total_count(&self) -> u64 {
        self.anchortexts.values().sum()
    }

    pub fn name(&self) -> &str {
        display_name(&self.id)
    }

    pub fn talkable(&self) -> &str {
        self.talkable_name.as_deref().unwrap_or_else(|| self.name())
    }

    pub fn has_category(&self, category: &str) -> bool {
        self.categories.contains(category)
    }

    pub fn has_wiki_content(&self) -> bool {
        !self.article_sentences.is_empty() || !self.tils.is_empty()
    }

    fn normalize(mut self) -> Result<Self, String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.anchortexts.is_empty() {
            return Err("no anchortexts".into());
        }
        let mut merged: BTreeMap<String, u64> = BTreeMap::new();
        for (anchor, count) in std::mem::take(&mut self.anchortexts) {
            if count == 0 {
                return Err(format!("anchortext `{anchor}` has count 0"));
            }
            let key = anchor.trim().to_lowercase();
            if key.is_empty() {
                return Err("empty anchortext".into());
            }
            *merged.entry(key).or_default() += count;
        }
        self.anchortexts = merged;
        self.categories = self.categories.into_iter().map(|c| c.to_lowercase()).collect();
        Ok(self)
    }
}

/// `count(a) / Σ counts` over the entity's anchortexts; 0 when `a` is not one
/// of them.
pub fn anchortext_prob(entity: &Entity, anchortext: &str) -> f64 {
    match entity.anchortexts.get(anchortext) {
        Some(&count) => count as f64 / entity.total_count() as f64,
        None => 0.0,
    }
}

/// Immutable entity index with exact and phonetic postings.
pub struct EntityIndex {
    entities: Vec<Entity>,
    by_id: HashMap<String, usize>,
    anchortext_postings: BTreeMap<String, BTreeSet<String>>,
    phonetic_postings: BTreeMap<String, BTreeSet<(String, String)>>,
    encoder: Arc<dyn PhoneticEncoder>,
}

impl std::fmt::Debug for EntityIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EntityIndex")
            .field("entities", &self.entities.len())
            .field("anchortexts", &self.anchortext_postings.len())
            .field("phonetic_keys", &self.phonetic_postings.len())
            .finish()
    }
}

impl Default for EntityIndex {
    fn default() -> Self {
        Self::build(Vec::new()).expect("empty index is valid")
    }
}

/// Serialized form written by `index build`: records plus postings.
#[derive(Debug, Serialize, Deserialize)]
struct SerializedIndex {
    entities: Vec<Entity>,
    anchortext_postings: BTreeMap<String, BTreeSet<String>>,
    phonetic_postings: BTreeMap<String, BTreeSet<(String, String)>>,
}

impl EntityIndex {
    pub fn build(entities: Vec<Entity>) -> Result<Self, CorpusError> {
        Self::build_with(entities, Arc::new(DoubleMetaphoneEncoder::default()))
    }

    pub fn build_with(
        entities: Vec<Entity>,
        encoder: Arc<dyn PhoneticEncoder>,
    ) -> Result<Self, CorpusError> {
        let mut index = EntityIndex {
            entities: Vec::with_capacity(entities.len()),
            by_id: HashMap::new(),
            anchortext_postings: BTreeMap::new(),
            phonetic_postings: BTreeMap::new(),
            encoder,
        };
        for entity in entities {
            let id = entity.id.clone();
            let entity = entity.normalize().map_err(|message| CorpusError::Invalid { id, message })?;
            index.insert(entity)?;
        }
        Ok(index)
    }

    fn insert(&mut self, entity: Entity) -> Result<(), CorpusError> {
        if self.by_id.contains_key(&entity.id) {
            return Err(CorpusError::Duplicate(entity.id));
        }
        for anchor in entity.anchortexts.keys() {
            self.anchortext_postings
                .entry(anchor.clone())
                .or_default()
                .insert(entity.id.clone());
            let key = self.encoder.encode(anchor);
            for code in key.all_token_codes() {
                self.phonetic_postings
                    .entry(code.to_string())
                    .or_default()
                    .insert((anchor.clone(), entity.id.clone()));
            }
        }
        self.by_id.insert(entity.id.clone(), self.entities.len());
        self.entities.push(entity);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn get(&self, id: &str) -> Option<&Entity> {
        self.by_id.get(id).map(|&i| &self.entities[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn encoder(&self) -> &dyn PhoneticEncoder {
        self.encoder.as_ref()
    }

    pub fn anchortext_postings(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.anchortext_postings
    }

    pub fn phonetic_postings(&self) -> &BTreeMap<String, BTreeSet<(String, String)>> {
        &self.phonetic_postings
    }

    /// Entities having `span` among their anchortexts, ordered by id.
    pub fn lookup_exact(&self, span: &str) -> Vec<&Entity> {
        self.anchortext_postings
            .get(span)
            .map(|ids| ids.iter().filter_map(|id| self.get(id)).collect())
            .unwrap_or_default()
    }

    /// `(anchortext, entity)` pairs that share at least one per-word phonetic
    /// code with `span`. Retrieval is deliberately loose; the linker scores
    /// candidates with [`crate::phonetics::sim`] and drops weak ones.
    pub fn lookup_phonetic(&self, span: &str) -> Vec<(&str, &Entity)> {
        let key = self.encoder.encode(span);
        let mut pairs: BTreeSet<(&str, &str)> = BTreeSet::new();
        for code in key.all_token_codes() {
            if let Some(postings) = self.phonetic_postings.get(code) {
                pairs.extend(postings.iter().map(|(a, id)| (a.as_str(), id.as_str())));
            }
        }
        pairs
            .into_iter()
            .filter_map(|(a, id)| self.get(id).map(|e| (a, e)))
            .collect()
    }

    /// Loads either a record file (one entity per line) or a serialized index
    /// produced by [`EntityIndex::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
        let file = fs::File::open(path).map_err(io_err)?;
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(io_err)?;
        if first.trim_start().starts_with("{\"entities\"") {
            let mut rest = String::new();
            std::io::Read::read_to_string(&mut reader, &mut rest).map_err(io_err)?;
            first.push_str(&rest);
            return Self::from_serialized(&first);
        }
        let mut text = first;
        std::io::Read::read_to_string(&mut reader, &mut text).map_err(io_err)?;
        Self::from_records(&text)
    }

    /// Parses line-delimited entity records. Blank lines are skipped.
    pub fn from_records(text: &str) -> Result<Self, CorpusError> {
        let mut index = EntityIndex::build(Vec::new())?;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let entity: Entity = serde_json::from_str(line)
                .map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
            let entity = entity
                .normalize()
                .map_err(|message| CorpusError::Malformed { line: line_no, message })?;
            index.insert(entity).map_err(|e| match e {
                CorpusError::Duplicate(id) => CorpusError::DuplicateId { line: line_no, id },
                other => other,
            })?;
        }
        Ok(index)
    }

    fn from_serialized(text: &str) -> Result<Self, CorpusError> {
        let serialized: SerializedIndex = serde_json::from_str(text)
            .map_err(|e| CorpusError::Malformed { line: e.line(), message: e.to_string() })?;
        let index = EntityIndex::build(serialized.entities)?;
        if index.anchortext_postings != serialized.anchortext_postings
            || index.phonetic_postings != serialized.phonetic_postings
        {
            return Err(CorpusError::Malformed {
                line: 1,
                message: "stored postings do not match the entity records".into(),
            });
        }
        Ok(index)
    }

    /// Writes line-delimited records, the same format [`EntityIndex::load`] reads.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for entity in &self.entities {
            out.push_str(&serde_json::to_string(entity).expect("entity serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes the serialized index (records and postings) as one JSON document.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let serialized = SerializedIndex {
            entities: self.entities.clone(),
            anchortext_postings: self.anchortext_postings.clone(),
            phonetic_postings: self.phonetic_postings.clone(),
        };
        let json = serde_json::to_string(&serialized).expect("index serializes");
        let mut file = fs::File::create(path)
            .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
        file.write_all(json.as_bytes())
            .and_then(|_| file.write_all(b"\n"))
            .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> Entity {
        Entity::new("Cat", 10_000, &[("cat", 100), ("cats", 40)])
    }

    #[test]
    fn anchortext_probability() {
        let cat = cat();
        assert!((anchortext_prob(&cat, "cat") - 100.0 / 140.0).abs() < 1e-12);
        assert_eq!(anchortext_prob(&cat, "dog"), 0.0);
        let single = Entity::new("Solo", 5, &[("solo", 3)]);
        assert_eq!(anchortext_prob(&single, "solo"), 1.0);
    }

    #[test]
    fn single_entity_lookup() {
        let index = EntityIndex::from_records(&serde_json::to_string(&cat()).unwrap()).unwrap();
        let ids: Vec<&str> = index.lookup_exact("cat").iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["Cat"]);
        assert!(index.lookup_exact("dog").is_empty());
    }

    #[test]
    fn empty_file_gives_empty_index() {
        let index = EntityIndex::from_records("").unwrap();
        assert!(index.is_empty());
        assert!(index.lookup_exact("cat").is_empty());
        assert!(index.lookup_phonetic("cat").is_empty());
    }

    #[test]
    fn shared_span_returns_both() {
        let a = Entity::new("Mercury (planet)", 10, &[("mercury", 5)]);
        let b = Entity::new("Mercury (element)", 10, &[("mercury", 7)]);
        let index = EntityIndex::build(vec![a, b]).unwrap();
        assert_eq!(index.lookup_exact("mercury").len(), 2);
    }

    #[test]
    fn malformed_line_is_reported_with_its_number() {
        let text = format!("{}\n{{not json}}\n", serde_json::to_string(&cat()).unwrap());
        match EntityIndex::from_records(&text) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let zero = r#"{"id":"X","pageviews":1,"anchortexts":{"x":0}}"#;
        assert!(matches!(
            EntityIndex::from_records(zero),
            Err(CorpusError::Malformed { line: 1, .. })
        ));
        let none = r#"{"id":"X","pageviews":1,"anchortexts":{}}"#;
        assert!(EntityIndex::from_records(none).is_err());
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let line = serde_json::to_string(&cat()).unwrap();
        let text = format!("{line}\n{line}\n");
        assert!(matches!(
            EntityIndex::from_records(&text),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
    }

    #[test]
    fn anchortexts_are_lowercased_on_load() {
        let e = Entity::new("The Matrix", 1, &[("The Matrix", 2), ("the matrix", 3)]);
        let index = EntityIndex::build(vec![e]).unwrap();
        assert_eq!(index.get("The Matrix").unwrap().anchortexts["the matrix"], 5);
    }

    #[test]
    fn ford_v_ferrari_has_phonetic_postings() {
        let e = Entity::new("Ford v Ferrari", 20_000, &[("ford v ferrari", 50)]);
        let index = EntityIndex::build(vec![e]).unwrap();
        for code in ["FRT", "F", "FRR"] {
            assert!(index.phonetic_postings().contains_key(code), "{code}");
        }
        let hits = index.lookup_phonetic("four v ferrari");
        assert!(hits.iter().any(|(a, e)| *a == "ford v ferrari" && e.id == "Ford v Ferrari"));
        assert!(index.lookup_phonetic("zzz").is_empty());
    }

    #[test]
    fn postings_invert_the_records_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let entities = vec![
            cat(),
            Entity::new("Dog", 9_000, &[("dog", 80), ("dogs", 30)]),
            Entity::new("The Matrix", 50_000, &[("the matrix", 90), ("matrix", 10)]),
        ];
        let index = EntityIndex::build(entities).unwrap();
        for (anchor, ids) in index.anchortext_postings() {
            for id in ids {
                assert!(index.get(id).unwrap().anchortexts.contains_key(anchor));
            }
        }
        let count: usize = index.anchortext_postings().values().map(|s| s.len()).sum();
        let expected: usize = index.entities().iter().map(|e| e.anchortexts.len()).sum();
        assert_eq!(count, expected);

        let path = dir.path().join("index.json");
        index.save(&path).unwrap();
        let loaded = EntityIndex::load(&path).unwrap();
        let records = dir.path().join("records.jsonl");
        fs::write(&records, index.to_records()).unwrap();
        let reloaded = EntityIndex::load(&records).unwrap();
        for span in ["cat", "cats", "dog", "matrix", "the matrix", "cap", "dogg"] {
            let ids = |ix: &EntityIndex| -> Vec<String> {
                ix.lookup_exact(span).iter().map(|e| e.id.clone()).collect()
            };
            let phon = |ix: &EntityIndex| -> Vec<(String, String)> {
                ix.lookup_phonetic(span).iter().map(|(a, e)| (a.to_string(), e.id.clone())).collect()
            };
            assert_eq!(ids(&index), ids(&loaded));
            assert_eq!(ids(&index), ids(&reloaded));
            assert_eq!(phon(&index), phon(&loaded));
            assert_eq!(phon(&index), phon(&reloaded));
        }
    }

    proptest::proptest! {
        #[test]
        fn probabilities_sum_to_one(counts in proptest::collection::vec(1u64..1000, 1..8)) {
            let anchors: Vec<(String, u64)> =
                counts.iter().enumerate().map(|(i, c)| (format!("a{i}"), *c)).collect();
            let refs: Vec<(&str, u64)> = anchors.iter().map(|(a, c)| (a.as_str(), *c)).collect();
            let e = Entity::new("E", 1, &refs);
            let total: f64 = e.anchortexts.keys().map(|a| anchortext_prob(&e, a)).sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn exact_hits_are_phonetically_retrievable(pick in 0usize..4) {
            let entities = vec![
                cat(),
                Entity::new("Dog", 9_000, &[("dog", 80), ("dogs", 30)]),
                Entity::new("Ford v Ferrari", 20_000, &[("ford v ferrari", 50)]),
            ];
            let index = EntityIndex::build(entities).unwrap();
            let spans = ["cat", "dogs", "ford v ferrari", "cats"];
            let span = spans[pick];
            let phon: BTreeSet<&str> =
                index.lookup_phonetic(span).iter().map(|(_, e)| e.id.as_str()).collect();
            for e in index.lookup_exact(span) {
                proptest::prop_assert!(phon.contains(e.id.as_str()));
            }
        }
    }
}
