//! Entity linking: candidate spans, exact and phonetic scoring, ordering.
//!
//! Exact scores are `pageviews(E) × P(s|E)` with `P(s|E)` the share of the
//! entity's anchortext links using `s`. Spans without an exact match go
//! through the phonetic channel, where each retrieved anchortext is paired
//! with its best-matching span and kept only if the phonetic similarity
//! reaches the threshold.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{anchortext_prob, Entity, EntityIndex};
use crate::phonetics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkMethod {
    Exact,
    Phonetic,
}

/// One `(span, entity)` candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedSpan {
    pub span: String,
    pub entity_id: String,
    pub score: f64,
    pub method: LinkMethod,
    pub expected_type_match: bool,
    pub max_unigram_freq: f64,
    /// Some non-stopword token is too common to trust on its own.
    pub demoted: bool,
    /// Every occurrence of the span sits inside a longer linked span.
    pub contained: bool,
}

impl LinkedSpan {
    pub fn token_len(&self) -> usize {
        self.span.split_whitespace().count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkerOutput {
    pub candidates: Vec<LinkedSpan>,
}

impl LinkerOutput {
    pub fn top(&self) -> Option<&LinkedSpan> {
        self.candidates.first()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkerConfig {
    pub max_ngram: usize,
    pub phonetic_threshold: f64,
    pub unigram_freq_threshold: f64,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        Self { max_ngram: 5, phonetic_threshold: 0.8, unigram_freq_threshold: 0.001 }
    }
}

/// Stopword list and relative unigram frequencies.
#[derive(Debug, Clone, Default)]
pub struct LinkerResources {
    pub stopwords: HashSet<String>,
    pub unigram_freq: HashMap<String, f64>,
}

impl LinkerResources {
    /// `stopwords`: one token per line. `unigrams`: `token count` per line;
    /// frequencies are counts over the table total. `#` starts a comment.
    pub fn parse(stopwords: &str, unigrams: &str) -> Result<Self, String> {
        let stopwords = content_lines(stopwords)
            .map(|(_, l)| l.split_whitespace().next().unwrap_or_default().to_lowercase())
            .collect();
        let mut counts: Vec<(String, u64)> = Vec::new();
        for (n, line) in content_lines(unigrams) {
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default().to_lowercase();
            let count = match parts.next() {
                Some(c) => c.parse::<u64>().map_err(|e| format!("unigram line {n}: {e}"))?,
                None => 1,
            };
            counts.push((token, count));
        }
        let total: u64 = counts.iter().map(|(_, c)| c).sum();
        let unigram_freq = counts
            .into_iter()
            .map(|(t, c)| (t, if total == 0 { 0.0 } else { c as f64 / total as f64 }))
            .collect();
        Ok(Self { stopwords, unigram_freq })
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn freq(&self, token: &str) -> f64 {
        self.unigram_freq.get(token).copied().unwrap_or(0.0)
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn tokenize(utterance: &str) -> Vec<String> {
    utterance.split_whitespace().map(|t| t.to_lowercase()).collect()
}

/// Every 1..=`max_n`-gram that is not made only of stopwords, with the token
/// offsets of each occurrence.
pub fn candidate_spans_with_positions(
    tokens: &[String],
    resources: &LinkerResources,
    max_n: usize,
) -> BTreeMap<String, Vec<(usize, usize)>> {
    let mut spans: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for n in 1..=max_n.min(tokens.len()) {
        for start in 0..=tokens.len() - n {
            let window = &tokens[start..start + n];
            if window.iter().all(|t| resources.is_stopword(t)) {
                continue;
            }
            spans.entry(window.join(" ")).or_default().push((start, n));
        }
    }
    spans
}

pub fn candidate_spans(utterance: &str, resources: &LinkerResources, max_n: usize) -> BTreeSet<String> {
    candidate_spans_with_positions(&tokenize(utterance), resources, max_n).into_keys().collect()
}

/// Exact-channel scores for one span.
pub fn score_exact<'a>(index: &'a EntityIndex, span: &str) -> Vec<(&'a Entity, f64)> {
    index
        .lookup_exact(span)
        .into_iter()
        .map(|e| (e, e.pageviews as f64 * anchortext_prob(e, span)))
        .collect()
}

/// One phonetic candidate before features are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneticScore {
    pub span: String,
    pub entity_id: String,
    pub score: f64,
}

/// Phonetic-channel scores over a set of spans.
///
/// Each retrieved anchortext `a` is assigned its best span
/// `s*(a) = argmax_s sim(s, a)` (ties: more tokens, then lexicographically
/// smaller) and survives when `sim ≥ threshold`. For each `(s, E)` the
/// weight is `max count(a→E)·sim(s, a)` over surviving anchortexts of `E`
/// assigned to `s`, normalised by the entity's total anchortext count so that
/// a perfect match reproduces the exact-channel probability.
pub fn score_phonetic(index: &EntityIndex, spans: &[String], threshold: f64) -> Vec<PhoneticScore> {
    let encoder = index.encoder();
    let span_codes: Vec<(String, String)> = spans
        .iter()
        .map(|s| (s.clone(), encoder.encode(s).primary_code))
        .filter(|(_, code)| !code.is_empty())
        .collect();

    let mut retrieved: BTreeSet<(&str, &str)> = BTreeSet::new();
    for (span, _) in &span_codes {
        for (anchor, entity) in index.lookup_phonetic(span) {
            retrieved.insert((anchor, entity.id.as_str()));
        }
    }

    let mut best_span: BTreeMap<&str, Option<(&str, f64)>> = BTreeMap::new();
    for (anchor, _) in &retrieved {
        best_span.entry(anchor).or_insert_with(|| {
            let anchor_code = encoder.encode(anchor).primary_code;
            let mut best: Option<(&str, f64)> = None;
            for (span, code) in &span_codes {
                let s = phonetics::code_similarity(code, &anchor_code);
                let better = match best {
                    None => true,
                    Some((b, bs)) => match s.total_cmp(&bs) {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => {
                            let (n, bn) = (span.split_whitespace().count(), b.split_whitespace().count());
                            n > bn || (n == bn && span.as_str() < b)
                        }
                    },
                };
                if better {
                    best = Some((span.as_str(), s));
                }
            }
            best.filter(|(_, s)| *s >= threshold)
        });
    }

    let mut weights: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for (anchor, entity_id) in &retrieved {
        let Some(Some((span, s))) = best_span.get(anchor) else { continue };
        let entity = index.get(entity_id).expect("posting refers to indexed entity");
        let w = entity.anchortexts[*anchor] as f64 * s;
        let slot = weights.entry((span, entity_id)).or_insert(0.0);
        if w > *slot {
            *slot = w;
        }
    }

    weights
        .into_iter()
        .filter_map(|((span, entity_id), w)| {
            let entity = index.get(entity_id)?;
            let score = entity.pageviews as f64 * (w / entity.total_count() as f64);
            (score > 0.0).then(|| PhoneticScore {
                span: span.to_string(),
                entity_id: entity_id.to_string(),
                score,
            })
        })
        .collect()
}

/// Total order used to rank candidates, best first.
pub fn compare(a: &LinkedSpan, b: &LinkedSpan) -> Ordering {
    b.expected_type_match
        .cmp(&a.expected_type_match)
        .then_with(|| a.contained.cmp(&b.contained))
        .then_with(|| a.demoted.cmp(&b.demoted))
        .then_with(|| b.score.total_cmp(&a.score))
        .then_with(|| method_rank(a.method).cmp(&method_rank(b.method)))
        .then_with(|| b.token_len().cmp(&a.token_len()))
        .then_with(|| a.span.cmp(&b.span))
        .then_with(|| a.entity_id.cmp(&b.entity_id))
}

fn method_rank(m: LinkMethod) -> u8 {
    match m {
        LinkMethod::Exact => 0,
        LinkMethod::Phonetic => 1,
    }
}

#[derive(Debug, Clone, Default)]
pub struct EntityLinker {
    pub resources: LinkerResources,
    pub config: LinkerConfig,
}

impl EntityLinker {
    pub fn new(resources: LinkerResources, config: LinkerConfig) -> Self {
        Self { resources, config }
    }

    /// All candidates before deduplication, sorted.
    pub fn link_all(
        &self,
        index: &EntityIndex,
        utterance: &str,
        expected_types: &BTreeSet<String>,
    ) -> Vec<LinkedSpan> {
        let tokens = tokenize(utterance);
        let spans = candidate_spans_with_positions(&tokens, &self.resources, self.config.max_ngram);

        let mut raw: Vec<(String, String, f64, LinkMethod)> = Vec::new();
        let mut exact_spans: HashSet<&str> = HashSet::new();
        for span in spans.keys() {
            for (entity, score) in score_exact(index, span) {
                if score > 0.0 {
                    exact_spans.insert(span);
                    raw.push((span.clone(), entity.id.clone(), score, LinkMethod::Exact));
                }
            }
        }
        // Anchortexts are matched against every span so that one literally
        // present is claimed by its own span, but only spans without an exact
        // match produce phonetic candidates.
        let all_spans: Vec<String> = spans.keys().cloned().collect();
        for p in score_phonetic(index, &all_spans, self.config.phonetic_threshold) {
            if !exact_spans.contains(p.span.as_str()) {
                raw.push((p.span, p.entity_id, p.score, LinkMethod::Phonetic));
            }
        }

        let linked: BTreeSet<&str> = raw.iter().map(|(s, ..)| s.as_str()).collect();
        let occurrences: Vec<(usize, usize)> = linked
            .iter()
            .flat_map(|s| spans[*s].iter().copied())
            .collect();
        let contained = |span: &str| -> bool {
            spans[span].iter().all(|&(start, n)| {
                occurrences.iter().any(|&(s2, n2)| n2 > n && s2 <= start && start + n <= s2 + n2)
            })
        };

        let mut out: Vec<LinkedSpan> = raw
            .into_iter()
            .map(|(span, entity_id, score, method)| {
                let entity = index.get(&entity_id).expect("linked entity exists");
                let max_unigram_freq = span
                    .split_whitespace()
                    .filter(|t| !self.resources.is_stopword(t))
                    .map(|t| self.resources.freq(t))
                    .fold(0.0, f64::max);
                LinkedSpan {
                    expected_type_match: entity.categories.iter().any(|c| expected_types.contains(c)),
                    demoted: max_unigram_freq > self.config.unigram_freq_threshold,
                    contained: contained(&span),
                    max_unigram_freq,
                    span,
                    entity_id,
                    score,
                    method,
                }
            })
            .collect();
        out.sort_by(compare);
        out
    }

    /// Sorted candidates, keeping the best-ranked span for each entity.
    pub fn link(
        &self,
        index: &EntityIndex,
        utterance: &str,
        expected_types: &BTreeSet<String>,
    ) -> LinkerOutput {
        let mut seen = HashSet::new();
        let candidates = self
            .link_all(index, utterance, expected_types)
            .into_iter()
            .filter(|c| seen.insert(c.entity_id.clone()))
            .collect();
        LinkerOutput { candidates }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resources() -> LinkerResources {
        LinkerResources::parse("the\na\nof\ni\nto\nand\n", "i 500\nthe 400\nlove 50\nsaw 10\nmatrix 1\ncats 1\ncat 1\n")
            .unwrap()
    }

    fn toy_index() -> EntityIndex {
        EntityIndex::build(vec![
            Entity::new("Cat", 10_000, &[("cat", 100), ("cats", 40)]).with_categories(&["animal"]),
            Entity::new("Cats (musical)", 30_000, &[("cats", 60), ("cats musical", 20)])
                .with_categories(&["musical"]),
            Entity::new("The Matrix", 50_000, &[("the matrix", 90), ("matrix", 10)])
                .with_categories(&["film"]),
            Entity::new("Matrix (mathematics)", 20_000, &[("matrix", 80), ("matrices", 20)]),
            Entity::new("Ford v Ferrari", 20_000, &[("ford v ferrari", 50)]).with_categories(&["film"]),
        ])
        .unwrap()
    }

    fn linker() -> EntityLinker {
        let mut config = LinkerConfig::default();
        config.unigram_freq_threshold = 0.5;
        EntityLinker::new(resources(), config)
    }

    #[test]
    fn candidate_spans_exclude_stopword_only_ngrams() {
        let r = resources();
        let spans = candidate_spans("i saw the matrix", &r, 5);
        assert!(spans.contains("the matrix"));
        assert!(spans.contains("matrix"));
        assert!(spans.contains("saw the matrix"));
        assert!(!spans.contains("the"));
        assert!(candidate_spans("the of a", &r, 5).is_empty());
        assert!(candidate_spans("", &r, 5).is_empty());
        let six = candidate_spans("one two three four five six", &r, 5);
        assert!(six.iter().all(|s| s.split_whitespace().count() <= 5));
    }

    #[test]
    fn exact_score_for_cat() {
        let index = toy_index();
        let scores = score_exact(&index, "cat");
        assert_eq!(scores.len(), 1);
        assert!((scores[0].1 - 10_000.0 * 100.0 / 140.0).abs() < 1e-9);
        assert!(score_exact(&index, "dog").is_empty());
        let shared = score_exact(&index, "cats");
        assert_eq!(shared.len(), 2);
    }

    #[test]
    fn the_matrix_wins_for_i_saw_the_matrix() {
        let out = linker().link(&toy_index(), "i saw the matrix", &BTreeSet::new());
        let top = out.top().unwrap();
        assert_eq!((top.span.as_str(), top.entity_id.as_str()), ("the matrix", "The Matrix"));
    }

    #[test]
    fn expected_type_outranks_score() {
        let expected: BTreeSet<String> = ["animal".to_string()].into();
        let out = linker().link(&toy_index(), "i love cats", &expected);
        assert_eq!(out.top().unwrap().entity_id, "Cat");
        let out = linker().link(&toy_index(), "i love cats", &BTreeSet::new());
        assert_eq!(out.top().unwrap().entity_id, "Cats (musical)");
    }

    #[test]
    fn four_v_ferrari_links_phonetically() {
        let out = linker().link(&toy_index(), "i watched four v ferrari", &BTreeSet::new());
        let hit = out.candidates.iter().find(|c| c.entity_id == "Ford v Ferrari").unwrap();
        assert_eq!(hit.method, LinkMethod::Phonetic);
        assert_eq!(hit.span, "four v ferrari");
        // pageviews × count × sim / total, with sim = 12/13 and count = total
        assert!((hit.score - 20_000.0 * 12.0 / 13.0).abs() < 1e-9);
    }

    #[test]
    fn phonetic_self_similarity_reproduces_exact_probability() {
        let index = toy_index();
        let scores = score_phonetic(&index, &["cat".to_string()], 0.8);
        let cat = scores.iter().find(|p| p.entity_id == "Cat").unwrap();
        assert!((cat.score - 10_000.0 * 100.0 / 140.0).abs() < 1e-9);
    }

    #[test]
    fn dissimilar_spans_are_dropped() {
        let index = toy_index();
        assert!(score_phonetic(&index, &["xylophone".to_string()], 0.8).is_empty());
    }

    #[test]
    fn empty_utterance_links_nothing() {
        assert!(linker().link(&toy_index(), "", &BTreeSet::new()).is_empty());
    }

    #[test]
    fn common_words_are_demoted_not_dropped() {
        let mut l = linker();
        l.config.unigram_freq_threshold = 0.001;
        let out = l.link(&toy_index(), "i love cats", &BTreeSet::new());
        assert!(!out.is_empty());
        assert!(out.candidates.iter().all(|c| c.demoted));
    }

    #[test]
    fn larger_span_outranks_contained_span() {
        let out = linker().link_all(&toy_index(), "the matrix", &BTreeSet::new());
        let pos = |span: &str| out.iter().position(|c| c.span == span).unwrap();
        assert!(pos("the matrix") < pos("matrix"));
    }

    proptest::proptest! {
        #[test]
        fn spans_are_ngrams_of_the_utterance(words in proptest::collection::vec(
            proptest::sample::select(vec!["i", "the", "saw", "matrix", "cats", "love", "four", "v", "ferrari", "of"]),
            0..9,
        )) {
            let utterance = words.join(" ");
            let out = linker().link_all(&toy_index(), &utterance, &BTreeSet::new());
            let padded = format!(" {utterance} ");
            let r = resources();
            for c in &out {
                let needle = format!(" {} ", c.span);
                proptest::prop_assert!(padded.contains(&needle));
                proptest::prop_assert!(c.score > 0.0);
                proptest::prop_assert!(c.span.split_whitespace().any(|t| !r.is_stopword(t)));
                proptest::prop_assert!(c.token_len() <= 5);
            }
            for w in out.windows(2) {
                proptest::prop_assert_ne!(compare(&w[0], &w[1]), Ordering::Greater);
            }
            for a in &out {
                for b in &out {
                    let inside = format!(" {} ", b.span).contains(&format!(" {} ", a.span));
                    if a.contained && b.token_len() > a.token_len() && inside
                        && a.expected_type_match == b.expected_type_match
                    {
                        let pa = out.iter().position(|c| c == a).unwrap();
                        let pb = out.iter().position(|c| c == b).unwrap();
                        proptest::prop_assert!(pb < pa);
                    }
                }
            }
            proptest::prop_assert_eq!(out.clone(), linker().link_all(&toy_index(), &utterance, &BTreeSet::new()));
        }
    }
}
