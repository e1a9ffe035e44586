//! Phonetic keys and phonetic similarity.
//!
//! Keys are built word by word with Double Metaphone and concatenated, so
//! "harry potter" becomes `HRPTR`. Similarity is the Ratcliff/Obershelp
//! ratio `2M/T` over the characters of the concatenated primary codes.

use rphonetic::DoubleMetaphone;
use serde::{Deserialize, Serialize};

/// Longest code Double Metaphone may emit per word.
const MAX_CODE_LEN: usize = 64;

/// Phonetic representation of a (possibly multi-word) string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PhoneticKey {
    pub primary_code: String,
    pub alternate_code: Option<String>,
    /// Primary code of every word, in order.
    pub token_codes: Vec<String>,
    /// Alternate code of every word (equal to the primary when the encoder
    /// has no alternate).
    pub alternate_token_codes: Vec<String>,
}

impl PhoneticKey {
    pub fn is_empty(&self) -> bool {
        self.primary_code.is_empty()
    }

    /// Every distinct per-word code, primary and alternate.
    pub fn all_token_codes(&self) -> impl Iterator<Item = &str> {
        let mut seen: Vec<&str> = Vec::new();
        for code in self.token_codes.iter().chain(&self.alternate_token_codes) {
            if !code.is_empty() && !seen.contains(&code.as_str()) {
                seen.push(code);
            }
        }
        seen.into_iter()
    }
}

/// A word-level phonetic encoder. Double Metaphone is the only implementation
/// shipped; a pronunciation-model encoder can be slotted in behind this trait.
pub trait PhoneticEncoder: Send + Sync {
    /// Returns `(primary, alternate)` codes for one alphabetic word.
    fn encode_word(&self, word: &str) -> (String, String);

    fn encode(&self, text: &str) -> PhoneticKey {
        let mut key = PhoneticKey::default();
        for word in words(text) {
            let (primary, alternate) = self.encode_word(&word);
            if primary.is_empty() && alternate.is_empty() {
                continue;
            }
            let alternate = if alternate.is_empty() { primary.clone() } else { alternate };
            key.token_codes.push(primary);
            key.alternate_token_codes.push(alternate);
        }
        key.primary_code = key.token_codes.concat();
        let alternate = key.alternate_token_codes.concat();
        if alternate != key.primary_code {
            key.alternate_code = Some(alternate);
        }
        key
    }
}

/// Double Metaphone backed by the `rphonetic` crate.
#[derive(Debug)]
pub struct DoubleMetaphoneEncoder {
    inner: DoubleMetaphone,
}

impl Default for DoubleMetaphoneEncoder {
    fn default() -> Self {
        Self { inner: DoubleMetaphone::new(Some(MAX_CODE_LEN)) }
    }
}

impl PhoneticEncoder for DoubleMetaphoneEncoder {
    fn encode_word(&self, word: &str) -> (String, String) {
        let result = self.inner.double_metaphone(word);
        (result.primary(), result.alternate())
    }
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|w| w.chars().filter(|c| c.is_ascii_alphabetic()).collect::<String>().to_ascii_lowercase())
        .filter(|w| !w.is_empty())
}

/// Encodes `text` with the default Double Metaphone encoder.
pub fn encode(text: &str) -> PhoneticKey {
    DoubleMetaphoneEncoder::default().encode(text)
}

/// Phonetic similarity of two strings in `[0, 1]`.
pub fn sim(a: &str, b: &str) -> f64 {
    let encoder = DoubleMetaphoneEncoder::default();
    sim_with(&encoder, a, b)
}

pub fn sim_with(encoder: &dyn PhoneticEncoder, a: &str, b: &str) -> f64 {
    let ka = encoder.encode(a);
    let kb = encoder.encode(b);
    code_similarity(&ka.primary_code, &kb.primary_code)
}

/// Ratcliff/Obershelp similarity of two code strings.
pub fn code_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    sequence_ratio(&a, &b)
}

/// `2M/T` where `M` is the total size of the matching blocks found by
/// recursively taking the longest common contiguous block. Both sides empty
/// gives 0.
///
/// The block search breaks ties by position, which makes the raw ratio
/// order-dependent for some inputs; the arguments are put in lexicographic
/// order first so the result is symmetric.
pub fn sequence_ratio<T: Ord>(a: &[T], b: &[T]) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        return 0.0;
    }
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    2.0 * matching_characters(a, b) as f64 / total as f64
}

/// Sum of matching block sizes, iteratively over a work queue.
pub fn matching_characters<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut matched = 0;
    let mut queue = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = queue.pop() {
        let (i, j, k) = longest_match(a, b, alo, ahi, blo, bhi);
        if k == 0 {
            continue;
        }
        matched += k;
        if alo < i && blo < j {
            queue.push((alo, i, blo, j));
        }
        if i + k < ahi && j + k < bhi {
            queue.push((i + k, ahi, j + k, bhi));
        }
    }
    matched
}

/// Longest block `a[i..i+k] == b[j..j+k]` inside the given ranges; among
/// equally long blocks the one starting earliest in `a`, then in `b`.
fn longest_match<T: PartialEq>(
    a: &[T],
    b: &[T],
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let (mut best_i, mut best_j, mut best_k) = (alo, blo, 0);
    let width = bhi - blo;
    let mut prev = vec![0usize; width + 1];
    let mut cur = vec![0usize; width + 1];
    for i in alo..ahi {
        for j in blo..bhi {
            let col = j - blo + 1;
            if a[i] == b[j] {
                let k = prev[col - 1] + 1;
                cur[col] = k;
                if k > best_k {
                    best_i = i + 1 - k;
                    best_j = j + 1 - k;
                    best_k = k;
                }
            } else {
                cur[col] = 0;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (best_i, best_j, best_k)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference: brute-force enumeration of every common block.
    fn oracle_matches(a: &[char], b: &[char]) -> usize {
        if a.is_empty() || b.is_empty() {
            return 0;
        }
        let mut best = (0, 0, 0);
        for i in 0..a.len() {
            for j in 0..b.len() {
                let mut k = 0;
                while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                    k += 1;
                }
                if k > best.2 {
                    best = (i, j, k);
                }
            }
        }
        let (i, j, k) = best;
        if k == 0 {
            return 0;
        }
        k + oracle_matches(&a[..i], &b[..j]) + oracle_matches(&a[i + k..], &b[j + k..])
    }

    fn oracle_ratio(a: &str, b: &str) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        if a.len() + b.len() == 0 {
            return 0.0;
        }
        2.0 * oracle_matches(&a, &b) as f64 / (a.len() + b.len()) as f64
    }

    #[test]
    fn harry_potter_code() {
        assert_eq!(encode("harry potter").primary_code, "HRPTR");
        assert_eq!(encode("harry potter").token_codes, vec!["HR", "PTR"]);
    }

    #[test]
    fn empty_and_non_alphabetic_inputs_give_empty_keys() {
        assert!(encode("").is_empty());
        assert!(encode("123 !!").is_empty());
        assert_eq!(sim("", ""), 0.0);
    }

    #[test]
    fn four_and_ford_are_close() {
        let s = sim("four", "ford");
        assert!((s - oracle_ratio("FR", "FRT")).abs() < 1e-12);
        assert!(s >= 0.8, "{s}");
    }

    #[test]
    fn four_v_ferrari_matches_ford_v_ferrari() {
        let a = encode("four v ferrari");
        let b = encode("ford v ferrari");
        assert_eq!(a.primary_code, "FRFFRR");
        assert_eq!(b.primary_code, "FRTFFRR");
        let s = sim("four v ferrari", "ford v ferrari");
        assert!((s - 12.0 / 13.0).abs() < 1e-12, "{s}");
        assert!((s - oracle_ratio(&a.primary_code, &b.primary_code)).abs() < 1e-12);
    }

    #[test]
    fn identity_and_disjoint() {
        assert_eq!(sim("cat", "cat"), 1.0);
        assert_eq!(code_similarity("ABC", "XYZ"), 0.0);
    }

    #[test]
    fn ratio_matches_known_difflib_values() {
        // difflib.SequenceMatcher(None, "abcd", "bcde").ratio() == 0.75
        assert!((code_similarity("abcd", "bcde") - 0.75).abs() < 1e-12);
        // "qabxcd" vs "abycdf": blocks "ab", "cd" -> 2*4/12
        assert!((code_similarity("qabxcd", "abycdf") - 8.0 / 12.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn ratio_equals_oracle(a in "[A-D]{0,9}", b in "[A-D]{0,9}") {
            let got = code_similarity(&a, &b);
            proptest::prop_assert!((got - oracle_ratio(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn sim_is_symmetric_and_bounded(a in "[a-z ]{0,16}", b in "[a-z ]{0,16}") {
            let ab = sim(&a, &b);
            let ba = sim(&b, &a);
            proptest::prop_assert!((0.0..=1.0).contains(&ab));
            proptest::prop_assert!((ab - ba).abs() < 1e-12);
            if !encode(&a).is_empty() {
                proptest::prop_assert_eq!(sim(&a, &a), 1.0);
            }
        }

        #[test]
        fn encode_is_deterministic(a in "[a-z ]{0,20}") {
            proptest::prop_assert_eq!(encode(&a), encode(&a));
        }
    }
}
