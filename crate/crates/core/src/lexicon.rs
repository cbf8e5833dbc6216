//! Bilingual word dictionaries and similar-word selection for few-shot hints.
//!
//! Selection runs in three steps: score every dictionary word against each
//! OCR token with a longest-common-substring similarity, drop tokens that
//! match too many entries to be informative, then cap the pooled pairs by
//! seeded random sampling.

use std::collections::HashSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("dictionary has no entries")]
    EmptyDictionary,
    #[error("invalid selection config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordPair {
    pub indonesian: String,
    pub local: String,
}

impl WordPair {
    pub fn new(indonesian: &str, local: &str) -> Option<Self> {
        let indonesian = normalize_field(indonesian);
        let local = normalize_field(local);
        if indonesian.is_empty() || local.is_empty() {
            return None;
        }
        Some(Self { indonesian, local })
    }
}

fn normalize_field(s: &str) -> String {
    s.trim().nfc().collect()
}

fn fold(s: &str) -> Vec<char> {
    s.nfc().flat_map(char::to_lowercase).collect()
}

/// Immutable after construction; safe to share behind an `Arc`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    language: String,
    entries: Vec<WordPair>,
    folded_local: Vec<Vec<char>>,
}

impl Dictionary {
    /// Builds a dictionary, dropping duplicate pairs (first occurrence wins).
    pub fn from_pairs(
        language: impl Into<String>,
        pairs: impl IntoIterator<Item = WordPair>,
    ) -> Result<Self, LexiconError> {
        let mut seen = HashSet::new();
        let entries: Vec<WordPair> = pairs.into_iter().filter(|p| seen.insert(p.clone())).collect();
        if entries.is_empty() {
            return Err(LexiconError::EmptyDictionary);
        }
        let folded_local = entries.iter().map(|e| fold(&e.local)).collect();
        Ok(Self { language: language.into(), entries, folded_local })
    }

    pub fn parse(text: &str, language: impl Into<String>) -> Result<Self, LexiconError> {
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if let Some(pair) = parse_line(idx + 1, line)? {
                pairs.push(pair);
            }
        }
        Self::from_pairs(language, pairs)
    }

    pub fn load(path: impl AsRef<Path>, language: impl Into<String>) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, language)
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn entries(&self) -> &[WordPair] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn load_dictionary(path: impl AsRef<Path>, language: &str) -> Result<Dictionary, LexiconError> {
    Dictionary::load(path, language)
}

fn parse_line(line_no: usize, raw: &str) -> Result<Option<WordPair>, LexiconError> {
    let line = raw.trim_start_matches('\u{feff}').trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() || line.trim_start().starts_with('#') {
        return Ok(None);
    }
    let malformed = |reason: &str| LexiconError::MalformedLine { line: line_no, reason: reason.into() };
    let mut fields = line.split('\t');
    let (Some(ind), Some(local)) = (fields.next(), fields.next()) else {
        return Err(malformed("expected `indonesian<TAB>local`"));
    };
    if fields.next().is_some() {
        return Err(malformed("more than two tab-separated fields"));
    }
    WordPair::new(ind, local).map(Some).ok_or_else(|| malformed("empty field"))
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub pairs: usize,
    pub duplicates: usize,
    pub errors: Vec<LineError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LineError {
    pub line: usize,
    pub reason: String,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty() && self.pairs > 0
    }
}

/// Checks every line instead of stopping at the first problem.
pub fn validate_dictionary(text: &str) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        match parse_line(idx + 1, line) {
            Ok(Some(pair)) => {
                if seen.insert(pair) {
                    report.pairs += 1;
                } else {
                    report.duplicates += 1;
                }
            }
            Ok(None) => {}
            Err(LexiconError::MalformedLine { line, reason }) => {
                report.errors.push(LineError { line, reason })
            }
            Err(_) => unreachable!("parse_line only reports malformed lines"),
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LcsKind {
    /// Contiguous run of shared characters.
    #[default]
    Substring,
    /// Shared characters in order, gaps allowed.
    Subsequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub sim_threshold: f64,
    /// Tokens with more matches than this are dropped entirely.
    pub k_max_matches: usize,
    pub pair_cap: usize,
    pub rng_seed: Option<u64>,
    #[serde(default)]
    pub lcs_kind: LcsKind,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            sim_threshold: 0.7,
            k_max_matches: 50,
            pair_cap: 10,
            rng_seed: None,
            lcs_kind: LcsKind::Substring,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), LexiconError> {
        if !(self.sim_threshold > 0.0 && self.sim_threshold <= 1.0) {
            return Err(LexiconError::InvalidConfig(format!(
                "sim_threshold must lie in (0, 1], got {}",
                self.sim_threshold
            )));
        }
        if self.pair_cap == 0 || self.k_max_matches == 0 {
            return Err(LexiconError::InvalidConfig("pair_cap and k_max_matches must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarPair {
    pub token: String,
    pub candidate: String,
    /// Indonesian gloss of `candidate`.
    pub gloss: String,
    pub score: f64,
}

fn lcs_substring_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

fn lcs_subsequence_chars(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Length, in Unicode scalar values, of the longest contiguous run shared by
/// `a` and `b` after case folding.
pub fn lcs_substring_len(a: &str, b: &str) -> usize {
    lcs_substring_chars(&fold(a), &fold(b))
}

pub fn lcs_subsequence_len(a: &str, b: &str) -> usize {
    lcs_subsequence_chars(&fold(a), &fold(b))
}

fn dice(lcs: usize, la: usize, lb: usize) -> f64 {
    if la + lb == 0 {
        1.0
    } else {
        2.0 * lcs as f64 / (la + lb) as f64
    }
}

fn similarity_chars(a: &[char], b: &[char], kind: LcsKind) -> f64 {
    let lcs = match kind {
        LcsKind::Substring => lcs_substring_chars(a, b),
        LcsKind::Subsequence => lcs_subsequence_chars(a, b),
    };
    dice(lcs, a.len(), b.len())
}

/// `2 * lcs / (|a| + |b|)`, 1.0 for two empty strings.
pub fn similarity(a: &str, b: &str) -> f64 {
    similarity_chars(&fold(a), &fold(b), LcsKind::Substring)
}

pub fn similarity_with(a: &str, b: &str, kind: LcsKind) -> f64 {
    similarity_chars(&fold(a), &fold(b), kind)
}

/// Every dictionary word scoring at least `cfg.sim_threshold` against
/// `token`, best first; ties broken by candidate then gloss.
pub fn find_similar(token: &str, dict: &Dictionary, cfg: &SelectionConfig) -> Vec<SimilarPair> {
    let folded = fold(token);
    if folded.is_empty() {
        return Vec::new();
    }
    let mut out: Vec<SimilarPair> = dict
        .entries
        .iter()
        .zip(&dict.folded_local)
        .filter_map(|(entry, local)| {
            // lcs <= min length bounds the best achievable score
            let ceiling = dice(folded.len().min(local.len()), folded.len(), local.len());
            if ceiling < cfg.sim_threshold {
                return None;
            }
            let score = similarity_chars(&folded, local, cfg.lcs_kind);
            (score >= cfg.sim_threshold).then(|| SimilarPair {
                token: token.to_string(),
                candidate: entry.local.clone(),
                gloss: entry.indonesian.clone(),
                score,
            })
        })
        .collect();
    out.sort_by(order_pairs);
    out
}

fn order_pairs(a: &SimilarPair, b: &SimilarPair) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.token.cmp(&b.token))
        .then_with(|| a.candidate.cmp(&b.candidate))
        .then_with(|| a.gloss.cmp(&b.gloss))
}

/// Whitespace tokens with surrounding punctuation stripped, first occurrence
/// only, in text order.
pub fn candidate_tokens(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .filter(|t| seen.insert(t.to_string()))
        .map(str::to_string)
        .collect()
}

/// Pools similar pairs across `tokens`, dropping any token with more than
/// `k_max_matches` matches, and samples down to `pair_cap` pairs when the
/// pool is larger. Output is ordered by score.
pub fn select_pairs<S: AsRef<str>>(
    tokens: &[S],
    dict: &Dictionary,
    cfg: &SelectionConfig,
) -> Vec<SimilarPair> {
    let mut pool = Vec::new();
    for token in tokens {
        let matches = find_similar(token.as_ref(), dict, cfg);
        if matches.len() <= cfg.k_max_matches {
            pool.extend(matches);
        }
    }
    if pool.len() > cfg.pair_cap {
        let mut rng = match cfg.rng_seed {
            Some(seed) => ChaCha8Rng::seed_from_u64(seed),
            None => ChaCha8Rng::from_os_rng(),
        };
        let mut picked = rand::seq::index::sample(&mut rng, pool.len(), cfg.pair_cap).into_vec();
        picked.sort_unstable();
        pool = picked.into_iter().map(|i| pool[i].clone()).collect();
    }
    pool.sort_by(order_pairs);
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_lcs(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.to_lowercase().chars().collect();
        let b: Vec<char> = b.to_lowercase().chars().collect();
        let mut best = 0;
        for i in 0..a.len() {
            for j in i + 1..=a.len() {
                let sub = &a[i..j];
                if b.windows(sub.len()).any(|w| w == sub) {
                    best = best.max(sub.len());
                }
            }
        }
        best
    }

    fn dict(words: &[&str]) -> Dictionary {
        Dictionary::from_pairs("jav", words.iter().map(|w| WordPair::new(&format!("id-{w}"), w).unwrap()))
            .unwrap()
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(brute_lcs("ABAB", "BABA"), 3);
        assert_eq!(lcs_substring_len("ABAB", "BABA"), 3);
        assert_eq!(lcs_substring_len("kucing", "kucing"), 6);
        assert_eq!(lcs_substring_len("abc", "xyz"), 0);
        assert_eq!(lcs_substring_len("", ""), 0);
        assert_eq!(lcs_substring_len("NDU", "ndu"), 3);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity("kucing", "kucing"), 1.0);
        assert_eq!(brute_lcs("nduweni", "ndu"), 3);
        assert!((similarity("nduweni", "ndu") - 0.6).abs() < 1e-12);
        assert_eq!(similarity("abc", "xyz"), 0.0);
        assert_eq!(similarity("", ""), 1.0);
    }

    #[test]
    fn subsequence_variant() {
        assert_eq!(lcs_subsequence_len("nack", "naek"), 3);
        assert_eq!(lcs_substring_len("nack", "naek"), 2);
        assert!((similarity_with("nack", "naek", LcsKind::Subsequence) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn find_similar_examples() {
        let d = dict(&["kucing", "kucingé", "asu", "naek"]);
        let cfg = SelectionConfig::default();
        let hits = find_similar("kucing", &d, &cfg);
        assert_eq!(hits[0].candidate, "kucing");
        assert_eq!(hits[0].score, 1.0);
        assert_eq!(hits[0].gloss, "id-kucing");
        assert_eq!(hits.len(), 2);

        let strict = SelectionConfig { sim_threshold: 1.0, ..cfg.clone() };
        assert!(find_similar("kucin", &d, &strict).is_empty());

        // contiguous "na" only: 2*2/8 = 0.5 under substring similarity
        assert_eq!(brute_lcs("nack", "naek"), 2);
        assert!(find_similar("nack", &d, &cfg).is_empty());
        let sub = SelectionConfig { lcs_kind: LcsKind::Subsequence, ..cfg };
        let hits = find_similar("nack", &d, &sub);
        assert_eq!(hits.len(), 1);
        assert!((hits[0].score - 0.75).abs() < 1e-12);
    }

    #[test]
    fn parse_and_errors() {
        let d =
            Dictionary::parse("# comment\nmakan\tnedha\n\nmakan\tnedha\n minum \t ngombe \n", "jav").unwrap();
        assert_eq!(
            d.entries(),
            &[WordPair::new("makan", "nedha").unwrap(), WordPair::new("minum", "ngombe").unwrap()]
        );
        assert!(matches!(
            Dictionary::parse("makan nedha\n", "jav"),
            Err(LexiconError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            Dictionary::parse("a\tb\nc\t \n", "jav"),
            Err(LexiconError::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(Dictionary::parse("# only\n", "jav"), Err(LexiconError::EmptyDictionary)));
    }

    #[test]
    fn validate_collects_all_errors() {
        let report = validate_dictionary("a\tb\nbad\nc\td\nalso bad\na\tb\n");
        assert_eq!(report.pairs, 2);
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![2, 4]);
        assert!(!report.is_ok());
    }

    #[test]
    fn tokens_are_cleaned_and_deduplicated() {
        assert_eq!(candidate_tokens("ndu- weni, weni. : :"), vec!["ndu", "weni"]);
    }

    #[test]
    fn relevance_filter_boundary() {
        // 51 words all containing "bana" exactly once with length 5 => score 0.888...
        let words: Vec<String> =
            (0..51).map(|i| format!("bana{}", char::from_u32(0x100 + i).unwrap())).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let d51 = dict(&refs);
        let d50 = dict(&refs[..50]);
        let cfg = SelectionConfig { pair_cap: 100, ..Default::default() };
        assert_eq!(select_pairs(&["bana"], &d50, &cfg).len(), 50);
        assert!(select_pairs(&["bana"], &d51, &cfg).is_empty());
    }

    #[test]
    fn cap_and_seed() {
        let words: Vec<String> = (0..12).map(|i| format!("tembung{i:02}")).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let d = dict(&refs);
        let cfg = SelectionConfig { rng_seed: Some(7), ..Default::default() };
        let a = select_pairs(&["tembung"], &d, &cfg);
        let b = select_pairs(&["tembung"], &d, &cfg);
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
        assert!(select_pairs::<&str>(&[], &d, &cfg).is_empty());
    }

    proptest! {
        #[test]
        fn lcs_matches_brute(a in "[abé]{0,12}", b in "[abé]{0,12}") {
            prop_assert_eq!(lcs_substring_len(&a, &b), brute_lcs(&a, &b));
        }

        #[test]
        fn similarity_bounds(a in "[a-dÀ]{0,8}", b in "[a-dà]{0,8}") {
            let s = similarity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, similarity(&b, &a));
            prop_assert_eq!(similarity(&a, &a), 1.0);
        }

        #[test]
        fn lower_threshold_never_shrinks(token in "[ab]{1,5}", hi in 0.5f64..1.0, drop in 0.0f64..0.4) {
            let d = dict(&["a", "ab", "aab", "bab", "abba", "babab", "bbbb"]);
            let high = SelectionConfig { sim_threshold: hi, ..Default::default() };
            let low = SelectionConfig { sim_threshold: (hi - drop).max(0.01), ..Default::default() };
            let h = find_similar(&token, &d, &high);
            let l = find_similar(&token, &d, &low);
            prop_assert!(h.iter().all(|p| l.contains(p)));
        }
    }
}
