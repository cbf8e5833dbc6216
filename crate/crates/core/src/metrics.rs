//! Character and word accuracy rates.
//!
//! CAR and WAR are `1 - error rate`, with the Levenshtein distance normalized
//! by the ground-truth length. A hypothesis much longer than the reference
//! (hallucinated OCR) therefore produces negative values, and they are kept
//! as such.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("ground truth is empty")]
    EmptyGroundTruth,
}

/// Unit-cost edit distance between two sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn nfc_chars(text: &str) -> Vec<char> {
    text.nfc().collect()
}

/// Maximal runs of non-whitespace.
pub fn tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn car(gt: &str, hyp: &str) -> Result<f64, MetricsError> {
    let gt = nfc_chars(gt);
    if gt.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let hyp = nfc_chars(hyp);
    Ok(1.0 - levenshtein(&gt, &hyp) as f64 / gt.len() as f64)
}

pub fn war(gt: &str, hyp: &str) -> Result<f64, MetricsError> {
    let gt: String = gt.nfc().collect();
    let hyp: String = hyp.nfc().collect();
    let gt_tokens = tokens(&gt);
    if gt_tokens.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let hyp_tokens = tokens(&hyp);
    Ok(1.0 - levenshtein(&gt_tokens, &hyp_tokens) as f64 / gt_tokens.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub doc_id: String,
    pub language: String,
    pub car: f64,
    pub war: f64,
    pub hyp_tokens: usize,
    pub gt_tokens: usize,
}

impl EvalRecord {
    pub fn evaluate(
        doc_id: impl Into<String>,
        language: impl Into<String>,
        gt: &str,
        hyp: &str,
    ) -> Result<Self, MetricsError> {
        Ok(Self {
            doc_id: doc_id.into(),
            language: language.into(),
            car: car(gt, hyp)?,
            war: war(gt, hyp)?,
            hyp_tokens: token_count(hyp),
            gt_tokens: token_count(gt),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(a: &[u8], b: &[u8]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                if x == y {
                    naive(ra, rb)
                } else {
                    1 + naive(ra, rb).min(naive(a, rb)).min(naive(ra, b))
                }
            }
        }
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(naive(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein(b"same", b"same"), 0);
        assert_eq!(levenshtein(b"", b"abc"), 3);
    }

    #[test]
    fn car_examples() {
        assert_eq!(car("halo", "halo"), Ok(1.0));
        assert_eq!(naive(b"ab", b"xyzw"), 4);
        assert_eq!(car("ab", "xyzw"), Ok(-1.0));
        assert_eq!(car("abc", ""), Ok(0.0));
        assert_eq!(car("", "x"), Err(MetricsError::EmptyGroundTruth));
    }

    #[test]
    fn car_normalizes_composition() {
        // precomposed é vs e + combining acute
        assert_eq!(car("jumlah\u{e9}", "jumlahe\u{301}"), Ok(1.0));
    }

    #[test]
    fn war_examples() {
        assert_eq!(war("kang akeh banget", "kang akeh banget"), Ok(1.0));
        assert_eq!(war("Pangudarasa", "tn anit ORI ETS Bie fr"), Ok(-5.0));
        assert_eq!(war("  \n", "x"), Err(MetricsError::EmptyGroundTruth));
    }

    #[test]
    fn token_count_examples() {
        assert_eq!(token_count(""), 0);
        assert_eq!(token_count("a  b\nc"), 3);
    }

    proptest! {
        #[test]
        fn matches_naive(a in "[abc]{0,7}", b in "[abc]{0,7}") {
            prop_assert_eq!(levenshtein(a.as_bytes(), b.as_bytes()), naive(a.as_bytes(), b.as_bytes()));
        }

        #[test]
        fn metric_axioms(a in "[ab ]{0,10}", b in "[ab ]{0,10}", c in "[ab ]{0,10}") {
            let (a, b, c) = (a.as_bytes(), b.as_bytes(), c.as_bytes());
            prop_assert_eq!(levenshtein(a, b), levenshtein(b, a));
            prop_assert!(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
        }

        #[test]
        fn self_accuracy_is_one(gt in "[a-zé ]{0,12}[a-z]") {
            prop_assert_eq!(car(&gt, &gt), Ok(1.0));
            prop_assert_eq!(war(&gt, &gt), Ok(1.0));
            prop_assert_eq!(car(&gt, ""), Ok(0.0));
        }
    }
}
