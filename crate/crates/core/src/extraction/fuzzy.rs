use crate::metrics::lcs_len;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TAU: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyMatch {
    pub similarity: f64,
    pub matched: bool,
}

/// Character LCS length divided by the mean of the two lengths (in Unicode
/// scalar values). Two empty strings are identical.
pub fn similarity(predicted: &str, gold: &str) -> f64 {
    let a: Vec<char> = predicted.chars().collect();
    let b: Vec<char> = gold.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let mean_len = (a.len() + b.len()) as f64 / 2.0;
    lcs_len(&a, &b) as f64 / mean_len
}

pub fn fuzzy_match(predicted: &str, gold: &str, tau: f64) -> FuzzyMatch {
    let similarity = similarity(predicted, gold);
    FuzzyMatch {
        similarity,
        matched: similarity >= tau,
    }
}
