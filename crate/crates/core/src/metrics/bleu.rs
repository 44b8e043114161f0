use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    None,
    /// Replace a zero matched count by `epsilon` before dividing.
    AddEpsilon(f64),
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::AddEpsilon(0.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuConfig {
    pub max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: Smoothing::default(),
        }
    }
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Clipped matches and total hypothesis n-grams of order `n`.
fn modified_precision<T: AsRef<str>>(hyp: &[T], refs: &[Vec<T>], n: usize) -> (usize, usize) {
    let hyp_counts = ngram_counts(hyp, n);
    let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
    for r in refs {
        for (g, c) in ngram_counts(r, n) {
            let slot = max_ref.entry(g).or_insert(0);
            *slot = (*slot).max(c);
        }
    }
    let matched = hyp_counts
        .iter()
        .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, hyp.len().saturating_sub(n - 1))
}

/// Reference length closest to `c`, shorter one on ties.
fn closest_ref_len<T>(c: usize, refs: &[Vec<T>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

pub fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// Geometric mean over orders that have at least one hypothesis n-gram.
fn combine(stats: &[(usize, usize)], smoothing: Smoothing) -> f64 {
    let mut log_sum = 0.0;
    let mut orders = 0;
    for &(matched, total) in stats {
        if total == 0 {
            continue;
        }
        let numerator = match (matched, smoothing) {
            (0, Smoothing::None) => return 0.0,
            (0, Smoothing::AddEpsilon(eps)) => eps,
            (m, _) => m as f64,
        };
        log_sum += (numerator / total as f64).ln();
        orders += 1;
    }
    if orders == 0 {
        return 0.0;
    }
    (log_sum / orders as f64).exp()
}

/// Sentence BLEU against one or more references.
///
/// Orders longer than the hypothesis are left out of the geometric mean, so a
/// short hypothesis identical to its reference still scores 1.
pub fn sentence_bleu<T: AsRef<str>>(hyp: &[T], refs: &[Vec<T>], cfg: BleuConfig) -> f64 {
    assert!(cfg.max_n >= 1, "max_n must be at least 1");
    if hyp.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let stats: Vec<_> = (1..=cfg.max_n).map(|n| modified_precision(hyp, refs, n)).collect();
    let bp = brevity_penalty(hyp.len(), closest_ref_len(hyp.len(), refs));
    bp * combine(&stats, cfg.smoothing)
}

/// Corpus BLEU: counts pooled over all examples, no smoothing.
pub fn corpus_bleu<T: AsRef<str>>(hyps: &[Vec<T>], refs: &[Vec<Vec<T>>], max_n: usize) -> f64 {
    assert!(max_n >= 1, "max_n must be at least 1");
    let mut stats = vec![(0usize, 0usize); max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for (hyp, rs) in hyps.iter().zip(refs) {
        c += hyp.len();
        r += closest_ref_len(hyp.len(), rs);
        for (n, slot) in stats.iter_mut().enumerate() {
            let (m, t) = modified_precision(hyp, rs, n + 1);
            slot.0 += m;
            slot.1 += t;
        }
    }
    brevity_penalty(c, r) * combine(&stats, Smoothing::None)
}
