use super::{PipelineError, StageModel, TrainingPair};
use crate::extraction::InferenceMode;
use crate::schema::metric_tokens;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

type SparseVec = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredExample {
    vector: SparseVec,
    target: String,
}

/// Nearest-neighbour generator over TF-IDF bags of words.
///
/// `train` folds every source and target into the vocabulary and document
/// frequencies, then replaces the stored (source vector, target) examples.
/// Vocabulary and frequencies persist across calls, so a grounding round
/// followed by a fine-tuning round leaves the grounding vocabulary in
/// [`embed`](StageModel::embed) while only fine-tuning targets are returned
/// by [`generate`](StageModel::generate).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalGenerator {
    vocab: IndexMap<String, usize>,
    df: Vec<u64>,
    n_docs: u64,
    store: Vec<StoredExample>,
}

impl RetrievalGenerator {
    pub const KIND: &'static str = "retrieval-tfidf";

    pub fn new() -> Self {
        Self::default()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocab.keys().map(String::as_str)
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.vocab.contains_key(term)
    }

    pub fn stored_len(&self) -> usize {
        self.store.len()
    }

    fn observe(&mut self, tokens: &[String]) {
        let mut seen: Vec<usize> = tokens
            .iter()
            .map(|t| {
                let next = self.vocab.len();
                *self.vocab.entry(t.clone()).or_insert(next)
            })
            .collect();
        seen.sort_unstable();
        seen.dedup();
        self.df.resize(self.vocab.len(), 0);
        for i in seen {
            self.df[i] += 1;
        }
        self.n_docs += 1;
    }

    /// Smoothed IDF `ln((1 + N) / (1 + df)) + 1`; always positive.
    fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[index] as f64)).ln() + 1.0
    }

    /// L2-normalized TF-IDF over known terms, sorted by term index.
    fn vectorize(&self, text: &str) -> SparseVec {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for tok in metric_tokens(text) {
            if let Some(&i) = self.vocab.get(&tok) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut v: SparseVec = counts.into_iter().map(|(i, c)| (i, c * self.idf(i))).collect();
        v.sort_unstable_by_key(|&(i, _)| i);
        let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, x) in &mut v {
                *x /= norm;
            }
        }
        v
    }

    /// Cosine similarity of `source` against every stored source.
    pub fn similarities(&self, source: &str) -> Vec<f64> {
        let q = self.vectorize(source);
        self.store.iter().map(|ex| dot(&q, &ex.vector)).collect()
    }
}

fn dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

impl StageModel for RetrievalGenerator {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn train(&mut self, pairs: &[TrainingPair]) -> Result<(), PipelineError> {
        if pairs.is_empty() {
            return Err(PipelineError::EmptyTrainingSet);
        }
        for p in pairs {
            self.observe(&metric_tokens(&p.source));
            self.observe(&metric_tokens(&p.target));
        }
        self.store = pairs
            .iter()
            .map(|p| StoredExample {
                vector: self.vectorize(&p.source),
                target: p.target.clone(),
            })
            .collect();
        Ok(())
    }

    fn generate(&self, source: &str) -> Result<String, PipelineError> {
        if self.store.is_empty() {
            return Err(PipelineError::NotTrained);
        }
        let sims = self.similarities(source);
        let mut best = 0;
        for (k, &s) in sims.iter().enumerate() {
            if s > sims[best] {
                best = k;
            }
        }
        Ok(self.store[best].target.clone())
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, PipelineError> {
        if self.vocab.is_empty() {
            return Err(PipelineError::NotTrained);
        }
        let mut dense = vec![0.0; self.vocab.len()];
        for (i, x) in self.vectorize(text) {
            dense[i] = x;
        }
        Ok(dense)
    }

    fn checkpoint(&self) -> Result<serde_json::Value, PipelineError> {
        Ok(serde_json::to_value(self)?)
    }

    fn restore(&mut self, state: serde_json::Value) -> Result<(), PipelineError> {
        *self = serde_json::from_value(state)?;
        Ok(())
    }

    fn inference_mode(&self) -> InferenceMode {
        InferenceMode::Concurrent
    }
}
