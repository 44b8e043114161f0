use super::MetricError;
use std::collections::{HashMap, HashSet};

pub const CIDER_MAX_N: usize = 4;
const SCALE: f64 = 10.0;

type Ngram = Vec<String>;

fn ngrams(tokens: &[String], n: usize) -> HashMap<Ngram, f64> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w.to_vec()).or_insert(0.0) += 1.0;
        }
    }
    out
}

/// Document frequencies of every n-gram (orders 1..=4) over a reference corpus.
///
/// Read-only once built, so per-example scoring can run in parallel.
#[derive(Debug, Clone)]
pub struct CiderIdf {
    n_docs: usize,
    df: HashMap<Ngram, usize>,
}

impl CiderIdf {
    pub fn build(corpus: &[Vec<String>]) -> Result<Self, MetricError> {
        if corpus.len() < 2 {
            return Err(MetricError::CorpusTooSmall(corpus.len()));
        }
        let mut df = HashMap::new();
        for doc in corpus {
            let mut seen: HashSet<Ngram> = HashSet::new();
            for n in 1..=CIDER_MAX_N {
                seen.extend(ngrams(doc, n).into_keys());
            }
            for g in seen {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        Ok(Self {
            n_docs: corpus.len(),
            df,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// `ln(N / df)`; n-grams unseen in the corpus count as `df = 1`.
    pub fn idf(&self, gram: &[String]) -> f64 {
        let df = self.df.get(gram).copied().unwrap_or(0).max(1);
        (self.n_docs as f64 / df as f64).ln()
    }

    fn vector(&self, tokens: &[String], n: usize) -> HashMap<Ngram, f64> {
        let mut v = ngrams(tokens, n);
        for (g, w) in v.iter_mut() {
            *w *= self.idf(g);
        }
        v
    }

    /// `10 · mean_n cos(g_n(hyp), g_n(ref))`.
    pub fn score(&self, hyp: &[String], reference: &[String]) -> f64 {
        let total: f64 = (1..=CIDER_MAX_N)
            .map(|n| cosine(&self.vector(hyp, n), &self.vector(reference, n)))
            .fold(0.0, |acc, v| acc + v);
        SCALE * total / CIDER_MAX_N as f64
    }
}

fn cosine(a: &HashMap<Ngram, f64>, b: &HashMap<Ngram, f64>) -> f64 {
    let norm = |v: &HashMap<Ngram, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).fold(0.0, |acc, v| acc + v);
    dot / (na * nb)
}
