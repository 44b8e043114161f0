//! Generation metrics: BLEU, ROUGE-L, METEOR (exact + stem stages) and CIDEr.
//!
//! Text is lowercased and split with the schema tokenizer before scoring, so
//! scores are comparable only with other runs of this crate.

mod bleu;
mod cider;
mod lcs;
mod meteor;
mod rouge;

pub use bleu::{brevity_penalty, corpus_bleu, sentence_bleu, BleuConfig, Smoothing};
pub use cider::{CiderIdf, CIDER_MAX_N};
pub use lcs::lcs_len;
pub use meteor::{align as meteor_align, chunks as meteor_chunks, meteor, stem};
pub use rouge::{rouge_l, RougeL, DEFAULT_BETA};

#[cfg(test)]
pub(crate) use lcs::oracle as lcs_oracle;

use crate::par::{self, Execution};
use crate::schema::metric_tokens;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("CIDEr needs a corpus of at least 2 documents, got {0}")]
    CorpusTooSmall(usize),
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub bleu: BleuConfig,
    pub rouge_beta: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            bleu: BleuConfig::default(),
            rouge_beta: DEFAULT_BETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScores {
    pub bleu: f64,
    pub rouge_l: RougeL,
    pub meteor: f64,
    /// Absent when the corpus is too small for IDF.
    pub cider: Option<f64>,
    pub hyp_tokens: usize,
    pub ref_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub bleu_corpus: f64,
    pub bleu_sentence_mean: f64,
    pub rouge_l: RougeL,
    pub meteor: f64,
    pub cider: Option<f64>,
    pub hyp_tokens: usize,
    pub ref_tokens: usize,
    pub examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub corpus: CorpusScores,
    pub per_example: Vec<ExampleScores>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores tokenized hypotheses against one reference each. The CIDEr IDF
/// table is built from the references.
pub fn score_tokens(
    hyps: &[Vec<String>],
    refs: &[Vec<String>],
    cfg: MetricConfig,
    exec: Execution,
) -> Result<MetricReport, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    let idf = CiderIdf::build(refs).ok();
    let per_example = par::map_range(exec, hyps.len(), |i| {
        let (h, r) = (&hyps[i], &refs[i]);
        ExampleScores {
            bleu: sentence_bleu(h, std::slice::from_ref(r), cfg.bleu),
            rouge_l: rouge_l(h, r, cfg.rouge_beta),
            meteor: meteor(h, r),
            cider: idf.as_ref().map(|idf| idf.score(h, r)),
            hyp_tokens: h.len(),
            ref_tokens: r.len(),
        }
    });
    let wrapped: Vec<Vec<Vec<String>>> = refs.iter().map(|r| vec![r.clone()]).collect();
    let corpus = CorpusScores {
        bleu_corpus: if hyps.is_empty() { 0.0 } else { corpus_bleu(hyps, &wrapped, cfg.bleu.max_n) },
        bleu_sentence_mean: mean(per_example.iter().map(|e| e.bleu)),
        rouge_l: RougeL {
            p: mean(per_example.iter().map(|e| e.rouge_l.p)),
            r: mean(per_example.iter().map(|e| e.rouge_l.r)),
            f: mean(per_example.iter().map(|e| e.rouge_l.f)),
        },
        meteor: mean(per_example.iter().map(|e| e.meteor)),
        cider: idf.as_ref().map(|_| mean(per_example.iter().filter_map(|e| e.cider))),
        hyp_tokens: per_example.iter().map(|e| e.hyp_tokens).sum(),
        ref_tokens: per_example.iter().map(|e| e.ref_tokens).sum(),
        examples: per_example.len(),
    };
    Ok(MetricReport { corpus, per_example })
}

/// Tokenizes raw strings with [`metric_tokens`] and scores them.
pub fn score_texts<S: AsRef<str> + Sync>(
    hyps: &[S],
    refs: &[S],
    cfg: MetricConfig,
    exec: Execution,
) -> Result<MetricReport, MetricError> {
    let tok = |xs: &[S]| par::map(exec, xs, |s| metric_tokens(s.as_ref()));
    score_tokens(&tok(hyps), &tok(refs), cfg, exec)
}
