use rust_stemmers::{Algorithm, Stemmer};
use std::sync::OnceLock;

pub const ALPHA: f64 = 0.9;
pub const BETA: f64 = 3.0;
pub const GAMMA: f64 = 0.5;

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Snowball (Porter2) English stem of a lowercased token.
pub fn stem(token: &str) -> String {
    stemmer().stem(&token.to_lowercase()).into_owned()
}

/// Aligned `(hyp index, ref index)` pairs, sorted by hypothesis index.
pub type Alignment = Vec<(usize, usize)>;

fn align_stage(
    hyp_keys: &[String],
    ref_keys: &[String],
    hyp_used: &mut [Option<usize>],
    ref_used: &mut [bool],
) {
    for i in 0..hyp_keys.len() {
        if hyp_used[i].is_some() {
            continue;
        }
        let adjacent = i
            .checked_sub(1)
            .and_then(|p| hyp_used[p])
            .map(|j| j + 1)
            .filter(|&j| j < ref_keys.len() && !ref_used[j] && ref_keys[j] == hyp_keys[i]);
        let pick = adjacent.or_else(|| (0..ref_keys.len()).find(|&j| !ref_used[j] && ref_keys[j] == hyp_keys[i]));
        if let Some(j) = pick {
            hyp_used[i] = Some(j);
            ref_used[j] = true;
        }
    }
}

/// One-to-one unigram alignment: exact matches first, then Snowball stems.
pub fn align<T: AsRef<str>>(hyp: &[T], reference: &[T]) -> Alignment {
    let lower = |xs: &[T]| xs.iter().map(|t| t.as_ref().to_lowercase()).collect::<Vec<_>>();
    let (h, r) = (lower(hyp), lower(reference));
    let mut hyp_used = vec![None; h.len()];
    let mut ref_used = vec![false; r.len()];
    align_stage(&h, &r, &mut hyp_used, &mut ref_used);
    let hs: Vec<String> = h.iter().map(|t| stem(t)).collect();
    let rs: Vec<String> = r.iter().map(|t| stem(t)).collect();
    align_stage(&hs, &rs, &mut hyp_used, &mut ref_used);
    hyp_used
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect()
}

/// Runs of alignments adjacent in both the hypothesis and the reference.
pub fn chunks(alignment: &[(usize, usize)]) -> usize {
    if alignment.is_empty() {
        return 0;
    }
    1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

pub fn meteor<T: AsRef<str>>(hyp: &[T], reference: &[T]) -> f64 {
    let alignment = align(hyp, reference);
    let m = alignment.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / hyp.len() as f64;
    let r = m / reference.len() as f64;
    let fmean = p * r / (ALPHA * p + (1.0 - ALPHA) * r);
    let penalty = GAMMA * (chunks(&alignment) as f64 / m).powf(BETA);
    fmean * (1.0 - penalty)
}
