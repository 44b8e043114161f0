//! Grounding analysis: standardized embeddings, per-pair Euclidean distances,
//! the Mann-Whitney U test and histogram data.

use crate::par::{self, Execution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::fmt::Write as _;
use thiserror::Error;

/// Combined sample sizes up to this use exact enumeration.
pub const EXACT_MAX_N: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} vectors, got {got}")]
    TooFewVectors { needed: usize, got: usize },
    #[error("vector {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("{left} code vectors but {right} message vectors")]
    CountMismatch { left: usize, right: usize },
    #[error("sample is empty")]
    EmptySample,
    #[error("value {0} is not a finite non-negative distance")]
    BadDistance(f64),
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },
}

fn check_dims(vectors: &[Vec<f64>], expected: usize) -> Result<(), AnalysisError> {
    match vectors.iter().position(|v| v.len() != expected) {
        Some(index) => Err(AnalysisError::DimensionMismatch {
            index,
            expected,
            found: vectors[index].len(),
        }),
        None => Ok(()),
    }
}

/// Per-dimension z-scores with population standard deviation.
/// Zero-variance dimensions become 0.
pub fn standardize(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, AnalysisError> {
    if vectors.len() < 2 {
        return Err(AnalysisError::TooFewVectors {
            needed: 2,
            got: vectors.len(),
        });
    }
    let dim = vectors[0].len();
    check_dims(vectors, dim)?;
    let n = vectors.len() as f64;
    let stats: Vec<(f64, f64)> = (0..dim)
        .map(|d| {
            let mean = vectors.iter().map(|v| v[d]).sum::<f64>() / n;
            let var = vectors.iter().map(|v| (v[d] - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect();
    Ok(vectors
        .iter()
        .map(|v| {
            v.iter()
                .zip(&stats)
                .map(|(x, &(mean, sd))| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
                .collect()
        })
        .collect())
}

/// Code vectors and message vectors, row-aligned.
pub type VectorPairs = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Standardizes code and message vectors in one shared frame.
pub fn standardize_pooled(
    code: &[Vec<f64>],
    msg: &[Vec<f64>],
) -> Result<VectorPairs, AnalysisError> {
    let pooled: Vec<Vec<f64>> = code.iter().chain(msg).cloned().collect();
    let mut z = standardize(&pooled)?;
    let msg_z = z.split_off(code.len());
    Ok((z, msg_z))
}

/// Euclidean distance between `code[i]` and `msg[i]` for every `i`.
pub fn pair_distances(code: &[Vec<f64>], msg: &[Vec<f64>], exec: Execution) -> Result<Vec<f64>, AnalysisError> {
    if code.len() != msg.len() {
        return Err(AnalysisError::CountMismatch {
            left: code.len(),
            right: msg.len(),
        });
    }
    if let Some(first) = code.first() {
        check_dims(code, first.len())?;
        check_dims(msg, first.len())?;
    }
    Ok(par::map_range(exec, code.len(), |i| {
        code[i].iter().zip(&msg[i]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Exact when the combined size is at most [`EXACT_MAX_N`], else normal.
    Auto,
    Exact,
    /// Tie-corrected variance with continuity correction.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample.
    pub u: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: PValueMethod,
}

/// Ranks with ties sharing their mean rank, 1-based.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, AnalysisError> {
    mann_whitney_u_with(a, b, PValueMethod::Auto)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: PValueMethod) -> Result<MannWhitney, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let u = ranks[..a.len()].iter().sum::<f64>() - na * (na + 1.0) / 2.0;
    let method = match method {
        PValueMethod::Auto if pooled.len() <= EXACT_MAX_N => PValueMethod::Exact,
        PValueMethod::Auto => PValueMethod::Normal,
        m => m,
    };
    let identical = pooled.iter().all(|&x| x == pooled[0]);
    let p_value = if identical {
        1.0
    } else if method == PValueMethod::Exact {
        exact_p(&ranks, a.len(), u)
    } else {
        normal_p(&ranks, na, nb, u)
    };
    Ok(MannWhitney { u, p_value, method })
}

/// Share of all size-`na` rank subsets whose U is at least as far from the
/// mean as `u`.
fn exact_p(ranks: &[f64], na: usize, u: f64) -> f64 {
    let n = ranks.len();
    assert!(n <= 20, "exact enumeration is limited to small samples");
    let nb = n - na;
    let mean = (na * nb) as f64 / 2.0;
    let observed = (u - mean).abs();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let rank_sum: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if ((rank_sum - offset) - mean).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

fn normal_p(ranks: &[f64], na: f64, nb: f64, u: f64) -> f64 {
    let n = na + nb;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_sum += t * t * t - t;
        i += j;
    }
    let var = na * nb / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = (((u - na * nb / 2.0).abs() - 0.5).max(0.0)) / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * std_normal.sf(z)).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLabel {
    BeforeGrounding,
    AfterGrounding,
}

impl SampleLabel {
    pub fn name(self) -> &'static str {
        match self {
            SampleLabel::BeforeGrounding => "before_grounding",
            SampleLabel::AfterGrounding => "after_grounding",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistanceSample {
    pub label: SampleLabel,
    pub distances: Vec<f64>,
}

impl PairDistanceSample {
    pub fn new(label: SampleLabel, distances: Vec<f64>) -> Result<Self, AnalysisError> {
        if let Some(&bad) = distances.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(AnalysisError::BadDistance(bad));
        }
        Ok(Self { label, distances })
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub label: SampleLabel,
    /// `counts.len() + 1` edges; all equal when the sample has no spread.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub median: f64,
}

/// Equal-width bins over `[min, max]`; the maximum falls in the last bin.
/// A sample without spread lands entirely in the first bin.
pub fn emit_histogram(sample: &PairDistanceSample, bins: usize) -> Result<Histogram, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::ZeroBins);
    }
    let d = &sample.distances;
    let median = median(d).ok_or(AnalysisError::EmptySample)?;
    let (lo, hi) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &x in d {
        let i = if width > 0.0 { ((x - lo) / width) as usize } else { 0 };
        counts[i.min(bins - 1)] += 1;
    }
    Ok(Histogram {
        label: sample.label,
        edges,
        counts,
        median,
    })
}

/// CSV rows `label,bin_start,bin_end,count` for each histogram in turn.
pub fn histograms_csv(hists: &[Histogram]) -> String {
    let mut out = String::from("label,bin_start,bin_end,count\n");
    for h in hists {
        for (i, c) in h.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", h.label.name(), h.edges[i], h.edges[i + 1], c);
        }
    }
    out
}

/// Code and message vectors for the same commits.
///
/// On disk: a header line holding the dimension, then one row per vector of
/// space-separated reals, alternating code row and message row per commit.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPairs {
    pub dim: usize,
    pub code: Vec<Vec<f64>>,
    pub msg: Vec<Vec<f64>>,
}

impl EmbeddingPairs {
    pub fn new(code: Vec<Vec<f64>>, msg: Vec<Vec<f64>>) -> Result<Self, AnalysisError> {
        if code.len() != msg.len() {
            return Err(AnalysisError::CountMismatch {
                left: code.len(),
                right: msg.len(),
            });
        }
        let dim = code.first().map_or(0, Vec::len);
        check_dims(&code, dim)?;
        check_dims(&msg, dim)?;
        Ok(Self { dim, code, msg })
    }

    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        let err = |line: usize, message: String| AnalysisError::Format { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing dimension header".into()))?;
        let dim: usize = header
            .trim()
            .parse()
            .map_err(|_| err(1, format!("bad dimension {:?}", header.trim())))?;
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(i + 1, format!("bad number {t:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != dim {
                return Err(err(i + 1, format!("{} values, expected {dim}", row.len())));
            }
            if let Some(x) = row.iter().find(|x| !x.is_finite()) {
                return Err(err(i + 1, format!("non-finite value {x}")));
            }
            rows.push(row);
        }
        if rows.len() % 2 != 0 {
            return Err(err(0, "odd number of rows; expected code/message pairs".into()));
        }
        let (mut code, mut msg) = (Vec::new(), Vec::new());
        for (i, row) in rows.into_iter().enumerate() {
            if i % 2 == 0 { &mut code } else { &mut msg }.push(row);
        }
        Ok(Self { dim, code, msg })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.dim);
        for (c, m) in self.code.iter().zip(&self.msg) {
            for row in [c, m] {
                let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    /// Distances after standardizing code and message vectors together.
    pub fn standardized_distances(&self, exec: Execution) -> Result<Vec<f64>, AnalysisError> {
        let (code, msg) = standardize_pooled(&self.code, &self.msg)?;
        pair_distances(&code, &msg, exec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Medians {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub u: f64,
    pub p_value: f64,
    pub method: PValueMethod,
    /// Pair counts before and after.
    pub n: [usize; 2],
    pub medians: Medians,
}

/// Compares before/after distance distributions; U refers to the before sample.
pub fn analyze_grounding(
    before: &EmbeddingPairs,
    after: &EmbeddingPairs,
    bins: usize,
    exec: Execution,
) -> Result<(GroundingReport, [Histogram; 2]), AnalysisError> {
    let b = PairDistanceSample::new(SampleLabel::BeforeGrounding, before.standardized_distances(exec)?)?;
    let a = PairDistanceSample::new(SampleLabel::AfterGrounding, after.standardized_distances(exec)?)?;
    let test = mann_whitney_u(&b.distances, &a.distances)?;
    let hb = emit_histogram(&b, bins)?;
    let ha = emit_histogram(&a, bins)?;
    let report = GroundingReport {
        u: test.u,
        p_value: test.p_value,
        method: test.method,
        n: [b.distances.len(), a.distances.len()],
        medians: Medians {
            before: hb.median,
            after: ha.median,
        },
    };
    Ok((report, [hb, ha]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standardize_examples() {
        let z = standardize(&[vec![0.0, 5.0], vec![2.0, 5.0]]).unwrap();
        assert_eq!(z, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        let again = standardize(&z).unwrap();
        for (r, s) in z.iter().zip(&again) {
            for (x, y) in r.iter().zip(s) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert!(matches!(standardize(&[vec![1.0]]), Err(AnalysisError::TooFewVectors { .. })));
        assert!(matches!(
            standardize(&[vec![1.0], vec![1.0, 2.0]]),
            Err(AnalysisError::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn distance_examples() {
        let d = pair_distances(&[vec![0.0, 0.0]], &[vec![3.0, 4.0]], Execution::Sequential).unwrap();
        assert_eq!(d, [5.0]);
        assert!(matches!(
            pair_distances(&[vec![0.0]], &[], Execution::Sequential),
            Err(AnalysisError::CountMismatch { .. })
        ));
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn mann_whitney_examples() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.method, PValueMethod::Exact);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(mann_whitney_u(&[2.0, 2.0], &[2.0, 2.0]).unwrap().p_value, 1.0);
        let same = mann_whitney_u(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(same.p_value, 1.0);
        assert_eq!(mann_whitney_u(&[], &[1.0]), Err(AnalysisError::EmptySample));
    }

    #[test]
    fn normal_approximation_hand_value() {
        // A=[1..6], B=[7..12]: U=0, mean 18, var 6·6·13/12 = 39, z = 17.5/√39
        let a: Vec<f64> = (1..=6).map(f64::from).collect();
        let b: Vec<f64> = (7..=12).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.method, PValueMethod::Normal);
        let z = 17.5 / 39f64.sqrt();
        let expected = 2.0 * Normal::new(0.0, 1.0).unwrap().sf(z);
        assert!((r.p_value - expected).abs() < 1e-15);
    }

    #[test]
    fn histogram_examples() {
        let s = PairDistanceSample::new(SampleLabel::AfterGrounding, vec![0.0, 0.2, 0.7, 1.0]).unwrap();
        let h = emit_histogram(&s, 2).unwrap();
        assert_eq!(h.counts, [2, 2]);
        assert_eq!(h.edges, [0.0, 0.5, 1.0]);
        let flat = PairDistanceSample::new(SampleLabel::BeforeGrounding, vec![3.0; 5]).unwrap();
        let hf = emit_histogram(&flat, 4).unwrap();
        assert_eq!(hf.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(hf.counts[0], 5);
        assert!(PairDistanceSample::new(SampleLabel::BeforeGrounding, vec![-1.0]).is_err());
        let empty = PairDistanceSample::new(SampleLabel::BeforeGrounding, vec![]).unwrap();
        assert_eq!(emit_histogram(&empty, 3), Err(AnalysisError::EmptySample));
        assert_eq!(emit_histogram(&s, 0), Err(AnalysisError::ZeroBins));
    }

    #[test]
    fn embedding_file_round_trip() {
        let pairs = EmbeddingPairs::new(vec![vec![1.0, 0.5], vec![0.0, -2.25]], vec![vec![3.0, 1e-9], vec![4.0, 7.0]])
            .unwrap();
        let text = pairs.to_text();
        assert!(text.starts_with("2\n1 0.5\n3 0.000000001\n"));
        assert_eq!(EmbeddingPairs::parse(&text).unwrap(), pairs);
        assert!(EmbeddingPairs::parse("2\n1 2\n").is_err());
        assert!(EmbeddingPairs::parse("2\n1 2 3\n1 2\n").is_err());
        assert!(EmbeddingPairs::parse("x\n").is_err());
    }

    fn naive_distance(a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..a.len() {
            let d = a[i] - b[i];
            acc += d * d;
        }
        acc.sqrt()
    }

    fn vectors(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, dim), n)
    }

    proptest! {
        #[test]
        fn distances_match_naive_loop(code in vectors(6, 4), msg in vectors(6, 4)) {
            for exec in [Execution::Sequential, Execution::Parallel] {
                let d = pair_distances(&code, &msg, exec).unwrap();
                for i in 0..code.len() {
                    prop_assert!((d[i] - naive_distance(&code[i], &msg[i])).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn standardized_distances_ignore_common_affine_shift(
            code in vectors(5, 3), msg in vectors(5, 3),
            shift in proptest::collection::vec(-50.0f64..50.0, 3),
            scale in proptest::collection::vec(0.5f64..4.0, 3),
        ) {
            let affine = |vs: &[Vec<f64>]| -> Vec<Vec<f64>> {
                vs.iter().map(|v| v.iter().enumerate().map(|(d, x)| x * scale[d] + shift[d]).collect()).collect()
            };
            let base = EmbeddingPairs::new(code.clone(), msg.clone()).unwrap();
            let moved = EmbeddingPairs::new(affine(&code), affine(&msg)).unwrap();
            let d0 = base.standardized_distances(Execution::Sequential).unwrap();
            let d1 = moved.standardized_distances(Execution::Sequential).unwrap();
            for (x, y) in d0.iter().zip(&d1) {
                prop_assert!((x - y).abs() < 1e-7, "{} vs {}", x, y);
            }
        }

        #[test]
        fn mann_whitney_symmetric(
            a in proptest::collection::vec(0u8..6, 1..9),
            b in proptest::collection::vec(0u8..6, 1..9),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney_u(&a, &b).unwrap();
            let ba = mann_whitney_u(&b, &a).unwrap();
            prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
        }

        #[test]
        fn histogram_conserves_count(xs in proptest::collection::vec(0.0f64..10.0, 1..60), bins in 1usize..12) {
            let s = PairDistanceSample::new(SampleLabel::AfterGrounding, xs.clone()).unwrap();
            let h = emit_histogram(&s, bins).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<usize>(), xs.len());
            prop_assert_eq!(h.edges.len(), bins + 1);
            prop_assert_eq!(h, emit_histogram(&s, bins).unwrap());
        }
    }
}
