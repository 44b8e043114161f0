use super::fuzzy::fuzzy_match;
use super::ExtractionError;
use crate::schema::{IssueRecord, Location, StateSpan, StateType};
use serde::{Deserialize, Serialize};

/// A span together with the text it covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanText {
    pub location: Location,
    pub state_type: StateType,
    pub start: usize,
    pub text: String,
}

impl SpanText {
    /// Resolves spans against their issue, skipping any that fall out of bounds.
    pub fn resolve_all(issue: &IssueRecord, spans: &[StateSpan]) -> Vec<SpanText> {
        spans
            .iter()
            .filter_map(|s| {
                s.resolve(issue).map(|text| SpanText {
                    location: s.location,
                    state_type: s.state_type,
                    start: s.start,
                    text,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl ClassScores {
    /// Undefined ratios (zero denominators) are reported as 0.
    pub fn from_counts(true_positives: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(true_positives, predicted);
        let recall = ratio(true_positives, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            true_positives,
            predicted,
            gold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub actual: ClassScores,
    pub expected: ClassScores,
    /// Counts pooled over both classes.
    pub pooled: ClassScores,
    pub micro_f1: f64,
    pub tau: f64,
}

/// Percentages laid out like the usual extraction results table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentRow {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionTable {
    pub actual_state: PercentRow,
    pub expected_state: PercentRow,
    pub micro_f1: f64,
}

impl ExtractionReport {
    pub fn class(&self, state: StateType) -> &ClassScores {
        match state {
            StateType::Actual => &self.actual,
            StateType::Expected => &self.expected,
        }
    }

    pub fn table(&self) -> ExtractionTable {
        let row = |c: &ClassScores| PercentRow {
            p: 100.0 * c.precision,
            r: 100.0 * c.recall,
            f1: 100.0 * c.f1,
        };
        ExtractionTable {
            actual_state: row(&self.actual),
            expected_state: row(&self.expected),
            micro_f1: 100.0 * self.micro_f1,
        }
    }
}

fn document_order(spans: &[SpanText]) -> Vec<&SpanText> {
    let mut v: Vec<&SpanText> = spans.iter().collect();
    v.sort_by_key(|s| (s.location, s.start));
    v
}

/// True positives per class for one issue, matching greedily in document
/// order: each prediction takes the first unmatched gold span of the same
/// state type and location that it fuzzy-matches.
fn match_issue(predicted: &[SpanText], gold: &[SpanText], tau: f64) -> [usize; 2] {
    let gold = document_order(gold);
    let mut used = vec![false; gold.len()];
    let mut tp = [0usize; 2];
    for p in document_order(predicted) {
        let hit = gold.iter().enumerate().position(|(k, g)| {
            !used[k]
                && g.state_type == p.state_type
                && g.location == p.location
                && fuzzy_match(&p.text, &g.text, tau).matched
        });
        if let Some(k) = hit {
            used[k] = true;
            tp[p.state_type as usize] += 1;
        }
    }
    tp
}

pub fn evaluate_extraction(
    predictions: &[Vec<SpanText>],
    gold: &[Vec<SpanText>],
    tau: f64,
) -> Result<ExtractionReport, ExtractionError> {
    if predictions.len() != gold.len() {
        return Err(ExtractionError::Misaligned {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    let mut tp = [0usize; 2];
    let mut pred = [0usize; 2];
    let mut gold_n = [0usize; 2];
    for (p, g) in predictions.iter().zip(gold) {
        let hits = match_issue(p, g, tau);
        for state in StateType::ALL {
            let k = state as usize;
            tp[k] += hits[k];
            pred[k] += p.iter().filter(|s| s.state_type == state).count();
            gold_n[k] += g.iter().filter(|s| s.state_type == state).count();
        }
    }
    let pooled = ClassScores::from_counts(tp[0] + tp[1], pred[0] + pred[1], gold_n[0] + gold_n[1]);
    Ok(ExtractionReport {
        actual: ClassScores::from_counts(tp[0], pred[0], gold_n[0]),
        expected: ClassScores::from_counts(tp[1], pred[1], gold_n[1]),
        micro_f1: pooled.f1,
        pooled,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::DEFAULT_TAU;

    fn st(state: StateType, start: usize, text: &str) -> SpanText {
        SpanText {
            location: Location::Body,
            state_type: state,
            start,
            text: text.into(),
        }
    }

    #[test]
    fn perfect_predictions() {
        let gold = vec![vec![
            st(StateType::Actual, 0, "it crashes on save"),
            st(StateType::Expected, 30, "it should save the file"),
        ]];
        let r = evaluate_extraction(&gold, &gold, DEFAULT_TAU).unwrap();
        assert_eq!((r.actual.f1, r.expected.f1, r.micro_f1), (1.0, 1.0, 1.0));
        assert_eq!(r.table().micro_f1, 100.0);
    }

    #[test]
    fn no_predictions() {
        let gold = vec![vec![st(StateType::Actual, 0, "it crashes")]];
        let r = evaluate_extraction(&[vec![]], &gold, DEFAULT_TAU).unwrap();
        assert_eq!((r.actual.precision, r.actual.recall, r.actual.f1), (0.0, 0.0, 0.0));
        assert_eq!(r.micro_f1, 0.0);
    }

    #[test]
    fn one_hit_one_miss_one_spurious() {
        let gold = vec![vec![
            st(StateType::Actual, 0, "the parser crashes on empty input"),
            st(StateType::Actual, 40, "memory grows without bound"),
        ]];
        let pred = vec![vec![
            st(StateType::Actual, 0, "the parser crashes on empty input"),
            st(StateType::Actual, 80, "totally unrelated words here"),
        ]];
        let r = evaluate_extraction(&pred, &gold, DEFAULT_TAU).unwrap();
        assert_eq!((r.actual.precision, r.actual.recall, r.actual.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn one_to_one_matching() {
        // two identical predictions can consume only one gold span
        let gold = vec![vec![st(StateType::Expected, 0, "should work")]];
        let pred = vec![vec![st(StateType::Expected, 0, "should work"), st(StateType::Expected, 20, "should work")]];
        let r = evaluate_extraction(&pred, &gold, DEFAULT_TAU).unwrap();
        assert_eq!(r.expected.true_positives, 1);
        assert_eq!(r.expected.precision, 0.5);
    }

    #[test]
    fn state_type_and_location_must_agree() {
        let gold = vec![vec![st(StateType::Expected, 0, "should work")]];
        let pred = vec![vec![st(StateType::Actual, 0, "should work")]];
        assert_eq!(evaluate_extraction(&pred, &gold, DEFAULT_TAU).unwrap().pooled.true_positives, 0);
        let mut moved = gold.clone();
        moved[0][0].location = Location::Title;
        assert_eq!(evaluate_extraction(&moved, &gold, DEFAULT_TAU).unwrap().pooled.true_positives, 0);
    }

    #[test]
    fn misaligned_inputs() {
        assert!(evaluate_extraction(&[vec![]], &[], DEFAULT_TAU).is_err());
    }
}
