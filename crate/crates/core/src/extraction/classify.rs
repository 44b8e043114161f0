use super::IssueClassifier;
use crate::schema::{metric_tokens, IssueRecord, IssueType};

/// Keyword phrases (lowercased token sequences) and their weights.
pub const KEYWORDS: &[(IssueType, &str, f64)] = &[
    (IssueType::BugReport, "npe", 2.0),
    (IssueType::BugReport, "nullpointerexception", 2.0),
    (IssueType::BugReport, "exception", 1.0),
    (IssueType::BugReport, "crash", 1.0),
    (IssueType::BugReport, "crashes", 1.0),
    (IssueType::BugReport, "error", 1.0),
    (IssueType::BugReport, "fails", 1.0),
    (IssueType::BugReport, "failed", 1.0),
    (IssueType::BugReport, "failure", 1.0),
    (IssueType::BugReport, "bug", 1.0),
    (IssueType::BugReport, "broken", 1.0),
    (IssueType::BugReport, "wrong", 1.0),
    (IssueType::BugReport, "incorrect", 1.0),
    (IssueType::BugReport, "regression", 1.0),
    (IssueType::BugReport, "throws", 1.0),
    (IssueType::BugReport, "hangs", 1.0),
    (IssueType::BugReport, "leak", 1.0),
    (IssueType::BugReport, "does not work", 1.0),
    (IssueType::BugReport, "doesn ' t work", 1.0),
    (IssueType::FeatureRequest, "add support", 2.0),
    (IssueType::FeatureRequest, "support for", 1.0),
    (IssueType::FeatureRequest, "feature", 1.0),
    (IssueType::FeatureRequest, "feature request", 1.0),
    (IssueType::FeatureRequest, "allow", 1.0),
    (IssueType::FeatureRequest, "add", 1.0),
    (IssueType::FeatureRequest, "new", 0.5),
    (IssueType::FeatureRequest, "ability to", 1.0),
    (IssueType::FeatureRequest, "introduce", 1.0),
    (IssueType::FeatureRequest, "would be nice", 1.0),
    (IssueType::Enhancement, "improve", 1.0),
    (IssueType::Enhancement, "improvement", 1.0),
    (IssueType::Enhancement, "enhance", 1.0),
    (IssueType::Enhancement, "enhancement", 1.0),
    (IssueType::Enhancement, "performance", 1.0),
    (IssueType::Enhancement, "optimize", 1.0),
    (IssueType::Enhancement, "faster", 1.0),
    (IssueType::Enhancement, "speed", 1.0),
    (IssueType::Enhancement, "refactor", 1.0),
    (IssueType::Enhancement, "simplify", 1.0),
    (IssueType::Enhancement, "reduce", 1.0),
    (IssueType::Enhancement, "compatibility", 1.0),
];

const TITLE_WEIGHT: f64 = 2.0;

/// Weighted keyword vote over title (double weight) and body.
///
/// The highest score wins, ties go to bug report, then feature request; an
/// issue with no keyword at all is an enhancement.
#[derive(Debug, Clone, Default)]
pub struct LexicalClassifier;

fn count_phrase(tokens: &[String], phrase: &[&str]) -> usize {
    if phrase.is_empty() || tokens.len() < phrase.len() {
        return 0;
    }
    tokens
        .windows(phrase.len())
        .filter(|w| w.iter().zip(phrase).all(|(a, b)| a == b))
        .count()
}

impl LexicalClassifier {
    pub fn scores(&self, issue: &IssueRecord) -> [f64; 3] {
        let title = metric_tokens(&issue.title);
        let body = metric_tokens(&issue.body);
        let mut scores = [0.0; 3];
        for &(ty, phrase, weight) in KEYWORDS {
            let phrase: Vec<&str> = phrase.split(' ').collect();
            let hits = TITLE_WEIGHT * count_phrase(&title, &phrase) as f64 + count_phrase(&body, &phrase) as f64;
            scores[ty as usize] += weight * hits;
        }
        scores
    }
}

impl IssueClassifier for LexicalClassifier {
    fn classify(&self, issue: &IssueRecord) -> IssueType {
        let scores = self.scores(issue);
        let best = scores.iter().cloned().fold(0.0, f64::max);
        if best == 0.0 {
            return IssueType::Enhancement;
        }
        IssueType::ALL
            .into_iter()
            .find(|&t| scores[t as usize] == best)
            .expect("some class holds the maximum")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify(title: &str, body: &str) -> IssueType {
        LexicalClassifier.classify(&IssueRecord::new(title, body))
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(classify("NPE when parsing empty file", ""), IssueType::BugReport);
        assert_eq!(classify("Add support for YAML config", ""), IssueType::FeatureRequest);
        assert_eq!(classify("Config loader", ""), IssueType::Enhancement);
        assert_eq!(classify("Improve startup performance", ""), IssueType::Enhancement);
    }

    #[test]
    fn ties_prefer_bug_report() {
        // "bug" vs "feature": one hit each, equal weight
        assert_eq!(classify("bug feature", ""), IssueType::BugReport);
        assert_eq!(classify("feature speed", ""), IssueType::FeatureRequest);
    }
}
