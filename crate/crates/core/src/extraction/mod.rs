//! Extraction stage: issue type classification, type-token prefixing,
//! actual/expected state tagging and the fuzzy-matching evaluator.
//!
//! Classifiers and taggers are pluggable. The shipped implementations are
//! keyword baselines and a gold-replay double for end-to-end checks.

mod classify;
mod evaluate;
mod fuzzy;
mod tagger;

pub use classify::{LexicalClassifier, KEYWORDS};
pub use evaluate::{evaluate_extraction, ClassScores, ExtractionReport, ExtractionTable, PercentRow, SpanText};
pub use fuzzy::{fuzzy_match, similarity, FuzzyMatch, DEFAULT_TAU};
pub use tagger::{GoldReplayTagger, LexicalTagger, ACTUAL_TRIGGERS, EXPECTED_TRIGGERS};

use crate::par::{self, Execution};
use crate::schema::{
    decode_bio, repair_bio, tokenize, validate_record, BioTag, IssueRecord, IssueType, Location, StateSpan,
    TaggedSequence, Token, Violation,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("{predictions} prediction lists for {gold} gold lists")]
    Misaligned { predictions: usize, gold: usize },
    #[error("invalid issue: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidIssue(Vec<Violation>),
}

/// Whether a model may be called from several threads at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMode {
    Concurrent,
    /// The harness calls the model from one thread at a time.
    Serialized,
}

pub trait IssueClassifier: Send + Sync {
    fn classify(&self, issue: &IssueRecord) -> IssueType;

    fn inference_mode(&self) -> InferenceMode {
        InferenceMode::Concurrent
    }
}

pub trait StateTagger: Send + Sync {
    /// One tag per token of `typed`. Output is repaired by [`tag_state_info`].
    fn tag(&self, typed: &TypedIssueText) -> Vec<BioTag>;

    fn inference_mode(&self) -> InferenceMode {
        InferenceMode::Concurrent
    }
}

/// Issue text with its type token in front: `"[BR] <title>\n<body>"`.
///
/// Token offsets index into `text`, so title and body offsets are shifted by
/// [`TypedIssueText::title_offset`] and [`TypedIssueText::body_offset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedIssueText {
    pub issue_type: IssueType,
    pub issue: IssueRecord,
    pub text: String,
    pub tokens: Vec<Token>,
    title_offset: usize,
    body_offset: usize,
}

impl TypedIssueText {
    pub fn type_token(&self) -> &'static str {
        self.issue_type.type_token()
    }

    pub fn title_offset(&self) -> usize {
        self.title_offset
    }

    pub fn body_offset(&self) -> usize {
        self.body_offset
    }

    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Offsets of a field span in `text` coordinates.
    pub fn to_text_span(&self, span: &StateSpan) -> (usize, usize) {
        let base = match span.location {
            Location::Title => self.title_offset,
            Location::Body => self.body_offset,
        };
        (span.start + base, span.end + base)
    }

    /// Maps a `text` range back onto title/body spans. A range that crosses
    /// the separator is split in two; parts covering only the type token or
    /// the separator are dropped.
    pub fn to_field_spans(&self, span: &StateSpan) -> Vec<StateSpan> {
        let title_end = self.title_offset + self.issue.title.chars().count();
        let body_end = self.body_offset + self.issue.body.chars().count();
        let mut out = Vec::new();
        let (s, e) = (span.start.max(self.title_offset), span.end.min(title_end));
        if s < e {
            out.push(StateSpan::new(Location::Title, span.state_type, s - self.title_offset, e - self.title_offset));
        }
        let (s, e) = (span.start.max(self.body_offset), span.end.min(body_end));
        if s < e {
            out.push(StateSpan::new(Location::Body, span.state_type, s - self.body_offset, e - self.body_offset));
        }
        out
    }
}

/// Builds the type-prefixed token sequence. Fails when the issue itself is invalid.
pub fn prepend_type_token(issue: &IssueRecord, issue_type: IssueType) -> Result<TypedIssueText, ExtractionError> {
    let violations = validate_record(issue);
    if !violations.is_empty() {
        return Err(ExtractionError::InvalidIssue(violations));
    }
    let type_token = issue_type.type_token();
    let title_offset = type_token.chars().count() + 1;
    let body_offset = title_offset + issue.title.chars().count() + 1;
    let mut text = format!("{type_token} {}", issue.title);
    if !issue.body.is_empty() {
        text.push('\n');
        text.push_str(&issue.body);
    }
    let tokens = tokenize(&text);
    debug_assert_eq!(tokens.first().map(|t| t.text.as_str()), Some(type_token));
    Ok(TypedIssueText {
        issue_type,
        issue: issue.clone(),
        text,
        tokens,
        title_offset,
        body_offset,
    })
}

pub fn classify_issue_type(issue: &IssueRecord, model: &dyn IssueClassifier) -> IssueType {
    model.classify(issue)
}

/// Runs the tagger, then forces the contract: one tag per token, the type
/// token tagged `O`, and well-formed BIO.
pub fn tag_state_info(typed: &TypedIssueText, model: &dyn StateTagger) -> TaggedSequence {
    let mut tags = model.tag(typed);
    tags.resize(typed.tokens.len(), BioTag::O);
    if let Some(first) = tags.first_mut() {
        *first = BioTag::O;
    }
    TaggedSequence {
        tokens: typed.tokens.clone(),
        tags: repair_bio(&tags),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueExtraction {
    pub issue_type: IssueType,
    pub spans: Vec<StateSpan>,
}

/// Classify, prefix, tag and decode one issue into title/body spans.
pub fn extract_issue(
    issue: &IssueRecord,
    classifier: &dyn IssueClassifier,
    tagger: &dyn StateTagger,
) -> Result<IssueExtraction, ExtractionError> {
    let issue_type = classify_issue_type(issue, classifier);
    let typed = prepend_type_token(issue, issue_type)?;
    let seq = tag_state_info(&typed, tagger);
    let spans = decode_bio(&seq, Location::Body)
        .iter()
        .flat_map(|s| typed.to_field_spans(s))
        .collect();
    Ok(IssueExtraction { issue_type, spans })
}

/// Batch extraction. Runs in parallel only when both models allow it.
pub fn extract_issues(
    issues: &[IssueRecord],
    classifier: &dyn IssueClassifier,
    tagger: &dyn StateTagger,
    exec: Execution,
) -> Vec<Result<IssueExtraction, ExtractionError>> {
    let concurrent = classifier.inference_mode() == InferenceMode::Concurrent
        && tagger.inference_mode() == InferenceMode::Concurrent;
    let exec = if concurrent { exec } else { Execution::Sequential };
    par::map(exec, issues, |issue| extract_issue(issue, classifier, tagger))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_token_comes_first() {
        let t = prepend_type_token(&IssueRecord::new("crash", ""), IssueType::BugReport).unwrap();
        assert_eq!(t.token_texts(), ["[BR]", "crash"]);
        let t = prepend_type_token(&IssueRecord::new("speed", "up"), IssueType::Enhancement).unwrap();
        assert_eq!(t.token_texts(), ["[EN]", "speed", "up"]);
        let t = prepend_type_token(&IssueRecord::new("[URL] broken", ""), IssueType::FeatureRequest).unwrap();
        assert_eq!(t.token_texts(), ["[FR]", "[URL]", "broken"]);
    }

    #[test]
    fn empty_title_is_rejected() {
        let err = prepend_type_token(&IssueRecord::new("", "body"), IssueType::FeatureRequest).unwrap_err();
        assert!(matches!(err, ExtractionError::InvalidIssue(ref v) if v[0].field == "title"));
    }

    #[test]
    fn field_span_mapping_round_trips() {
        let issue = IssueRecord::new("Parser crashes", "It should not crash.");
        let t = prepend_type_token(&issue, IssueType::BugReport).unwrap();
        let title_span = StateSpan::new(Location::Title, crate::schema::StateType::Actual, 7, 14);
        let (s, e) = t.to_text_span(&title_span);
        assert_eq!(crate::schema::char_slice(&t.text, s, e), "crashes");
        let body_span = StateSpan::new(Location::Body, crate::schema::StateType::Expected, 3, 19);
        let (s, e) = t.to_text_span(&body_span);
        assert_eq!(crate::schema::char_slice(&t.text, s, e), "should not crash");
        assert_eq!(t.to_field_spans(&StateSpan::new(Location::Body, body_span.state_type, s, e)), [body_span]);
        // a range straddling the separator splits into title and body parts
        let split = t.to_field_spans(&StateSpan::new(Location::Body, body_span.state_type, 12, 22));
        assert_eq!(split.len(), 2);
        assert_eq!(split[0].location, Location::Title);
        assert_eq!(split[1], StateSpan::new(Location::Body, body_span.state_type, 0, 2));
    }

    struct Noisy;
    impl StateTagger for Noisy {
        fn tag(&self, _typed: &TypedIssueText) -> Vec<BioTag> {
            vec![BioTag::BAs, BioTag::IAs, BioTag::IEs]
        }
    }

    #[test]
    fn tag_contract_is_enforced() {
        let t = prepend_type_token(&IssueRecord::new("a b c d", ""), IssueType::BugReport).unwrap();
        let seq = tag_state_info(&t, &Noisy);
        assert_eq!(seq.tags, [BioTag::O, BioTag::BAs, BioTag::BEs, BioTag::O, BioTag::O]);
        assert!(seq.is_well_formed());
    }
}
