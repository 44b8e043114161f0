//! Dataset domain types, record validation, tokenization and the BIO codec.

mod bio;
mod io;
mod tokenize;

pub use bio::{decode_bio, encode_bio, repair_bio, BioError, BioTag, TaggedSequence};
pub use io::{read_jsonl, read_jsonl_file, write_jsonl, DatasetError, DatasetRecord};
pub use tokenize::{char_slice, metric_tokens, token_count, tokenize, Token, ATOMIC_TOKENS};

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IssueRecord {
    pub title: String,
    #[serde(default)]
    pub body: String,
}

impl IssueRecord {
    pub fn new(title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            body: body.into(),
        }
    }

    pub fn field(&self, location: Location) -> &str {
        match location {
            Location::Title => &self.title,
            Location::Body => &self.body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FileChange {
    pub path: String,
    pub diff: String,
}

impl FileChange {
    pub fn new(path: impl Into<String>, diff: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            diff: diff.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommitRecord {
    pub message: String,
    pub issues: Vec<IssueRecord>,
    pub files: Vec<FileChange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Title,
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateType {
    Actual,
    Expected,
}

impl StateType {
    pub const ALL: [StateType; 2] = [StateType::Actual, StateType::Expected];
}

/// Annotated actual/expected state text, as half-open character offsets into
/// the issue title or body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateSpan {
    pub location: Location,
    pub state_type: StateType,
    pub start: usize,
    pub end: usize,
}

impl StateSpan {
    pub fn new(location: Location, state_type: StateType, start: usize, end: usize) -> Self {
        Self {
            location,
            state_type,
            start,
            end,
        }
    }

    /// Text covered by the span, or `None` when the offsets fall outside `issue`.
    pub fn resolve(&self, issue: &IssueRecord) -> Option<String> {
        let field = issue.field(self.location);
        (self.start < self.end && self.end <= field.chars().count())
            .then(|| char_slice(field, self.start, self.end))
    }

    fn overlaps(&self, other: &StateSpan) -> bool {
        self.location == other.location && self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueType {
    BugReport,
    FeatureRequest,
    Enhancement,
}

impl IssueType {
    /// Tie-break order used by classifiers.
    pub const ALL: [IssueType; 3] = [
        IssueType::BugReport,
        IssueType::FeatureRequest,
        IssueType::Enhancement,
    ];

    pub fn type_token(self) -> &'static str {
        match self {
            IssueType::BugReport => "[BR]",
            IssueType::FeatureRequest => "[FR]",
            IssueType::Enhancement => "[EN]",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IssueAnnotation {
    pub issue_type: IssueType,
    pub spans: Vec<StateSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedCommitRecord {
    pub record: CommitRecord,
    /// One entry per `record.issues`, same order.
    pub annotations: Vec<IssueAnnotation>,
}

/// A broken invariant, naming the offending field and the rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

const DIFF_LINE_PREFIXES: [char; 8] = ['+', '-', ' ', '@', 'd', 'i', 'n', '\\'];

pub trait Validate {
    fn violations(&self) -> Vec<Violation>;
}

impl Validate for IssueRecord {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.title.trim().is_empty() {
            out.push(Violation::new("title", "must be non-empty after trimming"));
        }
        out
    }
}

impl Validate for FileChange {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.path.is_empty() {
            out.push(Violation::new("filename", "must be non-empty"));
        }
        for (n, line) in self.diff.lines().enumerate() {
            if let Some(c) = line.chars().next() {
                if !DIFF_LINE_PREFIXES.contains(&c) {
                    out.push(Violation::new(
                        format!("diff line {}", n + 1),
                        format!("unexpected leading character {c:?}"),
                    ));
                }
            }
        }
        out
    }
}

fn prefixed(prefix: &str, inner: Vec<Violation>) -> impl Iterator<Item = Violation> + '_ {
    inner
        .into_iter()
        .map(move |v| Violation::new(format!("{prefix}.{}", v.field), v.rule))
}

/// Raw-form rules: an empty issue list is allowed.
impl Validate for CommitRecord {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.message.trim().is_empty() {
            out.push(Violation::new("commit_message", "must be non-empty"));
        }
        for (i, issue) in self.issues.iter().enumerate() {
            out.extend(prefixed(&format!("issues[{i}]"), issue.violations()));
        }
        for (i, file) in self.files.iter().enumerate() {
            out.extend(prefixed(&format!("files[{i}]"), file.violations()));
        }
        out
    }
}

fn span_violations(issue: &IssueRecord, spans: &[StateSpan], field: &str) -> Vec<Violation> {
    let mut out = Vec::new();
    for (j, span) in spans.iter().enumerate() {
        let name = format!("{field}.state_info[{j}]");
        if span.start >= span.end {
            out.push(Violation::new(&name, "StateSpan ordering requires start < end"));
            continue;
        }
        let len = issue.field(span.location).chars().count();
        if span.end > len {
            out.push(Violation::new(
                &name,
                format!("StateSpan end {} exceeds {:?} length {len}", span.end, span.location),
            ));
        }
    }
    for a in 0..spans.len() {
        for b in a + 1..spans.len() {
            let (x, y) = (&spans[a], &spans[b]);
            if x.start < x.end && y.start < y.end && x.overlaps(y) {
                out.push(Violation::new(
                    format!("{field}.state_info"),
                    format!("spans {a} and {b} overlap"),
                ));
            }
        }
    }
    out
}

impl Validate for AnnotatedCommitRecord {
    fn violations(&self) -> Vec<Violation> {
        let mut out = validate_curated(&self.record);
        if self.annotations.len() != self.record.issues.len() {
            out.push(Violation::new(
                "annotations",
                format!(
                    "alignment: {} annotations for {} issues",
                    self.annotations.len(),
                    self.record.issues.len()
                ),
            ));
        }
        for (i, (issue, ann)) in self.record.issues.iter().zip(&self.annotations).enumerate() {
            out.extend(span_violations(issue, &ann.spans, &format!("issues[{i}]")));
        }
        out
    }
}

/// All invariant violations of `record`; empty iff the record is valid.
pub fn validate_record<R: Validate + ?Sized>(record: &R) -> Vec<Violation> {
    record.violations()
}

/// Raw rules plus the curated-form requirement of at least one linked issue.
pub fn validate_curated(record: &CommitRecord) -> Vec<Violation> {
    let mut out = record.violations();
    if record.issues.is_empty() {
        out.push(Violation::new("issues", "curated records require at least one issue"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn valid() -> AnnotatedCommitRecord {
        AnnotatedCommitRecord {
            record: CommitRecord {
                message: "Fix parser crash on empty input".into(),
                issues: vec![IssueRecord::new(
                    "Parser crashes on empty input",
                    "It should return an empty document.",
                )],
                files: vec![FileChange::new(
                    "src/Parser.java",
                    "@@ -1,2 +1,3 @@\n int a;\n-int b;\n+int c;\n+int d;",
                )],
            },
            annotations: vec![IssueAnnotation {
                issue_type: IssueType::BugReport,
                spans: vec![
                    StateSpan::new(Location::Title, StateType::Actual, 7, 29),
                    StateSpan::new(Location::Body, StateType::Expected, 3, 35),
                ],
            }],
        }
    }

    #[test]
    fn valid_record_has_no_violations() {
        assert_eq!(validate_record(&valid()), vec![]);
    }

    #[test]
    fn degenerate_span_is_reported() {
        let mut r = valid();
        r.annotations[0].spans[0].end = r.annotations[0].spans[0].start;
        let v = validate_record(&r);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].rule.contains("StateSpan ordering"));
    }

    #[test]
    fn misaligned_annotations_are_reported() {
        let mut r = valid();
        r.record.issues.push(IssueRecord::new("second", ""));
        let v = validate_record(&r);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].rule.contains("alignment"));
    }

    #[test]
    fn out_of_bounds_and_overlap() {
        let mut r = valid();
        r.annotations[0].spans.push(StateSpan::new(Location::Title, StateType::Expected, 20, 25));
        r.annotations[0].spans.push(StateSpan::new(Location::Body, StateType::Actual, 30, 99));
        let v = validate_record(&r);
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn raw_record_rules() {
        let raw = CommitRecord {
            message: "  ".into(),
            issues: vec![],
            files: vec![FileChange::new("", "+ok\nbogus line")],
        };
        let fields: Vec<String> = validate_record(&raw).into_iter().map(|v| v.field).collect();
        assert_eq!(fields, ["commit_message", "files[0].filename", "files[0].diff line 2"]);
        assert_eq!(validate_curated(&raw).len(), 4);
    }
}
