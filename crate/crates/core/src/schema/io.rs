use super::{AnnotatedCommitRecord, CommitRecord, FileChange, IssueAnnotation, IssueRecord, IssueType, StateSpan};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: issue {issue} {reason}")]
    PartialAnnotation { line: usize, issue: usize, reason: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct FileJson {
    filename: String,
    #[serde(default)]
    diff: String,
}

#[derive(Serialize, Deserialize)]
struct IssueJson {
    title: String,
    #[serde(default)]
    body: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    issue_type: Option<IssueType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_info: Option<Vec<StateSpan>>,
}

#[derive(Serialize, Deserialize)]
struct RecordJson {
    commit_message: String,
    #[serde(default)]
    issues: Vec<IssueJson>,
    #[serde(default)]
    files: Vec<FileJson>,
}

/// One JSONL line: a base-part record, optionally with fine-part annotations
/// (per-issue `type` and `state_info`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRecord {
    pub record: CommitRecord,
    pub annotations: Option<Vec<IssueAnnotation>>,
}

impl DatasetRecord {
    pub fn base(record: CommitRecord) -> Self {
        Self {
            record,
            annotations: None,
        }
    }

    pub fn annotated(&self) -> Option<AnnotatedCommitRecord> {
        self.annotations.as_ref().map(|a| AnnotatedCommitRecord {
            record: self.record.clone(),
            annotations: a.clone(),
        })
    }

    pub fn from_json_line(line_no: usize, line: &str) -> Result<Self, DatasetError> {
        let raw: RecordJson =
            serde_json::from_str(line).map_err(|source| DatasetError::Json { line: line_no, source })?;
        let annotated = raw.issues.iter().filter(|i| i.issue_type.is_some()).count();
        if annotated != 0 && annotated != raw.issues.len() {
            let issue = raw.issues.iter().position(|i| i.issue_type.is_none()).unwrap_or(0);
            return Err(DatasetError::PartialAnnotation {
                line: line_no,
                issue,
                reason: "lacks \"type\" while other issues are annotated",
            });
        }
        if annotated == 0 {
            if let Some(issue) = raw.issues.iter().position(|i| i.state_info.is_some()) {
                return Err(DatasetError::PartialAnnotation {
                    line: line_no,
                    issue,
                    reason: "has \"state_info\" without \"type\"",
                });
            }
        }
        let annotations = (annotated > 0).then(|| {
            raw.issues
                .iter()
                .map(|i| IssueAnnotation {
                    issue_type: i.issue_type.expect("checked above"),
                    spans: i.state_info.clone().unwrap_or_default(),
                })
                .collect()
        });
        Ok(DatasetRecord {
            record: CommitRecord {
                message: raw.commit_message,
                issues: raw.issues.into_iter().map(|i| IssueRecord::new(i.title, i.body)).collect(),
                files: raw.files.into_iter().map(|f| FileChange::new(f.filename, f.diff)).collect(),
            },
            annotations,
        })
    }

    pub fn to_json_line(&self) -> String {
        let issues = self
            .record
            .issues
            .iter()
            .enumerate()
            .map(|(k, issue)| {
                let ann = self.annotations.as_ref().and_then(|a| a.get(k));
                IssueJson {
                    title: issue.title.clone(),
                    body: issue.body.clone(),
                    issue_type: ann.map(|a| a.issue_type),
                    state_info: ann.map(|a| a.spans.clone()),
                }
            })
            .collect();
        let raw = RecordJson {
            commit_message: self.record.message.clone(),
            issues,
            files: self
                .record
                .files
                .iter()
                .map(|f| FileJson {
                    filename: f.path.clone(),
                    diff: f.diff.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("record serializes")
    }
}

impl From<AnnotatedCommitRecord> for DatasetRecord {
    fn from(a: AnnotatedCommitRecord) -> Self {
        Self {
            record: a.record,
            annotations: Some(a.annotations),
        }
    }
}

/// Reads records from JSONL; blank lines are skipped, line numbers are 1-based.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(DatasetRecord::from_json_line(n + 1, &line)?);
    }
    Ok(out)
}

pub fn read_jsonl_file(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, DatasetError> {
    read_jsonl(BufReader::new(File::open(path)?))
}

pub fn write_jsonl<W: Write>(mut writer: W, records: &[DatasetRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(writer, "{}", r.to_json_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Location, StateType};

    const FINE: &str = r#"{"commit_message":"Fix NPE","issues":[{"title":"NPE in parser","body":"It crashes.","type":"bug_report","state_info":[{"location":"title","state_type":"actual","start":0,"end":13}]}],"files":[{"filename":"a.java","diff":"+x"}]}"#;

    #[test]
    fn parses_fine_part_record() {
        let recs = read_jsonl(FINE.as_bytes()).unwrap();
        let r = &recs[0];
        assert_eq!(r.record.message, "Fix NPE");
        assert_eq!(r.record.files[0].path, "a.java");
        let ann = r.annotations.as_ref().unwrap();
        assert_eq!(ann[0].issue_type, IssueType::BugReport);
        assert_eq!(ann[0].spans, [StateSpan::new(Location::Title, StateType::Actual, 0, 13)]);
        assert_eq!(DatasetRecord::from_json_line(1, &r.to_json_line()).unwrap(), *r);
    }

    #[test]
    fn base_part_has_no_annotations() {
        let line = r#"{"commit_message":"m","issues":[{"title":"t","body":""}],"files":[]}"#;
        let r = DatasetRecord::from_json_line(1, line).unwrap();
        assert!(r.annotations.is_none());
        assert!(!r.to_json_line().contains("state_info"));
    }

    #[test]
    fn rejects_partial_annotations() {
        let line = r#"{"commit_message":"m","issues":[{"title":"t","type":"enhancement"},{"title":"u"}]}"#;
        assert!(matches!(
            DatasetRecord::from_json_line(4, line),
            Err(DatasetError::PartialAnnotation { line: 4, issue: 1, .. })
        ));
    }

    #[test]
    fn reports_line_of_bad_json() {
        let input = format!("{FINE}\n\n{{\"issues\": []}}\n");
        let err = read_jsonl(input.as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
    }
}
