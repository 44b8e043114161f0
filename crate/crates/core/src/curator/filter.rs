use crate::par::{self, Execution};
use crate::schema::{token_count, CommitRecord};
use regex::RegexSet;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::OnceLock;

pub const DEFAULT_TOKEN_LIMIT: usize = 1024;
pub const DEFAULT_ENGLISH_RATIO: f64 = 0.9;

/// Commit messages written by release tooling and dependency bots.
pub const BOT_PATTERNS: &[&str] = &[
    r"(?i)^\[maven-release-plugin\]",
    r"(?i)^bump \S+ from \S+ to \S+",
    r"(?i)^(chore|build|fix)\(deps(-dev)?\):",
    r"(?i)^update dependency \S+ to ",
    r"(?i)\[bot\]",
    r"(?i)^auto(matic(ally)?)?[- ]?(generated|commit|update)",
    r"(?i)^\[(ci skip|skip ci)\]",
];

/// Rollback and merge boilerplate, release bookkeeping, and messages that
/// say nothing beyond an issue reference.
pub const TRIVIAL_PATTERNS: &[&str] = &[
    r"(?i)^\s*$",
    r"(?i)^ignore update\b",
    r"(?i)^merge (pull request|branch|remote-tracking branch|tag|commit)\b",
    r"(?i)^merged? \S+ into \S+",
    r"(?i)^(revert(ed)?|roll ?back)\b",
    r"(?i)^prepare (for )?(the )?(next )?(development )?(release|iteration|version)\b",
    r"(?i)^(update|bump) (the )?(changelog|version( number)?)\b",
    r"(?i)^(release|version) v?\d+(\.\d+)*\S*\s*$",
    r"(?i)^\W*((fix(e[sd])?|close[sd]?|resolve[sd]?|see|refs?|issue)\W*)?(\[ISSUE_NUMBER\]|#\d+)(\W+(\[ISSUE_NUMBER\]|#\d+))*\W*$",
    r"(?i)^wip\W*$",
];

fn bot_set() -> &'static RegexSet {
    static S: OnceLock<RegexSet> = OnceLock::new();
    S.get_or_init(|| RegexSet::new(BOT_PATTERNS).unwrap())
}

fn trivial_set() -> &'static RegexSet {
    static S: OnceLock<RegexSet> = OnceLock::new();
    S.get_or_init(|| RegexSet::new(TRIVIAL_PATTERNS).unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub token_limit: usize,
    /// Minimum share of ASCII letters among all letters.
    pub english_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            token_limit: DEFAULT_TOKEN_LIMIT,
            english_ratio: DEFAULT_ENGLISH_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    Bot { pattern: usize },
    Trivial { pattern: usize },
    NonEnglish { field: String },
    Length { field: String, tokens: usize },
    NoIssues,
    NoFiles,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::Bot { pattern } => write!(f, "bot (pattern {pattern})"),
            DropReason::Trivial { pattern } => write!(f, "trivial (pattern {pattern})"),
            DropReason::NonEnglish { field } => write!(f, "non-English {field}"),
            DropReason::Length { field, tokens } => write!(f, "length: {field} has {tokens} tokens"),
            DropReason::NoIssues => f.write_str("no linked issues"),
            DropReason::NoFiles => f.write_str("no changed files"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Drop(DropReason),
}

impl Decision {
    pub fn is_keep(&self) -> bool {
        matches!(self, Decision::Keep)
    }
}

/// `None` when the text has no letters at all.
pub fn ascii_letter_ratio(text: &str) -> Option<f64> {
    let (ascii, total) = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .fold((0usize, 0usize), |(a, t), c| (a + c.is_ascii() as usize, t + 1));
    (total > 0).then(|| ascii as f64 / total as f64)
}

pub fn looks_english(text: &str, min_ratio: f64) -> bool {
    ascii_letter_ratio(text).is_some_and(|r| r >= min_ratio)
}

fn first_match(set: &RegexSet, text: &str) -> Option<usize> {
    set.matches(text).iter().next()
}

/// Keep/drop decision for an already normalized record.
///
/// Rules run in order and the first one that fires is reported: bot message,
/// trivial message, non-English message or issue title, any text field over
/// the token limit, no issues, no files.
pub fn filter_record(record: &CommitRecord, cfg: &FilterConfig) -> Decision {
    let msg = record.message.trim();
    if let Some(pattern) = first_match(bot_set(), msg) {
        return Decision::Drop(DropReason::Bot { pattern });
    }
    if let Some(pattern) = first_match(trivial_set(), msg) {
        return Decision::Drop(DropReason::Trivial { pattern });
    }
    if !looks_english(msg, cfg.english_ratio) {
        return Decision::Drop(DropReason::NonEnglish {
            field: "commit_message".into(),
        });
    }
    for (i, issue) in record.issues.iter().enumerate() {
        if !looks_english(&issue.title, cfg.english_ratio) {
            return Decision::Drop(DropReason::NonEnglish {
                field: format!("issues[{i}].title"),
            });
        }
    }

    let mut fields: Vec<(String, &str)> = vec![("commit_message".into(), &record.message)];
    for (i, issue) in record.issues.iter().enumerate() {
        fields.push((format!("issues[{i}].title"), &issue.title));
        fields.push((format!("issues[{i}].body"), &issue.body));
    }
    for (i, file) in record.files.iter().enumerate() {
        fields.push((format!("files[{i}].diff"), &file.diff));
    }
    for (field, text) in fields {
        let tokens = token_count(text);
        if tokens > cfg.token_limit {
            return Decision::Drop(DropReason::Length { field, tokens });
        }
    }

    if record.issues.is_empty() {
        return Decision::Drop(DropReason::NoIssues);
    }
    if record.files.is_empty() {
        return Decision::Drop(DropReason::NoFiles);
    }
    Decision::Keep
}

pub fn filter_records(records: &[CommitRecord], cfg: &FilterConfig, exec: Execution) -> Vec<Decision> {
    par::map(exec, records, |r| filter_record(r, cfg))
}
