//! Text normalization, record filtering and train/valid/test stratification.

mod filter;
mod normalize;
mod stratify;

pub use filter::{
    ascii_letter_ratio, filter_record, filter_records, looks_english, Decision, DropReason, FilterConfig,
    BOT_PATTERNS, DEFAULT_ENGLISH_RATIO, DEFAULT_TOKEN_LIMIT, TRIVIAL_PATTERNS,
};
pub use normalize::{normalize_commit_message, normalize_issue_body, CODE_TOKEN, ISSUE_NUMBER_TOKEN, URL_TOKEN};
pub use stratify::{split_sizes, stratify, Splits, MIN_RECORDS};

use crate::par::{self, Execution};
use crate::schema::CommitRecord;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CuratorError {
    #[error("stratification needs at least {MIN_RECORDS} records, got {0}")]
    TooFewRecords(usize),
}

/// Normalizes the commit message and every issue body. Titles are left as is.
pub fn normalize_record(record: &CommitRecord) -> CommitRecord {
    let mut out = record.clone();
    out.message = normalize_commit_message(&record.message);
    for issue in &mut out.issues {
        issue.body = normalize_issue_body(&issue.body);
    }
    out
}

pub fn normalize_records(records: &[CommitRecord], exec: Execution) -> Vec<CommitRecord> {
    par::map(exec, records, normalize_record)
}
