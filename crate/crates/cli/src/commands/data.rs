use crate::config::Settings;
use crate::errors::{data, usage};
use crate::files::{emit, read_records, read_text, records_jsonl, require_input, write_atomic};
use crate::{FilterArgs, MineArgs, NormalizeArgs, SplitArgs, ValidateArgs};
use anyhow::Result;
use cmgkit_core::curator::{filter_records, normalize_records, stratify, CuratorError, Decision, DropReason, FilterConfig};
use cmgkit_core::miner::{
    build_commit_issue_map, commit_issue_map_json, fetch_records, Client, FixtureTransport, MapOptions, MinerError,
    RepoRef,
};
use cmgkit_core::schema::{validate_curated, validate_record, CommitRecord, DatasetRecord, Violation};
use serde::Serialize;
use std::sync::Arc;

fn miner_error(e: MinerError) -> anyhow::Error {
    match e {
        MinerError::InvalidRepo(_) => usage(e.to_string()),
        MinerError::DuplicateIssue(_)
        | MinerError::MissingIssue(_)
        | MinerError::MissingCommit(_)
        | MinerError::Parse { .. }
        | MinerError::Fixture(_)
        | MinerError::Checkpoint { .. } => data(e.to_string()),
        other => other.into(),
    }
}

#[cfg(feature = "live")]
fn live_client(a: &MineArgs, s: &Settings) -> Result<Client> {
    use cmgkit_core::miner::LiveTransport;
    if a.rate.is_nan() || a.rate <= 0.0 {
        return Err(usage("--rate must be positive"));
    }
    let var = s.token_env();
    if std::env::var(&var).map_or(true, |t| t.is_empty()) {
        log::warn!("{var} is not set; unauthenticated requests have a low rate limit");
    }
    Ok(Client::polite(Arc::new(LiveTransport::from_env(&var)), 5, a.rate))
}

#[cfg(not(feature = "live"))]
fn live_client(_a: &MineArgs, _s: &Settings) -> Result<Client> {
    Err(usage("built without live API support; pass --fixture"))
}

pub fn mine(a: &MineArgs, s: &Settings) -> Result<()> {
    let repo: RepoRef = a.repo.parse().map_err(miner_error)?;
    let issues = read_text(&a.issues)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .trim_start_matches('#')
                .parse::<u64>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| data(format!("{}:{}: not an issue number: {l:?}", a.issues.display(), i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let client = match &a.fixture {
        Some(path) => {
            require_input(path)?;
            Client::replay(Arc::new(FixtureTransport::from_file(path).map_err(miner_error)?))
        }
        None => live_client(a, s)?,
    };
    let opts = MapOptions {
        parallelism: s.parallelism()?,
        exec: s.exec(),
        checkpoint: a.checkpoint.as_deref(),
    };
    let map = build_commit_issue_map(&client, &repo, &issues, &opts).map_err(miner_error)?;
    if let Some(path) = &a.map_out {
        write_atomic(path, commit_issue_map_json(&map).as_bytes())?;
    }
    let mined = fetch_records(&client, &repo, &map, &opts).map_err(miner_error)?;
    for m in mined.iter().filter(|m| m.truncated) {
        log::warn!("commit {}: file list or patches truncated by the API", m.id);
    }
    let records: Vec<DatasetRecord> = mined.into_iter().map(|m| DatasetRecord::base(m.record)).collect();
    write_atomic(&a.out, records_jsonl(&records).as_bytes())
}

pub fn normalize(a: &NormalizeArgs, s: &Settings) -> Result<()> {
    let records = read_records(&a.input)?;
    let annotated = records.iter().filter(|r| r.annotations.is_some()).count();
    if annotated > 0 {
        log::warn!("dropping annotations of {annotated} records; normalized text invalidates span offsets");
    }
    let plain: Vec<CommitRecord> = records.into_iter().map(|r| r.record).collect();
    let out: Vec<DatasetRecord> = normalize_records(&plain, s.exec()).into_iter().map(DatasetRecord::base).collect();
    write_atomic(&a.out, records_jsonl(&out).as_bytes())
}

#[derive(Serialize)]
struct ReasonRow<'a> {
    index: usize,
    #[serde(flatten)]
    reason: &'a DropReason,
}

pub fn filter(a: &FilterArgs, s: &Settings) -> Result<()> {
    let cfg = FilterConfig {
        token_limit: s.token_limit()?,
        english_ratio: s.english_ratio()?,
    };
    let records = read_records(&a.input)?;
    let plain: Vec<CommitRecord> = records.iter().map(|r| r.record.clone()).collect();
    let decisions = filter_records(&plain, &cfg, s.exec());
    let mut kept = Vec::new();
    let mut reasons = String::new();
    for (index, (record, decision)) in records.into_iter().zip(&decisions).enumerate() {
        match decision {
            Decision::Keep => kept.push(record),
            Decision::Drop(reason) => {
                reasons.push_str(&serde_json::to_string(&ReasonRow { index, reason })?);
                reasons.push('\n');
            }
        }
    }
    log::info!("kept {} of {} records", kept.len(), decisions.len());
    write_atomic(&a.out, records_jsonl(&kept).as_bytes())?;
    if let Some(path) = &a.reasons {
        write_atomic(path, reasons.as_bytes())?;
    }
    Ok(())
}

pub fn split(a: &SplitArgs, s: &Settings) -> Result<()> {
    let seed = s.seed()?;
    let records = read_records(&a.input)?;
    let splits = stratify(&records, seed).map_err(|e: CuratorError| data(e.to_string()))?;
    for (name, part) in [("train", &splits.train), ("valid", &splits.valid), ("test", &splits.test)] {
        write_atomic(&a.out_dir.join(format!("{name}.jsonl")), records_jsonl(part).as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ViolationRow<'a> {
    record: usize,
    #[serde(flatten)]
    violation: &'a Violation,
}

pub fn validate(a: &ValidateArgs) -> Result<()> {
    let records = read_records(&a.input)?;
    let mut report = String::new();
    let mut bad = 0;
    for (i, r) in records.iter().enumerate() {
        let violations = match (r.annotated(), a.curated) {
            (Some(ann), _) => validate_record(&ann),
            (None, true) => validate_curated(&r.record),
            (None, false) => validate_record(&r.record),
        };
        bad += usize::from(!violations.is_empty());
        for v in &violations {
            report.push_str(&serde_json::to_string(&ViolationRow { record: i, violation: v })?);
            report.push('\n');
        }
    }
    emit(a.out.as_deref(), &report)?;
    if bad > 0 {
        return Err(data(format!("{bad} of {} records violate the schema", records.len())));
    }
    Ok(())
}
