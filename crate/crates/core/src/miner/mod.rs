//! Reconstructs commit → issue links by walking each issue's event timeline
//! and keeping its `referenced` events.

mod limiter;
mod transport;

pub use limiter::{RecordingSleeper, RetryPolicy, Sleeper, ThreadSleeper, TokenBucket};
#[cfg(feature = "live")]
pub use transport::{LiveTransport, DEFAULT_BASE_URL, DEFAULT_TOKEN_ENV};
pub use transport::{FixtureTransport, Response, Transport};

use crate::par::{self, Execution};
use crate::schema::{CommitRecord, FileChange, IssueRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const PER_PAGE: u32 = 100;
/// The commit endpoint stops listing files at this count.
pub const FILE_LIST_LIMIT: usize = 300;

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("invalid repository {0:?}: expected owner/name")]
    InvalidRepo(String),
    #[error("duplicate issue number {0} in input")]
    DuplicateIssue(u64),
    #[error("rate limited on {path}; retry after {retry_after:?}")]
    RateLimited { path: String, retry_after: Option<Duration> },
    #[error("issue #{0} not found")]
    MissingIssue(u64),
    #[error("commit {0} not found")]
    MissingCommit(String),
    #[error("malformed payload from {path}: bad or missing field `{field}`")]
    Parse { path: String, field: String },
    #[error("HTTP {status} from {path}")]
    Http { path: String, status: u16 },
    #[error("transport: {0}")]
    Transport(String),
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RepoRef {
    pub owner: String,
    pub name: String,
}

impl RepoRef {
    pub fn new(owner: &str, name: &str) -> Result<Self, MinerError> {
        let ok = |s: &str| !s.is_empty() && !s.contains('/');
        if ok(owner) && ok(name) {
            Ok(Self {
                owner: owner.to_string(),
                name: name.to_string(),
            })
        } else {
            Err(MinerError::InvalidRepo(format!("{owner}/{name}")))
        }
    }

    fn same_as(&self, owner: &str, name: &str) -> bool {
        self.owner.eq_ignore_ascii_case(owner) && self.name.eq_ignore_ascii_case(name)
    }
}

impl FromStr for RepoRef {
    type Err = MinerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((owner, name)) => Self::new(owner, name),
            None => Err(MinerError::InvalidRepo(s.to_string())),
        }
    }
}

impl fmt::Display for RepoRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueEvent {
    pub event_type: String,
    pub commit_id: Option<String>,
    pub commit_url: Option<String>,
    pub issue_number: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueEventPage {
    pub events: Vec<IssueEvent>,
    /// Request path of the following page.
    pub next_page: Option<String>,
}

/// Commit id → issue numbers, duplicate-free, in discovery order.
pub type CommitIssueMap = BTreeMap<String, Vec<u64>>;

/// Pretty JSON with a trailing newline; stable for a given map.
pub fn commit_issue_map_json(map: &CommitIssueMap) -> String {
    let mut s = serde_json::to_string_pretty(map).expect("map serializes");
    s.push('\n');
    s
}

pub fn is_commit_id(s: &str) -> bool {
    s.len() == 40 && s.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Rate-limited, retrying client over a shared transport.
pub struct Client {
    transport: Arc<dyn Transport>,
    limiter: Option<Mutex<TokenBucket>>,
    retry: RetryPolicy,
    sleeper: Arc<dyn Sleeper>,
    jitter: Mutex<ChaCha8Rng>,
}

impl Client {
    /// No client-side pacing and no real sleeping; for recorded fixtures.
    pub fn replay(transport: Arc<dyn Transport>) -> Self {
        Self {
            transport,
            limiter: None,
            retry: RetryPolicy::default(),
            sleeper: Arc::new(RecordingSleeper::default()),
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(0)),
        }
    }

    /// Paced to `per_second` requests with bursts of `burst`.
    pub fn polite(transport: Arc<dyn Transport>, burst: u32, per_second: f64) -> Self {
        Self {
            limiter: Some(Mutex::new(TokenBucket::new(burst, per_second))),
            sleeper: Arc::new(ThreadSleeper),
            ..Self::replay(transport)
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_jitter_seed(self, seed: u64) -> Self {
        *self.jitter.lock().expect("jitter poisoned") = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    /// GETs `path`, retrying on rate limits that name a wait and on 5xx.
    /// Returns `Ok(None)` for 404.
    pub fn get(&self, path: &str) -> Result<Option<Response>, MinerError> {
        let mut attempt = 0;
        loop {
            if let Some(bucket) = &self.limiter {
                let wait = bucket.lock().expect("limiter poisoned").acquire(Instant::now());
                if !wait.is_zero() {
                    self.sleeper.sleep(wait);
                }
            }
            let resp = self.transport.get(path)?;
            match resp.status {
                200..=299 => return Ok(Some(resp)),
                404 => return Ok(None),
                403 | 429 => {
                    let retry_after = retry_after(&resp);
                    let exhausted = resp.status == 403 && retry_after.is_none()
                        && resp.header("x-ratelimit-remaining") != Some("0");
                    if exhausted {
                        return Err(MinerError::Http {
                            path: path.to_string(),
                            status: resp.status,
                        });
                    }
                    match retry_after {
                        Some(wait) if attempt < self.retry.max_retries => {
                            log::warn!("rate limited on {path}; waiting {wait:?}");
                            self.sleeper.sleep(wait);
                        }
                        _ => {
                            return Err(MinerError::RateLimited {
                                path: path.to_string(),
                                retry_after,
                            })
                        }
                    }
                }
                500..=599 if attempt < self.retry.max_retries => {
                    let wait = self.retry.backoff(attempt, &mut *self.jitter.lock().expect("jitter poisoned"));
                    log::warn!("HTTP {} on {path}; retrying in {wait:?}", resp.status);
                    self.sleeper.sleep(wait);
                }
                status => {
                    return Err(MinerError::Http {
                        path: path.to_string(),
                        status,
                    })
                }
            }
            attempt += 1;
        }
    }
}

/// `retry-after` seconds, else the wait until `x-ratelimit-reset` when the
/// quota is exhausted.
fn retry_after(resp: &Response) -> Option<Duration> {
    if let Some(secs) = resp.header("retry-after").and_then(|v| v.trim().parse::<u64>().ok()) {
        return Some(Duration::from_secs(secs));
    }
    if resp.header("x-ratelimit-remaining") == Some("0") {
        let reset = resp.header("x-ratelimit-reset")?.trim().parse::<u64>().ok()?;
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()?
            .as_secs();
        return Some(Duration::from_secs(reset.saturating_sub(now)));
    }
    None
}

/// Request path of the `rel="next"` entry of a `Link` header.
pub fn next_link(link: &str) -> Option<String> {
    link.split(',').find_map(|part| {
        let (target, params) = part.trim().split_once(';')?;
        let is_next = params
            .split(';')
            .any(|p| matches!(p.trim().split_once('='), Some(("rel", v)) if v.trim_matches('"').split(' ').any(|r| r == "next")));
        if !is_next {
            return None;
        }
        let url = target.trim().strip_prefix('<')?.strip_suffix('>')?;
        Some(match url.split_once("://") {
            Some((_, rest)) => rest.find('/').map_or_else(|| "/".to_string(), |i| rest[i..].to_string()),
            None => url.to_string(),
        })
    })
}

fn events_path(repo: &RepoRef, issue: u64) -> String {
    format!("/repos/{}/{}/issues/{issue}/events?per_page={PER_PAGE}", repo.owner, repo.name)
}

fn parse_json(path: &str, body: &str) -> Result<Value, MinerError> {
    serde_json::from_str(body).map_err(|_| MinerError::Parse {
        path: path.to_string(),
        field: "<body>".into(),
    })
}

fn opt_str(obj: &Value, key: &str, path: &str) -> Result<Option<String>, MinerError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(MinerError::Parse {
            path: path.to_string(),
            field: key.to_string(),
        }),
    }
}

/// Fetches one page of issue events.
pub fn fetch_event_page(client: &Client, path: &str, issue: u64) -> Result<IssueEventPage, MinerError> {
    let resp = client.get(path)?.ok_or(MinerError::MissingIssue(issue))?;
    let value = parse_json(path, &resp.body)?;
    let items = value.as_array().ok_or_else(|| MinerError::Parse {
        path: path.to_string(),
        field: "<events array>".into(),
    })?;
    let events = items
        .iter()
        .map(|item| {
            let event_type = opt_str(item, "event", path)?.ok_or_else(|| MinerError::Parse {
                path: path.to_string(),
                field: "event".into(),
            })?;
            Ok(IssueEvent {
                event_type,
                commit_id: opt_str(item, "commit_id", path)?,
                commit_url: opt_str(item, "commit_url", path)?,
                issue_number: issue,
            })
        })
        .collect::<Result<_, MinerError>>()?;
    Ok(IssueEventPage {
        events,
        next_page: resp.header("link").and_then(next_link),
    })
}

/// Owner and name from `…/repos/{owner}/{name}/commits/{sha}`.
fn commit_url_repo(url: &str) -> Option<(&str, &str)> {
    let rest = &url[url.find("/repos/")? + "/repos/".len()..];
    let mut parts = rest.split('/');
    let (owner, name, kind) = (parts.next()?, parts.next()?, parts.next()?);
    (kind == "commits").then_some((owner, name))
}

/// Commit ids of the issue's `referenced` events, in API order across pages.
/// Events whose commit lives in another repository are dropped and logged.
pub fn list_referencing_commits(client: &Client, repo: &RepoRef, issue: u64) -> Result<Vec<String>, MinerError> {
    let mut commits = Vec::new();
    let mut next = Some(events_path(repo, issue));
    while let Some(path) = next {
        let page = fetch_event_page(client, &path, issue)?;
        for event in page.events.into_iter().filter(|e| e.event_type == "referenced") {
            let bad = || MinerError::Parse {
                path: path.clone(),
                field: "commit_id".into(),
            };
            let id = event.commit_id.ok_or_else(bad)?;
            if !is_commit_id(&id) {
                return Err(bad());
            }
            if let Some((owner, name)) = event.commit_url.as_deref().and_then(commit_url_repo) {
                if !repo.same_as(owner, name) {
                    log::info!("{repo}#{issue}: dropping cross-repository reference {owner}/{name}@{id}");
                    continue;
                }
            }
            commits.push(id);
        }
        next = page.next_page;
    }
    Ok(commits)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub issue: u64,
    pub commits: Vec<String>,
}

/// Reads a JSONL checkpoint of finished issues; a missing file is empty.
pub fn read_map_checkpoint(path: &Path) -> Result<Vec<CheckpointEntry>, MinerError> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| MinerError::Checkpoint {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MapOptions<'a> {
    /// Maximum concurrent issue fetches.
    pub parallelism: usize,
    pub exec: Execution,
    /// Finished issues are appended here and skipped on the next run.
    pub checkpoint: Option<&'a Path>,
}

impl Default for MapOptions<'_> {
    fn default() -> Self {
        Self {
            parallelism: 4,
            exec: Execution::default(),
            checkpoint: None,
        }
    }
}

/// Inverts issue → referencing commits into a [`CommitIssueMap`].
///
/// Issues are fetched concurrently; results are merged in input order so the
/// map is independent of scheduling. On failure, issues that did finish are
/// still written to the checkpoint before the first error is returned.
pub fn build_commit_issue_map(
    client: &Client,
    repo: &RepoRef,
    issues: &[u64],
    opts: &MapOptions<'_>,
) -> Result<CommitIssueMap, MinerError> {
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = issues.iter().find(|i| !seen.insert(**i)) {
        return Err(MinerError::DuplicateIssue(*dup));
    }
    let mut done: HashMap<u64, Vec<String>> = match opts.checkpoint {
        Some(path) => read_map_checkpoint(path)?
            .into_iter()
            .map(|e| (e.issue, e.commits))
            .collect(),
        None => HashMap::new(),
    };
    let todo: Vec<u64> = issues.iter().copied().filter(|i| !done.contains_key(i)).collect();
    let fetched = par::map_bounded(opts.exec, opts.parallelism, &todo, |&issue| {
        list_referencing_commits(client, repo, issue)
    });

    let mut first_err = None;
    let mut finished = Vec::new();
    for (issue, res) in todo.into_iter().zip(fetched) {
        match res {
            Ok(commits) => finished.push(CheckpointEntry { issue, commits }),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(path) = opts.checkpoint {
        let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        for entry in &finished {
            writeln!(file, "{}", serde_json::to_string(entry).expect("entry serializes"))?;
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    done.extend(finished.into_iter().map(|e| (e.issue, e.commits)));

    let mut map = CommitIssueMap::new();
    for issue in issues {
        for commit in &done[issue] {
            let list = map.entry(commit.clone()).or_default();
            if !list.contains(issue) {
                list.push(*issue);
            }
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedCommit {
    pub id: String,
    /// `issues` is left empty for the caller to fill.
    pub record: CommitRecord,
    /// Some file lacked a patch or the file list hit the API limit.
    pub truncated: bool,
}

/// Message and per-file diffs of one commit, files in API order.
pub fn fetch_commit_payload(client: &Client, repo: &RepoRef, commit: &str) -> Result<MinedCommit, MinerError> {
    let path = format!("/repos/{}/{}/commits/{commit}", repo.owner, repo.name);
    let resp = client
        .get(&path)?
        .ok_or_else(|| MinerError::MissingCommit(commit.to_string()))?;
    let value = parse_json(&path, &resp.body)?;
    let bad = |field: &str| MinerError::Parse {
        path: path.clone(),
        field: field.to_string(),
    };
    let message = value
        .get("commit")
        .and_then(|c| c.get("message"))
        .and_then(Value::as_str)
        .ok_or_else(|| bad("commit.message"))?
        .to_string();
    let files_json = match value.get("files") {
        None | Some(Value::Null) => &[][..],
        Some(Value::Array(a)) => a.as_slice(),
        Some(_) => return Err(bad("files")),
    };
    let mut truncated = files_json.len() >= FILE_LIST_LIMIT;
    let mut files = Vec::with_capacity(files_json.len());
    for f in files_json {
        let filename = f
            .get("filename")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("files[].filename"))?;
        let diff = match f.get("patch") {
            Some(Value::String(p)) => p.clone(),
            None | Some(Value::Null) => {
                truncated = true;
                String::new()
            }
            Some(_) => return Err(bad("files[].patch")),
        };
        files.push(FileChange::new(filename, diff));
    }
    Ok(MinedCommit {
        id: commit.to_string(),
        record: CommitRecord {
            message,
            issues: Vec::new(),
            files,
        },
        truncated,
    })
}

/// Title and body (null body becomes empty) of one issue.
pub fn fetch_issue(client: &Client, repo: &RepoRef, issue: u64) -> Result<IssueRecord, MinerError> {
    let path = format!("/repos/{}/{}/issues/{issue}", repo.owner, repo.name);
    let resp = client.get(&path)?.ok_or(MinerError::MissingIssue(issue))?;
    let value = parse_json(&path, &resp.body)?;
    let title = opt_str(&value, "title", &path)?.ok_or_else(|| MinerError::Parse {
        path: path.clone(),
        field: "title".into(),
    })?;
    let body = opt_str(&value, "body", &path)?.unwrap_or_default();
    Ok(IssueRecord::new(title, body))
}

/// Full records for every commit in `map`, in commit-id order, with their
/// linked issues fetched and attached in map order.
pub fn fetch_records(
    client: &Client,
    repo: &RepoRef,
    map: &CommitIssueMap,
    opts: &MapOptions<'_>,
) -> Result<Vec<MinedCommit>, MinerError> {
    let mut issue_ids: Vec<u64> = map.values().flatten().copied().collect();
    issue_ids.sort_unstable();
    issue_ids.dedup();
    let issues: HashMap<u64, IssueRecord> = par::map_bounded(opts.exec, opts.parallelism, &issue_ids, |&i| {
        fetch_issue(client, repo, i).map(|r| (i, r))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let entries: Vec<(&String, &Vec<u64>)> = map.iter().collect();
    par::map_bounded(opts.exec, opts.parallelism, &entries, |(commit, linked)| {
        let mut mined = fetch_commit_payload(client, repo, commit)?;
        mined.record.issues = linked.iter().map(|i| issues[i].clone()).collect();
        Ok(mined)
    })
    .into_iter()
    .collect()
}
