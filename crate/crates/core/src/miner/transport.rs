//! HTTP transports: recorded fixtures for replay, `ureq` for live access.

use super::MinerError;
use serde::Deserialize;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Response {
    pub status: u16,
    /// Lower-cased header names.
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

impl Response {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }
}

/// Issues `GET` requests for API paths such as `/repos/o/n/issues/1/events`.
/// Non-2xx statuses are returned as responses, not errors.
pub trait Transport: Send + Sync {
    fn get(&self, path: &str) -> Result<Response, MinerError>;
}

#[derive(Debug, Deserialize)]
struct FixtureResponse {
    #[serde(default = "ok_status")]
    status: u16,
    #[serde(default)]
    headers: BTreeMap<String, String>,
    #[serde(default)]
    body: serde_json::Value,
}

fn ok_status() -> u16 {
    200
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FixtureEntry {
    One(FixtureResponse),
    Sequence(Vec<FixtureResponse>),
}

#[derive(Debug, Deserialize)]
struct FixtureFile {
    responses: BTreeMap<String, FixtureEntry>,
}

/// Replays recorded responses keyed by request path.
///
/// A path mapped to an array serves its responses in turn and repeats the
/// last one. Unknown paths answer 404.
#[derive(Debug)]
pub struct FixtureTransport {
    responses: HashMap<String, Vec<Response>>,
    served: Mutex<HashMap<String, usize>>,
    log: Mutex<Vec<String>>,
}

impl FixtureTransport {
    pub fn from_json(text: &str) -> Result<Self, MinerError> {
        let file: FixtureFile = serde_json::from_str(text).map_err(|e| MinerError::Fixture(e.to_string()))?;
        let convert = |r: FixtureResponse| Response {
            status: r.status,
            headers: r.headers.into_iter().map(|(k, v)| (k.to_ascii_lowercase(), v)).collect(),
            body: match r.body {
                serde_json::Value::String(s) => s,
                v => v.to_string(),
            },
        };
        let responses = file
            .responses
            .into_iter()
            .map(|(path, entry)| {
                let list = match entry {
                    FixtureEntry::One(r) => vec![convert(r)],
                    FixtureEntry::Sequence(rs) => rs.into_iter().map(convert).collect(),
                };
                (path, list)
            })
            .filter(|(_, list)| !list.is_empty())
            .collect();
        Ok(Self {
            responses,
            served: Mutex::default(),
            log: Mutex::default(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, MinerError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Paths requested so far, in request order.
    pub fn requests(&self) -> Vec<String> {
        self.log.lock().expect("fixture log poisoned").clone()
    }
}

impl Transport for FixtureTransport {
    fn get(&self, path: &str) -> Result<Response, MinerError> {
        self.log.lock().expect("fixture log poisoned").push(path.to_string());
        let Some(list) = self.responses.get(path) else {
            return Ok(Response {
                status: 404,
                ..Response::default()
            });
        };
        let mut served = self.served.lock().expect("fixture counter poisoned");
        let n = served.entry(path.to_string()).or_insert(0);
        let resp = list[(*n).min(list.len() - 1)].clone();
        *n += 1;
        Ok(resp)
    }
}

#[cfg(feature = "live")]
pub use live::{LiveTransport, DEFAULT_BASE_URL, DEFAULT_TOKEN_ENV};

#[cfg(feature = "live")]
mod live {
    use super::{MinerError, Response, Transport};

    pub const DEFAULT_BASE_URL: &str = "https://api.github.com";
    pub const DEFAULT_TOKEN_ENV: &str = "GITHUB_TOKEN";

    /// Talks to the real API, authenticating with a token when one is given.
    pub struct LiveTransport {
        agent: ureq::Agent,
        base_url: String,
        token: Option<String>,
    }

    impl LiveTransport {
        pub fn new(base_url: impl Into<String>, token: Option<String>) -> Self {
            Self {
                agent: ureq::AgentBuilder::new()
                    .timeout(std::time::Duration::from_secs(30))
                    .user_agent("cmgkit-miner")
                    .build(),
                base_url: base_url.into(),
                token,
            }
        }

        /// Reads the token from environment variable `var`, if set.
        pub fn from_env(var: &str) -> Self {
            Self::new(DEFAULT_BASE_URL, std::env::var(var).ok().filter(|t| !t.is_empty()))
        }
    }

    impl Transport for LiveTransport {
        fn get(&self, path: &str) -> Result<Response, MinerError> {
            let mut req = self
                .agent
                .get(&format!("{}{}", self.base_url.trim_end_matches('/'), path))
                .set("Accept", "application/vnd.github+json");
            if let Some(token) = &self.token {
                req = req.set("Authorization", &format!("Bearer {token}"));
            }
            let resp = match req.call() {
                Ok(r) => r,
                Err(ureq::Error::Status(_, r)) => r,
                Err(e) => return Err(MinerError::Transport(e.to_string())),
            };
            let status = resp.status();
            let headers = resp
                .headers_names()
                .into_iter()
                .filter_map(|name| resp.header(&name).map(|v| (name.to_ascii_lowercase(), v.to_string())))
                .collect();
            let body = resp.into_string().map_err(|e| MinerError::Transport(e.to_string()))?;
            Ok(Response { status, headers, body })
        }
    }
}
