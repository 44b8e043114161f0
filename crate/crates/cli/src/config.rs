//! Settings resolved from flags, then a TOML config file, then `CMGKIT_*`
//! environment variables, then built-in defaults.

use crate::errors::usage;
use anyhow::Result;
use serde::Deserialize;
use std::path::Path;

pub const ENV_PREFIX: &str = "CMGKIT_";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub seed: Option<u64>,
    pub token_limit: Option<usize>,
    pub english_ratio: Option<f64>,
    pub tau: Option<f64>,
    pub parallelism: Option<usize>,
    pub sequential: Option<bool>,
    pub bins: Option<usize>,
    #[cfg_attr(not(feature = "live"), allow(dead_code))]
    pub token_env: Option<String>,
}

impl Layer {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("config file {}: {e}", path.display())))
    }

    pub fn from_env() -> Result<Self> {
        Self::from_vars(|key| std::env::var(format!("{ENV_PREFIX}{key}")).ok())
    }

    pub fn from_vars(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        fn parse<T: std::str::FromStr>(get: &impl Fn(&str) -> Option<String>, key: &str) -> Result<Option<T>> {
            match get(key) {
                None => Ok(None),
                Some(v) => v
                    .trim()
                    .parse()
                    .map(Some)
                    .map_err(|_| usage(format!("{ENV_PREFIX}{key}: cannot parse {v:?}"))),
            }
        }
        Ok(Self {
            seed: parse(&get, "SEED")?,
            token_limit: parse(&get, "TOKEN_LIMIT")?,
            english_ratio: parse(&get, "ENGLISH_RATIO")?,
            tau: parse(&get, "TAU")?,
            parallelism: parse(&get, "PARALLELISM")?,
            sequential: parse(&get, "SEQUENTIAL")?,
            bins: parse(&get, "BINS")?,
            token_env: get("TOKEN_ENV"),
        })
    }
}

/// Highest-priority layer first.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    layers: Vec<Layer>,
}

impl Settings {
    pub fn new(flags: Layer, file: Option<Layer>, env: Layer) -> Self {
        Self {
            layers: [Some(flags), file, Some(env)].into_iter().flatten().collect(),
        }
    }

    fn pick<T>(&self, f: impl Fn(&Layer) -> Option<T>) -> Option<T> {
        self.layers.iter().find_map(f)
    }

    pub fn seed(&self) -> Result<u64> {
        self.pick(|l| l.seed).ok_or_else(|| usage("a seed is required (--seed, config `seed`, or CMGKIT_SEED)"))
    }

    pub fn token_limit(&self) -> Result<usize> {
        let v = self.pick(|l| l.token_limit).unwrap_or(cmgkit_core::curator::DEFAULT_TOKEN_LIMIT);
        if v == 0 {
            return Err(usage("token limit must be positive"));
        }
        Ok(v)
    }

    pub fn english_ratio(&self) -> Result<f64> {
        let v = self.pick(|l| l.english_ratio).unwrap_or(cmgkit_core::curator::DEFAULT_ENGLISH_RATIO);
        if !(0.0..=1.0).contains(&v) {
            return Err(usage("english ratio must lie in [0, 1]"));
        }
        Ok(v)
    }

    pub fn tau(&self) -> Result<f64> {
        let v = self.pick(|l| l.tau).unwrap_or(cmgkit_core::extraction::DEFAULT_TAU);
        if !(v > 0.0 && v <= 1.0) {
            return Err(usage("tau must lie in (0, 1]"));
        }
        Ok(v)
    }

    pub fn parallelism(&self) -> Result<usize> {
        let v = self.pick(|l| l.parallelism).unwrap_or(4);
        if v == 0 {
            return Err(usage("parallelism must be positive"));
        }
        Ok(v)
    }

    pub fn exec(&self) -> cmgkit_core::par::Execution {
        if self.pick(|l| l.sequential).unwrap_or(false) {
            cmgkit_core::par::Execution::Sequential
        } else {
            cmgkit_core::par::Execution::Parallel
        }
    }

    pub fn bins(&self) -> Result<usize> {
        let v = self.pick(|l| l.bins).unwrap_or(20);
        if v == 0 {
            return Err(usage("bins must be positive"));
        }
        Ok(v)
    }

    #[cfg_attr(not(feature = "live"), allow(dead_code))]
    pub fn token_env(&self) -> String {
        self.pick(|l| l.token_env.clone()).unwrap_or_else(|| "GITHUB_TOKEN".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_env() {
        let env = Layer::from_vars(|k| match k {
            "SEED" => Some("3".into()),
            "TAU" => Some("0.5".into()),
            "BINS" => Some("7".into()),
            _ => None,
        })
        .unwrap();
        let file: Layer = toml::from_str("seed = 2\ntau = 0.6").unwrap();
        let flags = Layer {
            seed: Some(1),
            ..Layer::default()
        };
        let s = Settings::new(flags, Some(file), env);
        assert_eq!(s.seed().unwrap(), 1);
        assert_eq!(s.tau().unwrap(), 0.6);
        assert_eq!(s.bins().unwrap(), 7);
        assert_eq!(s.token_limit().unwrap(), 1024);
    }

    #[test]
    fn validation() {
        let s = Settings::new(Layer { tau: Some(0.0), ..Layer::default() }, None, Layer::default());
        assert!(s.tau().is_err());
        assert!(s.seed().is_err());
        assert!(Layer::from_vars(|k| (k == "SEED").then(|| "x".into())).is_err());
        assert!(toml::from_str::<Layer>("colour = 1").is_err());
    }
}
