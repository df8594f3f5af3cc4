//! Run configuration: defaults, a TOML file, then `TOWERZETA_*` environment
//! overrides.
//!
//! ```toml
//! budget = 2147483648
//! g_max_leaf = 12
//! threads = 4
//! cache_path = "towerzeta-cache.json"
//! format = "text"
//!
//! [max_k]
//! T6 = 10
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::count::{CountOptions, DEFAULT_BUDGET};
use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "TOWERZETA_";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    #[default]
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            _ => Err(Error::Parse(format!("unknown format {s:?}, expected json or text"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Per-curve cap on `k`, on top of the budget.
    pub max_k: BTreeMap<String, u32>,
    /// Largest `4^k * 2^layers` counted for one row.
    pub budget: u64,
    pub g_max_leaf: usize,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub cache_path: Option<PathBuf>,
    pub format: Format,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            max_k: BTreeMap::new(),
            budget: DEFAULT_BUDGET,
            g_max_leaf: 12,
            threads: 0,
            cache_path: None,
            format: Format::Text,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config> {
        let c: Config = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Applies `TOWERZETA_BUDGET`, `TOWERZETA_THREADS`, `TOWERZETA_CACHE`,
    /// `TOWERZETA_G_MAX_LEAF` and `TOWERZETA_FORMAT` from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(name) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let v = v.as_ref();
            let num = |what: &str| -> Result<u64> {
                v.parse().map_err(|_| Error::Parse(format!("{ENV_PREFIX}{what}: not a number: {v:?}")))
            };
            match name {
                "BUDGET" => self.budget = num(name)?,
                "THREADS" => self.threads = num(name)? as usize,
                "G_MAX_LEAF" => self.g_max_leaf = num(name)? as usize,
                "CACHE" => self.cache_path = Some(PathBuf::from(v)),
                "FORMAT" => self.format = v.parse()?,
                _ => {}
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Parse("budget must be positive".into()));
        }
        if self.g_max_leaf == 0 {
            return Err(Error::Parse("g_max_leaf must be positive".into()));
        }
        if let Some((id, _)) = self.max_k.iter().find(|(_, k)| **k == 0) {
            return Err(Error::Parse(format!("max_k for {id} must be positive")));
        }
        Ok(())
    }

    pub fn count_options(&self) -> CountOptions {
        CountOptions { budget: self.budget, ..CountOptions::default() }
    }

    /// `k` capped by `max_k` for this curve.
    pub fn cap_k(&self, id: &str, k: u32) -> u32 {
        self.max_k.get(id).map_or(k, |m| k.min(*m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_toml() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        let c = Config::from_toml("budget = 1024\nformat = \"json\"\n[max_k]\nT6 = 10\n").unwrap();
        assert_eq!(c.budget, 1024);
        assert_eq!(c.format, Format::Json);
        assert_eq!(c.cap_k("T6", 12), 10);
        assert_eq!(c.cap_k("T5", 12), 12);
        assert!(Config::from_toml("budget = 0").is_err());
        assert!(Config::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut c = Config::default();
        c.apply_env([
            ("TOWERZETA_THREADS", "3"),
            ("TOWERZETA_CACHE", "/tmp/x.json"),
            ("HOME", "/root"),
        ])
        .unwrap();
        assert_eq!(c.threads, 3);
        assert_eq!(c.cache_path.as_deref(), Some(Path::new("/tmp/x.json")));
        assert!(c.clone().apply_env([("TOWERZETA_BUDGET", "lots")]).is_err());
    }
}
