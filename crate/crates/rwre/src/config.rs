//! Flat `key=value` experiment configuration. Unknown and duplicate keys are
//! errors; command-line flags mirror the keys and override them.

use crate::environment::{EnvError, EnvFamily};
use crate::genealogy::Backend;
use std::collections::HashSet;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected key=value, got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("invalid value for '{key}': {msg}")]
    BadValue { key: String, msg: String },
    #[error("missing required key '{0}' (set it in the config or pass the flag)")]
    Missing(&'static str),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Experiment settings with defaults; see the config keys of the same names.
#[derive(Debug, Clone)]
pub struct Settings {
    pub family: String,
    pub d: u32,
    pub sigma2: f64,
    /// Excursion count / scale parameter of the run.
    pub n: u32,
    /// Sampled generation fraction: pairs live in generation `floor(b n)`.
    pub b: f64,
    /// Coalescence threshold fraction `floor(a n)`.
    pub a: f64,
    /// Remote-past separation generation.
    pub m: u32,
    pub replicas: u64,
    pub seed: Option<u64>,
    pub backend: Backend,
    /// Walk-backend generation cap; `0` means the default `8 n`.
    pub gen_cap: u32,
    pub vertex_budget: usize,
    /// Depth of the martingale-limit proxy pool.
    pub winf_depth: u32,
    /// Tilted-walk series truncation; `0` selects the adaptive rule.
    pub cinf_truncation: u32,
    pub out_dir: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            family: "binary-gaussian".into(),
            d: 2,
            sigma2: 0.5,
            n: 100,
            b: 0.5,
            a: 0.25,
            m: 2,
            replicas: 1000,
            seed: None,
            backend: Backend::Gw,
            gen_cap: 0,
            vertex_budget: crate::environment::DEFAULT_VERTEX_BUDGET,
            winf_depth: 30,
            cinf_truncation: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl Settings {
    /// Parse a flat key=value config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut settings = Self::default();
        let mut seen: HashSet<String> = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
                line: idx + 1,
                text: line.into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey(key.into()));
            }
            settings.set(key, value)?;
        }
        Ok(settings)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Set one key; used both by the parser and by CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                key: key.into(),
                msg: format!("'{value}': {e}"),
            })
        }
        match key {
            "family" => match value {
                "binary-gaussian" | "d-ary-gaussian" => self.family = value.into(),
                other => {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        msg: format!("unknown family '{other}'"),
                    })
                }
            },
            "d" => self.d = parse(key, value)?,
            "sigma2" => self.sigma2 = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "b" => self.b = parse(key, value)?,
            "a" => self.a = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "replicas" => self.replicas = parse(key, value)?,
            "seed" => self.seed = Some(parse(key, value)?),
            "backend" => match value {
                "walk" => self.backend = Backend::Walk,
                "gw" => self.backend = Backend::Gw,
                other => {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        msg: format!("backend must be 'walk' or 'gw', got '{other}'"),
                    })
                }
            },
            "gen_cap" => self.gen_cap = parse(key, value)?,
            "vertex_budget" => self.vertex_budget = parse(key, value)?,
            "winf_depth" => self.winf_depth = parse(key, value)?,
            "cinf_truncation" => self.cinf_truncation = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Build the configured environment family.
    pub fn env_family(&self) -> Result<EnvFamily, ConfigError> {
        let d = if self.family == "binary-gaussian" {
            2
        } else {
            self.d
        };
        Ok(EnvFamily::gaussian(d, self.sigma2)?)
    }

    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or(ConfigError::Missing("seed"))
    }

    /// Effective walk generation cap: configured value or the default `8 n`.
    pub fn effective_gen_cap(&self) -> u32 {
        if self.gen_cap == 0 {
            8 * self.n
        } else {
            self.gen_cap
        }
    }

    /// Sampled generation `floor(b n)`.
    pub fn generation_k(&self) -> u32 {
        (self.b * self.n as f64).floor() as u32
    }

    /// Tail threshold `floor(a n)`.
    pub fn threshold_an(&self) -> u32 {
        (self.a * self.n as f64).floor() as u32
    }
}
