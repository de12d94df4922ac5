//! Optional flat key-value config file (TOML) with flag precedence:
//! command-line flags override config file values, which override the
//! built-in defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Default)]
pub struct Settings {
    table: toml::Table,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .with_context(|| format!("parsing config file {}", path.display()))?;
        for (key, value) in &table {
            if value.is_table() || value.is_array() {
                bail!("config key {key:?} must be a scalar (flat key = value file)");
            }
        }
        Ok(Settings { table })
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .map(Some)
                .with_context(|| format!("config key {key:?} must be a number")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => {
                let i = v
                    .as_integer()
                    .with_context(|| format!("config key {key:?} must be an integer"))?;
                Ok(Some(usize::try_from(i).with_context(|| {
                    format!("config key {key:?} must be non-negative")
                })?))
            }
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        Ok(self.usize(key)?.map(|v| v as u64))
    }

    pub fn string(&self, key: &str) -> Result<Option<String>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .with_context(|| format!("config key {key:?} must be a string")),
        }
    }
}

/// Flag beats config file beats default.
pub fn resolve<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
