//! Optional config file: a flat TOML table whose keys mirror the long flag
//! names. Underscores and dashes in keys are interchangeable.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse()?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            let v = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => bail!("key {key:?}: nested value {other} is not allowed"),
            };
            values.insert(key.replace('_', "-"), v);
        }
        Ok(Self { values })
    }

    /// Rejects keys the command does not understand, so typos are not
    /// silently ignored.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !known.contains(&key.as_str()) {
                bail!("unknown config key {key:?} for this command");
            }
        }
        Ok(())
    }

    /// The flag value if given, otherwise the file value.
    pub fn pick<V>(&self, flag: Option<V>, key: &str) -> Result<Option<V>>
    where
        V: FromStr,
        V::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|raw| {
                raw.parse::<V>()
                    .map_err(|e| anyhow!("config key {key:?}: invalid value {raw:?}: {e}"))
            })
            .transpose()
    }

    pub fn require<V>(&self, flag: Option<V>, key: &str) -> Result<V>
    where
        V: FromStr,
        V::Err: std::fmt::Display,
    {
        self.pick(flag, key)?
            .ok_or_else(|| anyhow!("missing required value --{key} (flag or config key)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let c = Config::parse("k = 0.3\nn_max = 5\nroute = \"toeplitz\"\n").unwrap();
        assert_eq!(c.pick::<f64>(None, "k").unwrap(), Some(0.3));
        assert_eq!(c.pick(Some(0.5f64), "k").unwrap(), Some(0.5));
        assert_eq!(c.require::<usize>(None, "n-max").unwrap(), 5);
        assert_eq!(
            c.pick::<String>(None, "route").unwrap().unwrap(),
            "toeplitz"
        );
        assert!(c.require::<f64>(None, "tol").is_err());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Config::parse("[section]\nk = 1\n").is_err());
        assert!(Config::parse("k = ").is_err());
        let c = Config::parse("kk = 1").unwrap();
        assert!(c.check_keys(&["k"]).is_err());
        assert!(c.pick::<usize>(None, "kk").is_ok());
        let c = Config::parse("n = \"x\"").unwrap();
        assert!(c.pick::<usize>(None, "n").is_err());
    }
}
