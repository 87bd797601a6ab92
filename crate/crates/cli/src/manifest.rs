//! Flat `key = value` run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const KEYS: &[&str] = &[
    "command", "alpha_theta", "alpha_phi", "eta1", "eta2", "grid", "cut", "seed", "trials", "chi", "order", "detector",
    "policy", "n_theta", "n_phi", "format", "out",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    values: BTreeMap<String, String>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("manifest line {}: expected key = value", i + 1);
            };
            let (k, v) = (k.trim().replace('-', "_"), v.trim());
            if !KEYS.contains(&k.as_str()) {
                bail!("manifest line {}: unknown key '{k}'", i + 1);
            }
            if values.insert(k.clone(), v.to_string()).is_some() {
                bail!("manifest line {}: duplicate key '{k}'", i + 1);
            }
        }
        Ok(Manifest { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow::anyhow!("manifest key '{key}': {e}")))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let m = Manifest::parse("# run\ncommand = reencode\n\nalpha-theta = 1.25  # radians\nseed=7\n").unwrap();
        assert_eq!(m.raw("command"), Some("reencode"));
        assert_eq!(m.get::<f64>("alpha_theta").unwrap(), Some(1.25));
        assert_eq!(m.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(m.get::<u64>("trials").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(Manifest::parse("colour = red").is_err());
        assert!(Manifest::parse("seed = 1\nseed = 2").is_err());
        assert!(Manifest::parse("seed").is_err());
    }

    #[test]
    fn reports_bad_values() {
        let m = Manifest::parse("trials = many").unwrap();
        assert!(m.get::<usize>("trials").is_err());
    }
}
