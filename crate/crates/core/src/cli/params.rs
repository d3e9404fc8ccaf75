//! Key-value parameters from a config file, overridden by flags.
//!
//! File format: one `key = value` per line; `#` starts a comment; blank
//! lines are ignored; `-` and `_` in keys are interchangeable. Every key must
//! be consumed by the command, so typos fail before any computation.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(&format!("line {}", i + 1), "expected `key = value`"))?;
        let key = normalize(k);
        if key.is_empty() {
            return Err(Error::config(&format!("line {}", i + 1), "empty key"));
        }
        let value = v.trim().trim_matches('"').to_string();
        if out.insert(key.clone(), value).is_some() {
            return Err(Error::config(&key, "given twice"));
        }
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Params {
    pub fn new(values: BTreeMap<String, String>) -> Self {
        Self {
            values,
            used: RefCell::default(),
        }
    }

    pub fn load<'a>(
        config: Option<&Path>,
        overrides: impl IntoIterator<Item = (&'a str, Option<String>)>,
    ) -> Result<Self> {
        let mut values = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            if let Some(v) = v {
                values.insert(normalize(k), v);
            }
        }
        Ok(Self::new(values))
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.values.get(key).map(String::as_str)
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
        }
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.parsed::<f64>(key)? {
            Some(v) if !v.is_finite() => Err(Error::config(key, "must be finite")),
            other => Ok(other),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64_or(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::config(key, "must be positive"))
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed::<usize>(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parsed::<u64>(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.str(key) {
            None => Ok(default),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(v) => Err(Error::config(key, format!("not a boolean: `{v}`"))),
        }
    }

    pub fn dimension(&self, default: Option<usize>) -> Result<usize> {
        let d = match (self.parsed::<usize>("d")?, default) {
            (Some(d), _) | (None, Some(d)) => d,
            (None, None) => return Err(Error::config("d", "required")),
        };
        if d == 0 {
            return Err(Error::config("d", "must be at least 1"));
        }
        Ok(d)
    }

    /// Comma-separated floats.
    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.str(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(key, format!("cannot parse `{s}` in list")))
                })
                .collect(),
        }
    }

    /// `a..b` (inclusive) or a single integer.
    pub fn range_or(&self, key: &str, default: (usize, usize)) -> Result<(usize, usize)> {
        let Some(v) = self.str(key) else {
            return Ok(default);
        };
        let bad = || Error::config(key, format!("expected `a..b`, got `{v}`"));
        let (a, b) = match v.split_once("..") {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => {
                let n = v.trim().parse().map_err(|_| bad())?;
                (n, n)
            }
        };
        if a == 0 || b < a {
            return Err(bad());
        }
        Ok((a, b))
    }

    /// Fails on any key the command did not read.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.values.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(Error::config(k, "not a parameter of this command")),
            None => Ok(()),
        }
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.values.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let text = "# demo\nf = s^2\nu0-l1 = 0.5  # trailing\n\n d=2\n";
        let file = parse_config_text(text).unwrap();
        assert_eq!(file["u0_l1"], "0.5");
        let mut p = Params::new(file);
        p.values.insert("d".into(), "3".into());
        assert_eq!(p.dimension(None).unwrap(), 3);
        assert_eq!(p.str("f"), Some("s^2"));
        assert!(p.finish().is_err());
        assert_eq!(p.f64_or("u0_l1", 0.0).unwrap(), 0.5);
        p.finish().unwrap();
    }

    #[test]
    fn field_level_errors() {
        let p = Params::new(parse_config_text("q = abc\nn = 8..3").unwrap());
        let e = p.f64_or("q", 1.0).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "q"));
        assert!(p.range_or("n", (1, 1)).is_err());
        assert!(parse_config_text("novalue").is_err());
        assert!(parse_config_text("a=1\na=2").is_err());
    }
}
