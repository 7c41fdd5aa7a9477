//! Flat `key = value` text documents used for parameter sets, checkpoints
//! and configuration. Blank lines and `#` comments are ignored; key order is
//! preserved when rendering.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an existing entry in place.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::config(format!("missing key '{key}'")))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::config(format!("bad value '{raw}' for key '{key}'"))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.parse_value(key)?
            .ok_or_else(|| Error::config(format!("missing key '{key}'")))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected 'key = value'", i + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::config(format!("line {}: empty key", i + 1)));
            }
            doc.set(k, v.trim());
        }
        Ok(doc)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let doc = KvDoc::parse("# params\nomega = 0.1\n\nalpha=0.2\nomega = 0.3\n").unwrap();
        assert_eq!(doc.get("omega"), Some("0.3"));
        assert_eq!(doc.require_f64("alpha").unwrap(), 0.2);
        assert_eq!(doc.render(), "omega = 0.3\nalpha = 0.2\n");
        assert!(doc.require("beta").is_err());
        assert!(KvDoc::parse("no separator").is_err());
        assert!(doc.parse_value::<usize>("omega").is_err());
    }

    #[test]
    fn floats_roundtrip_exactly() {
        let x: f64 = 0.1 + 0.2;
        let mut doc = KvDoc::new();
        doc.set("x", x);
        let back = KvDoc::parse(&doc.render()).unwrap();
        assert_eq!(back.require_f64("x").unwrap().to_bits(), x.to_bits());
    }
}
