//! Plain-text `key = value` files with line diagnostics.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Clone, Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
    used: std::cell::RefCell<Vec<String>>,
}

impl KeyValues {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {line_no}: empty key")));
            }
            if entries.contains_key(&key) {
                return Err(Error::Config(format!(
                    "line {line_no}: duplicate key `{key}`"
                )));
            }
            entries.insert(key, (value.trim().to_string(), line_no));
        }
        Ok(KeyValues {
            entries,
            used: Default::default(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().push(key.to_string());
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Parses `key` if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.used.borrow_mut().push(key.to_string());
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!("line {line}: cannot parse `{key}` from `{v}`"))
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    /// Whitespace- or comma-separated list of values.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.used.borrow_mut().push(key.to_string());
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|_| {
                        Error::Config(format!("line {line}: cannot parse `{s}` in `{key}`"))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Fails on keys that no getter asked for.
    pub fn reject_unknown(&self) -> Result<()> {
        let used = self.used.borrow();
        for (key, (_, line)) in &self.entries {
            if !used.iter().any(|u| u == key) {
                return Err(Error::Config(format!("line {line}: unknown key `{key}`")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments() {
        let kv = KeyValues::parse("# header\na = 1\n b=2.5 # trailing\n\nlist = 1, 2 3\n").unwrap();
        assert_eq!(kv.require::<i32>("a").unwrap(), 1);
        assert_eq!(kv.get_or("b", 0.0).unwrap(), 2.5);
        assert_eq!(kv.get_list::<u32>("list").unwrap(), Some(vec![1, 2, 3]));
        assert!(kv.reject_unknown().is_ok());
    }

    #[test]
    fn diagnostics_name_the_line() {
        let err = KeyValues::parse("a = 1\nnonsense\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let kv = KeyValues::parse("a = x\n").unwrap();
        assert!(kv
            .get::<f64>("a")
            .unwrap_err()
            .to_string()
            .contains("line 1"));
        let kv = KeyValues::parse("a = 1\nzzz = 2\n").unwrap();
        kv.get::<f64>("a").unwrap();
        assert!(kv.reject_unknown().unwrap_err().to_string().contains("zzz"));
        assert!(KeyValues::parse("a = 1\na = 2").is_err());
    }
}
