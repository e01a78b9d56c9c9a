//! Line-oriented `key,value[,value...]` state files used for checkpoints.
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! bitwise exact.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Result, XriskError};
use crate::model::format_f64;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateMap {
    entries: BTreeMap<String, Vec<String>>,
}

impl StateMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_raw(&mut self, key: impl Into<String>, values: Vec<String>) {
        self.entries.insert(key.into(), values);
    }

    pub fn put<T: ToString>(&mut self, key: impl Into<String>, value: T) {
        self.put_raw(key, vec![value.to_string()]);
    }

    pub fn put_f64(&mut self, key: impl Into<String>, value: f64) {
        self.put_raw(key, vec![format_f64(value)]);
    }

    pub fn put_f64s(&mut self, key: impl Into<String>, values: &[f64]) {
        self.put_raw(key, values.iter().map(|v| format_f64(*v)).collect());
    }

    pub fn put_list<T: ToString>(&mut self, key: impl Into<String>, values: &[T]) {
        self.put_raw(key, values.iter().map(|v| v.to_string()).collect());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Result<&[String]> {
        self.entries
            .get(key)
            .map(|v| v.as_slice())
            .ok_or_else(|| XriskError::Parse {
                row: 0,
                msg: format!("state is missing `{key}`"),
            })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        let first = raw.first().ok_or_else(|| XriskError::Parse {
            row: 0,
            msg: format!("state entry `{key}` is empty"),
        })?;
        first.parse().map_err(|_| XriskError::Parse {
            row: 0,
            msg: format!("bad value `{first}` for `{key}`"),
        })
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.raw(key)?
            .iter()
            .map(|s| {
                s.parse().map_err(|_| XriskError::Parse {
                    row: 0,
                    msg: format!("bad value `{s}` in `{key}`"),
                })
            })
            .collect()
    }

    /// Entries whose key starts with `prefix.`, with the prefix removed.
    pub fn section(&self, prefix: &str) -> StateMap {
        let p = format!("{prefix}.");
        StateMap {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Copies every entry of `other` under `prefix.`.
    pub fn put_section(&mut self, prefix: &str, other: StateMap) {
        for (k, v) in other.entries {
            self.entries.insert(format!("{prefix}.{k}"), v);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            for item in v {
                out.push(',');
                out.push_str(item);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let key = parts.next().unwrap_or_default().to_string();
            if key.is_empty() {
                return Err(XriskError::Parse {
                    row: i + 1,
                    msg: "empty state key".into(),
                });
            }
            entries.insert(key, parts.map(str::to_string).collect());
        }
        Ok(Self { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut s = StateMap::new();
        s.put("cursor", 7usize);
        s.put_f64s("u", &[0.1, 1.0 / 3.0, -2.5e-300]);
        s.put_list("order", &[3usize, 1, 2]);
        s.put_list::<usize>("empty", &[]);
        let back = StateMap::parse(&s.to_text()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get::<usize>("cursor").unwrap(), 7);
        assert_eq!(back.get_list::<f64>("u").unwrap()[1], 1.0 / 3.0);
        assert!(back.get_list::<usize>("empty").unwrap().is_empty());
    }

    #[test]
    fn sections_nest() {
        let mut inner = StateMap::new();
        inner.put("a", 1u8);
        let mut outer = StateMap::new();
        outer.put_section("pos", inner.clone());
        assert_eq!(outer.section("pos"), inner);
        assert!(outer.get::<u8>("a").is_err());
    }
}
