//! Flat `key=value` text used by every on-disk config and fit artifact.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvMap {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                field: line.to_string(),
                reason: "expected `key=value`".into(),
            })?;
            if entries
                .insert(key.trim().to_string(), (i + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Parse {
                    line: i + 1,
                    field: key.trim().to_string(),
                    reason: "duplicate key".into(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn field_error(&self, key: &str, reason: impl Display) -> Error {
        Error::Parse {
            line: self.entries.get(key).map_or(0, |(l, _)| *l),
            field: key.to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .raw(key)
            .ok_or_else(|| self.field_error(key, "missing key"))?;
        raw.parse()
            .map_err(|_| self.field_error(key, format!("cannot parse `{raw}`")))
    }

    /// Comma-joined list; an empty value is the empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self
            .raw(key)
            .ok_or_else(|| self.field_error(key, "missing key"))?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| self.field_error(key, format!("cannot parse `{s}`")))
            })
            .collect()
    }
}

pub fn join<T: Display>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}
