//! Flat `key = value` configuration files.
//!
//! Lines hold one `key = value` pair; `#` starts a comment; keys are dotted
//! (`optimizer.learning_rate`). Every lookup is recorded with the source of
//! its value, so a run log can list each setting, defaults included.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but untyped configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
    overrides: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                errors.push(format!("line {line_no}: expected `key = value`"));
                continue;
            };
            let key = key.trim();
            let valid_key = !key.is_empty()
                && key.split('.').all(|part| {
                    !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                });
            if !valid_key {
                errors.push(format!("line {line_no}: malformed key {key:?}"));
                continue;
            }
            let entry = Entry { value: value.trim().to_string(), line: line_no };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                errors.push(format!("line {line_no}: {key} already set on line {}", prev.line));
            }
        }
        if errors.is_empty() {
            Ok(Self { entries, overrides: BTreeMap::new() })
        } else {
            Err(Error::Config(errors.join("; ")))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// A value that takes precedence over the file, e.g. from a flag.
    pub fn set_override(&mut self, key: &str, value: impl ToString) {
        self.overrides.insert(key.to_string(), value.to_string());
    }

    pub fn resolver(&self) -> Resolver<'_> {
        Resolver { raw: self, used: BTreeSet::new(), log: Vec::new(), errors: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Default => "default",
            Source::File => "config",
            Source::Flag => "flag",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resolved {
    pub key: String,
    pub value: String,
    pub source: Source,
}

/// Typed lookups against a [`RawConfig`]. Errors are collected so that one
/// run reports every bad field.
pub struct Resolver<'a> {
    raw: &'a RawConfig,
    used: BTreeSet<String>,
    log: Vec<Resolved>,
    errors: Vec<String>,
}

/// Message text without the "config error: " prefix, since every collected
/// message ends up inside one config error.
fn bare(e: impl fmt::Display) -> String {
    let text = e.to_string();
    text.strip_prefix("config error: ").unwrap_or(&text).to_string()
}

impl Resolver<'_> {
    fn lookup(&mut self, key: &str) -> Option<(String, Source)> {
        self.used.insert(key.to_string());
        if let Some(v) = self.raw.overrides.get(key) {
            return Some((v.clone(), Source::Flag));
        }
        self.raw.entries.get(key).map(|e| (e.value.clone(), Source::File))
    }

    fn record(&mut self, key: &str, value: String, source: Source) {
        self.log.retain(|r| r.key != key);
        self.log.push(Resolved { key: key.to_string(), value, source });
    }

    /// The parsed value of `key`, or `default` when absent.
    pub fn get<T>(&mut self, key: &str, default: T) -> T
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        match self.lookup(key) {
            Some((text, source)) => match text.parse::<T>() {
                Ok(v) => {
                    self.record(key, v.to_string(), source);
                    v
                }
                Err(e) => {
                    self.errors.push(format!("{key} = {text:?}: {}", bare(e)));
                    default
                }
            },
            None => {
                self.record(key, default.to_string(), Source::Default);
                default
            }
        }
    }

    /// Like [`Resolver::get`] for settings without a default.
    pub fn get_optional<T>(&mut self, key: &str) -> Option<T>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let (text, source) = self.lookup(key)?;
        match text.parse::<T>() {
            Ok(v) => {
                self.record(key, v.to_string(), source);
                Some(v)
            }
            Err(e) => {
                self.errors.push(format!("{key} = {text:?}: {}", bare(e)));
                None
            }
        }
    }

    /// Comma-separated list.
    pub fn get_list<T>(&mut self, key: &str, default: &[T]) -> Vec<T>
    where
        T: FromStr + fmt::Display + Clone,
        T::Err: fmt::Display,
    {
        let join = |items: &[T]| items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        match self.lookup(key) {
            Some((text, source)) => {
                let mut out = Vec::new();
                for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    match part.parse::<T>() {
                        Ok(v) => out.push(v),
                        Err(e) => {
                            self.errors.push(format!("{key}: item {part:?}: {}", bare(e)));
                            return default.to_vec();
                        }
                    }
                }
                self.record(key, join(&out), source);
                out
            }
            None => {
                self.record(key, join(default), Source::Default);
                default.to_vec()
            }
        }
    }

    /// Records a field-level problem found after lookup.
    pub fn error(&mut self, message: impl fmt::Display) {
        self.errors.push(bare(message));
    }

    /// Marks keys as known without reading them.
    pub fn allow(&mut self, keys: &[&str]) {
        for k in keys {
            self.used.insert(k.to_string());
        }
    }

    /// Every resolved setting, or all collected errors plus unknown keys.
    pub fn finish(self) -> Result<Vec<Resolved>> {
        let mut errors = self.errors;
        for (key, entry) in &self.raw.entries {
            if !self.used.contains(key) {
                errors.push(format!("line {}: unknown key {key}", entry.line));
            }
        }
        for key in self.raw.overrides.keys() {
            if !self.used.contains(key) {
                errors.push(format!("unknown override {key}"));
            }
        }
        if errors.is_empty() {
            let mut log = self.log;
            log.sort_by(|a, b| a.key.cmp(&b.key));
            Ok(log)
        } else {
            Err(Error::Config(errors.join("; ")))
        }
    }
}

/// `key = value  # source` lines, one per setting.
pub fn format_log(entries: &[Resolved]) -> String {
    let width = entries.iter().map(|e| e.key.len()).max().unwrap_or(0);
    entries
        .iter()
        .map(|e| format!("{:<width$} = {}  # {}\n", e.key, e.value, e.source))
        .collect()
}
