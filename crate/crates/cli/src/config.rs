//! `--config` files and flag resolution.
//!
//! A config file holds `key = value` lines named after the long flags;
//! `#` starts a comment. Explicit flags win over file values, file values
//! win over defaults. Every resolved value is recorded for the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use crate::error::CliError;

/// A value that can come from a flag, a config file or a default.
pub trait Setting: Sized {
    fn parse_setting(s: &str) -> Result<Self, String>;
    fn show(&self) -> String;
}

macro_rules! from_str_setting {
    ($($t:ty),*) => {$(
        impl Setting for $t {
            fn parse_setting(s: &str) -> Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

from_str_setting!(u64, usize, f64, bool, String);

impl Setting for PathBuf {
    fn parse_setting(s: &str) -> Result<Self, String> {
        Ok(PathBuf::from(s))
    }
    fn show(&self) -> String {
        self.display().to_string()
    }
}

/// Implements [`Setting`] through clap's value names.
macro_rules! enum_setting {
    ($($t:ty),*) => {$(
        impl $crate::config::Setting for $t {
            fn parse_setting(s: &str) -> Result<Self, String> {
                <$t as clap::ValueEnum>::from_str(s, false)
            }
            fn show(&self) -> String {
                $crate::config::value_name(self)
            }
        }
    )*};
}
pub(crate) use enum_setting;

pub fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    source: Option<PathBuf>,
    snapshot: BTreeMap<String, String>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let file = parse_kv(&text).map_err(|(line, msg)| CliError::usage(format!("config {}:{line}: {msg}", path.display())))?;
        Ok(Self {
            file,
            source: Some(path.to_path_buf()),
            snapshot: BTreeMap::new(),
        })
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    fn from_file<T: Setting>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.file.remove(key) {
            None => Ok(None),
            Some(raw) => T::parse_setting(&raw)
                .map(Some)
                .map_err(|e| CliError::usage(format!("config key {key} = {raw:?}: {e}"))),
        }
    }

    /// Flag, else config file, else `default`.
    pub fn value<T: Setting>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        let file = self.from_file(key)?;
        let v = flag.or(file).unwrap_or(default);
        self.snapshot.insert(key.to_string(), v.show());
        Ok(v)
    }

    /// Like [`Resolver::value`] without a default; absence is recorded as empty.
    pub fn optional<T: Setting>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let file = self.from_file(key)?;
        let v = flag.or(file);
        self.snapshot.insert(key.to_string(), v.as_ref().map(Setting::show).unwrap_or_default());
        Ok(v)
    }

    pub fn required<T: Setting>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError> {
        self.optional(key, flag)?
            .ok_or_else(|| CliError::usage(format!("--{key} is required (flag or config key)")))
    }

    /// Rejects config keys no setting asked for and returns the snapshot.
    pub fn finish(self) -> Result<BTreeMap<String, String>, CliError> {
        if let Some(key) = self.file.keys().next() {
            return Err(CliError::usage(format!("unknown config key {key:?}")));
        }
        Ok(self.snapshot)
    }
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, (usize, String)> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| (i + 1, format!("expected key = value, got {line:?}")))?;
        let key = k.trim().trim_start_matches("--").to_string();
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err((i + 1, format!("duplicate key {key:?}")));
        }
    }
    Ok(out)
}
