use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// A value that can come from a config file line or a flag.
pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! via_from_str {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse::<$t>().map_err(|e| e.to_string())
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

via_from_str!(usize, u64, f64, bool, String);

impl ConfigValue for PathBuf {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(PathBuf::from(s))
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

impl ConfigValue for Vec<PathBuf> {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(s.split(',').filter(|p| !p.is_empty()).map(PathBuf::from).collect())
    }
    fn render(&self) -> String {
        self.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
    }
}

/// Merges a `key=value` file with command-line flags; flags win. Every key a
/// command reads is recorded so the resolved run can be written back out, and
/// file keys nobody read are rejected.
#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    read: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut r = Self::default();
        let Some(path) = path else { return Ok(r) };
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
            let k = k.trim().replace('-', "_");
            if r.file.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("{}:{}: duplicate key {k}", path.display(), n + 1)));
            }
        }
        Ok(r)
    }

    pub fn optional<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        self.read.insert(key.to_string());
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(s) => Some(T::parse_value(s).map_err(|e| CliError::Usage(format!("config key {key}: {e}")))?),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.resolved.push((key.to_string(), v.render()));
        }
        Ok(v)
    }

    pub fn value<T: ConfigValue>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        let v = self.optional(key, flag)?;
        Ok(match v {
            Some(v) => v,
            None => {
                self.resolved.push((key.to_string(), default.render()));
                default
            }
        })
    }

    pub fn required<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError> {
        self.optional(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required setting --{}", key.replace('_', "-"))))
    }

    /// Records a derived value that was not read from flags or the file.
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    /// Fails on file keys the command never asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !self.read.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            Err(CliError::Usage(format!("unknown config keys: {}", names.join(", "))))
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.resolved {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_and_unknown_keys_fail() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        fs::write(&p, "# comment\nbeam-width = 4\nk=3\nbogus=1\n").unwrap();
        let mut r = Resolver::load(Some(&p)).unwrap();
        assert_eq!(r.value("beam_width", None, 10usize).unwrap(), 4);
        assert_eq!(r.value("k", Some(7usize), 1).unwrap(), 7);
        assert_eq!(r.value("alpha", None, 0.5f64).unwrap(), 0.5);
        let err = r.finish().unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert_eq!(r.to_text(), "beam_width=4\nk=7\nalpha=0.5\n");
        assert!(r.required::<PathBuf>("model", None).is_err());
    }

    #[test]
    fn malformed_files_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.cfg");
        fs::write(&p, "k 3\n").unwrap();
        assert_eq!(Resolver::load(Some(&p)).unwrap_err().exit_code(), 1);
        fs::write(&p, "k=x\n").unwrap();
        let mut r = Resolver::load(Some(&p)).unwrap();
        assert!(r.value("k", None, 1usize).is_err());
    }
}
