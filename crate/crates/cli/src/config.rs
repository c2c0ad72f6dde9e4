//! Flat key=value configuration with explicit units in key names.
//!
//! Resolution order: built-in defaults, then command-line flags, then the
//! config file (the file wins on conflicts). Unknown keys in the file are
//! rejected with the offending key path.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Resolved {
    map: BTreeMap<String, String>,
}

impl Resolved {
    pub fn with_defaults(defaults: &[(&str, &str)]) -> Self {
        Self {
            map: defaults
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Apply a flag override; the key must be one of the command's defaults.
    pub fn set_flag(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            debug_assert!(self.map.contains_key(key), "unknown flag key {key}");
            self.map.insert(key.to_string(), v.to_string());
        }
    }

    /// Apply a config file on top of whatever the flags set.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    idx + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !self.map.contains_key(key) {
                return Err(CliError::Config(format!(
                    "{}:{}: unknown key '{key}'",
                    path.display(),
                    idx + 1
                )));
            }
            self.map.insert(key.to_string(), value.to_string());
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Result<&str, CliError> {
        self.map
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| CliError::Config(format!("missing key '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| CliError::Config(format!("key '{key}': invalid number '{raw}'")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| CliError::Config(format!("key '{key}': invalid integer '{raw}'")))
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        Ok(self.u64(key)? as usize)
    }

    pub fn string(&self, key: &str) -> Result<String, CliError> {
        Ok(self.raw(key)?.to_string())
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.map.get(key).map(|v| !v.is_empty()).unwrap_or(false)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    CliError::Config(format!("key '{key}': invalid list entry '{s}'"))
                })
            })
            .collect()
    }

    /// Seed for stochastic commands; must be set via --seed or the file.
    pub fn required_seed(&self) -> Result<u64, CliError> {
        if !self.is_set("seed") {
            return Err(CliError::Config(
                "a seed is required for stochastic commands (--seed or seed=...)".into(),
            ));
        }
        self.u64("seed")
    }

    /// FNV-1a fingerprint of the fully resolved configuration; stable across
    /// runs and platforms, printed into every emitted CSV.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for (k, v) in &self.map {
            for b in k.bytes().chain(*b"=").chain(v.bytes()) {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= b'\n' as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    pub fn header_comment(&self) -> String {
        let seed = if self.is_set("seed") {
            self.map["seed"].clone()
        } else {
            "-".to_string()
        };
        format!("# config_hash={} seed={seed}\n", self.hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_flags() {
        let mut cfg = Resolved::with_defaults(&[("a_ms", "1"), ("b_khz", "2"), ("seed", "")]);
        cfg.set_flag("a_ms", Some(5));
        let dir = std::env::temp_dir().join("predlink_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.cfg");
        std::fs::write(&path, "# comment\na_ms = 9\n").unwrap();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.f64("a_ms").unwrap(), 9.0);
        assert_eq!(cfg.f64("b_khz").unwrap(), 2.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let mut cfg = Resolved::with_defaults(&[("a_ms", "1")]);
        let dir = std::env::temp_dir().join("predlink_cfg_test2");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.cfg");
        std::fs::write(&path, "nope_khz=3\n").unwrap();
        let err = cfg.apply_file(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nope_khz") && msg.contains(":1"), "{msg}");
    }

    #[test]
    fn hash_changes_with_values() {
        let a = Resolved::with_defaults(&[("k", "1")]);
        let b = Resolved::with_defaults(&[("k", "2")]);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), Resolved::with_defaults(&[("k", "1")]).hash());
    }
}
