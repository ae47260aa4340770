//! Flat key=value configuration merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Resolved settings for one command: defaults, then the config file, then flags.
#[derive(Clone, Debug)]
pub struct Settings {
    command: &'static str,
    values: BTreeMap<String, String>,
}

/// Reads `key = value` lines. Blank lines and '#' comments are skipped;
/// underscores in keys are treated as dashes.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value, got {line:?}", k + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", k + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    /// `allowed` lists every key the command understands; `flags` holds the
    /// flags actually given.
    pub fn resolve(
        command: &'static str,
        allowed: &[&str],
        defaults: &[(&str, &str)],
        config: Option<&Path>,
        flags: Vec<(&str, Option<String>)>,
    ) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> =
            defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_config(&text)? {
                if !allowed.contains(&k.as_str()) {
                    return Err(CliError::usage(format!("config key {k:?} does not apply to {command}")));
                }
                values.insert(k, v);
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        Ok(Settings { command, values })
    }

    pub fn command(&self) -> &'static str {
        self.command
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::usage(format!("bad value for {key}: {v:?} ({e})"))))
            .transpose()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.opt(key)?.ok_or_else(|| CliError::usage(format!("{} needs a value for {key}", self.command)))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")
    }

    /// Everything that determines the numeric payload. The output path and
    /// the config path itself are left out so the echo can be fed back verbatim.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.values
            .iter()
            .filter(|(k, _)| k.as_str() != "out" && k.as_str() != "config")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn echo_text(&self) -> String {
        self.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_normalize() {
        let m = parse_config("# run\nn = 4\np_allowed=0.1\n\n").unwrap();
        assert_eq!(m["n"], "4");
        assert_eq!(m["p-allowed"], "0.1");
        assert!(parse_config("just a line").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = std::env::temp_dir().join(format!("bb84-cfg-{}", std::process::id()));
        std::fs::write(&dir, "n = 4\nseed = 9\n").unwrap();
        let s = Settings::resolve(
            "simulate",
            &["n", "seed"],
            &[("n", "2"), ("seed", "0")],
            Some(&dir),
            vec![("n", Some("6".into())), ("seed", None)],
        )
        .unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!(s.get::<usize>("n").unwrap(), 6);
        assert_eq!(s.seed().unwrap(), 9);
        assert!(s.get::<usize>("missing").is_err());
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = std::env::temp_dir().join(format!("bb84-cfg-bad-{}", std::process::id()));
        std::fs::write(&dir, "bogus = 1\n").unwrap();
        let r = Settings::resolve("table1", &["seed"], &[], Some(&dir), vec![]);
        std::fs::remove_file(&dir).ok();
        assert_eq!(r.unwrap_err().code, 2);
    }
}
