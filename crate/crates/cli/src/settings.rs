//! Flag/config-file/default resolution.
//!
//! The config file is plain `key = value` text whose keys are the long flag
//! names (`fee-bp = 2`). Blank lines and `#` comments are ignored. A flag given
//! on the command line wins over the file, which wins over the built-in
//! default. Every resolved value except paths and `threads` is recorded for
//! the run manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

pub fn parse_config(text: &str, origin: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("{}:{}: expected `key = value`", origin.display(), i + 1)))?;
        let key = key.trim().trim_start_matches("--").to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Validation(format!(
                "{}:{}: duplicate key `{key}`",
                origin.display(),
                i + 1
            )));
        }
    }
    Ok(map)
}

pub struct Resolver {
    config: BTreeMap<String, String>,
    effective: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config_path: Option<&Path>) -> Result<Self, CliError> {
        let config = match config_path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                parse_config(&text, p)?
            }
            None => BTreeMap::new(),
        };
        Ok(Resolver {
            config,
            effective: BTreeMap::new(),
        })
    }

    fn take_config<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.config.remove(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Validation(format!("config key `{key}`: invalid value `{raw}`: {e}"))),
            None => Ok(None),
        }
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let from_file = self.take_config(key)?;
        let v = flag.or(from_file).unwrap_or(default);
        self.effective.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Boolean switch: set by the flag, or by `key = true` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let from_file: Option<bool> = self.take_config(key)?;
        let v = flag || from_file.unwrap_or(false);
        self.effective.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Paths and other run-local values that must not enter the manifest.
    pub fn local<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let from_file = self.take_config(key)?;
        Ok(flag.or(from_file))
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        self.local(key, flag)
    }

    /// The recorded settings; fails on config keys nothing asked for.
    pub fn finish(self) -> Result<BTreeMap<String, String>, CliError> {
        if let Some(key) = self.config.keys().next() {
            return Err(CliError::Validation(format!(
                "config key `{key}` is unknown or not used by this command"
            )));
        }
        Ok(self.effective)
    }
}

/// Comma-separated list of numbers, or an integer range `a..b` (inclusive).
pub fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::Validation(format!("--{key}: {what} in `{raw}`"));
    if let Some((a, b)) = raw.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad("bad range start"))?;
        let b: i64 = b.trim().parse().map_err(|_| bad("bad range end"))?;
        if a > b {
            return Err(bad("empty range"));
        }
        return Ok((a..=b).map(|v| v as f64).collect());
    }
    let values = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad("not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(bad("empty list"));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let map = parse_config("# c\nfee-bp = 2\n--seed=7 # trailing\n\n", Path::new("x")).unwrap();
        assert_eq!(map["fee-bp"], "2");
        assert_eq!(map["seed"], "7");
        assert!(parse_config("oops\n", Path::new("x")).is_err());
        assert!(parse_config("a=1\na=2\n", Path::new("x")).is_err());
    }

    #[test]
    fn precedence_is_flag_then_file_then_default() {
        let mut r = Resolver {
            config: parse_config("fee-bp = 2\nseed = 9\n", Path::new("x")).unwrap(),
            effective: BTreeMap::new(),
        };
        assert_eq!(r.value("fee-bp", Some(3.0), 1.0).unwrap(), 3.0);
        assert_eq!(r.value("seed", None, 1u64).unwrap(), 9);
        assert_eq!(r.value("liquidity", None, 1.5).unwrap(), 1.5);
        let eff = r.finish().unwrap();
        assert_eq!(eff["fee-bp"], "3");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r = Resolver {
            config: parse_config("nope = 1\n", Path::new("x")).unwrap(),
            effective: BTreeMap::new(),
        };
        assert!(r.finish().is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("sizes", "1..3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_list("alpha", "0, 1,5").unwrap(), vec![0.0, 1.0, 5.0]);
        assert!(parse_list("alpha", "1,x").is_err());
        assert!(parse_list("sizes", "3..1").is_err());
    }
}
