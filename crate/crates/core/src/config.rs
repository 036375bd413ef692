//! `key = value` configuration files.
//!
//! Recognized keys: `bins`, `k`, `m`, `ksp`, `iterations`, `neighbor_order`.
//! Blank lines and lines starting with `#` are ignored.

use std::path::Path;
use std::str::FromStr;

use crate::colorcls::DEFAULT_BINS;
use crate::superpixel::{SlicParams, DEFAULT_COMPACTNESS, DEFAULT_ITERATIONS, DEFAULT_KSP};
use crate::texture::{DEFAULT_K, NEIGHBOR_ORDER};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub bins: usize,
    pub k: usize,
    pub m: f64,
    pub ksp: usize,
    pub iterations: usize,
    pub neighbor_order: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            k: DEFAULT_K,
            m: DEFAULT_COMPACTNESS,
            ksp: DEFAULT_KSP,
            iterations: DEFAULT_ITERATIONS,
            neighbor_order: NEIGHBOR_ORDER.to_string(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| {
        Error::InvalidParameter(format!("line {line}: cannot parse {key} = {value:?}"))
    })
}

impl Config {
    pub fn slic(&self) -> SlicParams {
        SlicParams {
            k_sp: self.ksp,
            m: self.m,
            iterations: self.iterations,
        }
    }

    /// Applies the `key = value` lines of `text` on top of `self`.
    pub fn merge_str(mut self, text: &str) -> Result<Self> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("line {}: expected key = value", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "bins" => self.bins = parse_value(key, value, i + 1)?,
                "k" => self.k = parse_value(key, value, i + 1)?,
                "m" => self.m = parse_value(key, value, i + 1)?,
                "ksp" => self.ksp = parse_value(key, value, i + 1)?,
                "iterations" => self.iterations = parse_value(key, value, i + 1)?,
                "neighbor_order" => self.neighbor_order = value.to_string(),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "line {}: unknown key {key:?}",
                        i + 1
                    )))
                }
            }
        }
        Ok(self)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::default().merge_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.slic().validate()?;
        if self.neighbor_order != NEIGHBOR_ORDER {
            return Err(Error::InvalidParameter(format!(
                "neighbor_order must be {NEIGHBOR_ORDER:?}, got {:?}",
                self.neighbor_order
            )));
        }
        if self.k.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "k must be odd, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::default();
        assert_eq!(
            (c.bins, c.k, c.m, c.ksp, c.iterations),
            (32, 11, 40.0, 150, 10)
        );
        c.validate().unwrap();
    }

    #[test]
    fn parses_overrides_and_comments() {
        let c = Config::default()
            .merge_str("# tuned\nbins = 64\n\n  m=12.5  \nksp = 200\nneighbor_order = clockwise-top-left\n")
            .unwrap();
        assert_eq!((c.bins, c.m, c.ksp, c.k), (64, 12.5, 200, 11));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Config::default().merge_str("bins 3").is_err());
        assert!(Config::default().merge_str("colour = red").is_err());
        assert!(Config::default().merge_str("k = eleven").is_err());
        let even = Config::default().merge_str("k = 4").unwrap();
        assert!(even.validate().is_err());
    }
}
