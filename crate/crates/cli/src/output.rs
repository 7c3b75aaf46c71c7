//! Artifact writing. Every file carries the code version and config hash.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = concat!("cwbnlw ", env!("CARGO_PKG_VERSION"));

/// One CSV cell. Floats are written with 17 significant digits.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
    B(bool),
    S(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(v) => write!(f, "{v:.16e}"),
            Cell::I(v) => write!(f, "{v}"),
            Cell::U(v) => write!(f, "{v}"),
            Cell::B(v) => write!(f, "{v}"),
            Cell::S(v) => {
                if v.contains([',', '"', '\n']) {
                    write!(f, "\"{}\"", v.replace('"', "\"\""))
                } else {
                    write!(f, "{v}")
                }
            }
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'a str,
    config_hash: &'a str,
    overrides: &'a [String],
    data: &'a T,
}

/// Writes artifacts into one directory.
#[derive(Clone, Debug)]
pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    warnings: Vec<String>,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, hash: String, warnings: Vec<String>) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
            warnings,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&mut self, name: &str) -> Result<(PathBuf, fs::File), CliError> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok((path, file))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<PathBuf, CliError> {
        let env = Envelope {
            version: VERSION,
            config_hash: &self.hash,
            overrides: &self.warnings,
            data,
        };
        let text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Runtime(e.to_string()))?;
        let (path, mut f) = self.create(name)?;
        writeln!(f, "{text}").map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(path)
    }

    /// CSV preceded by `#` comment lines carrying the artifact metadata.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<PathBuf, CliError> {
        let mut text = format!("# {VERSION}\n# config_hash={}\n", self.hash);
        for w in &self.warnings {
            text.push_str(&format!("# override: {w}\n"));
        }
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        let (path, mut f) = self.create(name)?;
        f.write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_cells_have_seventeen_digits() {
        assert_eq!(Cell::F(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(Cell::F(-2.0).to_string(), "-2.0000000000000000e0");
        assert_eq!(Cell::S("a,b".into()).to_string(), "\"a,b\"");
    }

    #[test]
    fn files_carry_hash_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path(), "abc".into(), vec!["w".into()]).unwrap();
        let p = a.csv("t.csv", &["x"], &[vec![1.5.into()]]).unwrap();
        let text = fs::read_to_string(p).unwrap();
        assert!(text.contains("config_hash=abc") && text.contains(VERSION) && text.contains("override: w"));
        let p = a.json("t.json", &vec![1, 2]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["config_hash"], "abc");
        assert_eq!(a.written().len(), 2);
    }
}
