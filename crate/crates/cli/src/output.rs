use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

/// Output directory of one run. Every CSV starts with `#seed=` and
/// `#config-hash=` lines, then a header row.
pub struct OutDir {
    root: PathBuf,
    seed: u64,
    hash: String,
}

impl OutDir {
    /// Creates `root` and writes the echoed config into it.
    pub fn create(root: &Path, seed: u64, config_text: &str) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Output(format!("{}: {e}", root.display())))?;
        let hash = hex::encode(Sha256::digest(config_text.as_bytes()));
        let out = Self { root: root.to_path_buf(), seed, hash };
        out.write_text("config.toml", config_text)?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| CliError::Output(format!("{}: {e}", p.display())))
    }

    pub fn csv<R: CsvRow>(&self, name: &str, header: &[&str], rows: &[R]) -> Result<(), CliError> {
        let p = self.path(name);
        let err = |e: &dyn std::fmt::Display| CliError::Output(format!("{}: {e}", p.display()));
        let mut buf = Vec::new();
        writeln!(buf, "#seed={}", self.seed).map_err(|e| err(&e))?;
        writeln!(buf, "#config-hash={}", self.hash).map_err(|e| err(&e))?;
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header).map_err(|e| err(&e))?;
            for r in rows {
                w.write_record(r.fields()).map_err(|e| err(&e))?;
            }
            w.flush().map_err(|e| err(&e))?;
        }
        fs::write(&p, buf).map_err(|e| err(&e))
    }
}

pub trait CsvRow {
    fn fields(&self) -> Vec<String>;
}

impl CsvRow for Vec<String> {
    fn fields(&self) -> Vec<String> {
        self.clone()
    }
}

/// Shortest round-trip text for a float; empty for NaN.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}
