//! Artifact writing. Every file goes through [`Artifacts`], which remembers
//! what it wrote so a failed run can mark its outputs as partial.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use gapspec_core::DMatrix;
use serde::Serialize;
use serde_json::Value;

pub const PARTIAL_SUFFIX: &str = ".partial";

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn text(&mut self, name: &str, content: &str) -> io::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, content)?;
        // A stale partial copy from an earlier failed run would be misleading.
        let _ = fs::remove_file(partial_name(&path));
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        s.push('\n');
        self.text(name, &s)
    }

    /// Rename everything written so far to `<name>.partial`.
    pub fn mark_partial(&mut self) -> io::Result<()> {
        for path in self.written.drain(..) {
            fs::rename(&path, partial_name(&path))?;
        }
        Ok(())
    }
}

fn partial_name(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(PARTIAL_SUFFIX);
    PathBuf::from(s)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// JSON number, or the string `"inf"` for the empty-vs-nonempty sentinel.
pub fn distance(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from(num(x))
    }
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", num(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}
