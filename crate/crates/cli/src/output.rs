//! Output files and run manifests.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};

/// Writes `path` through a sibling temp file and a rename, so readers never
/// see a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

/// Creates `path` (and its parents) and hands a buffered writer to `f`.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
{
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

pub fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Directory name for one phase length, e.g. `T=21.481`.
pub fn t_dir(t: f64) -> String {
    format!("T={t}")
}

#[derive(Debug)]
pub struct Manifest {
    path: PathBuf,
    command: String,
    config: String,
    files: Vec<PathBuf>,
    timings: Vec<(String, Duration)>,
    notes: Vec<String>,
    started: Instant,
}

impl Manifest {
    pub fn new(path: PathBuf, command: &str, config: String) -> Self {
        Self {
            path,
            command: command.to_string(),
            config,
            files: Vec::new(),
            timings: Vec::new(),
            notes: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn file(&mut self, p: impl Into<PathBuf>) {
        self.files.push(p.into());
    }

    pub fn timing(&mut self, label: impl Into<String>, d: Duration) {
        self.timings.push((label.into(), d));
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Writes the manifest with the outcome of the run and passes the
    /// outcome through unchanged.
    pub fn finish<T>(mut self, outcome: Result<T>) -> Result<T> {
        self.timing("total", self.started.elapsed());
        let status = match &outcome {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("failed: {e:#}"),
        };
        let mut s = String::new();
        s.push_str(&format!("command = {}\n", self.command));
        s.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("status = {}\n", status.replace('\n', " ")));
        s.push_str("\n[files]\n");
        for f in &self.files {
            s.push_str(&format!("{}\n", f.display()));
        }
        s.push_str("\n[timings]\n");
        for (label, d) in &self.timings {
            s.push_str(&format!("{label} = {:.3}s\n", d.as_secs_f64()));
        }
        if !self.notes.is_empty() {
            s.push_str("\n[notes]\n");
            for n in &self.notes {
                s.push_str(&format!("{n}\n"));
            }
        }
        s.push_str("\n[config]\n");
        s.push_str(&self.config);
        if let Err(e) = write_atomic(&self.path, s.as_bytes()) {
            log::error!("could not write manifest {}: {e:#}", self.path.display());
            if outcome.is_ok() {
                return Err(e);
            }
        }
        outcome
    }
}
