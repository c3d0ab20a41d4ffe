//! Run directories, atomic file writes and number formatting.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Fixed 17-significant-digit scientific notation; always round-trips.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Writes `bytes` to `path` through a sibling temp file and a rename, so
/// readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// A run directory that only appears under its final name once every
/// artifact has been written. Dropping it without `commit` removes it.
#[derive(Debug)]
pub struct StagedRun {
    staging: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl StagedRun {
    /// Reserves `<root>/<timestamp>-seed<seed>`, adding a counter suffix if
    /// that name is taken.
    pub fn create(root: &Path, timestamp: &str, seed: u64) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        let base = format!("{timestamp}-seed{seed}");
        for attempt in 0.. {
            let name = if attempt == 0 { base.clone() } else { format!("{base}-{attempt}") };
            let target = root.join(&name);
            let staging = root.join(format!(".{name}.partial"));
            if target.exists() {
                continue;
            }
            match fs::create_dir(&staging) {
                Ok(()) => return Ok(Self { staging, target, committed: false }),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e),
            }
        }
        unreachable!()
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.staging.join(name), bytes)
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    pub fn commit(mut self) -> io::Result<PathBuf> {
        fs::rename(&self.staging, &self.target)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for StagedRun {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// Builds CSV text with a fixed header.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let line: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.0, -2.5e-300, 1e300, f64::MIN_POSITIVE] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn uncommitted_runs_vanish() {
        let root = tempfile::tempdir().unwrap();
        {
            let run = StagedRun::create(root.path(), "t", 1).unwrap();
            run.write("a.csv", b"x\n").unwrap();
        }
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
        let a = StagedRun::create(root.path(), "t", 1).unwrap();
        let b = StagedRun::create(root.path(), "t", 1).unwrap();
        assert_ne!(a.target(), b.target());
        let dir = a.commit().unwrap();
        assert!(dir.ends_with("t-seed1"));
        assert!(StagedRun::create(root.path(), "t", 1).unwrap().target().ends_with("t-seed1-2"));
    }
}
