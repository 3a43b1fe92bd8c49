//! CSV tables, run reports and atomic file writes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::{RunError, RunResult};

/// One CSV file: a `#` units line, the header, then rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    /// File stem.
    pub name: String,
    /// Units comment, without the leading `# `.
    pub units: String,
    pub header: String,
    pub rows: Vec<String>,
}

impl CsvTable {
    pub fn new(name: &str, units: &str, header: &str) -> Self {
        Self { name: name.into(), units: units.into(), header: header.into(), rows: Vec::new() }
    }

    pub fn render(&self) -> String {
        let mut s = format!("# {}\n{}\n", self.units, self.header);
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip scientific notation, `nan` for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}

/// A named threshold test evaluated under `--check`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub fast: bool,
    pub generator: String,
    /// Only the report carries timing, so tables stay byte-identical.
    pub wall_clock_s: f64,
    pub config_echo: String,
    pub tables: Vec<CsvTable>,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "umac run report");
        let _ = writeln!(s, "experiment: {}", self.experiment);
        let _ = writeln!(s, "version: {}", self.version);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "fast: {}", self.fast);
        let _ = writeln!(s, "generator: {}", self.generator);
        let _ = writeln!(s, "wall_clock_s: {:.3}", self.wall_clock_s);
        let _ = writeln!(s, "\n== config ==\n{}", self.config_echo.trim_end());
        if !self.notes.is_empty() {
            let _ = writeln!(s, "\n== summary ==");
            for n in &self.notes {
                let _ = writeln!(s, "{n}");
            }
        }
        for t in &self.tables {
            let _ = writeln!(s, "\n== results: {}.csv ==\n{}", t.name, t.render().trim_end());
        }
        if !self.checks.is_empty() {
            let _ = writeln!(s, "\n== checks ==");
            for c in &self.checks {
                let _ = writeln!(s, "{}", c.line());
            }
        }
        s
    }
}

/// Writes `contents` to a temporary file beside `path`, then renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> RunResult<()> {
    let io = |source| RunError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let mut t = CsvTable::new("x", "a: s", "a,b");
        t.rows.push("1,2".into());
        assert_eq!(t.render(), "# a: s\na,b\n1,2\n");
    }

    #[test]
    fn number_format() {
        assert_eq!(num(2.54e-5), "2.54e-5");
        assert_eq!(num(0.0), "0e0");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
