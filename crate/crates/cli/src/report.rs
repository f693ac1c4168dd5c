//! JSON reports, CSV artifacts and the manifest index of an output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
    started: Instant,
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a Value,
    results: &'a Value,
    checks: &'a [(String, bool)],
    passed: bool,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    files: &'a [String],
}

impl Output {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), started: Instant::now() })
    }

    /// Create `name` in the output directory and hand the writer to `f`.
    pub fn write<F>(&mut self, name: &str, f: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let mut file = std::io::BufWriter::new(fs::File::create(self.dir.join(name))?);
        f(&mut file)?;
        file.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
        self.write(name, |w| {
            writeln!(w, "{}", header.join(","))?;
            for r in rows {
                writeln!(w, "{}", r.join(","))?;
            }
            Ok(())
        })
    }

    /// Writes report.json and manifest.json; returns whether every check passed.
    pub fn finish(
        mut self,
        command: &str,
        seed: u64,
        config: &Value,
        results: &Value,
        checks: &[(String, bool)],
    ) -> anyhow::Result<bool> {
        let version = env!("CARGO_PKG_VERSION");
        let passed = checks.iter().all(|c| c.1);
        let report = Report {
            command,
            version,
            seed,
            config,
            results,
            checks,
            passed,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&report)?;
        self.write("report.json", |w| writeln!(w, "{text}"))?;
        let manifest = Manifest { command, version, seed, files: &self.files };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(self.dir.join("manifest.json"), format!("{text}\n"))?;
        Ok(passed)
    }
}
