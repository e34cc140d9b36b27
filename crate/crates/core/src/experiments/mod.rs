//! Config-driven experiments that write CSV, PGM and report files.
//!
//! Every run first extracts and validates all settings, so a bad config is
//! reported before any solver step. Each output directory also receives a
//! `<experiment>_config.txt` copy of the resolved configuration.

pub mod classify;
pub mod config;
pub mod line;
pub mod swissroll;
pub mod verify;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{ConfigError, DensityKind, ExperimentConfig, ExperimentKind};

use crate::export::write_file;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] crate::Error),
}

impl RunError {
    /// 1 for configuration problems, 2 for numerical or I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

/// Lifts a library error raised while building from `key` into a config error.
pub(crate) fn at_key<T>(key: &str, r: crate::Result<T>) -> Result<T, ConfigError> {
    r.map_err(|e| ConfigError::at(key, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
    Below,
    Above,
}

impl Relation {
    fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
            Relation::Below => value < bound,
            Relation::Above => value > bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
            Relation::Above => ">",
        }
    }
}

/// One thresholded quantity in a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation,
            bound,
            passed: relation.holds(value, bound),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:e} {} {:e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.relation.symbol(),
            self.bound
        )
    }
}

/// Files written and checks evaluated by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub kind: ExperimentKind,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check passes, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            3
        }
    }
}

/// Collects output files for one run.
pub(crate) struct OutputDir {
    kind: ExperimentKind,
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputDir {
    pub(crate) fn create(config: &ExperimentConfig) -> crate::Result<Self> {
        let dir = config.out_dir().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut out = Self {
            kind: config.kind(),
            dir,
            files: Vec::new(),
        };
        let text = config.to_text();
        let name = format!("{}_config.txt", config.kind().name().replace('-', "_"));
        out.write(&name, |w| Ok(w.write_all(text.as_bytes())?))?;
        Ok(out)
    }

    pub(crate) fn path(&self) -> &Path {
        &self.dir
    }

    pub(crate) fn write<F>(&mut self, name: &str, body: F) -> crate::Result<()>
    where
        F: FnOnce(&mut std::io::BufWriter<fs::File>) -> crate::Result<()>,
    {
        let path = self.dir.join(name);
        write_file(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    pub(crate) fn record(&mut self, name: &str) {
        self.files.push(self.dir.join(name));
    }

    /// Writes `key = value` lines followed by one line per check.
    pub(crate) fn report(&mut self, name: &str, entries: &[(String, String)], checks: &[Check]) -> crate::Result<()> {
        self.write(name, |w| {
            for (k, v) in entries {
                writeln!(w, "{k} = {v}")?;
            }
            for c in checks {
                writeln!(w, "{c}")?;
            }
            Ok(())
        })
    }

    pub(crate) fn finish(self, checks: Vec<Check>) -> Outcome {
        Outcome {
            kind: self.kind,
            out_dir: self.dir,
            files: self.files,
            checks,
        }
    }
}

/// Shorthand for report entries.
pub(crate) fn entry(key: &str, value: impl fmt::Display) -> (String, String) {
    (key.to_string(), value.to_string())
}

/// Runs the experiment named by the config.
pub fn run(config: &ExperimentConfig) -> Result<Outcome, RunError> {
    Ok(match config.kind() {
        ExperimentKind::Fig2 => line::run_fig2(config)?.outcome,
        ExperimentKind::Fig3 => line::run_fig3(config)?.outcome,
        ExperimentKind::SwissRoll => swissroll::run_swissroll(config)?.outcome,
        ExperimentKind::VerifyPaths => verify::run_verify_paths(config)?.outcome,
        ExperimentKind::Classify => classify::run_classify(config)?.outcome,
    })
}

/// Median of a non-empty slice.
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
