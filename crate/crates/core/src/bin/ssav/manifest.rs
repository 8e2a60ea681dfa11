use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use ssav::config::ModelConfig;
use ssav::experiments::output::write_json;
use ssav::SsavError;

pub const EXIT_VERDICT: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Not enough data for a decision; does not fail the run.
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Fail dominates, then inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Fail => EXIT_VERDICT,
            _ => 0,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Why a command stopped before reaching a verdict.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Assumption(SsavError),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Assumption(_) | Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(s) | Failure::Runtime(s) => f.write_str(s),
            Failure::Assumption(e) => write!(f, "{e}"),
        }
    }
}

impl From<SsavError> for Failure {
    fn from(e: SsavError) -> Self {
        match e {
            SsavError::AssumptionViolation { .. } => Failure::Assumption(e),
            SsavError::InvalidArgument(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Reads and parses a config; every problem here is a usage error.
pub fn read_config(path: &Path) -> Result<ModelConfig, Failure> {
    ModelConfig::from_path(path).map_err(|e| match e {
        SsavError::Io(io) => Failure::Usage(format!("{}: {io}", path.display())),
        other => Failure::Usage(other.to_string()),
    })
}

/// Provenance record written for every run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: Option<ModelConfig>,
    pub seed: u64,
    pub version: String,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub verdicts: BTreeMap<String, Verdict>,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl RunManifest {
    pub fn start(config: Option<ModelConfig>, seed: u64) -> Self {
        let started_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        Self {
            command: std::env::args().collect(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix,
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
            verdicts: BTreeMap::new(),
            clock: Some(Instant::now()),
        }
    }

    pub fn output(&mut self, path: PathBuf) -> PathBuf {
        self.outputs.push(path.clone());
        path
    }

    pub fn verdict(&mut self, name: impl Into<String>, v: Verdict) -> Verdict {
        self.verdicts.insert(name.into(), v);
        v
    }

    pub fn overall(&self) -> Verdict {
        self.verdicts.values().fold(Verdict::Pass, |a, &b| a.and(b))
    }

    fn stop(&mut self) {
        if let Some(c) = self.clock {
            self.wall_clock_seconds = c.elapsed().as_secs_f64();
        }
    }

    /// Writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<Verdict, Failure> {
        self.stop();
        let path = dir.join("manifest.json");
        self.outputs.push(path.clone());
        write_json(&path, &self)?;
        Ok(self.overall())
    }

    /// Prints the manifest as one JSON line on stdout.
    pub fn finish_stdout(mut self) -> Result<Verdict, Failure> {
        self.stop();
        println!("{}", serde_json::to_string(&self).map_err(|e| Failure::Runtime(e.to_string()))?);
        Ok(self.overall())
    }
}
