//! JSON run configuration.
//!
//! Inline objects and file references are both accepted for `profile` and
//! `trace`; relative paths resolve against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use defire::{compute_traces, validate_profile, Params, StepProfile, Trace};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Periodic,
    Scan,
    Spectral,
    Weakcoupling,
    OracleCheck,
    DemoDiscontinuity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Periodic => "periodic",
            Command::Scan => "scan",
            Command::Spectral => "spectral",
            Command::Weakcoupling => "weakcoupling",
            Command::OracleCheck => "oracle-check",
            Command::DemoDiscontinuity => "demo-discontinuity",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Source<T> {
    File(PathBuf),
    Inline(T),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    epsilon: Option<f64>,
    eta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, steps: usize },
}

impl Grid {
    /// `steps` evenly spaced values from `start` to `stop` inclusive.
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match *self {
            Grid::Values(ref v) => Ok(v.clone()),
            Grid::Range { start, stop, steps } => {
                if steps < 2 || !(start.is_finite() && stop.is_finite()) {
                    return Err(CliError::Config(
                        "grid range needs finite endpoints and at least 2 steps".into(),
                    ));
                }
                let h = (stop - start) / (steps - 1) as f64;
                Ok((0..steps).map(|i| start + h * i as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchChoice {
    /// Plus only when `epsilon <= 1`, both otherwise.
    #[default]
    Auto,
    Plus,
    Both,
}

/// Artifact file names, relative to the output directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub cycles: String,
    pub events: String,
    pub orbit: String,
    pub scan: String,
    pub spectral: String,
    pub firing_profile: String,
    pub oracle: String,
    pub discontinuity: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            cycles: "cycles.csv".into(),
            events: "events.json".into(),
            orbit: "orbit.json".into(),
            scan: "scan.csv".into(),
            spectral: "spectral.json".into(),
            firing_profile: "firing_profile.json".into(),
            oracle: "oracle.json".into(),
            discontinuity: "discontinuity.json".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub n_cycles: Option<usize>,
    pub tol: Option<f64>,
    pub grid: Option<Grid>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub ks: Option<Vec<usize>>,
    pub trials: Option<usize>,
    #[serde(default)]
    pub branches: BranchChoice,
    pub x1: Option<f64>,
    pub base_level: Option<f64>,
    pub n: Option<u64>,
    pub max_firings_per_cycle: Option<usize>,
    pub max_cycles: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl Default for Options {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all option fields have defaults")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<String>,
    params: RawParams,
    profile: Option<Source<StepProfile>>,
    trace: Option<Source<Trace>>,
    #[serde(default)]
    options: Options,
}

/// Fully resolved configuration for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub eta: f64,
    epsilon: Option<f64>,
    pub profile: Option<StepProfile>,
    pub trace: Option<Trace>,
    pub options: Options,
}

impl RunConfig {
    pub fn load(path: &Path, command: Command) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, command)
    }

    pub fn parse(text: &str, base: &Path, command: Command) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        if let Some(tag) = &raw.command {
            if tag != command.name() {
                return Err(CliError::Config(format!(
                    "config is for command '{tag}' but '{}' was requested",
                    command.name()
                )));
            }
        }
        // eta alone is enough for a scan; every other check goes through Params
        let (epsilon, eta) = (raw.params.epsilon, raw.params.eta);
        match epsilon {
            Some(e) => {
                Params::new(e, eta).map_err(|e| CliError::Config(e.to_string()))?;
            }
            None => {
                Params::new(0.5, eta).map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        let profile = raw.profile.map(|s| resolve(s, base)).transpose()?;
        let trace = raw.trace.map(|s| resolve(s, base)).transpose()?;
        if profile.is_some() && trace.is_some() {
            return Err(CliError::Config(
                "give either a profile or a trace, not both".into(),
            ));
        }
        let config = Self {
            command,
            eta,
            epsilon,
            profile,
            trace,
            options: raw.options,
        };
        if let (Some(p), Ok(params)) = (&config.profile, config.params()) {
            let report = validate_profile(p, &params);
            if !report.is_valid() {
                return Err(CliError::Config(format!(
                    "profile is not admissible: {report}"
                )));
            }
        }
        Ok(config)
    }

    pub fn params(&self) -> Result<Params, CliError> {
        let epsilon = self.epsilon.ok_or_else(|| {
            CliError::Config(format!(
                "command '{}' needs params.epsilon",
                self.command.name()
            ))
        })?;
        Params::new(epsilon, self.eta).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn require_profile(&self) -> Result<&StepProfile, CliError> {
        self.profile.as_ref().ok_or_else(|| {
            CliError::Config(format!("command '{}' needs a profile", self.command.name()))
        })
    }

    /// The given trace, or the traces of the given profile.
    pub fn require_trace(&self) -> Result<Trace, CliError> {
        match (&self.trace, &self.profile) {
            (Some(t), _) => Ok(t.clone()),
            (None, Some(p)) => Ok(compute_traces(p)),
            (None, None) => Err(CliError::Config(format!(
                "command '{}' needs a trace or a profile",
                self.command.name()
            ))),
        }
    }

    /// Cluster lengths from the profile or from a trace tiling `(0, 1]`.
    pub fn require_lengths(&self) -> Result<Vec<f64>, CliError> {
        if let Some(p) = &self.profile {
            return Ok(p.lengths().to_vec());
        }
        self.require_trace()?.lengths().ok_or_else(|| {
            CliError::Config("trace must tile (0, 1] to define cluster lengths".into())
        })
    }
}

fn resolve<T: DeserializeOwned>(source: Source<T>, base: &Path) -> Result<T, CliError> {
    match source {
        Source::Inline(v) => Ok(v),
        Source::File(rel) => {
            let path = base.join(rel);
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid {}: {e}", path.display())))
        }
    }
}
