use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    Trotter,
    Holonomy,
    Roundtrip,
    Axioms,
    Linearity,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Trotter => "trotter",
            Self::Holonomy => "holonomy",
            Self::Roundtrip => "roundtrip",
            Self::Axioms => "axioms",
            Self::Linearity => "linearity",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            Self::Trotter => &["n", "error", "ratio_vs_prev"],
            Self::Holonomy => &["loop", "angle", "expected", "abs_err"],
            Self::Roundtrip => &["case_id", "h", "residual"],
            Self::Axioms => &["axiom", "case_id", "residual"],
            Self::Linearity => &["law", "case_id", "n_or_f", "residual"],
        }
    }

    fn default_cases(self) -> usize {
        match self {
            Self::Axioms => 50,
            _ => 100,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "trotter" => Ok(Self::Trotter),
            "holonomy" => Ok(Self::Holonomy),
            "roundtrip" => Ok(Self::Roundtrip),
            "axioms" => Ok(Self::Axioms),
            "linearity" => Ok(Self::Linearity),
            _ => Err(CliError::Config(format!("unknown experiment {s}"))),
        }
    }
}

/// Everything an experiment needs. Unset names fall back to per-experiment
/// defaults when the experiment runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub manifold: String,
    pub fields: Vec<String>,
    pub connection: Option<String>,
    pub section: Option<String>,
    pub path: Option<String>,
    pub t: f64,
    pub h: f64,
    pub n_list: Option<Vec<usize>>,
    pub steps_per_unit: usize,
    pub seed: u64,
    pub cases: usize,
    pub point: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            manifold: "sphere2".into(),
            fields: Vec::new(),
            connection: None,
            section: None,
            path: None,
            t: 1.0,
            h: 1e-3,
            n_list: None,
            steps_per_unit: 1000,
            seed: 0,
            cases: experiment.default_cases(),
            point: None,
            out: None,
        }
    }

    /// Applies `key=value` pairs. A repeated `field` key accumulates.
    pub fn apply(&mut self, entries: &[(String, String)]) -> Result<(), CliError> {
        let mut fields = Vec::new();
        for (key, value) in entries {
            let value = value.trim();
            match key.as_str() {
                "experiment" => {
                    let e: Experiment = value.parse()?;
                    if e != self.experiment {
                        return Err(CliError::Config(format!(
                            "config is for {e}, but {} was requested",
                            self.experiment
                        )));
                    }
                }
                "manifold" => self.manifold = value.to_string(),
                "field" => fields.push(value.to_string()),
                "connection" => self.connection = Some(value.to_string()),
                "section" => self.section = Some(value.to_string()),
                "path" => self.path = Some(value.to_string()),
                "t" => self.t = parse_real(key, value)?,
                "h" => self.h = parse_real(key, value)?,
                "n_list" => self.n_list = Some(parse_n_list(value)?),
                "steps_per_unit" => self.steps_per_unit = parse_int(key, value)?,
                "seed" => self.seed = parse_int(key, value)?,
                "cases" => self.cases = parse_int(key, value)?,
                "point" => self.point = Some(value.split(',').map(|c| parse_real(key, c)).collect::<Result<_, _>>()?),
                "out" => self.out = Some(PathBuf::from(value)),
                _ => return Err(CliError::Config(format!("unknown key {key}"))),
            }
        }
        if !fields.is_empty() {
            self.fields = fields;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(ns) = &self.n_list {
            check_n_list(ns)?;
        }
        if self.steps_per_unit == 0 {
            return Err(CliError::Config("steps_per_unit must be >= 1".into()));
        }
        if self.cases == 0 {
            return Err(CliError::Config("cases must be >= 1".into()));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(CliError::Config(format!("h must be > 0, got {}", self.h)));
        }
        if !self.t.is_finite() {
            return Err(CliError::Config("t must be finite".into()));
        }
        Ok(())
    }
}

fn parse_real(key: &str, value: &str) -> Result<f64, CliError> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Config(format!("{key}: not a finite number: {value}")))
}

fn parse_int<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: not a nonnegative integer: {value}")))
}

pub fn parse_n_list(value: &str) -> Result<Vec<usize>, CliError> {
    let ns = value
        .split(',')
        .map(|s| parse_int("n_list", s))
        .collect::<Result<Vec<usize>, _>>()?;
    check_n_list(&ns)?;
    Ok(ns)
}

fn check_n_list(ns: &[usize]) -> Result<(), CliError> {
    if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(format!(
            "n_list must be positive and strictly increasing, got {ns:?}"
        )));
    }
    Ok(())
}

/// Reads flat `key = value` lines. Blank lines and `#` comments are
/// skipped; dashes in keys are read as underscores.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", i + 1)))?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

/// Config file first, flags second; the last value for a key wins.
pub fn merge(
    experiment: Experiment,
    file: Option<&Path>,
    flags: &[(String, String)],
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::new(experiment);
    if let Some(path) = file {
        cfg.apply(&read_config_file(path)?)?;
    }
    cfg.apply(flags)?;
    Ok(cfg)
}
