//! Run configuration: a TOML file with `system`, `shot`, `experiment` and
//! `output` sections, plus `--set section.key=value` overrides.
//!
//! ```toml
//! [system]
//! name = "custom"
//! n = 3
//! f = ["u2^p - u1^p", "u1^p"]
//! [system.params]
//! p = 5
//!
//! [experiment]
//! a = 2.0
//! ```

use std::path::Path;

use radshoot::dirichlet::DEFAULT_A_RANGE;
use radshoot::system::PotentialKind;
use radshoot::{Params, ShotConfig, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct RunConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub shot: ShotConfig,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct SystemSection {
    pub name: String,
    /// Space dimension, 3 when absent.
    pub n: Option<u32>,
    /// Number of components; only the zero system and custom systems need it.
    #[serde(rename = "L")]
    pub components: Option<usize>,
    #[serde(default)]
    pub params: Params,
    /// Source expressions over `u1..uL` for `name = "custom"`.
    pub f: Option<Vec<String>>,
    pub potential: Option<String>,
    /// `type1` or `type2`.
    pub potential_kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default)]
pub struct Experiment {
    /// Level of the initial-value simplex.
    pub a: Option<f64>,
    /// Initial value for `shoot`; the simplex barycentre when absent.
    pub alpha: Option<Vec<f64>>,
    /// Lattice resolution for `sweep` and `degree`.
    pub k: usize,
    /// Degree target; the barycentre when absent.
    pub target: Option<Vec<f64>>,
    pub budget: usize,
    pub radii: Vec<f64>,
    pub a_range: [f64; 2],
    pub theta: f64,
    pub box_max: f64,
    pub samples: usize,
    pub delta0: f64,
    /// Wall points for the control check; one-zero points at level `a` when absent.
    pub base_points: Option<Vec<Vec<f64>>>,
    /// Radii of the dynamic estimate, sampled around every base point.
    pub deltas: Vec<f64>,
    pub estimate_samples: usize,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            a: None,
            alpha: None,
            k: 16,
            target: None,
            budget: 200,
            radii: vec![1.0],
            a_range: [DEFAULT_A_RANGE.0, DEFAULT_A_RANGE.1],
            theta: radshoot::pohozaev::DEFAULT_THETA,
            box_max: 10.0,
            samples: 10_000,
            delta0: 0.1,
            base_points: None,
            deltas: Vec::new(),
            estimate_samples: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        self != Format::Json
    }

    pub fn json(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: String,
    pub format: Format,
    pub seed: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            format: Format::Both,
            seed: 0,
        }
    }
}

fn line_of(text: &str, err: &toml::de::Error) -> usize {
    err.span().map_or(0, |s| {
        text[..s.start.min(text.len())].matches('\n').count() + 1
    })
}

fn validation(key: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Validation {
        key: key.into(),
        message: message.into(),
    }
}

/// Parses `text`, applies `overrides` (`section.key=value`) and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Parse {
        line: line_of(text, &e),
        message: e.message().to_string(),
    })?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    let mut unknown = Vec::new();
    let mut track = serde_path_to_error::Track::new();
    let de = serde_path_to_error::Deserializer::new(toml::Value::Table(table), &mut track);
    let parsed: Result<RunConfig, _> =
        serde_ignored::deserialize(de, |path| unknown.push(path.to_string()));
    if let Some(key) = unknown.first() {
        return Err(validation(key.clone(), "unknown key"));
    }
    let cfg = parsed.map_err(|e| validation(track.path().to_string(), e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text, overrides)
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| validation(item, "overrides take the form section.key=value"))?;
    let key = key.trim();
    // bare words that are not TOML values are read as strings
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(validation(key, "empty key segment"));
    }
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut node = table;
    for (i, part) in path.iter().enumerate() {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| validation(parts[..=i].join("."), "not a section"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<(), CliError> {
        self.shot
            .validate()
            .map_err(|e| validation("shot", e.to_string()))?;
        let e = &self.experiment;
        if let Some(a) = e.a {
            if !(a > 0.0 && a.is_finite()) {
                return Err(validation("experiment.a", "must be positive"));
            }
        }
        if e.k < 2 {
            return Err(validation("experiment.k", "must be at least 2"));
        }
        if e.budget == 0 {
            return Err(validation("experiment.budget", "must be positive"));
        }
        if e.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(validation("experiment.radii", "radii must be positive"));
        }
        if !(e.a_range[0] > 0.0 && e.a_range[0] < e.a_range[1]) {
            return Err(validation("experiment.a_range", "need 0 < lo < hi"));
        }
        if !(0.0..=1.0).contains(&e.theta) {
            return Err(validation("experiment.theta", "must lie in [0, 1]"));
        }
        if !(e.box_max > 0.0) || e.samples == 0 || !(e.delta0 > 0.0) {
            return Err(validation(
                "experiment",
                "box_max, samples and delta0 must be positive",
            ));
        }
        if e.deltas.iter().any(|d| !(*d > 0.0)) || e.estimate_samples == 0 {
            return Err(validation(
                "experiment.deltas",
                "deltas and estimate_samples must be positive",
            ));
        }
        // binds every parameter the system refers to
        self.system_spec()?;
        Ok(())
    }

    /// Level `a`, which the subcommand needs.
    pub fn level(&self) -> Result<f64, CliError> {
        self.experiment
            .a
            .ok_or_else(|| validation("experiment.a", "required by this subcommand"))
    }

    pub fn system_spec(&self) -> Result<SystemSpec, CliError> {
        let s = &self.system;
        let n = s.n.unwrap_or(3);
        let wrap = |e: radshoot::Error| validation("system", e.to_string());
        if s.name == "custom" {
            let f =
                s.f.as_ref()
                    .ok_or_else(|| validation("system.f", "custom systems need expressions"))?;
            if let Some(l) = s.components {
                if l != f.len() {
                    return Err(validation("system.L", "does not match the length of f"));
                }
            }
            let kind = match (&s.potential, &s.potential_kind) {
                (Some(_), Some(k)) => Some(
                    PotentialKind::parse(k)
                        .map_err(|e| validation("system.potential_kind", e.to_string()))?,
                ),
                (Some(_), None) => Some(PotentialKind::TypeI),
                (None, Some(_)) => {
                    return Err(validation("system.potential", "missing for potential_kind"))
                }
                (None, None) => None,
            };
            let exprs: Vec<&str> = f.iter().map(String::as_str).collect();
            let potential = s.potential.as_deref().zip(kind);
            return SystemSpec::custom("custom", n, &exprs, potential, &s.params).map_err(wrap);
        }
        if s.f.is_some() || s.potential.is_some() || s.potential_kind.is_some() {
            return Err(validation(
                "system.f",
                "expressions are only read for custom systems",
            ));
        }
        let mut params = s.params.clone();
        params.insert("n".into(), n as f64);
        if s.name == "zero" {
            if let Some(l) = s.components {
                params.insert("L".into(), l as f64);
            }
        }
        let spec = SystemSpec::builtin(&s.name, &params).map_err(wrap)?;
        if let Some(l) = s.components {
            if l != spec.dim() {
                return Err(validation(
                    "system.L",
                    format!("{} has {} components", s.name, spec.dim()),
                ));
            }
        }
        Ok(spec)
    }
}
