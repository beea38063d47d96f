//! Experiment configuration: a TOML file plus command-line overrides.
//!
//! Every field has a default so a config file only needs the keys an
//! experiment cares about. Fields left as `None` fall back to the
//! per-experiment default documented in `configs/`.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(CliError::Config(format!("unknown output format `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    #[default]
    Constant,
    Cosine,
    BaseShift,
}

/// `a(θ, z)` for the boundary family `−i d/dθ + a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub offset: f64,
    pub amplitude: f64,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self {
            kind: PotentialKind::Constant,
            offset: 0.25,
            amplitude: 0.0,
        }
    }
}

impl PotentialSpec {
    pub fn build(&self) -> indexforms_core::Potential {
        self.with_offset(self.offset)
    }

    pub fn with_offset(&self, offset: f64) -> indexforms_core::Potential {
        use indexforms_core::Potential;
        match self.kind {
            PotentialKind::Constant => Potential::Constant(offset),
            PotentialKind::Cosine => Potential::Cosine {
                offset,
                amplitude: self.amplitude,
            },
            PotentialKind::BaseShift => Potential::BaseShift {
                offset,
                amplitude: self.amplitude,
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Dimension of the base torus (0, 1 or 2).
    pub dim: Option<usize>,
    pub points: Option<usize>,
    /// Points per axis for refinement studies.
    pub refinements: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSpec {
    pub trials: Option<usize>,
    /// Fourier modes `|k| ≤ modes` touched by random perturbations.
    pub modes: Option<usize>,
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderSpec {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub count: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub format: Option<OutputFormat>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: u64,
    /// Fourier cutoff `N`: boundary modes `−N..N`.
    pub cutoff: Option<usize>,
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub perturbation: PerturbationSpec,
    pub ladder: LadderSpec,
    pub eta_offsets: Option<Vec<f64>>,
    pub bloch_mass: Option<f64>,
    pub upsilon: Option<f64>,
    pub u_points: Option<usize>,
    /// Replaces the experiment's pinned tolerance when set.
    pub tolerance: Option<f64>,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        Self::from_table(parse_table(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::load_with_overrides(path, &[])
    }

    /// Read a config file and apply `key=value` overrides (dotted keys reach
    /// into sub-tables, values are parsed as TOML with a string fallback).
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut table = parse_table(&text)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self, CliError> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if matches!(self.cutoff, Some(0)) || self.cutoff.is_some_and(|n| n > 256) {
            return bad("cutoff must lie in 1..=256");
        }
        if self.grid.dim.is_some_and(|d| d > 2) {
            return bad("grid.dim must be 0, 1 or 2");
        }
        let small = |p: &usize| *p < 8;
        if self.grid.points.as_ref().is_some_and(small)
            || self
                .grid
                .refinements
                .as_ref()
                .is_some_and(|r| r.is_empty() || r.iter().any(small))
        {
            return bad("grids need at least 8 points per axis");
        }
        if !self.potential.offset.is_finite() || !self.potential.amplitude.is_finite() {
            return bad("potential parameters must be finite");
        }
        if self
            .perturbation
            .scale
            .is_some_and(|s| !(s >= 0.0 && s.is_finite()))
        {
            return bad("perturbation.scale must be a non-negative number");
        }
        if matches!(self.perturbation.trials, Some(0)) {
            return bad("perturbation.trials must be positive");
        }
        let l = &self.ladder;
        if l.t_min.is_some_and(|t| !(t > 0.0)) || l.t_max.is_some_and(|t| !(t > 0.0)) {
            return bad("ladder times must be positive");
        }
        if let (Some(a), Some(b)) = (l.t_min, l.t_max) {
            if b <= a {
                return bad("ladder.t_max must exceed ladder.t_min");
            }
        }
        if l.count.is_some_and(|c| c < 2) {
            return bad("ladder.count must be at least 2");
        }
        if let Some(offsets) = &self.eta_offsets {
            if offsets.is_empty()
                || offsets
                    .iter()
                    .any(|a| !a.is_finite() || (a - a.round()).abs() < 1e-9)
            {
                return bad("eta_offsets must be non-integer numbers");
            }
        }
        if self.bloch_mass.is_some_and(|m| !m.is_finite()) {
            return bad("bloch_mass must be finite");
        }
        if self.upsilon.is_some_and(|u| u != 1.0 && u != -1.0) {
            return bad("upsilon must be +1 or -1");
        }
        if self.u_points.is_some_and(|u| u < 64) {
            return bad("u_points must be at least 64");
        }
        if self.tolerance.is_some_and(|t| !(t > 0.0)) {
            return bad("tolerance must be positive");
        }
        Ok(())
    }

    /// Per-experiment tolerance, unless overridden.
    pub fn tol(&self, pinned: f64) -> f64 {
        self.tolerance.unwrap_or(pinned)
    }
}

fn parse_table(text: &str) -> Result<toml::Table, CliError> {
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Config(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in path {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{p}` in override `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid() {
        assert_eq!(
            ExperimentConfig::from_toml_str("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("cutof = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("[grid]\nsize = 3").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "cutoff = 0",
            "upsilon = 0.5",
            "[ladder]\nt_min = 2.0\nt_max = 1.0",
            "eta_offsets = [1.0]",
        ] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let mut t = parse_table("seed = 1\n[grid]\npoints = 12").unwrap();
        apply_override(&mut t, "grid.points=24").unwrap();
        apply_override(&mut t, "potential.kind=cosine").unwrap();
        apply_override(&mut t, "cutoff=5").unwrap();
        let cfg = ExperimentConfig::from_table(t).unwrap();
        assert_eq!(cfg.grid.points, Some(24));
        assert_eq!(cfg.potential.kind, PotentialKind::Cosine);
        assert_eq!(cfg.cutoff, Some(5));
    }

    #[test]
    fn malformed_override_is_an_error() {
        let mut t = toml::Table::new();
        assert!(apply_override(&mut t, "no-equals-sign").is_err());
    }
}
