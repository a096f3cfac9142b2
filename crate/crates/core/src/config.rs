//! TOML configuration shared by every `pals` subcommand.
//!
//! Omitted keys take documented defaults and are listed in
//! [`LoadedConfig::defaulted`]. The effective configuration is echoed back as
//! TOML and hashed so every output can be traced to its inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::analysis::FitModelSpec;
use crate::constants::{PhysicalConstants, Profile};
use crate::detection::{DetectorSpec, SourceSpec};
use crate::error::{Error, Result};
use crate::gas::GasState;
use crate::mcnrs::McnrsInputs;
use crate::montecarlo::{AnnihilationModel, SimulationSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub profile: Profile,
    pub gas: GasState,
    pub mcnrs: McnrsInputs,
    pub source: SourceSpec,
    pub detector: DetectorSpec,
    pub model: AnnihilationModel,
    pub simulation: SimulationSettings,
    pub fit: FitModelSpec,
}

impl Config {
    /// Validates every section, returning the normalized configuration.
    pub fn validated(mut self) -> Result<Self> {
        self.gas = self.gas.validated()?;
        self.mcnrs.validate()?;
        self.source.validate()?;
        self.detector.validate()?;
        self.model = self.model.validated()?;
        self.simulation.validate()?;
        if self.fit.response_fwhm_ns.is_none() {
            self.fit.response_fwhm_ns = Some(self.detector.timing_fwhm_ns);
        }
        self.fit.validate()?;
        Ok(self)
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.profile.constants()
    }
}

/// A validated configuration with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: Config,
    /// Dotted keys that were absent from the input and took defaults.
    pub defaulted: Vec<String>,
    /// Effective configuration as TOML.
    pub echo: String,
    /// SHA-256 of `echo`, hex.
    pub hash: String,
}

fn parse_override(spec: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| {
        Error::Config(format!(
            "override {spec:?} is not of the form section.key=value"
        ))
    })?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::Config(format!(
            "override {spec:?} has an empty key segment"
        )));
    }
    let raw = raw.trim();
    // bare words such as `codata` are taken as strings
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((path, value))
}

fn apply_override(table: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.clone())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!(
                "override path {}: {p} is not a table",
                path.join(".")
            ))
        })?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn collect_defaulted(defaults: &Table, given: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in defaults {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (v, given.get(k)) {
            (_, None) => out.push(key),
            (Value::Table(d), Some(Value::Table(g))) if k != "fractions" => {
                collect_defaulted(d, g, &key, out)
            }
            _ => {}
        }
    }
}

fn to_table<T: Serialize>(value: &T) -> Result<Table> {
    Table::try_from(value)
        .map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
}

/// Parses `text`, applies `section.key=value` overrides and validates.
pub fn load_config_str(text: &str, overrides: &[String]) -> Result<LoadedConfig> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for o in overrides {
        let (path, value) = parse_override(o)?;
        apply_override(&mut table, &path, value)?;
    }
    let mut defaulted = Vec::new();
    collect_defaulted(&to_table(&Config::default())?, &table, "", &mut defaulted);
    if !table
        .get("fit")
        .and_then(Value::as_table)
        .is_some_and(|t| t.contains_key("response_fwhm_ns"))
    {
        defaulted.push("fit.response_fwhm_ns (from detector.timing_fwhm_ns)".into());
    }
    let config: Config = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let config = config.validated()?;
    let echo = toml::to_string(&config).map_err(|e| Error::Config(e.to_string()))?;
    let hash = crate::io::sha256_hex(echo.as_bytes());
    Ok(LoadedConfig {
        config,
        defaulted,
        echo,
        hash,
    })
}

/// Reads and loads a configuration file; `None` means all defaults.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })?,
        None => String::new(),
    };
    load_config_str(&text, overrides)
}

/// Parses a fit model: either a file with a `[fit]` table or the bare keys of
/// that table. A missing `response_fwhm_ns` is filled from `detector`.
pub fn load_fit_model_str(text: &str, detector: &DetectorSpec) -> Result<FitModelSpec> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let table = match table.remove("fit") {
        Some(Value::Table(t)) if table.is_empty() => t,
        Some(_) => {
            return Err(Error::Config(
                "fit model: [fit] must be a table and the only section".into(),
            ))
        }
        None => table,
    };
    let mut spec: FitModelSpec = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("fit model: {e}")))?;
    if spec.response_fwhm_ns.is_none() {
        spec.response_fwhm_ns = Some(detector.timing_fwhm_ns);
    }
    spec.validate()?;
    Ok(spec)
}
