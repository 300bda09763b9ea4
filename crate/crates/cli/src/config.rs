//! Run configuration: TOML file, then `MIXFRAC_*` environment overrides,
//! then command-line flags.

use std::path::{Path, PathBuf};

use mixfrac::cdf::{default_m_grid, BandwidthRule, SupportTransform, DEFAULT_FOLDS};
use mixfrac::experiments::DEFAULT_REPLICATIONS;
use mixfrac::noise::Backend;
use mixfrac::{EffectsDistribution, ModelParams};
use serde::Deserialize;

use crate::error::CliError;

pub const ENV_PREFIX: &str = "MIXFRAC_";
/// Separates section and key in environment overrides, as in `MIXFRAC_SIMULATE__SUBJECTS`.
pub const ENV_SEPARATOR: &str = "__";
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<i64>,
    out: Option<PathBuf>,
    threads: Option<i64>,
    backend: Option<Backend>,
    #[serde(default = "ModelParams::study")]
    model: ModelParams,
    #[serde(default)]
    effects: EffectsDistribution,
    #[serde(default)]
    simulate: RawSimulate,
    #[serde(default)]
    estimate: RawEstimate,
    #[serde(default)]
    fit_cdf: RawFitCdf,
    #[serde(default)]
    experiment: RawExperiment,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    subjects: Option<i64>,
    observations: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimate {
    panel: Option<PathBuf>,
    observations: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFitCdf {
    estimate: Option<PathBuf>,
    panel: Option<PathBuf>,
    truth: Option<PathBuf>,
    m: Option<i64>,
    m_grid: Option<Vec<i64>>,
    folds: Option<i64>,
    bandwidth: Option<BandwidthRule>,
    transform: Option<SupportTransform>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    designs: Option<Vec<[i64; 2]>>,
    replications: Option<i64>,
    all_distributions: Option<bool>,
    cdf: Option<bool>,
    m_grid: Option<Vec<i64>>,
    folds: Option<i64>,
    bandwidth: Option<BandwidthRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub subjects: usize,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub panel: PathBuf,
    /// Defaults to the panel's column count minus the look-ahead columns.
    pub observations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitCdfConfig {
    pub estimate: PathBuf,
    /// Run the estimation inline from this panel instead of reading `estimate`.
    pub panel: Option<PathBuf>,
    /// Truth side-file; when unset, `<out>/truth.json` is used if it exists.
    pub truth: Option<PathBuf>,
    pub m: Option<usize>,
    pub m_grid: Vec<usize>,
    pub folds: usize,
    pub bandwidth: BandwidthRule,
    pub transform: Option<SupportTransform>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub designs: Vec<(usize, usize)>,
    pub replications: usize,
    pub all_distributions: bool,
    pub cdf: bool,
    pub m_grid: Vec<usize>,
    pub folds: usize,
    pub bandwidth: BandwidthRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub backend: Backend,
    pub model: ModelParams,
    pub effects: EffectsDistribution,
    pub simulate: SimulateConfig,
    pub estimate: EstimateConfig,
    pub fit_cdf: FitCdfConfig,
    pub experiment: ExperimentSettings,
}

/// Flag values that override file and environment settings.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub backend: Option<Backend>,
    pub subjects: Option<i64>,
    pub observations: Option<i64>,
    pub replications: Option<i64>,
    pub panel: Option<PathBuf>,
    pub estimate: Option<PathBuf>,
    pub m: Option<i64>,
}

fn count(field: &str, value: i64, min: i64) -> Result<usize, CliError> {
    if value < min {
        return Err(CliError::Config(format!("{field} must be at least {min}, got {value}")));
    }
    usize::try_from(value).map_err(|_| CliError::Config(format!("{field} is too large: {value}")))
}

fn counts(field: &str, values: &[i64], min: i64) -> Result<Vec<usize>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config(format!("{field} must not be empty")));
    }
    values.iter().map(|&v| count(field, v, min)).collect()
}

/// Parses an environment value as a TOML scalar or array, falling back to a string.
fn env_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_env(table: &mut toml::Table, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), CliError> {
    for (name, raw) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let path: Vec<String> = rest.split(ENV_SEPARATOR).map(str::to_ascii_lowercase).collect();
        let (key, sections) = path.split_last().expect("split yields at least one piece");
        let mut cursor = &mut *table;
        for section in sections {
            let entry = cursor
                .entry(section.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cursor = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("{name}: `{section}` is not a section")))?;
        }
        cursor.insert(key.clone(), env_value(&raw));
    }
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies environment then flag overrides, and validates.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        flags: &Overrides,
    ) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        apply_env(&mut table, env)?;
        let raw = RawConfig::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config(e.to_string()))?;
        Self::resolve(raw, flags)
    }

    fn resolve(raw: RawConfig, flags: &Overrides) -> Result<Self, CliError> {
        let seed = match flags.seed {
            Some(s) => s,
            None => match raw.seed {
                Some(s) => u64::try_from(s).map_err(|_| CliError::Config(format!("seed must be nonnegative, got {s}")))?,
                None => DEFAULT_SEED,
            },
        };
        let out = flags.out.clone().or(raw.out).unwrap_or_else(|| PathBuf::from("out"));
        let threads = match (flags.threads, raw.threads) {
            (Some(t), _) => Some(count("threads", t as i64, 1)?),
            (None, Some(t)) => Some(count("threads", t, 1)?),
            (None, None) => None,
        };
        let backend = flags.backend.or(raw.backend).unwrap_or_default();
        raw.model.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        raw.effects.validate().map_err(|e| CliError::Config(format!("effects: {e}")))?;

        let simulate = SimulateConfig {
            subjects: count("simulate.subjects", flags.subjects.or(raw.simulate.subjects).unwrap_or(100), 1)?,
            observations: count(
                "simulate.observations",
                flags.observations.or(raw.simulate.observations).unwrap_or(250),
                1,
            )?,
        };
        let estimate = EstimateConfig {
            panel: flags
                .panel
                .clone()
                .or(raw.estimate.panel)
                .unwrap_or_else(|| out.join("panel.csv")),
            observations: flags
                .observations
                .or(raw.estimate.observations)
                .map(|n| count("estimate.observations", n, 1))
                .transpose()?,
        };
        let f = raw.fit_cdf;
        let fit_cdf = FitCdfConfig {
            estimate: flags
                .estimate
                .clone()
                .or(f.estimate)
                .unwrap_or_else(|| out.join("estimate.json")),
            panel: flags.panel.clone().or(f.panel),
            truth: f.truth,
            m: flags.m.or(f.m).map(|m| count("fit_cdf.m", m, 1)).transpose()?,
            m_grid: match f.m_grid {
                Some(g) => counts("fit_cdf.m_grid", &g, 1)?,
                None => default_m_grid(),
            },
            folds: count("fit_cdf.folds", f.folds.unwrap_or(DEFAULT_FOLDS as i64), 2)?,
            bandwidth: f.bandwidth.unwrap_or_default(),
            transform: f.transform,
        };
        if let Some(t) = &fit_cdf.transform {
            t.validate().map_err(|e| CliError::Config(format!("fit_cdf.transform: {e}")))?;
        }
        let x = raw.experiment;
        let designs = match x.designs {
            Some(d) if d.is_empty() => return Err(CliError::Config("experiment.designs must not be empty".into())),
            Some(d) => d
                .iter()
                .map(|&[n_sub, n_obs]| {
                    Ok((
                        count("experiment.designs subjects", n_sub, 1)?,
                        count("experiment.designs observations", n_obs, 1)?,
                    ))
                })
                .collect::<Result<Vec<_>, CliError>>()?,
            None => vec![(simulate.subjects, simulate.observations)],
        };
        let designs = if flags.subjects.is_some() || flags.observations.is_some() {
            vec![(simulate.subjects, simulate.observations)]
        } else {
            designs
        };
        let experiment = ExperimentSettings {
            designs,
            replications: count(
                "experiment.replications",
                flags.replications.or(x.replications).unwrap_or(DEFAULT_REPLICATIONS as i64),
                1,
            )?,
            all_distributions: x.all_distributions.unwrap_or(false),
            cdf: x.cdf.unwrap_or(true),
            m_grid: match x.m_grid {
                Some(g) => counts("experiment.m_grid", &g, 1)?,
                None => default_m_grid(),
            },
            folds: count("experiment.folds", x.folds.unwrap_or(DEFAULT_FOLDS as i64), 2)?,
            bandwidth: x.bandwidth.unwrap_or_default(),
        };
        Ok(Self {
            seed,
            out,
            threads,
            backend,
            model: raw.model,
            effects: raw.effects,
            simulate,
            estimate,
            fit_cdf,
            experiment,
        })
    }
}
