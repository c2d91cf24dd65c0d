//! TOML config file and the flag > config > default merge.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sostest::sos::{Tolerances, DEFAULT_MAX_ITERATIONS};

use crate::output::CliError;
use crate::{Format, GlobalArgs, ValuesKind};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol_eval: Option<f64>,
    pub tol_psd: Option<f64>,
    pub tol_norm: Option<f64>,
    pub max_iter: Option<usize>,
    pub format: Option<Format>,
    #[serde(default)]
    pub interp_sweep: SweepConfig,
    #[serde(default)]
    pub sos_check: SosCheckConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub lowerbound_demo: DemoConfig,
    #[serde(default)]
    pub nonneg_test: NonnegConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: Option<Vec<usize>>,
    pub d: Option<usize>,
    pub m: Option<Vec<usize>>,
    pub m_exponent: Option<f64>,
    pub seeds: Option<usize>,
    pub values: Option<ValuesKind>,
    pub gsq: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SosCheckConfig {
    pub half_degree: Option<usize>,
    pub norm_bound: Option<f64>,
    pub cold: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub r: Option<u32>,
    pub c: Option<String>,
    pub k_base: Option<String>,
    pub k_root: Option<u32>,
    pub nu: Option<i64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub d: Option<usize>,
    pub equations: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub n: Option<usize>,
    pub r: Option<u32>,
    pub c: Option<f64>,
    pub m: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonnegConfig {
    pub epsilon: Option<f64>,
    pub degree: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))
    }
}

/// First of flag, config value, default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Settings shared by every subcommand after the merge.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub max_iter: usize,
    pub format: Option<Format>,
}

impl Settings {
    pub fn resolve(flags: &GlobalArgs, config: &Config) -> Result<Settings, CliError> {
        let defaults = Tolerances::default();
        let tolerances = Tolerances {
            eval: pick(flags.tol_eval, config.tol_eval, defaults.eval),
            psd: pick(flags.tol_psd, config.tol_psd, defaults.psd),
            norm: pick(flags.tol_norm, config.tol_norm, defaults.norm),
        };
        for (name, v) in [("tol-eval", tolerances.eval), ("tol-psd", tolerances.psd), ("tol-norm", tolerances.norm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::usage(format!("--{name} must be positive, got {v}")));
            }
        }
        let max_iter = pick(flags.max_iter, config.max_iter, DEFAULT_MAX_ITERATIONS);
        if max_iter == 0 {
            return Err(CliError::usage("--max-iter must be at least 1"));
        }
        Ok(Settings {
            seed: pick(flags.seed, config.seed, 0),
            out: flags.out.clone().or_else(|| config.out.clone()),
            tolerances,
            max_iter,
            format: flags.format.or(config.format),
        })
    }

    pub fn echo(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut m = serde_json::Map::new();
        m.insert("seed".into(), self.seed.into());
        m.insert("tol_eval".into(), self.tolerances.eval.into());
        m.insert("tol_psd".into(), self.tolerances.psd.into());
        m.insert("tol_norm".into(), self.tolerances.norm.into());
        m.insert("max_iter".into(), self.max_iter.into());
        m
    }

    /// Only `interp-sweep` writes CSV.
    pub fn require_json(&self, command: &str) -> Result<(), CliError> {
        match self.format {
            Some(Format::Csv) => Err(CliError::usage(format!("{command} only writes json"))),
            _ => Ok(()),
        }
    }
}
