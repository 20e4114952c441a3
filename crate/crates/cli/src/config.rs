//! Experiment configuration files (TOML).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemBlock,
    #[serde(default)]
    pub measure: MeasureBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    pub sampling: SamplingBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub name: String,
    /// Metric exponent of d_α on shifts.
    pub alpha: Option<f64>,
    /// Branch count N for gauss-cf.
    pub truncation: Option<usize>,
    /// Alphabet size for `full-shift`.
    pub alphabet: Option<usize>,
    /// Incidence matrix file for `shift`, relative to the config file.
    pub matrix_file: Option<PathBuf>,
    /// Circle metric on [0,1) for digit maps.
    pub circle: Option<bool>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureBlock {
    #[serde(default = "zero")]
    pub potential: String,
    pub p: Option<Vec<f64>>,
    pub table: Option<Vec<Vec<f64>>>,
    pub t: Option<f64>,
}

fn zero() -> String {
    "zero".into()
}

impl Default for MeasureBlock {
    fn default() -> Self {
        MeasureBlock { potential: zero(), p: None, table: None, t: None }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    /// Must match the subcommand when present.
    pub kind: Option<String>,
    pub depth: Option<usize>,
    pub tolerance: Option<f64>,
    pub expected: Option<f64>,
    pub probe_depth: Option<usize>,
    pub max_gap: Option<usize>,
    pub radii: Option<Vec<f64>>,
    pub cylinder_depth: Option<usize>,
    pub dyadic_depth: Option<usize>,
    pub diagonal: Option<bool>,
    pub liminf_threshold: Option<f64>,
    /// 1-based comma-separated symbols.
    pub target_word: Option<String>,
    pub y: Option<f64>,
    pub r: Option<f64>,
    pub k_grid: Option<Vec<u64>>,
    pub closed_form: Option<bool>,
    pub m: Option<f64>,
    pub delta: Option<f64>,
    pub cells: Option<Vec<String>>,
    pub intervals: Option<Vec<[f64; 2]>>,
    pub horizon: Option<u64>,
    pub max_return: Option<usize>,
    pub max_radius: Option<f64>,
    pub pass_fraction: Option<f64>,
    pub y_points: Option<Vec<f64>>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub radii_count: Option<usize>,
    pub lyapunov_samples: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingBlock {
    pub seed: u64,
    pub pairs: Option<usize>,
    pub horizons: Option<Vec<u64>>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = self.path.as_ref().map_or("<config>".to_string(), |p| p.display().to_string());
        match self.line {
            Some(l) => write!(f, "{path}:{l}: {}", self.message),
            None => write!(f, "{path}: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A parsed config with its source text, kept for line lookups in later diagnostics.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: Option<PathBuf>,
    pub text: String,
}

impl LoadedConfig {
    pub fn parse(text: &str, path: Option<&Path>) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError {
            path: path.map(Path::to_path_buf),
            line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
            message: e.message().trim().to_string(),
        })?;
        Ok(LoadedConfig { config, path: path.map(Path::to_path_buf), text: text.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, Some(path))
    }

    /// Error pointing at the line where `key` is assigned, if it appears.
    pub fn error_at(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let line = self.text.lines().position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        });
        ConfigError { path: self.path.clone(), line: line.map(|l| l + 1), message: message.into() }
    }

    /// Paths in the config are relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match self.path.as_ref().and_then(|c| c.parent()) {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = LoadedConfig::parse("[system]\nname = \"doubling\"\n[sampling]\nseed = 7\n", None).unwrap();
        assert_eq!(c.config.sampling.seed, 7);
        assert_eq!(c.config.measure.potential, "zero");
    }

    #[test]
    fn unknown_keys_and_missing_seed_are_rejected() {
        let e = LoadedConfig::parse("[system]\nname = \"doubling\"\nbogus = 1\n[sampling]\nseed = 7\n", None).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("bogus"));
        let e = LoadedConfig::parse("[system]\nname = \"doubling\"\n[sampling]\npairs = 3\n", None).unwrap_err();
        assert!(e.message.contains("seed"));
    }

    #[test]
    fn key_lines() {
        let c = LoadedConfig::parse("[system]\nname = \"x\"\n[experiment]\nm = -1.0\n[sampling]\nseed = 1\n", None).unwrap();
        assert_eq!(c.error_at("m", "bad").line, Some(4));
    }
}
