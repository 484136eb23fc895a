//! Flat TOML pipeline configuration with environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoxMode, CameraIntrinsics, GeometryConfig};
use crate::ingest::MatchConfig;
use crate::quantize::QuantizerConfig;
use crate::reasoner::GateConfig;

/// Prefix of environment variables that override config keys.
pub const ENV_PREFIX: &str = "SIZEGATE_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("`{key}` points to {path}, which does not exist")]
    NotFound { key: &'static str, path: PathBuf },
}

/// Every tunable of the pipeline, with the published values as defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub depth_scale: f64,

    pub chi: usize,
    pub n_neighbors: usize,
    pub sigma_mult: f64,
    pub min_points: usize,
    pub box_mode: BoxMode,

    pub area_thresholds: [f64; 4],
    pub depth_thresholds: [f64; 3],
    pub ar_threshold: f64,

    pub epsilon: f64,
    pub min_count_i: usize,
    pub top_k: usize,

    pub mu: f64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub kb: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rankings: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crops_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let k = CameraIntrinsics::default();
        let g = GeometryConfig::default();
        let q = QuantizerConfig::default();
        let gate = GateConfig::default();
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            depth_scale: k.depth_scale,
            chi: g.chi,
            n_neighbors: g.n_neighbors,
            sigma_mult: g.sigma_mult,
            min_points: g.min_points,
            box_mode: g.box_mode,
            area_thresholds: q.area_thresholds,
            depth_thresholds: q.depth_thresholds,
            ar_threshold: q.ar_threshold,
            epsilon: gate.epsilon,
            min_count_i: gate.min_count_i,
            top_k: gate.top_k,
            mu: MatchConfig::default().mu,
            kb: None,
            rankings: None,
            crops_dir: None,
            truth: None,
            output: None,
        }
    }
}

impl PipelineConfig {
    /// Parses config text, applies `SIZEGATE_*` overrides from `env`, and
    /// validates. Relative paths stay relative; see [`Self::resolve_paths`].
    pub fn from_toml_str(
        text: &str,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for (key, raw) in env {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            table.insert(name.to_ascii_lowercase(), env_value(&raw));
        }
        let cfg: PipelineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths in it are taken from its directory.
    pub fn load(path: impl AsRef<Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_owned(),
            source: e,
        })?;
        let mut cfg = Self::from_toml_str(&text, env)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.kb,
            &mut self.rankings,
            &mut self.crops_dir,
            &mut self.truth,
            &mut self.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.intrinsics().validate().map_err(|e| invalid(&e))?;
        self.geometry().validate().map_err(|e| invalid(&e))?;
        self.quantizer().validate().map_err(|e| invalid(&e))?;
        self.gate().validate().map_err(|e| invalid(&e))?;
        self.matching().validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            depth_scale: self.depth_scale,
        }
    }

    pub fn geometry(&self) -> GeometryConfig {
        GeometryConfig {
            chi: self.chi,
            n_neighbors: self.n_neighbors,
            sigma_mult: self.sigma_mult,
            min_points: self.min_points,
            box_mode: self.box_mode,
        }
    }

    pub fn quantizer(&self) -> QuantizerConfig {
        QuantizerConfig {
            area_thresholds: self.area_thresholds,
            depth_thresholds: self.depth_thresholds,
            ar_threshold: self.ar_threshold,
        }
    }

    pub fn gate(&self) -> GateConfig {
        GateConfig {
            epsilon: self.epsilon,
            min_count_i: self.min_count_i,
            top_k: self.top_k,
        }
    }

    pub fn matching(&self) -> MatchConfig {
        MatchConfig { mu: self.mu }
    }

    /// The path configured under `key`, or [`ConfigError::Missing`].
    pub fn path(&self, key: &'static str) -> Result<&Path, ConfigError> {
        let value = match key {
            "kb" => &self.kb,
            "rankings" => &self.rankings,
            "crops_dir" => &self.crops_dir,
            "truth" => &self.truth,
            "output" => &self.output,
            _ => &None,
        };
        value.as_deref().ok_or(ConfigError::Missing(key))
    }

    /// Like [`Self::path`], but the path must also exist.
    pub fn existing_path(&self, key: &'static str) -> Result<&Path, ConfigError> {
        let path = self.path(key)?;
        if !path.exists() {
            return Err(ConfigError::NotFound {
                key,
                path: path.to_owned(),
            });
        }
        Ok(path)
    }
}

/// Environment values are TOML literals (`0.05`, `[1, 2]`, `"x"`); anything
/// that does not parse as one is taken as a bare string.
fn env_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}
