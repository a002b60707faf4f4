//! JSON run configuration. Every key is optional; command-line flags win
//! over the file, and the file wins over built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use hin_embed_core::eval::EvalConfig;
use hin_embed_core::infomax::WorkerConfig;
use hin_embed_core::pipeline::PipelineConfig;
use hin_embed_core::PartitionBounds;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] hin_embed_core::Error),
    #[error("missing required input: {0}")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalFile {
    pub train_fraction: Option<f64>,
    pub hidden_link_fraction: Option<f64>,
    pub classifier_epochs: Option<usize>,
    pub classifier_lr: Option<f64>,
}

/// Contents of a `--config` file. Relative paths are resolved against the
/// directory holding the file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub lower_bound: Option<usize>,
    pub upper_bound: Option<usize>,
    pub dim: Option<usize>,
    pub layers: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub corruption_rate: Option<f64>,
    pub patience: Option<usize>,
    pub fallback_dim: Option<usize>,
    pub align: Option<bool>,
    #[serde(default)]
    pub eval: EvalFile,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg: FileConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.edges, &mut cfg.features, &mut cfg.labels, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// `self` with every key set in `over` replaced.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        FileConfig {
            edges: over.edges.or(self.edges),
            features: over.features.or(self.features),
            labels: over.labels.or(self.labels),
            out: over.out.or(self.out),
            seed: over.seed.or(self.seed),
            workers: over.workers.or(self.workers),
            lower_bound: over.lower_bound.or(self.lower_bound),
            upper_bound: over.upper_bound.or(self.upper_bound),
            dim: over.dim.or(self.dim),
            layers: over.layers.or(self.layers),
            epochs: over.epochs.or(self.epochs),
            lr: over.lr.or(self.lr),
            corruption_rate: over.corruption_rate.or(self.corruption_rate),
            patience: over.patience.or(self.patience),
            fallback_dim: over.fallback_dim.or(self.fallback_dim),
            align: over.align.or(self.align),
            eval: EvalFile {
                train_fraction: over.eval.train_fraction.or(self.eval.train_fraction),
                hidden_link_fraction: over.eval.hidden_link_fraction.or(self.eval.hidden_link_fraction),
                classifier_epochs: over.eval.classifier_epochs.or(self.eval.classifier_epochs),
                classifier_lr: over.eval.classifier_lr.or(self.eval.classifier_lr),
            },
        }
    }

    /// Fills unset keys from defaults and validates the result.
    pub fn pipeline(&self) -> Result<PipelineConfig, ConfigError> {
        let d = PipelineConfig::default();
        let w = WorkerConfig::default();
        let e = EvalConfig::default();
        let cfg = PipelineConfig {
            bounds: PartitionBounds {
                lower: self.lower_bound.unwrap_or(d.bounds.lower),
                upper: self.upper_bound.unwrap_or(d.bounds.upper),
            },
            worker: WorkerConfig {
                dim: self.dim.unwrap_or(w.dim),
                layers: self.layers.unwrap_or(w.layers),
                epochs: self.epochs.unwrap_or(w.epochs),
                lr: self.lr.unwrap_or(w.lr),
                corruption_rate: self.corruption_rate.unwrap_or(w.corruption_rate),
                patience: self.patience.unwrap_or(w.patience),
                seed: w.seed,
            },
            executor_count: self.workers.unwrap_or(d.executor_count),
            eval: EvalConfig {
                train_fraction: self.eval.train_fraction.unwrap_or(e.train_fraction),
                hidden_link_fraction: self.eval.hidden_link_fraction.unwrap_or(e.hidden_link_fraction),
                classifier_epochs: self.eval.classifier_epochs.unwrap_or(e.classifier_epochs),
                classifier_lr: self.eval.classifier_lr.unwrap_or(e.classifier_lr),
            },
            seed: self.seed.unwrap_or(d.seed),
            fallback_dim: self.fallback_dim.unwrap_or(d.fallback_dim),
            align: self.align.unwrap_or(d.align),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn edges(&self) -> Result<&Path, ConfigError> {
        self.edges.as_deref().ok_or(ConfigError::Missing("--edges (or `edges` in the config file)"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = serde_json::from_str(r#"{"seed": 3, "dim": 16, "eval": {"train_fraction": 0.5}}"#).unwrap();
        let flags = FileConfig { seed: Some(7), ..FileConfig::default() };
        let cfg = file.overlay(flags).pipeline().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.worker.dim, 16);
        assert_eq!(cfg.eval.train_fraction, 0.5);
        assert_eq!(cfg.eval.hidden_link_fraction, EvalConfig::default().hidden_link_fraction);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"sed": 3}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg = FileConfig { lower_bound: Some(500), upper_bound: Some(100), ..FileConfig::default() };
        assert!(matches!(cfg.pipeline(), Err(ConfigError::Invalid(_))));
        let cfg = FileConfig { workers: Some(0), ..FileConfig::default() };
        assert!(cfg.pipeline().is_err());
    }
}
