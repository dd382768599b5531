use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::SynthConfig;
use crate::hgraph::GraphConfig;
use crate::hgt::TrainConfig;
use crate::index::Variant;
use crate::metrics::MetricsConfig;
use crate::stats::Bandwidth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub ipc_texts: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Run directory; not echoed into the manifest, which lives inside it.
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { corpus: None, ipc_texts: None, embeddings: None, out: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Share of multi-IPC patents that lose one PatentIpc edge during training
    /// for the held-out AUC.
    pub holdout_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { holdout_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    pub variants: Vec<Variant>,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self { variants: Variant::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Identity,
    Log1p,
}

impl Transform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Log1p => v.ln_1p(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log1p => "log1p",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    /// Transform applied to the dependent variables before regression.
    pub transform: Transform,
    pub bandwidth: Bandwidth,
    pub kde_points: usize,
    /// Width in years of the buckets of the yearly trend table.
    pub trend_window: u32,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { transform: Transform::Identity, bandwidth: Bandwidth::Auto, kde_points: 256, trend_window: 1 }
    }
}

/// Full run configuration. Every section is optional in the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; overrides `train.seed`.
    pub seed: u64,
    pub paths: PathsConfig,
    pub graph: GraphConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub metrics: MetricsConfig,
    pub index: IndexConfig,
    pub stats: StatsConfig,
    pub synth: SynthConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    /// Parses TOML text; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.paths.corpus, &mut self.paths.ipc_texts, &mut self.paths.embeddings].into_iter().flatten() {
            fix(p);
        }
    }

    /// Applies the global seed and validates every section.
    pub fn finalize(mut self) -> Result<Self, ConfigError> {
        self.train.seed = self.seed;
        self.train.validate().map_err(|e| ConfigError::Invalid(format!("train: {e}")))?;
        self.metrics.validate().map_err(|e| ConfigError::Invalid(format!("metrics: {e}")))?;
        if !(0.0..1.0).contains(&self.eval.holdout_fraction) {
            return Err(ConfigError::Invalid("eval.holdout_fraction must lie in [0, 1)".into()));
        }
        if self.graph.knn_k == 0 && !(self.graph.sim_threshold > 0.0 && self.graph.sim_threshold <= 1.0) {
            return Err(ConfigError::Invalid("graph: knn_k = 0 needs sim_threshold in (0, 1]".into()));
        }
        if self.stats.kde_points < 2 {
            return Err(ConfigError::Invalid("stats.kde_points must be at least 2".into()));
        }
        if self.stats.trend_window == 0 {
            return Err(ConfigError::Invalid("stats.trend_window must be at least 1".into()));
        }
        if let Bandwidth::Fixed(h) = self.stats.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(ConfigError::Invalid("stats.bandwidth must be positive".into()));
            }
        }
        if !self.index.variants.contains(&Variant::V8) {
            self.index.variants.push(Variant::V8);
        }
        self.index.variants.sort();
        self.index.variants.dedup();
        Ok(self)
    }

    /// Canonical TOML echo of the configuration.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical echo.
    pub fn hash(&self) -> String {
        super::sha256_hex(self.echo().as_bytes())
    }

    pub fn require(&self, path: &Option<PathBuf>, name: &str) -> Result<PathBuf, ConfigError> {
        let p = path.clone().ok_or_else(|| ConfigError::Invalid(format!("paths.{name} is not set")))?;
        if !p.exists() {
            return Err(ConfigError::Invalid(format!("paths.{name} does not exist: {}", p.display())));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = RunConfig::from_toml("", Path::new("/")).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn sections_and_relative_paths() {
        let text = r#"
seed = 9
[paths]
corpus = "data/corpus.jsonl"
embeddings = "/abs/emb.tsv"
[metrics]
smoothing_k = 2
ipc_level = "class"
[index]
variants = ["V3", "V1"]
[stats]
transform = "log1p"
bandwidth = { fixed = 0.2 }
"#;
        let cfg = RunConfig::from_toml(text, Path::new("/base")).unwrap().finalize().unwrap();
        assert_eq!(cfg.paths.corpus, Some(PathBuf::from("/base/data/corpus.jsonl")));
        assert_eq!(cfg.paths.embeddings, Some(PathBuf::from("/abs/emb.tsv")));
        assert_eq!(cfg.metrics.smoothing_k, 2);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.index.variants, vec![Variant::V1, Variant::V3, Variant::V8]);
        assert_eq!(cfg.stats.transform, Transform::Log1p);
        assert_eq!(cfg.stats.bandwidth, Bandwidth::Fixed(0.2));
    }

    #[test]
    fn echo_round_trips_and_hash_is_stable() {
        let cfg = RunConfig::default().finalize().unwrap();
        let back = RunConfig::from_toml(&cfg.echo(), Path::new("/")).unwrap().finalize().unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(RunConfig::from_toml("bogus = 1", Path::new("/")).is_err());
        let bad = RunConfig::from_toml("[metrics]\nsmoothing_k = 0", Path::new("/")).unwrap();
        assert!(bad.finalize().is_err());
    }
}
