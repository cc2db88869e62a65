//! Benchmark run configuration (JSON).

use std::path::{Path, PathBuf};

use lobbench_core::adversarial::TrainConfig;
use lobbench_core::divergence::BucketSpec;
use lobbench_core::{Metric, ScoreKind, ScoreSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("unknown score '{0}'")]
    UnknownScore(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// A score by name (looked up in the built-in catalogue) or spelled out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreRef {
    Name(String),
    Spec(ScoreSpec),
}

/// `"default"` or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selection<T> {
    Keyword(String),
    List(Vec<T>),
}

impl<T> Default for Selection<T> {
    fn default() -> Self {
        Selection::Keyword(String::from("default"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalConfig {
    pub name: String,
    pub score: ScoreRef,
    pub given: ScoreRef,
    #[serde(default = "default_buckets")]
    pub buckets: BucketSpec,
}

fn default_buckets() -> BucketSpec {
    BucketSpec::Deciles
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapSettings {
    /// 0 disables intervals.
    pub replicates: usize,
    pub level: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        BootstrapSettings { replicates: 1000, level: 0.99 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HorizonSettings {
    pub enabled: bool,
    /// Explicit `[start, end)` step intervals; equal-width when absent.
    pub intervals: Option<Vec<(u32, u32)>>,
    pub count: usize,
    /// Bootstrap replicates per horizon point (0 = none).
    pub bootstrap: usize,
}

impl Default for HorizonSettings {
    fn default() -> Self {
        HorizonSettings { enabled: true, intervals: None, count: 10, bootstrap: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpactSettings {
    pub enabled: bool,
    pub lag_count: usize,
    pub max_lag: u32,
}

impl Default for ImpactSettings {
    fn default() -> Self {
        ImpactSettings { enabled: true, lag_count: 20, max_lag: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorSettings {
    pub enabled: bool,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for DiscriminatorSettings {
    fn default() -> Self {
        DiscriminatorSettings { enabled: true, train: TrainConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdSettings {
    pub enabled: bool,
    pub replicates: usize,
    pub level: f64,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        ThresholdSettings { enabled: true, replicates: 1000, level: 0.99 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Excluded from the config hash.
    pub data_root: Option<PathBuf>,
    pub scores: Selection<ScoreRef>,
    pub conditionals: Selection<ConditionalConfig>,
    pub metrics: Vec<Metric>,
    pub bootstrap: BootstrapSettings,
    pub threshold: ThresholdSettings,
    pub horizon: HorizonSettings,
    pub impact: ImpactSettings,
    pub discriminator: DiscriminatorSettings,
    pub ablation_factors: Vec<f64>,
    pub seed: u64,
    pub tick_size: i64,
    /// Book depth; inferred from the files when absent.
    pub n_levels: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            data_root: None,
            scores: Selection::default(),
            conditionals: Selection::default(),
            metrics: vec![Metric::L1, Metric::Wasserstein1],
            bootstrap: BootstrapSettings::default(),
            threshold: ThresholdSettings::default(),
            horizon: HorizonSettings::default(),
            impact: ImpactSettings::default(),
            discriminator: DiscriminatorSettings::default(),
            ablation_factors: vec![0.5, 2.0],
            seed: 0,
            tick_size: 100,
            n_levels: None,
        }
    }
}

/// A conditional pair with both scores resolved.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedConditional {
    pub name: String,
    pub score: ScoreSpec,
    pub given: ScoreSpec,
    pub buckets: BucketSpec,
}

/// Every score the catalogue knows by name: the default table plus the
/// conditioning-only scores.
pub fn catalogue() -> Vec<ScoreSpec> {
    let mut v = ScoreSpec::default_set();
    v.push(ScoreSpec::new("volatility_10ms", ScoreKind::Volatility10ms));
    v.push(ScoreSpec::new("hour_of_day", ScoreKind::MeanHourOfDay));
    v
}

pub fn lookup(name: &str) -> Result<ScoreSpec, ConfigError> {
    catalogue().into_iter().find(|s| s.name == name).ok_or_else(|| ConfigError::UnknownScore(name.to_string()))
}

fn resolve(r: &ScoreRef) -> Result<ScoreSpec, ConfigError> {
    match r {
        ScoreRef::Name(n) => lookup(n),
        ScoreRef::Spec(s) => Ok(s.clone()),
    }
}

/// spread | hour of day, ask volume | spread, spread | 10ms volatility.
pub fn default_conditionals() -> Vec<ResolvedConditional> {
    let get = |n: &str| lookup(n).expect("catalogue score");
    vec![
        ResolvedConditional {
            name: String::from("spread|hour_of_day"),
            score: get("spread"),
            given: get("hour_of_day"),
            buckets: BucketSpec::Hourly,
        },
        ResolvedConditional {
            name: String::from("ask_volume|spread"),
            score: get("ask_volume"),
            given: get("spread"),
            buckets: BucketSpec::Deciles,
        },
        ResolvedConditional {
            name: String::from("spread|volatility_10ms"),
            score: get("spread"),
            given: get("volatility_10ms"),
            buckets: BucketSpec::Deciles,
        },
    ]
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.to_path_buf(), source })
    }

    pub fn resolved_scores(&self) -> Result<Vec<ScoreSpec>, ConfigError> {
        match &self.scores {
            Selection::Keyword(k) if k == "default" => Ok(ScoreSpec::default_set()),
            Selection::Keyword(k) => Err(ConfigError::Invalid(format!("scores: expected \"default\" or a list, got \"{k}\""))),
            Selection::List(l) => l.iter().map(resolve).collect(),
        }
    }

    pub fn resolved_conditionals(&self) -> Result<Vec<ResolvedConditional>, ConfigError> {
        match &self.conditionals {
            Selection::Keyword(k) if k == "default" => Ok(default_conditionals()),
            Selection::Keyword(k) if k == "none" => Ok(Vec::new()),
            Selection::Keyword(k) => {
                Err(ConfigError::Invalid(format!("conditionals: expected \"default\", \"none\" or a list, got \"{k}\"")))
            }
            Selection::List(l) => l
                .iter()
                .map(|c| {
                    Ok(ResolvedConditional {
                        name: c.name.clone(),
                        score: resolve(&c.score)?,
                        given: resolve(&c.given)?,
                        buckets: c.buckets.clone(),
                    })
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!("unsupported schema version {}", self.schema_version)));
        }
        let scores = self.resolved_scores()?;
        if scores.is_empty() {
            return invalid("at least one score is required");
        }
        let mut names: Vec<&str> = scores.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return invalid("score names must be unique");
        }
        if self.metrics.is_empty() {
            return invalid("at least one metric is required");
        }
        self.resolved_conditionals()?;
        let b = &self.bootstrap;
        if b.replicates != 0 && b.replicates < 100 {
            return invalid("bootstrap replicates must be 0 or at least 100");
        }
        if !(b.level > 0.0 && b.level < 1.0) || !(self.threshold.level > 0.0 && self.threshold.level < 1.0) {
            return invalid("confidence levels must lie in (0, 1)");
        }
        if self.horizon.bootstrap != 0 && self.horizon.bootstrap < 100 {
            return invalid("horizon bootstrap must be 0 or at least 100");
        }
        if self.ablation_factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return invalid("ablation factors must be positive");
        }
        if self.tick_size <= 0 {
            return invalid("tick size must be positive");
        }
        if self.impact.lag_count < 2 || self.impact.max_lag < 1 {
            return invalid("impact needs at least two lags and a positive maximum lag");
        }
        Ok(())
    }

    /// SHA-256 over the resolved semantic fields (everything except the
    /// data location).
    pub fn hash(&self) -> Result<String, ConfigError> {
        #[derive(Serialize)]
        struct Semantic<'a> {
            schema_version: u32,
            scores: Vec<ScoreSpec>,
            conditionals: Vec<ResolvedConditional>,
            metrics: &'a [Metric],
            bootstrap: &'a BootstrapSettings,
            threshold: &'a ThresholdSettings,
            horizon: &'a HorizonSettings,
            impact: &'a ImpactSettings,
            discriminator: &'a DiscriminatorSettings,
            ablation_factors: &'a [f64],
            seed: u64,
            tick_size: i64,
            n_levels: Option<usize>,
        }
        let s = Semantic {
            schema_version: self.schema_version,
            scores: self.resolved_scores()?,
            conditionals: self.resolved_conditionals()?,
            metrics: &self.metrics,
            bootstrap: &self.bootstrap,
            threshold: &self.threshold,
            horizon: &self.horizon,
            impact: &self.impact,
            discriminator: &self.discriminator,
            ablation_factors: &self.ablation_factors,
            seed: self.seed,
            tick_size: self.tick_size,
            n_levels: self.n_levels,
        };
        let bytes = serde_json::to_vec(&s).expect("config serialises");
        let digest = Sha256::digest(&bytes);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_selection() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.resolved_scores().unwrap().len(), 17);
        let conds = c.resolved_conditionals().unwrap();
        assert_eq!(conds.len(), 3);
        assert_eq!(conds[0].buckets, BucketSpec::Hourly);
        c.validate().unwrap();
    }

    #[test]
    fn explicit_scores_parse() {
        let c: RunConfig = serde_json::from_str(
            r#"{"scores": ["spread", {"name": "v", "kind": "book_volume", "side": "bid", "scope": "best_level"}],
                "conditionals": [{"name": "x", "score": "spread", "given": "ofi", "buckets": {"quantiles": 4}}],
                "metrics": ["l1"]}"#,
        )
        .unwrap();
        let s = c.resolved_scores().unwrap();
        assert_eq!(s[1].name, "v");
        assert_eq!(c.resolved_conditionals().unwrap()[0].buckets, BucketSpec::Quantiles(4));
        assert!(serde_json::from_str::<RunConfig>(r#"{"scores": ["nope"]}"#).unwrap().resolved_scores().is_err());
    }

    #[test]
    fn hash_tracks_semantics_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.data_root = Some(PathBuf::from("/elsewhere"));
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        let mut c = a.clone();
        c.scores = Selection::List(ScoreSpec::default_set().into_iter().map(ScoreRef::Spec).collect());
        assert_eq!(a.hash().unwrap(), c.hash().unwrap());
    }
}
