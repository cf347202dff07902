//! Experiment configuration: JSON schema, defaults and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use hybrid_rl::engine::{Refit, RunMode};
use hybrid_rl::envs::hard::HardInstanceSpec;
use hybrid_rl::envs::mountain_car::{CollectorConfig, MountainCarSpec};
use hybrid_rl::envs::movielens::MovieLensSpec;
use hybrid_rl::envs::synthetic::{SyntheticBanditSpec, SyntheticMdpSpec};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// A configuration problem tied to a line of the source text (1-based; 0
/// when no line applies).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Inverse temperature of a Boltzmann behavior. Written as a number or as
/// `"inf"` / `"-inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Temperature(pub f64);

impl Serialize for Temperature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            v if v == f64::INFINITY => s.serialize_str("inf"),
            v if v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            v => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Temperature;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, \"inf\" or \"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Temperature, E> {
                Ok(Temperature(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Temperature, E> {
                Ok(Temperature(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Temperature, E> {
                Ok(Temperature(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Temperature, E> {
                match v.trim().to_ascii_lowercase().as_str() {
                    "inf" | "+inf" | "infinity" | "+infinity" => Ok(Temperature(f64::INFINITY)),
                    "-inf" | "-infinity" => Ok(Temperature(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    SyntheticBandit {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        spec: SyntheticBanditSpec,
    },
    SyntheticMdp {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        spec: SyntheticMdpSpec,
    },
    HardInstance {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        spec: HardInstanceSpec,
    },
    MountainCar {
        /// Seeds the offline collector; the MDP itself is fixed.
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        spec: MountainCarSpec,
        #[serde(default)]
        collector: CollectorConfig,
    },
    Movielens {
        #[serde(default)]
        seed: u64,
        /// Ratings file, relative paths resolved against the config file.
        path: PathBuf,
        #[serde(default)]
        spec: MovieLensSpec,
    },
}

impl EnvironmentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SyntheticBandit { .. } => "synthetic_bandit",
            Self::SyntheticMdp { .. } => "synthetic_mdp",
            Self::HardInstance { .. } => "hard_instance",
            Self::MountainCar { .. } => "mountain_car",
            Self::Movielens { .. } => "movielens",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::SyntheticBandit { seed, .. }
            | Self::SyntheticMdp { seed, .. }
            | Self::HardInstance { seed, .. }
            | Self::MountainCar { seed, .. }
            | Self::Movielens { seed, .. } => *seed,
        }
    }

    pub fn set_seed(&mut self, value: u64) {
        match self {
            Self::SyntheticBandit { seed, .. }
            | Self::SyntheticMdp { seed, .. }
            | Self::HardInstance { seed, .. }
            | Self::MountainCar { seed, .. }
            | Self::Movielens { seed, .. } => *seed = value,
        }
    }

    /// Linear environments run the ridge oracle, the rest the count oracle.
    pub fn is_linear(&self) -> bool {
        matches!(self, Self::SyntheticBandit { .. } | Self::HardInstance { .. } | Self::Movielens { .. })
    }

    /// Feature dimension of a linear environment.
    pub fn feature_dim(&self) -> Option<usize> {
        match self {
            Self::SyntheticBandit { spec, .. } => Some(spec.dim),
            Self::HardInstance { .. } => Some(2),
            Self::Movielens { spec, .. } => Some(spec.num_arms * spec.nmf.rank),
            _ => None,
        }
    }

    fn uses_alpha(&self) -> bool {
        matches!(self, Self::MountainCar { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorConfig {
    pub label: String,
    /// Boltzmann inverse temperature over the optimal action values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Temperature>,
    /// Share of exploitation-pool trajectories (Mountain Car only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Confidence multiplier `c`; defaults to 1 (linear) or 0.1 (tabular).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_scale: Option<f64>,
    /// Ridge parameter, linear only; defaults to the feature dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Hand the tabular oracle the true mean rewards.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_rewards: Option<bool>,
    #[serde(default)]
    pub refit: Refit,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { beta_scale: None, lambda: None, delta: default_delta(), known_rewards: None, refit: Refit::Incremental }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_grid() -> Vec<usize> {
    vec![500, 1000, 2000, 4000]
}

fn default_trials() -> i64 {
    20
}

fn default_true() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub behaviors: Vec<BehaviorConfig>,
    /// Adds the pure online run (no offline data) as experiment `online`.
    #[serde(default = "default_true")]
    pub include_baseline: bool,
    #[serde(default = "default_grid")]
    pub n_offline: Vec<usize>,
    pub n_online: usize,
    #[serde(default = "default_trials")]
    pub trials: i64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

/// Line of the first occurrence of `"key"`, or 0.
fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(0, |i| i + 1)
}

/// Parses and resolves a configuration. Every optional field comes back
/// filled in, so the result doubles as the resolved record.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let message = match full.rfind(" at line ") {
            Some(i) => full[..i].to_string(),
            None => full,
        };
        ConfigError { line: e.line(), message }
    })?;
    config.resolve().map_err(|(key, message)| ConfigError { line: line_of(text, key), message })?;
    Ok(config)
}

/// Reads and parses a config file; a relative MovieLens path is resolved
/// against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
    let mut config = parse_config(&text)?;
    if let EnvironmentConfig::Movielens { path: ratings, .. } = &mut config.environment {
        if ratings.is_relative() {
            if let Some(dir) = path.parent() {
                *ratings = dir.join(&*ratings);
            }
        }
    }
    Ok(config)
}

type Invalid = (&'static str, String);

impl ExperimentConfig {
    pub fn trials(&self) -> usize {
        self.trials.max(0) as usize
    }

    /// The oracle bonus scale after resolution.
    pub fn beta_scale(&self) -> f64 {
        self.oracle.beta_scale.expect("resolved config")
    }

    /// Checks ranges and cross-field consistency, then fills defaults.
    pub fn resolve(&mut self) -> Result<(), Invalid> {
        if self.trials < 1 {
            return Err(("trials", format!("trials must be at least 1, got {}", self.trials)));
        }
        if self.n_online < 1 {
            return Err(("n_online", "n_online must be at least 1".into()));
        }
        if self.n_offline.is_empty() {
            return Err(("n_offline", "n_offline grid must not be empty".into()));
        }
        if self.n_offline.contains(&0) {
            return Err(("n_offline", "n_offline entries must be positive; the baseline covers N0 = 0".into()));
        }
        if self.behaviors.is_empty() && !self.include_baseline {
            return Err(("behaviors", "no behaviors and no baseline: nothing to run".into()));
        }
        let o = &self.oracle;
        if !(o.delta > 0.0 && o.delta < 1.0) {
            return Err(("delta", format!("delta must lie in (0, 1), got {}", o.delta)));
        }
        if let Some(c) = o.beta_scale {
            if !(c > 0.0 && c.is_finite()) {
                return Err(("beta_scale", format!("beta_scale must be positive, got {c}")));
            }
        }
        self.check_environment()?;
        let mut labels = std::collections::BTreeSet::new();
        for b in &self.behaviors {
            if b.label.is_empty() || b.label == "online" || b.label.contains('/') {
                return Err(("label", format!("invalid behavior label {:?}", b.label)));
            }
            if !labels.insert(b.label.as_str()) {
                return Err(("label", format!("duplicate behavior label {:?}", b.label)));
            }
            if self.environment.uses_alpha() {
                if b.k.is_some() {
                    return Err(("k", format!("behavior {:?}: mountain_car behaviors take alpha, not k", b.label)));
                }
                match b.alpha {
                    Some(a) if (0.0..=1.0).contains(&a) => {}
                    Some(a) => return Err(("alpha", format!("behavior {:?}: alpha {a} outside [0, 1]", b.label))),
                    None => return Err(("behaviors", format!("behavior {:?} needs alpha", b.label))),
                }
            } else {
                if b.alpha.is_some() {
                    return Err(("alpha", format!("behavior {:?}: alpha applies to mountain_car only", b.label)));
                }
                match b.k {
                    Some(Temperature(k)) if !k.is_nan() => {}
                    _ => return Err(("behaviors", format!("behavior {:?} needs k", b.label))),
                }
            }
        }

        let linear = self.environment.is_linear();
        let o = &mut self.oracle;
        if linear {
            if o.known_rewards.is_some() {
                return Err(("known_rewards", "known_rewards applies to tabular environments only".into()));
            }
            let d = self.environment.feature_dim().expect("linear environment") as f64;
            let lambda = *o.lambda.get_or_insert(d);
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(("lambda", format!("lambda must be positive, got {lambda}")));
            }
            o.beta_scale.get_or_insert(1.0);
        } else {
            if o.lambda.is_some() {
                return Err(("lambda", "lambda applies to linear environments only".into()));
            }
            o.beta_scale.get_or_insert(0.1);
            let default_known = match &self.environment {
                EnvironmentConfig::SyntheticMdp { spec, .. } => spec.known_rewards,
                _ => true,
            };
            o.known_rewards.get_or_insert(default_known);
        }
        Ok(())
    }

    fn check_environment(&self) -> Result<(), Invalid> {
        let positive = |key: &'static str, v: usize| {
            if v == 0 {
                Err((key, format!("{key} must be positive")))
            } else {
                Ok(())
            }
        };
        match &self.environment {
            EnvironmentConfig::SyntheticBandit { spec, .. } => {
                positive("num_contexts", spec.num_contexts)?;
                positive("num_arms", spec.num_arms)?;
                positive("dim", spec.dim)?;
                if !(spec.noise_half_width >= 0.0) {
                    return Err(("noise_half_width", "noise_half_width must be nonnegative".into()));
                }
            }
            EnvironmentConfig::SyntheticMdp { spec, .. } => {
                positive("num_states", spec.num_states)?;
                positive("num_actions", spec.num_actions)?;
                positive("horizon", spec.horizon)?;
            }
            EnvironmentConfig::HardInstance { spec, .. } => {
                if !(spec.radius > 0.0 && spec.radius <= std::f64::consts::FRAC_1_SQRT_2 + 1e-12) {
                    return Err(("radius", format!("radius {} outside (0, 1/sqrt(2)]", spec.radius)));
                }
                positive("num_contexts", spec.num_contexts)?;
            }
            EnvironmentConfig::MountainCar { spec, collector, .. } => {
                positive("position_bins", spec.position_bins)?;
                positive("velocity_bins", spec.velocity_bins)?;
                positive("subsamples", spec.subsamples)?;
                positive("horizon", spec.horizon)?;
                positive("iterations", collector.iterations)?;
                if !(collector.gamma > 0.0 && collector.gamma < 1.0) {
                    return Err(("gamma", format!("gamma must lie in (0, 1), got {}", collector.gamma)));
                }
                let max = self.n_offline.iter().copied().max().unwrap_or(0);
                if max > collector.iterations {
                    return Err(("n_offline", format!("n_offline {max} exceeds the {} collector iterations", collector.iterations)));
                }
            }
            EnvironmentConfig::Movielens { spec, .. } => {
                positive("num_arms", spec.num_arms)?;
                positive("rank", spec.nmf.rank)?;
                if !(spec.noise_std >= 0.0) {
                    return Err(("noise_std", "noise_std must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }

    /// Human-readable confidence-width formula with the resolved constants.
    pub fn beta_description(&self) -> String {
        let c = self.beta_scale();
        let delta = self.oracle.delta;
        match self.oracle.lambda {
            Some(lambda) => {
                let d = self.environment.feature_dim().unwrap_or(0);
                format!(
                    "beta(n) = {c} * (sqrt(lambda) + sqrt(2 ln(1/delta) + d ln(1 + n/(lambda d)))), d = {d}, lambda = {lambda}, delta = {delta}"
                )
            }
            None => format!("beta = {c} * H * sqrt(ln(2 H |X| |A| (N0 + N1) / delta)), delta = {delta}"),
        }
    }
}
