//! Experiment configuration file. Every field has a default, so an empty file (or none at
//! all) describes the cat map with `f = sin(2 pi x1)` over the octagon surface.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skewlab_core::fiber::{BumpParams, FuchsianGroup, Sigma2Config};
use skewlab_core::skew::SkewSystem;
use skewlab_core::torus::{ToralAutomorphism, TrigObservable};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Bad input: unreadable or malformed config, or parameter values the core rejects.
/// Mapped to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub system: SystemBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            system: SystemBlock::default(),
            run: RunBlock::default(),
            output: OutputBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemBlock {
    /// Must be a hyperbolic matrix in GL(2, Z).
    pub matrix: ToralAutomorphism,
    pub roof: TrigObservable,
    /// Group file written by `FuchsianGroup::save`; the built-in octagon group when absent.
    pub group_file: Option<PathBuf>,
    pub bump: BumpParams,
}

impl Default for SystemBlock {
    fn default() -> Self {
        Self {
            matrix: ToralAutomorphism::cat_map(),
            roof: TrigObservable::sin_x1(),
            group_file: None,
            bump: BumpParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub seed: u64,
    pub samples: usize,
    pub threads: Option<usize>,
    /// Frames per base orbit in `correlations`.
    pub fiber_starts: usize,
    /// Skips the `Sigma^2` computation where only its value is needed.
    pub big_sigma2: Option<f64>,
    pub sigma2_samples: usize,
    pub b_max: f64,
    pub step: f64,
    pub k: Vec<usize>,
    pub variance_n: Vec<usize>,
    pub law_n: usize,
    pub charfn_n: usize,
    pub residual_n: Vec<usize>,
    pub residual_threshold: f64,
    pub tail_n: Vec<usize>,
    pub beta: f64,
    pub clones: usize,
    pub replicas: usize,
    pub gaps: Vec<f64>,
    pub mixing_samples: usize,
    pub moment_n: Vec<usize>,
    pub epsilon: f64,
}

impl Default for RunBlock {
    fn default() -> Self {
        let pow2 = |lo: u32, hi: u32| (lo..=hi).map(|e| 1usize << e).collect::<Vec<_>>();
        let s2 = Sigma2Config::default();
        Self {
            seed: skewlab_core::checks::DEFAULT_SEED,
            samples: 10_000,
            threads: None,
            fiber_starts: 1,
            big_sigma2: None,
            sigma2_samples: s2.samples,
            b_max: s2.b_max,
            step: s2.step,
            k: vec![16, 23, 32, 45, 64, 91, 128, 181, 256],
            variance_n: pow2(10, 14),
            law_n: 1 << 14,
            charfn_n: 1 << 12,
            residual_n: vec![1 << 10, 1 << 12, 1 << 14],
            residual_threshold: 0.1,
            tail_n: vec![256, 1024, 4096],
            beta: 0.25,
            clones: 2_000,
            replicas: 40,
            gaps: vec![4.0, 8.0, 12.0],
            mixing_samples: 1_000_000,
            moment_n: pow2(10, 14),
            epsilon: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub format: Format,
    /// Directory receiving `<command>.<format>`, the manifest and the resolved config.
    pub path: PathBuf,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            format: Format::Csv,
            path: PathBuf::from("skewlab-results"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        // toml errors carry the line, column and field
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.run;
        let bad = |field: &str, why: &str| Err(ConfigError(format!("run.{field}: {why}")));
        if r.samples < 2 {
            return bad("samples", "must be at least 2");
        }
        if r.threads == Some(0) {
            return bad("threads", "must be at least 1");
        }
        if r.fiber_starts == 0 {
            return bad("fiber_starts", "must be at least 1");
        }
        if r.sigma2_samples < 2 {
            return bad("sigma2_samples", "must be at least 2");
        }
        if !(r.b_max > 0.0 && r.step > 0.0 && r.step <= r.b_max) {
            return bad("step", "need 0 < step <= b_max");
        }
        if r.big_sigma2.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
            return bad("big_sigma2", "must be finite and >= 0");
        }
        for (field, list) in [
            ("k", &r.k),
            ("variance_n", &r.variance_n),
            ("residual_n", &r.residual_n),
            ("tail_n", &r.tail_n),
            ("moment_n", &r.moment_n),
        ] {
            if list.is_empty() || list.windows(2).any(|w| w[0] >= w[1]) {
                return bad(field, "must be non-empty and strictly increasing");
            }
        }
        if r.law_n == 0 || r.charfn_n == 0 {
            return bad("law_n", "lengths must be >= 1");
        }
        if r.variance_n[0] == 0 || r.residual_n[0] == 0 {
            return bad("variance_n", "lengths must be >= 1");
        }
        if r.moment_n[0] < 16 {
            return bad("moment_n", "lengths must be >= 16");
        }
        if !(r.beta > 0.0 && r.beta < 0.5) {
            return bad("beta", "must lie in (0, 1/2)");
        }
        if !(r.epsilon > 0.0 && r.epsilon < 0.5) {
            return bad("epsilon", "must lie in (0, 1/2)");
        }
        if r.clones < 2 || r.replicas < 2 {
            return bad("clones", "clones and replicas must be at least 2");
        }
        if r.gaps.is_empty() || r.gaps.iter().any(|g| !(*g > 0.0)) {
            return bad("gaps", "must be non-empty and positive");
        }
        if r.mixing_samples < 2 {
            return bad("mixing_samples", "must be at least 2");
        }
        if !(r.residual_threshold > 0.0) {
            return bad("residual_threshold", "must be > 0");
        }
        Ok(())
    }

    pub fn system(&self) -> Result<SkewSystem, ConfigError> {
        let group = match &self.system.group_file {
            Some(p) => FuchsianGroup::load(p).map_err(|e| ConfigError(format!("system.group_file: {e}")))?,
            None => FuchsianGroup::bolza(),
        };
        Ok(SkewSystem::new(self.system.matrix.clone(), self.system.roof.clone(), group))
    }

    pub fn sigma2_config(&self) -> Sigma2Config {
        Sigma2Config {
            b_max: self.run.b_max,
            step: self.run.step,
            samples: self.run.sigma2_samples,
            seed: skewlab_core::mc::derive_seed(self.run.seed, "sigma2"),
            ..Sigma2Config::default()
        }
    }
}
