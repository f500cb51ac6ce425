//! Declarative TOML experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Golf,
    RewardFree,
    Offline,
    Claims,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    /// Named construction (`tree`, `two-layer`, `bandit`, `peak-bandit`).
    pub construction: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub mdp: Option<PathBuf>,
    pub family: Option<PathBuf>,
    /// Reward-free exploration family.
    pub gfamily: Option<PathBuf>,
    /// Target reward for reward-free runs (JSON list of layer tables).
    pub reward: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OfflineMethod {
    Msbo,
    Fqi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuSpec {
    /// Coverability witness `mu*` (all policies).
    Witness,
    Uniform,
    /// Occupancy of the optimal policy.
    Optimal,
    /// Zero on every cell of the optimal policy's subtree.
    AvoidOptimal,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    /// Sweep of `T` for golf / reward-free.
    #[serde(default)]
    pub rounds: Vec<usize>,
    /// Sweep of `n` for offline.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Fixed width; overrides `beta_c`.
    pub beta: Option<f64>,
    #[serde(default = "two")]
    pub beta_c: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub beta_rf: Option<f64>,
    pub beta_off: Option<f64>,
    #[serde(default = "one")]
    pub beta_rf_c: f64,
    #[serde(default = "one")]
    pub beta_off_c: f64,
    pub method: Option<OfflineMethod>,
    pub mu: Option<MuSpec>,
    pub suite: Option<String>,
}

fn two() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.05
}

impl Default for AlgorithmSpec {
    fn default() -> Self {
        Self {
            rounds: Vec::new(),
            n: Vec::new(),
            beta: None,
            beta_c: 2.0,
            delta: 0.05,
            beta_rf: None,
            beta_off: None,
            beta_rf_c: 1.0,
            beta_off_c: 1.0,
            method: None,
            mu: None,
            suite: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    #[serde(default)]
    pub svg: bool,
    /// Write one CSV per run (aggregate JSON is always written).
    #[serde(default = "yes")]
    pub per_run: bool,
}

fn yes() -> bool {
    true
}

/// Declared checks; the process exits nonzero if any fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Assertion {
    /// `median(m(large)) < max_ratio * median(m(small))`, with `m` divided by
    /// the sweep value when `normalize` is set.
    Ratio {
        small: usize,
        large: usize,
        max_ratio: f64,
        #[serde(default)]
        normalize: bool,
    },
    /// Log-log slope of the median metric against the sweep value.
    Exponent { min: Option<f64>, max: Option<f64> },
    /// Median metric at one sweep value is at least `min`.
    MedianAtLeast { at: usize, min: f64 },
    /// Fraction of golf runs with `Q*` in every confidence set.
    FstarFraction { min: f64 },
    /// Cumulative regret never decreases.
    MonotoneRegret,
    /// Every row of the claims ledger passes.
    ClaimsPass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub instance: InstanceSpec,
    #[serde(default)]
    pub algorithm: AlgorithmSpec,
    pub output: OutputSpec,
    #[serde(default, rename = "assert")]
    pub assertions: Vec<Assertion>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Loads a config; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.instance.mdp);
        fix(&mut self.instance.family);
        fix(&mut self.instance.gfamily);
        fix(&mut self.instance.reward);
        if let Some(MuSpec::File(p)) = self.algorithm.mu.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if self.output.dir.is_relative() {
            self.output.dir = base.join(&self.output.dir);
        }
    }

    fn check(&self) -> Result<()> {
        let need_seeds = !matches!(self.kind, ExperimentKind::Claims);
        if need_seeds && self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must list at least one seed".into()));
        }
        match self.kind {
            ExperimentKind::Golf | ExperimentKind::RewardFree if self.algorithm.rounds.is_empty() => {
                Err(Error::Config("`algorithm.rounds` must list at least one T".into()))
            }
            ExperimentKind::Offline if self.algorithm.n.is_empty() => {
                Err(Error::Config("`algorithm.n` must list at least one sample size".into()))
            }
            ExperimentKind::Claims if self.algorithm.suite.is_none() => {
                Err(Error::Config("`algorithm.suite` is required for claims runs".into()))
            }
            _ => {
                let has_source = self.instance.construction.is_some() || self.instance.mdp.is_some();
                if need_seeds && !has_source {
                    return Err(Error::Config("`instance` needs `construction` or `mdp`".into()));
                }
                Ok(())
            }
        }
    }

    /// Values of the sweep axis.
    pub fn axis(&self) -> &[usize] {
        match self.kind {
            ExperimentKind::Offline => &self.algorithm.n,
            _ => &self.algorithm.rounds,
        }
    }
}
