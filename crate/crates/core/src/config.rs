//! Experiment configuration files (TOML).
//!
//! ```toml
//! algorithms = ["bf_ucb", "ucb1", "mf_ucb", "gef_ucb"]
//! delta = 0.01
//!
//! [experiment]
//! horizon = 100000
//! runs = 20
//! seed = 7
//! checkpoints_per_decade = 16
//!
//! [instance]
//! preset = "low_arms"
//! regenerate_per_run = true
//!
//! [fairness]
//! beta = ["0.4", "0.4"]
//!
//! [merit]
//! kind = "identity"
//! merit_floor = 0.001
//! ```
//!
//! Every table rejects unknown keys.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confreg::OptimizerConfig;
use crate::env::{validate_instance, BanditInstance, GeneratorSpec, RewardKind};
use crate::fairness::FairnessConfig;
use crate::merit::{MeritKind, MeritSpec, DEFAULT_MERIT_FLOOR};
use crate::policies::{Algorithm, DEFAULT_DELTA};
use crate::runner::{InstanceSource, RunConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    /// The text is not a well-formed config; the message carries the location.
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Constraint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub experiment: ExperimentSection,
    pub instance: InstanceSection,
    pub fairness: FairnessSection,
    #[serde(default)]
    pub merit: MeritSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn all_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub horizon: u64,
    #[serde(default = "one")]
    pub runs: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_density")]
    pub checkpoints_per_decade: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_checkpoints: Vec<u64>,
    /// Also run UCB1 to report rewards relative to it.
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn one() -> u64 {
    1
}

fn default_density() -> u32 {
    16
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    LowArms,
    HighArms,
}

/// Exactly one of `preset`, `generator`, or `means` + `groups`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
    /// Defaults to true for generated instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regenerate_per_run: Option<bool>,
    /// Overrides the reward distribution of presets and explicit instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_kind: Option<RewardKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessSection {
    pub beta: Vec<String>,
    /// Further β settings; each one reruns every algorithm.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeritName {
    Identity,
    Affine,
    Power,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeritParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeritSection {
    pub kind: MeritName,
    #[serde(default, skip_serializing_if = "is_default_params")]
    pub params: MeritParams,
    #[serde(default = "default_floor")]
    pub merit_floor: f64,
}

fn is_default_params(p: &MeritParams) -> bool {
    *p == MeritParams::default()
}

fn default_floor() -> f64 {
    DEFAULT_MERIT_FLOOR
}

impl Default for MeritSection {
    fn default() -> Self {
        MeritSection {
            kind: MeritName::Identity,
            params: MeritParams::default(),
            merit_floor: DEFAULT_MERIT_FLOOR,
        }
    }
}

impl MeritSection {
    pub fn spec(&self) -> Result<MeritSpec, String> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("merit kind {:?} needs params.{name}", self.kind));
        let p = &self.params;
        let kind = match self.kind {
            MeritName::Identity => {
                if *p != MeritParams::default() {
                    return Err("merit kind identity takes no params".into());
                }
                MeritKind::Identity
            }
            MeritName::Affine => MeritKind::Affine {
                a: need(p.a, "a")?,
                b: need(p.b, "b")?,
            },
            MeritName::Power => MeritKind::Power { p: need(p.p, "p")? },
        };
        MeritSpec::new(kind, self.merit_floor, 1.0).map_err(|e| e.to_string())
    }
}

/// Outcome of one named constraint check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

/// A run configuration plus the β label used to tell sweep entries apart.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub beta_label: Option<String>,
    pub config: RunConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn instance_source(&self) -> Result<InstanceSource, String> {
        let inst = &self.instance;
        let explicit = inst.means.is_some() || inst.groups.is_some();
        let sources = [inst.preset.is_some(), inst.generator.is_some(), explicit]
            .iter()
            .filter(|&&b| b)
            .count();
        if sources != 1 {
            return Err("instance needs exactly one of preset, generator, or means + groups".into());
        }
        let regenerate = inst.regenerate_per_run.unwrap_or(true);
        let generated = |mut spec: GeneratorSpec| {
            if let Some(kind) = inst.reward_kind {
                spec.reward_kind = kind;
            }
            InstanceSource::Generated {
                spec,
                regenerate_per_run: regenerate,
            }
        };
        match (inst.preset, &inst.generator) {
            (Some(Preset::LowArms), _) => Ok(generated(GeneratorSpec::low_arms())),
            (Some(Preset::HighArms), _) => Ok(generated(GeneratorSpec::high_arms())),
            (None, Some(spec)) => Ok(generated(spec.clone())),
            (None, None) => {
                if inst.regenerate_per_run == Some(true) {
                    return Err("an explicit instance cannot be regenerated per run".into());
                }
                let (Some(means), Some(groups)) = (&inst.means, &inst.groups) else {
                    return Err("an explicit instance needs both means and groups".into());
                };
                let fixed = BanditInstance {
                    means: means.clone(),
                    groups: crate::env::GroupPartition::new(groups.clone()),
                    reward_kind: inst.reward_kind.unwrap_or_default(),
                    generator_seed: None,
                };
                let report = validate_instance(&fixed);
                if report.is_ok() {
                    Ok(InstanceSource::Fixed(fixed))
                } else {
                    Err(report.to_string())
                }
            }
        }
    }

    /// True when the instance changes from run to run.
    pub fn regenerates(&self) -> bool {
        matches!(
            self.instance_source(),
            Ok(InstanceSource::Generated {
                regenerate_per_run: true,
                ..
            })
        )
    }

    /// Every constraint check, in a fixed order.
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        let source = self.instance_source();
        let sizes: Option<Vec<usize>> = match &source {
            Ok(InstanceSource::Fixed(inst)) => Some(inst.groups.groups().iter().map(Vec::len).collect()),
            Ok(InstanceSource::Generated { spec, .. }) => match spec.check() {
                Ok(()) => Some(spec.sizes.clone()),
                Err(_) => None,
            },
            Err(_) => None,
        };
        out.push(Check {
            name: "instance",
            outcome: match &source {
                Ok(InstanceSource::Generated { spec, .. }) => spec.check().map_err(|e| e.to_string()),
                Ok(InstanceSource::Fixed(_)) => Ok(()),
                Err(e) => Err(e.clone()),
            },
        });
        let mut betas = vec![&self.fairness.beta];
        betas.extend(self.fairness.sweep.iter());
        for beta in betas {
            let outcome = FairnessConfig::parse(beta).map_err(|e| e.to_string()).and_then(|f| match &sizes {
                Some(s) => f.for_groups(s.len()).map(|_| ()).map_err(|e| e.to_string()),
                None => Ok(()),
            });
            out.push(Check {
                name: "fairness.beta",
                outcome,
            });
        }
        out.push(Check {
            name: "merit",
            outcome: self.merit.spec().map(|_| ()),
        });
        out.push(Check {
            name: "delta",
            outcome: if self.delta > 0.0 && self.delta < 1.0 {
                Ok(())
            } else {
                Err(format!("delta = {} must lie in (0, 1)", self.delta))
            },
        });
        let o = &self.optimizer;
        out.push(Check {
            name: "optimizer",
            outcome: if o.grid < 2 {
                Err(format!("grid = {} must be at least 2", o.grid))
            } else if o.sweeps < 1 {
                Err("sweeps must be at least 1".into())
            } else if !(o.tol >= 0.0) {
                Err(format!("tol = {} must be >= 0", o.tol))
            } else {
                Ok(())
            },
        });
        let e = &self.experiment;
        let t_init = sizes
            .as_ref()
            .map_or(0, |s| (s.len() * s.iter().copied().max().unwrap_or(0)) as u64);
        out.push(Check {
            name: "experiment",
            outcome: if e.runs < 1 {
                Err("runs must be >= 1".into())
            } else if e.horizon < t_init {
                Err(format!(
                    "horizon {} is shorter than the initialization phase ({t_init})",
                    e.horizon
                ))
            } else {
                Ok(())
            },
        });
        out.push(Check {
            name: "algorithms",
            outcome: if self.algorithms.is_empty() {
                Err("no algorithms selected".into())
            } else {
                Ok(())
            },
        });
        out
    }

    /// One run configuration per β setting.
    pub fn resolve(&self) -> Result<Vec<ResolvedRun>, ConfigError> {
        let failures: Vec<String> = self
            .checks()
            .into_iter()
            .filter_map(|c| c.outcome.err().map(|e| format!("{}: {e}", c.name)))
            .collect();
        if !failures.is_empty() {
            return Err(ConfigError::Constraint(failures.join("; ")));
        }
        let instance = self.instance_source().map_err(ConfigError::Constraint)?;
        let merit = self.merit.spec().map_err(ConfigError::Constraint)?;
        let sweeping = !self.fairness.sweep.is_empty();
        let mut betas = vec![&self.fairness.beta];
        betas.extend(self.fairness.sweep.iter());
        betas
            .into_iter()
            .map(|beta| {
                let config = RunConfig {
                    horizon: self.experiment.horizon,
                    runs: self.experiment.runs,
                    seed: self.experiment.seed,
                    checkpoints_per_decade: self.experiment.checkpoints_per_decade,
                    extra_checkpoints: self.experiment.extra_checkpoints.clone(),
                    algorithms: self.algorithms.clone(),
                    instance: instance.clone(),
                    beta: FairnessConfig::parse(beta).map_err(|e| ConfigError::Constraint(e.to_string()))?,
                    merit,
                    delta: self.delta,
                    optimizer: self.optimizer,
                    normalize: self.experiment.normalize,
                };
                config
                    .validate()
                    .map_err(|e| ConfigError::Constraint(e.to_string()))?;
                Ok(ResolvedRun {
                    beta_label: sweeping.then(|| beta.join(";")),
                    config,
                })
            })
            .collect()
    }
}
