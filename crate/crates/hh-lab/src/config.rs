//! Experiment configuration.
//!
//! A config is a JSON document validated against [`ExperimentConfig`]
//! before anything runs; unknown fields are rejected at every level.
//! `--override key.path=value` edits the document before validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use hh_core::agent::AgentMode;
use hh_core::error::{HhError, Result};
use hh_core::json::{prior_from_json, prior_from_schema, PriorJson};
use hh_core::mechanism::{LogDetail, MechanismConfig, ProbConstants, ProbOverrides};
use hh_core::num::{parse_rational, Prob};
use hh_core::prior::DiscretePrior;
use hh_core::instances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DetTheorem,
    ProbRun,
    Hygiene,
    OneStep,
    SimLemma,
    Distribution,
    Params,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PriorSpec {
    /// `micro-det-1` or `micro-stoch-1`.
    Builtin(String),
    /// Relative paths resolve against the config file's directory.
    Path(PathBuf),
    Inline(PriorJson),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    /// Half-open `start..end`.
    Range { start: u64, end: u64 },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, end } => (*start..*end).collect(),
        }
    }

    /// Parses `a..b` (half-open) or a single seed.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || HhError::InvalidInput(format!("seed range {text:?} is not of the form a..b"));
        match text.split_once("..") {
            Some((a, b)) => {
                let start = a.trim().parse().map_err(|_| bad())?;
                let end = b.trim().parse().map_err(|_| bad())?;
                if end <= start {
                    return Err(bad());
                }
                Ok(SeedSpec::Range { start, end })
            }
            None => Ok(SeedSpec::List(vec![text.trim().parse().map_err(|_| bad())?])),
        }
    }
}

/// Replaces individual mechanism parameters after they are computed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismOverrides {
    pub n_phase: Option<u64>,
    pub n_lrn: Option<u64>,
    /// Decimal or `a/b`.
    pub eps_pun: Option<String>,
    pub rho: Option<f64>,
    pub total_phases: Option<u64>,
}

impl MechanismOverrides {
    pub fn apply(&self, config: &mut MechanismConfig) -> Result<()> {
        if let Some(v) = self.n_phase {
            config.n_phase = v;
        }
        if let Some(v) = self.n_lrn {
            config.n_lrn = v;
        }
        if let Some(v) = &self.eps_pun {
            config.eps_pun =
                parse_rational(v).ok_or_else(|| HhError::InvalidInput(format!("eps_pun {v:?} is not a number")))?;
        }
        if let Some(v) = self.rho {
            config.rho = v;
        }
        if let Some(v) = self.total_phases {
            config.total_phases = v;
        }
        config.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbSettings {
    pub rho: f64,
    pub delta: f64,
    /// Replace the theorem's `n_lrn`; `n_phase` is then derived from exact
    /// `q_pun` unless also given.
    pub n_lrn: Option<u64>,
    pub q_pun: Option<f64>,
    pub r_alt: Option<f64>,
    pub n_phase: Option<u64>,
    pub total_phases: Option<u64>,
    /// Compute `q_pun` exactly on the instance instead of `f_min^{SAH}`.
    pub exact_q_pun: bool,
    /// Error levels used in the good-model predicate.
    pub good_eps_r: f64,
    pub good_eps_p: f64,
    pub constants: ProbConstants,
}

impl Default for ProbSettings {
    fn default() -> Self {
        ProbSettings {
            rho: 0.5,
            delta: 0.1,
            n_lrn: None,
            q_pun: None,
            r_alt: None,
            n_phase: None,
            total_phases: None,
            exact_q_pun: false,
            good_eps_r: 0.1,
            good_eps_p: 0.1,
            constants: ProbConstants::default(),
        }
    }
}

impl ProbSettings {
    pub fn overrides(&self) -> ProbOverrides {
        ProbOverrides {
            q_pun: self.q_pun,
            r_alt: self.r_alt,
            n_lrn: self.n_lrn,
            n_phase: self.n_phase,
            total_phases: self.total_phases,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    /// Phases enumerated by the oracle.
    pub phases: u64,
    /// First and last audited phase of the one-step suite.
    pub audit_phases: (u64, u64),
    /// `ρ0` of the target set; 1 recovers "visits an unexplored triple".
    pub rho0: f64,
    pub pairs: usize,
    pub pdl_pairs: usize,
    pub seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            phases: 2,
            audit_phases: (2, 2),
            rho0: 1.0,
            pairs: 200,
            pdl_pairs: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub n_lrn: Vec<u64>,
    pub phase_cap: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            n_lrn: vec![1, 4, 16, 64],
            phase_cap: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub prior: PriorSpec,
    #[serde(default = "default_agent")]
    pub agent: AgentMode,
    #[serde(default = "default_seeds")]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub mechanism: MechanismOverrides,
    #[serde(default)]
    pub prob: ProbSettings,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub log_detail: LogDetail,
    /// Audit each hallucination episode against `Π_ℓ` with this `ρ0`.
    #[serde(default)]
    pub audit_rho0: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_agent() -> AgentMode {
    AgentMode::CanonicalTruster
}

fn default_seeds() -> SeedSpec {
    SeedSpec::List(vec![0])
}

/// Sets `path` (dot-separated) in a JSON document; `value` is parsed as
/// JSON and falls back to a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HhError::InvalidInput(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| HhError::InvalidInput(format!("override {path:?}: {key:?} is not inside an object")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_value(doc: Value) -> Result<Self> {
        serde_json::from_value(doc).map_err(|e| HhError::InvalidInput(format!("config: {e}")))
    }

    /// Reads a config, or the config embedded in a run manifest.
    pub fn load(path: &Path, overrides: &[String]) -> Result<(Self, Option<u64>)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HhError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let mut doc: Value =
            serde_json::from_str(&text).map_err(|e| HhError::InvalidInput(format!("{}: {e}", path.display())))?;
        let mut seed = None;
        if doc.get("manifest_version").is_some() {
            seed = doc.get("seed").and_then(Value::as_u64);
            doc = doc
                .get("config")
                .cloned()
                .ok_or_else(|| HhError::InvalidInput("manifest without config".into()))?;
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut config = Self::from_value(doc)?;
        if let PriorSpec::Path(p) = &config.prior {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.prior = PriorSpec::Path(base.join(p));
            }
        }
        Ok((config, seed))
    }
}

impl PriorSpec {
    pub fn load<P: Prob>(&self) -> Result<DiscretePrior<P>> {
        match self {
            PriorSpec::Builtin(name) => instances::by_name(name)
                .ok_or_else(|| HhError::InvalidInput(format!("unknown built-in prior {name:?}"))),
            PriorSpec::Path(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| HhError::InvalidInput(format!("cannot read prior {}: {e}", p.display())))?;
                prior_from_json::<P>(&text)?.discrete()
            }
            PriorSpec::Inline(json) => prior_from_schema::<P>(json)?.discrete(),
        }
    }
}
