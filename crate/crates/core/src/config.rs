//! Scenario configuration: a strict TOML schema covering the RACH timing
//! constants, traffic mix, allocation policy, simulation controls, model
//! options, optimizer inputs and output selection. Unknown keys are
//! rejected and every constraint violation names the offending key.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::kmc::JaSuccessMode;
use crate::metrics::RetxLagMode;
use crate::traffic::ArrivalModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config constraint violated for `{key}`: {message}")]
    Constraint { key: String, message: String },
}

impl ConfigError {
    /// Machine-parseable error category.
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Io(_) => "io",
            ConfigError::Parse(e) => {
                let msg = e.to_string();
                if msg.contains("missing field") {
                    "missing-key"
                } else if msg.contains("invalid type") {
                    "type"
                } else {
                    "syntax"
                }
            }
            ConfigError::Constraint { .. } => "constraint",
        }
    }
}

fn constraint(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Constraint {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Scenario identifier echoed into reports; defaults to "scenario".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub time: TimeConfig,
    pub rach: RachConfig,
    pub traffic: TrafficConfig,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Activation horizon in ms.
    #[serde(rename = "T_ms")]
    pub horizon_ms: u64,
    /// Interval between consecutive RA slots in ms.
    pub delta_sf_ms: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RachConfig {
    /// Preambles per RA slot.
    #[serde(rename = "M")]
    pub preambles: u32,
    /// Maximum preamble transmissions before a UE is blocked.
    #[serde(rename = "W")]
    pub max_attempts: u32,
    #[serde(rename = "W_BO_ms")]
    pub backoff_window_ms: u32,
    #[serde(rename = "T_RAR_ms")]
    pub rar_delay_ms: u32,
    #[serde(rename = "W_RAR_ms")]
    pub rar_window_ms: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    pub m2m: M2mTrafficConfig,
    pub h2h: H2hTrafficConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum M2mKind {
    /// Uniform activations over the horizon.
    Type1,
    /// Beta-shaped activation burst.
    Type2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M2mTrafficConfig {
    #[serde(rename = "type")]
    pub kind: M2mKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub n_mtc: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct H2hTrafficConfig {
    /// Mean new H2H arrivals per RA slot. Exactly one of the two rate keys
    /// must be present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_per_slot: Option<f64>,
    /// Mean new H2H arrivals per second, converted by the slot interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_per_second: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Shared,
    Da,
    Ja,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// H2H preamble count under DA.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<u32>,
    /// Shared preamble count under JA.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_replications() -> usize {
    1
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            replications: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub ja_success_mode: JaSuccessMode,
    #[serde(default)]
    pub retx_lag: RetxLagMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerMode {
    Bound,
    Exact,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    /// M2M access-delay thresholds to solve for, in ms.
    pub phi_ms: Vec<f64>,
    #[serde(default)]
    pub mode: OptimizerMode,
    /// Multiply the Jensen ratio by the expected per-state delay.
    #[serde(default = "default_true")]
    pub include_state_delay: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Restrict which report files are written; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reports: Option<Vec<String>>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn scenario_id(&self) -> &str {
        self.id.as_deref().unwrap_or("scenario")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.time.delta_sf_ms == 0 {
            return Err(constraint("time.delta_sf_ms", "must be positive"));
        }
        if self.time.horizon_ms < u64::from(self.time.delta_sf_ms) {
            return Err(constraint(
                "time.T_ms",
                "horizon must cover at least one slot interval",
            ));
        }
        if self.rach.preambles == 0 {
            return Err(constraint("rach.M", "must satisfy M >= 1"));
        }
        if self.rach.max_attempts == 0 {
            return Err(constraint("rach.W", "must satisfy W >= 1"));
        }

        match self.traffic.m2m.kind {
            M2mKind::Type1 => {
                if self.traffic.m2m.alpha.is_some() || self.traffic.m2m.beta.is_some() {
                    return Err(constraint(
                        "traffic.m2m.alpha",
                        "shape parameters apply to type2 only",
                    ));
                }
            }
            M2mKind::Type2 => {
                let alpha = self.traffic.m2m.alpha.unwrap_or(3.0);
                let beta = self.traffic.m2m.beta.unwrap_or(4.0);
                if alpha <= 0.0 {
                    return Err(constraint("traffic.m2m.alpha", "must be positive"));
                }
                if beta <= 0.0 {
                    return Err(constraint("traffic.m2m.beta", "must be positive"));
                }
            }
        }

        match (
            self.traffic.h2h.lambda_per_slot,
            self.traffic.h2h.lambda_per_second,
        ) {
            (None, None) => {
                return Err(constraint(
                    "traffic.h2h",
                    "one of lambda_per_slot or lambda_per_second is required",
                ));
            }
            (Some(_), Some(_)) => {
                return Err(constraint(
                    "traffic.h2h",
                    "lambda_per_slot and lambda_per_second are mutually exclusive",
                ));
            }
            (Some(rate), None) | (None, Some(rate)) => {
                if rate < 0.0 {
                    return Err(constraint("traffic.h2h", "rate must be nonnegative"));
                }
            }
        }

        let m = self.rach.preambles;
        match self.policy.kind {
            PolicyKind::Shared => {
                if self.policy.a.is_some() || self.policy.x.is_some() {
                    return Err(constraint(
                        "policy",
                        "shared policy takes no split parameter",
                    ));
                }
            }
            PolicyKind::Da => {
                if self.policy.x.is_some() {
                    return Err(constraint("policy.x", "x applies to the ja policy only"));
                }
                let a = self
                    .policy
                    .a
                    .ok_or_else(|| constraint("policy.a", "required for the da policy"))?;
                if a == 0 || a >= m {
                    return Err(constraint("policy.a", format!("a must satisfy 0 < a < {m}")));
                }
            }
            PolicyKind::Ja => {
                if self.policy.a.is_some() {
                    return Err(constraint("policy.a", "a applies to the da policy only"));
                }
                let x = self
                    .policy
                    .x
                    .ok_or_else(|| constraint("policy.x", "required for the ja policy"))?;
                if x == 0 || x >= m {
                    return Err(constraint("policy.x", format!("x must satisfy 0 < x < {m}")));
                }
            }
        }

        if self.sim.replications == 0 {
            return Err(constraint("sim.replications", "must be at least 1"));
        }

        if let Some(optimizer) = &self.optimizer {
            if optimizer.phi_ms.is_empty() {
                return Err(constraint("optimizer.phi_ms", "list must not be empty"));
            }
            let rar_wait = f64::from(self.rach.rar_delay_ms + self.rach.rar_window_ms);
            for &phi in &optimizer.phi_ms {
                if !(phi > rar_wait) {
                    return Err(constraint(
                        "optimizer.phi_ms",
                        format!("threshold {phi} must exceed the RAR wait {rar_wait} ms"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// H2H mean arrivals per slot, after any per-second conversion.
    pub fn h2h_rate_per_slot(&self) -> f64 {
        match (
            self.traffic.h2h.lambda_per_slot,
            self.traffic.h2h.lambda_per_second,
        ) {
            (Some(rate), _) => rate,
            (None, Some(per_second)) => {
                per_second * f64::from(self.time.delta_sf_ms) / 1000.0
            }
            (None, None) => 0.0,
        }
    }

    pub fn m2m_model(&self) -> ArrivalModel {
        match self.traffic.m2m.kind {
            M2mKind::Type1 => ArrivalModel::M2mUniform {
                n_devices: self.traffic.m2m.n_mtc,
            },
            M2mKind::Type2 => ArrivalModel::M2mBeta {
                alpha: self.traffic.m2m.alpha.unwrap_or(3.0),
                beta: self.traffic.m2m.beta.unwrap_or(4.0),
                n_devices: self.traffic.m2m.n_mtc,
            },
        }
    }

    pub fn h2h_model(&self) -> ArrivalModel {
        ArrivalModel::H2hPoisson {
            rate_per_slot: self.h2h_rate_per_slot(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TABLE_JA: &str = r#"
id = "table1-ja"

[time]
T_ms = 10000
delta_sf_ms = 10

[rach]
M = 54
W = 10
W_BO_ms = 20
T_RAR_ms = 2
W_RAR_ms = 5

[traffic.m2m]
type = "type2"
alpha = 3.0
beta = 4.0
n_mtc = 5000

[traffic.h2h]
lambda_per_second = 0.5

[policy]
kind = "ja"
x = 10

[sim]
replications = 10
seed = 42
"#;

    #[test]
    fn table_values_round_trip() {
        let config = ScenarioConfig::from_toml_str(TABLE_JA).unwrap();
        assert_eq!(config.rach.preambles, 54);
        assert_eq!(config.rach.max_attempts, 10);
        assert_eq!(config.time.horizon_ms, 10_000);
        let echoed = ScenarioConfig::from_toml_str(&config.to_toml_string()).unwrap();
        assert_eq!(config, echoed);
    }

    #[test]
    fn per_second_rate_converts_by_slot_interval() {
        let config = ScenarioConfig::from_toml_str(TABLE_JA).unwrap();
        assert!((config.h2h_rate_per_slot() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn split_bounds_are_enforced() {
        let bad = TABLE_JA.replace("x = 10", "x = 54");
        let err = ScenarioConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(err.kind(), "constraint");
        assert!(err.to_string().contains("0 < x < 54"), "{err}");
    }

    #[test]
    fn missing_required_key_is_flagged() {
        let bad = TABLE_JA.replace("M = 54\n", "");
        let err = ScenarioConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(err.kind(), "missing-key");
        assert!(err.to_string().contains('M'), "{err}");
    }

    #[test]
    fn type_mismatch_is_flagged() {
        let bad = TABLE_JA.replace("M = 54", "M = \"many\"");
        let err = ScenarioConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(err.kind(), "type");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{TABLE_JA}\n[rach2]\nM = 3\n");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
        let bad = TABLE_JA.replace("W_BO_ms = 20", "W_BO_ms = 20\nbogus = 1");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn h2h_rate_keys_are_exclusive() {
        let bad = TABLE_JA.replace(
            "lambda_per_second = 0.5",
            "lambda_per_second = 0.5\nlambda_per_slot = 1.0",
        );
        let err = ScenarioConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(err.kind(), "constraint");
        let none = TABLE_JA.replace("lambda_per_second = 0.5", "");
        assert!(ScenarioConfig::from_toml_str(&none).is_err());
    }

    #[test]
    fn policy_parameters_match_kind() {
        let da_without_a = TABLE_JA
            .replace("kind = \"ja\"", "kind = \"da\"")
            .replace("x = 10", "");
        assert!(ScenarioConfig::from_toml_str(&da_without_a).is_err());
        let shared_with_x = TABLE_JA.replace("kind = \"ja\"", "kind = \"shared\"");
        assert!(ScenarioConfig::from_toml_str(&shared_with_x).is_err());
    }
}
