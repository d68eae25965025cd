//! Scenario files: a protocol, an algorithm, a strategy profile and a nature
//! input, stored as JSON with rationals written as `"p/q"` strings.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::algorithms::{collect_labeled, moments, Algorithm};
use crate::protocol::{
    execute, validate_continuous_input, validate_periodic_input, AgentId, NatureInput, Profile, ProtocolError,
    ProtocolKind, Run,
};
use crate::strategies::StrategySpec;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {path}: {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("{path}: precondition failed: {message}")]
    Precondition { path: String, message: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    Continuous,
    Periodic,
}

/// A strategy bound to an agent; serialized flat, e.g.
/// `{"agent": 2, "strategy": "kcenter_sneak", "k": 3, "eps": "1/1000"}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyAssignment {
    pub agent: usize,
    pub spec: StrategySpec,
}

impl Serialize for StrategyAssignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut value = serde_json::to_value(&self.spec).map_err(serde::ser::Error::custom)?;
        let map = value
            .as_object_mut()
            .ok_or_else(|| serde::ser::Error::custom("strategy spec is not an object"))?;
        map.insert("agent".into(), self.agent.into());
        value.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StrategyAssignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut map = serde_json::Map::deserialize(d)?;
        let agent = map.remove("agent").ok_or_else(|| D::Error::missing_field("agent"))?;
        let agent = serde_json::from_value(agent).map_err(D::Error::custom)?;
        let spec = serde_json::from_value(serde_json::Value::Object(map)).map_err(D::Error::custom)?;
        Ok(StrategyAssignment { agent, spec })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub protocol: ProtocolMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    pub algorithm: Algorithm,
    pub agents: usize,
    #[serde(default)]
    pub strategies: Vec<StrategyAssignment>,
    pub nature_input: NatureInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn protocol_kind(&self) -> ProtocolKind {
        match self.protocol {
            ProtocolMode::Continuous => ProtocolKind::Continuous {
                ell: self.ell.unwrap_or(0),
            },
            ProtocolMode::Periodic => ProtocolKind::Periodic,
        }
    }

    pub fn profile(&self) -> Result<Profile, ScenarioError> {
        let mut profile = Profile::truthful(self.agents);
        for (i, a) in self.strategies.iter().enumerate() {
            let strategy = a
                .spec
                .build()
                .map_err(|e| invalid(format!("strategies[{i}]"), e.to_string()))?;
            profile = profile.with(AgentId(a.agent), strategy);
        }
        Ok(profile)
    }

    pub fn run(&self, cap: usize) -> Result<Run, ScenarioError> {
        Ok(execute(
            &self.nature_input,
            &self.profile()?,
            self.protocol_kind(),
            &self.algorithm,
            cap,
        )?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.agents == 0 {
            return Err(invalid("agents", "need at least one agent"));
        }
        match (self.protocol, self.ell) {
            (ProtocolMode::Continuous, None) => return Err(invalid("ell", "continuous protocol needs ell")),
            (ProtocolMode::Continuous, Some(0)) => return Err(invalid("ell", "must be a positive integer")),
            (ProtocolMode::Periodic, Some(_)) => {
                return Err(invalid("ell", "only meaningful for the continuous protocol"))
            }
            _ => {}
        }
        self.validate_algorithm()?;
        self.validate_input()?;
        self.validate_strategies()
    }

    fn validate_algorithm(&self) -> Result<(), ScenarioError> {
        match self.algorithm {
            Algorithm::Kcenter { k: 0, .. } | Algorithm::Kmedian { k: 0, .. } => {
                Err(invalid("algorithm.k", "must be a positive integer"))
            }
            Algorithm::Dlr { d: 0 } => Err(invalid("algorithm.d", "must be a positive integer")),
            _ => Ok(()),
        }
    }

    fn validate_input(&self) -> Result<(), ScenarioError> {
        let shape = match self.protocol {
            ProtocolMode::Continuous => validate_continuous_input(&self.nature_input, self.agents),
            ProtocolMode::Periodic => validate_periodic_input(&self.nature_input, self.agents),
        };
        shape.map_err(|e| invalid("nature_input", e.to_string()))?;
        for (i, e) in self.nature_input.elements.iter().enumerate() {
            let path = format!("nature_input[{i}].payload");
            e.payload.validate().map_err(|err| invalid(&path, err.to_string()))?;
            self.algorithm
                .evaluate(std::slice::from_ref(&e.payload))
                .map_err(|err| invalid(&path, err.to_string()))?;
        }
        if let (Algorithm::Dlr { d }, Some(first)) = (&self.algorithm, self.nature_input.elements.first()) {
            let rows = collect_labeled(std::slice::from_ref(&first.payload))
                .map_err(|e| invalid("nature_input[0].payload", e.to_string()))?;
            let invertible = moments(&rows, *d)
                .ok()
                .and_then(|m| m.gram.determinant().ok())
                .is_some_and(|det| !det.is_zero());
            if !invertible {
                return Err(ScenarioError::Precondition {
                    path: "nature_input[0].payload".into(),
                    message: "the first update must make the Gram matrix invertible".into(),
                });
            }
        }
        Ok(())
    }

    fn validate_strategies(&self) -> Result<(), ScenarioError> {
        let mut seen = BTreeSet::new();
        for (i, a) in self.strategies.iter().enumerate() {
            let path = format!("strategies[{i}]");
            if a.agent == 0 || a.agent > self.agents {
                return Err(invalid(
                    format!("{path}.agent"),
                    format!("agent {} is outside 1..={}", a.agent, self.agents),
                ));
            }
            if !seen.insert(a.agent) {
                return Err(invalid(
                    format!("{path}.agent"),
                    format!("agent {} assigned twice", a.agent),
                ));
            }
            a.spec.build().map_err(|e| invalid(&path, e.to_string()))?;
            self.check_pairing(&path, &a.spec)?;
        }
        Ok(())
    }

    /// Strategies built for one algorithm only make sense against it.
    fn check_pairing(&self, path: &str, spec: &StrategySpec) -> Result<(), ScenarioError> {
        let wrong = |expected: &str| {
            Err(invalid(
                format!("{path}.strategy"),
                format!(
                    "{} requires algorithm {expected}, scenario uses {}",
                    spec.name(),
                    self.algorithm.describe()
                ),
            ))
        };
        match (spec, &self.algorithm) {
            (StrategySpec::AverageDoubleProbe, Algorithm::Average) => Ok(()),
            (StrategySpec::AverageDoubleProbe, _) => wrong("average"),
            (StrategySpec::MaxEcho | StrategySpec::MaxOverbid { .. }, Algorithm::Max) => Ok(()),
            (StrategySpec::MaxEcho | StrategySpec::MaxOverbid { .. }, _) => wrong("max"),
            (StrategySpec::KcenterSneak { k, .. }, Algorithm::Kcenter { k: ak, .. }) if k == ak => Ok(()),
            (StrategySpec::KcenterSneak { k, .. }, _) => wrong(&format!("kcenter with k={k}")),
            (StrategySpec::LrSneak, Algorithm::Dlr { d: 1 }) => Ok(()),
            (StrategySpec::LrSneak, _) => wrong("dlr with d=1"),
            (StrategySpec::Triangulation { d }, Algorithm::Dlr { d: ad }) if d == ad => match self.protocol_kind() {
                ProtocolKind::Continuous { ell } if ell >= d + 2 => Ok(()),
                ProtocolKind::Continuous { ell } => Err(ScenarioError::Precondition {
                    path: "ell".into(),
                    message: format!("triangulation with d={d} needs ell >= {}, got {ell}", d + 2),
                }),
                ProtocolKind::Periodic => Err(invalid("protocol", "triangulation runs in the continuous protocol")),
            },
            (StrategySpec::Triangulation { d }, _) => wrong(&format!("dlr with d={d}")),
            (StrategySpec::Truthful | StrategySpec::Sneak(_), _) => Ok(()),
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }
}

/// Parses and validates scenario JSON.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse {
            line: inner.line(),
            column: inner.column(),
            path,
            message: inner.to_string(),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}
