//! Attack strategies, their inference functions, and run classification.

mod average;
mod max;
mod sneak;
mod triangulation;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::AlgorithmError;
use crate::numerics::{LinalgError, Rational};
use crate::protocol::{
    extract, AgentId, LabeledPoint, PayloadError, Point, Run, Strategy, Truthful, UpdateKind, UpdatePayload,
};

pub use average::{average_infer, average_infer_history, AverageDoubleProbe, AverageInference};
pub use max::{max_infer, MaxEchoAttack, MaxOverbid};
pub use sneak::{
    kcenter_sneak_params, lr_sneak_params, resync_moments, sneak_attack_ended, sneak_attack_started, SneakAttack,
    SneakParams,
};
pub use triangulation::{
    deflection_point, probe_point, triangulation_infer, triangulation_infer_history, triangulation_states,
    InferenceResult, TriangulationAttack, TriangulationState,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error("invalid strategy parameters: {0}")]
    Param(String),
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
}

impl From<LinalgError> for StrategyError {
    fn from(e: LinalgError) -> Self {
        StrategyError::Algorithm(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunClass {
    ExplicitlyLying,
    Omission,
    Truthlike,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Item {
    Point(Point),
    Labeled(LabeledPoint),
    Scalar(Rational),
}

fn items(payloads: &[UpdatePayload]) -> BTreeSet<Item> {
    let mut out = BTreeSet::new();
    for p in payloads {
        match p {
            UpdatePayload::Scalar(v) => {
                out.insert(Item::Scalar(v.clone()));
            }
            UpdatePayload::PointSet(s) => out.extend(s.iter().cloned().map(Item::Point)),
            UpdatePayload::LabeledMultiset(rows) => out.extend(rows.iter().cloned().map(Item::Labeled)),
            UpdatePayload::Empty => {}
        }
    }
    out
}

/// Classifies agent `j`'s behaviour in `run` against the truthful run on the
/// same input. For labeled data a point is a whole (x, y) row.
pub fn classify_strategy_run(run: &Run, truth_run: &Run, j: AgentId) -> RunClass {
    let factual = items(&extract(run, Some(j), UpdateKind::Factual));
    let ledger = items(&extract(run, Some(j), UpdateKind::Ledger));
    if !ledger.is_subset(&factual) {
        return RunClass::ExplicitlyLying;
    }
    if run.final_output() != truth_run.final_output() {
        RunClass::Omission
    } else {
        RunClass::Truthlike
    }
}

/// Registered strategies as they appear in scenario files, e.g.
/// `{"strategy":"kcenter_sneak","k":3,"eps":"1/1000"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Truthful,
    AverageDoubleProbe,
    MaxEcho,
    MaxOverbid { x: Rational },
    KcenterSneak { k: usize, eps: Rational },
    LrSneak,
    Triangulation { d: usize },
    Sneak(SneakParams),
}

impl StrategySpec {
    pub fn build(&self) -> Result<Arc<dyn Strategy>, StrategyError> {
        Ok(match self {
            StrategySpec::Truthful => Arc::new(Truthful),
            StrategySpec::AverageDoubleProbe => Arc::new(AverageDoubleProbe),
            StrategySpec::MaxEcho => Arc::new(MaxEchoAttack),
            StrategySpec::MaxOverbid { x } => Arc::new(MaxOverbid { x: x.clone() }),
            StrategySpec::KcenterSneak { k, eps } => {
                Arc::new(SneakAttack::labeled(kcenter_sneak_params(*k, eps)?, "kcenter_sneak")?)
            }
            StrategySpec::LrSneak => Arc::new(SneakAttack::labeled(lr_sneak_params(), "lr_sneak")?),
            StrategySpec::Triangulation { d } => {
                if *d == 0 {
                    return Err(StrategyError::Param("triangulation needs d >= 1".into()));
                }
                Arc::new(TriangulationAttack { d: *d })
            }
            StrategySpec::Sneak(p) => Arc::new(SneakAttack::new(p.clone())?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::Truthful => "truthful",
            StrategySpec::AverageDoubleProbe => "average_double_probe",
            StrategySpec::MaxEcho => "max_echo",
            StrategySpec::MaxOverbid { .. } => "max_overbid",
            StrategySpec::KcenterSneak { .. } => "kcenter_sneak",
            StrategySpec::LrSneak => "lr_sneak",
            StrategySpec::Triangulation { .. } => "triangulation",
            StrategySpec::Sneak(_) => "sneak",
        }
    }
}
