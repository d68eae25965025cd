use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    check_condition_i_star, find_confounding_pair, verify_inference, verify_witness, Case, ConfoundingWitness,
    HarnessError, Setting,
};
use crate::algorithms::AlgorithmOutput;
use crate::protocol::{AgentId, NatureInput, ObservedHistory, ProtocolKind, Strategy};
use crate::strategies::StrategyError;

pub type InferenceFn = Arc<dyn Fn(&ObservedHistory) -> Result<AlgorithmOutput, StrategyError> + Send + Sync>;

/// Ordered: a higher level implies every lower one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    NotDemonstrated,
    Vulnerable,
    VulnerableStar,
}

/// An attack together with the generated cases it is judged on.
#[derive(Clone)]
pub struct AttackSuite {
    pub attack: String,
    pub setting: Setting,
    pub strategy: Arc<dyn Strategy>,
    pub j: AgentId,
    pub cases: Vec<Case>,
    pub inference: Option<InferenceFn>,
    /// Inputs on which to look for a confounding pair.
    pub witness_bases: Vec<NatureInput>,
    pub witness_budget: usize,
    /// Human-readable description of the generator's limits.
    pub bound: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictReport {
    pub attack: String,
    pub algorithm: String,
    pub protocol: String,
    pub ell: Option<usize>,
    pub seeds: Vec<u64>,
    pub condition_i: bool,
    pub condition_i_star: bool,
    pub non_differing_seeds: Vec<u64>,
    pub inference_pass_rate: Option<f64>,
    pub inference_failing_seeds: Vec<u64>,
    pub witnesses: Vec<ConfoundingWitness>,
    pub max_ledger_streak: usize,
    pub bound: String,
    pub certification: Certification,
}

/// Runs conditions (i)/(i*), the inference check and the witness search,
/// then certifies: vulnerable needs a differing run, a 100% inference pass
/// rate and no witness; vulnerable* additionally needs every case to differ.
pub fn evaluate_suite(suite: &AttackSuite) -> Result<VerdictReport, HarnessError> {
    let star = check_condition_i_star(&suite.setting, &suite.strategy, suite.j, &suite.cases)?;
    let inference = match &suite.inference {
        Some(f) => Some(verify_inference(
            &suite.setting,
            &suite.strategy,
            suite.j,
            f.as_ref(),
            &suite.cases,
        )?),
        None => None,
    };
    let mut witnesses = Vec::new();
    for base in &suite.witness_bases {
        // Bases may name more agents than the suite's default setting.
        let agents = base
            .elements
            .iter()
            .map(|e| e.agent.0)
            .max()
            .unwrap_or(0)
            .max(suite.setting.agents);
        let setting = suite.setting.with_agents(agents);
        let found = find_confounding_pair(
            &setting,
            &suite.strategy,
            suite.j,
            std::slice::from_ref(base),
            suite.witness_budget,
        )?;
        if let Some(w) = found {
            if verify_witness(&setting, &suite.strategy, suite.j, &w)? {
                witnesses.push(w);
                break;
            }
        }
    }
    let condition_i = star.differing > 0;
    let inference_ok = inference.as_ref().is_some_and(|r| r.count > 0 && r.passed == r.count);
    let certification = if !witnesses.is_empty() || !condition_i || !inference_ok {
        Certification::NotDemonstrated
    } else if star.holds() {
        Certification::VulnerableStar
    } else {
        Certification::Vulnerable
    };
    let mut seeds: Vec<u64> = suite.cases.iter().map(|c| c.seed).collect();
    seeds.sort_unstable();
    Ok(VerdictReport {
        attack: suite.attack.clone(),
        algorithm: suite.setting.algorithm.describe(),
        protocol: suite.setting.protocol.name().to_string(),
        ell: suite.setting.protocol.ell(),
        seeds,
        condition_i,
        condition_i_star: star.holds(),
        non_differing_seeds: star.non_differing_seeds,
        inference_pass_rate: inference.as_ref().map(|r| r.pass_rate),
        inference_failing_seeds: inference.map(|r| r.failing_seeds).unwrap_or_default(),
        witnesses,
        max_ledger_streak: star.max_streak,
        bound: suite.bound.clone(),
        certification,
    })
}

/// A certification obtained at ℓ must not drop at ℓ + 1.
pub fn monotonicity_holds(suite: &AttackSuite) -> Result<bool, HarnessError> {
    let ProtocolKind::Continuous { ell } = suite.setting.protocol else {
        return Err(HarnessError::NotApplicable(
            "ell only exists in the continuous protocol".into(),
        ));
    };
    let at = evaluate_suite(suite)?.certification;
    let mut bumped = suite.clone();
    bumped.setting = suite.setting.with_protocol(ProtocolKind::Continuous { ell: ell + 1 });
    let next = evaluate_suite(&bumped)?.certification;
    Ok(next >= at)
}
