//! Paired-run checks of the vulnerability conditions, confounding-pair
//! witnesses, and the scenario generators that drive them.
//!
//! Condition (ii) quantifies over every nature input, so nothing here proves
//! it. A passing inference check over a generator suite is evidence for a
//! vulnerability claim; a confounding witness is a refutation of (ii).

mod confounders;
mod forceable;
pub mod generators;
mod report;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{Algorithm, AlgorithmError, AlgorithmOutput};
use crate::protocol::{
    execute, observed_history, AgentId, NatureElement, NatureInput, ObservedHistory, PayloadError, Profile,
    ProtocolError, ProtocolKind, Run, Strategy, UpdatePayload, DEFAULT_SAFETY_CAP,
};
use crate::strategies::StrategyError;

pub use confounders::{
    explicit_lie_witness, find_confounding_pair, max_overbid_pair, periodic_lambda_confounder,
    periodic_omission_witness,
};
pub use forceable::{forceable_winner_set, kmedian_scale, ForceKind};
pub use report::{evaluate_suite, monotonicity_holds, AttackSuite, Certification, InferenceFn, VerdictReport};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum HarnessError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error("invalid parameters: {0}")]
    Param(String),
    #[error("construction not applicable: {0}")]
    NotApplicable(String),
}

/// Algorithm, protocol and agent count shared by the runs of a check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setting {
    pub algorithm: Algorithm,
    pub protocol: ProtocolKind,
    pub agents: usize,
    pub safety_cap: usize,
}

impl Setting {
    pub fn new(algorithm: Algorithm, protocol: ProtocolKind, agents: usize) -> Self {
        Setting {
            algorithm,
            protocol,
            agents,
            safety_cap: DEFAULT_SAFETY_CAP,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.safety_cap = cap;
        self
    }

    pub fn with_agents(&self, agents: usize) -> Self {
        Setting { agents, ..self.clone() }
    }

    pub fn with_protocol(&self, protocol: ProtocolKind) -> Self {
        Setting {
            protocol,
            ..self.clone()
        }
    }

    /// Runs `input` with `strategy` for `j` (if any) and everyone else truthful.
    pub fn run(
        &self,
        input: &NatureInput,
        deviation: Option<(AgentId, &Arc<dyn Strategy>)>,
    ) -> Result<Run, HarnessError> {
        let mut profile = Profile::truthful(self.agents);
        if let Some((j, s)) = deviation {
            profile = profile.with(j, Arc::clone(s));
        }
        Ok(execute(
            input,
            &profile,
            self.protocol,
            &self.algorithm,
            self.safety_cap,
        )?)
    }

    /// (run under s_j, run under truth_j).
    pub fn paired_runs(
        &self,
        strategy: &Arc<dyn Strategy>,
        j: AgentId,
        input: &NatureInput,
    ) -> Result<(Run, Run), HarnessError> {
        Ok((self.run(input, Some((j, strategy)))?, self.run(input, None)?))
    }
}

/// One generated scenario. `agents` overrides the setting's agent count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub seed: u64,
    pub agents: usize,
    pub input: NatureInput,
}

fn final_of(run: &Run) -> AlgorithmOutput {
    run.final_output().cloned().unwrap_or(AlgorithmOutput::Null)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairedVerdict {
    pub attack_final: AlgorithmOutput,
    pub truth_final: AlgorithmOutput,
    pub differs: bool,
    #[serde(skip)]
    pub run_attack: Run,
    #[serde(skip)]
    pub run_truth: Run,
}

/// Condition (i) on one input: do the final broadcasts differ?
pub fn check_condition_i(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    input: &NatureInput,
) -> Result<PairedVerdict, HarnessError> {
    let (run_attack, run_truth) = setting.paired_runs(strategy, j, input)?;
    let attack_final = final_of(&run_attack);
    let truth_final = final_of(&run_truth);
    Ok(PairedVerdict {
        differs: attack_final != truth_final,
        attack_final,
        truth_final,
        run_attack,
        run_truth,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionStarReport {
    pub count: usize,
    pub differing: usize,
    pub non_differing_seeds: Vec<u64>,
    /// Longest single-agent ledger streak seen in any attack run.
    pub max_streak: usize,
}

impl ConditionStarReport {
    pub fn holds(&self) -> bool {
        self.count > 0 && self.differing == self.count
    }
}

/// Condition (i) over every case; (i*) on the suite holds iff all differ.
pub fn check_condition_i_star(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    cases: &[Case],
) -> Result<ConditionStarReport, HarnessError> {
    let mut report = ConditionStarReport {
        count: cases.len(),
        differing: 0,
        non_differing_seeds: Vec::new(),
        max_streak: 0,
    };
    for case in cases {
        let v = check_condition_i(&setting.with_agents(case.agents), strategy, j, &case.input)?;
        report.max_streak = report.max_streak.max(v.run_attack.max_ledger_streak());
        if v.differs {
            report.differing += 1;
        } else {
            report.non_differing_seeds.push(case.seed);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceReport {
    pub count: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub failing_seeds: Vec<u64>,
}

/// Checks `inference(O_j under s_j)` against the truth-run final output on every case.
pub fn verify_inference(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    inference: &dyn Fn(&ObservedHistory) -> Result<AlgorithmOutput, StrategyError>,
    cases: &[Case],
) -> Result<InferenceReport, HarnessError> {
    let mut passed = 0;
    let mut failing_seeds = Vec::new();
    for case in cases {
        let (attack, truth) = setting.with_agents(case.agents).paired_runs(strategy, j, &case.input)?;
        let inferred = inference(&observed_history(&attack, j));
        if inferred.as_ref() == Ok(&final_of(&truth)) {
            passed += 1;
        } else {
            failing_seeds.push(case.seed);
        }
    }
    let count = cases.len();
    Ok(InferenceReport {
        count,
        passed,
        pass_rate: if count == 0 { 0.0 } else { passed as f64 / count as f64 },
        failing_seeds,
    })
}

/// Two inputs and how agent j's observed histories compare under s_j and truth_j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfoundingWitness {
    pub construction: String,
    pub input_a: NatureInput,
    pub input_b: NatureInput,
    pub observed_equal_under_attack: bool,
    pub observed_equal_under_truth: bool,
}

impl ConfoundingWitness {
    /// Same attacker view, different truthful view: condition (ii) fails.
    pub fn is_valid(&self) -> bool {
        self.observed_equal_under_attack && !self.observed_equal_under_truth
    }
}

/// Simulates both inputs under s_j and truth_j and records the comparisons.
pub fn compare_inputs(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    construction: &str,
    input_a: NatureInput,
    input_b: NatureInput,
) -> Result<ConfoundingWitness, HarnessError> {
    let (attack_a, truth_a) = setting.paired_runs(strategy, j, &input_a)?;
    let (attack_b, truth_b) = setting.paired_runs(strategy, j, &input_b)?;
    Ok(ConfoundingWitness {
        construction: construction.to_string(),
        observed_equal_under_attack: observed_history(&attack_a, j) == observed_history(&attack_b, j),
        observed_equal_under_truth: observed_history(&truth_a, j) == observed_history(&truth_b, j),
        input_a,
        input_b,
    })
}

/// Re-runs a witness from scratch; true iff it is still valid and the
/// recorded comparisons match.
pub fn verify_witness(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    w: &ConfoundingWitness,
) -> Result<bool, HarnessError> {
    let fresh = compare_inputs(
        setting,
        strategy,
        j,
        &w.construction,
        w.input_a.clone(),
        w.input_b.clone(),
    )?;
    Ok(fresh == *w && fresh.is_valid())
}

/// Smallest agent other than `j`.
fn other_agent(j: AgentId, n: usize) -> Result<AgentId, HarnessError> {
    (1..=n)
        .map(AgentId)
        .find(|a| *a != j)
        .ok_or_else(|| HarnessError::Param("constructions need a second agent".into()))
}

/// Continuous: appends `<i, payload>`. Periodic: adds it to the last round
/// for an agent i ≠ j without an element there, or merges it into the
/// element of the first such agent when all already have one.
fn extend_input(
    setting: &Setting,
    input: &NatureInput,
    j: AgentId,
    payload: UpdatePayload,
) -> Result<NatureInput, HarnessError> {
    let mut out = input.clone();
    match setting.protocol {
        ProtocolKind::Continuous { .. } => {
            let i = other_agent(j, setting.agents)?;
            out.elements.push(NatureElement::new(i.0, payload));
        }
        ProtocolKind::Periodic => {
            let round = input.max_round().max(1);
            let busy: Vec<AgentId> = input
                .elements
                .iter()
                .filter(|e| e.round == Some(round))
                .map(|e| e.agent)
                .collect();
            let free = (1..=setting.agents).map(AgentId).find(|a| *a != j && !busy.contains(a));
            match free {
                Some(i) => out.elements.push(NatureElement::in_round(i.0, payload, round)),
                None => {
                    let i = other_agent(j, setting.agents)?;
                    let e = out
                        .elements
                        .iter_mut()
                        .find(|e| e.round == Some(round) && e.agent == i)
                        .expect("busy agent has an element in the last round");
                    e.payload = e.payload.union(&payload)?;
                }
            }
        }
    }
    Ok(out)
}

/// Groups inputs by j's view under s_j and returns the first pair with equal
/// attack views but different truthful views.
fn first_confounded(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    construction: &str,
    inputs: Vec<NatureInput>,
) -> Result<Option<ConfoundingWitness>, HarnessError> {
    let mut groups: HashMap<ObservedHistory, Vec<(usize, ObservedHistory)>> = HashMap::new();
    for (idx, input) in inputs.iter().enumerate() {
        let (attack, truth) = setting.paired_runs(strategy, j, input)?;
        let o_truth = observed_history(&truth, j);
        let group = groups.entry(observed_history(&attack, j)).or_default();
        if let Some((first, _)) = group.iter().find(|(_, t)| *t != o_truth) {
            let w = compare_inputs(
                setting,
                strategy,
                j,
                construction,
                inputs[*first].clone(),
                input.clone(),
            )?;
            return Ok(Some(w));
        }
        group.push((idx, o_truth));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q;
    use crate::protocol::truthful_strategy;

    #[test]
    fn extend_periodic_merges_when_round_is_full() {
        let setting = Setting::new(Algorithm::Average, ProtocolKind::Periodic, 2);
        let input = NatureInput::new(vec![
            NatureElement::in_round(1, UpdatePayload::points_1d([q(1, 1)]), 1),
            NatureElement::in_round(2, UpdatePayload::points_1d([q(2, 1)]), 1),
        ]);
        let out = extend_input(&setting, &input, AgentId(2), UpdatePayload::points_1d([q(3, 1)])).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.elements[0].payload, UpdatePayload::points_1d([q(1, 1), q(3, 1)]));
        let single = NatureInput::new(vec![input.elements[0].clone()]);
        let out = extend_input(&setting, &single, AgentId(1), UpdatePayload::points_1d([q(3, 1)])).unwrap();
        assert_eq!(
            out.elements[1],
            NatureElement::in_round(2, UpdatePayload::points_1d([q(3, 1)]), 1)
        );
    }

    #[test]
    fn truthful_never_differs() {
        let setting = Setting::new(Algorithm::Max, ProtocolKind::Continuous { ell: 1 }, 2);
        let input = NatureInput::new(vec![
            NatureElement::new(2, UpdatePayload::Scalar(q(100, 1))),
            NatureElement::new(1, UpdatePayload::Scalar(q(110, 1))),
        ]);
        let v = check_condition_i(&setting, &truthful_strategy(), AgentId(1), &input).unwrap();
        assert!(!v.differs);
        assert_eq!(v.truth_final, AlgorithmOutput::Scalar(q(110, 1)));
    }
}
