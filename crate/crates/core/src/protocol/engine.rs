use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{AgentId, Message, NatureInput, ObservedHistory, ProtocolKind, Run, UpdatePayload};
use crate::algorithms::{Algorithm, AlgorithmError, AlgorithmOutput};

pub const DEFAULT_SAFETY_CAP: usize = 10_000;
pub const SAFETY_CAP_ENV: &str = "EXCLUSIM_SAFETY_CAP";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("nature element {element} exceeded the safety cap of {cap} loop iterations")]
    SafetyCapExceeded { element: usize, cap: usize },
    #[error("malformed nature input: {0}")]
    Input(String),
    #[error("agent {agent} is outside 1..={n}")]
    UnknownAgent { agent: AgentId, n: usize },
    #[error("ell must be at least 1")]
    ZeroEll,
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
}

/// Maps an observed history to an optional ledger update.
///
/// Implementations must be pure: equal histories give equal answers.
pub trait Strategy: Send + Sync {
    fn respond(&self, history: &ObservedHistory) -> Option<UpdatePayload>;

    fn name(&self) -> String;
}

impl fmt::Debug for dyn Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Strategy({})", self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Truthful;

impl Strategy for Truthful {
    fn respond(&self, history: &ObservedHistory) -> Option<UpdatePayload> {
        match history.last() {
            Some(Message::Factual { agent, payload }) if *agent == history.owner => Some(payload.clone()),
            _ => None,
        }
    }

    fn name(&self) -> String {
        "truthful".into()
    }
}

pub fn truthful_strategy() -> Arc<dyn Strategy> {
    Arc::new(Truthful)
}

/// Per-agent strategy assignment; agents without an override play truthfully.
#[derive(Clone)]
pub struct Profile {
    n: usize,
    overrides: BTreeMap<AgentId, Arc<dyn Strategy>>,
}

impl Profile {
    pub fn truthful(n: usize) -> Self {
        Profile {
            n,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with(mut self, j: AgentId, strategy: Arc<dyn Strategy>) -> Self {
        self.overrides.insert(j, strategy);
        self
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn respond(&self, history: &ObservedHistory) -> Option<UpdatePayload> {
        match self.overrides.get(&history.owner) {
            Some(s) => s.respond(history),
            None => Truthful.respond(history),
        }
    }

    pub fn strategy_name(&self, j: AgentId) -> String {
        self.overrides
            .get(&j)
            .map_or_else(|| "truthful".to_string(), |s| s.name())
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("n", &self.n)
            .field("overrides", &self.overrides.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// Reads the continuous-loop cap from the environment, falling back to the default.
pub fn safety_cap_from_env() -> usize {
    std::env::var(SAFETY_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&v: &usize| v > 0)
        .unwrap_or(DEFAULT_SAFETY_CAP)
}

struct Recorder<'a> {
    messages: Vec<Message>,
    histories: Vec<ObservedHistory>,
    ledger: Vec<UpdatePayload>,
    algorithm: &'a Algorithm,
    streak: Option<(AgentId, usize)>,
}

impl<'a> Recorder<'a> {
    fn new(n: usize, algorithm: &'a Algorithm) -> Self {
        Recorder {
            messages: Vec::new(),
            histories: (1..=n).map(|i| ObservedHistory::empty(AgentId(i))).collect(),
            ledger: Vec::new(),
            algorithm,
            streak: None,
        }
    }

    fn push(&mut self, message: Message) {
        for h in &mut self.histories {
            h.observe(&message);
        }
        if let Message::Ledger { agent, payload } = &message {
            self.ledger.push(payload.clone());
            self.streak = match self.streak {
                Some((a, c)) if a == *agent => Some((a, c + 1)),
                _ => Some((*agent, 1)),
            };
        }
        self.messages.push(message);
    }

    fn broadcast(&mut self) -> Result<(), ProtocolError> {
        let output = if self.ledger.is_empty() {
            AlgorithmOutput::Null
        } else {
            self.algorithm.evaluate(&self.ledger)?
        };
        self.push(Message::Broadcast { output });
        Ok(())
    }

    fn blocked(&self, agent: AgentId, ell: usize) -> bool {
        matches!(self.streak, Some((a, c)) if a == agent && c >= ell)
    }

    fn history(&self, agent: AgentId) -> &ObservedHistory {
        &self.histories[agent.0 - 1]
    }
}

fn check_agents(input: &NatureInput, n: usize) -> Result<(), ProtocolError> {
    for e in &input.elements {
        if e.agent.0 == 0 || e.agent.0 > n {
            return Err(ProtocolError::UnknownAgent { agent: e.agent, n });
        }
    }
    Ok(())
}

/// Checks the continuous-mode shape of a nature input.
pub fn validate_continuous_input(input: &NatureInput, n: usize) -> Result<(), ProtocolError> {
    check_agents(input, n)?;
    if let Some(pos) = input.elements.iter().position(|e| e.round.is_some()) {
        return Err(ProtocolError::Input(format!(
            "element {} carries a round in continuous mode",
            pos + 1
        )));
    }
    Ok(())
}

/// Checks round numbering: present, positive, non-decreasing, and at
/// most one element per (agent, round).
pub fn validate_periodic_input(input: &NatureInput, n: usize) -> Result<(), ProtocolError> {
    check_agents(input, n)?;
    let mut seen = BTreeSet::new();
    let mut previous = 0u32;
    for (idx, e) in input.elements.iter().enumerate() {
        let Some(r) = e.round else {
            return Err(ProtocolError::Input(format!(
                "element {} has no round in periodic mode",
                idx + 1
            )));
        };
        if r == 0 {
            return Err(ProtocolError::Input(format!("element {} has round 0", idx + 1)));
        }
        if r < previous {
            return Err(ProtocolError::Input(format!(
                "element {} has round {r} after round {previous}",
                idx + 1
            )));
        }
        if !seen.insert((e.agent, r)) {
            return Err(ProtocolError::Input(format!(
                "agent {} has two elements in round {r}",
                e.agent
            )));
        }
        previous = r;
    }
    Ok(())
}

pub fn run_continuous(
    input: &NatureInput,
    profile: &Profile,
    ell: usize,
    algorithm: &Algorithm,
) -> Result<Run, ProtocolError> {
    run_continuous_capped(input, profile, ell, algorithm, DEFAULT_SAFETY_CAP)
}

pub fn run_continuous_capped(
    input: &NatureInput,
    profile: &Profile,
    ell: usize,
    algorithm: &Algorithm,
    cap: usize,
) -> Result<Run, ProtocolError> {
    if ell == 0 {
        return Err(ProtocolError::ZeroEll);
    }
    let n = profile.agent_count();
    validate_continuous_input(input, n)?;
    let mut rec = Recorder::new(n, algorithm);

    for (idx, element) in input.elements.iter().enumerate() {
        rec.push(Message::Factual {
            agent: element.agent,
            payload: element.payload.clone(),
        });
        let mut passes = 0usize;
        let mut active = true;
        while active {
            active = false;
            passes += 1;
            if passes > cap {
                return Err(ProtocolError::SafetyCapExceeded { element: idx + 1, cap });
            }
            for i in 1..=n {
                let agent = AgentId(i);
                if rec.blocked(agent, ell) {
                    continue;
                }
                if let Some(payload) = profile.respond(rec.history(agent)) {
                    rec.push(Message::Ledger { agent, payload });
                    rec.broadcast()?;
                    active = true;
                }
            }
        }
    }

    Ok(Run {
        messages: rec.messages,
        agent_count: n,
        protocol: ProtocolKind::Continuous { ell },
    })
}

pub fn run_periodic(input: &NatureInput, profile: &Profile, algorithm: &Algorithm) -> Result<Run, ProtocolError> {
    let n = profile.agent_count();
    validate_periodic_input(input, n)?;
    let mut rec = Recorder::new(n, algorithm);
    let mut cursor = 0;

    for round in 1..=input.max_round() {
        while let Some(e) = input.elements.get(cursor) {
            if e.round != Some(round) {
                break;
            }
            rec.push(Message::Factual {
                agent: e.agent,
                payload: e.payload.clone(),
            });
            cursor += 1;
        }
        for i in 1..=n {
            let agent = AgentId(i);
            if let Some(payload) = profile.respond(rec.history(agent)) {
                rec.push(Message::Ledger { agent, payload });
            }
        }
        rec.broadcast()?;
    }

    Ok(Run {
        messages: rec.messages,
        agent_count: n,
        protocol: ProtocolKind::Periodic,
    })
}

/// Dispatches on the protocol kind.
pub fn execute(
    input: &NatureInput,
    profile: &Profile,
    protocol: ProtocolKind,
    algorithm: &Algorithm,
    cap: usize,
) -> Result<Run, ProtocolError> {
    match protocol {
        ProtocolKind::Continuous { ell } => run_continuous_capped(input, profile, ell, algorithm, cap),
        ProtocolKind::Periodic => run_periodic(input, profile, algorithm),
    }
}
