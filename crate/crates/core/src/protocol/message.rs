use std::fmt;

use serde::{Deserialize, Serialize};

use super::UpdatePayload;
use crate::algorithms::AlgorithmOutput;

/// 1-based agent index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    Factual { agent: AgentId, payload: UpdatePayload },
    Ledger { agent: AgentId, payload: UpdatePayload },
    Broadcast { output: AlgorithmOutput },
}

impl Message {
    pub fn agent(&self) -> Option<AgentId> {
        match self {
            Message::Factual { agent, .. } | Message::Ledger { agent, .. } => Some(*agent),
            Message::Broadcast { .. } => None,
        }
    }

    pub fn is_factual_for(&self, j: AgentId) -> bool {
        matches!(self, Message::Factual { agent, .. } if *agent == j)
    }

    pub fn is_ledger_by(&self, j: AgentId) -> bool {
        matches!(self, Message::Ledger { agent, .. } if *agent == j)
    }

    pub fn as_broadcast(&self) -> Option<&AlgorithmOutput> {
        match self {
            Message::Broadcast { output } => Some(output),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NatureElement {
    pub agent: AgentId,
    pub payload: UpdatePayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
}

impl NatureElement {
    pub fn new(agent: usize, payload: UpdatePayload) -> Self {
        NatureElement {
            agent: AgentId(agent),
            payload,
            round: None,
        }
    }

    pub fn in_round(agent: usize, payload: UpdatePayload, round: u32) -> Self {
        NatureElement {
            agent: AgentId(agent),
            payload,
            round: Some(round),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NatureInput {
    pub elements: Vec<NatureElement>,
}

impl NatureInput {
    pub fn new(elements: Vec<NatureElement>) -> Self {
        NatureInput { elements }
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn max_round(&self) -> u32 {
        self.elements.iter().filter_map(|e| e.round).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ProtocolKind {
    Continuous { ell: usize },
    Periodic,
}

impl ProtocolKind {
    pub fn ell(&self) -> Option<usize> {
        match self {
            ProtocolKind::Continuous { ell } => Some(*ell),
            ProtocolKind::Periodic => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolKind::Continuous { .. } => "continuous",
            ProtocolKind::Periodic => "periodic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub messages: Vec<Message>,
    pub agent_count: usize,
    pub protocol: ProtocolKind,
}

impl Run {
    pub fn final_output(&self) -> Option<&AlgorithmOutput> {
        self.messages.iter().rev().find_map(Message::as_broadcast)
    }

    pub fn broadcasts(&self) -> impl Iterator<Item = &AlgorithmOutput> {
        self.messages.iter().filter_map(Message::as_broadcast)
    }

    pub fn ledger_count(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| matches!(m, Message::Ledger { .. }))
            .count()
    }

    /// Longest run of consecutive ledger updates by a single agent,
    /// looking only at ledger messages.
    pub fn max_ledger_streak(&self) -> usize {
        let mut best = 0;
        let mut current: Option<(AgentId, usize)> = None;
        for m in &self.messages {
            if let Message::Ledger { agent, .. } = m {
                current = match current {
                    Some((a, c)) if a == *agent => Some((a, c + 1)),
                    _ => Some((*agent, 1)),
                };
                best = best.max(current.map_or(0, |(_, c)| c));
            }
        }
        best
    }

    /// Every ledger update is immediately followed by a broadcast; in
    /// continuous runs the counts match as well.
    pub fn pairing_holds(&self) -> bool {
        let followed = self.messages.iter().enumerate().all(|(i, m)| {
            !matches!(m, Message::Ledger { .. })
                || matches!(
                    self.messages.get(i + 1),
                    Some(Message::Broadcast { .. }) | Some(Message::Ledger { .. })
                )
        });
        match self.protocol {
            ProtocolKind::Continuous { .. } => {
                let strictly = self.messages.iter().enumerate().all(|(i, m)| {
                    !matches!(m, Message::Ledger { .. })
                        || matches!(self.messages.get(i + 1), Some(Message::Broadcast { .. }))
                });
                strictly && self.broadcasts().count() == self.ledger_count()
            }
            ProtocolKind::Periodic => followed,
        }
    }
}
