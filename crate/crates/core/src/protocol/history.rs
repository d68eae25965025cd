use serde::{Deserialize, Serialize};

use super::{AgentId, Message, Run, UpdatePayload};
use crate::algorithms::AlgorithmOutput;

/// Agent `owner`'s view of a run: its own factual deliveries, its own
/// ledger updates and every broadcast, in run order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservedHistory {
    pub owner: AgentId,
    pub items: Vec<Message>,
}

impl ObservedHistory {
    pub fn empty(owner: AgentId) -> Self {
        ObservedHistory {
            owner,
            items: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn last(&self) -> Option<&Message> {
        self.items.last()
    }

    pub fn sees(&self, message: &Message) -> bool {
        match message {
            Message::Factual { agent, .. } | Message::Ledger { agent, .. } => *agent == self.owner,
            Message::Broadcast { .. } => true,
        }
    }

    pub(crate) fn observe(&mut self, message: &Message) {
        if self.sees(message) {
            self.items.push(message.clone());
        }
    }

    /// Items `i1..=i2`, 1-based and inclusive. Out-of-range bounds are clamped.
    pub fn slice(&self, i1: usize, i2: usize) -> ObservedHistory {
        let start = i1.max(1) - 1;
        let end = i2.min(self.items.len());
        let items = if start < end {
            self.items[start..end].to_vec()
        } else {
            Vec::new()
        };
        ObservedHistory {
            owner: self.owner,
            items,
        }
    }

    /// Prefix of the first `n` items.
    pub fn prefix(&self, n: usize) -> ObservedHistory {
        self.slice(1, n)
    }

    pub fn last_broadcast(&self) -> Option<&AlgorithmOutput> {
        self.items.iter().rev().find_map(Message::as_broadcast)
    }

    pub fn broadcasts(&self) -> impl Iterator<Item = &AlgorithmOutput> {
        self.items.iter().filter_map(Message::as_broadcast)
    }

    pub fn own_factuals(&self) -> impl Iterator<Item = &UpdatePayload> {
        self.items.iter().filter_map(|m| match m {
            Message::Factual { payload, .. } => Some(payload),
            _ => None,
        })
    }

    pub fn own_ledgers(&self) -> impl Iterator<Item = &UpdatePayload> {
        self.items.iter().filter_map(|m| match m {
            Message::Ledger { payload, .. } => Some(payload),
            _ => None,
        })
    }

    /// True when the broadcast at `idx` (0-based) answers the owner's own
    /// ledger update rather than someone else's.
    pub fn broadcast_is_own(&self, idx: usize) -> bool {
        idx > 0 && matches!(self.items[idx - 1], Message::Ledger { .. })
    }

    /// Number of the owner's trailing consecutive ledger updates, as far as
    /// the owner can tell: a broadcast it did not cause ends the streak.
    pub fn own_ledger_streak(&self) -> usize {
        let mut streak = 0;
        for (idx, m) in self.items.iter().enumerate().rev() {
            match m {
                Message::Ledger { .. } => streak += 1,
                Message::Broadcast { .. } if !self.broadcast_is_own(idx) => break,
                _ => {}
            }
        }
        streak
    }

    /// Strategy-side view of the ℓ-guard.
    pub fn may_update(&self, ell: usize) -> bool {
        self.own_ledger_streak() < ell
    }
}

/// O_j(R).
pub fn observed_history(run: &Run, j: AgentId) -> ObservedHistory {
    let mut o = ObservedHistory::empty(j);
    for m in &run.messages {
        o.observe(m);
    }
    o
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    Ledger,
    Factual,
}

/// L_j(R) or F_j(R); with `j = None`, all agents' updates of that kind.
pub fn extract(run: &Run, j: Option<AgentId>, kind: UpdateKind) -> Vec<UpdatePayload> {
    run.messages
        .iter()
        .filter_map(|m| match (m, kind) {
            (Message::Ledger { agent, payload }, UpdateKind::Ledger)
            | (Message::Factual { agent, payload }, UpdateKind::Factual)
                if j.is_none_or(|j| j == *agent) =>
            {
                Some(payload.clone())
            }
            _ => None,
        })
        .collect()
}
