use crate::algorithms::AlgorithmOutput;
use crate::numerics::Rational;
use crate::protocol::{Message, ObservedHistory, Strategy, Truthful, UpdatePayload};

/// On its own factual update, repeats the last broadcast instead of the
/// data; truthful while nothing has been broadcast yet.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxEchoAttack;

impl Strategy for MaxEchoAttack {
    fn respond(&self, o: &ObservedHistory) -> Option<UpdatePayload> {
        if !matches!(o.last(), Some(Message::Factual { .. })) {
            return None;
        }
        match o.last_broadcast() {
            Some(AlgorithmOutput::Scalar(v)) => Some(UpdatePayload::Scalar(v.clone())),
            _ => Truthful.respond(o),
        }
    }

    fn name(&self) -> String {
        "max_echo".into()
    }
}

/// Reports the fixed value `x` after every broadcast it did not cause and in
/// place of its own factual data. This is the "some ledger update above the
/// current maximum" behaviour needed to mislead on inputs where the attacker
/// receives nothing.
#[derive(Debug, Clone)]
pub struct MaxOverbid {
    pub x: Rational,
}

impl Strategy for MaxOverbid {
    fn respond(&self, o: &ObservedHistory) -> Option<UpdatePayload> {
        let idx = o.len().checked_sub(1)?;
        let respond = match &o.items[idx] {
            Message::Factual { .. } => true,
            Message::Broadcast { .. } => !o.broadcast_is_own(idx),
            Message::Ledger { .. } => false,
        };
        respond.then(|| UpdatePayload::Scalar(self.x.clone()))
    }

    fn name(&self) -> String {
        format!("max_overbid(x={})", self.x)
    }
}

/// Max over every broadcast value and every own factual scalar that reached
/// the ledger. Echo updates exactly when truth would, so a factual without an
/// immediate own ledger update was blocked by the ℓ-guard in both runs.
pub fn max_infer(o: &ObservedHistory) -> AlgorithmOutput {
    let accepted = o
        .items
        .iter()
        .enumerate()
        .filter_map(|(i, m)| match (m, o.items.get(i + 1)) {
            (Message::Factual { payload, .. }, Some(next)) if next.is_ledger_by(o.owner) => payload.as_scalar(),
            _ => None,
        });
    o.broadcasts()
        .filter_map(AlgorithmOutput::as_scalar)
        .chain(accepted)
        .max()
        .cloned()
        .map_or(AlgorithmOutput::Null, AlgorithmOutput::Scalar)
}
