use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::StrategyError;
use crate::algorithms::{moments, AlgorithmOutput, MomentPair};
use crate::numerics::{q, Rational};
use crate::protocol::{LabeledPoint, Message, ObservedHistory, Strategy, UpdatePayload};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SneakParams {
    pub u_cond: UpdatePayload,
    pub rho_cond: AlgorithmOutput,
    pub u_attack: UpdatePayload,
    pub u_resync: UpdatePayload,
}

impl SneakParams {
    pub fn validate(&self) -> Result<(), StrategyError> {
        if self.u_cond == self.u_attack {
            return Err(StrategyError::Param(
                "u_cond and u_attack must differ or the start signature is ambiguous".into(),
            ));
        }
        for p in [&self.u_cond, &self.u_attack, &self.u_resync] {
            p.validate()?;
        }
        Ok(())
    }

    /// `u_attack ⊆ u_cond` and `u_resync = u_cond \ u_attack` for point sets.
    pub fn is_omission(&self) -> bool {
        match (&self.u_cond, &self.u_attack, &self.u_resync) {
            (UpdatePayload::PointSet(cond), UpdatePayload::PointSet(attack), UpdatePayload::PointSet(resync)) => {
                attack.is_subset(cond) && *resync == cond.difference(attack).cloned().collect()
            }
            _ => false,
        }
    }
}

/// Position of the start signature `Factual(j, u_cond), Ledger(j, u_attack), Broadcast`
/// in `o`, as the 0-based index of the factual item.
fn start_signature(o: &ObservedHistory, params: &SneakParams) -> Option<usize> {
    o.items.windows(3).position(|w| {
        matches!(&w[0], Message::Factual { payload, .. } if *payload == params.u_cond)
            && matches!(&w[1], Message::Ledger { payload, .. } if *payload == params.u_attack)
            && matches!(w[2], Message::Broadcast { .. })
    })
}

pub fn sneak_attack_started(o: &ObservedHistory, params: &SneakParams) -> bool {
    start_signature(o, params).is_some()
}

/// True once the re-sync update has been sent after the start signature.
pub fn sneak_attack_ended(o: &ObservedHistory, params: &SneakParams) -> bool {
    start_signature(o, params).is_some_and(|i| o.items[i + 3..].iter().any(|m| matches!(m, Message::Ledger { .. })))
}

/// Strategy template for the sneak attack.
#[derive(Debug, Clone)]
pub struct SneakAttack {
    params: SneakParams,
    label: String,
}

impl SneakAttack {
    pub fn new(params: SneakParams) -> Result<Self, StrategyError> {
        params.validate()?;
        Ok(SneakAttack {
            params,
            label: "sneak".into(),
        })
    }

    pub fn labeled(params: SneakParams, label: &str) -> Result<Self, StrategyError> {
        let mut s = Self::new(params)?;
        s.label = label.to_string();
        Ok(s)
    }

    pub fn params(&self) -> &SneakParams {
        &self.params
    }
}

impl Strategy for SneakAttack {
    fn respond(&self, o: &ObservedHistory) -> Option<UpdatePayload> {
        let p = &self.params;
        let last_own_factual = match o.last() {
            Some(Message::Factual { payload, .. }) => Some(payload),
            _ => None,
        };
        match start_signature(o, p) {
            None => {
                if last_own_factual == Some(&p.u_cond) && o.last_broadcast() == Some(&p.rho_cond) {
                    return Some(p.u_attack.clone());
                }
            }
            Some(i) => {
                let after = &o.items[i + 3..];
                let resynced = after.iter().any(|m| matches!(m, Message::Ledger { .. }));
                if !after.is_empty() && !resynced {
                    let u = last_own_factual.cloned().unwrap_or(UpdatePayload::Empty);
                    // Mixed payload kinds cannot occur for a well-typed scenario.
                    return u.union(&p.u_resync).ok();
                }
            }
        }
        last_own_factual.cloned()
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

/// Parameters of the k-center omission attack on the line.
pub fn kcenter_sneak_params(k: usize, eps: &Rational) -> Result<SneakParams, StrategyError> {
    if k < 3 {
        return Err(StrategyError::Param(format!("k must be at least 3, got {k}")));
    }
    if !(eps > &Rational::zero() && eps < &q(1, 4)) {
        return Err(StrategyError::Param(format!("eps must lie in (0, 1/4), got {eps}")));
    }
    let mut cond = vec![q(1, 1), q(2, 1)];
    let mut power = q(10, 1);
    for _ in 1..k {
        cond.push(power.clone());
        power = power * q(10, 1);
    }
    // ρ_cond = {-ε, 0, ε/(k-2), ε/(k-3), ..., ε}
    let mut rho = vec![-eps.clone(), Rational::zero()];
    for m in (1..=k - 2).rev() {
        rho.push(eps / Rational::from_int(m as i64));
    }
    let cond_set: BTreeSet<_> = cond.iter().map(|v| vec![v.clone()]).collect();
    let attack: BTreeSet<_> = [vec![q(1, 1)]].into_iter().collect();
    let resync = cond_set.difference(&attack).cloned().collect();
    let mut centers: Vec<_> = rho.into_iter().map(|v| vec![v]).collect();
    centers.sort();
    Ok(SneakParams {
        u_cond: UpdatePayload::PointSet(cond_set),
        rho_cond: AlgorithmOutput::Centers(centers),
        u_attack: UpdatePayload::PointSet(attack),
        u_resync: UpdatePayload::PointSet(resync),
    })
}

fn lp(x: i64, y: i64) -> LabeledPoint {
    LabeledPoint::from_features(&[q(x, 1)], q(y, 1))
}

/// Parameters of the explicitly-lying simple linear regression attack.
pub fn lr_sneak_params() -> SneakParams {
    SneakParams {
        u_cond: UpdatePayload::labeled(vec![lp(3, 1), lp(0, 1), lp(0, 1)]),
        rho_cond: AlgorithmOutput::Coefficients(vec![q(1, 1), q(0, 1)]),
        u_attack: UpdatePayload::labeled(vec![lp(2, 2)]),
        u_resync: UpdatePayload::labeled(vec![lp(2, 0), lp(-1, 1)]),
    }
}

/// Moments of `u_attack ⊎ u_resync` and of `u_cond`, for labeled-multiset params.
pub fn resync_moments(params: &SneakParams, d: usize) -> Result<(MomentPair, MomentPair), StrategyError> {
    let rows = |p: &UpdatePayload| -> Result<Vec<LabeledPoint>, StrategyError> {
        p.as_labeled()
            .map(<[LabeledPoint]>::to_vec)
            .ok_or_else(|| StrategyError::Param("moments need labeled multisets".into()))
    };
    let split = moments(&rows(&params.u_attack)?, d)?.add(&moments(&rows(&params.u_resync)?, d)?)?;
    let whole = moments(&rows(&params.u_cond)?, d)?;
    Ok((split, whole))
}
