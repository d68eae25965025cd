use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::numerics::Rational;
use crate::protocol::Point;

/// Which set-choice algorithm the auxiliary set should force a winner for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceKind {
    KCenter { k: usize },
    KMedian { k: usize },
}

impl ForceKind {
    pub fn k(&self) -> usize {
        match self {
            ForceKind::KCenter { k } | ForceKind::KMedian { k } => *k,
        }
    }
}

fn scalar_points(s: &BTreeSet<Point>) -> Result<Vec<Rational>, HarnessError> {
    s.iter()
        .map(|p| match p.as_slice() {
            [v] => Ok(v.clone()),
            _ => Err(HarnessError::Param(format!(
                "forceable winners are built on the line, got a {}-dimensional point",
                p.len()
            ))),
        })
        .collect()
}

/// `x + 10^m · scale` for m = 1..k-1.
fn far_points(x: &Rational, scale: &Rational, k: usize) -> Vec<Rational> {
    let ten = Rational::from_int(10);
    let mut power = ten.clone();
    let mut out = Vec::with_capacity(k.saturating_sub(1));
    for _ in 1..k {
        out.push(x + &(&power * scale));
        power = &power * &ten;
    }
    out
}

/// Auxiliary set S̄ with x ∉ S̄ and x among the centers of S ∪ S̄.
///
/// k-center: Δ = max(max |x - s|, 1), S̄ = {x ± Δ} ∪ {x + 10^m Δ}.
/// k-median: O is S mirrored around x, C = max(Σ_O |o - x|, 1),
/// S̄ = O \ {x} ∪ {x + 10^m C}; the centers are then exactly {x, x + 10^m C}.
pub fn forceable_winner_set(kind: ForceKind, s: &BTreeSet<Point>, x: &Point) -> Result<BTreeSet<Point>, HarnessError> {
    let k = kind.k();
    if k < 2 {
        return Err(HarnessError::Param(format!("need k >= 2, got {k}")));
    }
    if !s.contains(x) {
        return Err(HarnessError::Param("x must belong to S".into()));
    }
    let values = scalar_points(s)?;
    let x = x[0].clone();
    let mut out: BTreeSet<Rational> = BTreeSet::new();
    match kind {
        ForceKind::KCenter { .. } => {
            let spread = values
                .iter()
                .map(|v| (v - &x).abs())
                .max()
                .unwrap_or_else(Rational::zero);
            let delta = spread.max(Rational::one());
            out.insert(&x + &delta);
            out.insert(&x - &delta);
            out.extend(far_points(&x, &delta, k));
        }
        ForceKind::KMedian { .. } => {
            if values.len() < 2 {
                return Err(HarnessError::Param("k-median construction needs |S| >= 2".into()));
            }
            let two = Rational::from_int(2);
            let mirrored: BTreeSet<Rational> = values.iter().flat_map(|v| [v.clone(), &(&two * &x) - v]).collect();
            let total: Rational = mirrored.iter().map(|o| (o - &x).abs()).sum();
            let c = total.max(Rational::one());
            out.extend(mirrored.into_iter().filter(|o| *o != x));
            out.extend(far_points(&x, &c, k));
        }
    }
    Ok(out.into_iter().map(|v| vec![v]).collect())
}

/// The cost scale C of the k-median construction, for checking the
/// expected centers {x, x + 10C, ...}.
pub fn kmedian_scale(s: &BTreeSet<Point>, x: &Point) -> Result<Rational, HarnessError> {
    let values = scalar_points(s)?;
    let two = Rational::from_int(2);
    let x = &x[0];
    let mirrored: BTreeSet<Rational> = values.iter().flat_map(|v| [v.clone(), &(&two * x) - v]).collect();
    let total: Rational = mirrored.iter().map(|o| (o - x).abs()).sum();
    Ok(total.max(Rational::one()))
}
