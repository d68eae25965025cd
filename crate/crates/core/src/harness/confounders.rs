use std::collections::BTreeSet;
use std::sync::Arc;

use num_traits::ToPrimitive;

use super::{compare_inputs, extend_input, first_confounded, other_agent, ConfoundingWitness, HarnessError, Setting};
use super::{forceable_winner_set, ForceKind};
use crate::algorithms::{collect_labeled, Algorithm, AlgorithmError, AlgorithmOutput};
use crate::numerics::Rational;
use crate::protocol::{
    extract, AgentId, Message, NatureElement, NatureInput, Point, ProtocolKind, Run, Strategy, UpdateKind,
    UpdatePayload,
};

/// Adds `<agent, payload>` as a new element (periodic: in a new last round).
fn append_element(setting: &Setting, input: &NatureInput, agent: AgentId, payload: UpdatePayload) -> NatureInput {
    let mut out = input.clone();
    out.elements.push(match setting.protocol {
        ProtocolKind::Continuous { .. } => NatureElement::new(agent.0, payload),
        ProtocolKind::Periodic => NatureElement::in_round(agent.0, payload, input.max_round() + 1),
    });
    out
}

/// Prefixes of `input` by element (continuous) or by whole rounds (periodic), shortest first.
fn prefixes(setting: &Setting, input: &NatureInput) -> Vec<NatureInput> {
    match setting.protocol {
        ProtocolKind::Continuous { .. } => (1..=input.len())
            .map(|n| NatureInput::new(input.elements[..n].to_vec()))
            .collect(),
        ProtocolKind::Periodic => (1..=input.max_round())
            .map(|r| NatureInput::new(input.elements.iter().filter(|e| e.round <= Some(r)).cloned().collect()))
            .collect(),
    }
}

fn points(payloads: &[UpdatePayload]) -> BTreeSet<Point> {
    payloads
        .iter()
        .filter_map(UpdatePayload::as_point_set)
        .flat_map(|s| s.iter().cloned())
        .collect()
}

fn force_kind(algorithm: &Algorithm) -> Option<ForceKind> {
    match algorithm {
        Algorithm::Kcenter { k, .. } => Some(ForceKind::KCenter { k: *k }),
        Algorithm::Kmedian { k, .. } => Some(ForceKind::KMedian { k: *k }),
        _ => None,
    }
}

/// For max: if j ever reports some x above the truthful output m on `base`,
/// extend `base` by another agent's value (x + 2m)/3 or (2x + m)/3.
pub fn max_overbid_pair(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    base: &NatureInput,
) -> Result<Option<ConfoundingWitness>, HarnessError> {
    if setting.algorithm != Algorithm::Max {
        return Err(HarnessError::NotApplicable("construction is specific to max".into()));
    }
    let (attack, truth) = setting.paired_runs(strategy, j, base)?;
    let Some(AlgorithmOutput::Scalar(m)) = truth.final_output() else {
        return Ok(None);
    };
    let overbids: BTreeSet<Rational> = extract(&attack, Some(j), UpdateKind::Ledger)
        .iter()
        .filter_map(UpdatePayload::as_scalar)
        .filter(|x| *x > m)
        .cloned()
        .collect();
    // Under truth_j the appended update must not be blocked by the ℓ-guard.
    let last_writer = truth.messages.iter().rev().find_map(|msg| match msg {
        Message::Ledger { agent, .. } => Some(*agent),
        _ => None,
    });
    let i = (1..=setting.agents)
        .map(AgentId)
        .find(|a| *a != j && Some(*a) != last_writer)
        .map_or_else(|| other_agent(j, setting.agents), Ok)?;
    let three = Rational::from_int(3);
    for x in overbids {
        let low = (&x + &(m * &Rational::from_int(2))) / three.clone();
        let high = (&(&x * &Rational::from_int(2)) + m) / three.clone();
        let w = compare_inputs(
            setting,
            strategy,
            j,
            "max_overbid_thirds",
            append_element(setting, base, i, UpdatePayload::Scalar(low)),
            append_element(setting, base, i, UpdatePayload::Scalar(high)),
        )?;
        if w.is_valid() {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// Explicit lie x by j on the shortest prefix of `base`; another agent then
/// reports E1 = S ∪ S̄ or E2 = E1 \ {x}, where S is every factual and ledger
/// point so far and S̄ forces x into the output.
pub fn explicit_lie_witness(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    base: &NatureInput,
) -> Result<Option<ConfoundingWitness>, HarnessError> {
    let kind = force_kind(&setting.algorithm)
        .ok_or_else(|| HarnessError::NotApplicable("needs a set-choice clustering algorithm".into()))?;
    for prefix in prefixes(setting, base) {
        let attack = setting.run(&prefix, Some((j, strategy)))?;
        let factual_all = points(&extract(&attack, None, UpdateKind::Factual));
        let ledger_all = points(&extract(&attack, None, UpdateKind::Ledger));
        let lies = points(&extract(&attack, Some(j), UpdateKind::Ledger));
        let Some(x) = lies.difference(&factual_all).next().cloned() else {
            continue;
        };
        let s: BTreeSet<Point> = factual_all.union(&ledger_all).cloned().collect();
        let bar = forceable_winner_set(kind, &s, &x)?;
        let e1: BTreeSet<Point> = s.union(&bar).cloned().collect();
        let mut e2 = e1.clone();
        e2.remove(&x);
        let w = compare_inputs(
            setting,
            strategy,
            j,
            "explicit_lie_forceable",
            extend_input(setting, &prefix, j, UpdatePayload::PointSet(e1))?,
            extend_input(setting, &prefix, j, UpdatePayload::PointSet(e2))?,
        )?;
        return Ok(Some(w));
    }
    Ok(None)
}

/// k-center, periodic: x is a point j received but nobody put on the ledger
/// by the end of the shortest round prefix. With S = F ∪ L ∪ {x + 1}, y the
/// point of S closest to x and Δ = max |x - s|, the last round gets
/// (S ∪ {x ± 2Δ} ∪ far) \ {x} or (S ∪ {y ± 2Δ} ∪ far) \ {x}.
pub fn periodic_omission_witness(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    base: &NatureInput,
) -> Result<Option<ConfoundingWitness>, HarnessError> {
    let Algorithm::Kcenter { k, .. } = setting.algorithm else {
        return Err(HarnessError::NotApplicable(
            "construction is specific to k-center".into(),
        ));
    };
    if setting.protocol != ProtocolKind::Periodic {
        return Err(HarnessError::NotApplicable(
            "construction is for the periodic protocol".into(),
        ));
    }
    for prefix in prefixes(setting, base) {
        let attack = setting.run(&prefix, Some((j, strategy)))?;
        let ledger_all = points(&extract(&attack, None, UpdateKind::Ledger));
        let own = points(&extract(&attack, Some(j), UpdateKind::Factual));
        let Some(x) = own.difference(&ledger_all).next().cloned() else {
            continue;
        };
        if x.len() != 1 {
            return Err(HarnessError::Param("construction is built on the line".into()));
        }
        let xv = x[0].clone();
        let mut s: BTreeSet<Point> = points(&extract(&attack, None, UpdateKind::Factual));
        s.extend(ledger_all);
        s.insert(vec![&xv + Rational::one()]);
        // Closest to x; ties as the clustering tie-break would resolve them.
        let y = s
            .iter()
            .filter(|p| **p != x)
            .map(|p| p[0].clone())
            .min_by(|a, b| ((a - &xv).abs(), a.abs(), a.clone()).cmp(&((b - &xv).abs(), b.abs(), b.clone())))
            .expect("x + 1 is in S");
        let delta = s.iter().map(|p| (&p[0] - &xv).abs()).max().expect("S is non-empty");
        let two_delta = &delta * &Rational::from_int(2);
        let ten = Rational::from_int(10);
        let mut far = Vec::new();
        let mut power = ten.clone();
        for _ in 1..k {
            far.push(vec![&xv + &(&power * &delta)]);
            power = &power * &ten;
        }
        let build = |center: &Rational| -> UpdatePayload {
            let mut e: BTreeSet<Point> = s.clone();
            e.insert(vec![center + &two_delta]);
            e.insert(vec![center - &two_delta]);
            e.extend(far.iter().cloned());
            e.remove(&x);
            UpdatePayload::PointSet(e)
        };
        let w = compare_inputs(
            setting,
            strategy,
            j,
            "periodic_omission_kcenter",
            extend_input(setting, &prefix, j, build(&xv))?,
            extend_input(setting, &prefix, j, build(&y))?,
        )?;
        return Ok(Some(w));
    }
    Ok(None)
}

/// Scaling confounder for separable minimizations in the periodic protocol:
/// with ρ (truth) and ρ' (attack) and their ledger multisets S and S', another
/// agent adds S' repeated λ = ⌈Δ/δ⌉ + 1 times to the last round.
pub fn periodic_lambda_confounder(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    input: &NatureInput,
) -> Result<ConfoundingWitness, HarnessError> {
    if setting.protocol != ProtocolKind::Periodic {
        return Err(HarnessError::NotApplicable(
            "construction is for the periodic protocol".into(),
        ));
    }
    let (attack, truth) = setting.paired_runs(strategy, j, input)?;
    let (rho_attack, rho_truth) = finals(&attack, &truth);
    if rho_attack == rho_truth {
        return Err(HarnessError::NotApplicable(
            "attack does not mislead on this input".into(),
        ));
    }
    let s = extract(&truth, None, UpdateKind::Ledger);
    let s_prime = extract(&attack, None, UpdateKind::Ledger);
    let cost = |payloads: &[UpdatePayload], output: &AlgorithmOutput| -> Result<Rational, HarnessError> {
        setting.algorithm.separable_cost(payloads, output)?.ok_or_else(|| {
            HarnessError::NotApplicable(format!(
                "no separable cost for {} at {output}",
                setting.algorithm.describe()
            ))
        })
    };
    let big_delta = cost(&s, &rho_attack)? - cost(&s, &rho_truth)?;
    let small_delta = cost(&s_prime, &rho_truth)? - cost(&s_prime, &rho_attack)?;
    if big_delta.is_negative() || !(small_delta > Rational::zero()) {
        return Err(HarnessError::NotApplicable("outputs are not unique minimizers".into()));
    }
    let lambda = (big_delta / small_delta).ceil() + Rational::one();
    let times = lambda
        .numer()
        .to_usize()
        .ok_or_else(|| HarnessError::Param(format!("lambda {lambda} is too large")))?;
    let rows = collect_labeled(&s_prime)?;
    let scaled: Vec<_> = (0..times).flat_map(|_| rows.iter().cloned()).collect();
    let extended = extend_input(setting, input, j, UpdatePayload::labeled(scaled))?;
    compare_inputs(
        setting,
        strategy,
        j,
        &format!("lambda_scaling(lambda={lambda})"),
        input.clone(),
        extended,
    )
}

fn finals(attack: &Run, truth: &Run) -> (AlgorithmOutput, AlgorithmOutput) {
    let f = |r: &Run| r.final_output().cloned().unwrap_or(AlgorithmOutput::Null);
    (f(attack), f(truth))
}

fn scalar_values(run: &Run) -> impl Iterator<Item = Rational> + '_ {
    run.messages.iter().flat_map(|m| {
        let found: Vec<Rational> = match m {
            Message::Factual { payload, .. } | Message::Ledger { payload, .. } => match payload {
                UpdatePayload::Scalar(v) => vec![v.clone()],
                UpdatePayload::PointSet(s) => s.iter().filter(|p| p.len() == 1).map(|p| p[0].clone()).collect(),
                _ => Vec::new(),
            },
            Message::Broadcast { output } => output.as_scalar().cloned().into_iter().collect(),
        };
        found
    })
}

/// Extensions of `base` by one more element for some agent ≠ j, with values
/// drawn from what the runs show, the thirds between them, and one step
/// beyond either end.
fn scalar_extensions(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    base: &NatureInput,
    budget: usize,
) -> Result<Vec<NatureInput>, HarnessError> {
    let (attack, truth) = setting.paired_runs(strategy, j, base)?;
    let seen: BTreeSet<Rational> = scalar_values(&attack).chain(scalar_values(&truth)).collect();
    let mut values = seen.clone();
    let three = Rational::from_int(3);
    let two = Rational::from_int(2);
    let seen: Vec<_> = seen.into_iter().collect();
    for (ia, a) in seen.iter().enumerate() {
        for b in &seen[ia + 1..] {
            values.insert((&(a * &two) + b) / three.clone());
            values.insert((a + &(b * &two)) / three.clone());
        }
    }
    if let (Some(lo), Some(hi)) = (seen.first(), seen.last()) {
        values.insert(lo - &Rational::one());
        values.insert(hi + &Rational::one());
    }
    let wrap = |v: Rational| match setting.algorithm {
        Algorithm::Max => UpdatePayload::Scalar(v),
        _ => UpdatePayload::points_1d([v]),
    };
    let mut out = vec![base.clone()];
    'outer: for v in values {
        for i in (1..=setting.agents).map(AgentId).filter(|a| *a != j) {
            if out.len() >= budget {
                break 'outer;
            }
            out.push(append_element(setting, base, i, wrap(v.clone())));
        }
    }
    Ok(out)
}

fn skippable(e: &HarnessError) -> bool {
    matches!(
        e,
        HarnessError::NotApplicable(_) | HarnessError::Algorithm(AlgorithmError::InstanceTooLarge { .. })
    )
}

fn keep_valid(
    found: Result<Option<ConfoundingWitness>, HarnessError>,
) -> Result<Option<ConfoundingWitness>, HarnessError> {
    match found {
        Ok(Some(w)) if w.is_valid() => Ok(Some(w)),
        Ok(_) => Ok(None),
        Err(e) if skippable(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Searches for a condition (ii) violation: first the algorithm-specific
/// constructions on each base input, then (for scalar algorithms) one-element
/// extensions of the bases, simulating at most `budget` extended inputs.
pub fn find_confounding_pair(
    setting: &Setting,
    strategy: &Arc<dyn Strategy>,
    j: AgentId,
    bases: &[NatureInput],
    budget: usize,
) -> Result<Option<ConfoundingWitness>, HarnessError> {
    for base in bases {
        let mut attempts = Vec::new();
        match (&setting.algorithm, setting.protocol) {
            (Algorithm::Max, _) => attempts.push(max_overbid_pair(setting, strategy, j, base)),
            (Algorithm::Kcenter { .. }, ProtocolKind::Periodic) => {
                attempts.push(explicit_lie_witness(setting, strategy, j, base));
                attempts.push(periodic_omission_witness(setting, strategy, j, base));
            }
            (Algorithm::Kcenter { .. } | Algorithm::Kmedian { .. }, _) => {
                attempts.push(explicit_lie_witness(setting, strategy, j, base));
            }
            (Algorithm::Dlr { .. }, ProtocolKind::Periodic) => {
                attempts.push(periodic_lambda_confounder(setting, strategy, j, base).map(Some));
            }
            _ => {}
        }
        for attempt in attempts {
            if let Some(w) = keep_valid(attempt)? {
                return Ok(Some(w));
            }
        }
    }
    if !matches!(setting.algorithm, Algorithm::Max | Algorithm::Average) {
        return Ok(None);
    }
    let mut remaining = budget;
    for base in bases {
        if remaining == 0 {
            break;
        }
        let inputs = scalar_extensions(setting, strategy, j, base, remaining)?;
        remaining = remaining.saturating_sub(inputs.len());
        if let Some(w) = first_confounded(setting, strategy, j, "scalar_extension_search", inputs)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}
