//! Seeded scenario generators and the canonical inputs of the worked examples.
//!
//! Every case is drawn from its own `ChaCha8Rng` seeded with the case seed,
//! so a case can be regenerated from the seed alone.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttackSuite, Case, Setting};
use crate::algorithms::{moments, Algorithm, AlgorithmOutput};
use crate::numerics::{q, Rational};
use crate::protocol::{AgentId, LabeledPoint, NatureElement, NatureInput, ProtocolKind, UpdatePayload};
use crate::strategies::{
    average_infer_history, kcenter_sneak_params, lr_sneak_params, max_infer, triangulation_infer_history,
    AverageDoubleProbe, MaxEchoAttack, SneakAttack, TriangulationAttack,
};

pub const AVERAGE_BOUND: &str =
    "n in 2..=3; others hold 1..=50 distinct half-integers in [-20, 20] over 1..=3 elements; \
     attacker (agent 1) holds 2 half-integers with sum outside {0, 1}, delivered last";
pub const MAX_BOUND: &str = "n in 2..=4; 1..=6 elements for uniformly chosen agents; integer values in [0, 200]";
pub const TRIANGULATION_BOUND: &str = "n = 3, attacker agent 2; others hold 3..=10 points over 1..=2 elements, the first with \
     an invertible Gram; attacker gets 1..=2 non-adjacent elements of 1..=3 points; coordinates p/q with q in 1..=4, |p/q| <= 10";
pub const LR_PERIODIC_BOUND: &str =
    "n in 2..=3, attacker agent 2 gets the trigger update in round 2; round 1 data fits (1, 0) \
     except in about 15% of cases; 0..=2 later rounds, attacker data in a later round in about 25% of cases";
pub const KCENTER_PERIODIC_BOUND: &str =
    "k in {3, 4}, eps = 1/m with m in 5..=1000; round 1 generates the trigger output, round 2 delivers the trigger update; optional round 3";

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn seeds(start: u64, count: usize) -> impl Iterator<Item = u64> {
    start..start + count as u64
}

fn half(n: i64) -> Rational {
    q(n, 2)
}

/// p/q with q in 1..=4 and |p/q| <= 10.
fn small_rational(r: &mut ChaCha8Rng) -> Rational {
    let d = r.gen_range(1..=4i64);
    q(r.gen_range(-10 * d..=10 * d), d)
}

fn labeled_row(r: &mut ChaCha8Rng, d: usize) -> LabeledPoint {
    let features: Vec<Rational> = (0..d).map(|_| small_rational(r)).collect();
    LabeledPoint::from_features(&features, small_rational(r))
}

fn split_sizes(r: &mut ChaCha8Rng, total: usize, parts: usize) -> Vec<usize> {
    let parts = parts.clamp(1, total.max(1));
    let mut cuts: BTreeSet<usize> = BTreeSet::new();
    while cuts.len() < parts - 1 {
        cuts.insert(r.gen_range(1..total));
    }
    let mut sizes = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts.into_iter().chain([total]) {
        sizes.push(c - prev);
        prev = c;
    }
    sizes
}

// ---- canonical inputs ----

/// Agent 2 reports 100, then agent 1 receives 110.
pub fn max_example_input() -> NatureInput {
    NatureInput::new(vec![
        NatureElement::new(2, UpdatePayload::Scalar(q(100, 1))),
        NatureElement::new(1, UpdatePayload::Scalar(q(110, 1))),
    ])
}

/// Single element: agent 2 receives 90.
pub fn max_base_input() -> NatureInput {
    NatureInput::new(vec![NatureElement::new(2, UpdatePayload::Scalar(q(90, 1)))])
}

/// Others hold S_O = 10 over N_O = 3 points; the attacker holds {1, 3}.
pub fn average_example_input() -> NatureInput {
    NatureInput::new(vec![
        NatureElement::new(2, UpdatePayload::points_1d([q(2, 1), q(3, 1), q(5, 1)])),
        NatureElement::new(1, UpdatePayload::points_1d([q(1, 1), q(3, 1)])),
    ])
}

fn rounds_if(periodic: bool, elements: Vec<(usize, UpdatePayload)>) -> NatureInput {
    NatureInput::new(
        elements
            .into_iter()
            .enumerate()
            .map(|(i, (a, p))| {
                if periodic {
                    NatureElement::in_round(a, p, i as u32 + 1)
                } else {
                    NatureElement::new(a, p)
                }
            })
            .collect(),
    )
}

/// Agent 1 receives the points generating the trigger output, then agent 2
/// receives the trigger update (one element per round when periodic).
pub fn kcenter_example_input(k: usize, eps: &Rational, periodic: bool) -> NatureInput {
    let params = kcenter_sneak_params(k, eps).expect("valid example parameters");
    let AlgorithmOutput::Centers(centers) = &params.rho_cond else {
        unreachable!("k-center parameters carry centers")
    };
    rounds_if(
        periodic,
        vec![
            (1, UpdatePayload::PointSet(centers.iter().cloned().collect())),
            (2, params.u_cond.clone()),
        ],
    )
}

fn lp(x: i64, y: i64) -> LabeledPoint {
    LabeledPoint::from_features(&[q(x, 1)], q(y, 1))
}

/// Agent 1 receives {(1,1), (0,1)}, then agent 2 receives the trigger update.
pub fn lr_example_input(periodic: bool) -> NatureInput {
    rounds_if(
        periodic,
        vec![
            (1, UpdatePayload::labeled(vec![lp(1, 1), lp(0, 1)])),
            (2, lr_sneak_params().u_cond),
        ],
    )
}

// ---- average ----

pub fn average_case(seed: u64) -> Case {
    let r = &mut rng(seed);
    let agents = r.gen_range(2..=3usize);
    let pool: Vec<i64> = (-40..=40).collect();
    let others: Vec<Rational> = if r.gen_bool(0.1) {
        // Symmetric data: S_O = 0.
        let positive: Vec<i64> = (1..=40).collect();
        let pairs = r.gen_range(1..=25usize);
        let mut vals: Vec<Rational> = positive
            .choose_multiple(r, pairs)
            .flat_map(|v| [half(*v), half(-*v)])
            .collect();
        if r.gen_bool(0.5) {
            vals.push(Rational::zero());
        }
        vals
    } else {
        let n_o = r.gen_range(1..=50usize);
        pool.choose_multiple(r, n_o).map(|v| half(*v)).collect()
    };
    let parts = r.gen_range(1..=3usize).min(others.len());
    let mut elements = Vec::new();
    let mut rest = others.as_slice();
    for size in split_sizes(r, others.len(), parts) {
        let (chunk, tail) = rest.split_at(size);
        rest = tail;
        let agent = r.gen_range(2..=agents);
        elements.push(NatureElement::new(
            agent,
            UpdatePayload::points_1d(chunk.iter().cloned()),
        ));
    }
    let own = loop {
        let picked: Vec<i64> = pool.choose_multiple(r, 2).cloned().collect();
        let s_i = half(picked[0] + picked[1]);
        if !s_i.is_zero() && s_i != Rational::one() {
            break picked;
        }
    };
    elements.push(NatureElement::new(
        1,
        UpdatePayload::points_1d(own.into_iter().map(half)),
    ));
    Case {
        seed,
        agents,
        input: NatureInput::new(elements),
    }
}

pub fn average_cases(start: u64, count: usize) -> Vec<Case> {
    seeds(start, count).map(average_case).collect()
}

pub fn average_suite(start: u64, count: usize) -> AttackSuite {
    let cases = average_cases(start, count);
    AttackSuite {
        attack: "average_double_probe".into(),
        setting: Setting::new(Algorithm::Average, ProtocolKind::Continuous { ell: 2 }, 2),
        strategy: Arc::new(AverageDoubleProbe),
        j: AgentId(1),
        witness_bases: cases.iter().take(3).map(|c| c.input.clone()).collect(),
        witness_budget: 200,
        inference: Some(Arc::new(average_infer_history)),
        cases,
        bound: AVERAGE_BOUND.into(),
    }
}

// ---- max ----

pub fn max_case(seed: u64) -> Case {
    let r = &mut rng(seed);
    let agents = r.gen_range(2..=4usize);
    let len = r.gen_range(1..=6usize);
    let elements = (0..len)
        .map(|_| {
            let agent = r.gen_range(1..=agents);
            NatureElement::new(agent, UpdatePayload::Scalar(Rational::from_int(r.gen_range(0..=200))))
        })
        .collect();
    Case {
        seed,
        agents,
        input: NatureInput::new(elements),
    }
}

pub fn max_cases(start: u64, count: usize) -> Vec<Case> {
    seeds(start, count).map(max_case).collect()
}

pub fn max_echo_suite(start: u64, count: usize) -> AttackSuite {
    AttackSuite {
        attack: "max_echo".into(),
        setting: Setting::new(Algorithm::Max, ProtocolKind::Continuous { ell: 1 }, 2),
        strategy: Arc::new(MaxEchoAttack),
        j: AgentId(1),
        cases: max_cases(start, count),
        inference: Some(Arc::new(|o| Ok(max_infer(o)))),
        witness_bases: vec![max_base_input()],
        witness_budget: 200,
        bound: MAX_BOUND.into(),
    }
}

// ---- triangulation ----

pub fn triangulation_case(d: usize, seed: u64) -> Case {
    let r = &mut rng(seed);
    let others_total = r.gen_range(3.max(d + 1)..=10usize);
    let attacker_elements = if others_total > d + 1 {
        r.gen_range(1..=2usize)
    } else {
        1
    };
    // Two attacker elements need an others' element between them.
    let first_size = if attacker_elements == 2 {
        r.gen_range(d + 1..others_total)
    } else {
        r.gen_range(d + 1..=others_total)
    };
    let first = loop {
        let rows: Vec<LabeledPoint> = (0..first_size).map(|_| labeled_row(r, d)).collect();
        let det = moments(&rows, d).and_then(|m| Ok(m.gram.determinant()?));
        if det.is_ok_and(|v| !v.is_zero()) {
            break rows;
        }
    };
    let other_agent = |r: &mut ChaCha8Rng| if r.gen_bool(0.5) { 1 } else { 3 };
    let mut elements = vec![NatureElement::new(other_agent(r), UpdatePayload::labeled(first))];
    let second: Option<NatureElement> = (others_total > first_size).then(|| {
        let rows = (0..others_total - first_size).map(|_| labeled_row(r, d)).collect();
        NatureElement::new(other_agent(r), UpdatePayload::labeled(rows))
    });
    let mut attack: Vec<NatureElement> = (0..attacker_elements)
        .map(|_| {
            let size = r.gen_range(1..=3usize);
            NatureElement::new(
                2,
                UpdatePayload::labeled((0..size).map(|_| labeled_row(r, d)).collect()),
            )
        })
        .collect();
    match (second, attacker_elements) {
        (Some(o2), 2) => {
            elements.push(attack.remove(0));
            elements.push(o2);
            elements.push(attack.remove(0));
        }
        (Some(o2), _) => {
            if r.gen_bool(0.5) {
                elements.push(o2);
                elements.append(&mut attack);
            } else {
                elements.append(&mut attack);
                elements.push(o2);
            }
        }
        (None, _) => elements.append(&mut attack),
    }
    Case {
        seed,
        agents: 3,
        input: NatureInput::new(elements),
    }
}

pub fn triangulation_cases(d: usize, start: u64, count: usize) -> Vec<Case> {
    seeds(start, count).map(|s| triangulation_case(d, s)).collect()
}

pub fn triangulation_suite(d: usize, start: u64, count: usize) -> AttackSuite {
    AttackSuite {
        attack: format!("triangulation(d={d})"),
        setting: Setting::new(Algorithm::Dlr { d }, ProtocolKind::Continuous { ell: d + 2 }, 3),
        strategy: Arc::new(TriangulationAttack { d }),
        j: AgentId(2),
        cases: triangulation_cases(d, start, count),
        inference: Some(Arc::new(move |o| Ok(triangulation_infer_history(o, d)?.truth_output))),
        witness_bases: Vec::new(),
        witness_budget: 0,
        bound: TRIANGULATION_BOUND.into(),
    }
}

// ---- periodic ----

pub fn lr_periodic_case(seed: u64) -> Case {
    let r = &mut rng(seed);
    let agents = r.gen_range(2..=3usize);
    let xs: Vec<i64> = (-6..=6).collect();
    let pairs = r.gen_range(2..=4usize);
    let mut round1: Vec<LabeledPoint> = Vec::new();
    for x in xs.choose_multiple(r, pairs) {
        let spread = q(r.gen_range(1..=8), r.gen_range(1..=4));
        round1.push(LabeledPoint::from_features(
            &[Rational::from_int(*x)],
            Rational::one() + spread.clone(),
        ));
        round1.push(LabeledPoint::from_features(
            &[Rational::from_int(*x)],
            Rational::one() - spread,
        ));
    }
    if r.gen_bool(0.15) {
        // Trigger miss: the round-1 fit is no longer (1, 0).
        round1[0].y = &round1[0].y + Rational::one();
    }
    let mut elements = vec![
        NatureElement::in_round(1, UpdatePayload::labeled(round1), 1),
        NatureElement::in_round(2, lr_sneak_params().u_cond, 2),
    ];
    if agents == 3 && r.gen_bool(0.5) {
        let rows = (0..r.gen_range(1..=3)).map(|_| labeled_row(r, 1)).collect();
        elements.push(NatureElement::in_round(3, UpdatePayload::labeled(rows), 2));
    }
    let later = r.gen_range(0..=2u32);
    for round in 3..3 + later {
        let agent = if agents == 3 && r.gen_bool(0.5) { 3 } else { 1 };
        let rows = (0..r.gen_range(1..=3)).map(|_| labeled_row(r, 1)).collect();
        elements.push(NatureElement::in_round(agent, UpdatePayload::labeled(rows), round));
        if r.gen_bool(0.25) {
            let rows = (0..r.gen_range(1..=2)).map(|_| labeled_row(r, 1)).collect();
            elements.push(NatureElement::in_round(2, UpdatePayload::labeled(rows), round));
        }
    }
    elements.sort_by_key(|e| e.round);
    Case {
        seed,
        agents,
        input: NatureInput::new(elements),
    }
}

pub fn lr_periodic_cases(start: u64, count: usize) -> Vec<Case> {
    seeds(start, count).map(lr_periodic_case).collect()
}

pub fn lr_periodic_setting(agents: usize) -> Setting {
    Setting::new(Algorithm::Dlr { d: 1 }, ProtocolKind::Periodic, agents)
}

pub fn lr_sneak_strategy() -> Arc<dyn crate::protocol::Strategy> {
    Arc::new(SneakAttack::labeled(lr_sneak_params(), "lr_sneak").expect("valid parameters"))
}

/// Returns (k, eps, case).
pub fn kcenter_periodic_case(seed: u64) -> (usize, Rational, Case) {
    let r = &mut rng(seed);
    let k = r.gen_range(3..=4usize);
    let eps = q(1, r.gen_range(5..=1000));
    let mut input = kcenter_example_input(k, &eps, true);
    if r.gen_bool(0.5) {
        let extra = UpdatePayload::points_1d([q(r.gen_range(-20..=20), r.gen_range(1..=4))]);
        input.elements.push(NatureElement::in_round(1, extra, 3));
    }
    (k, eps, Case { seed, agents: 2, input })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_reproducible() {
        assert_eq!(average_case(7), average_case(7));
        assert_eq!(triangulation_case(2, 7), triangulation_case(2, 7));
        assert_ne!(max_case(1), max_case(2));
    }

    #[test]
    fn split_sizes_cover_total() {
        let r = &mut rng(3);
        for total in 1..10 {
            for parts in 1..4 {
                let s = split_sizes(r, total, parts);
                assert_eq!(s.iter().sum::<usize>(), total);
                assert!(s.iter().all(|&x| x > 0));
            }
        }
    }
}
