use std::collections::BTreeSet;
use std::sync::Arc;

use exclusim_core::algorithms::{moments, Algorithm, AlgorithmOutput, Norm};
use exclusim_core::harness::generators::{kcenter_example_input, lr_example_input, triangulation_case};
use exclusim_core::harness::Setting;
use exclusim_core::numerics::{q, Rational};
use exclusim_core::protocol::{
    observed_history, AgentId, LabeledPoint, Message, NatureElement, NatureInput, Point, ProtocolKind, Run, Strategy,
    UpdatePayload,
};
use exclusim_core::strategies::{
    average_infer, classify_strategy_run, kcenter_sneak_params, lr_sneak_params, probe_point, resync_moments,
    triangulation_infer_history, RunClass, SneakAttack, SneakParams, StrategySpec,
};
use proptest::prelude::*;

const J: AgentId = AgentId(2);

fn coefficients(o: &AlgorithmOutput) -> Option<Vec<Rational>> {
    o.as_coefficients().map(<[Rational]>::to_vec)
}

/// Index of every attacker ledger message that is a probe, with the fit
/// broadcast right before it. Walked over the full run.
fn probes(run: &Run, d: usize) -> Vec<(usize, usize, Vec<Rational>)> {
    let mut out = Vec::new();
    let mut rho: Option<Vec<Rational>> = None;
    let mut step = 0;
    for (idx, m) in run.messages.iter().enumerate() {
        match m {
            Message::Broadcast { output } => rho = coefficients(output),
            Message::Ledger { agent, payload } if *agent == J => {
                let sent = payload.as_labeled().and_then(|r| (r.len() == 1).then(|| r[0].clone()));
                let Some((rho, sent)) = rho.as_ref().zip(sent) else {
                    step = 0;
                    continue;
                };
                // A new sequence may start at probe 1 at any time.
                if sent == probe_point(d, 1, rho) {
                    step = 1;
                } else if step >= 1 && step <= d && sent == probe_point(d, step + 1, rho) {
                    step += 1;
                } else {
                    step = 0;
                    continue;
                }
                out.push((idx, step, rho.clone()));
            }
            _ => {}
        }
    }
    out
}

fn ledger_rows(messages: &[Message]) -> Vec<LabeledPoint> {
    messages
        .iter()
        .filter_map(|m| match m {
            Message::Ledger { payload, .. } => payload.as_labeled(),
            _ => None,
        })
        .flatten()
        .cloned()
        .collect()
}

fn triangulation_runs(d: usize, seed: u64) -> (Run, Run) {
    let case = triangulation_case(d, seed);
    let setting = Setting::new(
        Algorithm::Dlr { d },
        ProtocolKind::Continuous { ell: d + 2 },
        case.agents,
    );
    let strategy = StrategySpec::Triangulation { d }.build().unwrap();
    setting.paired_runs(&strategy, J, &case.input).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn probes_always_move_the_fit(d in 1usize..=3, seed in 0u64..10_000) {
        let (run, _) = triangulation_runs(d, seed);
        let found = probes(&run, d);
        prop_assert!(found.iter().any(|(_, step, _)| *step == d + 1));
        for (idx, _, rho) in found {
            let Message::Ledger { payload, .. } = &run.messages[idx] else { unreachable!() };
            let p = &payload.as_labeled().unwrap()[0];
            let fitted: Rational = p.x.iter().zip(&rho).map(|(a, b)| a * b).sum();
            prop_assert_ne!(&fitted, &p.y);
            let Some(Message::Broadcast { output }) = run.messages.get(idx + 1) else {
                return Err(TestCaseError::fail("probe not followed by a broadcast"));
            };
            prop_assert_ne!(coefficients(output), Some(rho));
        }
    }

    #[test]
    fn recovered_moments_match_the_ledger(d in 1usize..=3, seed in 0u64..10_000) {
        let (run, truth) = triangulation_runs(d, seed);
        let inf = triangulation_infer_history(&observed_history(&run, J), d).unwrap();
        // The last completed sequence starts at the probe-1 preceding its final probe.
        let found = probes(&run, d);
        let last = found.iter().rposition(|(_, step, _)| *step == d + 1).unwrap();
        let start = found[last - d].0;
        let hidden = moments(&ledger_rows(&run.messages[..start]), d).unwrap();
        prop_assert_eq!(&inf.sigma_matrix, &hidden.gram);
        prop_assert_eq!(&inf.sigma_vector, &hidden.cross);
        prop_assert_eq!(Some(&inf.truth_output), truth.final_output());
    }

    #[test]
    fn average_inference_recovers_hidden_values(n_o in 0i64..30, s_o in -200i64..200, own in prop::collection::vec(-50i64..50, 1..4)) {
        let n = Rational::from_int(n_o);
        let s = Rational::from_int(s_o);
        let a1 = &s / &(&n + Rational::one());
        let a2 = if a1.is_zero() {
            Rational::one() / (&n + Rational::from_int(2))
        } else {
            &s / &(&n + Rational::from_int(2))
        };
        let s_i: Rational = own.iter().map(|v| Rational::from_int(*v)).sum();
        let inf = average_infer(&a1, &a2, &s_i, own.len()).unwrap();
        prop_assert_eq!(&inf.n_o, &n);
        prop_assert_eq!(&inf.s_o, &s);
        prop_assert_eq!(inf.true_average, (&s + &s_i) / (&n + Rational::from_int(own.len() as i64)));
    }

    #[test]
    fn kcenter_sneak_resyncs(
        k in 3usize..=4,
        eps_den in 5i64..1000,
        tail in prop::collection::vec((1usize..=2, -30i64..30), 0..4),
        last in -30i64..30,
    ) {
        let eps = q(1, eps_den);
        let params = kcenter_sneak_params(k, &eps).unwrap();
        prop_assert!(params.is_omission());
        let mut input = kcenter_example_input(k, &eps, false);
        input.elements.extend(tail.iter().map(|(a, v)| NatureElement::new(*a, UpdatePayload::points_1d([q(*v, 7)]))));
        input.elements.push(NatureElement::new(2, UpdatePayload::points_1d([q(last, 3)])));
        check_resync(&input, Algorithm::Kcenter { k, p: Norm::L2 }, &params)?;
    }

    #[test]
    fn lr_sneak_resyncs_moments(tail in prop::collection::vec((1usize..=2, -9i64..9, -9i64..9), 0..4), last in (-9i64..9, -9i64..9)) {
        let mut input = lr_example_input(false);
        let row = |x: i64, y: i64| UpdatePayload::labeled(vec![LabeledPoint::from_features(&[q(x, 1)], q(y, 1))]);
        input.elements.extend(tail.iter().map(|(a, x, y)| NatureElement::new(*a, row(*x, *y))));
        input.elements.push(NatureElement::new(2, row(last.0, last.1)));
        check_resync(&input, Algorithm::Dlr { d: 1 }, &lr_sneak_params())?;
    }
}

fn points_of(run: &Run, ledger: bool) -> BTreeSet<Point> {
    run.messages
        .iter()
        .filter_map(|m| match m {
            Message::Factual { agent, payload } if !ledger && *agent == J => Some(payload),
            Message::Ledger { agent, payload } if ledger && *agent == J => Some(payload),
            _ => None,
        })
        .filter_map(UpdatePayload::as_point_set)
        .flatten()
        .cloned()
        .collect()
}

/// With a guard that never binds, every truthful update reaches the ledger.
/// The re-sync is the attacker's first ledger message after `u_attack`; from
/// there on the attack run broadcasts what the truth run ends with.
fn check_resync(input: &NatureInput, algorithm: Algorithm, params: &SneakParams) -> Result<(), TestCaseError> {
    let strategy: Arc<dyn Strategy> = Arc::new(SneakAttack::new(params.clone()).unwrap());
    let setting = Setting::new(algorithm, ProtocolKind::Continuous { ell: input.len() + 1 }, 2);
    let (attack, truth) = setting.paired_runs(&strategy, J, input).unwrap();
    let own_ledgers: Vec<usize> = attack
        .messages
        .iter()
        .enumerate()
        .filter(|(_, m)| matches!(m, Message::Ledger { agent, .. } if *agent == J))
        .map(|(i, _)| i)
        .collect();
    let attacked = own_ledgers
        .iter()
        .position(|&i| matches!(&attack.messages[i], Message::Ledger { payload, .. } if *payload == params.u_attack))
        .unwrap();
    let resync = own_ledgers[attacked + 1];
    if params.is_omission() {
        prop_assert_eq!(points_of(&attack, true), points_of(&attack, false));
    }
    let after: Vec<_> = attack.messages[resync..].iter().filter_map(broadcast).collect();
    let truth_all: Vec<_> = truth.messages.iter().filter_map(broadcast).collect();
    prop_assert!(!after.is_empty());
    prop_assert_eq!(&after[..], &truth_all[truth_all.len() - after.len()..]);
    Ok(())
}

fn broadcast(m: &Message) -> Option<&AlgorithmOutput> {
    match m {
        Message::Broadcast { output } => Some(output),
        _ => None,
    }
}

#[test]
fn lr_resync_moments_identity() {
    let (split, whole) = resync_moments(&lr_sneak_params(), 1).unwrap();
    assert_eq!(split, whole);
}

#[test]
fn truthful_run_is_truthlike() {
    let setting = Setting::new(Algorithm::Dlr { d: 1 }, ProtocolKind::Continuous { ell: 1 }, 2);
    let truthful = StrategySpec::Truthful.build().unwrap();
    let (run, truth) = setting.paired_runs(&truthful, J, &lr_example_input(false)).unwrap();
    assert_eq!(classify_strategy_run(&run, &truth, J), RunClass::Truthlike);
}
