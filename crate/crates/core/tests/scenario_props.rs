use std::path::PathBuf;

use exclusim_core::algorithms::{Algorithm, Norm};
use exclusim_core::numerics::q;
use exclusim_core::protocol::{trace_jsonl, NatureElement, NatureInput, UpdatePayload, DEFAULT_SAFETY_CAP};
use exclusim_core::scenario::{
    load_scenario, parse_scenario, ProtocolMode, Scenario, ScenarioError, StrategyAssignment,
};
use exclusim_core::strategies::StrategySpec;
use proptest::prelude::*;

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

const FIXTURES: [&str; 9] = [
    "example_1_1",
    "figure_1",
    "figure_7",
    "kcenter_sneak",
    "kcenter_sneak_periodic",
    "lr_sneak",
    "lr_sneak_periodic",
    "max_echo",
    "triangulation_d2",
];

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop_oneof![
        Just(Algorithm::Max),
        Just(Algorithm::Average),
        (1usize..=3).prop_map(|k| Algorithm::Kcenter { k, p: Norm::L2 }),
        (1usize..=3).prop_map(|k| Algorithm::Kmedian { k, p: Norm::L1 }),
    ]
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        algorithm(),
        2usize..=4,
        prop::collection::vec((0usize..4, -50i64..50, 1i64..5), 0..6),
        prop::option::of("[a-z_]{1,8}"),
        prop::option::of(any::<u64>()),
        1usize..=3,
        prop::option::of(1i64..200),
    )
        .prop_map(|(algorithm, agents, els, name, seed, ell, overbid)| {
            let scalar = algorithm == Algorithm::Max;
            let elements = els
                .into_iter()
                .map(|(a, n, d)| {
                    let payload = if scalar {
                        UpdatePayload::Scalar(q(n, d))
                    } else {
                        UpdatePayload::points_1d([q(n, d)])
                    };
                    NatureElement::new(a % agents + 1, payload)
                })
                .collect();
            let strategies = match overbid {
                Some(x) if scalar => vec![StrategyAssignment {
                    agent: 1,
                    spec: StrategySpec::MaxOverbid { x: q(x, 1) },
                }],
                _ => Vec::new(),
            };
            Scenario {
                name,
                protocol: ProtocolMode::Continuous,
                ell: Some(ell),
                algorithm,
                agents,
                strategies,
                nature_input: NatureInput::new(elements),
                seed,
            }
        })
}

proptest! {
    #[test]
    fn scenarios_round_trip(s in scenario()) {
        let text = s.to_json();
        let back = parse_scenario(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn runs_are_deterministic(s in scenario()) {
        match (s.run(2_000), s.run(2_000)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(trace_jsonl(&a), trace_jsonl(&b)),
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "runs disagree"),
        }
    }
}

#[test]
fn fixtures_reproduce_golden_traces() {
    for name in FIXTURES {
        let s = load_scenario(scenarios_dir().join(format!("{name}.json"))).unwrap();
        let golden = std::fs::read_to_string(scenarios_dir().join("golden").join(format!("{name}.jsonl"))).unwrap();
        assert_eq!(trace_jsonl(&s.run(DEFAULT_SAFETY_CAP).unwrap()), golden, "{name}");
    }
}

#[test]
fn example_fixture_uses_average() {
    let s = load_scenario(scenarios_dir().join("example_1_1.json")).unwrap();
    assert_eq!(s.algorithm, Algorithm::Average);
    assert_eq!(s.ell, Some(2));
}

fn base() -> Scenario {
    load_scenario(scenarios_dir().join("figure_7.json")).unwrap()
}

#[test]
fn decreasing_rounds_are_rejected() {
    let mut s = base();
    s.nature_input = NatureInput::new(vec![
        NatureElement::in_round(1, UpdatePayload::Scalar(q(1, 1)), 2),
        NatureElement::in_round(2, UpdatePayload::Scalar(q(2, 1)), 1),
    ]);
    let err = parse_scenario(&s.to_json()).unwrap_err();
    assert!(
        matches!(err, ScenarioError::Validation { ref path, .. } if path.starts_with("nature_input")),
        "{err}"
    );
}

#[test]
fn periodic_scenarios_take_no_ell() {
    let mut s = base();
    s.ell = Some(1);
    let err = parse_scenario(&s.to_json()).unwrap_err();
    assert!(
        matches!(err, ScenarioError::Validation { ref path, .. } if path == "ell"),
        "{err}"
    );
}

#[test]
fn unknown_agent_is_rejected() {
    let mut s = base();
    s.nature_input
        .elements
        .push(NatureElement::in_round(9, UpdatePayload::Scalar(q(1, 1)), 1));
    assert!(parse_scenario(&s.to_json()).is_err());
}

#[test]
fn missing_file_reports_io() {
    assert!(matches!(
        load_scenario(scenarios_dir().join("no_such_file.json")),
        Err(ScenarioError::Io { .. })
    ));
}
