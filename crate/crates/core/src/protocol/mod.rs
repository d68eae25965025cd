//! Continuous and periodic protocol engines, transcripts and observed histories.

mod engine;
mod history;
mod message;
mod payload;
mod trace;

pub use engine::{
    execute, run_continuous, run_continuous_capped, run_periodic, safety_cap_from_env, truthful_strategy,
    validate_continuous_input, validate_periodic_input, Profile, ProtocolError, Strategy, Truthful, DEFAULT_SAFETY_CAP,
    SAFETY_CAP_ENV,
};
pub use history::{extract, observed_history, ObservedHistory, UpdateKind};
pub use message::{AgentId, Message, NatureElement, NatureInput, ProtocolKind, Run};
pub use payload::{LabeledPoint, PayloadError, Point, UpdatePayload};
pub use trace::{trace_jsonl, trace_records, TraceRecord};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{Algorithm, AlgorithmOutput};
    use crate::numerics::q;

    fn scalar(v: i64) -> UpdatePayload {
        UpdatePayload::Scalar(q(v, 1))
    }

    #[test]
    fn single_truthful_echo() {
        let input = NatureInput::new(vec![NatureElement::new(1, scalar(5))]);
        let run = run_continuous(&input, &Profile::truthful(1), 1, &Algorithm::Max).unwrap();
        assert_eq!(
            run.messages,
            vec![
                Message::Factual {
                    agent: AgentId(1),
                    payload: scalar(5)
                },
                Message::Ledger {
                    agent: AgentId(1),
                    payload: scalar(5)
                },
                Message::Broadcast {
                    output: AlgorithmOutput::Scalar(q(5, 1))
                },
            ]
        );
    }

    #[test]
    fn periodic_two_agents_one_round() {
        let input = NatureInput::new(vec![
            NatureElement::in_round(1, scalar(90), 1),
            NatureElement::in_round(2, scalar(90), 1),
        ]);
        let run = run_periodic(&input, &Profile::truthful(2), &Algorithm::Max).unwrap();
        let kinds: Vec<_> = trace_records(&run).into_iter().map(|r| (r.kind, r.agent)).collect();
        assert_eq!(
            kinds,
            vec![
                ("factual".to_string(), Some(AgentId(1))),
                ("factual".to_string(), Some(AgentId(2))),
                ("ledger".to_string(), Some(AgentId(1))),
                ("ledger".to_string(), Some(AgentId(2))),
                ("broadcast".to_string(), None),
            ]
        );
        assert_eq!(run.final_output(), Some(&AlgorithmOutput::Scalar(q(90, 1))));
    }

    #[test]
    fn empty_inputs_give_empty_runs() {
        let empty = NatureInput::default();
        assert!(run_periodic(&empty, &Profile::truthful(2), &Algorithm::Max)
            .unwrap()
            .messages
            .is_empty());
        let run = run_continuous(&empty, &Profile::truthful(2), 1, &Algorithm::Max).unwrap();
        assert!(run.messages.is_empty());
        assert!(observed_history(&run, AgentId(1)).is_empty());
    }

    #[test]
    fn periodic_rejects_bad_rounds() {
        let decreasing = NatureInput::new(vec![
            NatureElement::in_round(1, scalar(1), 2),
            NatureElement::in_round(2, scalar(1), 1),
        ]);
        assert!(matches!(
            run_periodic(&decreasing, &Profile::truthful(2), &Algorithm::Max),
            Err(ProtocolError::Input(_))
        ));
        let doubled = NatureInput::new(vec![
            NatureElement::in_round(1, scalar(1), 1),
            NatureElement::in_round(1, scalar(2), 1),
        ]);
        assert!(run_periodic(&doubled, &Profile::truthful(2), &Algorithm::Max).is_err());
        let unrounded = NatureInput::new(vec![NatureElement::new(1, scalar(1))]);
        assert!(run_periodic(&unrounded, &Profile::truthful(2), &Algorithm::Max).is_err());
    }

    #[test]
    fn periodic_broadcasts_every_round_including_empty_ones() {
        let input = NatureInput::new(vec![
            NatureElement::in_round(1, scalar(3), 1),
            NatureElement::in_round(2, scalar(7), 3),
        ]);
        let run = run_periodic(&input, &Profile::truthful(2), &Algorithm::Max).unwrap();
        let outs: Vec<_> = run.broadcasts().cloned().collect();
        assert_eq!(
            outs,
            vec![
                AlgorithmOutput::Scalar(q(3, 1)),
                AlgorithmOutput::Scalar(q(3, 1)),
                AlgorithmOutput::Scalar(q(7, 1)),
            ]
        );
    }

    struct Chatty;
    impl Strategy for Chatty {
        fn respond(&self, _: &ObservedHistory) -> Option<UpdatePayload> {
            Some(UpdatePayload::Scalar(q(1, 1)))
        }
        fn name(&self) -> String {
            "chatty".into()
        }
    }

    #[test]
    fn ell_guard_limits_consecutive_updates() {
        let input = NatureInput::new(vec![NatureElement::new(2, scalar(4))]);
        let profile = Profile::truthful(2).with(AgentId(1), std::sync::Arc::new(Chatty));
        let run = run_continuous(&input, &profile, 3, &Algorithm::Max).unwrap();
        assert_eq!(run.max_ledger_streak(), 3);
        assert!(run.pairing_holds());
        let o = observed_history(&run, AgentId(1));
        assert!(!o.may_update(3));
        assert_eq!(o.own_ledger_streak(), 3);
    }

    #[test]
    fn livelock_hits_safety_cap() {
        let input = NatureInput::new(vec![NatureElement::new(1, scalar(4))]);
        let profile = Profile::truthful(2)
            .with(AgentId(1), std::sync::Arc::new(Chatty))
            .with(AgentId(2), std::sync::Arc::new(Chatty));
        let err = run_continuous_capped(&input, &profile, 1, &Algorithm::Max, 50).unwrap_err();
        assert_eq!(err, ProtocolError::SafetyCapExceeded { element: 1, cap: 50 });
    }

    #[test]
    fn history_slicing_is_one_based_inclusive() {
        let input = NatureInput::new(vec![NatureElement::new(1, scalar(5))]);
        let run = run_continuous(&input, &Profile::truthful(1), 1, &Algorithm::Max).unwrap();
        let o = observed_history(&run, AgentId(1));
        assert_eq!(o.slice(2, 3).items, run.messages[1..3].to_vec());
        assert_eq!(o.slice(1, 1).items, run.messages[..1].to_vec());
        assert!(o.slice(3, 2).is_empty());
        assert_eq!(o.slice(1, 99).len(), 3);
    }

    #[test]
    fn extract_by_kind() {
        let input = NatureInput::new(vec![NatureElement::new(1, scalar(5)), NatureElement::new(2, scalar(6))]);
        let run = run_continuous(&input, &Profile::truthful(2), 1, &Algorithm::Max).unwrap();
        assert_eq!(extract(&run, Some(AgentId(2)), UpdateKind::Ledger), vec![scalar(6)]);
        assert_eq!(extract(&run, None, UpdateKind::Factual), vec![scalar(5), scalar(6)]);
    }

    #[test]
    fn truthful_strategy_branches() {
        let j = AgentId(1);
        let t = Truthful;
        let mut o = ObservedHistory::empty(j);
        assert_eq!(t.respond(&o), None);
        o.items.push(Message::Factual {
            agent: j,
            payload: scalar(3),
        });
        assert_eq!(t.respond(&o), Some(scalar(3)));
        o.items.push(Message::Ledger {
            agent: j,
            payload: scalar(3),
        });
        assert_eq!(t.respond(&o), None);
        o.items.push(Message::Broadcast {
            output: AlgorithmOutput::Scalar(q(3, 1)),
        });
        assert_eq!(t.respond(&o), None);
    }

    #[test]
    fn trace_line_format() {
        let input = NatureInput::new(vec![NatureElement::new(1, scalar(5))]);
        let run = run_continuous(&input, &Profile::truthful(1), 1, &Algorithm::Max).unwrap();
        let text = trace_jsonl(&run);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[0],
            r#"{"agent":1,"kind":"factual","payload":{"scalar":"5"},"seq":1}"#
        );
        assert_eq!(
            lines[2],
            r#"{"agent":null,"kind":"broadcast","payload":{"scalar":"5"},"seq":3}"#
        );
    }
}
