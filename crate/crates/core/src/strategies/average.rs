use serde::Serialize;

use super::StrategyError;
use crate::algorithms::AlgorithmOutput;
use crate::numerics::Rational;
use crate::protocol::{Message, ObservedHistory, Strategy, UpdatePayload};

fn probe(v: i64) -> UpdatePayload {
    UpdatePayload::points_1d([Rational::from_int(v)])
}

/// Sends `[0]` on its own factual update instead of the data, then a second
/// probe once the first answer `a1` is known: `[0]` again, or `[1]` when `a1 = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AverageDoubleProbe;

impl Strategy for AverageDoubleProbe {
    fn respond(&self, o: &ObservedHistory) -> Option<UpdatePayload> {
        let items = &o.items;
        match items.last()? {
            Message::Factual { .. } => Some(probe(0)),
            Message::Broadcast { output } if items.len() >= 3 => {
                let first_probe = matches!(&items[items.len() - 3], Message::Factual { .. })
                    && matches!(&items[items.len() - 2], Message::Ledger { payload, .. } if *payload == probe(0));
                if !first_probe {
                    return None;
                }
                match output.as_scalar() {
                    Some(a1) if a1.is_zero() => Some(probe(1)),
                    Some(_) => Some(probe(0)),
                    None => None,
                }
            }
            _ => None,
        }
    }

    fn name(&self) -> String {
        "average_double_probe".into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AverageInference {
    pub n_o: Rational,
    pub s_o: Rational,
    pub true_average: Rational,
}

/// Recovers the others' count and sum from the two probe answers, then the
/// average the ledger would hold had the attacker reported `s_i` over `n_i` points.
pub fn average_infer(
    a1: &Rational,
    a2: &Rational,
    s_i: &Rational,
    n_i: usize,
) -> Result<AverageInference, StrategyError> {
    let one = Rational::one();
    let two = Rational::from_int(2);
    let (n_o, s_o) = if a1.is_zero() {
        if a2.is_zero() {
            return Err(StrategyError::Inference("second answer is 0 after probing [1]".into()));
        }
        (a2.recip() - &two, Rational::zero())
    } else if a1 != a2 {
        let n_o = (a1 - &two * a2) / (a2 - a1);
        let s_o = a1 * &(&n_o + &one);
        (n_o, s_o)
    } else {
        return Err(StrategyError::Inference(format!(
            "equal non-zero answers a1 = a2 = {a1} cannot come from two zero probes"
        )));
    };
    if !n_o.is_integer() || n_o.is_negative() {
        return Err(StrategyError::Inference(format!(
            "recovered count {n_o} is not a non-negative integer"
        )));
    }
    let total = &n_o + Rational::from_int(n_i as i64);
    if total.is_zero() {
        return Err(StrategyError::Inference("no data points at all".into()));
    }
    let true_average = (&s_o + s_i) / total;
    Ok(AverageInference { n_o, s_o, true_average })
}

/// Inference from the attacker's observed history: the two probe answers
/// are the last two broadcasts, the attacker's own data is its factual input.
pub fn average_infer_history(o: &ObservedHistory) -> Result<AlgorithmOutput, StrategyError> {
    let answers: Vec<&Rational> = o.broadcasts().filter_map(AlgorithmOutput::as_scalar).collect();
    let [.., a1, a2] = answers.as_slice() else {
        return Err(StrategyError::Inference("fewer than two probe answers".into()));
    };
    let mut s_i = Rational::zero();
    let mut n_i = 0usize;
    for payload in o.own_factuals() {
        match payload {
            UpdatePayload::PointSet(points) => {
                for p in points {
                    s_i += &p[0];
                    n_i += 1;
                }
            }
            UpdatePayload::Scalar(v) => {
                s_i += v;
                n_i += 1;
            }
            _ => {}
        }
    }
    Ok(AlgorithmOutput::Scalar(average_infer(a1, a2, &s_i, n_i)?.true_average))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q;

    #[test]
    fn primary_branch() {
        // Others: 10 over 3 points. a1 = 10/4, a2 = 10/5.
        let r = average_infer(&q(5, 2), &q(2, 1), &q(4, 1), 2).unwrap();
        assert_eq!(r.n_o, q(3, 1));
        assert_eq!(r.s_o, q(10, 1));
        assert_eq!(r.true_average, q(14, 5));
    }

    #[test]
    fn zero_sum_fallback() {
        // Others sum to 0 over 4 points; second probe is [1] so a2 = 1/6.
        let r = average_infer(&q(0, 1), &q(1, 6), &q(3, 1), 2).unwrap();
        assert_eq!(r.n_o, q(4, 1));
        assert_eq!(r.s_o, q(0, 1));
        assert_eq!(r.true_average, q(3, 6));
    }

    #[test]
    fn equal_answers_rejected() {
        assert!(matches!(
            average_infer(&q(3, 1), &q(3, 1), &q(1, 1), 2),
            Err(StrategyError::Inference(_))
        ));
        assert!(average_infer(&q(1, 1), &q(2, 5), &q(1, 1), 2).is_err());
    }
}
