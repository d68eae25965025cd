use super::{AlgorithmError, AlgorithmOutput};
use crate::numerics::Rational;
use crate::protocol::UpdatePayload;

pub fn alg_max(ledger: &[UpdatePayload]) -> Result<AlgorithmOutput, AlgorithmError> {
    let mut best: Option<&Rational> = None;
    for payload in ledger {
        match payload {
            UpdatePayload::Scalar(v) => {
                if best.is_none_or(|b| v > b) {
                    best = Some(v);
                }
            }
            UpdatePayload::Empty => {}
            other => {
                return Err(AlgorithmError::PayloadKind {
                    algorithm: "max",
                    found: other.kind_name(),
                })
            }
        }
    }
    best.cloned()
        .map(AlgorithmOutput::Scalar)
        .ok_or(AlgorithmError::NoOutput)
}

/// Mean of all points across all payloads, counted with multiplicity. The
/// count itself is not part of the output.
pub fn alg_average(ledger: &[UpdatePayload]) -> Result<AlgorithmOutput, AlgorithmError> {
    let mut sum = Rational::zero();
    let mut count = 0i64;
    for payload in ledger {
        match payload {
            UpdatePayload::PointSet(points) => {
                for p in points {
                    if p.len() != 1 {
                        return Err(AlgorithmError::Dimension(format!(
                            "average expects 1-dimensional points, got {}",
                            p.len()
                        )));
                    }
                    sum += &p[0];
                    count += 1;
                }
            }
            UpdatePayload::Scalar(v) => {
                sum += v;
                count += 1;
            }
            UpdatePayload::Empty => {}
            other => {
                return Err(AlgorithmError::PayloadKind {
                    algorithm: "average",
                    found: other.kind_name(),
                })
            }
        }
    }
    if count == 0 {
        return Err(AlgorithmError::NoOutput);
    }
    Ok(AlgorithmOutput::Scalar(sum / Rational::from_int(count)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q;

    fn s(v: i64) -> UpdatePayload {
        UpdatePayload::Scalar(q(v, 1))
    }

    #[test]
    fn max_basic() {
        assert_eq!(alg_max(&[s(100), s(110)]).unwrap(), AlgorithmOutput::Scalar(q(110, 1)));
        assert_eq!(alg_max(&[s(5)]).unwrap(), AlgorithmOutput::Scalar(q(5, 1)));
        assert_eq!(alg_max(&[]), Err(AlgorithmError::NoOutput));
    }

    #[test]
    fn average_counts_across_payloads() {
        // Others hold 10 over 3 points, then [0] arrives, then [0] again.
        let others = UpdatePayload::points_1d([q(1, 1), q(4, 1), q(5, 1)]);
        let zero = UpdatePayload::points_1d([q(0, 1)]);
        let a1 = alg_average(&[others.clone(), zero.clone()]).unwrap();
        assert_eq!(a1, AlgorithmOutput::Scalar(q(10, 4)));
        let a2 = alg_average(&[others, zero.clone(), zero]).unwrap();
        assert_eq!(a2, AlgorithmOutput::Scalar(q(2, 1)));
        let single = alg_average(&[UpdatePayload::points_1d([q(7, 1)])]).unwrap();
        assert_eq!(single, AlgorithmOutput::Scalar(q(7, 1)));
        assert_eq!(alg_average(&[]), Err(AlgorithmError::NoOutput));
    }
}
