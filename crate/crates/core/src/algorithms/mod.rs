//! Aggregation algorithms applied by the ledger to the sequence of ledger updates.

mod clustering;
mod regression;
mod scalar;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::numerics::{LinalgError, Rational};
use crate::protocol::{Point, UpdatePayload};

pub use clustering::{
    alg_kcenter, alg_kmedian, cluster_points, distance, norm_value, union_points, KCenterSolution, Objective,
    DEFAULT_ENUMERATION_LIMIT,
};
pub use regression::{alg_dlr, collect_labeled, fit, lr_cost, moments, MomentPair};
pub use scalar::{alg_average, alg_max};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AlgorithmError {
    #[error("no ledger data to aggregate")]
    NoOutput,
    #[error("need at least {need} distinct points, have {have}")]
    NotEnoughPoints { need: usize, have: usize },
    #[error("{size} points exceed the enumeration limit of {limit}")]
    InstanceTooLarge { size: usize, limit: usize },
    #[error("{algorithm} cannot aggregate a {found} payload")]
    PayloadKind {
        algorithm: &'static str,
        found: &'static str,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported parameters: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmOutput {
    Scalar(Rational),
    /// Sorted ascending in lexicographic coordinate order.
    Centers(Vec<Point>),
    Coefficients(Vec<Rational>),
    Null,
}

impl AlgorithmOutput {
    pub fn is_null(&self) -> bool {
        matches!(self, AlgorithmOutput::Null)
    }

    pub fn as_coefficients(&self) -> Option<&[Rational]> {
        match self {
            AlgorithmOutput::Coefficients(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<&Rational> {
        match self {
            AlgorithmOutput::Scalar(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_centers(&self) -> Option<&[Point]> {
        match self {
            AlgorithmOutput::Centers(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for AlgorithmOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn point(p: &[Rational]) -> String {
            if p.len() == 1 {
                p[0].to_string()
            } else {
                format!("({})", p.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))
            }
        }
        match self {
            AlgorithmOutput::Scalar(v) => write!(f, "{v}"),
            AlgorithmOutput::Centers(cs) => {
                write!(f, "{{{}}}", cs.iter().map(|c| point(c)).collect::<Vec<_>>().join(", "))
            }
            AlgorithmOutput::Coefficients(b) => write!(f, "{}", point(b)),
            AlgorithmOutput::Null => write!(f, "null"),
        }
    }
}

/// Distance used by the clustering algorithms. Only p ∈ {1, 2, ∞} keep every
/// comparison inside Q; L2 is compared through squared distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Norm {
    L1,
    #[default]
    L2,
    LInf,
}

impl Norm {
    pub fn label(&self) -> &'static str {
        match self {
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::LInf => "inf",
        }
    }
}

impl Serialize for Norm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Norm::L1 => s.serialize_u64(1),
            Norm::L2 => s.serialize_u64(2),
            Norm::LInf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Text(String),
        }
        let parsed = match Repr::deserialize(d)? {
            Repr::Num(1) => Some(Norm::L1),
            Repr::Num(2) => Some(Norm::L2),
            Repr::Num(_) => None,
            Repr::Text(t) => match t.as_str() {
                "1" => Some(Norm::L1),
                "2" => Some(Norm::L2),
                "inf" | "infinity" => Some(Norm::LInf),
                _ => None,
            },
        };
        parsed.ok_or_else(|| serde::de::Error::custom("p must be 1, 2 or \"inf\""))
    }
}

/// The aggregation rule ρ.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Algorithm {
    Max,
    Average,
    Kcenter {
        k: usize,
        #[serde(default)]
        p: Norm,
    },
    Kmedian {
        k: usize,
        #[serde(default)]
        p: Norm,
    },
    Dlr {
        d: usize,
    },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Max => "max",
            Algorithm::Average => "average",
            Algorithm::Kcenter { .. } => "kcenter",
            Algorithm::Kmedian { .. } => "kmedian",
            Algorithm::Dlr { .. } => "dlr",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Algorithm::Kcenter { k, p } | Algorithm::Kmedian { k, p } => {
                format!("{}(k={k}, p={})", self.name(), p.label())
            }
            Algorithm::Dlr { d } => format!("dlr(d={d})"),
            _ => self.name().to_string(),
        }
    }

    /// Output broadcast by the ledger. Too little data to produce an answer
    /// (no points yet, fewer than k points) is reported as `Null`; malformed
    /// data is an error.
    pub fn evaluate(&self, ledger: &[UpdatePayload]) -> Result<AlgorithmOutput, AlgorithmError> {
        let result = match self {
            Algorithm::Max => alg_max(ledger),
            Algorithm::Average => alg_average(ledger),
            Algorithm::Kcenter { k, p } => alg_kcenter(ledger, *k, *p).map(|(o, _)| o),
            Algorithm::Kmedian { k, p } => alg_kmedian(ledger, *k, *p).map(|(o, _)| o),
            Algorithm::Dlr { d } => {
                let rows = collect_labeled(ledger)?;
                if let Some(row) = rows.iter().find(|r| r.dim() != *d) {
                    return Err(AlgorithmError::Dimension(format!(
                        "dlr(d={d}) received a {}-dimensional sample",
                        row.dim()
                    )));
                }
                alg_dlr(ledger)
            }
        };
        match result {
            Err(AlgorithmError::NoOutput) | Err(AlgorithmError::NotEnoughPoints { .. }) => Ok(AlgorithmOutput::Null),
            other => other,
        }
    }

    /// Cost of `output` on the data in `payloads`, for algorithms that are
    /// separable minimizations (cost of a union is the sum of costs).
    pub fn separable_cost(
        &self,
        payloads: &[UpdatePayload],
        output: &AlgorithmOutput,
    ) -> Result<Option<Rational>, AlgorithmError> {
        match (self, output) {
            (Algorithm::Dlr { .. }, AlgorithmOutput::Coefficients(beta)) => {
                let rows = collect_labeled(payloads)?;
                Ok(Some(lr_cost(&rows, beta)))
            }
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q;

    #[test]
    fn output_serde() {
        let c = AlgorithmOutput::Centers(vec![vec![q(-1, 1000)], vec![q(0, 1)]]);
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"centers":[["-1/1000"],["0"]]}"#);
        assert_eq!(serde_json::to_string(&AlgorithmOutput::Null).unwrap(), r#""null""#);
        let b = AlgorithmOutput::Coefficients(vec![q(5, 6), q(1, 2)]);
        assert_eq!(serde_json::to_string(&b).unwrap(), r#"{"coefficients":["5/6","1/2"]}"#);
        assert_eq!(b.to_string(), "(5/6, 1/2)");
    }

    #[test]
    fn algorithm_serde() {
        let a: Algorithm = serde_json::from_str(r#"{"name":"kcenter","k":3,"p":"inf"}"#).unwrap();
        assert_eq!(a, Algorithm::Kcenter { k: 3, p: Norm::LInf });
        let a: Algorithm = serde_json::from_str(r#"{"name":"kmedian","k":3,"p":1}"#).unwrap();
        assert_eq!(a, Algorithm::Kmedian { k: 3, p: Norm::L1 });
        let a: Algorithm = serde_json::from_str(r#"{"name":"dlr","d":2}"#).unwrap();
        assert_eq!(a, Algorithm::Dlr { d: 2 });
        assert!(serde_json::from_str::<Algorithm>(r#"{"name":"kcenter","k":3,"p":3}"#).is_err());
        let text = serde_json::to_string(&Algorithm::Kcenter { k: 2, p: Norm::L2 }).unwrap();
        assert_eq!(text, r#"{"name":"kcenter","k":2,"p":2}"#);
    }

    #[test]
    fn evaluate_maps_insufficient_data_to_null() {
        let alg = Algorithm::Kcenter { k: 3, p: Norm::L2 };
        let ledger = vec![UpdatePayload::points_1d([q(1, 1)])];
        assert_eq!(alg.evaluate(&ledger).unwrap(), AlgorithmOutput::Null);
        assert!(matches!(
            alg_kcenter(&ledger, 3, Norm::L2),
            Err(AlgorithmError::NotEnoughPoints { need: 3, have: 1 })
        ));
    }
}
