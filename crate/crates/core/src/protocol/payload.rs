use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Rational;

/// A point in Q^d.
pub type Point = Vec<Rational>;

/// One regression sample. `x` carries the leading intercept coordinate 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: Vec<Rational>,
    pub y: Rational,
}

impl LabeledPoint {
    /// Builds a sample from raw features, prepending the intercept 1.
    pub fn from_features(features: &[Rational], y: Rational) -> Self {
        let mut x = Vec::with_capacity(features.len() + 1);
        x.push(Rational::one());
        x.extend_from_slice(features);
        LabeledPoint { x, y }
    }

    /// Dimension d (excluding the intercept).
    pub fn dim(&self) -> usize {
        self.x.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PayloadError {
    #[error("labeled points have inconsistent dimensions ({0} vs {1})")]
    MixedDimensions(usize, usize),
    #[error("labeled point features must start with 1, got {0}")]
    MissingIntercept(Rational),
    #[error("labeled point needs at least the intercept feature")]
    EmptyFeatures,
    #[error("point set mixes dimensions ({0} vs {1})")]
    MixedPointDimensions(usize, usize),
    #[error("cannot combine {0} with {1}")]
    KindMismatch(&'static str, &'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdatePayload {
    Scalar(Rational),
    PointSet(BTreeSet<Point>),
    LabeledMultiset(Vec<LabeledPoint>),
    Empty,
}

impl UpdatePayload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            UpdatePayload::Scalar(_) => "scalar",
            UpdatePayload::PointSet(_) => "point_set",
            UpdatePayload::LabeledMultiset(_) => "labeled_multiset",
            UpdatePayload::Empty => "empty",
        }
    }

    /// One-dimensional point set from scalars.
    pub fn points_1d<I: IntoIterator<Item = Rational>>(values: I) -> Self {
        UpdatePayload::PointSet(values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn labeled(points: Vec<LabeledPoint>) -> Self {
        UpdatePayload::LabeledMultiset(points)
    }

    pub fn validate(&self) -> Result<(), PayloadError> {
        match self {
            UpdatePayload::PointSet(points) => {
                let mut dims = points.iter().map(Vec::len);
                if let Some(first) = dims.next() {
                    if let Some(other) = dims.find(|&d| d != first) {
                        return Err(PayloadError::MixedPointDimensions(first, other));
                    }
                }
                Ok(())
            }
            UpdatePayload::LabeledMultiset(rows) => {
                let mut width = None;
                for row in rows {
                    let Some(first) = row.x.first() else {
                        return Err(PayloadError::EmptyFeatures);
                    };
                    if *first != Rational::one() {
                        return Err(PayloadError::MissingIntercept(first.clone()));
                    }
                    match width {
                        None => width = Some(row.x.len()),
                        Some(w) if w != row.x.len() => return Err(PayloadError::MixedDimensions(w - 1, row.dim())),
                        _ => {}
                    }
                }
                Ok(())
            }
            UpdatePayload::Scalar(_) | UpdatePayload::Empty => Ok(()),
        }
    }

    /// Set union for point sets, multiset sum for labeled multisets.
    /// `Empty` is the identity on either side.
    pub fn union(&self, other: &UpdatePayload) -> Result<UpdatePayload, PayloadError> {
        use UpdatePayload::*;
        match (self, other) {
            (Empty, x) | (x, Empty) => Ok(x.clone()),
            (PointSet(a), PointSet(b)) => Ok(PointSet(a.union(b).cloned().collect())),
            (LabeledMultiset(a), LabeledMultiset(b)) => Ok(LabeledMultiset(a.iter().chain(b).cloned().collect())),
            (a, b) => Err(PayloadError::KindMismatch(a.kind_name(), b.kind_name())),
        }
    }

    pub fn as_point_set(&self) -> Option<&BTreeSet<Point>> {
        match self {
            UpdatePayload::PointSet(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_labeled(&self) -> Option<&[LabeledPoint]> {
        match self {
            UpdatePayload::LabeledMultiset(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<&Rational> {
        match self {
            UpdatePayload::Scalar(v) => Some(v),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q;

    #[test]
    fn serde_shapes() {
        let s = UpdatePayload::Scalar(q(90, 1));
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"scalar":"90"}"#);
        let p = UpdatePayload::points_1d([q(1, 1), q(-1, 1000)]);
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"point_set":[["-1/1000"],["1"]]}"#
        );
        let l = UpdatePayload::labeled(vec![LabeledPoint::from_features(&[q(3, 1)], q(1, 1))]);
        assert_eq!(
            serde_json::to_string(&l).unwrap(),
            r#"{"labeled_multiset":[{"x":["1","3"],"y":"1"}]}"#
        );
        assert_eq!(serde_json::to_string(&UpdatePayload::Empty).unwrap(), r#""empty""#);
        for payload in [s, p, l, UpdatePayload::Empty] {
            let text = serde_json::to_string(&payload).unwrap();
            assert_eq!(serde_json::from_str::<UpdatePayload>(&text).unwrap(), payload);
        }
    }

    #[test]
    fn union_semantics() {
        let a = UpdatePayload::points_1d([q(1, 1), q(2, 1)]);
        let b = UpdatePayload::points_1d([q(2, 1), q(3, 1)]);
        assert_eq!(
            a.union(&b).unwrap(),
            UpdatePayload::points_1d([q(1, 1), q(2, 1), q(3, 1)])
        );
        let r = LabeledPoint::from_features(&[q(0, 1)], q(1, 1));
        let m = UpdatePayload::labeled(vec![r.clone()]);
        assert_eq!(m.union(&m).unwrap(), UpdatePayload::labeled(vec![r.clone(), r]));
        assert_eq!(UpdatePayload::Empty.union(&a).unwrap(), a);
        assert!(a.union(&m).is_err());
    }

    #[test]
    fn validation() {
        let bad = UpdatePayload::labeled(vec![LabeledPoint {
            x: vec![q(2, 1), q(1, 1)],
            y: q(0, 1),
        }]);
        assert!(matches!(bad.validate(), Err(PayloadError::MissingIntercept(_))));
        let mixed = UpdatePayload::labeled(vec![
            LabeledPoint::from_features(&[q(1, 1)], q(0, 1)),
            LabeledPoint::from_features(&[q(1, 1), q(2, 1)], q(0, 1)),
        ]);
        assert!(matches!(mixed.validate(), Err(PayloadError::MixedDimensions(1, 2))));
    }
}
