use serde::{Deserialize, Serialize};

use super::{AlgorithmError, AlgorithmOutput};
use crate::numerics::{solve, LinalgError, RMatrix, Rational};
use crate::protocol::{LabeledPoint, UpdatePayload};

/// Gram matrix XᵀX and cross moment Xᵀy of a labeled multiset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MomentPair {
    pub gram: RMatrix,
    pub cross: RMatrix,
}

impl MomentPair {
    pub fn zero(d: usize) -> Self {
        MomentPair {
            gram: RMatrix::zeros(d + 1, d + 1),
            cross: RMatrix::zeros(d + 1, 1),
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.rows() - 1
    }

    pub fn add(&self, other: &MomentPair) -> Result<MomentPair, AlgorithmError> {
        Ok(MomentPair {
            gram: self.gram.add(&other.gram)?,
            cross: self.cross.add(&other.cross)?,
        })
    }

    pub fn sub(&self, other: &MomentPair) -> Result<MomentPair, AlgorithmError> {
        Ok(MomentPair {
            gram: self.gram.sub(&other.gram)?,
            cross: self.cross.sub(&other.cross)?,
        })
    }

    /// Coefficients solving the normal equations, `None` when the Gram is singular.
    pub fn solve(&self) -> Result<Option<Vec<Rational>>, AlgorithmError> {
        match solve(&self.gram, &self.cross) {
            Ok(beta) => Ok(Some(beta.col_vec(0))),
            Err(LinalgError::Singular) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

pub fn moments(points: &[LabeledPoint], d: usize) -> Result<MomentPair, AlgorithmError> {
    let mut m = MomentPair::zero(d);
    for (idx, p) in points.iter().enumerate() {
        if p.x.len() != d + 1 {
            return Err(AlgorithmError::Dimension(format!(
                "sample {} has {} features, expected {}",
                idx + 1,
                p.x.len(),
                d + 1
            )));
        }
        for r in 0..=d {
            for c in 0..=d {
                let v = m.gram.get(r, c) + &p.x[r] * &p.x[c];
                m.gram.set(r, c, v);
            }
            let v = m.cross.get(r, 0) + &p.x[r] * &p.y;
            m.cross.set(r, 0, v);
        }
    }
    Ok(m)
}

/// Concatenation of every labeled multiset in the ledger.
pub fn collect_labeled(ledger: &[UpdatePayload]) -> Result<Vec<LabeledPoint>, AlgorithmError> {
    let mut rows = Vec::new();
    for payload in ledger {
        match payload {
            UpdatePayload::LabeledMultiset(points) => rows.extend(points.iter().cloned()),
            UpdatePayload::Empty => {}
            other => {
                return Err(AlgorithmError::PayloadKind {
                    algorithm: "dlr",
                    found: other.kind_name(),
                })
            }
        }
    }
    Ok(rows)
}

/// Least-squares fit; `None` when XᵀX is singular (including no data).
pub fn fit(rows: &[LabeledPoint]) -> Result<Option<Vec<Rational>>, AlgorithmError> {
    let Some(first) = rows.first() else {
        return Ok(None);
    };
    moments(rows, first.dim())?.solve()
}

pub fn alg_dlr(ledger: &[UpdatePayload]) -> Result<AlgorithmOutput, AlgorithmError> {
    let rows = collect_labeled(ledger)?;
    Ok(match fit(&rows)? {
        Some(beta) => AlgorithmOutput::Coefficients(beta),
        None => AlgorithmOutput::Null,
    })
}

/// Sum of squared residuals Σ (y − x·β)².
pub fn lr_cost(rows: &[LabeledPoint], beta: &[Rational]) -> Rational {
    rows.iter()
        .map(|p| {
            let pred: Rational = p.x.iter().zip(beta).map(|(a, b)| a * b).sum();
            let r = &p.y - pred;
            &r * &r
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q;

    fn lp(x: i64, y: i64) -> LabeledPoint {
        LabeledPoint::from_features(&[q(x, 1)], q(y, 1))
    }

    #[test]
    fn dlr_small_fits() {
        let three = [UpdatePayload::labeled(vec![lp(1, 1), lp(0, 1), lp(2, 2)])];
        assert_eq!(
            alg_dlr(&three).unwrap(),
            AlgorithmOutput::Coefficients(vec![q(5, 6), q(1, 2)])
        );
        let two = [UpdatePayload::labeled(vec![lp(1, 1), lp(0, 1)])];
        assert_eq!(
            alg_dlr(&two).unwrap(),
            AlgorithmOutput::Coefficients(vec![q(1, 1), q(0, 1)])
        );
    }

    #[test]
    fn dlr_singular_is_null() {
        let same_x = [UpdatePayload::labeled(vec![lp(1, 1), lp(1, 3)])];
        assert_eq!(alg_dlr(&same_x).unwrap(), AlgorithmOutput::Null);
        assert_eq!(alg_dlr(&[]).unwrap(), AlgorithmOutput::Null);
    }

    #[test]
    fn moments_of_condition_update() {
        let m = moments(&[lp(0, 1), lp(0, 1), lp(3, 1)], 1).unwrap();
        assert_eq!(m.gram, RMatrix::from_i64_rows(&[&[3, 3], &[3, 9]]));
        assert_eq!(m.cross, RMatrix::from_i64_rows(&[&[3], &[3]]));
        assert_eq!(moments(&[], 2).unwrap(), MomentPair::zero(2));
        assert!(moments(&[lp(1, 1)], 2).is_err());
    }

    #[test]
    fn cost_is_separable() {
        let a = [lp(1, 1), lp(0, 2)];
        let b = [lp(3, 0)];
        let beta = [q(1, 2), q(1, 3)];
        let both: Vec<_> = a.iter().chain(&b).cloned().collect();
        assert_eq!(lr_cost(&both, &beta), lr_cost(&a, &beta) + lr_cost(&b, &beta));
    }
}
