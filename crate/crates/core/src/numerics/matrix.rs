use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Rational;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },
    #[error("matrix is singular")]
    Singular,
}

/// Dense row-major matrix of exact rationals.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl RMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RMatrix {
            rows,
            cols,
            entries: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Rational>) -> Result<Self, LinalgError> {
        if entries.len() != rows * cols {
            return Err(LinalgError::Dimension {
                op: "from_entries",
                detail: format!("{} entries for {}x{}", entries.len(), rows, cols),
            });
        }
        Ok(RMatrix { rows, cols, entries })
    }

    /// Builds from nested rows; panics on ragged input (test and fixture helper).
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        RMatrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|row| row.iter().map(|&v| Rational::from_int(v)).collect())
                .collect(),
        )
    }

    pub fn column(values: Vec<Rational>) -> Self {
        let n = values.len();
        RMatrix {
            rows: n,
            cols: 1,
            entries: values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: Rational) {
        self.entries[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col_vec(&self, c: usize) -> Vec<Rational> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|r| (0..r).all(|c| self.get(r, c) == self.get(c, r)))
    }

    pub fn mul(&self, other: &RMatrix) -> Result<RMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Dimension {
                op: "mul",
                detail: format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Rational::zero();
                for k in 0..self.cols {
                    acc += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &RMatrix) -> Result<RMatrix, LinalgError> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &RMatrix) -> Result<RMatrix, LinalgError> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, factor: &Rational) -> RMatrix {
        RMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &RMatrix,
        op: &'static str,
        f: impl Fn(&Rational, &Rational) -> Rational,
    ) -> Result<RMatrix, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::Dimension {
                op,
                detail: format!("{}x{} vs {}x{}", self.rows, self.cols, other.rows, other.cols),
            });
        }
        Ok(RMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect(),
        })
    }

    /// Exact determinant by elimination.
    pub fn determinant(&self) -> Result<Rational, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::Dimension {
                op: "determinant",
                detail: format!("{}x{} is not square", self.rows, self.cols),
            });
        }
        let n = self.rows;
        let mut m = self.clone();
        let mut det = Rational::one();
        for col in 0..n {
            let Some(pivot) = (col..n).find(|&r| !m.get(r, col).is_zero()) else {
                return Ok(Rational::zero());
            };
            if pivot != col {
                m.swap_rows(pivot, col);
                det = -det;
            }
            let p = m.get(col, col).clone();
            det *= &p;
            for r in col + 1..n {
                if m.get(r, col).is_zero() {
                    continue;
                }
                let factor = m.get(r, col) / &p;
                for c in col..n {
                    let v = m.get(r, c) - &factor * m.get(col, c);
                    m.set(r, c, v);
                }
            }
        }
        Ok(det)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.entries.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl fmt::Debug for RMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for (c, v) in self.row(r).iter().enumerate() {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{v}")?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Computes `aᵀ·b`.
pub fn mat_mul_t(a: &RMatrix, b: &RMatrix) -> Result<RMatrix, LinalgError> {
    if a.rows != b.rows {
        return Err(LinalgError::Dimension {
            op: "mat_mul_t",
            detail: format!("a has {} rows, b has {}", a.rows, b.rows),
        });
    }
    let mut out = RMatrix::zeros(a.cols, b.cols);
    for i in 0..a.cols {
        for j in 0..b.cols {
            let mut acc = Rational::zero();
            for k in 0..a.rows {
                acc += a.get(k, i) * b.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Solves `a·x = b` by Gauss-Jordan elimination on the augmented matrix.
pub fn solve(a: &RMatrix, b: &RMatrix) -> Result<RMatrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::Dimension {
            op: "solve",
            detail: format!("{}x{} is not square", a.rows, a.cols),
        });
    }
    if b.rows != a.rows {
        return Err(LinalgError::Dimension {
            op: "solve",
            detail: format!("rhs has {} rows, expected {}", b.rows, a.rows),
        });
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !m.get(r, col).is_zero())
            .ok_or(LinalgError::Singular)?;
        m.swap_rows(pivot, col);
        x.swap_rows(pivot, col);

        let inv = m.get(col, col).recip();
        for c in 0..n {
            let v = m.get(col, c) * &inv;
            m.set(col, c, v);
        }
        for c in 0..x.cols {
            let v = x.get(col, c) * &inv;
            x.set(col, c, v);
        }
        for r in 0..n {
            if r == col || m.get(r, col).is_zero() {
                continue;
            }
            let factor = m.get(r, col).clone();
            for c in 0..n {
                let v = m.get(r, c) - &factor * m.get(col, c);
                m.set(r, c, v);
            }
            for c in 0..x.cols {
                let v = x.get(r, c) - &factor * x.get(col, c);
                x.set(r, c, v);
            }
        }
    }
    Ok(x)
}

pub fn inverse(a: &RMatrix) -> Result<RMatrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::Dimension {
            op: "inverse",
            detail: format!("{}x{} is not square", a.rows, a.cols),
        });
    }
    solve(a, &RMatrix::identity(a.rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q;

    fn m(rows: &[&[i64]]) -> RMatrix {
        RMatrix::from_i64_rows(rows)
    }

    #[test]
    fn mat_mul_t_small() {
        let a = m(&[&[1, 1], &[1, 0]]);
        let b = m(&[&[1], &[1]]);
        assert_eq!(mat_mul_t(&a, &b).unwrap(), m(&[&[2], &[1]]));
    }

    #[test]
    fn mat_mul_t_gram_of_three_points() {
        let x = m(&[&[1, 1], &[1, 0], &[1, 2]]);
        assert_eq!(mat_mul_t(&x, &x).unwrap(), m(&[&[3, 3], &[3, 5]]));
    }

    #[test]
    fn mat_mul_t_rejects_row_mismatch() {
        let a = RMatrix::zeros(3, 2);
        let b = RMatrix::zeros(2, 1);
        assert!(matches!(mat_mul_t(&a, &b), Err(LinalgError::Dimension { .. })));
    }

    #[test]
    fn solve_two_by_two() {
        let a = m(&[&[3, 3], &[3, 5]]);
        let b = m(&[&[4], &[5]]);
        let x = solve(&a, &b).unwrap();
        assert_eq!(x, RMatrix::column(vec![q(5, 6), q(1, 2)]));
    }

    #[test]
    fn solve_identity_returns_rhs() {
        let b = RMatrix::column(vec![q(1, 3), q(-2, 7), q(9, 1)]);
        assert_eq!(solve(&RMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn solve_singular() {
        let a = m(&[&[1, 1], &[2, 2]]);
        let b = m(&[&[1], &[2]]);
        assert_eq!(solve(&a, &b), Err(LinalgError::Singular));
    }

    #[test]
    fn solve_needs_row_swap() {
        let a = m(&[&[0, 1], &[1, 0]]);
        let b = m(&[&[3], &[4]]);
        assert_eq!(solve(&a, &b).unwrap(), m(&[&[4], &[3]]));
    }

    #[test]
    fn inverse_of_diagonal() {
        let a = m(&[&[2, 0], &[0, 4]]);
        let expected = RMatrix::from_rows(vec![vec![q(1, 2), q(0, 1)], vec![q(0, 1), q(1, 4)]]);
        assert_eq!(inverse(&a).unwrap(), expected);
        assert_eq!(inverse(&RMatrix::identity(3)).unwrap(), RMatrix::identity(3));
    }

    #[test]
    fn inverse_rejects_non_square() {
        assert!(matches!(
            inverse(&RMatrix::zeros(2, 3)),
            Err(LinalgError::Dimension { .. })
        ));
    }

    #[test]
    fn determinant_values() {
        assert_eq!(m(&[&[3, 3], &[3, 9]]).determinant().unwrap(), q(18, 1));
        assert_eq!(m(&[&[0, 1], &[1, 0]]).determinant().unwrap(), q(-1, 1));
        assert_eq!(m(&[&[1, 2], &[2, 4]]).determinant().unwrap(), q(0, 1));
    }
}
