use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AlgorithmError, AlgorithmOutput, Norm};
use crate::numerics::Rational;
use crate::protocol::{Point, UpdatePayload};

pub const DEFAULT_ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Maximum distance from a point to its center.
    Center,
    /// Sum of distances from points to their centers.
    Median,
}

/// Optimal center set together with the induced partition.
///
/// `cost` is measured in the comparison scale of the norm: for L2 k-center it
/// is the squared radius.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KCenterSolution {
    pub centers: Vec<Point>,
    /// `clusters[i]` holds the points assigned to `centers[i]`.
    pub clusters: Vec<Vec<Point>>,
    pub cost: Rational,
}

/// Distance in the norm's comparison scale (squared for L2).
pub fn distance(a: &[Rational], b: &[Rational], norm: Norm) -> Rational {
    let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    match norm {
        Norm::L1 => diffs.sum(),
        Norm::L2 => diffs.map(|d| &d * &d).sum(),
        Norm::LInf => diffs.fold(Rational::zero(), Rational::max),
    }
}

pub fn norm_value(a: &[Rational], norm: Norm) -> Rational {
    let origin = vec![Rational::zero(); a.len()];
    distance(a, &origin, norm)
}

/// Union of all points in point-set payloads.
pub fn union_points(ledger: &[UpdatePayload]) -> Result<BTreeSet<Point>, AlgorithmError> {
    let mut out = BTreeSet::new();
    let mut dim = None;
    for payload in ledger {
        match payload {
            UpdatePayload::PointSet(points) => {
                for p in points {
                    match dim {
                        None => dim = Some(p.len()),
                        Some(d) if d != p.len() => {
                            return Err(AlgorithmError::Dimension(format!(
                                "points of dimension {d} and {}",
                                p.len()
                            )))
                        }
                        _ => {}
                    }
                    out.insert(p.clone());
                }
            }
            UpdatePayload::Empty => {}
            other => {
                return Err(AlgorithmError::PayloadKind {
                    algorithm: "clustering",
                    found: other.kind_name(),
                })
            }
        }
    }
    Ok(out)
}

pub fn alg_kcenter(
    ledger: &[UpdatePayload],
    k: usize,
    p: Norm,
) -> Result<(AlgorithmOutput, KCenterSolution), AlgorithmError> {
    let points: Vec<Point> = union_points(ledger)?.into_iter().collect();
    let sol = cluster_points(&points, k, p, Objective::Center, DEFAULT_ENUMERATION_LIMIT)?;
    Ok((AlgorithmOutput::Centers(sol.centers.clone()), sol))
}

pub fn alg_kmedian(
    ledger: &[UpdatePayload],
    k: usize,
    p: Norm,
) -> Result<(AlgorithmOutput, KCenterSolution), AlgorithmError> {
    let points: Vec<Point> = union_points(ledger)?.into_iter().collect();
    let sol = cluster_points(&points, k, p, Objective::Median, DEFAULT_ENUMERATION_LIMIT)?;
    Ok((AlgorithmOutput::Centers(sol.centers.clone()), sol))
}

/// Exhaustive search over all k-subsets of `points`.
///
/// Ties on cost go to the smaller total norm of the center set, then to the
/// lexicographically smaller sorted center list.
pub fn cluster_points(
    points: &[Point],
    k: usize,
    norm: Norm,
    objective: Objective,
    limit: usize,
) -> Result<KCenterSolution, AlgorithmError> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort();
    pts.dedup();
    let n = pts.len();
    if k == 0 {
        return Err(AlgorithmError::Unsupported("k must be at least 1".into()));
    }
    if n < k {
        return Err(AlgorithmError::NotEnoughPoints { need: k, have: n });
    }
    if n > limit {
        return Err(AlgorithmError::InstanceTooLarge { size: n, limit });
    }
    let dim = pts[0].len();
    if objective == Objective::Median && norm == Norm::L2 && dim > 1 {
        return Err(AlgorithmError::Unsupported(
            "k-median under L2 needs square roots; use p=1, p=inf or 1-dimensional data".into(),
        ));
    }

    let dist: Vec<Vec<Rational>> = pts
        .iter()
        .map(|a| pts.iter().map(|b| distance(a, b, norm)).collect())
        .collect();
    let norms: Vec<Rational> = pts.iter().map(|p| norm_value(p, norm)).collect();

    let mut best: Option<(Rational, Rational, Vec<usize>)> = None;
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let cost = subset_cost(&dist, &combo, objective);
        let better = match &best {
            None => true,
            Some((bc, bn, _)) => {
                if cost != *bc {
                    cost < *bc
                } else {
                    let total: Rational = combo.iter().map(|&i| &norms[i]).sum();
                    // Equal cost and norm: the earlier (lexicographically smaller) combo stays.
                    total < *bn
                }
            }
        };
        if better {
            let total: Rational = combo.iter().map(|&i| &norms[i]).sum();
            best = Some((cost, total, combo.clone()));
        }
        if !next_combination(&mut combo, n) {
            break;
        }
    }

    let (cost, _, chosen) = best.expect("at least one subset exists");
    let mut clusters = vec![Vec::new(); k];
    for (i, p) in pts.iter().enumerate() {
        let slot = nearest_center(&dist, &norms, &chosen, i);
        clusters[slot].push(p.clone());
    }
    Ok(KCenterSolution {
        centers: chosen.iter().map(|&i| pts[i].clone()).collect(),
        clusters,
        cost,
    })
}

fn subset_cost(dist: &[Vec<Rational>], combo: &[usize], objective: Objective) -> Rational {
    let per_point = dist
        .iter()
        .map(|row| combo.iter().map(|&c| &row[c]).min().expect("non-empty center set"));
    match objective {
        Objective::Center => per_point.max().cloned().unwrap_or_else(Rational::zero),
        Objective::Median => per_point.sum(),
    }
}

// Nearest center; ties toward the smaller norm, then the earlier center.
fn nearest_center(dist: &[Vec<Rational>], norms: &[Rational], chosen: &[usize], i: usize) -> usize {
    let mut best = 0;
    for slot in 1..chosen.len() {
        let (c, b) = (chosen[slot], chosen[best]);
        let closer = dist[i][c] < dist[i][b] || (dist[i][c] == dist[i][b] && norms[c] < norms[b]);
        if closer {
            best = slot;
        }
    }
    best
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
