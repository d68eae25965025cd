use std::collections::BTreeSet;

use exclusim_core::algorithms::{
    alg_average, alg_dlr, alg_kcenter, alg_kmedian, lr_cost, Algorithm, AlgorithmOutput, Norm,
};
use exclusim_core::numerics::{q, Rational};
use exclusim_core::protocol::{LabeledPoint, Point, UpdatePayload};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = Rational> {
    (-12i64..=12, 1i64..=3).prop_map(|(n, d)| q(n, d))
}

fn point_set(dim: usize, max: usize) -> impl Strategy<Value = BTreeSet<Point>> {
    prop::collection::btree_set(prop::collection::vec(coord(), dim), 1..=max)
}

/// Distance for the oracle. L2 is squared: only comparisons are made.
fn dist(a: &Point, b: &Point, p: Norm) -> Rational {
    let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    match p {
        Norm::L1 => diffs.sum(),
        Norm::L2 => diffs.map(|d| &d * &d).sum(),
        Norm::LInf => diffs.fold(Rational::zero(), Rational::max),
    }
}

fn center_cost(points: &[Point], centers: &[Point], p: Norm) -> Rational {
    points
        .iter()
        .map(|x| centers.iter().map(|c| dist(x, c, p)).min().unwrap())
        .fold(Rational::zero(), Rational::max)
}

fn median_cost(points: &[Point], centers: &[Point], p: Norm) -> Rational {
    points
        .iter()
        .map(|x| centers.iter().map(|c| dist(x, c, p)).min().unwrap())
        .sum()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut with: Vec<Vec<usize>> = subsets(n - 1, k - 1);
    for s in &mut with {
        s.push(n - 1);
    }
    with.extend(subsets(n - 1, k));
    with
}

fn best_cost(points: &[Point], k: usize, cost: impl Fn(&[Point]) -> Rational) -> Rational {
    subsets(points.len(), k)
        .into_iter()
        .map(|idx| cost(&idx.iter().map(|&i| points[i].clone()).collect::<Vec<_>>()))
        .min()
        .unwrap()
}

fn split(points: &BTreeSet<Point>, cuts: &[usize]) -> Vec<UpdatePayload> {
    let all: Vec<Point> = points.iter().cloned().collect();
    let mut parts: Vec<BTreeSet<Point>> = vec![BTreeSet::new(); cuts.len().max(1)];
    for (i, p) in all.into_iter().enumerate() {
        let slot = cuts.get(i % cuts.len().max(1)).copied().unwrap_or(0) % parts.len();
        parts[slot].insert(p);
    }
    parts.into_iter().map(UpdatePayload::PointSet).collect()
}

fn norm() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::L1), Just(Norm::L2), Just(Norm::LInf)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kcenter_is_optimal_and_set_choice(
        (dim, pts) in (1usize..=2).prop_flat_map(|d| (Just(d), point_set(d, 7))),
        k in 1usize..=3,
        p in norm(),
        cuts in prop::collection::vec(0usize..4, 1..4),
    ) {
        prop_assume!(pts.len() >= k);
        let _ = dim;
        let points: Vec<Point> = pts.iter().cloned().collect();
        let (out, _) = alg_kcenter(&[UpdatePayload::PointSet(pts.clone())], k, p).unwrap();
        let centers = out.as_centers().unwrap().to_vec();
        prop_assert_eq!(centers.len(), k);
        prop_assert!(centers.iter().all(|c| pts.contains(c)));
        prop_assert_eq!(center_cost(&points, &centers, p), best_cost(&points, k, |c| center_cost(&points, c, p)));
        let mut parts = split(&pts, &cuts);
        let (again, _) = alg_kcenter(&parts, k, p).unwrap();
        prop_assert_eq!(&again, &out);
        parts.reverse();
        prop_assert_eq!(&alg_kcenter(&parts, k, p).unwrap().0, &out);
    }

    #[test]
    fn kmedian_is_optimal_and_set_choice(
        (dim, pts) in (1usize..=2).prop_flat_map(|d| (Just(d), point_set(d, 7))),
        k in 1usize..=3,
        cuts in prop::collection::vec(0usize..4, 1..4),
    ) {
        prop_assume!(pts.len() >= k);
        // Squared L2 sums are not L2 sums; L1 is exact in any dimension.
        let p = if dim == 1 { Norm::L2 } else { Norm::L1 };
        let points: Vec<Point> = pts.iter().cloned().collect();
        let (out, _) = alg_kmedian(&[UpdatePayload::PointSet(pts.clone())], k, p).unwrap();
        let centers = out.as_centers().unwrap().to_vec();
        prop_assert!(centers.iter().all(|c| pts.contains(c)));
        let oracle_norm = if dim == 1 { Norm::L1 } else { p };
        prop_assert_eq!(
            median_cost(&points, &centers, oracle_norm),
            best_cost(&points, k, |c| median_cost(&points, c, oracle_norm))
        );
        prop_assert_eq!(&alg_kmedian(&split(&pts, &cuts), k, p).unwrap().0, &out);
    }

    #[test]
    fn average_is_permutation_invariant(values in prop::collection::vec(coord(), 1..10), cuts in prop::collection::vec(0usize..3, 1..4)) {
        let payloads: Vec<UpdatePayload> = values.iter().map(|v| UpdatePayload::points_1d([v.clone()])).collect();
        let expected = values.iter().cloned().sum::<Rational>() / Rational::from_int(values.len() as i64);
        prop_assert_eq!(alg_average(&payloads).unwrap(), AlgorithmOutput::Scalar(expected.clone()));
        let mut shuffled = payloads.clone();
        shuffled.rotate_left(cuts[0] % payloads.len());
        shuffled.reverse();
        prop_assert_eq!(alg_average(&shuffled).unwrap(), AlgorithmOutput::Scalar(expected));
    }

    #[test]
    fn dlr_satisfies_normal_equations(
        d in 1usize..=3,
        raw in prop::collection::vec((prop::collection::vec(coord(), 3), coord()), 1..9),
        lambda in 1i64..5,
    ) {
        let rows: Vec<LabeledPoint> = raw.iter().map(|(f, y)| LabeledPoint::from_features(&f[..d], y.clone())).collect();
        let out = alg_dlr(&[UpdatePayload::labeled(rows.clone())]).unwrap();
        let mut reversed = rows.clone();
        reversed.reverse();
        prop_assert_eq!(&alg_dlr(&[UpdatePayload::labeled(reversed)]).unwrap(), &out);
        if let AlgorithmOutput::Coefficients(beta) = &out {
            // X^T (y - X beta) = 0, coordinate by coordinate.
            for c in 0..=d {
                let s: Rational = rows.iter().map(|r| {
                    let pred: Rational = r.x.iter().zip(beta).map(|(a, b)| a * b).sum();
                    &r.x[c] * &(&r.y - &pred)
                }).sum();
                prop_assert!(s.is_zero());
            }
            // Separability and scaling of the cost.
            let (a, b) = rows.split_at(rows.len() / 2);
            prop_assert_eq!(lr_cost(&rows, beta), &lr_cost(a, beta) + &lr_cost(b, beta));
            let scaled: Vec<LabeledPoint> = (0..lambda).flat_map(|_| rows.iter().cloned()).collect();
            prop_assert_eq!(lr_cost(&scaled, beta), &lr_cost(&rows, beta) * &Rational::from_int(lambda));
            let alg = Algorithm::Dlr { d };
            let via_alg = alg.separable_cost(&[UpdatePayload::labeled(rows.clone())], &out).unwrap();
            prop_assert_eq!(via_alg, Some(lr_cost(&rows, beta)));
        }
    }
}

#[test]
fn null_when_gram_singular() {
    let row = LabeledPoint::from_features(&[q(1, 1)], q(2, 1));
    assert_eq!(
        alg_dlr(&[UpdatePayload::labeled(vec![row.clone(), row])]).unwrap(),
        AlgorithmOutput::Null
    );
}

#[test]
fn too_few_points_is_null() {
    let out = Algorithm::Kcenter { k: 3, p: Norm::L2 }
        .evaluate(&[UpdatePayload::points_1d([q(1, 1)])])
        .unwrap();
    assert_eq!(out, AlgorithmOutput::Null);
}
