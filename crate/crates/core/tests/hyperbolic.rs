//! Property tests for the Poincare-ball operations.

use aehnn::hyperbolic::{
    exp_map, exp_map_zero, log_map, log_map_zero, mobius_add, project_to_ball, BallPoint, Curvature,
    TangentVector,
};
use proptest::prelude::*;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A vector with the direction of `raw` and norm `radius`.
fn scaled(raw: Vec<f64>, radius: f64) -> Vec<f64> {
    let n = norm(&raw);
    if n < 1e-12 {
        return vec![0.0; raw.len()];
    }
    raw.into_iter().map(|x| x * radius / n).collect()
}

fn curvature() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0), Just(2.0)]
}

fn dimension() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(16), Just(64)]
}

/// `(c, v)` with `|v| <= max_norm`.
fn tangent(max_norm: f64) -> impl Strategy<Value = (f64, Vec<f64>)> {
    (curvature(), dimension()).prop_flat_map(move |(c, m)| {
        (
            Just(c),
            prop::collection::vec(-1.0f64..1.0, m),
            0.0..=max_norm,
        )
            .prop_map(|(c, raw, r)| (c, scaled(raw, r)))
    })
}

/// `(c, x, v)` with `sqrt(c) |x| <= 0.5` and `|v| <= max_norm`.
fn based_tangent(max_norm: f64) -> impl Strategy<Value = (f64, Vec<f64>, Vec<f64>)> {
    (curvature(), dimension()).prop_flat_map(move |(c, m)| {
        (
            Just(c),
            prop::collection::vec(-1.0f64..1.0, m),
            0.0..=0.5f64,
            prop::collection::vec(-1.0f64..1.0, m),
            0.0..=max_norm,
        )
            .prop_map(|(c, xr, xn, vr, vn)| (c, scaled(xr, xn / c.sqrt()), scaled(vr, vn)))
    })
}

fn ball_pair(max_norm: f64, c: f64) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    dimension().prop_flat_map(move |m| {
        (
            prop::collection::vec(-1.0f64..1.0, m),
            0.0..=max_norm,
            prop::collection::vec(-1.0f64..1.0, m),
            0.0..=max_norm,
        )
            .prop_map(move |(xr, xn, yr, yn)| (scaled(xr, xn / c.sqrt()), scaled(yr, yn / c.sqrt())))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn origin_round_trip((c, v) in tangent(5.0)) {
        let curv = Curvature::new(c).unwrap();
        let back = log_map_zero(&exp_map_zero(&TangentVector(v.clone()), curv));
        prop_assert!(dist(back.coords(), &v) / norm(&v).max(1.0) < 1e-6);
    }

    #[test]
    fn base_point_round_trip((c, x, v) in based_tangent(2.0)) {
        let curv = Curvature::new(c).unwrap();
        let base = BallPoint::new(x, curv).unwrap();
        let y = exp_map(&base, &TangentVector(v.clone()));
        let back = log_map(&base, &y);
        prop_assert!(dist(back.coords(), &v) / norm(&v).max(1.0) < 1e-6);
    }

    #[test]
    fn left_identity_is_exact((x, _) in ball_pair(0.999, 1.0)) {
        let c = Curvature::new(1.0).unwrap();
        let p = BallPoint::new(x.clone(), c).unwrap();
        let sum = mobius_add(&BallPoint::origin(x.len(), c), &p);
        prop_assert_eq!(sum.coords(), x.as_slice());
    }

    #[test]
    fn left_inverse_returns_origin((x, _) in ball_pair(0.9, 1.0)) {
        let c = Curvature::new(1.0).unwrap();
        let p = BallPoint::new(x, c).unwrap();
        prop_assert!(norm(mobius_add(&p.negate(), &p).coords()) < 1e-12);
    }

    #[test]
    fn euclidean_limit((x, y) in ball_pair(0.5, 1.0)) {
        let c = Curvature::new(1e-8).unwrap();
        let sum = mobius_add(&BallPoint::new(x.clone(), c).unwrap(), &BallPoint::new(y.clone(), c).unwrap());
        let plain: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(dist(sum.coords(), &plain) < 1e-5);
    }

    #[test]
    fn outputs_stay_inside_the_ball(c in curvature(), (x, y) in ball_pair(0.99999, 1.0), r in 0.0..50.0f64) {
        let curv = Curvature::new(c).unwrap();
        let s = 1.0 / c.sqrt();
        let xs: Vec<f64> = x.iter().map(|v| v * s).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * s).collect();
        let px = BallPoint::new(xs.clone(), curv).unwrap();
        let py = BallPoint::new(ys.clone(), curv).unwrap();
        let v = scaled(ys.clone(), r);
        let inside = |p: &BallPoint| c * norm(p.coords()).powi(2) < 1.0;
        prop_assert!(inside(&mobius_add(&px, &py)));
        prop_assert!(inside(&exp_map_zero(&TangentVector(v.clone()), curv)));
        prop_assert!(inside(&exp_map(&px, &TangentVector(v))));
        prop_assert!(inside(&project_to_ball(xs.iter().map(|a| a * 3.0).collect(), curv)));
    }

    #[test]
    fn dimension_is_preserved((c, x, v) in based_tangent(2.0)) {
        let curv = Curvature::new(c).unwrap();
        let base = BallPoint::new(x.clone(), curv).unwrap();
        let t = TangentVector(v);
        prop_assert_eq!(exp_map(&base, &t).dim(), x.len());
        prop_assert_eq!(exp_map_zero(&t, curv).dim(), x.len());
        prop_assert_eq!(log_map_zero(&base).dim(), x.len());
        prop_assert_eq!(log_map(&base, &base).dim(), x.len());
        prop_assert_eq!(mobius_add(&base, &base).dim(), x.len());
    }
}

#[test]
fn euclidean_curvature_degenerates_exactly() {
    let c = Curvature::new(0.0).unwrap();
    let x = BallPoint::new(vec![3.0, -1.5], c).unwrap();
    let y = BallPoint::new(vec![0.25, 7.0], c).unwrap();
    assert_eq!(mobius_add(&x, &y).coords(), &[3.25, 5.5]);
    assert_eq!(exp_map_zero(&TangentVector(vec![4.0, 2.0]), c).coords(), &[4.0, 2.0]);
    assert_eq!(log_map_zero(&y).coords(), &[0.25, 7.0]);
}
