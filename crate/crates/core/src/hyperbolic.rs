//! Poincare-ball primitives: Mobius addition, exponential and logarithmic maps.
//!
//! The ball of curvature `c > 0` is the open set `{x : c * |x|^2 < 1}`, i.e. radius
//! `1 / sqrt(c)`. With `c = 0` every operation degenerates to its Euclidean
//! counterpart (addition, identity maps).
//!
//! ```text
//! x (+)_c y = ((1 + 2c<x,y> + c|y|^2) x + (1 - c|x|^2) y) / (1 + 2c<x,y> + c^2 |x|^2 |y|^2)
//! exp_x(v)  = x (+)_c ( tanh(sqrt(c) lambda_x |v| / 2) v / (sqrt(c) |v|) )
//! log_x(y)  = 2 / (sqrt(c) lambda_x) artanh(sqrt(c) |w|) w / |w|,   w = -x (+)_c y
//! lambda_x  = 2 / (1 - c |x|^2)
//! ```
//!
//! Dimension and curvature mismatches between operands are programming errors and panic.
//! Ball membership is enforced when a [`BallPoint`] is constructed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative margin kept between projected points and the ball boundary.
pub const BALL_EPS: f64 = 1e-5;

/// Curvature parameter of the Poincare ball. Zero selects flat space.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Curvature(f64);

impl Curvature {
    pub const EUCLIDEAN: Curvature = Curvature(0.0);

    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c >= 0.0 {
            Ok(Curvature(c))
        } else {
            Err(Error::InvalidArgument(format!(
                "curvature must be finite and non-negative, got {c}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_euclidean(self) -> bool {
        self.0 == 0.0
    }

    /// Ball radius `1 / sqrt(c)`; infinite in the Euclidean case.
    pub fn radius(self) -> f64 {
        if self.is_euclidean() {
            f64::INFINITY
        } else {
            1.0 / self.0.sqrt()
        }
    }
}

impl TryFrom<f64> for Curvature {
    type Error = Error;
    fn try_from(c: f64) -> Result<Self> {
        Curvature::new(c)
    }
}

impl From<Curvature> for f64 {
    fn from(c: Curvature) -> f64 {
        c.0
    }
}

/// A point strictly inside the Poincare ball of its curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
    curvature: Curvature,
}

impl BallPoint {
    pub fn new(coords: Vec<f64>, curvature: Curvature) -> Result<Self> {
        if let Some(bad) = coords.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("ball point coordinate {bad}")));
        }
        let scaled = curvature.value() * norm_sq(&coords);
        if !curvature.is_euclidean() && scaled >= 1.0 {
            return Err(Error::OutsideBall(scaled));
        }
        Ok(Self { coords, curvature })
    }

    pub fn origin(dim: usize, curvature: Curvature) -> Self {
        Self {
            coords: vec![0.0; dim],
            curvature,
        }
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.coords).sqrt()
    }

    /// Mobius negation, `-x`. Always stays in the ball.
    pub fn negate(&self) -> BallPoint {
        BallPoint {
            coords: self.coords.iter().map(|v| -v).collect(),
            curvature: self.curvature,
        }
    }

    /// Conformal factor `2 / (1 - c |x|^2)` of the metric at this point.
    pub fn conformal_factor(&self) -> f64 {
        2.0 / (1.0 - self.curvature.value() * norm_sq(&self.coords))
    }
}

/// A vector in the tangent space at some base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(pub Vec<f64>);

impl TangentVector {
    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn zeros(dim: usize) -> Self {
        TangentVector(vec![0.0; dim])
    }
}

impl From<Vec<f64>> for TangentVector {
    fn from(v: Vec<f64>) -> Self {
        TangentVector(v)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

fn assert_compatible(x: &BallPoint, y: &BallPoint) {
    assert_eq!(x.dim(), y.dim(), "ball points differ in dimension");
    assert_eq!(
        x.curvature, y.curvature,
        "ball points live on balls of different curvature"
    );
}

/// Rescales `p` onto the radius `(1 - BALL_EPS) / sqrt(c)` when it lies on or beyond it.
pub fn project_to_ball(p: Vec<f64>, c: Curvature) -> BallPoint {
    assert!(
        p.iter().all(|v| v.is_finite()),
        "project_to_ball requires finite input"
    );
    if c.is_euclidean() {
        return BallPoint {
            coords: p,
            curvature: c,
        };
    }
    let limit = 1.0 - BALL_EPS;
    let sq = c.value() * norm_sq(&p);
    if sq < limit * limit {
        return BallPoint {
            coords: p,
            curvature: c,
        };
    }
    let scale = limit / sq.sqrt();
    BallPoint {
        coords: p.into_iter().map(|v| v * scale).collect(),
        curvature: c,
    }
}

/// Keeps values that are already strictly inside; only points that rounding pushed onto
/// or past the boundary are pulled back to the projection margin.
fn guard_inside(p: Vec<f64>, c: Curvature) -> BallPoint {
    if c.is_euclidean() || c.value() * norm_sq(&p) < 1.0 {
        BallPoint {
            coords: p,
            curvature: c,
        }
    } else {
        project_to_ball(p, c)
    }
}

pub fn mobius_add(x: &BallPoint, y: &BallPoint) -> BallPoint {
    assert_compatible(x, y);
    let c = x.curvature;
    if c.is_euclidean() {
        let sum = x.coords.iter().zip(&y.coords).map(|(a, b)| a + b).collect();
        return BallPoint {
            coords: sum,
            curvature: c,
        };
    }
    let cv = c.value();
    let xy = dot(&x.coords, &y.coords);
    let x2 = norm_sq(&x.coords);
    let y2 = norm_sq(&y.coords);
    let coef_x = 1.0 + 2.0 * cv * xy + cv * y2;
    let coef_y = 1.0 - cv * x2;
    let denom = 1.0 + 2.0 * cv * xy + cv * cv * x2 * y2;
    let out = x
        .coords
        .iter()
        .zip(&y.coords)
        .map(|(a, b)| (coef_x * a + coef_y * b) / denom)
        .collect();
    project_to_ball(out, c)
}

pub fn exp_map_zero(v: &TangentVector, c: Curvature) -> BallPoint {
    assert!(
        v.0.iter().all(|x| x.is_finite()),
        "exp_map_zero requires a finite tangent vector"
    );
    let norm = norm_sq(&v.0).sqrt();
    if c.is_euclidean() || norm == 0.0 {
        return BallPoint {
            coords: v.0.clone(),
            curvature: c,
        };
    }
    let sqrt_c = c.value().sqrt();
    let scale = (sqrt_c * norm).tanh() / (sqrt_c * norm);
    guard_inside(v.0.iter().map(|x| x * scale).collect(), c)
}

pub fn log_map_zero(y: &BallPoint) -> TangentVector {
    let c = y.curvature;
    let norm = y.norm();
    if c.is_euclidean() || norm == 0.0 {
        return TangentVector(y.coords.clone());
    }
    let sqrt_c = c.value().sqrt();
    let scale = (sqrt_c * norm).atanh() / (sqrt_c * norm);
    TangentVector(y.coords.iter().map(|v| v * scale).collect())
}

pub fn exp_map(x: &BallPoint, v: &TangentVector) -> BallPoint {
    assert_eq!(x.dim(), v.dim(), "tangent vector and base point differ in dimension");
    assert!(
        v.0.iter().all(|a| a.is_finite()),
        "exp_map requires a finite tangent vector"
    );
    let c = x.curvature;
    let norm = norm_sq(&v.0).sqrt();
    if norm == 0.0 {
        return x.clone();
    }
    if c.is_euclidean() {
        let coords = x.coords.iter().zip(&v.0).map(|(a, b)| a + b).collect();
        return BallPoint {
            coords,
            curvature: c,
        };
    }
    let sqrt_c = c.value().sqrt();
    let lambda = x.conformal_factor();
    let scale = (sqrt_c * lambda * norm / 2.0).tanh() / (sqrt_c * norm);
    let step = guard_inside(v.0.iter().map(|a| a * scale).collect(), c);
    mobius_add(x, &step)
}

pub fn log_map(x: &BallPoint, y: &BallPoint) -> TangentVector {
    assert_compatible(x, y);
    let c = x.curvature;
    if c.is_euclidean() {
        return TangentVector(y.coords.iter().zip(&x.coords).map(|(b, a)| b - a).collect());
    }
    let w = mobius_add(&x.negate(), y);
    let w_norm = w.norm();
    if w_norm == 0.0 {
        return TangentVector::zeros(x.dim());
    }
    let sqrt_c = c.value().sqrt();
    let lambda = x.conformal_factor();
    let scale = 2.0 / (sqrt_c * lambda) * (sqrt_c * w_norm).atanh() / w_norm;
    TangentVector(w.coords.iter().map(|a| a * scale).collect())
}
