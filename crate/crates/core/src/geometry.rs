//! Points of the half-space model `H^n = {x ∈ R^n : x_n > 0}`, the
//! half-space `D = {x₁ > 0}` and its two walls.
//!
//! Distances are carried as [`CoshDistance`], which stores `cosh ρ − 1`
//! rather than `cosh ρ`: every kernel needs `sinh ρ` or `cosh ρ − 1`, and
//! both lose all their digits near the diagonal if recovered from `cosh ρ`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Dimension `n`, drift index `μ` and killing rate `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    n: usize,
    mu: f64,
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: usize,
    mu: f64,
    #[serde(default)]
    lambda: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.n, raw.mu)?.with_lambda(raw.lambda)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            n: p.n,
            mu: p.mu,
            lambda: p.lambda,
        }
    }
}

impl ModelParams {
    pub fn new(n: usize, mu: f64) -> Result<Self> {
        if n < 2 {
            return domain(format!("dimension must be at least 2, got {n}"));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return domain(format!("drift index must be positive and finite, got {mu}"));
        }
        Ok(ModelParams { n, mu, lambda: 0.0 })
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return domain(format!("lambda must be non-negative and finite, got {lambda}"));
        }
        Ok(ModelParams { lambda, ..self })
    }

    /// The same model with drift index replaced by `mu`.
    pub fn with_mu(self, mu: f64) -> Result<Self> {
        ModelParams::new(self.n, mu)?.with_lambda(self.lambda)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `ν = (n − 1)/2`.
    pub fn nu(&self) -> f64 {
        (self.n as f64 - 1.0) / 2.0
    }

    /// `η = √(μ² + 2λ)`; equal to `μ` exactly when `λ = 0`.
    pub fn eta(&self) -> f64 {
        if self.lambda == 0.0 {
            self.mu
        } else {
            (self.mu * self.mu + 2.0 * self.lambda).sqrt()
        }
    }

    pub(crate) fn check_dim(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.n {
            return domain(format!(
                "point has {} coordinates but the model has dimension {}",
                coords.len(),
                self.n
            ));
        }
        Ok(())
    }
}

/// A point of `H^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HyperPoint {
    coords: Vec<f64>,
}

impl TryFrom<Vec<f64>> for HyperPoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        HyperPoint::new(coords)
    }
}

impl From<HyperPoint> for Vec<f64> {
    fn from(p: HyperPoint) -> Self {
        p.coords
    }
}

impl HyperPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let coords = coords.into();
        if coords.len() < 2 {
            return domain(format!("a point needs at least 2 coordinates, got {}", coords.len()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return domain(format!("coordinates must be finite, got {coords:?}"));
        }
        if !(coords[coords.len() - 1] > 0.0) {
            return domain(format!("last coordinate must be positive, got {coords:?}"));
        }
        Ok(HyperPoint { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn first(&self) -> f64 {
        self.coords[0]
    }

    /// The height `x_n`.
    pub fn last(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    /// `x̄ = (−x₁, x₂, …, x_n)`.
    pub fn reflect(&self) -> HyperPoint {
        let mut coords = self.coords.clone();
        coords[0] = -coords[0];
        HyperPoint { coords }
    }
}

/// A point of `D`: a [`HyperPoint`] with `x₁ > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DomainPoint(HyperPoint);

impl TryFrom<Vec<f64>> for DomainPoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        DomainPoint::new(coords)
    }
}

impl From<DomainPoint> for Vec<f64> {
    fn from(p: DomainPoint) -> Self {
        p.0.coords
    }
}

impl DomainPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let p = HyperPoint::new(coords)?;
        if !(p.first() > 0.0) {
            return domain(format!("first coordinate must be positive in D, got {:?}", p.coords));
        }
        Ok(DomainPoint(p))
    }

    pub fn point(&self) -> &HyperPoint {
        &self.0
    }

    pub fn coords(&self) -> &[f64] {
        &self.0.coords
    }
}

impl std::ops::Deref for DomainPoint {
    type Target = HyperPoint;

    fn deref(&self) -> &HyperPoint {
        &self.0
    }
}

impl From<DomainPoint> for HyperPoint {
    fn from(p: DomainPoint) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    /// `∂₁D = {x₁ = 0}`.
    Wall1,
    /// `∂₂D = {x_n = 0}`.
    Wall2,
}

/// A point on one of the two walls of `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    wall: Wall,
    coords: Vec<f64>,
}

impl BoundaryPoint {
    pub fn new(wall: Wall, coords: impl Into<Vec<f64>>) -> Result<Self> {
        let coords = coords.into();
        if coords.len() < 2 || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::WallMismatch(format!("malformed coordinates {coords:?}")));
        }
        let (first, last) = (coords[0], coords[coords.len() - 1]);
        let ok = match wall {
            Wall::Wall1 => first == 0.0 && last > 0.0,
            Wall::Wall2 => last == 0.0 && first > 0.0,
        };
        if !ok {
            return Err(Error::WallMismatch(format!("{coords:?} is not on {wall:?}")));
        }
        Ok(BoundaryPoint { wall, coords })
    }

    pub fn wall1(coords: impl Into<Vec<f64>>) -> Result<Self> {
        BoundaryPoint::new(Wall::Wall1, coords)
    }

    pub fn wall2(coords: impl Into<Vec<f64>>) -> Result<Self> {
        BoundaryPoint::new(Wall::Wall2, coords)
    }

    pub fn wall(&self) -> Wall {
        self.wall
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// `cosh ρ` stored through `cosh ρ − 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CoshDistance {
    minus_one: f64,
}

impl CoshDistance {
    pub fn from_minus_one(minus_one: f64) -> Self {
        debug_assert!(minus_one >= 0.0);
        CoshDistance { minus_one }
    }

    pub fn value(&self) -> f64 {
        1.0 + self.minus_one
    }

    pub fn minus_one(&self) -> f64 {
        self.minus_one
    }

    /// `sinh ρ = √((cosh ρ − 1)(cosh ρ + 1))`.
    pub fn sinh(&self) -> f64 {
        (self.minus_one * (self.minus_one + 2.0)).sqrt()
    }

    /// The distance ρ itself, for display.
    pub fn distance(&self) -> f64 {
        // acosh(1 + m) = ln1p(m + √(m(m+2)))
        (self.minus_one + self.sinh()).ln_1p()
    }
}

pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `|x − ȳ|²`, the squared distance to the mirror image of `y`.
pub(crate) fn squared_distance_reflected(x: &[f64], y: &[f64]) -> f64 {
    let head = x[0] + y[0];
    head * head + squared_distance(&x[1..], &y[1..])
}

/// `cosh d(x, y) = 1 + |x − y|²/(2 x_n y_n)`.
///
/// # Panics
/// If the points have different dimensions.
///
/// ```
/// use halfspace::geometry::{cosh_distance, HyperPoint};
/// let x = HyperPoint::new(vec![1.0, 0.0, 1.0]).unwrap();
/// let y = HyperPoint::new(vec![0.0, 1.0, 2.0]).unwrap();
/// assert_eq!(cosh_distance(&x, &y).value(), 1.75);
/// ```
pub fn cosh_distance(x: &HyperPoint, y: &HyperPoint) -> CoshDistance {
    assert_eq!(x.dim(), y.dim(), "points of different dimension");
    CoshDistance::from_minus_one(squared_distance(&x.coords, &y.coords) / (2.0 * x.last() * y.last()))
}

/// `reflect(x)`, provided as a free function to mirror [`cosh_distance`].
pub fn reflect(x: &HyperPoint) -> HyperPoint {
    x.reflect()
}

/// `cosh ρ̄ = cosh ρ + 2 x₁ y₁ / (x_n y_n)`, the distance from `x` to `ȳ`.
///
/// # Panics
/// If the points have different dimensions.
pub fn cosh_distance_reflected(x: &HyperPoint, y: &HyperPoint) -> CoshDistance {
    assert_eq!(x.dim(), y.dim(), "points of different dimension");
    CoshDistance::from_minus_one(squared_distance_reflected(&x.coords, &y.coords) / (2.0 * x.last() * y.last()))
}

/// Density of the hyperbolic volume element, `x_n^{−n}`.
pub fn volume_weight(x: &HyperPoint, n: usize) -> f64 {
    x.last().powi(-(n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> HyperPoint {
        HyperPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn params_validation_and_derived_values() {
        assert!(ModelParams::new(1, 1.0).is_err());
        assert!(ModelParams::new(3, 0.0).is_err());
        assert!(ModelParams::new(3, f64::NAN).is_err());
        let m = ModelParams::new(4, 1.3).unwrap();
        assert_eq!(m.nu(), 1.5);
        assert_eq!(m.eta(), 1.3);
        assert!(m.with_lambda(-1.0).is_err());
        let l = m.with_lambda(0.5).unwrap();
        assert!((l.eta() - (1.69f64 + 1.0).sqrt()).abs() < 1e-15);
        assert!(l.eta() > l.mu());
    }

    #[test]
    fn params_round_trip_through_json() {
        let m = ModelParams::new(5, 2.5).unwrap().with_lambda(0.25).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<ModelParams>(&s).unwrap(), m);
        assert!(serde_json::from_str::<ModelParams>(r#"{"n":3,"mu":-1}"#).is_err());
        let d: ModelParams = serde_json::from_str(r#"{"n":3,"mu":1}"#).unwrap();
        assert_eq!(d.lambda(), 0.0);
    }

    #[test]
    fn point_validation() {
        assert!(HyperPoint::new(vec![1.0, 0.0]).is_err());
        assert!(HyperPoint::new(vec![1.0]).is_err());
        assert!(HyperPoint::new(vec![f64::NAN, 1.0]).is_err());
        assert!(DomainPoint::new(vec![0.0, 1.0]).is_err());
        assert!(DomainPoint::new(vec![-1.0, 1.0]).is_err());
        assert!(DomainPoint::new(vec![0.1, 1.0]).is_ok());
        assert!(BoundaryPoint::wall1(vec![0.0, 2.0, 1.0]).is_ok());
        assert!(matches!(
            BoundaryPoint::wall1(vec![0.1, 2.0, 1.0]),
            Err(Error::WallMismatch(_))
        ));
        assert!(BoundaryPoint::wall2(vec![1.0, 2.0, 0.0]).is_ok());
        assert!(matches!(
            BoundaryPoint::wall2(vec![1.0, 2.0, 0.5]),
            Err(Error::WallMismatch(_))
        ));
        assert!(matches!(
            BoundaryPoint::wall2(vec![0.0, 2.0, 0.0]),
            Err(Error::WallMismatch(_))
        ));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(cosh_distance(&p(&[1.0, 2.0, 3.0]), &p(&[1.0, 2.0, 3.0])).value(), 1.0);
        let e = 1f64.exp();
        let c = cosh_distance(&p(&[0.0, 0.0, 1.0]), &p(&[0.0, 0.0, e]));
        assert!((c.value() - 1f64.cosh()).abs() < 1e-15);
        assert!((c.distance() - 1.0).abs() < 1e-15);
        assert!((c.sinh() - 1f64.sinh()).abs() < 1e-15);
        assert_eq!(cosh_distance(&p(&[1.0, 0.0, 1.0]), &p(&[0.0, 1.0, 2.0])).value(), 1.75);
    }

    #[test]
    fn reflection_examples() {
        assert_eq!(p(&[1.0, 2.0, 3.0]).reflect().coords(), &[-1.0, 2.0, 3.0]);
        assert_eq!(p(&[0.0, 2.0, 3.0]).reflect().coords(), &[0.0, 2.0, 3.0]);
        let x = p(&[0.3, -2.0, 3.0]);
        assert_eq!(reflect(&reflect(&x)), x);
    }

    #[test]
    fn reflected_distance_examples() {
        let x = p(&[1.0, 0.0, 1.0]);
        assert_eq!(cosh_distance_reflected(&x, &x).value(), 3.0);
        let w = p(&[0.0, 0.5, 1.0]);
        let y = p(&[0.7, 0.1, 2.0]);
        let (r, d) = (cosh_distance_reflected(&w, &y).value(), cosh_distance(&w, &y).value());
        assert!((r - d).abs() <= f64::EPSILON * d);
        let (a, b) = (p(&[1.0, 0.0, 2.0]), p(&[2.0, 0.0, 1.0]));
        let direct = cosh_distance(&a, &b).value() + 2.0;
        assert!((cosh_distance_reflected(&a, &b).value() - direct).abs() < 1e-15);
        assert!((cosh_distance(&a, &b.reflect()).value() - direct).abs() < 1e-15);
    }

    #[test]
    fn volume_weight_examples() {
        assert_eq!(volume_weight(&p(&[0.0, 0.0, 2.0]), 3), 0.125);
        assert_eq!(volume_weight(&p(&[5.0, 0.0, 1.0]), 3), 1.0);
        assert_eq!(volume_weight(&p(&[1.0, 0.5]), 2), 4.0);
    }

    #[test]
    fn near_diagonal_keeps_precision() {
        let x = p(&[1.0, 0.0, 1.0]);
        let y = p(&[1.0 + 1e-9, 0.0, 1.0]);
        let c = cosh_distance(&x, &y);
        assert!((c.minus_one() / 5e-19 - 1.0).abs() < 1e-6);
        assert!((c.sinh() / 1e-9 - 1.0).abs() < 1e-6);
    }

    fn point3() -> impl Strategy<Value = HyperPoint> {
        (-5.0..5.0f64, -5.0..5.0f64, 0.01..10.0f64).prop_map(|(a, b, c)| p(&[a, b, c]))
    }

    fn domain3() -> impl Strategy<Value = HyperPoint> {
        (0.001..5.0f64, -5.0..5.0f64, 0.01..10.0f64).prop_map(|(a, b, c)| p(&[a, b, c]))
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(x in point3(), y in point3()) {
            prop_assert_eq!(cosh_distance(&x, &y), cosh_distance(&y, &x));
            prop_assert!(cosh_distance(&x, &y).value() >= 1.0);
        }

        #[test]
        fn reflection_is_an_isometry(x in point3(), y in point3()) {
            let a = cosh_distance(&x, &y.reflect()).value();
            let b = cosh_distance(&x.reflect(), &y).value();
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a);
        }

        #[test]
        fn reflected_distance_shift(x in point3(), y in point3()) {
            let shift = 2.0 * x.first() * y.first() / (x.last() * y.last());
            let diff = cosh_distance_reflected(&x, &y).value() - cosh_distance(&x, &y).value();
            let scale = cosh_distance_reflected(&x, &y).value().max(1.0);
            prop_assert!((diff - shift).abs() <= 1e-12 * scale);
            let via_reflect = cosh_distance(&x, &y.reflect()).value();
            prop_assert!((via_reflect - cosh_distance_reflected(&x, &y).value()).abs() <= 1e-12 * via_reflect);
        }

        #[test]
        fn mirror_is_farther_inside_d(x in domain3(), y in domain3()) {
            prop_assert!(cosh_distance_reflected(&x, &y) > cosh_distance(&x, &y));
        }
    }
}
