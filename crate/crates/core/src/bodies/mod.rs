//! Balls, ellipsoids, facet polytopes and analytic star bodies.
//!
//! Polytopes are carried by their facet data `(nu_i, h_i, a_i)`; every
//! boundary integral over a polytope is then a finite sum. Ellipsoids and
//! star bodies are evaluated through their radial function and outer normal,
//! sampled on a [`SphereRule`].

mod measure;
mod polytope;
pub mod schema;
mod star;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use measure::SurfaceMeasure;
pub use polytope::{Facet, Polytope, CLOSURE_TOL};
pub use star::{SphericalPoly, StarBody, StarFamily, MAX_PERTURBATION};

use crate::error::{Error, Result};
use crate::special::{check_exponent, sphere_area, unit_ball_volume};
use crate::sphere::{norm, RuleSpec, SphereRule};

/// Tolerance on `|u| = 1` for caller-supplied directions.
pub const DIRECTION_TOL: f64 = 1e-9;
/// Size of the deterministic nudge used when a normal cannot be formed.
pub const NORMAL_JITTER: f64 = 1e-9;

/// Centred Euclidean ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ball {
    pub n: usize,
    pub radius: f64,
}

impl Ball {
    pub fn new(n: usize, radius: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("ball dimension must be positive"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!(
                "ball radius {radius} must be positive"
            )));
        }
        Ok(Self { n, radius })
    }

    pub fn unit(n: usize) -> Self {
        Self { n, radius: 1.0 }
    }
}

/// `T B_n + c` for an invertible `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    matrix: DMatrix<f64>,
    center: DVector<f64>,
    inverse: DMatrix<f64>,
    det: f64,
}

impl Ellipsoid {
    pub fn new(matrix: DMatrix<f64>, center: DVector<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n < 1 || matrix.ncols() != n {
            return Err(Error::domain("ellipsoid matrix must be square"));
        }
        if center.len() != n {
            return Err(Error::domain(format!(
                "ellipsoid center has {} components, expected {n}",
                center.len()
            )));
        }
        if matrix.iter().chain(center.iter()).any(|x| !x.is_finite()) {
            return Err(Error::domain("ellipsoid data must be finite"));
        }
        let det = matrix.determinant();
        let scale = matrix
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .powi(n as i32);
        if det.abs() <= 1e-14 * scale || det == 0.0 {
            return Err(Error::domain(format!(
                "ellipsoid matrix is singular (det = {det:e})"
            )));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::domain("ellipsoid matrix is not invertible"))?;
        Ok(Self {
            matrix,
            center,
            inverse,
            det,
        })
    }

    pub fn centered(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DVector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn is_centered(&self) -> bool {
        self.center.iter().all(|&x| x == 0.0)
    }

    /// `|T^{-1} c| < 1`.
    pub fn has_origin_interior(&self) -> bool {
        (&self.inverse * &self.center).norm() < 1.0
    }

    pub fn support(&self, u: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        (self.matrix.transpose() * &u).norm() + self.center.dot(&u)
    }

    /// Largest `lambda` with `|T^{-1}(lambda u - c)| <= 1`.
    pub fn radial(&self, u: &[f64]) -> f64 {
        let a = &self.inverse * DVector::from_column_slice(u);
        if self.is_centered() {
            return 1.0 / a.norm();
        }
        let b = &self.inverse * &self.center;
        let aa = a.norm_squared();
        let ab = a.dot(&b);
        let disc = ab * ab - aa * (b.norm_squared() - 1.0);
        (ab + disc.max(0.0).sqrt()) / aa
    }

    fn normal_direction(&self, x: &[f64]) -> Vec<f64> {
        let y = DVector::from_column_slice(x) - &self.center;
        let g = self.inverse.transpose() * (&self.inverse * y);
        g.iter().copied().collect()
    }

    /// The polar body `T^{-t} B_n` of a centred ellipsoid.
    pub fn polar(&self) -> Result<Self> {
        if !self.is_centered() {
            return Err(Error::domain(
                "polar body is only formed for origin-centred ellipsoids",
            ));
        }
        Self::centered(self.inverse.transpose())
    }
}

/// A boundary point in direction `u` with its outer unit normal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub direction: Vec<f64>,
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    /// `u . nu`
    pub cosine: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    Ball(Ball),
    Ellipsoid(Ellipsoid),
    Polytope(Polytope),
    Star(StarBody),
}

impl From<Ball> for Body {
    fn from(b: Ball) -> Self {
        Body::Ball(b)
    }
}

impl From<Ellipsoid> for Body {
    fn from(e: Ellipsoid) -> Self {
        Body::Ellipsoid(e)
    }
}

impl From<Polytope> for Body {
    fn from(p: Polytope) -> Self {
        Body::Polytope(p)
    }
}

impl From<StarBody> for Body {
    fn from(s: StarBody) -> Self {
        Body::Star(s)
    }
}

pub(crate) fn check_direction(u: &[f64], n: usize) -> Result<()> {
    if u.len() != n {
        return Err(Error::domain(format!(
            "direction has {} components, expected {n}",
            u.len()
        )));
    }
    if (norm(u) - 1.0).abs() > DIRECTION_TOL {
        return Err(Error::domain(format!(
            "direction {u:?} is not a unit vector"
        )));
    }
    Ok(())
}

impl Body {
    pub fn dim(&self) -> usize {
        match self {
            Body::Ball(b) => b.n,
            Body::Ellipsoid(e) => e.dim(),
            Body::Polytope(p) => p.dim(),
            Body::Star(s) => s.dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Body::Ball(_) => "ball",
            Body::Ellipsoid(_) => "ellipsoid",
            Body::Polytope(_) => "polytope",
            Body::Star(_) => "star",
        }
    }

    /// Surface functionals (`S_p`, `v_{p,tau}`) are finite sums or closed forms.
    pub fn has_exact_surface_data(&self) -> bool {
        matches!(self, Body::Ball(_) | Body::Polytope(_))
    }

    /// Default rule for `Phi` and the chain on this body.
    pub fn default_rule(&self) -> RuleSpec {
        if self.has_exact_surface_data() {
            RuleSpec::default_for(self.dim())
        } else {
            RuleSpec::default_sampled(self.dim())
        }
    }

    /// Volume is a closed form or a facet sum.
    pub fn has_exact_volume(&self) -> bool {
        !matches!(self, Body::Star(_))
    }

    pub fn has_origin_interior(&self) -> bool {
        match self {
            Body::Ball(_) | Body::Star(_) => true,
            Body::Ellipsoid(e) => e.has_origin_interior(),
            Body::Polytope(p) => p.has_origin_interior(),
        }
    }

    pub fn check_origin_interior(&self) -> Result<()> {
        match self {
            Body::Polytope(p) => p.check_origin_interior(),
            _ if self.has_origin_interior() => Ok(()),
            _ => Err(Error::domain(
                "origin is not an interior point of the ellipsoid",
            )),
        }
    }

    /// Support function `h_K(u)`.
    pub fn support(&self, u: &[f64]) -> Result<f64> {
        check_direction(u, self.dim())?;
        match self {
            Body::Ball(b) => Ok(b.radius),
            Body::Ellipsoid(e) => Ok(e.support(u)),
            Body::Polytope(p) => p.support(u),
            Body::Star(_) => Err(Error::unsupported("support function of a star body")),
        }
    }

    /// Radial function `rho_K(u)`.
    pub fn radial(&self, u: &[f64]) -> Result<f64> {
        check_direction(u, self.dim())?;
        self.check_origin_interior()?;
        Ok(match self {
            Body::Ball(b) => b.radius,
            Body::Ellipsoid(e) => e.radial(u),
            Body::Polytope(p) => p.radial(u)?,
            Body::Star(s) => s.radial(u),
        })
    }

    /// Both sides of `rho_{K polar}(u) = 1 / h_K(u)` for centred balls and ellipsoids.
    pub fn polar_check(&self, u: &[f64]) -> Result<(f64, f64)> {
        check_direction(u, self.dim())?;
        match self {
            Body::Ball(b) => Ok((1.0 / b.radius, 1.0 / b.radius)),
            Body::Ellipsoid(e) => {
                let polar = e.polar()?;
                Ok((polar.radial(u), 1.0 / e.support(u)))
            }
            _ => Err(Error::unsupported(
                "polar check is defined for balls and ellipsoids",
            )),
        }
    }

    /// Volume using the default rule for star bodies.
    pub fn volume(&self) -> Result<f64> {
        match self {
            Body::Star(_) => self.volume_with(&SphereRule::default_for(self.dim())?),
            _ => self.volume_with_unchecked(None),
        }
    }

    /// Volume; star bodies integrate `omega_n rho^n` on `rule`.
    pub fn volume_with(&self, rule: &SphereRule) -> Result<f64> {
        self.volume_with_unchecked(Some(rule))
    }

    fn volume_with_unchecked(&self, rule: Option<&SphereRule>) -> Result<f64> {
        let n = self.dim();
        match self {
            Body::Ball(b) => Ok(unit_ball_volume(n)? * b.radius.powi(n as i32)),
            Body::Ellipsoid(e) => Ok(unit_ball_volume(n)? * e.det().abs()),
            Body::Polytope(p) => Ok(p.volume()),
            Body::Star(s) => {
                let rule = rule.ok_or_else(|| Error::domain("star body volume needs a rule"))?;
                check_rule(rule, n)?;
                let mean = rule.integrate(|u| s.radial(u).powi(n as i32))?;
                Ok(unit_ball_volume(n)? * mean)
            }
        }
    }

    /// `S_p(K)`; ellipsoids and star bodies use the default rule.
    pub fn sp_surface_area(&self, p: f64) -> Result<f64> {
        match self {
            Body::Ellipsoid(_) | Body::Star(_) => {
                self.sp_surface_area_with(p, &SphereRule::default_for(self.dim())?)
            }
            _ => self.sp_exact(p),
        }
    }

    /// `S_p(K) = int |x . nu|^(1-p) dH^{n-1}`.
    pub fn sp_surface_area_with(&self, p: f64, rule: &SphereRule) -> Result<f64> {
        match self {
            Body::Ellipsoid(_) | Body::Star(_) => {
                check_exponent(p)?;
                Ok(SurfaceMeasure::of_body(self, Some(rule))?.sp(p))
            }
            _ => self.sp_exact(p),
        }
    }

    fn sp_exact(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        match self {
            Body::Ball(b) => Ok(sphere_area(b.n)? * b.radius.powf(b.n as f64 - p)),
            Body::Polytope(poly) => poly.sp_surface_area(p),
            _ => unreachable!("sp_exact called on a quadrature body"),
        }
    }

    /// Image under the linear map `T`.
    pub fn linear_image(&self, t: &DMatrix<f64>) -> Result<Body> {
        let n = self.dim();
        if t.nrows() != n || t.ncols() != n {
            return Err(Error::domain(format!("transform must be {n}x{n}")));
        }
        let det = t.determinant();
        let inv = t
            .clone()
            .try_inverse()
            .filter(|_| det != 0.0 && det.is_finite());
        let Some(inv) = inv else {
            return Err(Error::domain(format!(
                "transform is singular (det = {det:e})"
            )));
        };
        match self {
            Body::Ball(b) => Ok(Ellipsoid::centered(t * b.radius)?.into()),
            Body::Ellipsoid(e) => Ok(Ellipsoid::new(t * e.matrix(), t * e.center())?.into()),
            Body::Polytope(p) => Ok(p.linear_image(t, det, &inv)?.into()),
            Body::Star(_) => Err(Error::unsupported("linear images of star bodies")),
        }
    }

    /// Translate by `a`.
    pub fn translate(&self, a: &[f64]) -> Result<Body> {
        let n = self.dim();
        if a.len() != n {
            return Err(Error::domain(format!(
                "translation has {} components, expected {n}",
                a.len()
            )));
        }
        match self {
            Body::Ball(b) if a.iter().all(|&x| x == 0.0) => Ok(Body::Ball(b.clone())),
            Body::Ball(b) => Ok(Ellipsoid::new(
                DMatrix::identity(n, n) * b.radius,
                DVector::from_column_slice(a),
            )?
            .into()),
            Body::Ellipsoid(e) => Ok(Ellipsoid::new(
                e.matrix().clone(),
                e.center() + DVector::from_column_slice(a),
            )?
            .into()),
            Body::Polytope(p) => Ok(p.translate(a).into()),
            Body::Star(_) => Err(Error::unsupported("translation of star bodies")),
        }
    }

    /// Boundary point and outer unit normal in direction `u`.
    pub fn normal_at(&self, u: &[f64]) -> Result<BoundaryPoint> {
        check_direction(u, self.dim())?;
        self.check_origin_interior()?;
        self.boundary_point_unchecked(u)
    }

    pub(crate) fn boundary_point_unchecked(&self, u: &[f64]) -> Result<BoundaryPoint> {
        match self.try_boundary_point(u)? {
            Some(bp) => Ok(bp),
            None => {
                // nudge off the exceptional set along a fixed direction and retry once
                let n = u.len();
                let d: Vec<f64> = (1..=n).map(|k| k as f64).collect();
                let dn = norm(&d);
                let v: Vec<f64> = u
                    .iter()
                    .zip(&d)
                    .map(|(x, y)| x + NORMAL_JITTER * y / dn)
                    .collect();
                let vn = norm(&v);
                let v: Vec<f64> = v.iter().map(|x| x / vn).collect();
                self.try_boundary_point(&v)?.ok_or_else(|| {
                    Error::domain(format!(
                        "no outer normal could be formed near direction {u:?}"
                    ))
                })
            }
        }
    }

    fn try_boundary_point(&self, u: &[f64]) -> Result<Option<BoundaryPoint>> {
        let (rho, raw) = match self {
            Body::Ball(b) => (b.radius, u.to_vec()),
            Body::Ellipsoid(e) => {
                let rho = e.radial(u);
                let x: Vec<f64> = u.iter().map(|c| rho * c).collect();
                (rho, e.normal_direction(&x))
            }
            Body::Star(s) => (s.radial(u), s.normal_direction(u)),
            Body::Polytope(_) => {
                return Err(Error::unsupported(
                    "polytope normals are carried by the facet list",
                ))
            }
        };
        let (normal, cosine) = star::finish_normal(u, raw);
        if !(cosine > 0.0 && cosine.is_finite() && rho > 0.0) {
            return Ok(None);
        }
        Ok(Some(BoundaryPoint {
            direction: u.to_vec(),
            point: u.iter().map(|c| rho * c).collect(),
            normal,
            cosine,
        }))
    }
}

pub(crate) fn check_rule(rule: &SphereRule, n: usize) -> Result<()> {
    if rule.dim() != n {
        return Err(Error::domain(format!(
            "rule dimension {} does not match body dimension {n}",
            rule.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(d))
    }

    #[test]
    fn support_examples() {
        let e1 = [1.0, 0.0, 0.0];
        assert_eq!(Body::from(Ball::unit(3)).support(&e1).unwrap(), 1.0);
        let e = Body::from(Ellipsoid::centered(diag(&[2.0, 1.0, 1.0])).unwrap());
        assert!((e.support(&e1).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(Body::from(Polytope::cube(3)).support(&e1).unwrap(), 1.0);
        assert!(Body::from(Ball::unit(3)).support(&[1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn polar_examples() {
        let e = Body::from(Ellipsoid::centered(diag(&[2.0, 1.0, 1.0])).unwrap());
        let (a, b) = e.polar_check(&[1.0, 0.0, 0.0]).unwrap();
        assert!((a - 0.5).abs() < 1e-12 && (b - 0.5).abs() < 1e-12);
        let e = Body::from(Ellipsoid::centered(diag(&[2.0, 3.0, 1.0])).unwrap());
        let (a, b) = e.polar_check(&[0.0, 1.0, 0.0]).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-12 && (b - 1.0 / 3.0).abs() < 1e-12);
        let off = e.translate(&[0.1, 0.0, 0.0]).unwrap();
        assert!(matches!(
            off.polar_check(&[0.0, 1.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert_eq!(
            Body::from(Ball::unit(3))
                .polar_check(&[0.0, 0.0, 1.0])
                .unwrap(),
            (1.0, 1.0)
        );
    }

    #[test]
    fn volume_examples() {
        assert!((Body::from(Polytope::cube(3)).volume().unwrap() - 8.0).abs() < 1e-15);
        assert!((Body::from(Ball::unit(3)).volume().unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        let e = Body::from(Ellipsoid::centered(diag(&[2.0, 1.0, 1.0])).unwrap());
        assert!((e.volume().unwrap() - 8.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sp_examples() {
        let b = Body::from(Ball::unit(3));
        assert!((b.sp_surface_area(2.0).unwrap() - 4.0 * PI).abs() < 1e-14);
        assert!((b.sp_surface_area(1.0).unwrap() - 4.0 * PI).abs() < 1e-14);
        assert!((Body::from(Polytope::cube(3)).sp_surface_area(2.0).unwrap() - 24.0).abs() < 1e-14);
        assert!(b.sp_surface_area(0.5).is_err());
    }

    #[test]
    fn linear_image_examples() {
        let cube = Body::from(Polytope::cube(3));
        let big = cube.linear_image(&(DMatrix::identity(3, 3) * 2.0)).unwrap();
        let Body::Polytope(p) = &big else {
            panic!("polytope expected")
        };
        assert!(p
            .facets()
            .iter()
            .all(|f| (f.offset - 2.0).abs() < 1e-15 && (f.area - 16.0).abs() < 1e-14));
        assert!((big.volume().unwrap() - 64.0).abs() < 1e-12);
        let ball = Body::from(Ball::unit(3));
        let same = ball.linear_image(&DMatrix::identity(3, 3)).unwrap();
        assert!((same.volume().unwrap() - ball.volume().unwrap()).abs() < 1e-15);
        let stretched = cube.linear_image(&diag(&[2.0, 1.0, 1.0])).unwrap();
        assert!((stretched.volume().unwrap() - 16.0).abs() < 1e-13);
        let Body::Polytope(p) = &stretched else {
            panic!("polytope expected")
        };
        assert!(p.closure_defect().1 < 1e-15);
        assert!(cube.linear_image(&diag(&[1.0, 0.0, 1.0])).is_err());
        let star = Body::from(StarBody::qball(3, 3.0).unwrap());
        assert!(matches!(
            star.linear_image(&diag(&[1.0, 1.0, 2.0])),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn translate_ball_and_ellipsoid() {
        let ball = Body::from(Ball::unit(3));
        assert_eq!(ball.translate(&[0.0; 3]).unwrap(), ball);
        let moved = ball.translate(&[0.5, 0.0, 0.0]).unwrap();
        assert!((moved.radial(&[1.0, 0.0, 0.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!((moved.radial(&[-1.0, 0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((moved.support(&[1.0, 0.0, 0.0]).unwrap() - 1.5).abs() < 1e-15);
        let gone = ball.translate(&[1.5, 0.0, 0.0]).unwrap();
        assert!(gone.radial(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn normals_of_smooth_bodies() {
        let d = [0.6, 0.0, 0.8];
        let bp = Body::from(Ball::unit(3)).normal_at(&d).unwrap();
        assert_eq!(bp.cosine, 1.0);
        let e = Body::from(Ellipsoid::centered(diag(&[2.0, 1.0, 1.0])).unwrap());
        let bp = e.normal_at(&[1.0, 0.0, 0.0]).unwrap();
        assert!((bp.normal[0] - 1.0).abs() < 1e-15 && bp.normal[1].abs() < 1e-15);
        let q = Body::from(StarBody::qball(2, 4.0).unwrap());
        let s = 0.5f64.sqrt();
        let bp = q.normal_at(&[s, s]).unwrap();
        assert!((bp.normal[0] - s).abs() < 1e-15 && (bp.normal[1] - s).abs() < 1e-15);
        assert!(Body::from(Polytope::cube(3))
            .normal_at(&[1.0, 0.0, 0.0])
            .is_err());
    }

    #[test]
    fn direction_must_be_unit() {
        let b = Body::from(Ball::unit(3));
        assert!(b.radial(&[1.0, 1.0, 0.0]).is_err());
        assert!(b.radial(&[1.0, 0.0]).is_err());
    }
}
