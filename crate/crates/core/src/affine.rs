//! The general p-projection function `v_{p,tau}(K, theta)`, the support
//! function of `Pi_{p,tau} K`, and the p-integral affine surface area
//! `Phi_{p,tau}(K) = (int v_{p,tau}(K, u)^(-n/p) du)^(-p/n)`.
//!
//! `phi_tau(t)^p = (1+tau)/2 t_+^p + (1-tau)/2 t_-^p`, so every evaluation
//! computes the two one-sided sums `v_+` and `v_-` once and mixes them per `tau`.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::{check_direction, Body, SurfaceMeasure};
use crate::cubature;
use crate::error::{Error, Result};
use crate::special::{a_const, check_exponent, check_tau, sphere_area};
use crate::sphere::{CompensatedSum, SphereRule};

/// `v_{p,tau}` below this value is rejected; it cannot happen for a valid
/// origin-interior body, so a trip points at bad input data.
pub const POSITIVITY_GUARD: f64 = 1e-14;

/// How `v_{p,tau}(K, .)` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactFacet,
    StarQuadrature,
    BallClosedForm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ExactFacet => "exact-facet",
            Method::StarQuadrature => "star-quadrature",
            Method::BallClosedForm => "ball-closed-form",
        }
    }
}

/// `t^p` for `t > 0` with cheap paths for integer and half-integer `p`.
#[derive(Clone, Copy, Debug)]
struct Power {
    p: f64,
    whole: i32,
    half: bool,
    general: bool,
    invert: bool,
}

impl Power {
    fn new(p: f64) -> Self {
        let m = p.abs();
        let twice = 2.0 * m;
        let general = twice != twice.round() || m > 16.0;
        Self {
            p,
            whole: m.floor() as i32,
            half: twice.round() as i64 % 2 == 1,
            general,
            invert: p < 0.0,
        }
    }

    #[inline]
    fn eval(&self, t: f64) -> f64 {
        if self.general {
            return t.powf(self.p);
        }
        let m = if self.half {
            t.powi(self.whole) * t.sqrt()
        } else {
            t.powi(self.whole)
        };
        if self.invert {
            1.0 / m
        } else {
            m
        }
    }
}

/// Normals and masses `h^(1-p) a` of the measure behind `v_{p,tau}`.
#[derive(Clone, Debug)]
struct Atoms {
    n: usize,
    normals: Vec<f64>,
    masses: Vec<f64>,
    power: Power,
}

impl Atoms {
    fn new(measure: &SurfaceMeasure, p: f64) -> Self {
        let n = measure.dim();
        Self {
            n,
            normals: (0..measure.len())
                .flat_map(|i| measure.normal(i).iter().copied())
                .collect(),
            masses: measure.masses(p),
            power: Power::new(p),
        }
    }

    /// `(v_+, v_-)` at `theta`.
    #[inline]
    fn split(&self, theta: &[f64]) -> (f64, f64) {
        let mut plus = 0.0;
        let mut minus = 0.0;
        for (nu, m) in self.normals.chunks_exact(self.n).zip(&self.masses) {
            let t: f64 = nu.iter().zip(theta).map(|(a, b)| a * b).sum();
            if t > 0.0 {
                plus += m * self.power.eval(t);
            } else if t < 0.0 {
                minus += m * self.power.eval(-t);
            }
        }
        (plus, minus)
    }
}

#[inline]
fn mix(tau: f64, plus: f64, minus: f64) -> f64 {
    0.5 * (1.0 + tau) * plus + 0.5 * (1.0 - tau) * minus
}

/// `theta -> v_{p,tau}(K, theta)` for a fixed body, exponent and asymmetry.
#[derive(Clone, Debug)]
pub struct ProjectionFunction {
    body: Body,
    p: f64,
    tau: f64,
    method: Method,
    atoms: Option<Atoms>,
    constant: f64,
}

impl ProjectionFunction {
    /// Polytopes use their facets; other bodies except balls are sampled on `rule`.
    pub fn new(body: &Body, p: f64, tau: f64, rule: Option<&SphereRule>) -> Result<Self> {
        check_exponent(p)?;
        check_tau(tau)?;
        body.check_origin_interior()?;
        let n = body.dim();
        let (method, atoms, constant) = match body {
            Body::Ball(b) => (
                Method::BallClosedForm,
                None,
                b.radius.powf(n as f64 - p) * sphere_area(n)? * a_const(n, p)?,
            ),
            Body::Polytope(_) => (
                Method::ExactFacet,
                Some(Atoms::new(&SurfaceMeasure::of_body(body, None)?, p)),
                0.0,
            ),
            _ => (
                Method::StarQuadrature,
                Some(Atoms::new(&SurfaceMeasure::of_body(body, rule)?, p)),
                0.0,
            ),
        };
        Ok(Self {
            body: body.clone(),
            p,
            tau,
            method,
            atoms,
            constant,
        })
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// `v_{p,tau}(K, theta)`.
    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        check_direction(theta, self.body.dim())?;
        let v = match &self.atoms {
            None => self.constant,
            Some(atoms) => {
                let (plus, minus) = atoms.split(theta);
                mix(self.tau, plus, minus)
            }
        };
        if !(v >= POSITIVITY_GUARD) {
            return Err(Error::Positivity {
                direction: theta.to_vec(),
                value: v,
            });
        }
        Ok(v)
    }

    /// `h_{Pi_{p,tau} K}(theta) = v_{p,tau}(K, theta)^(1/p)`.
    pub fn support(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.value(theta)?.powf(1.0 / self.p))
    }
}

fn default_rule_for(body: &Body) -> Result<Option<SphereRule>> {
    match body {
        Body::Ball(_) | Body::Polytope(_) => Ok(None),
        _ => Ok(Some(body.default_rule().build(body.dim(), None)?)),
    }
}

/// `v_{p,tau}(K, theta)`; smooth non-ball bodies use the default rule for `n`.
pub fn proj_function(body: &Body, theta: &[f64], p: f64, tau: f64) -> Result<f64> {
    let rule = default_rule_for(body)?;
    ProjectionFunction::new(body, p, tau, rule.as_ref())?.value(theta)
}

/// `h_{Pi_{p,tau} K}(theta)`.
pub fn proj_support(body: &Body, theta: &[f64], p: f64, tau: f64) -> Result<f64> {
    let rule = default_rule_for(body)?;
    ProjectionFunction::new(body, p, tau, rule.as_ref())?.support(theta)
}

/// One value of `Phi_{p,tau}(K)` with its provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiValue {
    pub tau: f64,
    pub value: f64,
    pub method: Method,
    /// `true` when no sphere rule entered the result (closed form or cell integration).
    pub exact: bool,
    /// Calibrated error estimate of the rule used, 0 for exact values.
    pub error_estimate: f64,
}

fn check_curve_inputs(body: &Body, p: f64, taus: &[f64]) -> Result<()> {
    check_exponent(p)?;
    taus.iter().try_for_each(|&t| check_tau(t))?;
    body.check_origin_interior()
}

/// `Phi_{p,tau}(K)` for every `tau` in `taus`.
///
/// Balls use the closed-form `v`; polytopes in dimensions 2 and 3 integrate
/// their exact `v` cell by cell and ignore `rule`; everything else integrates
/// on `rule` (inner sampling and outer integral alike).
pub fn phi_curve(body: &Body, p: f64, taus: &[f64], rule: &SphereRule) -> Result<Vec<PhiValue>> {
    phi_curve_prepared(body, None, p, taus, rule)
}

/// [`phi_curve`] reusing a boundary sample of a smooth body taken on `rule`.
pub(crate) fn phi_curve_prepared(
    body: &Body,
    measure: Option<&SurfaceMeasure>,
    p: f64,
    taus: &[f64],
    rule: &SphereRule,
) -> Result<Vec<PhiValue>> {
    check_curve_inputs(body, p, taus)?;
    crate::bodies::check_rule(rule, body.dim())?;
    let n = body.dim();
    match body {
        Body::Ball(_) => {
            let v = ProjectionFunction::new(body, p, 0.0, None)?.constant;
            let e = -(n as f64) / p;
            let mean = rule.integrate(|_| v.powf(e))?;
            let value = mean.powf(-p / n as f64);
            Ok(taus
                .iter()
                .map(|&tau| PhiValue {
                    tau,
                    value,
                    method: Method::BallClosedForm,
                    exact: true,
                    error_estimate: 0.0,
                })
                .collect())
        }
        Body::Polytope(_) if n <= 3 => {
            let atoms = Atoms::new(&SurfaceMeasure::of_body(body, None)?, p);
            let means = cell_means(&atoms, p, taus)?;
            Ok(finish(taus, &means, n, p, Method::ExactFacet, true, 0.0))
        }
        Body::Polytope(_) => {
            let atoms = Atoms::new(&SurfaceMeasure::of_body(body, None)?, p);
            let means = rule_means(&atoms, p, taus, rule, None)?;
            Ok(finish(
                taus,
                &means,
                n,
                p,
                Method::ExactFacet,
                false,
                rule.error_estimate(),
            ))
        }
        _ => match measure {
            Some(m) => from_measure(m, p, taus, rule, outer_map(body), rule.error_estimate()),
            None => phi_curve_sampled(body, p, taus, rule, rule),
        },
    }
}

/// `Phi_{p,tau}(K)` by sampling the boundary on `inner` and integrating `v^(-n/p)` on `outer`.
///
/// Any body is accepted; balls are sampled like star bodies, which makes this
/// an independent check of the closed form.
pub fn phi_curve_sampled(
    body: &Body,
    p: f64,
    taus: &[f64],
    inner: &SphereRule,
    outer: &SphereRule,
) -> Result<Vec<PhiValue>> {
    check_curve_inputs(body, p, taus)?;
    crate::bodies::check_rule(outer, body.dim())?;
    let measure = SurfaceMeasure::of_body(body, Some(inner))?;
    let est = if measure.is_exact() {
        outer.error_estimate()
    } else {
        inner.error_estimate().max(outer.error_estimate())
    };
    from_measure(&measure, p, taus, outer, outer_map(body), est)
}

fn outer_map(body: &Body) -> Option<&DMatrix<f64>> {
    match body {
        Body::Ellipsoid(e) => Some(e.matrix()),
        _ => None,
    }
}

fn from_measure(
    measure: &SurfaceMeasure,
    p: f64,
    taus: &[f64],
    outer: &SphereRule,
    map: Option<&DMatrix<f64>>,
    est: f64,
) -> Result<Vec<PhiValue>> {
    let atoms = Atoms::new(measure, p);
    let means = rule_means(&atoms, p, taus, outer, map)?;
    let method = if measure.is_exact() {
        Method::ExactFacet
    } else {
        Method::StarQuadrature
    };
    Ok(finish(taus, &means, measure.dim(), p, method, false, est))
}

fn finish(
    taus: &[f64],
    means: &[f64],
    n: usize,
    p: f64,
    method: Method,
    exact: bool,
    est: f64,
) -> Vec<PhiValue> {
    taus.iter()
        .zip(means)
        .map(|(&tau, &m)| PhiValue {
            tau,
            value: m.powf(-p / n as f64),
            method,
            exact,
            error_estimate: est,
        })
        .collect()
}

/// Means of `v_tau^(-n/p)` over `rule`, one per `tau`.
///
/// With `map = Some(A)` the nodes are pushed to `A w / |A w|` and weighted by
/// the Jacobian `|det A| / |A w|^n`; for an ellipsoid `c + A B` this flattens
/// the outer integrand.
fn rule_means(
    atoms: &Atoms,
    p: f64,
    taus: &[f64],
    rule: &SphereRule,
    map: Option<&DMatrix<f64>>,
) -> Result<Vec<f64>> {
    let n = atoms.n;
    let outer = Power::new(-(n as f64) / p);
    let det = map.map_or(1.0, |a| a.determinant().abs());
    let split: Vec<(f64, f64, f64)> = (0..rule.len())
        .into_par_iter()
        .map(|j| match map {
            None => {
                let (plus, minus) = atoms.split(rule.node(j));
                (plus, minus, 1.0)
            }
            Some(a) => {
                let y = a * DVector::from_column_slice(rule.node(j));
                let r = y.norm();
                let theta: Vec<f64> = y.iter().map(|x| x / r).collect();
                let (plus, minus) = atoms.split(&theta);
                (plus, minus, det / r.powi(n as i32))
            }
        })
        .collect();
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut sum = CompensatedSum::default();
        for (j, (&(plus, minus, jac), w)) in split.iter().zip(rule.weights()).enumerate() {
            let v = mix(tau, plus, minus);
            if !(v >= POSITIVITY_GUARD) {
                return Err(Error::Positivity {
                    direction: rule.node(j).to_vec(),
                    value: v,
                });
            }
            sum.add(w * jac * outer.eval(v));
        }
        out.push(sum.value());
    }
    Ok(out)
}

/// Means of `v_tau^(-n/p)` over the sphere by cell integration (n = 2, 3).
fn cell_means(atoms: &Atoms, p: f64, taus: &[f64]) -> Result<Vec<f64>> {
    let n = atoms.n;
    let outer = Power::new(-(n as f64) / p);
    let tripped: Mutex<Option<(Vec<f64>, f64)>> = Mutex::new(None);
    let eval = |theta: &[f64], out: &mut [f64]| {
        let (plus, minus) = atoms.split(theta);
        for (o, &tau) in out.iter_mut().zip(taus) {
            // v_tau(-theta) = mix(tau, v_-, v_+)
            let (va, vb) = (mix(tau, plus, minus), mix(tau, minus, plus));
            if va >= POSITIVITY_GUARD && vb >= POSITIVITY_GUARD {
                *o = outer.eval(va) + outer.eval(vb);
            } else {
                *o = 0.0;
                let mut slot = tripped.lock().unwrap_or_else(|poison| poison.into_inner());
                if slot.is_none() {
                    let (dir, v) = if va < vb {
                        (theta.to_vec(), va)
                    } else {
                        (theta.iter().map(|x| -x).collect(), vb)
                    };
                    *slot = Some((dir, v));
                }
            }
        }
    };
    let means = if n == 2 {
        let normals: Vec<[f64; 2]> = atoms
            .normals
            .chunks_exact(2)
            .map(|c| [c[0], c[1]])
            .collect();
        cubature::sphere_mean_s1(
            &normals,
            taus.len(),
            |x, out| eval(x, out),
            cubature::DEFAULT_REL_TOL,
        )?
    } else {
        let normals: Vec<[f64; 3]> = atoms
            .normals
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        cubature::sphere_mean_s2(
            &normals,
            taus.len(),
            |x, out| eval(x, out),
            cubature::DEFAULT_REL_TOL,
        )?
    };
    if let Some((direction, value)) = tripped
        .into_inner()
        .unwrap_or_else(|poison| poison.into_inner())
    {
        return Err(Error::Positivity { direction, value });
    }
    Ok(means)
}

/// `Phi_{p,tau}(K)`.
pub fn phi(body: &Body, p: f64, tau: f64, rule: &SphereRule) -> Result<PhiValue> {
    Ok(phi_curve(body, p, &[tau], rule)?[0])
}

/// `(tau, Phi_{p,tau}(K))` along `grid`.
pub fn phi_tau_curve(
    body: &Body,
    p: f64,
    grid: &[f64],
    rule: &SphereRule,
) -> Result<Vec<(f64, f64)>> {
    Ok(phi_curve(body, p, grid, rule)?
        .into_iter()
        .map(|v| (v.tau, v.value))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{Ball, Ellipsoid, Polytope, StarBody};
    use crate::special::phi_tau_pow;
    use crate::sphere::{RuleKind, RuleSpec};
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::PI;

    fn rule3() -> SphereRule {
        SphereRule::default_for(3).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn projection_function_examples() {
        let ball = Body::from(Ball::unit(3));
        let cube = Body::from(Polytope::cube(3));
        assert!(close(
            proj_function(&ball, &[0.0, 0.6, 0.8], 2.0, 0.3).unwrap(),
            2.0 * PI / 3.0,
            1e-14
        ));
        for tau in [-1.0, -0.4, 0.0, 0.9] {
            assert!(close(
                proj_function(&cube, &[1.0, 0.0, 0.0], 2.0, tau).unwrap(),
                4.0,
                1e-15
            ));
            let theta = [0.48, -0.6, 0.64];
            assert!(close(
                proj_function(&cube, &theta, 2.0, tau).unwrap(),
                4.0,
                1e-14
            ));
        }
        assert!(close(
            proj_support(&ball, &[1.0, 0.0, 0.0], 2.0, 0.0).unwrap(),
            (2.0 * PI / 3.0).sqrt(),
            1e-14
        ));
        assert!(close(
            proj_support(&cube, &[1.0, 0.0, 0.0], 2.0, 0.5).unwrap(),
            2.0,
            1e-15
        ));
        assert!(matches!(
            proj_function(&cube, &[1.0, 0.0, 0.0], 0.5, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn p_one_is_even_for_closed_polytopes() {
        let simplex = Body::from(Polytope::simplex(3).unwrap());
        let theta = [0.36, 0.48, 0.8];
        let minus: Vec<f64> = theta.iter().map(|x| -x).collect();
        for tau in [-1.0, 0.3, 1.0] {
            let a = proj_support(&simplex, &theta, 1.0, tau).unwrap();
            let b = proj_support(&simplex, &minus, 1.0, tau).unwrap();
            assert!(close(a, b, 1e-14));
        }
    }

    #[test]
    fn facet_sum_matches_direct_formula() {
        let simplex = Polytope::simplex(3).unwrap();
        let body = Body::from(simplex.clone());
        let theta = [0.0, 0.6, -0.8];
        let (p, tau) = (1.7, -0.35);
        let direct: f64 = simplex
            .facets()
            .iter()
            .map(|f| {
                let t: f64 = f.normal.iter().zip(&theta).map(|(a, b)| a * b).sum();
                phi_tau_pow(t, p, tau) * f.offset.powf(1.0 - p) * f.area
            })
            .sum();
        assert!(close(
            proj_function(&body, &theta, p, tau).unwrap(),
            direct,
            1e-14
        ));
    }

    #[test]
    fn phi_examples() {
        let rule = rule3();
        let ball = Body::from(Ball::unit(3));
        for tau in [-0.5, 0.0, 1.0] {
            assert!(close(
                phi(&ball, 2.0, tau, &rule).unwrap().value,
                2.0 * PI / 3.0,
                1e-12
            ));
        }
        assert!(close(phi(&ball, 1.0, 0.0, &rule).unwrap().value, PI, 1e-12));
        let cube = Body::from(Polytope::cube(3));
        for v in phi_curve(&cube, 2.0, &[-1.0, -0.3, 0.0, 0.7], &rule).unwrap() {
            assert!(v.exact);
            assert!(close(v.value, 4.0, 1e-12), "{v:?}");
        }
    }

    #[test]
    fn simplex_tau_ordering() {
        let rule = rule3();
        let s = Body::from(Polytope::simplex(3).unwrap());
        let c = phi_tau_curve(&s, 2.0, &[-1.0, 0.0, 1.0], &rule).unwrap();
        assert_eq!(c[0].1, c[2].1);
        assert!(c[0].1 < c[1].1);
    }

    /// Brute-force oracle for a polygon: trapezoid rule between consecutive kink angles.
    fn polygon_phi_oracle(poly: &Polytope, p: f64, tau: f64) -> f64 {
        let mut kinks: Vec<f64> = poly
            .facets()
            .iter()
            .flat_map(|f| {
                let a = f.normal[1].atan2(f.normal[0]);
                [a + PI / 2.0, a - PI / 2.0]
            })
            .map(|a| a.rem_euclid(2.0 * PI))
            .collect();
        kinks.push(0.0);
        kinks.push(2.0 * PI);
        kinks.sort_by(f64::total_cmp);
        let v = |t: f64| -> f64 {
            poly.facets()
                .iter()
                .map(|f| {
                    phi_tau_pow(t.cos() * f.normal[0] + t.sin() * f.normal[1], p, tau)
                        * f.offset.powf(1.0 - p)
                        * f.area
                })
                .sum()
        };
        let gl = crate::quad1d::GaussLegendre::new(40);
        let mut total = 0.0;
        for w in kinks.windows(2) {
            let m = 64;
            for k in 0..m {
                let a = w[0] + (w[1] - w[0]) * k as f64 / m as f64;
                let b = w[0] + (w[1] - w[0]) * (k + 1) as f64 / m as f64;
                total += gl.integrate(a, b, |t| v(t).powf(-2.0 / p));
            }
        }
        (total / (2.0 * PI)).powf(-p / 2.0)
    }

    #[test]
    fn polygon_cells_match_oracle() {
        let rule = SphereRule::default_for(2).unwrap();
        let t = DMatrix::from_row_slice(2, 2, &[1.3, 0.4, -0.2, 0.7]);
        let Body::Polytope(poly) = Body::from(Polytope::simplex(2).unwrap())
            .linear_image(&t)
            .unwrap()
        else {
            unreachable!()
        };
        let body = Body::from(poly.clone());
        for (p, tau) in [(1.0, 0.0), (1.5, 0.4), (1.2, -1.0)] {
            let got = phi(&body, p, tau, &rule).unwrap().value;
            let want = polygon_phi_oracle(&poly, p, tau);
            assert!(close(got, want, 1e-11), "p={p} tau={tau}: {got} vs {want}");
        }
    }

    #[test]
    fn ellipsoid_quadrature_matches_covariance() {
        let rule = rule3();
        let t =
            DMatrix::<f64>::from_row_slice(3, 3, &[1.5, 0.2, 0.0, 0.1, 0.8, 0.3, 0.0, -0.2, 1.1]);
        let det = t.determinant().abs();
        let e = Body::from(Ellipsoid::centered(t).unwrap());
        for (p, tau) in [(2.0, 0.0), (1.5, 0.7), (1.0, -1.0)] {
            let got = phi(&e, p, tau, &rule).unwrap();
            assert_eq!(got.method, Method::StarQuadrature);
            let want = det.powf((3.0 - p) / 3.0) * sphere_area(3).unwrap() * a_const(3, p).unwrap();
            assert!(
                close(got.value, want, 5.0 * got.error_estimate),
                "{got:?} vs {want}"
            );
        }
    }

    #[test]
    fn sampled_ball_matches_closed_form() {
        let rule = rule3();
        let q2 = Body::from(StarBody::qball(3, 2.0).unwrap());
        let got = phi_curve_sampled(&q2, 1.5, &[0.5], &rule, &rule).unwrap()[0];
        let want = sphere_area(3).unwrap() * a_const(3, 1.5).unwrap();
        assert!(close(got.value, want, 1e-6));
    }

    #[test]
    fn guards_and_domains() {
        let rule = rule3();
        let off = Body::from(Polytope::cube(3))
            .translate(&[1.5, 0.0, 0.0])
            .unwrap();
        assert!(phi(&off, 2.0, 0.0, &rule).is_err());
        let ball = Body::from(Ball::unit(3));
        assert!(phi(&ball, 2.0, 1.5, &rule).is_err());
        let circle = RuleSpec {
            kind: RuleKind::Circle,
            size: 64,
        }
        .build(2, None)
        .unwrap();
        assert!(phi(&ball, 2.0, 0.0, &circle).is_err());
        let e = Ellipsoid::new(
            DMatrix::identity(3, 3),
            DVector::from_vec(vec![0.0, 0.0, 0.0]),
        )
        .unwrap();
        assert!(phi(&e.into(), 2.0, 0.0, &rule).is_ok());
    }
}
