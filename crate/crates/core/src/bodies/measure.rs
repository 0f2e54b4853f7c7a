use nalgebra::DVector;
use rayon::prelude::*;

use super::{check_rule, Body};
use crate::error::{Error, Result};
use crate::special::sphere_area;
use crate::sphere::SphereRule;

/// Boundary of a body as weighted atoms `(nu, h, a)`: outer normal, support
/// value `x . nu` and boundary area carried by the atom.
///
/// For polytopes the atoms are the facets and every integral over `dH^{n-1}`
/// is exact. Smooth bodies are sampled on a sphere rule: star bodies through
/// `x = rho(u) u`, ellipsoids through `x = c + T w`.
#[derive(Clone, Debug)]
pub struct SurfaceMeasure {
    n: usize,
    normals: Vec<f64>,
    support: Vec<f64>,
    area: Vec<f64>,
    exact: bool,
}

impl SurfaceMeasure {
    /// Facet atoms for polytopes; `rule` samples every other body.
    pub fn of_body(body: &Body, rule: Option<&SphereRule>) -> Result<Self> {
        body.check_origin_interior()?;
        let n = body.dim();
        if let Body::Polytope(p) = body {
            let facets = p.facets();
            return Ok(Self {
                n,
                normals: facets
                    .iter()
                    .flat_map(|f| f.normal.iter().copied())
                    .collect(),
                support: facets.iter().map(|f| f.offset).collect(),
                area: facets.iter().map(|f| f.area).collect(),
                exact: true,
            });
        }
        let rule = rule.ok_or_else(|| {
            Error::domain(format!(
                "a sphere rule is needed to sample a {}",
                body.kind_name()
            ))
        })?;
        check_rule(rule, n)?;
        let total = sphere_area(n)?;
        let atoms: Vec<Result<(Vec<f64>, f64, f64)>> = (0..rule.len())
            .into_par_iter()
            .map(|i| {
                let u = rule.node(i);
                let w = rule.weight(i) * total;
                match body {
                    Body::Ellipsoid(e) => {
                        // g = T^{-t} w: nu = g/|g|, x . nu = (1 + c . g)/|g|, dH = |det T| |g| dsigma
                        let g = e.inverse().transpose() * DVector::from_column_slice(u);
                        let len = g.norm();
                        let h = (1.0 + e.center().dot(&g)) / len;
                        Ok((
                            g.iter().map(|x| x / len).collect(),
                            h,
                            w * e.det().abs() * len,
                        ))
                    }
                    _ => {
                        // dH = rho^{n-1} / (u . nu) dsigma and x . nu = rho (u . nu)
                        let bp = body.boundary_point_unchecked(u)?;
                        let rho = crate::sphere::norm(&bp.point);
                        let h = rho * bp.cosine;
                        Ok((bp.normal, h, w * rho.powi(n as i32 - 1) / bp.cosine))
                    }
                }
            })
            .collect();
        let mut m = Self {
            n,
            normals: Vec::with_capacity(n * rule.len()),
            support: Vec::with_capacity(rule.len()),
            area: Vec::with_capacity(rule.len()),
            exact: false,
        };
        for atom in atoms {
            let (nu, h, a) = atom?;
            if !(h > 0.0 && a.is_finite()) {
                return Err(Error::Positivity {
                    direction: nu,
                    value: h,
                });
            }
            m.normals.extend(nu);
            m.support.push(h);
            m.area.push(a);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.area.len()
    }

    pub fn is_empty(&self) -> bool {
        self.area.is_empty()
    }

    /// Whether the atoms are the body's exact facet data.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        &self.normals[i * self.n..(i + 1) * self.n]
    }

    pub fn support_values(&self) -> &[f64] {
        &self.support
    }

    pub fn areas(&self) -> &[f64] {
        &self.area
    }

    /// Atom masses `h^(1-p) a` of the measure `|x . nu|^(1-p) dH^{n-1}`.
    pub fn masses(&self, p: f64) -> Vec<f64> {
        self.support
            .iter()
            .zip(&self.area)
            .map(|(h, a)| h.powf(1.0 - p) * a)
            .collect()
    }

    /// `S_p = sum h^(1-p) a`.
    pub fn sp(&self, p: f64) -> f64 {
        let mut s = crate::sphere::CompensatedSum::default();
        for m in self.masses(p) {
            s.add(m);
        }
        s.value()
    }

    /// `(1/n) sum h a`.
    pub fn volume(&self) -> f64 {
        let mut s = crate::sphere::CompensatedSum::default();
        for (h, a) in self.support.iter().zip(&self.area) {
            s.add(h * a);
        }
        s.value() / self.n as f64
    }
}
