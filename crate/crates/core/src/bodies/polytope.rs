use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{dot, norm};

/// Relative closure tolerance `|sum a_i nu_i| <= CLOSURE_TOL * sum a_i`.
pub const CLOSURE_TOL: f64 = 1e-10;
/// Allowed deviation of a stored facet normal from unit length.
pub const UNIT_TOL: f64 = 1e-12;

/// One facet: outer unit normal, signed distance of its plane from the origin, and its area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub area: f64,
}

/// A polytope given by its facet data (the atoms of its surface area measure).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polytope {
    n: usize,
    facets: Vec<Facet>,
}

impl Polytope {
    /// Validates facet data: unit normals, positive areas and Minkowski closure.
    ///
    /// Offsets may be non-positive (a translated polytope can lose the origin);
    /// operations that need the origin inside check [`Polytope::check_origin_interior`].
    pub fn new(n: usize, facets: Vec<Facet>) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("polytope dimension {n} < 2")));
        }
        if facets.len() < n + 1 {
            return Err(Error::domain(format!(
                "a bounded polytope in R^{n} needs at least {} facets, got {}",
                n + 1,
                facets.len()
            )));
        }
        for (i, f) in facets.iter().enumerate() {
            if f.normal.len() != n {
                return Err(Error::domain(format!(
                    "facet {i}: normal has {} components, expected {n}",
                    f.normal.len()
                )));
            }
            if (norm(&f.normal) - 1.0).abs() > UNIT_TOL {
                return Err(Error::domain(format!(
                    "facet {i}: normal is not a unit vector"
                )));
            }
            if !(f.area > 0.0 && f.area.is_finite()) {
                return Err(Error::domain(format!(
                    "facet {i}: area {} must be positive",
                    f.area
                )));
            }
            if !f.offset.is_finite() {
                return Err(Error::domain(format!("facet {i}: offset is not finite")));
            }
        }
        let poly = Self { n, facets };
        poly.check_closure()?;
        Ok(poly)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// `sum a_i nu_i` and its norm relative to the total surface area.
    pub fn closure_defect(&self) -> (Vec<f64>, f64) {
        let mut s = vec![0.0; self.n];
        let mut total = 0.0;
        for f in &self.facets {
            for (acc, x) in s.iter_mut().zip(&f.normal) {
                *acc += f.area * x;
            }
            total += f.area;
        }
        let rel = norm(&s) / total;
        (s, rel)
    }

    fn check_closure(&self) -> Result<()> {
        let (defect, relative) = self.closure_defect();
        if relative > CLOSURE_TOL {
            let defect_norm = norm(&defect);
            return Err(Error::Closure {
                defect,
                defect_norm,
                relative,
            });
        }
        Ok(())
    }

    pub fn has_origin_interior(&self) -> bool {
        self.facets.iter().all(|f| f.offset > 0.0)
    }

    pub fn check_origin_interior(&self) -> Result<()> {
        match self.facets.iter().position(|f| f.offset <= 0.0) {
            None => Ok(()),
            Some(i) => Err(Error::domain(format!(
                "origin is not interior: facet {i} has offset {}",
                self.facets[i].offset
            ))),
        }
    }

    /// `(1/n) sum h_i a_i`.
    pub fn volume(&self) -> f64 {
        self.facets.iter().map(|f| f.offset * f.area).sum::<f64>() / self.n as f64
    }

    /// `sum h_i^(1-p) a_i`.
    pub fn sp_surface_area(&self, p: f64) -> Result<f64> {
        self.check_origin_interior()?;
        Ok(self
            .facets
            .iter()
            .map(|f| f.offset.powf(1.0 - p) * f.area)
            .sum())
    }

    /// Support value in a facet-normal direction; other directions are rejected.
    pub fn support(&self, u: &[f64]) -> Result<f64> {
        self.facets
            .iter()
            .find(|f| f.normal.iter().zip(u).all(|(a, b)| (a - b).abs() <= 1e-12))
            .map(|f| f.offset)
            .ok_or_else(|| {
                Error::unsupported(
                    "polytope support is only available in facet-normal directions (H-representation)",
                )
            })
    }

    /// `min h_i / (nu_i . u)` over facets facing `u`.
    pub fn radial(&self, u: &[f64]) -> Result<f64> {
        self.check_origin_interior()?;
        let r = self
            .facets
            .iter()
            .filter_map(|f| {
                let c = dot(&f.normal, u);
                (c > 0.0).then(|| f.offset / c)
            })
            .fold(f64::INFINITY, f64::min);
        if !r.is_finite() {
            return Err(Error::domain(
                "polytope is unbounded in the query direction",
            ));
        }
        Ok(r)
    }

    /// Image under `x -> T x`, transforming normals, offsets and areas exactly.
    pub fn linear_image(&self, t: &DMatrix<f64>, det: f64, inv_t: &DMatrix<f64>) -> Result<Self> {
        let n = self.n;
        let inv_tt = inv_t.transpose();
        let facets = self
            .facets
            .iter()
            .map(|f| {
                let w: Vec<f64> = (0..n)
                    .map(|i| (0..n).map(|j| inv_tt[(i, j)] * f.normal[j]).sum())
                    .collect();
                let len = norm(&w);
                Facet {
                    normal: w.iter().map(|x| x / len).collect(),
                    offset: f.offset / len,
                    area: f.area * det.abs() * len,
                }
            })
            .collect();
        debug_assert_eq!(t.nrows(), n);
        Polytope::new(n, facets)
    }

    /// Translation by `a`: `h_i -> h_i + a . nu_i`.
    pub fn translate(&self, a: &[f64]) -> Self {
        Self {
            n: self.n,
            facets: self
                .facets
                .iter()
                .map(|f| Facet {
                    offset: f.offset + dot(a, &f.normal),
                    ..f.clone()
                })
                .collect(),
        }
    }

    /// The cube `[-1, 1]^n`.
    pub fn cube(n: usize) -> Self {
        let area = 2f64.powi(n as i32 - 1);
        let mut facets = Vec::with_capacity(2 * n);
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut normal = vec![0.0; n];
                normal[i] = s;
                facets.push(Facet {
                    normal,
                    offset: 1.0,
                    area,
                });
            }
        }
        Self { n, facets }
    }

    /// The cross-polytope `{ |x|_1 <= 1 }`.
    pub fn cross_polytope(n: usize) -> Self {
        let nf = n as f64;
        let offset = 1.0 / nf.sqrt();
        let factorial: f64 = (1..n).map(|k| k as f64).product();
        let area = nf.sqrt() / factorial;
        let facets = (0..1usize << n)
            .map(|mask| Facet {
                normal: (0..n)
                    .map(|i| if mask >> i & 1 == 1 { -offset } else { offset })
                    .collect(),
                offset,
                area,
            })
            .collect();
        Self { n, facets }
    }

    /// Regular simplex centred at the origin with circumradius 1 (`n = 2, 3`).
    pub fn simplex(n: usize) -> Result<Self> {
        let facets = match n {
            2 => {
                // vertices at 90, 210 and 330 degrees; each edge faces away from one vertex
                let side = 3f64.sqrt();
                [270.0f64, 30.0, 150.0]
                    .iter()
                    .map(|deg| {
                        let a = deg.to_radians();
                        Facet {
                            normal: vec![a.cos(), a.sin()],
                            offset: 0.5,
                            area: side,
                        }
                    })
                    .collect()
            }
            3 => {
                // vertices (1,1,1), (1,-1,-1), (-1,1,-1), (-1,-1,1) scaled to circumradius 1
                let s = 1.0 / 3f64.sqrt();
                let verts = [
                    [1.0, 1.0, 1.0],
                    [1.0, -1.0, -1.0],
                    [-1.0, 1.0, -1.0],
                    [-1.0, -1.0, 1.0],
                ];
                // edge 2*sqrt(2/3), face area sqrt(3)/4 * edge^2
                let area = 3f64.sqrt() / 4.0 * 8.0 / 3.0;
                verts
                    .iter()
                    .map(|v| Facet {
                        normal: v.iter().map(|x| -x * s).collect(),
                        offset: 1.0 / 3.0,
                        area,
                    })
                    .collect()
            }
            _ => {
                return Err(Error::unsupported(format!(
                    "built-in simplex facet data exists for n = 2, 3 only (n = {n})"
                )))
            }
        };
        Polytope::new(n, facets)
    }
}
