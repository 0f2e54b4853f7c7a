use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sphere::{dot, norm};

/// Largest allowed amplitude of a perturbed ball.
pub const MAX_PERTURBATION: f64 = 0.3;

/// Legendre polynomial `P_degree(u . e_axis)` used to perturb the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SphericalPoly {
    pub degree: u8,
    pub axis: usize,
}

impl SphericalPoly {
    fn value_and_slope(&self, t: f64) -> (f64, f64) {
        match self.degree {
            2 => (0.5 * (3.0 * t * t - 1.0), 3.0 * t),
            _ => (
                0.5 * (5.0 * t * t * t - 3.0 * t),
                0.5 * (15.0 * t * t - 3.0),
            ),
        }
    }
}

impl FromStr for SphericalPoly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::domain(format!(
                "unknown perturbation polynomial '{s}' (expected legendre{{2,3}}-axis<k>)"
            ))
        };
        let rest = s.strip_prefix("legendre").ok_or_else(bad)?;
        let (deg, axis) = rest.split_once("-axis").ok_or_else(bad)?;
        let degree: u8 = deg.parse().map_err(|_| bad())?;
        if degree != 2 && degree != 3 {
            return Err(bad());
        }
        Ok(SphericalPoly {
            degree,
            axis: axis.parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for SphericalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "legendre{}-axis{}", self.degree, self.axis)
    }
}

impl Serialize for SphericalPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum StarFamily {
    /// Unit ball of the `l_q` norm, `rho(u) = 1 / |u|_q`; `q = inf` gives the cube.
    #[serde(rename = "qball")]
    QBall {
        #[serde(serialize_with = "serialize_q")]
        q: f64,
    },
    /// `rho(u) = 1 + eps * P(u)`.
    Perturbed { eps: f64, poly: SphericalPoly },
}

fn serialize_q<S: Serializer>(q: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if q.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*q)
    }
}

/// A star body described by an analytic radial function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StarBody {
    n: usize,
    #[serde(flatten)]
    family: StarFamily,
}

impl StarBody {
    pub fn new(n: usize, family: StarFamily) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("star body dimension {n} < 2")));
        }
        match family {
            StarFamily::QBall { q } => {
                if !(q >= 1.0) {
                    return Err(Error::domain(format!("q = {q} must lie in [1, inf]")));
                }
            }
            StarFamily::Perturbed { eps, poly } => {
                if !(eps.abs() <= MAX_PERTURBATION) {
                    return Err(Error::domain(format!(
                        "perturbation amplitude {eps} exceeds {MAX_PERTURBATION}"
                    )));
                }
                if poly.axis >= n {
                    return Err(Error::domain(format!(
                        "axis {} out of range for n = {n}",
                        poly.axis
                    )));
                }
            }
        }
        Ok(Self { n, family })
    }

    pub fn qball(n: usize, q: f64) -> Result<Self> {
        Self::new(n, StarFamily::QBall { q })
    }

    pub fn perturbed(n: usize, eps: f64, poly: SphericalPoly) -> Result<Self> {
        Self::new(n, StarFamily::Perturbed { eps, poly })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> &StarFamily {
        &self.family
    }

    /// Origin-symmetric families (all q-balls, even-degree perturbations).
    pub fn is_origin_symmetric(&self) -> bool {
        match self.family {
            StarFamily::QBall { .. } => true,
            StarFamily::Perturbed { poly, .. } => poly.degree % 2 == 0,
        }
    }

    pub fn radial(&self, u: &[f64]) -> f64 {
        match self.family {
            StarFamily::QBall { q } => 1.0 / lq_norm(u, q),
            StarFamily::Perturbed { eps, poly } => 1.0 + eps * poly.value_and_slope(u[poly.axis]).0,
        }
    }

    /// Unnormalized outer normal at the boundary point in direction `u`.
    ///
    /// At the kinks of `q = 1` and `q = inf` a fixed subgradient is chosen.
    pub(crate) fn normal_direction(&self, u: &[f64]) -> Vec<f64> {
        match self.family {
            StarFamily::QBall { q } if q.is_infinite() => {
                let k = argmax_abs(u);
                let mut v = vec![0.0; u.len()];
                v[k] = u[k].signum();
                v
            }
            StarFamily::QBall { q } if q == 1.0 => u
                .iter()
                .map(|&x| {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            StarFamily::QBall { q } => {
                let m = u[argmax_abs(u)].abs();
                u.iter()
                    .map(|&x| x.signum() * (x.abs() / m).powf(q - 1.0))
                    .collect()
            }
            StarFamily::Perturbed { eps, poly } => {
                let t = u[poly.axis];
                let (value, slope) = poly.value_and_slope(t);
                let rho = 1.0 + eps * value;
                // rho u - grad_S rho, with grad_S rho = eps P'(t) (e_axis - t u)
                let mut v: Vec<f64> = u.iter().map(|&x| (rho + eps * slope * t) * x).collect();
                v[poly.axis] -= eps * slope;
                v
            }
        }
    }

    /// Volume of q-balls in closed form: `2^n Gamma(1 + 1/q)^n / Gamma(1 + n/q)`.
    pub fn qball_volume_closed_form(&self) -> Option<f64> {
        let StarFamily::QBall { q } = self.family else {
            return None;
        };
        let n = self.n as f64;
        if q.is_infinite() {
            return Some(2f64.powf(n));
        }
        let g1 = crate::special::gamma(1.0 + 1.0 / q).ok()?;
        let gn = crate::special::gamma(1.0 + n / q).ok()?;
        Some(2f64.powf(n) * g1.powf(n) / gn)
    }
}

fn argmax_abs(u: &[f64]) -> usize {
    let mut k = 0;
    for (i, x) in u.iter().enumerate() {
        if x.abs() > u[k].abs() {
            k = i;
        }
    }
    k
}

pub(crate) fn lq_norm(u: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return u.iter().fold(0.0, |m, x| m.max(x.abs()));
    }
    let m = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * u
        .iter()
        .map(|x| (x.abs() / m).powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Unit normal and cosine from an unnormalized normal direction.
pub(crate) fn finish_normal(u: &[f64], raw: Vec<f64>) -> (Vec<f64>, f64) {
    let len = norm(&raw);
    let nu: Vec<f64> = raw.iter().map(|x| x / len).collect();
    let c = dot(u, &nu);
    (nu, c)
}
