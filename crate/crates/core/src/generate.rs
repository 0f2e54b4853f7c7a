//! Seeded random bodies for fuzzing.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Serialize, Serializer};

use crate::bodies::{Body, Ellipsoid, Polytope, SphericalPoly, StarBody, MAX_PERTURBATION};
use crate::error::{Error, Result};

/// Draw limit of the condition-number rejection loop.
pub const MAX_DRAWS: usize = 1000;
/// Range of `q` for randomly drawn q-balls.
pub const Q_RANGE: (f64, f64) = (1.5, 6.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GenKind {
    GlCube,
    GlCrossPolytope,
    GlSimplex,
    Ellipsoid,
    /// A q-ball with fixed `q`, or `q` drawn from [`Q_RANGE`].
    QBall(Option<f64>),
    PerturbedBall,
}

impl GenKind {
    pub const DEFAULT_SET: [GenKind; 5] = [
        GenKind::GlCube,
        GenKind::GlCrossPolytope,
        GenKind::GlSimplex,
        GenKind::Ellipsoid,
        GenKind::QBall(None),
    ];
}

impl FromStr for GenKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gl-cube" => GenKind::GlCube,
            "gl-crosspolytope" => GenKind::GlCrossPolytope,
            "gl-simplex" => GenKind::GlSimplex,
            "ellipsoid" => GenKind::Ellipsoid,
            "qball" => GenKind::QBall(None),
            "perturbed-ball" => GenKind::PerturbedBall,
            _ => match s.strip_prefix("qball:") {
                Some(q) if q == "inf" => GenKind::QBall(Some(f64::INFINITY)),
                Some(q) => GenKind::QBall(Some(
                    q.parse().map_err(|_| Error::domain(format!("bad q in body kind '{s}'")))?,
                )),
                None => {
                    return Err(Error::domain(format!(
                        "unknown body kind '{s}' (expected gl-cube, gl-crosspolytope, gl-simplex, ellipsoid, qball[:q], perturbed-ball)"
                    )))
                }
            },
        })
    }
}

impl fmt::Display for GenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenKind::GlCube => f.write_str("gl-cube"),
            GenKind::GlCrossPolytope => f.write_str("gl-crosspolytope"),
            GenKind::GlSimplex => f.write_str("gl-simplex"),
            GenKind::Ellipsoid => f.write_str("ellipsoid"),
            GenKind::QBall(None) => f.write_str("qball"),
            GenKind::QBall(Some(q)) if q.is_infinite() => f.write_str("qball:inf"),
            GenKind::QBall(Some(q)) => write!(f, "qball:{q}"),
            GenKind::PerturbedBall => f.write_str("perturbed-ball"),
        }
    }
}

impl Serialize for GenKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Condition number `sigma_max / sigma_min`.
pub fn condition_number(t: &DMatrix<f64>) -> f64 {
    let sv = t.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Gaussian `n x n` matrix with condition number at most `cond_max`.
pub fn random_gl(n: usize, rng: &mut impl Rng, cond_max: f64) -> Result<DMatrix<f64>> {
    if !(cond_max >= 1.0) {
        return Err(Error::Generation(format!(
            "cond_max = {cond_max} must be at least 1"
        )));
    }
    for _ in 0..MAX_DRAWS {
        let t = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        if condition_number(&t) <= cond_max {
            return Ok(t);
        }
    }
    Err(Error::Generation(format!(
        "no {n}x{n} matrix with condition number <= {cond_max} in {MAX_DRAWS} draws"
    )))
}

/// Body of the given kind drawn from `rng`.
pub fn generate_with(kind: GenKind, n: usize, rng: &mut impl Rng, cond_max: f64) -> Result<Body> {
    let gen_err = |e: Error| Error::Generation(format!("{kind} (n = {n}): {e}"));
    let image = |base: Polytope, rng: &mut _| -> Result<Body> {
        let t = random_gl(n, rng, cond_max)?;
        Body::from(base).linear_image(&t).map_err(gen_err)
    };
    match kind {
        GenKind::GlCube => image(Polytope::cube(n), rng),
        GenKind::GlCrossPolytope => image(Polytope::cross_polytope(n), rng),
        GenKind::GlSimplex => image(Polytope::simplex(n).map_err(gen_err)?, rng),
        GenKind::Ellipsoid => Ok(Ellipsoid::centered(random_gl(n, rng, cond_max)?)
            .map_err(gen_err)?
            .into()),
        GenKind::QBall(q) => {
            let q = q.unwrap_or_else(|| rng.random_range(Q_RANGE.0..=Q_RANGE.1));
            Ok(StarBody::qball(n, q).map_err(gen_err)?.into())
        }
        GenKind::PerturbedBall => {
            let eps = rng.random_range(-MAX_PERTURBATION..=MAX_PERTURBATION);
            let poly = SphericalPoly {
                degree: rng.random_range(2..=3),
                axis: rng.random_range(0..n),
            };
            Ok(StarBody::perturbed(n, eps, poly).map_err(gen_err)?.into())
        }
    }
}

/// Deterministic body for `(kind, n, seed)`.
pub fn generate_body(kind: GenKind, n: usize, seed: u64, cond_max: f64) -> Result<Body> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    generate_with(kind, n, &mut rng, cond_max)
}

/// Generator for the `index`-th body of a run seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
