//! Adaptive integration of piecewise-smooth functions on `S^1` and `S^2`.
//!
//! The sphere is cut along a set of great circles (the kink sets of the
//! integrand), and every cell is integrated with a tensor Gauss rule behind a
//! polynomial endpoint transform, refined until parent and children agree.
//! The transform flattens `|t|^p`-type behaviour along cell edges.
//! Only the upper half of the cells is visited: callers pass the even part
//! `g(x) = f(x) + f(-x)`, which keeps results exactly symmetric under `x -> -x`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad1d::GaussLegendre;

/// Default relative tolerance for cell refinement.
pub const DEFAULT_REL_TOL: f64 = 1e-11;
const MAX_DEPTH: u32 = 18;
const ORDER: usize = 16;
/// Parent and children agreeing to this relative level are accepted regardless of size.
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;
/// Vertex rounding moves a triangle's area by about `eps / altitude` relative.
const SHAPE_ROUNDOFF: f64 = 16.0 * f64::EPSILON;
/// Signed distances below this count as lying on a cut circle.
const ON_CIRCLE: f64 = 1e-14;

type V3 = [f64; 3];

struct Rule01 {
    /// transformed nodes in `[0, 1]` and weights including the transform's derivative
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Legendre on `[0, 1]` composed with `x = 10 xi^3 - 15 xi^4 + 6 xi^5`.
fn rule01() -> &'static Rule01 {
    static RULE: OnceLock<Rule01> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = GaussLegendre::new(ORDER);
        let mut nodes = Vec::with_capacity(ORDER);
        let mut weights = Vec::with_capacity(ORDER);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let xi = 0.5 * (x + 1.0);
            nodes.push(xi * xi * xi * (10.0 - 15.0 * xi + 6.0 * xi * xi));
            weights.push(0.5 * w * 30.0 * (xi * (1.0 - xi)).powi(2));
        }
        Rule01 { nodes, weights }
    })
}

fn dot3(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn det3(a: &V3, b: &V3, c: &V3) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn sub3(a: &V3, b: &V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `det(a, b, c)` from edge differences, accurate for small triangles.
fn det_edges(t: &[V3; 3]) -> f64 {
    det3(&t[0], &sub3(&t[1], &t[0]), &sub3(&t[2], &t[0]))
}

/// Relative level below which parent and children cannot be told apart in floating point.
fn roundoff_floor(t: &[V3; 3]) -> f64 {
    let edge = |p: &V3, q: &V3| {
        let d = sub3(p, q);
        dot3(&d, &d).sqrt()
    };
    let longest = edge(&t[0], &t[1])
        .max(edge(&t[1], &t[2]))
        .max(edge(&t[2], &t[0]));
    let altitude = det_edges(t).abs() / longest;
    ROUNDOFF + SHAPE_ROUNDOFF / altitude
}

fn unit3(x: V3) -> V3 {
    let r = dot3(&x, &x).sqrt();
    [x[0] / r, x[1] / r, x[2] / r]
}

/// Distinct great circles `{x : nu . x = 0}`, with `nu` and `-nu` identified.
fn distinct_circles(normals: &[V3]) -> Vec<V3> {
    let mut out: Vec<V3> = Vec::new();
    for nu in normals {
        let nu = unit3(*nu);
        let dup = out.iter().any(|c| {
            let cr = [
                c[1] * nu[2] - c[2] * nu[1],
                c[2] * nu[0] - c[0] * nu[2],
                c[0] * nu[1] - c[1] * nu[0],
            ];
            dot3(&cr, &cr).sqrt() < 1e-13
        });
        if !dup {
            out.push(nu);
        }
    }
    out
}

/// Splits a convex spherical polygon by the circle with normal `nu`.
fn split(poly: &[V3], nu: &V3) -> (Vec<V3>, Vec<V3>) {
    let s: Vec<f64> = poly
        .iter()
        .map(|v| {
            let d = dot3(nu, v);
            if d.abs() <= ON_CIRCLE {
                0.0
            } else {
                d
            }
        })
        .collect();
    if s.iter().all(|&x| x >= 0.0) {
        return (poly.to_vec(), Vec::new());
    }
    if s.iter().all(|&x| x <= 0.0) {
        return (Vec::new(), poly.to_vec());
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let k = poly.len();
    for i in 0..k {
        let j = (i + 1) % k;
        if s[i] >= 0.0 {
            pos.push(poly[i]);
        }
        if s[i] <= 0.0 {
            neg.push(poly[i]);
        }
        if s[i] * s[j] < 0.0 {
            let (a, b) = (&poly[i], &poly[j]);
            let t = s[i] / (s[i] - s[j]);
            let x = unit3([
                a[0] + t * (b[0] - a[0]),
                a[1] + t * (b[1] - a[1]),
                a[2] + t * (b[2] - a[2]),
            ]);
            pos.push(x);
            neg.push(x);
        }
    }
    (pos, neg)
}

/// Spherical triangles covering the upper hemisphere, none crossing a circle.
fn upper_cells(normals: &[V3]) -> Vec<[V3; 3]> {
    let e = |i: usize, s: f64| {
        let mut v = [0.0; 3];
        v[i] = s;
        v
    };
    let top = e(2, 1.0);
    let mut polys: Vec<Vec<V3>> = vec![
        vec![e(0, 1.0), e(1, 1.0), top],
        vec![e(1, 1.0), e(0, -1.0), top],
        vec![e(0, -1.0), e(1, -1.0), top],
        vec![e(1, -1.0), e(0, 1.0), top],
    ];
    for nu in distinct_circles(normals) {
        let mut next = Vec::with_capacity(polys.len() * 2);
        for p in &polys {
            let (a, b) = split(p, &nu);
            for q in [a, b] {
                if q.len() >= 3 {
                    next.push(q);
                }
            }
        }
        polys = next;
    }
    let mut tris = Vec::new();
    for p in polys {
        for i in 1..p.len() - 1 {
            let t = [p[0], p[i], p[i + 1]];
            if det_edges(&t).abs() > 1e-300 {
                tris.push(t);
            }
        }
    }
    tris
}

/// Integral over a spherical triangle of each component of `g`, plus its area.
fn triangle_rule<G>(t: &[V3; 3], dim: usize, g: &G, buf: &mut [f64], acc: &mut [f64]) -> f64
where
    G: Fn(&V3, &mut [f64]),
{
    let r = rule01();
    let [a, b, c] = t;
    let jac0 = det_edges(t).abs();
    let (ab, ac) = (sub3(b, a), sub3(c, a));
    acc[..dim].iter_mut().for_each(|x| *x = 0.0);
    let mut area = 0.0;
    for (s, ws) in r.nodes.iter().zip(&r.weights) {
        for (q, wq) in r.nodes.iter().zip(&r.weights) {
            let (u, v) = (s * (1.0 - q), s * q);
            let x = [
                a[0] + u * ab[0] + v * ac[0],
                a[1] + u * ab[1] + v * ac[1],
                a[2] + u * ab[2] + v * ac[2],
            ];
            let r2 = dot3(&x, &x);
            let w = ws * wq * s * jac0 / (r2 * r2.sqrt());
            let xn = [x[0] / r2.sqrt(), x[1] / r2.sqrt(), x[2] / r2.sqrt()];
            g(&xn, buf);
            for k in 0..dim {
                acc[k] += w * buf[k];
            }
            area += w;
        }
    }
    area
}

fn children(t: &[V3; 3]) -> [[V3; 3]; 4] {
    let mid = |p: &V3, q: &V3| unit3([p[0] + q[0], p[1] + q[1], p[2] + q[2]]);
    let [a, b, c] = *t;
    let (ab, bc, ca) = (mid(&a, &b), mid(&b, &c), mid(&c, &a));
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

struct Refiner<'a, G> {
    g: &'a G,
    dim: usize,
    /// absolute tolerance per unit area, one per component
    density_tol: Vec<f64>,
}

impl<G: Fn(&V3, &mut [f64])> Refiner<'_, G> {
    fn refine(
        &self,
        t: &[V3; 3],
        whole: &[f64],
        area: f64,
        depth: u32,
        out: &mut [f64],
    ) -> Result<()> {
        let dim = self.dim;
        let mut buf = vec![0.0; dim];
        let kids = children(t);
        let mut parts = vec![vec![0.0; dim]; 4];
        let mut areas = [0.0; 4];
        for (i, kid) in kids.iter().enumerate() {
            areas[i] = triangle_rule(kid, dim, self.g, &mut buf, &mut parts[i]);
        }
        let floor = roundoff_floor(t);
        let ok = (0..dim).all(|k| {
            let sum: f64 = parts.iter().map(|p| p[k]).sum();
            (sum - whole[k]).abs() <= (self.density_tol[k] * area).max(floor * sum.abs())
        });
        if ok {
            for p in &parts {
                for k in 0..dim {
                    out[k] += p[k];
                }
            }
            return Ok(());
        }
        if depth >= MAX_DEPTH {
            return Err(Error::Integration(format!(
                "cell refinement exceeded depth {MAX_DEPTH} near {:?}",
                t[0]
            )));
        }
        for (i, kid) in kids.iter().enumerate() {
            self.refine(kid, &parts[i], areas[i], depth + 1, out)?;
        }
        Ok(())
    }
}

/// `(1 / 4 pi) int_{upper cells} g`, i.e. the normalized spherical mean of `f`
/// when `g(x) = f(x) + f(-x)` and `f` is smooth off the circles `nu . x = 0`.
pub fn sphere_mean_s2<G>(normals: &[V3], dim: usize, g: G, rel_tol: f64) -> Result<Vec<f64>>
where
    G: Fn(&V3, &mut [f64]) + Sync,
{
    let cells = upper_cells(normals);
    let coarse: Vec<(Vec<f64>, f64)> = cells
        .par_iter()
        .map(|t| {
            let mut buf = vec![0.0; dim];
            let mut acc = vec![0.0; dim];
            let area = triangle_rule(t, dim, &g, &mut buf, &mut acc);
            (acc, area)
        })
        .collect();
    let total_area: f64 = coarse.iter().map(|c| c.1).sum();
    let density_tol: Vec<f64> = (0..dim)
        .map(|k| {
            let scale: f64 = coarse.iter().map(|c| c.0[k].abs()).sum::<f64>() / total_area;
            rel_tol * scale.max(f64::MIN_POSITIVE)
        })
        .collect();
    let refiner = Refiner {
        g: &g,
        dim,
        density_tol,
    };
    let parts: Vec<Result<Vec<f64>>> = cells
        .par_iter()
        .zip(coarse.par_iter())
        .map(|(t, (whole, area))| {
            let mut out = vec![0.0; dim];
            refiner.refine(t, whole, *area, 0, &mut out)?;
            Ok(out)
        })
        .collect();
    let mut total = vec![0.0; dim];
    for p in parts {
        for (acc, x) in total.iter_mut().zip(p?) {
            *acc += x;
        }
    }
    Ok(total.into_iter().map(|x| x / (4.0 * PI)).collect())
}

fn arc_rule<G>(a: f64, b: f64, dim: usize, g: &G, buf: &mut [f64], acc: &mut [f64])
where
    G: Fn(&[f64; 2], &mut [f64]),
{
    let r = rule01();
    acc[..dim].iter_mut().for_each(|x| *x = 0.0);
    for (s, w) in r.nodes.iter().zip(&r.weights) {
        let t = a + (b - a) * s;
        g(&[t.cos(), t.sin()], buf);
        for k in 0..dim {
            acc[k] += (b - a) * w * buf[k];
        }
    }
}

fn refine_arc<G>(
    a: f64,
    b: f64,
    whole: &[f64],
    density_tol: &[f64],
    depth: u32,
    g: &G,
    out: &mut [f64],
) -> Result<()>
where
    G: Fn(&[f64; 2], &mut [f64]),
{
    let dim = whole.len();
    let m = 0.5 * (a + b);
    let mut buf = vec![0.0; dim];
    let mut left = vec![0.0; dim];
    let mut right = vec![0.0; dim];
    arc_rule(a, m, dim, g, &mut buf, &mut left);
    arc_rule(m, b, dim, g, &mut buf, &mut right);
    if (0..dim).all(|k| {
        let sum = left[k] + right[k];
        (sum - whole[k]).abs() <= (density_tol[k] * (b - a)).max(ROUNDOFF * sum.abs())
    }) {
        for k in 0..dim {
            out[k] += left[k] + right[k];
        }
        return Ok(());
    }
    if depth >= 2 * MAX_DEPTH {
        return Err(Error::Integration(format!(
            "arc refinement exceeded depth near angle {a}"
        )));
    }
    refine_arc(a, m, &left, density_tol, depth + 1, g, out)?;
    refine_arc(m, b, &right, density_tol, depth + 1, g, out)
}

/// `(1 / 2 pi) int_0^pi g(cos t, sin t) dt`: the mean of `f` over `S^1` when
/// `g(x) = f(x) + f(-x)` and `f` is smooth off the points `nu . x = 0`.
pub fn sphere_mean_s1<G>(normals: &[[f64; 2]], dim: usize, g: G, rel_tol: f64) -> Result<Vec<f64>>
where
    G: Fn(&[f64; 2], &mut [f64]),
{
    let mut breaks = vec![0.0, PI];
    for nu in normals {
        // nu . x = 0 at angle(nu) +- pi/2; reduce to [0, pi)
        let t = (nu[1].atan2(nu[0]) + 0.5 * PI).rem_euclid(PI);
        breaks.push(t);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut buf = vec![0.0; dim];
    let arcs: Vec<(f64, f64)> = breaks
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|(a, b)| b > a)
        .collect();
    let coarse: Vec<Vec<f64>> = arcs
        .iter()
        .map(|&(a, b)| {
            let mut acc = vec![0.0; dim];
            arc_rule(a, b, dim, &g, &mut buf, &mut acc);
            acc
        })
        .collect();
    let density_tol: Vec<f64> = (0..dim)
        .map(|k| {
            let scale = coarse.iter().map(|c| c[k].abs()).sum::<f64>() / PI;
            rel_tol * scale.max(f64::MIN_POSITIVE)
        })
        .collect();
    let mut total = vec![0.0; dim];
    for (&(a, b), whole) in arcs.iter().zip(&coarse) {
        refine_arc(a, b, whole, &density_tol, 0, &g, &mut total)?;
    }
    Ok(total.into_iter().map(|x| x / (2.0 * PI)).collect())
}
