//! Gauss–Legendre rules and adaptive panel integration on intervals.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of a Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `k`-point rule by Newton iteration on `P_k`.
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; k];
        let mut weights = vec![0.0; k];
        let kf = k as f64;
        for i in 0..k.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(k, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(k, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[k - 1 - i] = x;
            weights[i] = w;
            weights[k - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let kf = k as f64;
    let d = kf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 10-point rule used by the adaptive integrators.
pub fn gl10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

/// Shared 20-point rule.
pub fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

const MAX_DEPTH: usize = 60;

/// Adaptive bisection with 10-point Gauss–Legendre panels to absolute tolerance `tol`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = gl10();
    let whole = rule.integrate(a, b, &mut f);
    let total = recurse(&mut f, rule, a, b, whole, tol, (b - a).abs(), 0)?;
    if !total.is_finite() {
        return Err(Error::Integration(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: FnMut(f64) -> f64>(
    f: &mut F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    span: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, &mut *f);
    let right = rule.integrate(m, b, &mut *f);
    let refined = left + right;
    let local_tol = (tol * (b - a).abs() / span).max(f64::EPSILON * refined.abs());
    if (refined - whole).abs() <= local_tol {
        return Ok(refined);
    }
    if !refined.is_finite() {
        return Err(Error::Integration(format!(
            "non-finite panel value on [{a}, {b}]"
        )));
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Integration(format!(
            "panel [{a}, {b}] did not converge (difference {:e})",
            (refined - whole).abs()
        )));
    }
    Ok(recurse(f, rule, a, m, left, tol, span, depth + 1)?
        + recurse(f, rule, m, b, right, tol, span, depth + 1)?)
}

/// Adaptive integration over consecutive breakpoints, each sub-interval treated separately.
pub fn adaptive_piecewise<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: f64) -> Result<f64> {
    let span = breaks.last().copied().unwrap_or(0.0) - breaks.first().copied().unwrap_or(0.0);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let share = if span > 0.0 {
            tol * (w[1] - w[0]) / span
        } else {
            tol
        };
        total += adaptive(&mut f, w[0], w[1], share)?;
    }
    Ok(total)
}
