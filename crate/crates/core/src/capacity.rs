//! Ball capacities, certified bounds on `C_{p,tau}(K)` and the radial profile problem.

use serde::Serialize;

use crate::affine::{phi, PhiValue};
use crate::bodies::Body;
use crate::error::{Error, Result};
use crate::special::{a_const, capacity_factor, check_tau, sphere_area, unit_ball_volume, Params};
use crate::sphere::SphereRule;
use crate::verify::TolerancePolicy;

fn check_capacity_range(n: usize, p: f64) -> Result<()> {
    if !(p >= 1.0 && p < n as f64) {
        return Err(Error::domain(format!(
            "capacity bounds need 1 <= p < n (p = {p}, n = {n}); the p-capacity of a bounded set vanishes for p >= n"
        )));
    }
    Ok(())
}

/// `C_p(r B_n) = r^(n-p) n omega_n ((n-p)/(p-1))^(p-1)`, with `r^(n-1) n omega_n` at `p = 1`.
pub fn cp_ball(n: usize, p: f64, r: f64) -> Result<f64> {
    check_capacity_range(n, p)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("radius {r} must be positive")));
    }
    Ok(r.powf(n as f64 - p) * sphere_area(n)? * capacity_factor(n, p)?)
}

/// Ball capacity that also covers `p >= n`, where it is 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallCapacity {
    pub value: f64,
    /// Set when `p >= n` and the value is the explicit zero.
    pub vanishes: bool,
}

/// [`cp_ball`] extended by the explicit zero for `p >= n`.
pub fn cp_ball_or_zero(n: usize, p: f64, r: f64) -> Result<BallCapacity> {
    if p >= n as f64 && p.is_finite() && r > 0.0 {
        return Ok(BallCapacity {
            value: 0.0,
            vanishes: true,
        });
    }
    Ok(BallCapacity {
        value: cp_ball(n, p, r)?,
        vanishes: false,
    })
}

/// `C_{p,tau}(r B_n) = A(n,p) C_p(r B_n)`; independent of `tau`.
pub fn cptau_ball(n: usize, p: f64, tau: f64, r: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(a_const(n, p)? * cp_ball(n, p, r)?)
}

fn body_volume(body: &Body, rule: &SphereRule) -> Result<f64> {
    match body {
        Body::Star(_) => body.volume_with(rule),
        _ => body.volume(),
    }
}

/// `C_{p,tau}(B_n) (V(K)/omega_n)^((n-p)/n)`; `rule` is used only for star-body volumes.
pub fn cap_lower(body: &Body, p: f64, tau: f64, rule: &SphereRule) -> Result<f64> {
    let n = body.dim();
    let ball = cptau_ball(n, p, tau, 1.0)?;
    let v = body_volume(body, rule)?;
    Ok(ball * (v / unit_ball_volume(n)?).powf((n as f64 - p) / n as f64))
}

/// `((n-p)/(p-1))^(p-1) Phi_{p,tau}(K)`, factor 1 at `p = 1`.
pub fn cap_upper_phi(body: &Body, p: f64, tau: f64, rule: &SphereRule) -> Result<f64> {
    let n = body.dim();
    check_capacity_range(n, p)?;
    Ok(capacity_factor(n, p)? * phi(body, p, tau, rule)?.value)
}

/// `A(n,p) ((n-p)/(p-1))^(p-1) S_p(K)`.
pub fn cap_upper_var(body: &Body, p: f64, tau: f64, rule: &SphereRule) -> Result<f64> {
    let n = body.dim();
    check_capacity_range(n, p)?;
    check_tau(tau)?;
    let sp = match body {
        Body::Ellipsoid(_) | Body::Star(_) => body.sp_surface_area_with(p, rule)?,
        _ => body.sp_surface_area(p)?,
    };
    Ok(a_const(n, p)? * capacity_factor(n, p)? * sp)
}

/// The interval `[lower, min(upper_phi, upper_var)]` containing `C_{p,tau}(K)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapBounds {
    pub body_id: String,
    pub params: Params,
    pub lower: f64,
    pub upper_phi: f64,
    pub upper_var: f64,
    /// `"upper_phi"` or `"upper_var"`.
    pub tighter: &'static str,
    /// At `p = 1` the Phi bound is the capacity itself.
    pub upper_phi_is_exact: bool,
    /// `lower` and `upper_phi` agree within tolerance (the ellipsoid equality case).
    pub pinched: bool,
    pub tolerance: f64,
    /// No sphere rule entered any of the three values.
    pub exact: bool,
}

impl CapBounds {
    pub fn width(&self) -> f64 {
        self.upper_phi.min(self.upper_var) - self.lower
    }
}

/// All three bounds with the default tolerance policy.
pub fn cap_bounds(body: &Body, p: f64, tau: f64, rule: &SphereRule) -> Result<CapBounds> {
    cap_bounds_with(body, "body", p, tau, rule, &TolerancePolicy::default())
}

/// All three bounds; fails with the full term list when `lower` exceeds an upper bound.
pub fn cap_bounds_with(
    body: &Body,
    body_id: &str,
    p: f64,
    tau: f64,
    rule: &SphereRule,
    policy: &TolerancePolicy,
) -> Result<CapBounds> {
    let n = body.dim();
    check_capacity_range(n, p)?;
    check_tau(tau)?;
    let lower = cap_lower(body, p, tau, rule)?;
    let factor = capacity_factor(n, p)?;
    let phi: PhiValue = phi(body, p, tau, rule)?;
    let upper_phi = factor * phi.value;
    let upper_var = cap_upper_var(body, p, tau, rule)?;
    let volume_exact = body.has_exact_volume();
    let exact = phi.exact && volume_exact && body.has_exact_surface_data();
    let scale = lower.abs().max(upper_phi.abs()).max(upper_var.abs());
    let tolerance = policy.tolerance(exact, rule.error_estimate(), scale);
    let terms = vec![
        ("lower".to_string(), lower),
        ("upper_phi".to_string(), upper_phi),
        ("upper_var".to_string(), upper_var),
    ];
    for (link, rhs) in [
        ("lower <= upper_phi", upper_phi),
        ("lower <= upper_var", upper_var),
    ] {
        if lower > rhs + tolerance {
            return Err(Error::InequalityViolation {
                link: link.to_string(),
                lhs: lower,
                rhs,
                tolerance,
                terms,
            });
        }
    }
    Ok(CapBounds {
        body_id: body_id.to_string(),
        params: Params::new(n, p, tau),
        lower,
        upper_phi,
        upper_var,
        tighter: if upper_phi <= upper_var {
            "upper_phi"
        } else {
            "upper_var"
        },
        upper_phi_is_exact: p == 1.0,
        pinched: (upper_phi - lower).abs() <= tolerance,
        tolerance,
        exact,
    })
}

/// Radial profile `g` on an increasing grid starting at `s = 1` with `g(1) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile {
    s: Vec<f64>,
    g: Vec<f64>,
}

impl Profile {
    /// Checks grid, boundary value `g(1) = 1` and monotonicity.
    pub fn new(s: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if s.len() < 2 || s.len() != g.len() {
            return Err(Error::domain(
                "profile needs at least two grid points and one value per point",
            ));
        }
        if s.iter().chain(&g).any(|x| !x.is_finite()) {
            return Err(Error::domain("profile data must be finite"));
        }
        if (s[0] - 1.0).abs() > 1e-12 || (g[0] - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "profile must start at s = 1 with g = 1 (got s = {}, g = {})",
                s[0], g[0]
            )));
        }
        if let Some(i) = s.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::domain(format!(
                "profile grid is not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = g.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::domain(format!(
                "profile is not nonincreasing at index {}",
                i + 1
            )));
        }
        Ok(Self { s, g })
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    pub fn s_max(&self) -> f64 {
        self.s[self.s.len() - 1]
    }

    /// Piecewise-linear interpolation; `None` outside the grid.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if !(x >= self.s[0] && x <= self.s_max()) {
            return None;
        }
        let k = self
            .s
            .partition_point(|&t| t <= x)
            .clamp(1, self.s.len() - 1);
        let (s0, s1, g0, g1) = (self.s[k - 1], self.s[k], self.g[k - 1], self.g[k]);
        Some(g0 + (g1 - g0) * (x - s0) / (s1 - s0))
    }
}

/// `J(g) = sum |dg/ds|^p s_mid^(n-1) ds` over the grid (composite midpoint rule).
pub fn profile_energy(g: &Profile, n: usize, p: f64) -> Result<f64> {
    crate::special::check_exponent(p)?;
    let mut sum = crate::sphere::CompensatedSum::default();
    for i in 0..g.s.len() - 1 {
        let ds = g.s[i + 1] - g.s[i];
        let slope = (g.g[i] - g.g[i + 1]) / ds;
        let mid = 0.5 * (g.s[i] + g.s[i + 1]);
        sum.add(slope.powf(p) * mid.powi(n as i32 - 1) * ds);
    }
    Ok(sum.value())
}

/// Result of [`profile_optimize`].
#[derive(Clone, Debug, Serialize)]
pub struct ProfileOptimum {
    /// Energy of the tail-corrected profile; estimates `((n-p)/(p-1))^(p-1)`.
    pub j_star: f64,
    /// Minimal discrete energy with `g(s_max) = 0` pinned.
    pub j_truncated: f64,
    /// Analytic energy of `s^((p-n)/(p-1))` on `[s_max, inf)`.
    pub tail: f64,
    /// `s_max^((p-n)/(p-1))`: the value the extremal profile keeps at `s_max`.
    pub lift: f64,
    /// Relative KKT residual of the discrete minimizer.
    pub residual: f64,
    /// Minimizer lifted to `c + (1 - c) g`, matching the untruncated extremal on the grid.
    pub profile: Profile,
    /// Minimizer with `g(s_max) = 0`.
    pub pinned: Profile,
}

/// Largest accepted relative KKT residual.
pub const KKT_TOL: f64 = 1e-10;

/// Minimizes the discrete energy over nonincreasing profiles with `g(1) = 1`,
/// `g(s_max) = 0` on a log-spaced grid of `m` points, then adds the analytic
/// tail of the extremal profile beyond `s_max`.
///
/// In the increments `d_i = g_i - g_{i+1} >= 0` with `sum d_i = 1` the energy
/// is `sum c_i d_i^p`, `c_i = s_mid^(n-1) ds^(1-p)`: separable and strictly
/// convex, so the stationarity condition `p c_i d_i^(p-1) = lambda` fixes the
/// minimizer. The residual of that condition is checked before returning.
pub fn profile_optimize(n: usize, p: f64, m: usize, s_max: f64) -> Result<ProfileOptimum> {
    if !(p > 1.0 && p < n as f64) {
        return Err(Error::domain(format!(
            "profile optimization needs 1 < p < n (p = {p}, n = {n})"
        )));
    }
    if m < 100 {
        return Err(Error::domain(format!(
            "grid size m = {m} must be at least 100"
        )));
    }
    if !(s_max >= 10.0 && s_max.is_finite()) {
        return Err(Error::domain(format!(
            "s_max = {s_max} must be at least 10"
        )));
    }
    let log_max = s_max.ln();
    let s: Vec<f64> = (0..m)
        .map(|i| {
            if i + 1 == m {
                s_max
            } else {
                (log_max * i as f64 / (m - 1) as f64).exp()
            }
        })
        .collect();
    let nf = n as f64;
    let c: Vec<f64> = s
        .windows(2)
        .map(|w| (0.5 * (w[0] + w[1])).powf(nf - 1.0) * (w[1] - w[0]).powf(1.0 - p))
        .collect();
    // d_i proportional to c_i^(-1/(p-1)); work in logs to stay in range
    let logs: Vec<f64> = c.iter().map(|ci| -ci.ln() / (p - 1.0)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    let d: Vec<f64> = raw.iter().map(|x| x / total).collect();

    let grads: Vec<f64> = c
        .iter()
        .zip(&d)
        .map(|(ci, di)| p * ci * di.powf(p - 1.0))
        .collect();
    let lambda = grads.iter().sum::<f64>() / grads.len() as f64;
    let residual = grads.iter().map(|g| (g - lambda).abs()).fold(0.0, f64::max) / lambda;
    if !(residual <= KKT_TOL) {
        return Err(Error::Convergence {
            message: format!("stationarity not reached for n = {n}, p = {p}, m = {m}"),
            residual,
        });
    }

    let mut g = Vec::with_capacity(m);
    let mut level = 1.0;
    g.push(level);
    for (i, di) in d.iter().enumerate() {
        level -= di;
        g.push(if i + 2 == m { 0.0 } else { level.max(0.0) });
    }
    let pinned = Profile::new(s.clone(), g)?;
    let j_truncated = profile_energy(&pinned, n, p)?;

    let exponent = (p - nf) / (p - 1.0);
    let lift = s_max.powf(exponent);
    let j_inf = capacity_factor(n, p)?;
    let tail = j_inf * lift;
    let j_star = (1.0 - lift).powf(p) * j_truncated + tail;
    let lifted: Vec<f64> = pinned
        .values()
        .iter()
        .map(|v| lift + (1.0 - lift) * v)
        .collect();
    let profile = Profile::new(s, lifted)?;
    Ok(ProfileOptimum {
        j_star,
        j_truncated,
        tail,
        lift,
        residual,
        profile,
        pinned,
    })
}
