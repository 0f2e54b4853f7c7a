//! Gamma/Beta, unit-ball volumes, the zonal constant `A(n, p)` and the
//! asymmetric weight `phi_tau`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Dimension, exponent and asymmetry parameter of a computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub p: f64,
    pub tau: f64,
}

impl Params {
    pub fn new(n: usize, p: f64, tau: f64) -> Self {
        Self { n, p, tau }
    }

    /// Checks the ranges valid for projection bodies and `Phi`: `n >= 2`, `p >= 1`, `|tau| <= 1`.
    pub fn check_projection(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain(format!(
                "dimension n = {} must be at least 2",
                self.n
            )));
        }
        check_exponent(self.p)?;
        check_tau(self.tau)
    }

    /// Capacity operations additionally need `p < n`.
    pub fn check_capacity(&self) -> Result<()> {
        self.check_projection()?;
        if self.p >= self.n as f64 {
            return Err(Error::domain(format!(
                "capacity requires p < n (p = {}, n = {})",
                self.p, self.n
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::domain(format!(
            "exponent p = {p} must be a finite value >= 1"
        )));
    }
    Ok(())
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::domain(format!("tau = {tau} outside [-1, 1]")));
    }
    Ok(())
}

fn lanczos_sum(z: f64) -> f64 {
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    acc
}

/// Gamma function for positive real arguments.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("gamma requires x > 0, got {x}")));
    }
    if x == x.floor() && x <= 171.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return Ok(f);
    }
    if 2.0 * x == (2.0 * x).floor() && x <= 171.0 {
        // Gamma(k + 1/2) by upward recurrence from sqrt(pi)
        let mut g = PI.sqrt();
        let mut k = 0.5;
        while k < x {
            g *= k;
            k += 1.0;
        }
        return Ok(g);
    }
    if x < 0.5 {
        // reflection
        return Ok(PI / ((PI * x).sin() * gamma(1.0 - x)?));
    }
    if x > 140.0 {
        return Ok(ln_gamma(x)?.exp());
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok((2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z))
}

/// Natural logarithm of the Gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok((PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// Beta function `B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y)`.
pub fn beta(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain(format!(
            "beta requires positive arguments, got ({x}, {y})"
        )));
    }
    if x + y < 140.0 {
        Ok(gamma(x)? * gamma(y)? / gamma(x + y)?)
    } else {
        Ok((ln_gamma(x)? + ln_gamma(y)? - ln_gamma(x + y)?).exp())
    }
}

/// Volume of the Euclidean unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain("unit ball volume needs n >= 1"));
    }
    let half = n as f64 / 2.0;
    Ok(PI.powf(half) / gamma(1.0 + half)?)
}

/// Surface area `n * omega_n` of the unit sphere `S^{n-1}`.
pub fn sphere_area(n: usize) -> Result<f64> {
    Ok(n as f64 * unit_ball_volume(n)?)
}

/// Normalizing factor `(n-1) omega_{n-1} / (n omega_n)` of the zonal reduction.
pub fn zonal_factor(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!(
            "zonal reduction needs n >= 2, got {n}"
        )));
    }
    Ok((n - 1) as f64 * unit_ball_volume(n - 1)? / (n as f64 * unit_ball_volume(n)?))
}

/// The constant `A(n, p)`: the normalized spherical mean of `phi_tau(u . v)^p`,
/// which does not depend on `tau` or `v`.
pub fn a_const(n: usize, p: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("A(n, p) needs n >= 2, got {n}")));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::domain(format!("A(n, p) needs p > 0, got {p}")));
    }
    Ok(zonal_factor(n)? / 2.0 * beta((p + 1.0) / 2.0, (n as f64 - 1.0) / 2.0)?)
}

/// The factor `((n - p) / (p - 1))^(p - 1)`, continuous at `p = 1` with value 1.
pub fn capacity_factor(n: usize, p: f64) -> Result<f64> {
    let nf = n as f64;
    if !(p >= 1.0 && p < nf) {
        return Err(Error::domain(format!(
            "capacity factor needs 1 <= p < n (p = {p}, n = {n})"
        )));
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    Ok(((nf - p) / (p - 1.0)).powf(p - 1.0))
}

/// Asymmetric weight `((1+tau)/2)^(1/p) t_+ + ((1-tau)/2)^(1/p) t_-`.
#[inline]
pub fn phi_tau(t: f64, p: f64, tau: f64) -> f64 {
    if t >= 0.0 {
        ((1.0 + tau) / 2.0).powf(1.0 / p) * t
    } else {
        ((1.0 - tau) / 2.0).powf(1.0 / p) * (-t)
    }
}

/// `phi_tau(t)^p` without the root/power round trip.
#[inline]
pub fn phi_tau_pow(t: f64, p: f64, tau: f64) -> f64 {
    if t >= 0.0 {
        (1.0 + tau) / 2.0 * t.powf(p)
    } else {
        (1.0 - tau) / 2.0 * (-t).powf(p)
    }
}

/// Converts the `psi_eta(t) = |t| + eta t` parametrization to `tau`.
///
/// Returns `(tau, scale)` with `psi_eta^p = scale * phi_tau^p`.
pub fn eta_to_tau(eta: f64, p: f64) -> Result<(f64, f64)> {
    if !(-1.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("eta = {eta} outside [-1, 1]")));
    }
    check_exponent(p)?;
    let plus = (1.0 + eta).powf(p);
    let minus = (1.0 - eta).powf(p);
    let scale = plus + minus;
    Ok(((plus - minus) / scale, scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_small_values() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert_eq!(gamma(5.0).unwrap(), 24.0);
        assert!((gamma(0.5).unwrap() - PI.sqrt()).abs() < 1e-15);
        assert!(gamma(0.0).is_err());
        assert!(gamma(-2.5).is_err());
    }

    #[test]
    fn beta_values() {
        assert!((beta(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((beta(1.5, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((beta(0.5, 0.5).unwrap() - PI).abs() < 1e-14);
        assert!(beta(0.0, 1.0).is_err());
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1).unwrap() - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2).unwrap() - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!(unit_ball_volume(0).is_err());
    }

    #[test]
    fn a_constant_closed_forms() {
        assert!((a_const(3, 2.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((a_const(2, 1.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((a_const(3, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(a_const(1, 2.0).is_err());
        assert!(a_const(3, 0.0).is_err());
    }

    #[test]
    fn phi_tau_special_cases() {
        assert_eq!(phi_tau(-3.0, 2.0, 1.0), 0.0);
        assert!((phi_tau(5.0, 2.0, 0.0) - 5.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(phi_tau(-2.0, 1.0, -1.0), 2.0);
    }

    #[test]
    fn eta_conversion() {
        assert_eq!(eta_to_tau(0.0, 3.0).unwrap(), (0.0, 2.0));
        assert_eq!(eta_to_tau(1.0, 2.0).unwrap(), (1.0, 4.0));
        let (tau, scale) = eta_to_tau(0.5, 1.0).unwrap();
        assert!((tau - 0.5).abs() < 1e-15 && (scale - 2.0).abs() < 1e-15);
        assert!(eta_to_tau(1.5, 2.0).is_err());
    }

    #[test]
    fn eta_scale_reproduces_psi() {
        for &(eta, p) in &[(0.3, 1.7), (-0.8, 2.0), (0.95, 1.0)] {
            let (tau, scale) = eta_to_tau(eta, p).unwrap();
            for &t in &[-2.0, -0.3, 0.7, 4.0] {
                let psi = (f64::abs(t) + eta * t).powf(p);
                assert!((psi - scale * phi_tau_pow(t, p, tau)).abs() < 1e-12 * psi.max(1.0));
            }
        }
    }

    #[test]
    fn capacity_factor_branches() {
        assert_eq!(capacity_factor(3, 1.0).unwrap(), 1.0);
        assert!((capacity_factor(3, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((capacity_factor(4, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((capacity_factor(3, 1.5).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!(capacity_factor(3, 3.0).is_err());
    }

    #[test]
    fn params_ranges() {
        assert!(Params::new(3, 2.0, 0.5).check_capacity().is_ok());
        assert!(Params::new(3, 3.0, 0.5).check_capacity().is_err());
        assert!(Params::new(3, 3.0, 0.5).check_projection().is_ok());
        assert!(Params::new(1, 1.0, 0.0).check_projection().is_err());
        assert!(Params::new(3, 0.5, 0.0).check_projection().is_err());
        assert!(Params::new(3, 2.0, 1.1).check_projection().is_err());
    }
}
