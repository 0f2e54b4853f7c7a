//! Integration on `S^{n-1}` against the normalized measure `du`.
//!
//! Three node families are available: equispaced circle nodes (`n = 2`),
//! the Fibonacci spiral (`n = 3`) and antithetic Monte Carlo (any `n`).
//! Every rule has equal weights summing to one. A rule's `error_estimate`
//! is filled in by [`calibrate_rule`] from the defect on a small family of
//! zonal test functions whose exact integrals come from [`zonal_integral`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad1d;
use crate::special::{self, phi_tau_pow};

/// Seed used by the default Monte Carlo rule in dimensions four and up.
pub const DEFAULT_MC_SEED: u64 = 0x5eed_cafe;

/// Default node budgets per dimension.
pub const DEFAULT_CIRCLE_SIZE: usize = 128;
pub const DEFAULT_FIBONACCI_SIZE: usize = 10_000;
pub const DEFAULT_MC_SIZE: usize = 1_000_000;
/// Monte Carlo budget for sampled bodies, whose `Phi` costs `size^2`.
pub const SAMPLED_MC_SIZE: usize = 4000;

/// Number of pole directions the calibration family is evaluated at.
const CALIBRATION_POLES: usize = 8;
const CALIBRATION_SEED: u64 = 0xca11_b4a7e;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Circle,
    Fibonacci,
    MonteCarlo,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::Circle => "circle",
            RuleKind::Fibonacci => "fibonacci",
            RuleKind::MonteCarlo => "monte-carlo",
        })
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(RuleKind::Circle),
            "fibonacci" | "fib" => Ok(RuleKind::Fibonacci),
            "monte-carlo" | "mc" => Ok(RuleKind::MonteCarlo),
            other => Err(Error::domain(format!("unknown rule kind '{other}'"))),
        }
    }
}

/// A rule request of the form `kind:size`, as given on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub kind: RuleKind,
    pub size: usize,
}

impl RuleSpec {
    /// Default budget for dimension `n`.
    pub fn default_for(n: usize) -> Self {
        match n {
            2 => RuleSpec {
                kind: RuleKind::Circle,
                size: DEFAULT_CIRCLE_SIZE,
            },
            3 => RuleSpec {
                kind: RuleKind::Fibonacci,
                size: DEFAULT_FIBONACCI_SIZE,
            },
            _ => RuleSpec {
                kind: RuleKind::MonteCarlo,
                size: DEFAULT_MC_SIZE,
            },
        }
    }

    /// Default budget when the rule also samples the boundary of the body.
    pub fn default_sampled(n: usize) -> Self {
        match n {
            2 | 3 => RuleSpec::default_for(n),
            _ => RuleSpec {
                kind: RuleKind::MonteCarlo,
                size: SAMPLED_MC_SIZE,
            },
        }
    }

    /// Builds and calibrates the rule; Monte Carlo rules use `seed` or the default seed.
    pub fn build(&self, n: usize, seed: Option<u64>) -> Result<SphereRule> {
        let seed = match self.kind {
            RuleKind::MonteCarlo => Some(seed.unwrap_or(DEFAULT_MC_SEED)),
            _ => None,
        };
        Ok(calibrate_rule(build_rule(n, self.kind, self.size, seed)?))
    }
}

impl FromStr for RuleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, size) = s
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("rule '{s}' is not of the form kind:size")))?;
        let size = size
            .parse::<usize>()
            .map_err(|e| Error::domain(format!("rule size '{size}': {e}")))?;
        Ok(RuleSpec {
            kind: kind.parse()?,
            size,
        })
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.size)
    }
}

/// Quadrature nodes and weights on `S^{n-1}`.
#[derive(Clone, Debug)]
pub struct SphereRule {
    n: usize,
    kind: RuleKind,
    seed: Option<u64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    error_estimate: f64,
}

/// Builds an uncalibrated rule (`error_estimate = 0`).
pub fn build_rule(n: usize, kind: RuleKind, size: usize, seed: Option<u64>) -> Result<SphereRule> {
    if size == 0 {
        return Err(Error::domain("rule size must be positive"));
    }
    let nodes = match kind {
        RuleKind::Circle => {
            if n != 2 {
                return Err(Error::domain(format!(
                    "circle rules are for n = 2, got n = {n}"
                )));
            }
            (0..size)
                .flat_map(|k| {
                    let a = 2.0 * PI * k as f64 / size as f64;
                    [a.cos(), a.sin()]
                })
                .collect()
        }
        RuleKind::Fibonacci => {
            if n != 3 {
                return Err(Error::domain(format!(
                    "fibonacci rules are for n = 3, got n = {n}"
                )));
            }
            fibonacci_nodes(size)
        }
        RuleKind::MonteCarlo => {
            if n < 2 {
                return Err(Error::domain(format!(
                    "monte-carlo rules need n >= 2, got n = {n}"
                )));
            }
            let seed = seed.ok_or_else(|| Error::domain("monte-carlo rules require a seed"))?;
            if size % 2 != 0 {
                return Err(Error::domain(format!(
                    "monte-carlo rules use antithetic pairs; size {size} must be even"
                )));
            }
            antithetic_nodes(n, size, seed)
        }
    };
    Ok(SphereRule {
        n,
        kind,
        seed,
        nodes,
        weights: vec![1.0 / size as f64; size],
        error_estimate: 0.0,
    })
}

fn fibonacci_nodes(size: usize) -> Vec<f64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(3 * size);
    for i in 0..size {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / size as f64;
        let r = (1.0 - z * z).sqrt();
        let a = golden * i as f64;
        out.extend_from_slice(&[r * a.cos(), r * a.sin(), z]);
    }
    out
}

fn antithetic_nodes(n: usize, size: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n * size);
    let mut v = vec![0.0; n];
    for _ in 0..size / 2 {
        loop {
            for x in v.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            let norm = norm(&v);
            if norm > 1e-8 {
                v.iter_mut().for_each(|x| *x /= norm);
                break;
            }
        }
        out.extend_from_slice(&v);
        out.extend(v.iter().map(|x| -x));
    }
    out
}

impl SphereRule {
    /// Calibrated default rule for dimension `n`.
    pub fn default_for(n: usize) -> Result<Self> {
        RuleSpec::default_for(n).build(n, None)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn spec(&self) -> RuleSpec {
        RuleSpec {
            kind: self.kind,
            size: self.len(),
        }
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.n..(i + 1) * self.n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.n)
    }

    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    /// Sum of `w_i f(u_i)`, evaluated in parallel and reduced in node order.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| f(self.node(i)))
            .collect();
        let mut sum = CompensatedSum::default();
        for (i, (v, w)) in values.iter().zip(&self.weights).enumerate() {
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    index: i,
                    direction: self.node(i).to_vec(),
                    value: *v,
                });
            }
            sum.add(w * v);
        }
        Ok(sum.value())
    }

    /// Like [`SphereRule::integrate`] for an integrand that can fail.
    pub fn try_integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let values: Vec<Result<f64>> = (0..self.len())
            .into_par_iter()
            .map(|i| f(self.node(i)))
            .collect();
        let mut sum = CompensatedSum::default();
        for (i, (v, w)) in values.into_iter().zip(&self.weights).enumerate() {
            let v = v?;
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    index: i,
                    direction: self.node(i).to_vec(),
                    value: v,
                });
            }
            sum.add(w * v);
        }
        Ok(sum.value())
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Integral over `S^{n-1}` (normalized) of the zonal function `u -> f(u . v)`.
///
/// Reduced to one dimension with weight `(1 - t^2)^((n-3)/2)`; the substitution
/// `t = sin(theta)` removes the endpoint behaviour of the weight for every `n`.
pub fn zonal_integral<F: FnMut(f64) -> f64>(mut f: F, n: usize) -> Result<f64> {
    let factor = special::zonal_factor(n)?;
    let power = n as i32 - 2;
    let integrand = |theta: f64| {
        let c = theta.cos().max(0.0);
        f(theta.sin()) * c.powi(power)
    };
    let half = PI / 2.0;
    let raw = quad1d::adaptive_piecewise(integrand, &[-half, 0.0, half], 1e-13)
        .map_err(|e| Error::Integration(format!("zonal integral: {e}")))?;
    Ok(factor * raw)
}

/// Per-function result of a calibration run.
#[derive(Clone, Debug, Serialize)]
pub struct CalibrationEntry {
    pub function: &'static str,
    /// Largest absolute defect over the calibration poles.
    pub defect: f64,
    /// Three standard errors (Monte Carlo rules only).
    pub sampling_error: Option<f64>,
}

fn test_family() -> [(&'static str, fn(f64) -> f64); 4] {
    [
        ("one", |_| 1.0),
        ("square", |t| t * t),
        ("abs", |t| t.abs()),
        ("phi_0.5_squared", |t| phi_tau_pow(t, 2.0, 0.5)),
    ]
}

fn calibration_poles(n: usize) -> Vec<Vec<f64>> {
    let mut poles = Vec::with_capacity(CALIBRATION_POLES);
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    poles.push(e1);
    let mut rng = ChaCha20Rng::seed_from_u64(CALIBRATION_SEED);
    while poles.len() < CALIBRATION_POLES {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = norm(&v);
        v.iter_mut().for_each(|x| *x /= r);
        poles.push(v);
    }
    poles
}

/// Measures the rule's defects on the calibration family.
pub fn calibration_report(rule: &SphereRule) -> Vec<CalibrationEntry> {
    let n = rule.dim();
    let poles = calibration_poles(n);
    let mut out = Vec::new();
    for (name, f) in test_family() {
        // The family members are bounded smooth-or-kinked zonal functions; exact values are finite.
        let truth = zonal_integral(f, n).expect("calibration family is integrable");
        let mut defect: f64 = 0.0;
        let mut sampling: f64 = 0.0;
        for pole in &poles {
            let vals: Vec<f64> = rule.nodes().map(|u| f(dot(u, pole))).collect();
            let mut s = CompensatedSum::default();
            for (v, w) in vals.iter().zip(rule.weights()) {
                s.add(w * v);
            }
            defect = defect.max((s.value() - truth).abs());
            if rule.kind() == RuleKind::MonteCarlo {
                // antithetic pairs are adjacent; the pair means are the independent samples
                let pairs: Vec<f64> = vals.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
                let m = pairs.len() as f64;
                let mean = pairs.iter().sum::<f64>() / m;
                let var =
                    pairs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
                sampling = sampling.max(3.0 * (var / m).sqrt());
            }
        }
        out.push(CalibrationEntry {
            function: name,
            defect,
            sampling_error: (rule.kind() == RuleKind::MonteCarlo).then_some(sampling),
        });
    }
    out
}

/// Returns the rule with `error_estimate` set from the calibration family.
pub fn calibrate_rule(mut rule: SphereRule) -> SphereRule {
    let report = calibration_report(&rule);
    rule.error_estimate = report
        .iter()
        .map(|e| e.defect.max(e.sampling_error.unwrap_or(0.0)))
        .fold(0.0, f64::max);
    rule
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_nodes_and_weights() {
        let rule = build_rule(2, RuleKind::Circle, 8, None).unwrap();
        assert_eq!(rule.len(), 8);
        for k in 0..8 {
            let a = 2.0 * PI * k as f64 / 8.0;
            assert!((rule.node(k)[0] - a.cos()).abs() < 1e-15);
            assert!((rule.node(k)[1] - a.sin()).abs() < 1e-15);
            assert_eq!(rule.weight(k), 0.125);
        }
    }

    #[test]
    fn fibonacci_nodes_are_unit() {
        let rule = build_rule(3, RuleKind::Fibonacci, 1000, None).unwrap();
        assert_eq!(rule.len(), 1000);
        assert!(rule.nodes().all(|u| (norm(u) - 1.0).abs() < 1e-12));
        assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_antithetic() {
        let a = build_rule(4, RuleKind::MonteCarlo, 1000, Some(42)).unwrap();
        let b = build_rule(4, RuleKind::MonteCarlo, 1000, Some(42)).unwrap();
        assert_eq!(a.nodes, b.nodes);
        for i in (0..1000).step_by(2) {
            let (u, v) = (a.node(i), a.node(i + 1));
            assert!(u.iter().zip(v).all(|(x, y)| *x == -*y));
        }
        let c = build_rule(4, RuleKind::MonteCarlo, 1000, Some(43)).unwrap();
        assert_ne!(a.nodes, c.nodes);
    }

    #[test]
    fn kind_dimension_mismatch() {
        assert!(build_rule(3, RuleKind::Circle, 8, None).is_err());
        assert!(build_rule(4, RuleKind::Fibonacci, 8, None).is_err());
        assert!(build_rule(4, RuleKind::MonteCarlo, 8, None).is_err());
        assert!(build_rule(4, RuleKind::MonteCarlo, 7, Some(1)).is_err());
    }

    #[test]
    fn integrate_constant_and_failure() {
        let rule = build_rule(3, RuleKind::Fibonacci, 500, None).unwrap();
        assert!((rule.integrate(|_| 1.0).unwrap() - 1.0).abs() < 1e-14);
        let err = rule
            .integrate(|u| if u[2] > 0.99 { f64::NAN } else { 1.0 })
            .unwrap_err();
        assert!(matches!(err, Error::Evaluation { index: 0, .. }));
    }

    #[test]
    fn zonal_values() {
        assert!((zonal_integral(|t| t.abs(), 3).unwrap() - 0.5).abs() < 1e-13);
        for n in 2..7 {
            assert!((zonal_integral(|_| 1.0, n).unwrap() - 1.0).abs() < 1e-13);
            assert!((zonal_integral(|t| t * t, n).unwrap() - 1.0 / n as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn rule_spec_parsing() {
        let s: RuleSpec = "fibonacci:10000".parse().unwrap();
        assert_eq!(
            s,
            RuleSpec {
                kind: RuleKind::Fibonacci,
                size: 10_000
            }
        );
        assert_eq!(s.to_string(), "fibonacci:10000");
        assert!("mc".parse::<RuleSpec>().is_err());
        assert!("torus:3".parse::<RuleSpec>().is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }
}
