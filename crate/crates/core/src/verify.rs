//! Inequality-chain verification in ball-normalized form, and the seeded fuzz driver.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::affine::phi_curve_prepared;
use crate::bodies::{Ball, Body, SurfaceMeasure};
use crate::error::{Error, Result};
use crate::generate::{generate_with, stream_rng, GenKind};
use crate::special::{a_const, capacity_factor, check_tau, sphere_area, unit_ball_volume, Params};
use crate::sphere::{RuleKind, RuleSpec, SphereRule};

/// Version tag written into every report.
pub const REPORT_VERSION: u32 = 1;
/// Identifier of the ball that opens every fuzz run.
pub const BALL_SELF_TEST_ID: &str = "ball-self-test";
/// Largest deviation from 1 allowed for the ball's normalized terms.
pub const BALL_SELF_TEST_TOL: f64 = 1e-9;

/// How much negative slack a link may show before it counts as a violation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TolerancePolicy {
    /// Multiplier on the propagated quadrature error estimate.
    pub multiplier: f64,
    /// Absolute tolerance for comparisons between exact values.
    pub exact_abs: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            multiplier: 5.0,
            exact_abs: 1e-10,
        }
    }
}

impl TolerancePolicy {
    /// `exact_abs` for exact comparisons, else `multiplier * estimate * scale`.
    pub fn tolerance(&self, exact: bool, estimate: f64, scale: f64) -> f64 {
        if exact {
            self.exact_abs
        } else {
            self.multiplier * estimate * scale
        }
    }
}

/// One normalized term of the chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Term {
    pub name: &'static str,
    pub value: f64,
    pub exact: bool,
    /// Relative error estimate carried over from the sphere rule, 0 when exact.
    pub error_estimate: f64,
}

/// `lhs <= rhs` with its slack `rhs - lhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Link {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Unnormalized values behind the terms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RawValues {
    pub volume: f64,
    pub sp: f64,
    pub phi_tau: f64,
    pub phi_0: f64,
    pub cap_lower: f64,
    pub cap_upper_phi: f64,
    pub cap_upper_var: f64,
}

/// `upper_phi <= upper_var` restated as `Phi_{p,tau} <= A(n,p) S_p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundIdentity {
    /// `|(upper_var - upper_phi) - f (A S_p - Phi)|`, `f` the capacity factor.
    pub residual: f64,
    pub tolerance: f64,
    /// Both forms of the inequality give the same verdict.
    pub equivalent: bool,
    pub pass: bool,
}

/// All chain terms for one body at one `(n, p, tau)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub body_id: String,
    pub kind: String,
    pub params: Params,
    pub terms: Vec<Term>,
    pub links: Vec<Link>,
    pub bound_identity: BoundIdentity,
    pub raw: RawValues,
    pub pass: bool,
}

impl ChainReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    pub fn violations(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| !l.pass)
    }
}

/// Link names in chain order.
pub const LINKS: [(&str, &str); 6] = [
    ("V_term", "cap_lower"),
    ("cap_lower", "cap_upper_phi"),
    ("cap_upper_phi", "phi_tau"),
    ("phi_tau", "phi_0"),
    ("phi_0", "sp_term"),
    ("cap_upper_phi", "cap_upper_var"),
];

fn link_name(lhs: &str, rhs: &str) -> String {
    format!("{lhs} <= {rhs}")
}

/// Per-`(body, p)` data shared by every `tau`.
struct Prepared<'a> {
    body: &'a Body,
    id: &'a str,
    kind: &'a str,
    p: f64,
    volume: f64,
    sp: f64,
    rule_error: f64,
}

fn prepare<'a>(
    body: &'a Body,
    id: &'a str,
    kind: &'a str,
    p: f64,
    rule: &SphereRule,
    measure: Option<&SurfaceMeasure>,
) -> Result<Prepared<'a>> {
    let n = body.dim();
    if !(p >= 1.0 && p < n as f64) {
        return Err(Error::domain(format!(
            "chain verification needs 1 <= p < n (p = {p}, n = {n})"
        )));
    }
    let volume = match body {
        Body::Star(_) => body.volume_with(rule)?,
        _ => body.volume()?,
    };
    let sp = match (body, measure) {
        (Body::Ellipsoid(_) | Body::Star(_), Some(m)) => m.sp(p),
        (Body::Ellipsoid(_) | Body::Star(_), None) => body.sp_surface_area_with(p, rule)?,
        _ => body.sp_surface_area(p)?,
    };
    Ok(Prepared {
        body,
        id,
        kind,
        p,
        volume,
        sp,
        rule_error: rule.error_estimate(),
    })
}

fn chain_reports(
    prep: &Prepared<'_>,
    taus: &[f64],
    rule: &SphereRule,
    measure: Option<&SurfaceMeasure>,
    policy: &TolerancePolicy,
) -> Result<(Vec<ChainReport>, Vec<(f64, f64)>)> {
    let body = prep.body;
    let (n, p) = (body.dim(), prep.p);
    let nf = n as f64;
    let mut grid: Vec<f64> = taus.to_vec();
    if !grid.contains(&0.0) {
        grid.push(0.0);
    }
    let phis = phi_curve_prepared(body, measure, p, &grid, rule)?;
    let phi_0 = phis[grid
        .iter()
        .position(|&t| t == 0.0)
        .expect("0 is on the grid")];

    let a = a_const(n, p)?;
    let factor = capacity_factor(n, p)?;
    let omega = unit_ball_volume(n)?;
    let area = sphere_area(n)?;
    let cap_ball = a * area * factor;
    let phi_ball = a * area;
    let power = 1.0 / (nf - p);

    let volume_exact = body.has_exact_volume();
    let sp_exact = body.has_exact_surface_data();
    let v_err = if volume_exact {
        0.0
    } else {
        prep.rule_error / nf
    };
    let sp_err = if sp_exact {
        0.0
    } else {
        prep.rule_error * power
    };

    let mut reports = Vec::with_capacity(taus.len());
    for (&tau, phi) in taus.iter().zip(&phis) {
        let cap_lower = cap_ball * (prep.volume / omega).powf((nf - p) / nf);
        let cap_upper_phi = factor * phi.value;
        let cap_upper_var = a * factor * prep.sp;
        let raw = RawValues {
            volume: prep.volume,
            sp: prep.sp,
            phi_tau: phi.value,
            phi_0: phi_0.value,
            cap_lower,
            cap_upper_phi,
            cap_upper_var,
        };
        let phi_err = |v: &crate::affine::PhiValue| {
            if v.exact {
                0.0
            } else {
                v.error_estimate * power
            }
        };
        let terms = vec![
            Term {
                name: "V_term",
                value: (prep.volume / omega).powf(1.0 / nf),
                exact: volume_exact,
                error_estimate: v_err,
            },
            Term {
                name: "cap_lower",
                value: (cap_lower / cap_ball).powf(power),
                exact: volume_exact,
                error_estimate: v_err,
            },
            Term {
                name: "cap_upper_phi",
                value: (cap_upper_phi / cap_ball).powf(power),
                exact: phi.exact,
                error_estimate: phi_err(phi),
            },
            Term {
                name: "cap_upper_var",
                value: (cap_upper_var / cap_ball).powf(power),
                exact: sp_exact,
                error_estimate: sp_err,
            },
            Term {
                name: "phi_tau",
                value: (phi.value / phi_ball).powf(power),
                exact: phi.exact,
                error_estimate: phi_err(phi),
            },
            Term {
                name: "phi_0",
                value: (phi_0.value / phi_ball).powf(power),
                exact: phi_0.exact,
                error_estimate: phi_err(&phi_0),
            },
            Term {
                name: "sp_term",
                value: (prep.sp / area).powf(power),
                exact: sp_exact,
                error_estimate: sp_err,
            },
        ];
        let find = |name: &str| terms.iter().find(|t| t.name == name).expect("known term");
        let links: Vec<Link> = LINKS
            .iter()
            .map(|(l, r)| {
                let (lt, rt) = (find(l), find(r));
                let estimate =
                    lt.error_estimate * lt.value.abs() + rt.error_estimate * rt.value.abs();
                let tolerance = policy.tolerance(lt.exact && rt.exact, estimate, 1.0);
                let slack = rt.value - lt.value;
                Link {
                    name: link_name(l, r),
                    lhs: lt.value,
                    rhs: rt.value,
                    slack,
                    tolerance,
                    pass: slack >= -tolerance,
                }
            })
            .collect();

        let gap = (cap_upper_var - cap_upper_phi) - factor * (a * prep.sp - phi.value);
        let identity_tol = 1e-12 * cap_upper_var.abs().max(cap_upper_phi.abs());
        // a tie within rounding may tip either comparison
        let equivalent = factor * (a * prep.sp - phi.value).abs() <= identity_tol
            || (cap_upper_phi <= cap_upper_var) == (phi.value <= a * prep.sp);
        let bound_identity = BoundIdentity {
            residual: gap.abs(),
            tolerance: identity_tol,
            equivalent,
            pass: gap.abs() <= identity_tol && equivalent,
        };
        let pass = links.iter().all(|l| l.pass) && bound_identity.pass;
        reports.push(ChainReport {
            body_id: prep.id.to_string(),
            kind: prep.kind.to_string(),
            params: Params::new(n, p, tau),
            terms,
            links,
            bound_identity,
            raw,
            pass,
        });
    }
    let curve = grid.iter().zip(&phis).map(|(&t, v)| (t, v.value)).collect();
    Ok((reports, curve))
}

/// Chain report with the default tolerance policy.
pub fn verify_chain(body: &Body, p: f64, tau: f64, rule: &SphereRule) -> Result<ChainReport> {
    verify_chain_with(body, "body", p, tau, rule, &TolerancePolicy::default())
}

/// Chain report for one body; violations are recorded in the report, not raised.
pub fn verify_chain_with(
    body: &Body,
    body_id: &str,
    p: f64,
    tau: f64,
    rule: &SphereRule,
    policy: &TolerancePolicy,
) -> Result<ChainReport> {
    verify_chain_taus(body, body_id, p, &[tau], rule, policy).map(|mut r| r.remove(0))
}

/// Chain reports for several `tau` values sharing one boundary sample.
pub fn verify_chain_taus(
    body: &Body,
    body_id: &str,
    p: f64,
    taus: &[f64],
    rule: &SphereRule,
    policy: &TolerancePolicy,
) -> Result<Vec<ChainReport>> {
    taus.iter().try_for_each(|&t| check_tau(t))?;
    let measure = sampled_measure(body, rule)?;
    let prep = prepare(body, body_id, body.kind_name(), p, rule, measure.as_ref())?;
    Ok(chain_reports(&prep, taus, rule, measure.as_ref(), policy)?.0)
}

fn sampled_measure(body: &Body, rule: &SphereRule) -> Result<Option<SurfaceMeasure>> {
    match body {
        Body::Ellipsoid(_) | Body::Star(_) => Ok(Some(SurfaceMeasure::of_body(body, Some(rule))?)),
        _ => Ok(None),
    }
}

/// Fibonacci size used by fuzz runs in dimension 3.
pub const FUZZ_FIBONACCI_SIZE: usize = 4000;
/// Monte Carlo size used by fuzz runs in dimension 4 and up.
pub const FUZZ_MC_SIZE: usize = 4000;

/// Default fuzz rule: the sampled `Phi` path costs `size^2` per `(body, p)`,
/// so fuzz runs use smaller rules than single evaluations. Tolerances follow
/// the rule's own error estimate.
pub fn fuzz_rule(n: usize) -> RuleSpec {
    match n {
        2 => RuleSpec::default_for(2),
        3 => RuleSpec {
            kind: RuleKind::Fibonacci,
            size: FUZZ_FIBONACCI_SIZE,
        },
        _ => RuleSpec {
            kind: RuleKind::MonteCarlo,
            size: FUZZ_MC_SIZE,
        },
    }
}

/// Fuzz run parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuzzConfig {
    pub seed: u64,
    /// Number of generated bodies; the ball self-test comes on top.
    pub count: usize,
    pub n_list: Vec<usize>,
    pub p_list: Vec<f64>,
    pub tau_list: Vec<f64>,
    pub kinds: Vec<GenKind>,
    pub cond_max: f64,
    /// Rule for every dimension; `None` picks [`fuzz_rule`].
    pub rule: Option<RuleSpec>,
    pub policy: TolerancePolicy,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            count: 200,
            n_list: vec![3],
            p_list: vec![1.2, 1.5, 2.0, 2.5],
            tau_list: vec![0.0, 0.3, -0.3, 0.7, -0.7, 1.0, -1.0],
            kinds: GenKind::DEFAULT_SET.to_vec(),
            cond_max: 20.0,
            rule: None,
            policy: TolerancePolicy::default(),
        }
    }
}

impl FuzzConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::domain("fuzz count must be at least 1"));
        }
        if self.n_list.is_empty()
            || self.p_list.is_empty()
            || self.tau_list.is_empty()
            || self.kinds.is_empty()
        {
            return Err(Error::domain(
                "fuzz lists (n, p, tau, kinds) must be nonempty",
            ));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(Error::domain(format!("dimension {n} must be at least 2")));
        }
        if let Some(&p) = self.p_list.iter().find(|&&p| !(p >= 1.0 && p.is_finite())) {
            return Err(Error::domain(format!(
                "exponent p = {p} must be finite and at least 1"
            )));
        }
        self.tau_list.iter().try_for_each(|&t| check_tau(t))?;
        for &n in &self.n_list {
            if !self.p_list.iter().any(|&p| p < n as f64) {
                return Err(Error::domain(format!("no p in the list is below n = {n}")));
            }
        }
        if !(self.policy.multiplier >= 0.0 && self.policy.exact_abs >= 0.0) {
            return Err(Error::domain("tolerance policy values must be nonnegative"));
        }
        Ok(())
    }

    fn rule_spec(&self, n: usize) -> RuleSpec {
        self.rule.unwrap_or_else(|| fuzz_rule(n))
    }
}

/// Rule used for one dimension of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleInfo {
    pub n: usize,
    pub rule: String,
    pub error_estimate: f64,
}

/// Smallest slack seen on one link across a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkSummary {
    pub min_slack: f64,
    /// Tolerance of the link where `min_slack` occurred.
    pub tolerance_at_min: f64,
    pub checks: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallSelfTest {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub bodies: usize,
    pub reports: usize,
    pub violations: usize,
    pub identity_failures: usize,
    pub links: BTreeMap<String, LinkSummary>,
    pub ball_self_test: Option<BallSelfTest>,
    pub pass: bool,
}

impl Summary {
    pub fn of(reports: &[ChainReport]) -> Self {
        let mut links: BTreeMap<String, LinkSummary> = BTreeMap::new();
        let mut ids: Vec<&str> = Vec::new();
        for r in reports {
            if ids.last() != Some(&r.body_id.as_str()) {
                ids.push(&r.body_id);
            }
            for l in &r.links {
                let e = links.entry(l.name.clone()).or_insert(LinkSummary {
                    min_slack: f64::INFINITY,
                    tolerance_at_min: 0.0,
                    checks: 0,
                    violations: 0,
                });
                if l.slack < e.min_slack {
                    e.min_slack = l.slack;
                    e.tolerance_at_min = l.tolerance;
                }
                e.checks += 1;
                e.violations += usize::from(!l.pass);
            }
        }
        ids.sort_unstable();
        ids.dedup();
        let ball: Vec<&ChainReport> = reports
            .iter()
            .filter(|r| r.body_id == BALL_SELF_TEST_ID)
            .collect();
        let ball_self_test = (!ball.is_empty()).then(|| {
            let max_deviation = ball
                .iter()
                .flat_map(|r| r.terms.iter().map(|t| (t.value - 1.0).abs()))
                .fold(0.0, f64::max);
            BallSelfTest {
                max_deviation,
                tolerance: BALL_SELF_TEST_TOL,
                pass: max_deviation <= BALL_SELF_TEST_TOL,
            }
        });
        let violations = links.values().map(|l| l.violations).sum();
        let identity_failures = reports.iter().filter(|r| !r.bound_identity.pass).count();
        let pass = violations == 0
            && identity_failures == 0
            && ball_self_test.as_ref().is_none_or(|b| b.pass);
        Summary {
            bodies: ids.len(),
            reports: reports.len(),
            violations,
            identity_failures,
            links,
            ball_self_test,
            pass,
        }
    }
}

/// A report document: `{version, seed, rule, bodies, summary}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub version: u32,
    pub seed: Option<u64>,
    pub rule: Vec<RuleInfo>,
    pub bodies: Vec<ChainReport>,
    pub summary: Summary,
}

impl Report {
    pub fn new(seed: Option<u64>, rule: Vec<RuleInfo>, bodies: Vec<ChainReport>) -> Self {
        let summary = Summary::of(&bodies);
        Self {
            version: REPORT_VERSION,
            seed,
            rule,
            bodies,
            summary,
        }
    }
}

/// `Phi_{p,tau}` along the run's tau grid for one `(body, p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauCurve {
    pub body_id: String,
    pub n: usize,
    pub p: f64,
    pub points: Vec<(f64, f64)>,
}

/// Output of [`run_fuzz`].
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzOutcome {
    pub report: Report,
    pub curves: Vec<TauCurve>,
}

struct Case {
    id: String,
    kind: String,
    body: Body,
}

fn fuzz_cases(config: &FuzzConfig) -> Result<Vec<Case>> {
    let mut cases = vec![Case {
        id: BALL_SELF_TEST_ID.to_string(),
        kind: "ball".to_string(),
        body: Ball::unit(config.n_list[0]).into(),
    }];
    let k = config.kinds.len();
    for i in 1..=config.count {
        let kind = config.kinds[(i - 1) % k];
        let n = config.n_list[((i - 1) / k) % config.n_list.len()];
        let mut rng = stream_rng(config.seed, i as u64);
        let body = generate_with(kind, n, &mut rng, config.cond_max)?;
        cases.push(Case {
            id: format!("body-{i:04}"),
            kind: kind.to_string(),
            body,
        });
    }
    Ok(cases)
}

/// Generates the bodies, verifies every chain over the `(p, tau)` grid and
/// collects the tau-curves. Cases run in parallel; results keep case order.
pub fn run_fuzz(config: &FuzzConfig) -> Result<FuzzOutcome> {
    config.validate()?;
    let mut rules: BTreeMap<usize, SphereRule> = BTreeMap::new();
    for &n in &config.n_list {
        if let std::collections::btree_map::Entry::Vacant(slot) = rules.entry(n) {
            slot.insert(config.rule_spec(n).build(n, None)?);
        }
    }
    let cases = fuzz_cases(config)?;
    let results: Vec<Result<(Vec<ChainReport>, Vec<TauCurve>)>> = cases
        .par_iter()
        .map(|case| {
            let n = case.body.dim();
            let rule = &rules[&n];
            let measure = sampled_measure(&case.body, rule)?;
            let mut reports = Vec::new();
            let mut curves = Vec::new();
            for &p in config.p_list.iter().filter(|&&p| p < n as f64) {
                let prep = prepare(&case.body, &case.id, &case.kind, p, rule, measure.as_ref())?;
                let (r, points) = chain_reports(
                    &prep,
                    &config.tau_list,
                    rule,
                    measure.as_ref(),
                    &config.policy,
                )
                .map_err(|e| annotate(e, &case.id, p))?;
                reports.extend(r);
                curves.push(TauCurve {
                    body_id: case.id.clone(),
                    n,
                    p,
                    points,
                });
            }
            Ok((reports, curves))
        })
        .collect();
    let mut bodies = Vec::new();
    let mut curves = Vec::new();
    for r in results {
        let (b, c) = r?;
        bodies.extend(b);
        curves.extend(c);
    }
    let rule = rules
        .iter()
        .map(|(&n, r)| RuleInfo {
            n,
            rule: r.spec().to_string(),
            error_estimate: r.error_estimate(),
        })
        .collect();
    Ok(FuzzOutcome {
        report: Report::new(Some(config.seed), rule, bodies),
        curves,
    })
}

fn annotate(e: Error, id: &str, p: f64) -> Error {
    match e {
        Error::Positivity { .. } | Error::Evaluation { .. } | Error::Integration(_) => {
            Error::Integration(format!("{id} at p = {p}: {e}"))
        }
        other => other,
    }
}

/// Output format of reports and curves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::domain(format!(
                "unknown format '{s}' (expected json or csv)"
            ))),
        }
    }
}

/// Writes the report as one JSON document or as a CSV table with one row per
/// `(body, p, tau, link)`. CSV numbers use the shortest round-trip form.
pub fn emit_report(report: &Report, format: Format, out: &mut (impl Write + ?Sized)) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(
                out,
                "body_id,kind,n,p,tau,link,lhs,rhs,slack,tolerance,pass"
            )?;
            for r in &report.bodies {
                for l in &r.links {
                    writeln!(
                        out,
                        "{},{},{},{:?},{:?},{},{:?},{:?},{:?},{:?},{}",
                        r.body_id,
                        r.kind,
                        r.params.n,
                        r.params.p,
                        r.params.tau,
                        l.name,
                        l.lhs,
                        l.rhs,
                        l.slack,
                        l.tolerance,
                        l.pass
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// Single-curve CSV with columns `tau,phi_p_tau`.
pub fn write_tau_curve(points: &[(f64, f64)], out: &mut (impl Write + ?Sized)) -> Result<()> {
    writeln!(out, "tau,phi_p_tau")?;
    for (t, v) in points {
        writeln!(out, "{t:?},{v:?}")?;
    }
    Ok(())
}

/// All curves of a run, columns `body_id,n,p,tau,phi_p_tau`.
pub fn write_tau_curves(curves: &[TauCurve], out: &mut (impl Write + ?Sized)) -> Result<()> {
    writeln!(out, "body_id,n,p,tau,phi_p_tau")?;
    for c in curves {
        for (t, v) in &c.points {
            writeln!(out, "{},{},{:?},{t:?},{v:?}", c.body_id, c.n, c.p)?;
        }
    }
    Ok(())
}
