use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use affcap_core::affine::{phi, phi_tau_curve};
use affcap_core::capacity::{cap_bounds_with, cp_ball_or_zero, cptau_ball, profile_optimize};
use affcap_core::generate::{generate_body, GenKind};
use affcap_core::special::{a_const, capacity_factor, sphere_area, unit_ball_volume};
use affcap_core::verify::{
    emit_report, run_fuzz, verify_chain_taus, write_tau_curve, write_tau_curves, Format,
    FuzzConfig, Report, RuleInfo, TolerancePolicy,
};
use affcap_core::{body_to_json, parse_body, Body, Error, Params, Result, RuleSpec, SphereRule};

/// Exit code for inequality violations and failed computations.
const EXIT_VIOLATION: u8 = 1;
/// Exit code for bad input, configuration or I/O.
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "affcap",
    version,
    about = "Affine p-capacity bounds and inequality-chain verification"
)]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ball constants: omega_n, A(n,p), capacity factor, ball capacities.
    Constants {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Kind, dimension, volume and closure data of a body file.
    BodyInfo {
        #[arg(long)]
        body: PathBuf,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Phi_{p,tau}(K).
    Phi {
        #[command(flatten)]
        input: BodyArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        #[command(flatten)]
        out: Output,
    },
    /// p-surface area S_p(K).
    Sp {
        #[command(flatten)]
        input: BodyArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Lower and upper bounds on C_{p,tau}(K).
    CapBounds {
        #[command(flatten)]
        input: BodyArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        #[arg(long, default_value_t = 5.0)]
        tol_mult: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Discrete radial profile minimizer with tail correction.
    ProfileOpt {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        /// Grid points.
        #[arg(long, default_value_t = 2000)]
        m: usize,
        #[arg(long, default_value_t = 200.0)]
        s_max: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Normalized inequality chain for one body.
    VerifyChain {
        #[command(flatten)]
        input: BodyArgs,
        /// One or more tau values.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0",
            allow_hyphen_values = true
        )]
        tau: Vec<f64>,
        #[arg(long, default_value_t = 5.0)]
        tol_mult: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Seeded random bodies through the chain over an (n, p, tau) grid.
    Fuzz(FuzzArgs),
    /// (tau, Phi_{p,tau}) on an even grid over [-1, 1].
    TauCurve {
        #[command(flatten)]
        input: BodyArgs,
        #[arg(long, default_value_t = 21)]
        points: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Body file for a generator kind.
    Generate {
        /// gl-cube, gl-crosspolytope, gl-simplex, ellipsoid, qball[:q], perturbed-ball
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20.0)]
        cond_max: f64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct RuleArgs {
    /// Sphere rule as kind:size (circle, fibonacci, mc).
    #[arg(long)]
    rule: Option<String>,
    /// Seed of Monte Carlo rules.
    #[arg(long)]
    seed: Option<u64>,
}

impl RuleArgs {
    fn build(&self, n: usize) -> Result<SphereRule> {
        self.build_or(n, RuleSpec::default_for(n))
    }

    fn build_or(&self, n: usize, default: RuleSpec) -> Result<SphereRule> {
        let spec = match &self.rule {
            Some(s) => s.parse()?,
            None => default,
        };
        spec.build(n, self.seed)
    }
}

/// [`parse_body`] with the path added to I/O errors.
fn load_body(path: &Path) -> Result<Body> {
    parse_body(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

#[derive(Args)]
struct BodyArgs {
    #[arg(long)]
    body: PathBuf,
    #[arg(long)]
    p: f64,
    #[command(flatten)]
    rule: RuleArgs,
}

impl BodyArgs {
    fn load(&self) -> Result<(Body, SphereRule)> {
        let body = load_body(&self.body)?;
        let rule = self.rule.build_or(body.dim(), body.default_rule())?;
        Ok((body, rule))
    }

    fn id(&self) -> String {
        self.body
            .file_stem()
            .map_or_else(|| "body".to_string(), |s| s.to_string_lossy().into_owned())
    }
}

#[derive(Args)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long, default_value = "json")]
    format: String,
}

impl Output {
    fn format(&self) -> Result<Format> {
        self.format.parse()
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn json(&self, value: &Value) -> Result<()> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Writes `value` as JSON, or the CSV produced by `csv` when `--format csv`.
    fn emit(&self, value: &Value, csv: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        match self.format()? {
            Format::Json => self.json(value),
            Format::Csv => {
                let mut w = self.writer()?;
                csv(&mut w)?;
                w.flush()?;
                Ok(())
            }
        }
    }

    fn json_only(&self, value: &Value) -> Result<()> {
        match self.format()? {
            Format::Json => self.json(value),
            Format::Csv => Err(Error::Domain("this command only writes json".into())),
        }
    }
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of generated bodies (the ball self-test is added on top).
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1.2,1.5,2,2.5")]
    p: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.3,-0.3,0.7,-0.7,1,-1",
        allow_hyphen_values = true
    )]
    tau: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "gl-cube,gl-crosspolytope,gl-simplex,ellipsoid,qball"
    )]
    kinds: Vec<String>,
    #[arg(long, default_value_t = 20.0)]
    cond_max: f64,
    /// Sphere rule as kind:size for every dimension.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long, default_value_t = 5.0)]
    tol_mult: f64,
    /// Also write the tau-curves as CSV to this path.
    #[arg(long)]
    curves: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

fn policy(tol_mult: f64) -> TolerancePolicy {
    TolerancePolicy {
        multiplier: tol_mult,
        ..TolerancePolicy::default()
    }
}

fn rule_info(rule: &SphereRule) -> Vec<RuleInfo> {
    vec![RuleInfo {
        n: rule.dim(),
        rule: rule.spec().to_string(),
        error_estimate: rule.error_estimate(),
    }]
}

/// Runs the command; `Ok(false)` means an inequality failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Constants { n, p, tau, out } => {
            Params::new(n, p, tau).check_projection()?;
            let ball = cp_ball_or_zero(n, p, 1.0)?;
            let cptau = if ball.vanishes {
                0.0
            } else {
                cptau_ball(n, p, tau, 1.0)?
            };
            out.json_only(&json!({
                "n": n,
                "p": p,
                "tau": tau,
                "omega_n": unit_ball_volume(n)?,
                "sphere_area": sphere_area(n)?,
                "a_const": a_const(n, p)?,
                "capacity_factor": if ball.vanishes { Value::Null } else { json!(capacity_factor(n, p)?) },
                "cp_ball": ball.value,
                "cp_ball_vanishes": ball.vanishes,
                "cptau_ball": cptau,
            }))?;
        }
        Command::BodyInfo { body, rule, out } => {
            let parsed = load_body(&body)?;
            let n = parsed.dim();
            let volume = match &parsed {
                Body::Star(_) => parsed.volume_with(&rule.build(n)?)?,
                _ => parsed.volume()?,
            };
            let mut info = json!({
                "kind": parsed.kind_name(),
                "n": n,
                "volume": volume,
                "volume_exact": parsed.has_exact_volume(),
                "origin_interior": parsed.has_origin_interior(),
                "body": body_to_json(&parsed),
            });
            if let Body::Polytope(poly) = &parsed {
                let (defect, norm) = poly.closure_defect();
                info["facets"] = json!(poly.facets().len());
                info["closure_defect"] = json!(defect);
                info["closure_defect_norm"] = json!(norm);
            }
            out.json_only(&info)?;
        }
        Command::Phi { input, tau, out } => {
            let (body, rule) = input.load()?;
            let value = phi(&body, input.p, tau, &rule)?;
            out.json_only(&json!({
                "n": body.dim(),
                "p": input.p,
                "tau": tau,
                "phi": value.value,
                "method": value.method.as_str(),
                "exact": value.exact,
                "error_estimate": value.error_estimate,
                "rule": rule.spec().to_string(),
            }))?;
        }
        Command::Sp { input, out } => {
            let (body, rule) = input.load()?;
            let sp = match body {
                Body::Ellipsoid(_) | Body::Star(_) => body.sp_surface_area_with(input.p, &rule)?,
                _ => body.sp_surface_area(input.p)?,
            };
            let exact = body.has_exact_surface_data();
            out.json_only(&json!({
                "n": body.dim(),
                "p": input.p,
                "sp": sp,
                "exact": exact,
                "error_estimate": if exact { 0.0 } else { rule.error_estimate() },
            }))?;
        }
        Command::CapBounds {
            input,
            tau,
            tol_mult,
            out,
        } => {
            let (body, rule) = input.load()?;
            let bounds =
                cap_bounds_with(&body, &input.id(), input.p, tau, &rule, &policy(tol_mult))?;
            out.json_only(&serde_json::to_value(&bounds)?)?;
        }
        Command::ProfileOpt {
            n,
            p,
            m,
            s_max,
            out,
        } => {
            let opt = profile_optimize(n, p, m, s_max)?;
            let target = capacity_factor(n, p)?;
            let value = json!({
                "n": n,
                "p": p,
                "m": m,
                "s_max": s_max,
                "j_star": opt.j_star,
                "closed_form": target,
                "error": (opt.j_star - target).abs(),
                "j_truncated": opt.j_truncated,
                "tail": opt.tail,
                "lift": opt.lift,
                "kkt_residual": opt.residual,
            });
            out.emit(&value, |w| {
                writeln!(w, "s,g,g_pinned")?;
                let (s, g, pinned) = (
                    opt.profile.s_grid(),
                    opt.profile.values(),
                    opt.pinned.values(),
                );
                for i in 0..s.len() {
                    writeln!(w, "{},{},{}", s[i], g[i], pinned[i])?;
                }
                Ok(())
            })?;
        }
        Command::VerifyChain {
            input,
            tau,
            tol_mult,
            out,
        } => {
            let (body, rule) = input.load()?;
            let reports =
                verify_chain_taus(&body, &input.id(), input.p, &tau, &rule, &policy(tol_mult))?;
            let report = Report::new(None, rule_info(&rule), reports);
            for r in &report.bodies {
                for l in r.violations() {
                    eprintln!(
                        "violation: {} at p = {}, tau = {}: {} (slack {:e}, tolerance {:e})",
                        r.body_id, r.params.p, r.params.tau, l.name, l.slack, l.tolerance
                    );
                }
            }
            let mut w = out.writer()?;
            emit_report(&report, out.format()?, &mut w)?;
            w.flush()?;
            return Ok(report.summary.pass);
        }
        Command::Fuzz(args) => return fuzz(args),
        Command::TauCurve { input, points, out } => {
            if points < 2 {
                return Err(Error::Domain(format!(
                    "need at least 2 grid points (got {points})"
                )));
            }
            let (body, rule) = input.load()?;
            let grid: Vec<f64> = (0..points)
                .map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64)
                .collect();
            let curve = phi_tau_curve(&body, input.p, &grid, &rule)?;
            let value = json!(curve
                .iter()
                .map(|(t, v)| json!({"tau": t, "phi_p_tau": v}))
                .collect::<Vec<_>>());
            out.emit(&value, |w| write_tau_curve(&curve, w))?;
        }
        Command::Generate {
            kind,
            n,
            seed,
            cond_max,
            out,
        } => {
            let kind: GenKind = kind.parse()?;
            let body = generate_body(kind, n, seed, cond_max)?;
            out.json_only(&body_to_json(&body))?;
        }
    }
    Ok(true)
}

fn fuzz(args: FuzzArgs) -> Result<bool> {
    let config = FuzzConfig {
        seed: args.seed,
        count: args.count,
        n_list: args.n,
        p_list: args.p,
        tau_list: args.tau,
        kinds: args
            .kinds
            .iter()
            .map(|k| k.parse())
            .collect::<Result<_>>()?,
        cond_max: args.cond_max,
        rule: args.rule.as_deref().map(str::parse).transpose()?,
        policy: policy(args.tol_mult),
    };
    let format = args.out.format()?;
    let outcome = run_fuzz(&config)?;
    let mut w = args.out.writer()?;
    emit_report(&outcome.report, format, &mut w)?;
    w.flush()?;
    if let Some(path) = &args.curves {
        let mut w = BufWriter::new(File::create(path)?);
        write_tau_curves(&outcome.curves, &mut w)?;
        w.flush()?;
    }
    let s = &outcome.report.summary;
    eprintln!(
        "fuzz: seed {}, {} bodies, {} chain reports, {} violations, {} identity failures",
        args.seed, s.bodies, s.reports, s.violations, s.identity_failures
    );
    for (name, link) in &s.links {
        eprintln!(
            "  {name}: min slack {:e} (tolerance {:e}), {} violations",
            link.min_slack, link.tolerance_at_min, link.violations
        );
    }
    if let Some(ball) = &s.ball_self_test {
        eprintln!(
            "  ball self-test: max deviation {:e}, {}",
            ball.max_deviation,
            if ball.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(s.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VIOLATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_VIOLATION
            })
        }
    }
}
