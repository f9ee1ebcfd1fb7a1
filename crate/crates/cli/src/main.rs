//! `canard`: locate canard points, compute normal-form coefficients, predict
//! and measure canard boundaries of forced slow/fast systems.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use canard_core::detector::trace_boundary_lenient;
use canard_core::melnikov::melnikov_low;
use canard_core::verify::{run_suite, Suite};
use canard_core::{
    builtin_fhn, builtin_vdp, compute_coefficients_with, envelope_int, envelope_low, envelope_unified,
    find_canard_point, find_folded_singularities, fsn_parameter, integrate, melnikov_int, trace_boundary,
    BlowupScaledParams, CanardError, CanardPoint, CoefficientSet, DerivativeMode, DetectorConfig, IvpSpec,
    QuadratureSpec, Regime, SlowFastSystem, Unscaling,
};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{parse_grid, parse_param, Format, Settings};
use output::{Cell, Report, Table};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl From<CanardError> for CliError {
    fn from(e: CanardError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "canard", version, about = "Canard analysis of periodically forced slow/fast systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Built-in system: fhn or vdp.
    #[arg(long, global = true)]
    system: Option<String>,
    /// System parameter, e.g. `--param c=1.52`; repeatable.
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Locate the canard point.
    Locate(Common),
    /// Normal-form coefficients at the canard point.
    Coeffs {
        #[command(flatten)]
        common: Common,
        /// Use finite differences even where analytic partials exist.
        #[arg(long)]
        fd: bool,
    },
    /// Folded singularities of the desingularized reduced flow.
    FoldedSingularities(Common),
    /// Splitting integrals, numerically and in closed form.
    Melnikov(Common),
    /// Analytic canard envelope over a frequency grid.
    Envelope(Common),
    /// Integrate the forced system from one initial condition.
    Simulate(Common),
    /// Fold-of-canards boundary by shooting, with the analytic envelope.
    Boundary(Common),
    /// Run the acceptance suite.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Initial guess `x,y,a` for the canard point.
    #[arg(long, value_parser = parse_guess, allow_hyphen_values = true)]
    guess: Option<[f64; 3]>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Raw forcing frequency; `start:stop:count` for boundary.
    #[arg(long)]
    omega: Option<String>,
    /// Frequency relative to ε (folded singularities).
    #[arg(long = "omega-bar")]
    omega_bar: Option<f64>,
    /// Regime-scaled frequency: ω̄ in the low regime, Ω in the intermediate one.
    #[arg(long)]
    freq: Option<f64>,
    /// `start:stop:count` in the regime's frequency variable.
    #[arg(long = "omega-grid")]
    omega_grid: Option<String>,
    /// low, intermediate or unified.
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    y0: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long = "rel-tol")]
    rel_tol: Option<f64>,
    #[arg(long = "abs-tol")]
    abs_tol: Option<f64>,
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long = "anchor-distance")]
    anchor_distance: Option<f64>,
    /// Write the boundary even when many branch solves fail.
    #[arg(long)]
    lenient: bool,
    /// Acceptance suite name, or `all`.
    #[arg(long)]
    suite: Option<String>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common, bool) {
        match self {
            Command::Locate(c) => ("locate", c, false),
            Command::Coeffs { common, fd } => ("coeffs", common, *fd),
            Command::FoldedSingularities(c) => ("folded-singularities", c, false),
            Command::Melnikov(c) => ("melnikov", c, false),
            Command::Envelope(c) => ("envelope", c, false),
            Command::Simulate(c) => ("simulate", c, false),
            Command::Boundary(c) => ("boundary", c, false),
            Command::Verify(c) => ("verify", c, false),
        }
    }
}

fn parse_guess(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected three comma-separated numbers x,y,a".to_string())
}

fn flag_settings(cli: &Cli, c: &Common, fd: bool) -> Settings {
    Settings {
        command: None,
        system: cli.system.clone(),
        params: cli.params.iter().cloned().collect(),
        format: cli.format,
        out: cli.out.clone(),
        guess: c.guess,
        fd: fd.then_some(true),
        eps: c.eps,
        a: c.a,
        b: c.b,
        omega: c.omega.clone(),
        omega_bar: c.omega_bar,
        freq: c.freq,
        omega_grid: c.omega_grid.clone(),
        regime: c.regime.clone(),
        theta0: c.theta0,
        x0: c.x0,
        y0: c.y0,
        t_end: c.t_end,
        samples: c.samples,
        rel_tol: c.rel_tol,
        abs_tol: c.abs_tol,
        phases: c.phases,
        anchor_distance: c.anchor_distance,
        lenient: c.lenient.then_some(true),
        suite: c.suite.clone(),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be a positive number, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be a non-negative number, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be finite")))
    }
}

struct Model {
    sys: SlowFastSystem<f64>,
    params: Vec<f64>,
    names: &'static [&'static str],
    guess: (f64, f64, f64),
}

fn model(s: &Settings) -> Result<Model, CliError> {
    let name = s.system.as_deref().unwrap_or("fhn");
    match name {
        "fhn" => {
            for k in s.params.keys() {
                if k != "I" && k != "c" {
                    return Err(invalid(format!("fhn has parameters I and c, not {k:?}")));
                }
            }
            let i = finite("I", *s.params.get("I").unwrap_or(&0.0))?;
            let c = finite("c", *s.params.get("c").unwrap_or(&1.52))?;
            Ok(Model { sys: builtin_fhn(i, c), params: vec![i, c], names: &["I", "c"], guess: (0.9, i + 0.5, 0.0) })
        }
        "vdp" => {
            if let Some(k) = s.params.keys().next() {
                return Err(invalid(format!("vdp takes no parameters, got {k:?}")));
            }
            Ok(Model { sys: builtin_vdp(), params: Vec::new(), names: &[], guess: (0.9, -0.5, 0.9) })
        }
        other => Err(invalid(format!("unknown system {other:?}; expected fhn or vdp"))),
    }
}

fn canard(m: &Model, s: &Settings) -> Result<CanardPoint<f64>, CliError> {
    let g = s.guess.map_or(m.guess, |g| (g[0], g[1], g[2]));
    Ok(find_canard_point(&m.sys, &m.params, g)?)
}

fn coefficients(m: &Model, cp: &CanardPoint<f64>, fd: bool) -> Result<CoefficientSet<f64>, CliError> {
    let mode = if fd { DerivativeMode::FiniteDifference } else { DerivativeMode::Prefer };
    Ok(compute_coefficients_with(&m.sys, cp, mode)?)
}

fn regime(s: &Settings, default: Regime) -> Result<Regime, CliError> {
    match s.regime.as_deref() {
        None => Ok(default),
        Some("low") => Ok(Regime::Low),
        Some("intermediate") => Ok(Regime::Intermediate),
        Some("unified") => Ok(Regime::Unified),
        Some(other) => Err(invalid(format!("unknown regime {other:?}"))),
    }
}

fn single_omega(s: &Settings, default: f64) -> Result<f64, CliError> {
    match &s.omega {
        None => Ok(default),
        Some(text) => {
            let g = parse_grid(text)?;
            if g.len() != 1 {
                return Err(invalid("this command takes a single --omega"));
            }
            non_negative("omega", g[0])
        }
    }
}

fn value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable result")
}

fn detector_config(s: &Settings) -> Result<DetectorConfig<f64>, CliError> {
    let mut cfg = DetectorConfig::default();
    if let Some(p) = s.phases {
        if p < 8 {
            return Err(invalid("phases must be at least 8"));
        }
        cfg.phases = p;
    }
    if let Some(d) = s.anchor_distance {
        cfg.anchor_distance = positive("anchor-distance", d)?;
    }
    if let Some(t) = s.rel_tol {
        cfg.rel_tol = positive("rel-tol", t)?;
    }
    if let Some(t) = s.abs_tol {
        cfg.abs_tol = positive("abs-tol", t)?;
    }
    Ok(cfg)
}

fn run(command: &str, s: &Settings) -> Result<(Report, Value), CliError> {
    if command == "verify" {
        let suite: Suite = s.suite.as_deref().unwrap_or("all").parse().map_err(CliError::Validation)?;
        let reports = run_suite(suite);
        for r in &reports {
            eprintln!("{}", r.line());
        }
        let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
        let table = Table {
            header: vec!["id", "name", "passed", "detail"],
            rows: reports
                .iter()
                .map(|r| {
                    vec![
                        Cell::Num(r.id as f64),
                        r.name.into(),
                        if r.passed { "true" } else { "false" }.into(),
                        Cell::Text(r.detail.clone()),
                    ]
                })
                .collect(),
        };
        let report = Report { result: value(&reports), table: Some(table) };
        if !failed.is_empty() {
            let text = output::render(&Value::Null, &report, Format::Json)?;
            if let Some(p) = &s.out {
                output::write(&text, Some(p))?;
            }
            return Err(CliError::Numerical(format!("acceptance criteria failed: {failed:?}")));
        }
        return Ok((report, json!({ "melnikov_seed": canard_core::verify::MELNIKOV_SEED })));
    }

    let m = model(s)?;
    let cp = canard(&m, s)?;
    match command {
        "locate" => Ok((Report { result: value(&cp), table: None }, json!({}))),
        "coeffs" => {
            let c = coefficients(&m, &cp, s.fd.unwrap_or(false))?;
            let mut result = value(&c);
            result["splitting_sum"] = json!(c.splitting_sum());
            Ok((Report { result, table: None }, json!({})))
        }
        "folded-singularities" => {
            let c = coefficients(&m, &cp, false)?;
            let a = finite("a", s.a.unwrap_or(cp.a0))?;
            let b = non_negative("b", s.b.unwrap_or(0.01))?;
            let wbar = non_negative("omega-bar", s.omega_bar.unwrap_or(1.0))?;
            let fs = find_folded_singularities(&m.sys, &cp, a, b, wbar)?;
            let result = json!({ "a": a, "b": b, "omega_bar": wbar, "a_fsn": fsn_parameter(&c, &cp, b)?, "singularities": fs });
            Ok((Report { result, table: None }, json!({})))
        }
        "melnikov" => {
            let c = coefficients(&m, &cp, false)?;
            let eps = positive("eps", s.eps.unwrap_or(1e-3))?;
            let b = non_negative("b", s.b.unwrap_or(0.01))?;
            let a = finite("a", s.a.unwrap_or(cp.a0))?;
            let theta0 = finite("theta0", s.theta0.unwrap_or(0.0))?;
            let freq = non_negative("freq", s.freq.unwrap_or(1.0))?;
            let u = Unscaling::new(&c, &cp);
            let quad = QuadratureSpec::default();
            let result = match regime(s, Regime::Low)? {
                Regime::Low => {
                    let prm = BlowupScaledParams::low_from_physical(&u, a, b, eps, freq, theta0);
                    json!({ "params": prm, "splitting": melnikov_low(&c, &prm, &quad)? })
                }
                Regime::Intermediate => {
                    let prm = BlowupScaledParams::intermediate_from_physical(&u, a, b, eps, freq, theta0);
                    json!({ "params": prm, "splitting": melnikov_int(&c, &prm, &quad)? })
                }
                Regime::Unified => return Err(invalid("melnikov needs --regime low or intermediate")),
            };
            Ok((Report { result, table: None }, value(&quad)))
        }
        "envelope" => {
            let c = coefficients(&m, &cp, false)?;
            let eps = positive("eps", s.eps.unwrap_or(1e-3))?;
            let b = non_negative("b", s.b.unwrap_or(0.01))?;
            let r = regime(s, Regime::Unified)?;
            let grid = parse_grid(s.omega_grid.as_deref().unwrap_or("0:0.15:61"))?;
            let mut rows = Vec::with_capacity(grid.len());
            let mut all = Vec::with_capacity(grid.len());
            for f in grid {
                let f = non_negative("frequency", f)?;
                let (e, omega) = match r {
                    Regime::Low => (envelope_low(&c, &cp, eps, b, f), eps * f),
                    Regime::Intermediate => (envelope_int(&c, &cp, eps, b, f), eps.sqrt() * f),
                    Regime::Unified => (envelope_unified(&c, &cp, eps, b, f), f),
                };
                rows.push(vec![f.into(), omega.into(), e.a_center.into(), e.half_width.into(), e.a_lower.into(), e.a_upper.into()]);
                all.push(e);
            }
            let table = Table { header: vec!["frequency", "omega", "a_center", "half_width", "a_lower", "a_upper"], rows };
            Ok((Report { result: value(&all), table: Some(table) }, json!({ "formula_uncertainty": eps * eps.sqrt() })))
        }
        "simulate" => {
            let eps = positive("eps", s.eps.unwrap_or(1e-3))?;
            let b = non_negative("b", s.b.unwrap_or(0.01))?;
            let a = finite("a", s.a.unwrap_or(cp.a0))?;
            let omega = single_omega(s, 0.01)?;
            let t_end = positive("t-end", s.t_end.unwrap_or(2000.0))?;
            let samples = s.samples.unwrap_or(1001);
            if samples < 2 {
                return Err(invalid("samples must be at least 2"));
            }
            let rel = positive("rel-tol", s.rel_tol.unwrap_or(1e-10))?;
            let abs = positive("abs-tol", s.abs_tol.unwrap_or(1e-10))?;
            let y0 = vec![
                finite("x0", s.x0.unwrap_or(cp.x0 + 0.5))?,
                finite("y0", s.y0.unwrap_or(cp.y0))?,
                finite("theta0", s.theta0.unwrap_or(0.0))?,
            ];
            let rhs = m.sys.forced_rhs(&m.params, a, b, omega, eps);
            let tr = integrate(&IvpSpec::new(&rhs, 0.0, t_end, y0).tolerances(rel, abs))?;
            let mut rows = Vec::with_capacity(samples);
            let mut points = Vec::with_capacity(samples);
            for k in 0..samples {
                let t = t_end * k as f64 / (samples - 1) as f64;
                let st = tr.sample(t).ok_or_else(|| CliError::Numerical(format!("no dense output at t = {t}")))?;
                rows.push(vec![t.into(), st[0].into(), st[1].into(), st[2].into()]);
                points.push(json!({ "t": t, "x": st[0], "y": st[1], "theta": st[2] }));
            }
            let table = Table { header: vec!["t", "x", "y", "theta"], rows };
            let stats = json!({ "accepted": tr.accepted, "rejected": tr.rejected, "rhs_evals": tr.rhs_evals });
            Ok((Report { result: json!({ "stats": stats, "samples": points }), table: Some(table) }, json!({ "rel_tol": rel, "abs_tol": abs })))
        }
        "boundary" => {
            let c = coefficients(&m, &cp, false)?;
            let eps = positive("eps", s.eps.unwrap_or(1e-3))?;
            let b = positive("b", s.b.unwrap_or(0.01))?;
            let grid = parse_grid(s.omega.as_deref().unwrap_or("0.001:0.15:60"))?;
            for &w in &grid {
                non_negative("omega", w)?;
            }
            let cfg = detector_config(s)?;
            let curve = if s.lenient.unwrap_or(false) {
                trace_boundary_lenient(&m.sys, &c, &cp, eps, b, &grid, &cfg)
            } else {
                trace_boundary(&m.sys, &c, &cp, eps, b, &grid, &cfg)?
            };
            let rows = curve
                .points
                .iter()
                .map(|p| {
                    vec![
                        p.omega.into(),
                        p.a_lower_num.into(),
                        p.a_upper_num.into(),
                        p.a_lower_theory.into(),
                        p.a_upper_theory.into(),
                        p.gap_flags().into(),
                    ]
                })
                .collect();
            let table = Table {
                header: vec!["omega", "a_lower_num", "a_upper_num", "a_lower_theory", "a_upper_theory", "gap_flags"],
                rows,
            };
            Ok((Report { result: value(&curve), table: Some(table) }, value(&cfg)))
        }
        other => Err(invalid(format!("unknown command {other}"))),
    }
}

fn default_format(command: &str, out: Option<&std::path::Path>) -> Format {
    match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        _ if matches!(command, "envelope" | "simulate" | "boundary") => Format::Csv,
        _ => Format::Json,
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("CANARD_THREADS") {
        let n: usize = v.parse().map_err(|_| invalid(format!("CANARD_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(invalid("CANARD_THREADS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| invalid(e.to_string()))?;
    }
    Ok(())
}

fn main_inner() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = std::io::Write::write_all(&mut std::io::stdout(), e.render().to_string().as_bytes());
                return Ok(());
            }
            let msg = e.to_string();
            return Err(invalid(msg.trim_start_matches("error: ").trim_end()));
        }
    };
    configure_threads()?;
    let (name, common, fd) = cli.command.parts();
    let flags = flag_settings(&cli, &common, fd);
    let base = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    if let Some(c) = &base.command {
        if c != name {
            return Err(invalid(format!("config is for {c:?}, not {name:?}")));
        }
    }
    let settings = base.overlay(flags);
    let (report, mut numerics) = run(name, &settings)?;
    if name != "verify" {
        let m = model(&settings)?;
        numerics["system"] = json!(m.sys.name());
        let named: serde_json::Map<String, Value> = m.names.iter().zip(&m.params).map(|(k, v)| (k.to_string(), json!(v))).collect();
        numerics["params"] = Value::Object(named);
    }
    let format = settings.format.unwrap_or_else(|| default_format(name, settings.out.as_deref()));
    let meta = output::metadata(name, &settings, numerics);
    let text = output::render(&meta, &report, format)?;
    output::write(&text, settings.out.as_deref())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}
