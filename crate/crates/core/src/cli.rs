//! Command-line front end: JSON configuration with dotted `--set` overrides,
//! text reports on stdout, CSV/SVG files in the output directory.
//!
//! Exit codes: 0 success, 2 configuration, 3 missing equilibrium or bad index,
//! 4 failed hypothesis or degeneracy, 5 integration event.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::equilibria::{self, EmploymentRate, Equilibrium, EquilibriumKind, ScanRange};
use crate::linearize::{k_constants, routh_hurwitz, undelayed_roots, KConstants};
use crate::normal_form::{self, Route, REFERENCE_C1};
use crate::sim::{self, History, SimConfig};
use crate::spectrum::{self, NewtonGrid};
use crate::{Error, Model, ModelParams, State};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EQUILIBRIUM: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;
pub const EXIT_EVENT: i32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Equilibria with a larger residual are reported as failing the check.
    pub residual: f64,
    /// Consistency tolerance for the `E3` family.
    pub root: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-9,
            root: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Analysis {
    pub tau: f64,
    /// Defaults to `tau / 64`, or `0.01` without delay.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// `[omega, lambda, b]`; defaults to the selected equilibrium with
    /// `omega` raised by `1e-3`.
    pub initial: Option<[f64; 3]>,
    pub j_max: usize,
    pub newton: NewtonGrid,
    pub tol: Tolerances,
}

impl Default for Analysis {
    fn default() -> Self {
        Self {
            tau: 0.0,
            dt: None,
            t_end: 500.0,
            initial: None,
            j_max: spectrum::DEFAULT_J_MAX,
            newton: NewtonGrid::default(),
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub output: Output,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParams(_) | Error::Config(_) => EXIT_CONFIG,
            Error::NoRoot(_) => EXIT_EQUILIBRIUM,
            _ => EXIT_HYPOTHESIS,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::new(EXIT_CONFIG, msg)
}

/// Sets `path` (dot separated) in a JSON document. The value is parsed as
/// JSON when possible and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> CliResult<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(config_err(format!("empty key in `{path}`")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| config_err(format!("`{path}`: not an object at `{key}`")))?;
        if i + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        node = obj
            .entry((*key).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Parses a configuration document, applies overrides and validates.
pub fn load_config(text: &str, overrides: &[String]) -> CliResult<RunConfig> {
    let mut doc: Value =
        serde_json::from_str(text).map_err(|e| config_err(format!("malformed JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: RunConfig =
        serde_json::from_value(doc).map_err(|e| config_err(format!("invalid config: {e}")))?;
    cfg.model.validate()?;
    cfg.analysis.newton.validate()?;
    Ok(cfg)
}

/// `%.12g`-style formatting.
pub fn fmt_g(x: f64) -> String {
    const SIG: usize = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{:.*e}", SIG - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= SIG as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (SIG as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

fn csv_row(values: &[f64]) -> String {
    let mut s = values
        .iter()
        .map(|v| fmt_g(*v))
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    s
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)
        .map_err(|e| config_err(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Three stacked line plots sharing the time axis.
pub fn svg_plot(times: &[f64], series: &[(&str, Vec<f64>)]) -> String {
    let (w, panel_h, pad) = (800.0, 200.0, 40.0);
    let h = panel_h * series.len() as f64;
    let stride = (times.len() / 2000).max(1);
    let (t0, t1) = (
        times.first().copied().unwrap_or(0.0),
        times.last().copied().unwrap_or(1.0),
    );
    let tspan = if t1 > t0 { t1 - t0 } else { 1.0 };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let colors = ["#1f77b4", "#d62728", "#2ca02c"];
    for (i, (name, ys)) in series.iter().enumerate() {
        let top = i as f64 * panel_h;
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut pts = String::new();
        for (j, (&t, &y)) in times.iter().zip(ys).enumerate().step_by(stride) {
            let _ = j;
            let x = pad + (t - t0) / tspan * (w - 2.0 * pad);
            let yy = top + panel_h - pad / 2.0 - (y - lo) / span * (panel_h - pad);
            let _ = write!(pts, "{x:.2},{yy:.2} ");
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            colors[i % colors.len()],
            pts.trim_end()
        );
        let _ = writeln!(
            out,
            r#"<text x="{pad}" y="{}" font-family="sans-serif" font-size="12">{name} [{}, {}]</text>"#,
            top + 14.0,
            fmt_g(lo),
            fmt_g(hi)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn all_equilibria(model: &Model, cfg: &RunConfig) -> CliResult<Vec<Equilibrium>> {
    Ok(equilibria::find_all(
        model,
        &ScanRange::default_for(model),
        cfg.analysis.tol.root,
    )?)
}

fn lambda_value(l: EmploymentRate) -> f64 {
    l.value().unwrap_or(f64::NAN)
}

fn kind_code(k: EquilibriumKind) -> f64 {
    match k {
        EquilibriumKind::E1 => 1.0,
        EquilibriumKind::E2 => 2.0,
        EquilibriumKind::E3 => 3.0,
        EquilibriumKind::E4 => 4.0,
    }
}

/// Picks the requested row, or the first interior equilibrium that is stable
/// without delay (the first interior one if none is).
fn select(
    model: &Model,
    eqs: &[Equilibrium],
    index: Option<usize>,
) -> CliResult<(usize, Equilibrium)> {
    let idx = match index {
        Some(i) => i,
        None => eqs
            .iter()
            .position(|e| {
                e.kind == EquilibriumKind::E4
                    && e.admissible
                    && k_constants(model, e).is_ok_and(|k| routh_hurwitz(&k).satisfied)
            })
            .or_else(|| eqs.iter().position(|e| e.kind == EquilibriumKind::E4))
            .ok_or_else(|| CliError::new(EXIT_EQUILIBRIUM, "no interior equilibrium"))?,
    };
    let eq = eqs.get(idx).ok_or_else(|| {
        CliError::new(
            EXIT_EQUILIBRIUM,
            format!("equilibrium index {idx} out of range (0..{})", eqs.len()),
        )
    })?;
    if eq.kind != EquilibriumKind::E4 || !eq.admissible {
        return Err(CliError::new(
            EXIT_EQUILIBRIUM,
            format!(
                "row {idx} is {} and not an admissible interior equilibrium",
                eq.kind
            ),
        ));
    }
    Ok((idx, eq.clone()))
}

fn cplx(z: Complex64) -> String {
    if z.im >= 0.0 {
        format!("{} + {}i", fmt_g(z.re), fmt_g(z.im))
    } else {
        format!("{} - {}i", fmt_g(z.re), fmt_g(-z.im))
    }
}

/// Output of a command: the text report and the files written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub report: String,
    pub files: Vec<PathBuf>,
    /// Nonzero exit after a partial success (integration events).
    pub code: i32,
    pub stderr: String,
}

pub fn cmd_equilibria(cfg: &RunConfig, out_dir: &Path) -> CliResult<Outcome> {
    let model = Model::new(cfg.model)?;
    let eqs = all_equilibria(&model, cfg)?;
    if eqs.is_empty() {
        return Err(CliError::new(EXIT_EQUILIBRIUM, "no equilibrium found"));
    }
    let mut rep = String::new();
    let _ = writeln!(
        rep,
        "{:>5} {:>4} {:>16} {:>16} {:>16} {:>16} {:>16} {:>10} {:>12}",
        "index", "kind", "omega", "lambda", "b", "pi", "Z(omega)", "admissible", "residual"
    );
    let mut csv = String::from("index,kind,omega,lambda,b,pi,z,admissible,residual\n");
    for (i, e) in eqs.iter().enumerate() {
        let z = model.inflation(e.omega_star);
        let lam = match e.lambda_star {
            EmploymentRate::Fixed(v) => fmt_g(v),
            EmploymentRate::Free => "free".to_string(),
            EmploymentRate::Undefined => "undefined".to_string(),
        };
        let _ = writeln!(
            rep,
            "{:>5} {:>4} {:>16} {:>16} {:>16} {:>16} {:>16} {:>10} {:>12}{}",
            i,
            e.kind.to_string(),
            fmt_g(e.omega_star),
            lam,
            fmt_g(e.b_star),
            fmt_g(e.pi_star),
            fmt_g(z),
            e.admissible,
            format!("{:.3e}", e.residual),
            e.note
                .as_ref()
                .map(|n| format!("  ({n})"))
                .unwrap_or_default()
        );
        if e.residual.is_finite() && e.residual > cfg.analysis.tol.residual {
            let _ = writeln!(
                rep,
                "      residual above tolerance {}",
                cfg.analysis.tol.residual
            );
        }
        csv.push_str(&csv_row(&[
            i as f64,
            kind_code(e.kind),
            e.omega_star,
            lambda_value(e.lambda_star),
            e.b_star,
            e.pi_star,
            z,
            if e.admissible { 1.0 } else { 0.0 },
            e.residual,
        ]));
    }
    let path = write_file(out_dir, "equilibria.csv", &csv)?;
    Ok(Outcome {
        report: rep,
        files: vec![path],
        ..Default::default()
    })
}

fn k_report(rep: &mut String, k: &KConstants) {
    let named = [
        ("K0", k.k0),
        ("K1", k.k1),
        ("K2", k.k2),
        ("K3", k.k3),
        ("K4", k.k4),
        ("K5", k.k5),
        ("K6", k.k6),
        ("K7", k.k7),
        ("K8", k.k8),
        ("K9", k.k9),
        ("K10", k.k10),
        ("K11", k.k11),
        ("a_hat0", k.a_hat0),
    ];
    for (n, v) in named {
        let _ = writeln!(rep, "{n:>7} = {}", fmt_g(v));
    }
}

fn header(rep: &mut String, idx: usize, eq: &Equilibrium) {
    let _ = writeln!(
        rep,
        "equilibrium {idx} ({}): omega = {}, lambda = {}, b = {}",
        eq.kind,
        fmt_g(eq.omega_star),
        fmt_g(lambda_value(eq.lambda_star)),
        fmt_g(eq.b_star)
    );
}

pub fn cmd_stability(cfg: &RunConfig, index: Option<usize>) -> CliResult<Outcome> {
    let model = Model::new(cfg.model)?;
    let eqs = all_equilibria(&model, cfg)?;
    let (idx, eq) = select(&model, &eqs, index)?;
    let k = k_constants(&model, &eq)?;
    let rh = routh_hurwitz(&k);
    let mut rep = String::new();
    header(&mut rep, idx, &eq);
    k_report(&mut rep, &k);
    let _ = writeln!(rep, "K0 + K4 = {} (< 0 required)", fmt_g(rh.trace));
    let _ = writeln!(rep, "K1 K2 K5 = {} (> 0 required)", fmt_g(rh.det_term));
    let _ = writeln!(
        rep,
        "K1 K2 K5 + (K0 + K4)(K0 K4 + K1 K2) = {} (< 0 required)",
        fmt_g(rh.hurwitz)
    );
    let _ = writeln!(rep, "K0 K4 + K1 K2 = {}", fmt_g(rh.implied));
    let _ = writeln!(
        rep,
        "Routh-Hurwitz: {}{}",
        if rh.satisfied {
            "satisfied"
        } else {
            "violated"
        },
        if rh.marginal { " (marginal)" } else { "" }
    );
    let _ = writeln!(rep, "roots without delay:");
    for z in undelayed_roots(&k).all() {
        let _ = writeln!(rep, "  {}", cplx(z));
    }
    Ok(Outcome {
        report: rep,
        ..Default::default()
    })
}

pub fn cmd_critical_delay(
    cfg: &RunConfig,
    index: Option<usize>,
    out_dir: &Path,
) -> CliResult<Outcome> {
    let model = Model::new(cfg.model)?;
    let eqs = all_equilibria(&model, cfg)?;
    let (idx, eq) = select(&model, &eqs, index)?;
    let k = k_constants(&model, &eq)?;
    let hopf = spectrum::analyze(&k, cfg.analysis.j_max)?;
    let mut rep = String::new();
    header(&mut rep, idx, &eq);
    let hz = &hopf.hz;
    let _ = writeln!(
        rep,
        "h(z) = z^3 + p z^2 + q z + r_tilde with p = {}, q = {}, r_tilde = {}",
        fmt_g(hz.p),
        fmt_g(hz.q),
        fmt_g(hz.r_tilde)
    );
    let _ = writeln!(rep, "delta = p^2 - 3q = {}", fmt_g(hz.delta_disc));
    let _ = writeln!(rep, "root case: {}", hopf.roots.case.label());
    let _ = writeln!(rep, "roots of h:");
    for z in &hopf.roots.all {
        let _ = writeln!(rep, "  {}", cplx(*z));
    }
    let mut files = Vec::new();
    if let Some(d) = &hopf.delays {
        let mut csv = String::from("k,mu,z,j,tau\n");
        for (kk, e) in d.entries.iter().enumerate() {
            let _ = writeln!(
                rep,
                "mu = {}, z = {}, h'(z) = {}",
                fmt_g(e.mu),
                fmt_g(e.z),
                fmt_g(e.h_prime)
            );
            for (j, t) in e.tau.iter().enumerate() {
                let _ = writeln!(rep, "  j = {j}: tau = {}", fmt_g(*t));
                csv.push_str(&csv_row(&[kk as f64, e.mu, e.z, j as f64, *t]));
            }
        }
        files.push(write_file(out_dir, "critical_delays.csv", &csv)?);
        let _ = writeln!(rep, "tau0 = {}", fmt_g(d.tau0));
        let _ = writeln!(rep, "mu0 = {}", fmt_g(d.mu0));
        let _ = writeln!(rep, "h'(z0) = {}", fmt_g(d.hprime_at_z0));
    }
    let _ = writeln!(rep, "verdict: {}", hopf.verdict.text);
    Ok(Outcome {
        report: rep,
        files,
        ..Default::default()
    })
}

pub fn cmd_normal_form(cfg: &RunConfig, index: Option<usize>) -> CliResult<Outcome> {
    let model = Model::new(cfg.model)?;
    let eqs = all_equilibria(&model, cfg)?;
    let (idx, eq) = select(&model, &eqs, index)?;
    let nf = normal_form::analyze_at_tau0(&model, &eq, cfg.analysis.j_max)?;
    let mut rep = String::new();
    header(&mut rep, idx, &eq);
    let _ = writeln!(
        rep,
        "critical pair: mu0 = {}, tau0 = {}",
        fmt_g(nf.mu),
        fmt_g(nf.tau)
    );
    let _ = writeln!(
        rep,
        "x'(tau0) = {} (finite difference), {} (implicit)",
        cplx(nf.velocity.finite_difference),
        cplx(nf.velocity.implicit)
    );
    let _ = writeln!(
        rep,
        "Re x'(tau0) = {}",
        fmt_g(nf.velocity.finite_difference.re)
    );
    let _ = writeln!(rep, "Bbar = {}", cplx(nf.b_bar));
    let _ = writeln!(
        rep,
        "eigen residual = {:.3e}, adjoint residual = {:.3e}, <q*,q> = {}, <q*,qbar> = {}",
        nf.eigen.eigen_residual,
        nf.eigen.adjoint_residual,
        cplx(nf.pairing[0]),
        cplx(nf.pairing[1])
    );
    for rr in &nf.routes {
        let r = rr.result;
        let _ = writeln!(rep, "[{}]", rr.route.name());
        let _ = writeln!(
            rep,
            "  g20 = {}, g11 = {}, g02 = {}, g21 = {}",
            cplx(rr.g.g20),
            cplx(rr.g.g11),
            cplx(rr.g.g02),
            cplx(rr.g21)
        );
        let _ = writeln!(rep, "  c1(0) = {}", cplx(r.c1));
        let _ = writeln!(
            rep,
            "  mu2 = {}, beta2 = {} (2 Re c1 = {}), T2 = {}",
            fmt_g(r.mu_bar2),
            fmt_g(r.beta2),
            fmt_g(2.0 * r.c1.re),
            fmt_g(r.t2)
        );
    }
    let primary = nf.primary().result;
    let _ = writeln!(
        rep,
        "classification ({} route): {}, periodic solutions {}, period {}",
        Route::Printed.name(),
        match primary.direction {
            normal_form::Direction::Supercritical => "supercritical",
            normal_form::Direction::Subcritical => "subcritical",
        },
        match primary.orbit_stability {
            normal_form::OrbitStability::Stable => "stable",
            normal_form::OrbitStability::Unstable => "unstable",
        },
        match primary.period_trend {
            normal_form::PeriodTrend::Increasing => "increases",
            normal_form::PeriodTrend::Decreasing => "decreases",
        }
    );
    let _ = writeln!(
        rep,
        "reference c1(0) = {}; relative distance of printed route: {}",
        cplx(REFERENCE_C1),
        fmt_g((primary.c1 - REFERENCE_C1).norm() / REFERENCE_C1.norm())
    );
    let _ = writeln!(rep, "g21 groups, printed versus derived:");
    for d in &nf.discrepancies {
        let _ = writeln!(
            rep,
            "  {:<14} printed {} derived {} |diff| {:.3e} {}",
            d.group,
            cplx(Complex64::new(d.printed[0], d.printed[1])),
            cplx(Complex64::new(d.derived[0], d.derived[1])),
            d.abs_diff,
            if d.agrees { "ok" } else { "DIFFERS" }
        );
    }
    Ok(Outcome {
        report: rep,
        ..Default::default()
    })
}

pub fn cmd_simulate(cfg: &RunConfig, index: Option<usize>, out_dir: &Path) -> CliResult<Outcome> {
    let model = Model::new(cfg.model)?;
    let a = &cfg.analysis;
    let (initial, eq_state) = match a.initial {
        Some([w, l, b]) => {
            let eqs = all_equilibria(&model, cfg)?;
            (
                State::new(w, l, b),
                select(&model, &eqs, index)
                    .ok()
                    .and_then(|(_, e)| e.state()),
            )
        }
        None => {
            let eqs = all_equilibria(&model, cfg)?;
            let (_, eq) = select(&model, &eqs, index)?;
            let s = eq.state().expect("interior equilibrium has a state");
            (State::new(s.omega + 1e-3, s.lambda, s.b), Some(s))
        }
    };
    let sc = SimConfig {
        tau: a.tau,
        dt: a.dt.unwrap_or_else(|| SimConfig::default_dt(a.tau)),
        t_end: a.t_end,
        initial,
        history: History::ConstantAtInitial,
    };
    let traj = sim::simulate(&model, &sc)?;
    let mut csv = String::from("t,omega,lambda,b\n");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        csv.push_str(&csv_row(&[*t, s.omega, s.lambda, s.b]));
    }
    let mut files = vec![write_file(out_dir, "trajectory.csv", &csv)?];
    if cfg.output.svg {
        let series = [
            ("omega", traj.states.iter().map(|s| s.omega).collect()),
            ("lambda", traj.states.iter().map(|s| s.lambda).collect()),
            ("b", traj.states.iter().map(|s| s.b).collect()),
        ];
        files.push(write_file(
            out_dir,
            "trajectory.svg",
            &svg_plot(&traj.times, &series),
        )?);
    }
    let mut rep = String::new();
    let last = traj.last();
    let _ = writeln!(
        rep,
        "tau = {}, dt = {}, steps = {}, final t = {}",
        fmt_g(sc.tau),
        fmt_g(sc.dt),
        traj.states.len() - 1,
        fmt_g(*traj.times.last().unwrap())
    );
    let _ = writeln!(
        rep,
        "final state: omega = {}, lambda = {}, b = {}",
        fmt_g(last.omega),
        fmt_g(last.lambda),
        fmt_g(last.b)
    );
    if let Some(e) = eq_state {
        let _ = writeln!(rep, "distance to equilibrium: {}", fmt_g(last.distance(e)));
        match sim::oscillation_metrics(&traj, e, sc.t_end / 4.0) {
            Ok(m) => {
                let amps: Vec<String> = m.amplitudes.iter().map(|v| fmt_g(*v)).collect();
                let _ = writeln!(rep, "window amplitudes: {}", amps.join(", "));
                let _ = writeln!(
                    rep,
                    "envelope: {} (last/first = {})",
                    if m.growth_ratio() > 1.0 {
                        "growing"
                    } else {
                        "decaying"
                    },
                    fmt_g(m.growth_ratio())
                );
                let _ = writeln!(
                    rep,
                    "period: {} ({} upward crossings)",
                    fmt_g(m.period),
                    m.crossings
                );
            }
            Err(e) => {
                let _ = writeln!(rep, "oscillation metrics unavailable: {e}");
            }
        }
    }
    let mut outcome = Outcome {
        report: rep,
        files,
        ..Default::default()
    };
    if let Some(ev) = traj.events.first() {
        outcome.code = EXIT_EVENT;
        outcome.stderr = format!(
            "integration halted at t = {}: {:?} ({})",
            fmt_g(ev.t),
            ev.kind,
            ev.detail
        );
    }
    Ok(outcome)
}

/// Rightmost root over a delay grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub tau: f64,
    pub max_re: f64,
    pub im_at_max: f64,
}

pub fn scan_points(
    k: &KConstants,
    grid: &NewtonGrid,
    tau_min: f64,
    tau_max: f64,
    steps: usize,
) -> Vec<ScanPoint> {
    let taus: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                tau_min
            } else {
                tau_min + (tau_max - tau_min) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    taus.par_iter()
        .map(|&tau| {
            let roots = spectrum::rightmost_roots(k, tau, grid);
            let top = roots
                .first()
                .copied()
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            ScanPoint {
                tau,
                max_re: top.re,
                im_at_max: top.im,
            }
        })
        .collect()
}

pub fn cmd_scan(
    cfg: &RunConfig,
    index: Option<usize>,
    tau_min: f64,
    tau_max: f64,
    steps: usize,
    out_dir: &Path,
) -> CliResult<Outcome> {
    if !(tau_min >= 0.0 && tau_max >= tau_min && steps >= 1) {
        return Err(config_err(format!(
            "scan needs 0 <= tau-min <= tau-max and steps >= 1, got [{tau_min}, {tau_max}], {steps}"
        )));
    }
    let model = Model::new(cfg.model)?;
    let eqs = all_equilibria(&model, cfg)?;
    let (idx, eq) = select(&model, &eqs, index)?;
    let k = k_constants(&model, &eq)?;
    let rh = routh_hurwitz(&k);
    if !rh.satisfied {
        return Err(CliError::new(
            EXIT_HYPOTHESIS,
            "Routh-Hurwitz fails without delay, scan not meaningful",
        ));
    }
    let points = scan_points(&k, &cfg.analysis.newton, tau_min, tau_max, steps);
    let mut csv = String::from("tau,max_re,im_at_max\n");
    let mut rep = String::new();
    header(&mut rep, idx, &eq);
    for p in &points {
        csv.push_str(&csv_row(&[p.tau, p.max_re, p.im_at_max]));
    }
    for w in points.windows(2) {
        if w[0].max_re < 0.0 && w[1].max_re >= 0.0 {
            let _ = writeln!(
                rep,
                "max Re crosses zero between tau = {} and {}",
                fmt_g(w[0].tau),
                fmt_g(w[1].tau)
            );
        }
    }
    let path = write_file(out_dir, "scan.csv", &csv)?;
    Ok(Outcome {
        report: rep,
        files: vec![path],
        ..Default::default()
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "keen-delay",
    version,
    about = "Delay stability and Hopf analysis of the Keen model with inflation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a configuration value, e.g. `--set analysis.tau=0.85`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Row of the equilibrium table to analyse.
    #[arg(long)]
    pub index: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List all equilibria.
    Equilibria(Common),
    /// K constants and Routh-Hurwitz test without delay.
    Stability(Common),
    /// Critical delays and the delay-stability verdict.
    CriticalDelay(Common),
    /// Normal form at the first critical delay.
    NormalForm(Common),
    /// Integrate the delayed system.
    Simulate(Common),
    /// Rightmost characteristic root over a delay grid.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        tau_min: f64,
        #[arg(long, default_value_t = 1.2)]
        tau_max: f64,
        #[arg(long, default_value_t = 121)]
        steps: usize,
    },
}

fn prepare(common: &Common) -> CliResult<(RunConfig, PathBuf)> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| config_err(format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = load_config(&text, &common.set)?;
    let dir = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, dir))
}

pub fn execute(command: &Command) -> CliResult<Outcome> {
    match command {
        Command::Equilibria(c) => {
            let (cfg, dir) = prepare(c)?;
            cmd_equilibria(&cfg, &dir)
        }
        Command::Stability(c) => {
            let (cfg, _) = prepare(c)?;
            cmd_stability(&cfg, c.index)
        }
        Command::CriticalDelay(c) => {
            let (cfg, dir) = prepare(c)?;
            cmd_critical_delay(&cfg, c.index, &dir)
        }
        Command::NormalForm(c) => {
            let (cfg, _) = prepare(c)?;
            cmd_normal_form(&cfg, c.index)
        }
        Command::Simulate(c) => {
            let (cfg, dir) = prepare(c)?;
            cmd_simulate(&cfg, c.index, &dir)
        }
        Command::Scan {
            common,
            tau_min,
            tau_max,
            steps,
        } => {
            let (cfg, dir) = prepare(common)?;
            cmd_scan(&cfg, common.index, *tau_min, *tau_max, *steps, &dir)
        }
    }
}

/// Parses arguments, runs the command, prints the report and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            print!("{}", out.report);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if !out.stderr.is_empty() {
                eprintln!("{}", out.stderr);
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_printf_g() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(0.8362603006528849), "0.836260300653");
        assert_eq!(fmt_g(-0.0418109), "-0.0418109");
        assert_eq!(fmt_g(1.5e-7), "1.5e-07");
        assert_eq!(fmt_g(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_g(100.0), "100");
        assert_eq!(fmt_g(0.0001), "0.0001");
        assert_eq!(fmt_g(f64::NAN), "nan");
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut doc: Value = serde_json::json!({"analysis": {"tau": 0.0}});
        apply_override(&mut doc, "analysis.tau=0.85").unwrap();
        apply_override(&mut doc, "analysis.newton.nx=10").unwrap();
        apply_override(&mut doc, "output.dir=/tmp/x").unwrap();
        assert_eq!(doc["analysis"]["tau"], 0.85);
        assert_eq!(doc["analysis"]["newton"]["nx"], 10);
        assert_eq!(doc["output"]["dir"], "/tmp/x");
        assert!(apply_override(&mut doc, "novalue").is_err());
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_params() {
        let base = serde_json::to_string(&RunConfig {
            model: ModelParams::baseline(),
            analysis: Analysis::default(),
            output: Output::default(),
        })
        .unwrap();
        assert!(load_config(&base, &[]).is_ok());
        let e = load_config(&base, &["model.extra=1".to_string()]).unwrap_err();
        assert_eq!(e.code, EXIT_CONFIG);
        let e = load_config(&base, &["model.nu=-1".to_string()]).unwrap_err();
        assert_eq!(e.code, EXIT_CONFIG);
        assert_eq!(load_config("{", &[]).unwrap_err().code, EXIT_CONFIG);
    }

    #[test]
    fn svg_has_three_polylines() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let s = svg_plot(&t, &[("a", t.clone()), ("b", t.clone()), ("c", t.clone())]);
        assert_eq!(s.matches("<polyline").count(), 3);
        assert!(s.starts_with("<svg"));
    }
}
