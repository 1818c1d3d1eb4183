//! Equilibria of the delayed system. Since `omega(t - tau) = omega*` at a
//! fixed point, the delay drops out and the equilibria coincide with those of
//! the undelayed model:
//!
//! - `E1 = (0, 0, b1)`, `b1` a root of a scalar equation;
//! - `E2 = (omega2, 0, b2)`, `omega2` in closed form and `b2` a scalar root;
//! - `E3 = (0, free, b3)`, which exists only when a consistency condition holds;
//! - `E4 = (omega*, lambda*, b*)`, interior points from a quadratic in `omega*`.

use std::fmt;

use serde::Serialize;

use crate::{Error, Model, Result};

/// Equilibria whose residual exceeds this are not returned as valid.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EquilibriumKind {
    E1,
    E2,
    E3,
    E4,
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EquilibriumKind::E1 => "E1",
            EquilibriumKind::E2 => "E2",
            EquilibriumKind::E3 => "E3",
            EquilibriumKind::E4 => "E4",
        };
        f.write_str(s)
    }
}

/// Employment coordinate of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EmploymentRate {
    Fixed(f64),
    /// Any value works (the `E3` family).
    Free,
    /// The inverse Phillips curve has no solution for this root.
    Undefined,
}

impl EmploymentRate {
    pub fn value(self) -> Option<f64> {
        match self {
            EmploymentRate::Fixed(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub omega_star: f64,
    pub lambda_star: EmploymentRate,
    pub b_star: f64,
    /// `1 - omega* - r b*`.
    pub pi_star: f64,
    /// Interior point: `omega*, lambda*` in `(0, 1)`, `b*` finite, no vanishing denominators.
    pub admissible: bool,
    /// Why the point is inadmissible, if it is.
    pub note: Option<String>,
    /// Max absolute value of the equilibrium equations.
    pub residual: f64,
}

impl Equilibrium {
    pub fn state(&self) -> Option<crate::State> {
        self.lambda_star
            .value()
            .map(|l| crate::State::new(self.omega_star, l, self.b_star))
    }
}

/// Sign-scan window for the scalar equations defining `b1*` and `b2*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl ScanRange {
    /// `[-1e3 / r, 1e3 / r]` with 10^4 points (`[-1e3, 1e3]` when `r = 0`).
    pub fn default_for(model: &Model) -> Self {
        let r = model.params().r.abs();
        let half = if r > 0.0 { 1e3 / r } else { 1e3 };
        Self {
            lo: -half,
            hi: half,
            points: 10_000,
        }
    }
}

/// Max absolute value of the equilibrium equations at `(omega, lambda, b)`.
pub fn residual(model: &Model, omega: f64, lambda: f64, b: f64) -> Result<f64> {
    let p = model.params();
    let pi = model.profit_share(omega, b);
    let z = model.inflation(omega);
    let g = model.growth(pi);
    let wage = omega * (model.phillips(lambda)? - p.alpha - (1.0 - p.gamma) * z);
    let employment = lambda * (g - p.alpha - p.beta);
    let debt = model.kappa(pi) - pi - b * (z + g);
    Ok(wage.abs().max(employment.abs()).max(debt.abs()))
}

/// Profit share shared by every equilibrium with nonzero employment:
/// `g^-1(alpha + beta) = kappa^-1(nu (alpha + beta + delta))`.
pub fn find_pi_star(model: &Model) -> Result<f64> {
    let p = model.params();
    model.kappa_inv(p.nu * (p.alpha + p.beta + p.delta))
}

/// Coefficients `(a0, a1, a2)` of the quadratic satisfied by `omega*` at `E4`.
pub fn e4_quadratic(model: &Model, pi_star: f64) -> [f64; 3] {
    let p = model.params();
    let ab = p.alpha + p.beta;
    let a0 = p.xi * p.eta_p;
    let a1 = ab - p.eta_p - p.xi * p.eta_p * (1.0 - pi_star);
    let a2 = (p.eta_p - ab) * (1.0 - pi_star) + p.r * (model.kappa(pi_star) - pi_star);
    [a0, a1, a2]
}

/// Real roots of `a0 x^2 + a1 x + a2`, ascending, avoiding cancellation.
fn stable_quadratic_roots([a0, a1, a2]: [f64; 3]) -> Vec<f64> {
    let disc = a1 * a1 - 4.0 * a0 * a2;
    if disc < 0.0 || a0 == 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (a1 + a1.signum() * disc.sqrt());
    let mut roots = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / a0, a2 / q]
    };
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

/// Interior equilibria, sorted by ascending `omega*`. Roots that fail the
/// inverse Phillips curve or hit a zero denominator are kept and flagged.
pub fn find_e4(model: &Model) -> Result<Vec<Equilibrium>> {
    let p = *model.params();
    let pi_star = find_pi_star(model)?;
    let mut out = Vec::new();
    for omega in stable_quadratic_roots(e4_quadratic(model, pi_star)) {
        let z = model.inflation(omega);
        let denom = z + p.alpha + p.beta;
        let mut note = None;
        let b = if denom.abs() < 1e-14 {
            note = Some("Z(omega*) + alpha + beta vanishes".to_string());
            if p.r != 0.0 {
                (1.0 - pi_star - omega) / p.r
            } else {
                f64::NAN
            }
        } else {
            (model.kappa(pi_star) - pi_star) / denom
        };
        let lambda = match model.phillips_inv(p.alpha + (1.0 - p.gamma) * z) {
            Ok(l) => EmploymentRate::Fixed(l),
            Err(_) => {
                note.get_or_insert_with(|| {
                    "alpha + (1 - gamma) Z(omega*) outside the Phillips curve range".to_string()
                });
                EmploymentRate::Undefined
            }
        };
        let residual = match lambda {
            EmploymentRate::Fixed(l) if b.is_finite() => residual(model, omega, l, b)?,
            _ => f64::NAN,
        };
        let interior = (0.0..1.0).contains(&omega)
            && omega > 0.0
            && lambda.value().is_some_and(|l| l > 0.0 && l < 1.0)
            && b.is_finite();
        if note.is_none() && !interior {
            note = Some("outside the economic domain".to_string());
        }
        out.push(Equilibrium {
            kind: EquilibriumKind::E4,
            omega_star: omega,
            lambda_star: lambda,
            b_star: b,
            pi_star: model.profit_share(omega, b),
            admissible: note.is_none(),
            note,
            residual,
        });
    }
    Ok(out)
}

/// Sign changes of `f` on the scan grid, each refined by bisection and one
/// Newton step. Non-finite samples break brackets.
fn scan_roots(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, range: &ScanRange) -> Vec<f64> {
    let n = range.points.max(2);
    let step = (range.hi - range.lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| range.lo + step * i as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..n - 1 {
        let (fa, fb) = (fs[i], fs[i + 1]);
        if !(fa.is_finite() && fb.is_finite()) {
            continue;
        }
        if fa == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if fa.signum() == fb.signum() || fb == 0.0 {
            continue;
        }
        let (mut a, mut b, mut fa) = (xs[i], xs[i + 1], fa);
        while (b - a).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
            let m = 0.5 * (a + b);
            if m <= a.min(b) || m >= a.max(b) {
                break;
            }
            let fm = f(m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        let mut x = 0.5 * (a + b);
        let d = df(x);
        if d != 0.0 {
            let polished = x - f(x) / d;
            if polished.is_finite() && f(polished).abs() <= f(x).abs() {
                x = polished;
            }
        }
        roots.push(x);
    }
    if let Some(&last) = fs.last() {
        if last == 0.0 {
            roots.push(xs[n - 1]);
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

/// Left side minus right side of the `b1*` equation
/// `kappa(1 - r b) - (1 - r b) = b [g(1 - r b) - eta_p]`.
pub fn e1_defining(model: &Model, b: f64) -> f64 {
    let p = model.params();
    let pi = 1.0 - p.r * b;
    model.kappa(pi) - pi - b * (model.growth(pi) - p.eta_p)
}

fn e1_defining_d1(model: &Model, b: f64) -> f64 {
    let p = model.params();
    let pi = 1.0 - p.r * b;
    -p.r * model.kappa_d1(pi) + p.r - (model.growth(pi) - p.eta_p) + b * p.r * model.growth_d1(pi)
}

/// Equilibria with zero wage share and zero employment, sorted by `b*`.
pub fn find_e1(model: &Model, range: &ScanRange) -> Result<Vec<Equilibrium>> {
    let roots = scan_roots(
        |b| e1_defining(model, b),
        |b| e1_defining_d1(model, b),
        range,
    );
    if roots.is_empty() {
        return Err(Error::NoRoot(format!(
            "E1: no sign change on [{}, {}]",
            range.lo, range.hi
        )));
    }
    roots
        .into_iter()
        .map(|b| {
            Ok(Equilibrium {
                kind: EquilibriumKind::E1,
                omega_star: 0.0,
                lambda_star: EmploymentRate::Fixed(0.0),
                b_star: b,
                pi_star: model.profit_share(0.0, b),
                admissible: false,
                note: Some("boundary equilibrium".to_string()),
                residual: residual(model, 0.0, 0.0, b)?,
            })
        })
        .collect()
}

/// Wage share of `E2`: `(Phi(0) - alpha) / ((1 - gamma) eta_p xi) + 1 / xi`.
pub fn e2_wage_share(model: &Model) -> Result<f64> {
    let p = model.params();
    let denom = (1.0 - p.gamma) * p.eta_p * p.xi;
    if denom == 0.0 {
        return Err(Error::Division("E2 wage share needs gamma < 1"));
    }
    Ok((model.phillips(0.0)? - p.alpha) / denom + 1.0 / p.xi)
}

pub fn e2_defining(model: &Model, omega2: f64, b: f64) -> f64 {
    let pi = model.profit_share(omega2, b);
    model.kappa(pi) - pi - b * (model.growth(pi) + model.inflation(omega2))
}

fn e2_defining_d1(model: &Model, omega2: f64, b: f64) -> f64 {
    let r = model.params().r;
    let pi = model.profit_share(omega2, b);
    -r * model.kappa_d1(pi) + r - (model.growth(pi) + model.inflation(omega2))
        + b * r * model.growth_d1(pi)
}

/// Equilibria with positive wage share and zero employment, sorted by `b*`.
pub fn find_e2(model: &Model, range: &ScanRange) -> Result<Vec<Equilibrium>> {
    let omega2 = e2_wage_share(model)?;
    let roots = scan_roots(
        |b| e2_defining(model, omega2, b),
        |b| e2_defining_d1(model, omega2, b),
        range,
    );
    if roots.is_empty() {
        return Err(Error::NoRoot(format!(
            "E2: no sign change on [{}, {}]",
            range.lo, range.hi
        )));
    }
    roots
        .into_iter()
        .map(|b| {
            Ok(Equilibrium {
                kind: EquilibriumKind::E2,
                omega_star: omega2,
                lambda_star: EmploymentRate::Fixed(0.0),
                b_star: b,
                pi_star: model.profit_share(omega2, b),
                admissible: false,
                note: Some("boundary equilibrium".to_string()),
                residual: residual(model, omega2, 0.0, b)?,
            })
        })
        .collect()
}

/// Residual of the `E3` consistency condition
/// `kappa(pi3) - pi3 - b3 [g(pi3) - eta_p]` with `b3 = (1 - pi3) / r`.
pub fn e3_consistency(model: &Model) -> Result<(f64, f64, f64)> {
    let p = model.params();
    let pi3 = find_pi_star(model)?;
    if p.r == 0.0 {
        return Err(Error::Division("E3 debt ratio needs r != 0"));
    }
    let b3 = (1.0 - pi3) / p.r;
    let gap = model.kappa(pi3) - pi3 - b3 * (model.growth(pi3) - p.eta_p);
    Ok((pi3, b3, gap))
}

/// The `E3` family, present only when the consistency residual is below `tol`.
pub fn find_e3(model: &Model, tol: f64) -> Result<Option<Equilibrium>> {
    let (pi3, b3, gap) = e3_consistency(model)?;
    if gap.abs() >= tol {
        return Ok(None);
    }
    Ok(Some(Equilibrium {
        kind: EquilibriumKind::E3,
        omega_star: 0.0,
        lambda_star: EmploymentRate::Free,
        b_star: b3,
        pi_star: pi3,
        admissible: false,
        note: Some("boundary family, employment rate arbitrary".to_string()),
        residual: residual(model, 0.0, 0.5, b3)?,
    }))
}

/// Every equilibrium that can be located: `E4` roots first (ascending
/// `omega*`), then `E1`, `E2` and `E3`. Missing boundary families are skipped.
pub fn find_all(model: &Model, range: &ScanRange, e3_tol: f64) -> Result<Vec<Equilibrium>> {
    let mut out = find_e4(model)?;
    for found in [find_e1(model, range), find_e2(model, range)] {
        match found {
            Ok(eqs) => out.extend(eqs),
            Err(Error::NoRoot(_)) | Err(Error::Division(_)) => {}
            Err(e) => return Err(e),
        }
    }
    match find_e3(model, e3_tol) {
        Ok(Some(e3)) => out.push(e3),
        Ok(None) | Err(Error::Division(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(out)
}
