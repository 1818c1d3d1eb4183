//! The delayed characteristic equation
//!
//! ```text
//! P(x) = R(x) + Q(x) e^{-x tau}
//! R(x) = -x^3 + K4 x^2 - K1 K2 x - K1 K2 K7
//! Q(x) = K0 x^2 - K0 K4 x - r K1 K2 K6
//! ```
//!
//! Purely imaginary roots `x = i mu` satisfy `h(mu^2) = 0` with
//! `h(z) = |R(i sqrt z)|^2 - |Q(i sqrt z)|^2`, a monic cubic. Each positive root
//! of `h` gives a family of critical delays; the smallest is `tau0`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::linearize::{routh_hurwitz, KConstants};
use crate::{cubic, Error, Result};

/// Positive roots of `h` must satisfy `|h(z)|` below this.
pub const H_ROOT_TOL: f64 = 1e-10;
/// `|h'(z0)|` below this makes the crossing degenerate.
pub const TRANSVERSALITY_EPS: f64 = 1e-10;
/// `|Q(i mu)|` below this makes the angle system singular.
pub const ANGLE_SYSTEM_EPS: f64 = 1e-12;
/// Default number of extra `2 pi / mu` branches per frequency.
pub const DEFAULT_J_MAX: usize = 3;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn r_poly(x: Complex64, k: &KConstants) -> Complex64 {
    let k12 = k.k1k2();
    ((-x + k.k4) * x - k12) * x - k12 * k.k7
}

pub fn r_poly_d1(x: Complex64, k: &KConstants) -> Complex64 {
    (x * -3.0 + 2.0 * k.k4) * x - k.k1k2()
}

pub fn q_poly(x: Complex64, k: &KConstants) -> Complex64 {
    (x * k.k0 - k.k0 * k.k4) * x - k.r * k.k1k2() * k.k6
}

pub fn q_poly_d1(x: Complex64, k: &KConstants) -> Complex64 {
    x * (2.0 * k.k0) - k.k0 * k.k4
}

/// Characteristic function of the delayed linearization.
pub fn quasipoly(x: Complex64, tau: f64, k: &KConstants) -> Complex64 {
    r_poly(x, k) + q_poly(x, k) * (-x * tau).exp()
}

/// `dP/dx = R' + (Q' - tau Q) e^{-x tau}`.
pub fn quasipoly_d1(x: Complex64, tau: f64, k: &KConstants) -> Complex64 {
    r_poly_d1(x, k) + (q_poly_d1(x, k) - q_poly(x, k) * tau) * (-x * tau).exp()
}

/// Coefficients of `h(z) = z^3 + p z^2 + q z + r_tilde` and the critical
/// points of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HzCoefficients {
    pub p: f64,
    pub q: f64,
    pub r_tilde: f64,
    /// `p^2 - 3 q`.
    pub delta_disc: f64,
    /// `(-p + sqrt(delta)) / 3`, the local minimum of `h`.
    pub z1_star: Option<f64>,
    /// `(-p - sqrt(delta)) / 3`, the local maximum of `h`.
    pub z2_star: Option<f64>,
}

impl HzCoefficients {
    pub fn from_pqr(p: f64, q: f64, r_tilde: f64) -> Self {
        let delta_disc = p * p - 3.0 * q;
        let (z1_star, z2_star) = if delta_disc >= 0.0 {
            let s = delta_disc.sqrt();
            (Some((-p + s) / 3.0), Some((-p - s) / 3.0))
        } else {
            (None, None)
        };
        Self {
            p,
            q,
            r_tilde,
            delta_disc,
            z1_star,
            z2_star,
        }
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [1.0, self.p, self.q, self.r_tilde]
    }

    pub fn h(&self, z: f64) -> f64 {
        ((z + self.p) * z + self.q) * z + self.r_tilde
    }

    pub fn h_d1(&self, z: f64) -> f64 {
        (3.0 * z + 2.0 * self.p) * z + self.q
    }
}

pub fn hz_coefficients(k: &KConstants) -> HzCoefficients {
    let k12 = k.k1k2();
    let p = k.k4 * k.k4 - k.k0 * k.k0 - 2.0 * k12;
    let q = k12 * k12 - k.k0 * k.k0 * k.k4 * k.k4 + 2.0 * k12 * k.k4 * k.k7
        - 2.0 * k.r * k.k0 * k12 * k.k6;
    let r_tilde = k12 * k12 * (k.k7 * k.k7 - k.r * k.r * k.k6 * k.k6);
    HzCoefficients::from_pqr(p, q, r_tilde)
}

/// Which branch of the positive-root classification applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RootCase {
    /// `r_tilde < 0`: at least one positive root.
    NegativeConstant,
    /// `r_tilde >= 0`, `delta <= 0`: `h` is monotone, no positive root.
    Monotone,
    /// `r_tilde >= 0`, `delta > 0`, `z1* > 0`, `h(z1*) <= 0`: positive roots exist.
    DipBelowZero,
    /// `r_tilde >= 0`, `delta > 0`, but the local minimum is not a positive dip.
    NoDip,
}

impl RootCase {
    pub fn label(self) -> &'static str {
        match self {
            RootCase::NegativeConstant => "i (r_tilde < 0)",
            RootCase::Monotone => "ii (r_tilde >= 0, delta <= 0)",
            RootCase::DipBelowZero => "iii (r_tilde >= 0, delta > 0, z1* > 0, h(z1*) <= 0)",
            RootCase::NoDip => "iii (r_tilde >= 0, delta > 0, no positive dip)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositiveRoots {
    /// Ascending.
    pub z: Vec<f64>,
    pub case: RootCase,
    /// All three roots of `h`, for reporting.
    pub all: Vec<Complex64>,
}

pub fn root_case(hz: &HzCoefficients) -> RootCase {
    if hz.r_tilde < 0.0 {
        RootCase::NegativeConstant
    } else if hz.delta_disc <= 0.0 {
        RootCase::Monotone
    } else {
        let z1 = hz.z1_star.unwrap_or(f64::NAN);
        if z1 > 0.0 && hz.h(z1) <= 0.0 {
            RootCase::DipBelowZero
        } else {
            RootCase::NoDip
        }
    }
}

/// Real positive roots of `h`, Newton-polished.
pub fn positive_roots(hz: &HzCoefficients) -> PositiveRoots {
    let roots = cubic::solve(hz.coefficients());
    let mut z: Vec<f64> = roots
        .real
        .iter()
        .map(|&z| {
            let d = hz.h_d1(z);
            if d != 0.0 {
                let next = z - hz.h(z) / d;
                if hz.h(next).abs() < hz.h(z).abs() {
                    return next;
                }
            }
            z
        })
        .filter(|&z| z > 0.0)
        .collect();
    z.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * a.abs().max(1.0));
    PositiveRoots {
        z,
        case: root_case(hz),
        all: roots.all(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalFrequency {
    pub mu: f64,
    pub z: f64,
    /// Angle `mu tau` in `[0, 2 pi)` recovered from `(cos, sin)`.
    pub theta: f64,
    /// `tau_j = (theta + 2 j pi) / mu` for `j = 0..=j_max`.
    pub tau: Vec<f64>,
    /// `|cos^2 + sin^2 - 1|` of the solved pair before normalization.
    pub unit_circle_error: f64,
    /// Angle from the arccos-only formula; equals `theta` or `2 pi - theta`.
    pub theta_arccos: f64,
    pub h_prime: f64,
    /// `|P(i mu, tau_0)|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalDelaySet {
    pub entries: Vec<CriticalFrequency>,
    pub tau0: f64,
    pub mu0: f64,
    pub z0: f64,
    pub hprime_at_z0: f64,
    /// Index into `entries` of the frequency attaining `tau0`.
    pub k0: usize,
}

impl CriticalDelaySet {
    /// Every `(mu, tau)` pair, sorted by `tau`.
    pub fn sorted_pairs(&self) -> Vec<(f64, f64, usize)> {
        let mut out: Vec<(f64, f64, usize)> = self
            .entries
            .iter()
            .flat_map(|e| e.tau.iter().enumerate().map(move |(j, &t)| (e.mu, t, j)))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        out
    }

    /// First critical delay strictly after `tau0`.
    pub fn tau1(&self) -> Option<f64> {
        self.sorted_pairs()
            .into_iter()
            .map(|(_, t, _)| t)
            .find(|&t| t > self.tau0 + 1e-12)
    }
}

/// The arccos-only closed form for `cos(mu tau)`.
pub fn cos_closed_form(mu: f64, k: &KConstants) -> f64 {
    let (k0, k1, k2, k4, k6, k7, r) = (k.k0, k.k1, k.k2, k.k4, k.k6, k.k7, k.r);
    let m2 = mu * mu;
    let num = m2 * k0 * k1 * k2 * k4
        + r * m2 * k1 * k2 * k4 * k6
        + m2 * k0 * k1 * k2 * k7
        + r * k1 * k1 * k2 * k2 * k6 * k7;
    let den = m2 * m2 * k0 * k0
        + m2 * k0 * k0 * k4 * k4
        + 2.0 * r * m2 * k0 * k1 * k2 * k6
        + r * r * k1 * k1 * k2 * k2 * k6 * k6;
    -num / den
}

/// Solves the real and imaginary parts of `P(i mu) = 0` for
/// `(cos(mu tau), sin(mu tau))`.
pub fn angle_pair(mu: f64, k: &KConstants) -> Result<(f64, f64)> {
    let q = q_poly(c(0.0, mu), k);
    if q.norm() < ANGLE_SYSTEM_EPS {
        return Err(Error::Degenerate(format!(
            "Q(i mu) vanishes at mu = {mu}, crossing angle undetermined"
        )));
    }
    let k12 = k.k1k2();
    let a = k.k0 * k.k4 * mu;
    let b = k.r * k12 * k.k6 + k.k0 * mu * mu;
    let rhs1 = mu.powi(3) - k12 * mu;
    let rhs2 = -mu * mu * k.k4 - k12 * k.k7;
    // [a, -b; b, a] (cos, sin) = (rhs1, rhs2); determinant a^2 + b^2 = |Q(i mu)|^2
    let det = a * a + b * b;
    Ok(((a * rhs1 + b * rhs2) / det, (a * rhs2 - b * rhs1) / det))
}

/// Critical delays for every positive root of `h`, `j = 0..=j_max`.
pub fn critical_delays(
    k: &KConstants,
    hz: &HzCoefficients,
    roots: &[f64],
    j_max: usize,
) -> Result<CriticalDelaySet> {
    if roots.is_empty() {
        return Err(Error::Hypothesis(
            "no positive root of h, no critical delay".to_string(),
        ));
    }
    let mut entries = Vec::with_capacity(roots.len());
    for &z in roots {
        let mu = z.sqrt();
        let (cs, sn) = angle_pair(mu, k)?;
        let unit_circle_error = (cs * cs + sn * sn - 1.0).abs();
        let theta = sn.atan2(cs).rem_euclid(TAU);
        let tau: Vec<f64> = (0..=j_max)
            .map(|j| (theta + 2.0 * PI * j as f64) / mu)
            .collect();
        let residual = quasipoly(c(0.0, mu), tau[0], k).norm();
        entries.push(CriticalFrequency {
            mu,
            z,
            theta,
            tau,
            unit_circle_error,
            theta_arccos: cos_closed_form(mu, k).clamp(-1.0, 1.0).acos(),
            h_prime: hz.h_d1(z),
            residual,
        });
    }
    let k0 = entries
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.tau[0].total_cmp(&b.1.tau[0]))
        .map(|(i, _)| i)
        .unwrap();
    let e = &entries[k0];
    Ok(CriticalDelaySet {
        tau0: e.tau[0],
        mu0: e.mu,
        z0: e.z,
        hprime_at_z0: e.h_prime,
        k0,
        entries,
    })
}

/// Sign of the crossing direction at `z0`, from `h'(z0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transversality {
    pub h_prime: f64,
    pub sign: i8,
}

pub fn transversality(hz: &HzCoefficients, z0: f64) -> Result<Transversality> {
    if z0 <= 0.0 {
        return Err(Error::Hypothesis(format!("z0 = {z0} must be positive")));
    }
    let h_prime = hz.h_d1(z0);
    if h_prime.abs() < TRANSVERSALITY_EPS {
        return Err(Error::Degenerate(format!(
            "h'(z0) = {h_prime:e} at z0 = {z0}, crossing is not transversal"
        )));
    }
    Ok(Transversality {
        h_prime,
        sign: if h_prime > 0.0 { 1 } else { -1 },
    })
}

/// Rectangle of seeds for the Newton root search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for NewtonGrid {
    fn default() -> Self {
        Self {
            re_min: -3.0,
            re_max: 1.0,
            im_min: 0.0,
            im_max: 12.0,
            nx: 40,
            ny: 40,
        }
    }
}

impl NewtonGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.re_min < self.re_max
            && self.im_min < self.im_max
            && self.nx > 0
            && self.ny > 0
            && [self.re_min, self.re_max, self.im_min, self.im_max]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("empty Newton region {self:?}")))
        }
    }

    fn contains(&self, x: Complex64) -> bool {
        let slack = 1e-9;
        x.re >= self.re_min - slack
            && x.re <= self.re_max + slack
            && x.im.abs() >= self.im_min - slack
            && x.im.abs() <= self.im_max + slack
    }

    fn seeds(&self) -> Vec<Complex64> {
        let step = |lo: f64, hi: f64, n: usize, i: usize| {
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        (0..self.nx)
            .flat_map(|i| {
                (0..self.ny).map(move |j| {
                    c(
                        step(self.re_min, self.re_max, self.nx, i),
                        step(self.im_min, self.im_max, self.ny, j),
                    )
                })
            })
            .collect()
    }
}

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_STEP_TOL: f64 = 1e-12;
const NEWTON_VALUE_TOL: f64 = 1e-14;
const ROOT_ACCEPT: f64 = 1e-10;
const DEDUPE_DIST: f64 = 1e-6;

/// Newton iteration on the quasi-polynomial; `None` if it does not converge.
pub fn newton(x0: Complex64, tau: f64, k: &KConstants) -> Option<Complex64> {
    let mut x = x0;
    for _ in 0..NEWTON_MAX_ITER {
        let f = quasipoly(x, tau, k);
        if f.norm() < NEWTON_VALUE_TOL {
            break;
        }
        let d = quasipoly_d1(x, tau, k);
        if d.norm() == 0.0 {
            return None;
        }
        let step = f / d;
        x -= step;
        if !x.is_finite() || x.norm() > 1e6 {
            return None;
        }
        if step.norm() < NEWTON_STEP_TOL {
            break;
        }
    }
    (quasipoly(x, tau, k).norm() < ROOT_ACCEPT).then_some(x)
}

/// Roots of the quasi-polynomial found from a seed grid, folded to `Im >= 0`,
/// deduplicated and sorted by descending real part. Only roots inside the
/// region are kept.
pub fn rightmost_roots(k: &KConstants, tau: f64, grid: &NewtonGrid) -> Vec<Complex64> {
    let found: Vec<Complex64> = grid
        .seeds()
        .par_iter()
        .filter_map(|&s| newton(s, tau, k))
        .filter(|x| grid.contains(*x))
        .map(|x| {
            if x.im.abs() < 1e-12 {
                c(x.re, 0.0)
            } else {
                c(x.re, x.im.abs())
            }
        })
        .collect();
    let mut roots: Vec<Complex64> = Vec::new();
    for x in found {
        if roots.iter().all(|r| (r - x).norm() > DEDUPE_DIST) {
            roots.push(x);
        }
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// `dx/dtau` at a root, by implicit differentiation of `P(x, tau) = 0`.
pub fn root_velocity_implicit(x: Complex64, tau: f64, k: &KConstants) -> Complex64 {
    let e = (-x * tau).exp();
    x * q_poly(x, k) * e / quasipoly_d1(x, tau, k)
}

/// Continues a root from `(x0, tau_from)` to `tau_to` in small steps.
pub fn track_root(k: &KConstants, x0: Complex64, tau_from: f64, tau_to: f64) -> Result<Complex64> {
    let n = ((tau_to - tau_from).abs() / 1e-3).ceil().max(1.0) as usize;
    let mut x = x0;
    for i in 1..=n {
        let t = tau_from + (tau_to - tau_from) * i as f64 / n as f64;
        x = newton(x, t, k)
            .ok_or_else(|| Error::NoRoot(format!("root continuation lost at tau = {t}")))?;
    }
    Ok(x)
}

/// Centered difference of the root through `i mu0` at `tau0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootVelocity {
    pub finite_difference: Complex64,
    pub implicit: Complex64,
    pub step: f64,
}

pub fn root_velocity(k: &KConstants, mu0: f64, tau0: f64, step: f64) -> Result<RootVelocity> {
    let x0 = newton(c(0.0, mu0), tau0, k)
        .ok_or_else(|| Error::NoRoot(format!("no root near i {mu0} at tau = {tau0}")))?;
    let plus = track_root(k, x0, tau0, tau0 + step)?;
    let minus = track_root(k, x0, tau0, tau0 - step)?;
    Ok(RootVelocity {
        finite_difference: (plus - minus) / (2.0 * step),
        implicit: root_velocity_implicit(x0, tau0, k),
        step,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictCase {
    /// Stable for every delay.
    NoSwitch,
    /// Stable below `tau0`, Hopf bifurcation at `tau0`.
    SwitchAtTau0,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub case: VerdictCase,
    pub tau0: Option<f64>,
    pub tau1: Option<f64>,
    pub text: String,
}

/// Everything derived from `h`, collected for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfAnalysis {
    pub hz: HzCoefficients,
    pub roots: PositiveRoots,
    pub delays: Option<CriticalDelaySet>,
    pub transversality: Option<Transversality>,
    pub verdict: StabilityVerdict,
}

/// Delay-stability analysis of an equilibrium that is stable without delay.
pub fn analyze(k: &KConstants, j_max: usize) -> Result<HopfAnalysis> {
    let rh = routh_hurwitz(k);
    if !rh.satisfied {
        return Err(Error::Hypothesis(format!(
            "Routh-Hurwitz fails without delay (K0+K4 = {:.6e}, K1K2K5 = {:.6e}, \
             K1K2K5+(K0+K4)(K0K4+K1K2) = {:.6e})",
            rh.trace, rh.det_term, rh.hurwitz
        )));
    }
    let hz = hz_coefficients(k);
    let roots = positive_roots(&hz);
    if roots.z.is_empty() {
        return Ok(HopfAnalysis {
            hz,
            verdict: StabilityVerdict {
                case: VerdictCase::NoSwitch,
                tau0: None,
                tau1: None,
                text: format!(
                    "case {}: no purely imaginary roots, asymptotically stable for all tau >= 0",
                    roots.case.label()
                ),
            },
            roots,
            delays: None,
            transversality: None,
        });
    }
    let delays = critical_delays(k, &hz, &roots.z, j_max)?;
    let tr = transversality(&hz, delays.z0)?;
    let tau1 = delays.tau1();
    let text = format!(
        "case {}: asymptotically stable for tau in [0, {:.6}), unstable for tau in ({:.6}, {}), \
         Hopf bifurcation at tau0 = {:.6} with frequency {:.6}",
        roots.case.label(),
        delays.tau0,
        delays.tau0,
        tau1.map_or("inf".to_string(), |t| format!("{t:.6}")),
        delays.tau0,
        delays.mu0
    );
    Ok(HopfAnalysis {
        hz,
        verdict: StabilityVerdict {
            case: VerdictCase::SwitchAtTau0,
            tau0: Some(delays.tau0),
            tau1,
            text,
        },
        roots,
        delays: Some(delays),
        transversality: Some(tr),
    })
}

pub fn stability_verdict(k: &KConstants, j_max: usize) -> Result<StabilityVerdict> {
    analyze(k, j_max).map(|a| a.verdict)
}
