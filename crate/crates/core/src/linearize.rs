//! Linearization at an interior equilibrium: the K constants, the split
//! Jacobian `J0 + e^{-x tau} J_tau`, the undelayed characteristic cubic and the
//! Routh-Hurwitz test.

use serde::Serialize;

use crate::equilibria::{EmploymentRate, Equilibrium, EquilibriumKind};
use crate::linalg::Mat3;
use crate::{cubic, Error, Model, Result};

/// Values with magnitude below this are reported as marginal.
pub const MARGINAL_EPS: f64 = 1e-12;

/// Coefficients of the local expansion around an interior equilibrium.
///
/// `k0..k7` enter the linear part, `k8..k11` the quadratic part of the
/// employment and debt equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KConstants {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub k7: f64,
    pub k8: f64,
    pub k9: f64,
    pub k10: f64,
    pub k11: f64,
    /// `xi eta_p (gamma - 1)`, the coefficient of `u1(t) u1(t - 1)`.
    pub a_hat0: f64,
    /// `-phi0 - alpha - eta_p - gamma eta_p`, as usually written.
    pub a_hat1_printed: f64,
    /// `-phi0 - alpha + eta_p - gamma eta_p`, from expanding `-(1 - gamma) Z`.
    pub a_hat1_derived: f64,
    /// Interest rate, carried along because most formulas need it.
    pub r: f64,
}

impl KConstants {
    pub fn k1k2(&self) -> f64 {
        self.k1 * self.k2
    }
}

/// The constant matrices of the linearization `u' = J0 u(t) + J_tau u(t - tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobianPair {
    pub j0: Mat3,
    pub j_tau: Mat3,
}

/// Point data needed beyond the K constants by the normal-form expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteriorPoint {
    pub omega: f64,
    pub lambda: f64,
    pub b: f64,
    pub pi: f64,
}

/// Extracts the coordinates of an admissible interior equilibrium.
pub fn interior_point(eq: &Equilibrium) -> Result<InteriorPoint> {
    if eq.kind != EquilibriumKind::E4 {
        return Err(Error::Hypothesis(format!(
            "linearization is implemented for E4 only, got {}",
            eq.kind
        )));
    }
    let lambda = match eq.lambda_star {
        EmploymentRate::Fixed(l) if l > 0.0 && l < 1.0 => l,
        EmploymentRate::Fixed(l) => {
            return Err(Error::Domain {
                func: "phillips_d1",
                arg: l,
                reason: "employment rate must lie in (0, 1)",
            })
        }
        _ => {
            return Err(Error::Hypothesis(
                "equilibrium has no employment rate".to_string(),
            ))
        }
    };
    Ok(InteriorPoint {
        omega: eq.omega_star,
        lambda,
        b: eq.b_star,
        pi: eq.pi_star,
    })
}

/// K constants at an interior equilibrium.
pub fn k_constants(model: &Model, eq: &Equilibrium) -> Result<KConstants> {
    let pt = interior_point(eq)?;
    let p = model.params();
    let (w, l, b, pi) = (pt.omega, pt.lambda, pt.b, pt.pi);
    let kd1 = model.kappa_d1(pi);
    let kd2 = model.kappa_d2(pi);
    let k7 = model.inflation(w) + p.alpha + p.beta;
    let k3 = 1.0 - kd1 + b * model.growth_d1(pi);
    let k6 = -b * p.eta_p * p.xi;
    let a_hat0 = p.xi * p.eta_p * (p.gamma - 1.0);
    let k9 = kd2 / (2.0 * p.nu) * (p.nu - b);
    Ok(KConstants {
        k0: a_hat0 * w,
        k1: w * model.phillips_d1(l)?,
        k2: l * kd1 / p.nu,
        k3,
        k4: p.r * k3 - k7,
        k5: k7 + p.r * k6,
        k6,
        k7,
        k8: l * kd2 / (2.0 * p.nu),
        k9,
        k10: p.r * p.r * k9 + p.r * kd1 / p.nu,
        k11: 2.0 * p.r * k9 + kd1 / p.nu,
        a_hat0,
        a_hat1_printed: -p.phi0 - p.alpha - p.eta_p - p.gamma * p.eta_p,
        a_hat1_derived: -p.phi0 - p.alpha + p.eta_p - p.gamma * p.eta_p,
        r: p.r,
    })
}

/// The two Jacobians assembled from the K constants.
pub fn jacobians(k: &KConstants) -> JacobianPair {
    JacobianPair {
        j0: [
            [0.0, k.k1, 0.0],
            [-k.k2, 0.0, -k.r * k.k2],
            [k.k3, 0.0, k.k4],
        ],
        j_tau: [[k.k0, 0.0, 0.0], [0.0; 3], [k.k6, 0.0, 0.0]],
    }
}

pub fn jacobians_at(model: &Model, eq: &Equilibrium) -> Result<JacobianPair> {
    Ok(jacobians(&k_constants(model, eq)?))
}

/// Coefficients `[c3, c2, c1, c0]` of
/// `P0(x) = -x^3 + (K0 + K4) x^2 - (K0 K4 + K1 K2) x - K1 K2 K5`.
pub fn char_cubic(k: &KConstants) -> [f64; 4] {
    [
        -1.0,
        k.k0 + k.k4,
        -(k.k0 * k.k4 + k.k1k2()),
        -k.k1k2() * k.k5,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RouthHurwitz {
    /// All three strict inequalities hold.
    pub satisfied: bool,
    /// `K0 + K4`, must be negative.
    pub trace: f64,
    /// `K1 K2 K5`, must be positive.
    pub det_term: f64,
    /// `K1 K2 K5 + (K0 + K4)(K0 K4 + K1 K2)`, must be negative.
    pub hurwitz: f64,
    /// `K0 K4 + K1 K2`, positive whenever the three conditions hold.
    pub implied: f64,
    /// Some condition value is within [`MARGINAL_EPS`] of zero.
    pub marginal: bool,
}

pub fn routh_hurwitz(k: &KConstants) -> RouthHurwitz {
    let trace = k.k0 + k.k4;
    let det_term = k.k1k2() * k.k5;
    let implied = k.k0 * k.k4 + k.k1k2();
    let hurwitz = det_term + trace * implied;
    RouthHurwitz {
        satisfied: trace < 0.0 && det_term > 0.0 && hurwitz < 0.0,
        trace,
        det_term,
        hurwitz,
        implied,
        marginal: [trace, det_term, hurwitz]
            .iter()
            .any(|v| v.abs() < MARGINAL_EPS),
    }
}

/// Roots of the undelayed characteristic cubic.
pub fn undelayed_roots(k: &KConstants) -> cubic::CubicRoots {
    cubic::solve(char_cubic(k))
}
