//! Center-manifold reduction at a Hopf point and the quantities that classify
//! the bifurcating periodic orbits.
//!
//! Time is rescaled by the critical delay `tau`, so the delayed argument is
//! `u(t - 1)`. The reduced equation on the center manifold is
//!
//! ```text
//! z' = i mu tau z + g20 z^2/2 + g11 z zbar + g02 zbar^2/2 + g21 z^2 zbar/2 + ...
//! ```
//!
//! Three evaluation routes are carried side by side:
//!
//! - [`Route::Printed`]: the closed-form g, E1/E2 and g21 expressions in their
//!   usual published form, term by term.
//! - [`Route::Derived`]: the same quadratic truncation, but every coefficient
//!   obtained from the Hessian of the vector field.
//! - [`Route::Complete`]: `Derived` plus the cubic terms of the vector field,
//!   which also contribute to `g21`.
//!
//! The per-group differences between the printed and derived `g21` are
//! collected in a [`Discrepancy`] log.

use num_complex::Complex64;
use serde::Serialize;

use crate::equilibria::Equilibrium;
use crate::linalg::{self, CMat3, CVec3, Mat3, Solve3};
use crate::linearize::{interior_point, jacobians, k_constants, KConstants};
use crate::spectrum::{self, RootVelocity};
use crate::{Error, Model, Result};

/// Denominators below this magnitude are treated as zero.
pub const SINGULAR_EPS: f64 = 1e-12;
/// Value quoted for `c1(0)` in the worked example, reported but never gated.
pub const REFERENCE_C1: Complex64 = Complex64::new(436.694, 3390.52);

type C4 = [Complex64; 4];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Derivatives of the behavioural functions at the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expansion {
    pub omega: f64,
    pub lambda: f64,
    pub b: f64,
    pub r: f64,
    pub phi_d1: f64,
    pub phi_d2: f64,
    pub phi_d3: f64,
    pub kappa_d2: f64,
    pub kappa_d3: f64,
    pub g_d1: f64,
    pub g_d2: f64,
    pub g_d3: f64,
    /// `eta_p xi`.
    pub eta_xi: f64,
    pub k: KConstants,
}

impl Expansion {
    pub fn at(model: &Model, eq: &Equilibrium) -> Result<Self> {
        let pt = interior_point(eq)?;
        let p = model.params();
        Ok(Self {
            omega: pt.omega,
            lambda: pt.lambda,
            b: pt.b,
            r: p.r,
            phi_d1: model.phillips_d1(pt.lambda)?,
            phi_d2: model.phillips_d2(pt.lambda)?,
            phi_d3: model.phillips_d3(pt.lambda)?,
            kappa_d2: model.kappa_d2(pt.pi),
            kappa_d3: model.kappa_d3(pt.pi),
            g_d1: model.growth_d1(pt.pi),
            g_d2: model.growth_d2(pt.pi),
            g_d3: model.growth_d3(pt.pi),
            eta_xi: p.eta_p * p.xi,
            k: k_constants(model, eq)?,
        })
    }

    /// Linear response of the profit share to `(du_omega, du_b)`.
    fn dpi(&self, x: &C4) -> Complex64 {
        -x[0] - x[2] * self.r
    }

    /// Symmetric second derivative `D^2 F(x, y)` of the vector field in the
    /// variables `(omega, lambda, b, omega(t - tau))`.
    pub fn quadratic(&self, x: &C4, y: &C4) -> CVec3 {
        let (px, py) = (self.dpi(x), self.dpi(y));
        let a0 = self.k.a_hat0;
        [
            self.omega * self.phi_d2 * x[1] * y[1]
                + self.phi_d1 * (x[0] * y[1] + x[1] * y[0])
                + a0 * (x[0] * y[3] + x[3] * y[0]),
            self.lambda * self.g_d2 * px * py + self.g_d1 * (x[1] * py + y[1] * px),
            (self.kappa_d2 - self.b * self.g_d2) * px * py
                - self.g_d1 * (x[2] * py + y[2] * px)
                - self.eta_xi * (x[2] * y[3] + x[3] * y[2]),
        ]
    }

    /// Symmetric third derivative `D^3 F(x, y, z)`.
    pub fn cubic(&self, x: &C4, y: &C4, z: &C4) -> CVec3 {
        let (px, py, pz) = (self.dpi(x), self.dpi(y), self.dpi(z));
        let ppp = px * py * pz;
        [
            self.omega * self.phi_d3 * x[1] * y[1] * z[1]
                + self.phi_d2 * (x[0] * y[1] * z[1] + x[1] * y[0] * z[1] + x[1] * y[1] * z[0]),
            self.lambda * self.g_d3 * ppp
                + self.g_d2 * (x[1] * py * pz + y[1] * px * pz + z[1] * px * py),
            (self.kappa_d3 - self.b * self.g_d3) * ppp
                - self.g_d2 * (x[2] * py * pz + y[2] * px * pz + z[2] * px * py),
        ]
    }
}

/// Right and left critical eigenvectors at `(mu, tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvectors {
    /// `(1, v2, v3)` with `(J0 + e^{-i mu tau} J_tau) q0 = i mu q0`.
    pub q0: CVec3,
    /// Unnormalized adjoint `(1, w2, w3)`; its conjugate is a left eigenvector.
    pub y: CVec3,
    pub eigen_residual: f64,
    pub adjoint_residual: f64,
}

fn guard(z: Complex64, what: &'static str) -> Result<Complex64> {
    if z.norm() < SINGULAR_EPS {
        Err(Error::Singular {
            what,
            detail: format!("denominator {z} vanishes"),
        })
    } else {
        Ok(z)
    }
}

pub fn eigenvectors(k: &KConstants, mu: f64, tau: f64) -> Result<Eigenvectors> {
    guard(c(mu, 0.0), "frequency")?;
    let e = (-I * mu * tau).exp();
    let k1 = guard(c(k.k1, 0.0), "K1")?;
    let v2 = (I * mu - e * k.k0) / k1;
    let v3 = -(e * k.k6 + k.k3) / guard(c(k.k4, -mu), "K4 - i mu")?;
    let w2 = -k1 / (I * mu);
    let w3 = -k.r * k.k1k2() / guard(I * mu * k.k4 - mu * mu, "i mu K4 - mu^2")?;
    let q0 = [c(1.0, 0.0), v2, v3];
    let y = [c(1.0, 0.0), w2, w3];
    let jp = jacobians(k);
    let m = char_matrix(&jp.j0, &jp.j_tau, e);
    let eigen_residual = linalg::max_norm(&linalg::sub(
        &linalg::matvec(&m, &q0),
        &linalg::scale(&q0, I * mu),
    ));
    let mt = linalg::transpose(&m);
    let yb = linalg::conj(&y);
    let adjoint_residual = linalg::max_norm(&linalg::sub(
        &linalg::matvec(&mt, &yb),
        &linalg::scale(&yb, I * mu),
    ));
    Ok(Eigenvectors {
        q0,
        y,
        eigen_residual,
        adjoint_residual,
    })
}

/// `J0 + e J_tau` as a complex matrix.
fn char_matrix(j0: &Mat3, j_tau: &Mat3, e: Complex64) -> CMat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| c(j0[i][j], 0.0) + e * j_tau[i][j]))
}

fn integral_factor(s: Complex64) -> Complex64 {
    if s.norm() < 1e-12 {
        c(1.0, 0.0)
    } else {
        (1.0 - (-s).exp()) / s
    }
}

/// Bilinear pairing of `psi(s) = cvec e^{sigma s}` (adjoint side, `s` in `[0, 1]`)
/// with `phi(theta) = avec e^{lam theta}` (`theta` in `[-1, 0]`) for the
/// delayed operator scaled by `tau`.
pub fn bilinear(
    cvec: &CVec3,
    sigma: Complex64,
    avec: &CVec3,
    lam: Complex64,
    k: &KConstants,
    tau: f64,
) -> Complex64 {
    let cb = linalg::conj(cvec);
    let jt = linalg::to_complex(&jacobians(k).j_tau);
    let delayed = linalg::dot(&cb, &linalg::matvec(&jt, avec));
    let sb = sigma.conj();
    linalg::dot(&cb, avec) + delayed * tau * sb.exp() * integral_factor(sb + lam)
}

/// `Bbar` such that `<B y, q0> = 1` in the bilinear pairing.
pub fn normalize(ev: &Eigenvectors, k: &KConstants, mu: f64, tau: f64) -> Result<Complex64> {
    let e = (-I * mu * tau).exp();
    let (v2, v3) = (ev.q0[1], ev.q0[2]);
    let (w2b, w3b) = (ev.y[1].conj(), ev.y[2].conj());
    let den = 1.0 + w2b * v2 + w3b * v3 + tau * (w3b * k.k6 + k.k0) * e;
    if den.norm() < SINGULAR_EPS {
        return Err(Error::Degenerate(format!(
            "normalization denominator {den} vanishes"
        )));
    }
    Ok(1.0 / den)
}

/// Evaluation route for the normal-form coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Route {
    Printed,
    Derived,
    Complete,
}

impl Route {
    pub const ALL: [Route; 3] = [Route::Printed, Route::Derived, Route::Complete];

    pub fn name(self) -> &'static str {
        match self {
            Route::Printed => "printed",
            Route::Derived => "derived",
            Route::Complete => "complete",
        }
    }
}

/// Shared inputs of every route at one critical pair.
#[derive(Debug, Clone, Copy)]
pub struct Setup {
    pub ex: Expansion,
    pub mu: f64,
    pub tau: f64,
    pub q0: CVec3,
    pub y: CVec3,
    pub b_bar: Complex64,
}

impl Setup {
    fn e(&self) -> Complex64 {
        (-I * self.mu * self.tau).exp()
    }

    /// `(1, v2, v3, e^{-i mu tau})`: the critical mode at `theta = 0` and `-1`.
    fn mode(&self) -> C4 {
        [self.q0[0], self.q0[1], self.q0[2], self.e()]
    }

    /// `tau Bbar ybar . v`.
    fn project(&self, v: &CVec3) -> Complex64 {
        self.b_bar * self.tau * linalg::dot(&linalg::conj(&self.y), v)
    }

    fn mu_tau(&self) -> f64 {
        self.mu * self.tau
    }
}

/// Quadratic-order coefficients of the reduced equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GQuadratic {
    pub g20: Complex64,
    pub g11: Complex64,
    pub g02: Complex64,
}

/// The printed closed forms for `g20`, `g11` and `g02`.
pub fn g_printed(s: &Setup) -> GQuadratic {
    let ex = &s.ex;
    let k = &ex.k;
    let (al, be) = (s.q0[1], s.q0[2]);
    let (alb, beb) = (al.conj(), be.conj());
    let (astar, bstar) = (s.y[1].conj(), s.y[2].conj());
    let e = s.e();
    let (r, lam) = (ex.r, ex.lambda);
    let (p1, p2, g1, g2) = (ex.phi_d1, ex.phi_d2, ex.g_d1, ex.g_d2);
    let pref = 2.0 * s.b_bar * s.tau;
    let g20_like = |al: Complex64, be: Complex64, e: Complex64| {
        pref * (al * al / 2.0 * p2
            + al * p1
            + k.a_hat0 * e
            + astar * k.k8
            + astar * be * be * r * r * k.k8
            - al * astar * g1
            + be * astar * r * lam * g2
            - al * astar * be * r * g1
            + bstar * k.k9
            + be * be * bstar * k.k10
            + be * bstar * k.k11
            - be * bstar * ex.eta_xi * e)
    };
    let g11 = pref
        * (al * alb / 2.0 * p2
            + al.re * p1
            + e.conj().re * k.a_hat0
            + astar * k.k8
            + be * beb * astar * r * r * k.k8
            - astar * al.re * g1
            + astar * be.re * r * lam * g2
            - astar * (al * be).re * r * g1
            + bstar * k.k9
            + be * beb * bstar * k.k10
            + bstar * be.re * k.k11
            - 2.0 * bstar * ex.eta_xi * (be * e.conj()).re);
    GQuadratic {
        g20: g20_like(al, be, e),
        g11,
        g02: g20_like(alb, beb, e.conj()),
    }
}

/// `g20`, `g11`, `g02` from the Hessian of the vector field.
pub fn g_derived(s: &Setup) -> GQuadratic {
    let x = s.mode();
    let xb = x.map(|z| z.conj());
    GQuadratic {
        g20: s.project(&s.ex.quadratic(&x, &x)),
        g11: s.project(&s.ex.quadratic(&x, &xb)),
        g02: s.project(&s.ex.quadratic(&xb, &xb)),
    }
}

/// Right-hand sides of the `E1` and `E2` systems in printed form.
fn e_rhs_printed(s: &Setup) -> (CVec3, CVec3) {
    let ex = &s.ex;
    let k = &ex.k;
    let (al, be) = (s.q0[1], s.q0[2]);
    let (alb, beb) = (al.conj(), be.conj());
    let e = s.e();
    let (r, lam, p1, p2, g1, g2) = (ex.r, ex.lambda, ex.phi_d1, ex.phi_d2, ex.g_d1, ex.g_d2);
    let rhs1 = [
        al * al * p2 + 2.0 * al * p1 + 2.0 * k.a_hat0 * e,
        2.0 * k.k8 + 2.0 * r * r * be * be * k.k8 - 2.0 * al * g1 + 2.0 * r * lam * be * g2
            - 2.0 * r * al * be * g1,
        2.0 * k.k9 + 2.0 * be * be * k.k10 + 2.0 * be * k.k11 - 2.0 * be * ex.eta_xi * e,
    ];
    let rhs2 = [
        al * alb * p2 + 2.0 * p1 * al.re + 2.0 * k.a_hat0 * e.conj().re,
        2.0 * k.k8 * (1.0 + be * beb * r * r) - 2.0 * g1 * al.re + 2.0 * r * lam * g2 * be.re
            - 2.0 * r * (al * be).re * g1,
        2.0 * k.k9 + 2.0 * be * beb * k.k10 + 2.0 * be.re * k.k11
            - 2.0 * ex.eta_xi * (be * e.conj()).re,
    ];
    (rhs1, rhs2)
}

/// Matrices of the `E1` and `E2` systems: `2 i mu I - J0 - e^{-2 i mu tau} J_tau`
/// and `J0 + J_tau`.
pub fn e_matrices(k: &KConstants, mu: f64, tau: f64) -> (CMat3, CMat3) {
    let jp = jacobians(k);
    let e2 = (-2.0 * I * mu * tau).exp();
    let mut m1 = char_matrix(&jp.j0, &jp.j_tau, e2);
    for (i, row) in m1.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { 2.0 * I * mu - *v } else { -*v };
        }
    }
    (m1, linalg::to_complex(&linalg::add(&jp.j0, &jp.j_tau)))
}

/// Second-order center-manifold corrections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corrections {
    pub e1: Solve3,
    pub e2: Solve3,
    /// `W20` at `theta = 0` and `theta = -1`.
    pub w20_at: [CVec3; 2],
    pub w11_at: [CVec3; 2],
}

impl Serialize for Solve3 {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = ser.serialize_struct("Solve3", 3)?;
        st.serialize_field("x", &self.x.map(|z| [z.re, z.im]))?;
        st.serialize_field("residual", &self.residual)?;
        st.serialize_field("condition", &self.condition)?;
        st.end()
    }
}

pub fn w20(s: &Setup, g: &GQuadratic, e1: &CVec3, theta: f64) -> CVec3 {
    let mt = s.mu_tau();
    let a = I * g.g20 / mt * (I * mt * theta).exp();
    let b = I * g.g02.conj() / (3.0 * mt) * (-I * mt * theta).exp();
    let cc = (2.0 * I * mt * theta).exp();
    std::array::from_fn(|i| a * s.q0[i] + b * s.q0[i].conj() + cc * e1[i])
}

pub fn w11(s: &Setup, g: &GQuadratic, e2: &CVec3, theta: f64) -> CVec3 {
    let mt = s.mu_tau();
    let a = -I * g.g11 / mt * (I * mt * theta).exp();
    let b = I * g.g11.conj() / mt * (-I * mt * theta).exp();
    std::array::from_fn(|i| a * s.q0[i] + b * s.q0[i].conj() + e2[i])
}

/// Solves the `E1` and `E2` systems for the given route and evaluates
/// `W20`, `W11` at `theta = 0, -1`.
pub fn nf_linear_systems(s: &Setup, g: &GQuadratic, route: Route) -> Result<Corrections> {
    let (rhs1, rhs2) = match route {
        Route::Printed => e_rhs_printed(s),
        Route::Derived | Route::Complete => {
            let x = s.mode();
            let xb = x.map(|z| z.conj());
            (s.ex.quadratic(&x, &x), s.ex.quadratic(&x, &xb))
        }
    };
    let (m1, m2) = e_matrices(&s.ex.k, s.mu, s.tau);
    let e1 = linalg::solve(&m1, &rhs1, "E1 system")?;
    let e2 = linalg::solve(&m2, &rhs2.map(|z| -z), "E2 system")?;
    Ok(Corrections {
        w20_at: [w20(s, g, &e1.x, 0.0), w20(s, g, &e1.x, -1.0)],
        w11_at: [w11(s, g, &e2.x, 0.0), w11(s, g, &e2.x, -1.0)],
        e1,
        e2,
    })
}

/// One bracketed group of `g21`: a coefficient times a combination of `W`
/// components, in printed and in derived form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub group: &'static str,
    pub printed: [f64; 2],
    pub derived: [f64; 2],
    pub abs_diff: f64,
    pub agrees: bool,
}

struct Group {
    name: &'static str,
    printed: Complex64,
    derived: Complex64,
}

/// Term-by-term `g21` brackets (without the `tau Bbar` prefactor).
fn g21_groups(s: &Setup, corr: &Corrections) -> Vec<Group> {
    let ex = &s.ex;
    let k = &ex.k;
    let (al, be) = (s.q0[1], s.q0[2]);
    let (alb, beb) = (al.conj(), be.conj());
    let (astar, bstar) = (s.y[1].conj(), s.y[2].conj());
    let e = s.e();
    let ep = e.conj();
    let (r, lam) = (ex.r, ex.lambda);
    let [a0, a1] = corr.w20_at;
    let [c0, c1] = corr.w11_at;
    let same = |name, v: Complex64| Group {
        name,
        printed: v,
        derived: v,
    };
    let phi2_bracket = alb * a0[1] + 2.0 * al * c0[1];
    vec![
        Group {
            name: "Phi''",
            printed: ex.phi_d2 * phi2_bracket,
            derived: ex.omega * ex.phi_d2 * phi2_bracket,
        },
        same(
            "Phi'",
            ex.phi_d1 * (alb * a0[0] + a0[1] + 2.0 * al * c0[0] + 2.0 * c0[1]),
        ),
        same(
            "a_hat0",
            k.a_hat0 * (2.0 * c1[0] + a1[0] + ep * a0[0] + 2.0 * e * c0[0]),
        ),
        same("K8", astar * k.k8 * (2.0 * a0[0] + 4.0 * c0[0])),
        same(
            "r^2 K8",
            astar * r * r * k.k8 * (2.0 * beb * a0[2] + 4.0 * be * c0[2]),
        ),
        Group {
            name: "g'",
            printed: -astar * ex.g_d1 * (alb * a0[0] + a0[0] + 2.0 * al * c0[0] + 2.0 * a0[0]),
            derived: -astar * ex.g_d1 * (alb * a0[0] + a0[1] + 2.0 * al * c0[0] + 2.0 * c0[1]),
        },
        Group {
            name: "r lambda g''",
            printed: astar * lam * r * ex.g_d2 * (3.0 * a0[0] + c0[1]),
            derived: astar
                * lam
                * r
                * ex.g_d2
                * (a0[2] + beb * a0[0] + 2.0 * c0[2] + 2.0 * be * c0[0]),
        },
        Group {
            name: "r g'",
            printed: -astar
                * r
                * ex.g_d1
                * (beb * a0[1] + al * a0[2] + 2.0 * be * c0[2] + 2.0 * al * c0[2]),
            derived: -astar
                * r
                * ex.g_d1
                * (alb * a0[2] + beb * a0[1] + 2.0 * al * c0[2] + 2.0 * be * c0[1]),
        },
        same("K9", bstar * k.k9 * (2.0 * a0[0] + 4.0 * c0[0])),
        same(
            "K10",
            bstar * k.k10 * (2.0 * beb * a0[2] + 4.0 * be * c0[2]),
        ),
        same(
            "K11",
            bstar * k.k11 * (beb * a0[0] + a0[2] + 2.0 * be * c0[0] + 2.0 * c0[2]),
        ),
        same(
            "eta_p xi",
            -bstar * ex.eta_xi * (beb * a1[0] + ep * a0[2] + 2.0 * be * c1[0] + 2.0 * e * c0[2]),
        ),
    ]
}

/// `g21` as the sum of printed groups.
pub fn g21_printed(s: &Setup, corr: &Corrections) -> Complex64 {
    s.b_bar
        * s.tau
        * g21_groups(s, corr)
            .iter()
            .map(|g| g.printed)
            .sum::<Complex64>()
}

/// `W` evaluated as a point in `(omega, lambda, b, omega(t - tau))`.
fn w_point(at: &[CVec3; 2]) -> C4 {
    [at[0][0], at[0][1], at[0][2], at[1][0]]
}

/// `g21 = tau Bbar ybar . [D^2F(xbar, W20) + 2 D^2F(x, W11)]`, plus
/// `D^3F(x, x, xbar)` when `with_cubic`.
pub fn g21_derived(s: &Setup, corr: &Corrections, with_cubic: bool) -> Complex64 {
    let x = s.mode();
    let xb = x.map(|z| z.conj());
    let q1 = s.ex.quadratic(&xb, &w_point(&corr.w20_at));
    let q2 = s.ex.quadratic(&x, &w_point(&corr.w11_at));
    let mut v: CVec3 = std::array::from_fn(|i| q1[i] + 2.0 * q2[i]);
    if with_cubic {
        let cu = s.ex.cubic(&x, &x, &xb);
        v = std::array::from_fn(|i| v[i] + cu[i]);
    }
    s.project(&v)
}

/// Printed versus derived bracket of every `g21` group, evaluated on the same
/// `W20`, `W11`.
pub fn discrepancy_log(s: &Setup, corr: &Corrections) -> Vec<Discrepancy> {
    let pref = s.b_bar * s.tau;
    g21_groups(s, corr)
        .into_iter()
        .map(|g| {
            let (p, d) = (pref * g.printed, pref * g.derived);
            let abs_diff = (p - d).norm();
            Discrepancy {
                group: g.name,
                printed: [p.re, p.im],
                derived: [d.re, d.im],
                abs_diff,
                agrees: abs_diff <= 1e-9 * p.norm().max(d.norm()).max(1.0),
            }
        })
        .collect()
}

/// First Lyapunov quantity `c1(0)`.
pub fn c1(g: &GQuadratic, g21: Complex64, mu: f64, tau: f64) -> Complex64 {
    I / (2.0 * mu * tau) * (g.g20 * g.g11 - 2.0 * g.g11.norm_sqr() - g.g02.norm_sqr() / 3.0)
        + g21 / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Supercritical,
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitStability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PeriodTrend {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalFormResult {
    pub c1: Complex64,
    pub mu_bar2: f64,
    pub beta2: f64,
    pub t2: f64,
    pub direction: Direction,
    pub orbit_stability: OrbitStability,
    pub period_trend: PeriodTrend,
}

/// Direction, stability and period trend from `c1(0)` and the root velocity
/// `x'(tau0)`.
pub fn hopf_classification(c1: Complex64, x_prime: Complex64, mu: f64) -> Result<NormalFormResult> {
    if x_prime.re.abs() < SINGULAR_EPS {
        return Err(Error::Degenerate(format!(
            "Re x'(tau0) = {:e}, crossing speed vanishes",
            x_prime.re
        )));
    }
    let mu_bar2 = -c1.re / x_prime.re;
    let beta2 = 2.0 * c1.re;
    let t2 = -(c1.im + mu_bar2 * x_prime.im) / mu;
    Ok(NormalFormResult {
        c1,
        mu_bar2,
        beta2,
        t2,
        direction: if mu_bar2 > 0.0 {
            Direction::Supercritical
        } else {
            Direction::Subcritical
        },
        orbit_stability: if beta2 < 0.0 {
            OrbitStability::Stable
        } else {
            OrbitStability::Unstable
        },
        period_trend: if t2 > 0.0 {
            PeriodTrend::Increasing
        } else {
            PeriodTrend::Decreasing
        },
    })
}

/// Everything one route produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteResult {
    pub route: Route,
    pub g: GQuadratic,
    pub g21: Complex64,
    pub corrections: Corrections,
    pub result: NormalFormResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalFormReport {
    pub mu: f64,
    pub tau: f64,
    pub eigen: Eigenvectors,
    pub b_bar: Complex64,
    /// `Bbar` times the conjugated adjoint, `(Bbar, Bbar w2bar, Bbar w3bar)`.
    pub qstar0: CVec3,
    /// `<q*, q>` and `<q*, qbar>` after normalization.
    pub pairing: [Complex64; 2],
    pub velocity: RootVelocity,
    /// Printed, derived, complete, in that order.
    pub routes: Vec<RouteResult>,
    /// Printed versus derived `g21` groups, evaluated on the printed `W`.
    pub discrepancies: Vec<Discrepancy>,
}

impl NormalFormReport {
    pub fn route(&self, route: Route) -> &RouteResult {
        self.routes
            .iter()
            .find(|r| r.route == route)
            .expect("all routes computed")
    }

    /// The route whose result is reported as the classification.
    pub fn primary(&self) -> &RouteResult {
        self.route(Route::Printed)
    }
}

pub fn setup(model: &Model, eq: &Equilibrium, mu: f64, tau: f64) -> Result<(Setup, Eigenvectors)> {
    let ex = Expansion::at(model, eq)?;
    let ev = eigenvectors(&ex.k, mu, tau)?;
    let b_bar = normalize(&ev, &ex.k, mu, tau)?;
    Ok((
        Setup {
            ex,
            mu,
            tau,
            q0: ev.q0,
            y: ev.y,
            b_bar,
        },
        ev,
    ))
}

fn run_route(s: &Setup, route: Route, velocity: &RootVelocity) -> Result<RouteResult> {
    let g = match route {
        Route::Printed => g_printed(s),
        Route::Derived | Route::Complete => g_derived(s),
    };
    let corrections = nf_linear_systems(s, &g, route)?;
    let g21 = match route {
        Route::Printed => g21_printed(s, &corrections),
        Route::Derived => g21_derived(s, &corrections, false),
        Route::Complete => g21_derived(s, &corrections, true),
    };
    let c = c1(&g, g21, s.mu, s.tau);
    Ok(RouteResult {
        route,
        g,
        g21,
        corrections,
        result: hopf_classification(c, velocity.finite_difference, s.mu)?,
    })
}

/// Full normal-form analysis at the critical pair `(mu, tau)`.
pub fn analyze(model: &Model, eq: &Equilibrium, mu: f64, tau: f64) -> Result<NormalFormReport> {
    let (s, eigen) = setup(model, eq, mu, tau)?;
    let velocity = spectrum::root_velocity(&s.ex.k, mu, tau, 0.005)?;
    let routes = Route::ALL
        .iter()
        .map(|&r| run_route(&s, r, &velocity))
        .collect::<Result<Vec<_>>>()?;
    let qstar0 = linalg::scale(&linalg::conj(&s.y), s.b_bar);
    let qs = linalg::scale(&s.y, s.b_bar.conj());
    let mt = I * s.mu_tau();
    let pairing = [
        bilinear(&qs, mt, &s.q0, mt, &s.ex.k, tau),
        bilinear(&qs, mt, &linalg::conj(&s.q0), -mt, &s.ex.k, tau),
    ];
    let discrepancies = discrepancy_log(&s, &routes[0].corrections);
    Ok(NormalFormReport {
        mu,
        tau,
        eigen,
        b_bar: s.b_bar,
        qstar0,
        pairing,
        velocity,
        routes,
        discrepancies,
    })
}

/// Locates the critical pair of an equilibrium and runs [`analyze`] there.
pub fn analyze_at_tau0(model: &Model, eq: &Equilibrium, j_max: usize) -> Result<NormalFormReport> {
    let k = k_constants(model, eq)?;
    let hopf = spectrum::analyze(&k, j_max)?;
    let delays = hopf.delays.ok_or_else(|| {
        Error::Hypothesis(
            "no critical delay: the equilibrium is stable for every delay".to_string(),
        )
    })?;
    analyze(model, eq, delays.mu0, delays.tau0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::find_e4;
    use crate::ModelParams;

    const MU0: f64 = 2.1567353704324246;
    const TAU0: f64 = 0.8299801095930162;

    fn baseline() -> (Model, Equilibrium) {
        let m = Model::baseline();
        let eq = find_e4(&m).unwrap().remove(1);
        (m, eq)
    }

    fn field(m: &Model, v: [f64; 4]) -> [f64; 3] {
        let p = m.params();
        let [w, l, b, d] = v;
        let pi = m.profit_share(w, b);
        let zd = m.inflation(d);
        let g = m.growth(pi);
        [
            w * (m.phillips(l).unwrap() - p.alpha - (1.0 - p.gamma) * zd),
            l * (g - p.alpha - p.beta),
            m.kappa(pi) - pi - b * (zd + g),
        ]
    }

    fn unit(i: usize) -> C4 {
        std::array::from_fn(|j| c(if i == j { 1.0 } else { 0.0 }, 0.0))
    }

    #[test]
    fn eigenvectors_and_normalization() {
        let (m, eq) = baseline();
        let (s, ev) = setup(&m, &eq, MU0, TAU0).unwrap();
        assert!(ev.eigen_residual < 1e-8);
        assert!(ev.adjoint_residual < 1e-8);
        let rep = analyze(&m, &eq, MU0, TAU0).unwrap();
        assert!((rep.pairing[0] - 1.0).norm() < 1e-10);
        assert!(rep.pairing[1].norm() < 1e-8);
        // the closed-form denominator relies on unit first components
        assert_eq!(ev.q0[0], c(1.0, 0.0));
        assert_eq!(ev.y[0], c(1.0, 0.0));
        let qs = linalg::scale(&s.y, s.b_bar.conj());
        let mt = I * MU0 * TAU0;
        let pair = bilinear(&qs, mt, &s.q0, mt, &s.ex.k, TAU0);
        assert!((pair - 1.0).norm() < 1e-10);
    }

    #[test]
    fn zero_k1_is_singular() {
        let (m, eq) = baseline();
        let mut k = k_constants(&m, &eq).unwrap();
        k.k1 = 0.0;
        assert!(matches!(
            eigenvectors(&k, MU0, TAU0),
            Err(Error::Singular { what: "K1", .. })
        ));
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let (m, eq) = baseline();
        let ex = Expansion::at(&m, &eq).unwrap();
        let x0 = [
            eq.omega_star,
            eq.lambda_star.value().unwrap(),
            eq.b_star,
            eq.omega_star,
        ];
        for i in 0..4 {
            for j in 0..4 {
                let d = |h: f64| -> [f64; 3] {
                    let f = |si: f64, sj: f64| {
                        let mut v = x0;
                        v[i] += si * h;
                        v[j] += sj * h;
                        field(&m, v)
                    };
                    let (pp, pm, mp, mm) = (f(1.0, 1.0), f(1.0, -1.0), f(-1.0, 1.0), f(-1.0, -1.0));
                    std::array::from_fn(|row| {
                        (pp[row] - pm[row] - mp[row] + mm[row]) / (4.0 * h * h)
                    })
                };
                let (coarse, fine) = (d(2e-4), d(1e-4));
                let an = ex.quadratic(&unit(i), &unit(j));
                for row in 0..3 {
                    let fd = (4.0 * fine[row] - coarse[row]) / 3.0;
                    let a = an[row].re;
                    assert!(
                        (fd - a).abs() <= 1e-5 * a.abs().max(1.0),
                        "d2 F{row}/d{i}d{j}: fd {fd}, analytic {a}"
                    );
                }
            }
        }
    }

    #[test]
    fn third_derivatives_match_finite_differences() {
        let (m, eq) = baseline();
        let ex = Expansion::at(&m, &eq).unwrap();
        let x0 = [
            eq.omega_star,
            eq.lambda_star.value().unwrap(),
            eq.b_star,
            eq.omega_star,
        ];
        let hess_at = |i: usize, s: f64, j: usize, l: usize| {
            let mut v = x0;
            v[i] += s;
            let mut e = eq.clone();
            e.omega_star = v[0];
            e.lambda_star = crate::equilibria::EmploymentRate::Fixed(v[1]);
            e.b_star = v[2];
            e.pi_star = m.profit_share(v[0], v[2]);
            Expansion::at(&m, &e).unwrap().quadratic(&unit(j), &unit(l))
        };
        // the Hessian does not depend on the delayed coordinate
        for i in 0..3 {
            for j in 0..4 {
                for l in 0..4 {
                    let d = |h: f64| -> [f64; 3] {
                        let (p, mm) = (hess_at(i, h, j, l), hess_at(i, -h, j, l));
                        std::array::from_fn(|row| (p[row].re - mm[row].re) / (2.0 * h))
                    };
                    let (coarse, fine) = (d(2e-4), d(1e-4));
                    let an = ex.cubic(&unit(i), &unit(j), &unit(l));
                    for row in 0..3 {
                        let fd = (4.0 * fine[row] - coarse[row]) / 3.0;
                        let a = an[row].re;
                        assert!(
                            (fd - a).abs() <= 1e-4 * a.abs().max(1.0),
                            "d3 F{row}/d{i}d{j}d{l}: fd {fd}, analytic {a}"
                        );
                    }
                }
            }
        }
        for j in 0..4 {
            for l in 0..4 {
                let an = ex.cubic(&unit(3), &unit(j), &unit(l));
                assert!(an.iter().all(|c| c.norm() == 0.0));
            }
        }
    }

    #[test]
    fn printed_quadratic_coefficients_are_symmetric() {
        let (m, eq) = baseline();
        let (s, _) = setup(&m, &eq, MU0, TAU0).unwrap();
        let g = g_printed(&s);
        let mut sc = s;
        sc.q0 = linalg::conj(&s.q0);
        sc.tau = s.tau;
        sc.mu = -s.mu;
        let gc = g_printed(&sc);
        assert!((gc.g20 - g.g02).norm() < 1e-10 * g.g02.norm());
    }

    #[test]
    fn derived_coefficients_match_printed_where_print_is_consistent() {
        // printed and derived g20/g02 differ only through the Phi'' factor
        let (m, eq) = baseline();
        let (s, _) = setup(&m, &eq, MU0, TAU0).unwrap();
        let mut sp = s;
        sp.ex.phi_d2 *= s.ex.omega;
        let (gp, gd) = (g_printed(&sp), g_derived(&s));
        assert!((gp.g20 - gd.g20).norm() < 1e-9 * gd.g20.norm());
        assert!((gp.g02 - gd.g02).norm() < 1e-9 * gd.g02.norm());
    }

    #[test]
    fn grouped_derivation_equals_generic_form() {
        let (m, eq) = baseline();
        let (s, _) = setup(&m, &eq, MU0, TAU0).unwrap();
        let g = g_derived(&s);
        let corr = nf_linear_systems(&s, &g, Route::Derived).unwrap();
        let grouped: Complex64 = s.b_bar
            * s.tau
            * g21_groups(&s, &corr)
                .iter()
                .map(|g| g.derived)
                .sum::<Complex64>();
        let generic = g21_derived(&s, &corr, false);
        assert!((grouped - generic).norm() < 1e-9 * generic.norm());
    }

    #[test]
    fn linear_systems_and_w_symmetry() {
        let (m, eq) = baseline();
        let (s, _) = setup(&m, &eq, MU0, TAU0).unwrap();
        for route in Route::ALL {
            let g = if route == Route::Printed {
                g_printed(&s)
            } else {
                g_derived(&s)
            };
            let corr = nf_linear_systems(&s, &g, route).unwrap();
            assert!(corr.e1.residual < 1e-10 && corr.e2.residual < 1e-10);
            for th in [0.0, -1.0, -0.3] {
                let w = w11(&s, &g, &corr.e2.x, th);
                assert!(w.iter().all(|z| z.im.abs() < 1e-10), "{w:?}");
            }
        }
        let (_, m2) = e_matrices(&s.ex.k, MU0, TAU0);
        let jp = jacobians(&s.ex.k);
        let sum = linalg::add(&jp.j0, &jp.j_tau);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m2[i][j].re, sum[i][j]);
            }
        }
    }

    #[test]
    fn classification_definitions() {
        let r = hopf_classification(c(-2.0, 3.0), c(0.5, 0.1), 2.0).unwrap();
        assert_eq!(r.beta2, 2.0 * r.c1.re);
        assert_eq!(r.direction, Direction::Supercritical);
        assert_eq!(r.orbit_stability, OrbitStability::Stable);
        assert!(matches!(
            hopf_classification(c(1.0, 0.0), c(0.0, 1.0), 2.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn baseline_routes() {
        let (m, eq) = baseline();
        let rep = analyze_at_tau0(&m, &eq, 3).unwrap();
        assert!((rep.tau - TAU0).abs() < 1e-12);
        assert!(rep.velocity.finite_difference.re > 0.0);
        for rr in &rep.routes {
            let r = rr.result;
            assert_eq!(r.beta2, 2.0 * r.c1.re);
            assert_eq!(r.mu_bar2.signum(), -r.c1.re.signum());
        }
        let d = rep.route(Route::Derived).result.c1;
        assert!((d - c(-253.0, -1883.5)).norm() < 1.0, "{d}");
        let p = rep.primary().result.c1;
        assert!((p - c(-303.97, -2336.15)).norm() < 0.1, "{p}");
        let full = rep.route(Route::Complete).result.c1;
        assert!((full - c(-68.2, -465.9)).norm() < 1.0, "{full}");
        let bad: Vec<&str> = rep
            .discrepancies
            .iter()
            .filter(|d| !d.agrees)
            .map(|d| d.group)
            .collect();
        assert_eq!(bad, ["Phi''", "g'", "r lambda g''", "r g'"]);
    }

    #[test]
    fn other_parameters_run() {
        let m = Model::new(ModelParams {
            gamma: 0.6,
            ..ModelParams::baseline()
        })
        .unwrap();
        let eqs = find_e4(&m).unwrap();
        if let Some(eq) = eqs.iter().find(|e| e.admissible) {
            if let Ok(rep) = analyze_at_tau0(&m, eq, 3) {
                assert!(rep.eigen.eigen_residual < 1e-8);
                assert!((rep.pairing[0] - 1.0).norm() < 1e-10);
            }
        }
    }
}
