//! Model constants and the behavioural functions of the Keen model with
//! inflation: the Phillips curve, investment, growth and inflation.
//!
//! The functional forms are fixed:
//!
//! ```text
//! Phi(l)   = phi1 / (1 - l)^2 - phi0
//! kappa(p) = kappa0 + exp(kappa1 + kappa2 * p)
//! g(p)     = kappa(p) / nu - delta
//! Z(w)     = eta_p * (xi * w - 1)
//! ```

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scalar constants of the model. Rates are per unit time, everything else is
/// dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Productivity growth rate.
    pub alpha: f64,
    /// Workforce growth rate.
    pub beta: f64,
    /// Depreciation rate.
    pub delta: f64,
    /// Capital-to-output ratio.
    pub nu: f64,
    /// Interest rate.
    pub r: f64,
    /// Inflation pass-through into wages.
    pub gamma: f64,
    /// Price adjustment speed.
    pub eta_p: f64,
    /// Markup factor.
    pub xi: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl ModelParams {
    /// The worked example used throughout the tests and the bundled
    /// `configs/baseline.json`.
    pub const fn baseline() -> Self {
        Self {
            alpha: 0.025,
            beta: 0.02,
            delta: 0.01,
            nu: 3.0,
            r: 0.03,
            gamma: 0.8,
            eta_p: 1.4,
            xi: 1.2,
            phi0: 0.04340277,
            phi1: 0.00006944,
            kappa0: -0.0065,
            kappa1: -5.0,
            kappa2: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("nu", self.nu),
            ("r", self.r),
            ("gamma", self.gamma),
            ("eta_p", self.eta_p),
            ("xi", self.xi),
            ("phi0", self.phi0),
            ("phi1", self.phi1),
            ("kappa0", self.kappa0),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        let checks: [(bool, &str); 8] = [
            (self.nu > 0.0, "nu must be positive"),
            (self.eta_p > 0.0, "eta_p must be positive"),
            (self.xi >= 1.0, "xi must be at least 1"),
            (
                (0.0..=1.0).contains(&self.gamma),
                "gamma must lie in [0, 1]",
            ),
            (self.phi1 > 0.0, "phi1 must be positive"),
            (self.kappa2 > 0.0, "kappa2 must be positive"),
            (
                self.kappa0 < self.nu * (self.alpha + self.beta + self.delta),
                "kappa0 must be below nu * (alpha + beta + delta)",
            ),
            (
                self.phi1 - self.phi0 < self.alpha,
                "Phillips curve at zero employment must be below alpha",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidParams((*msg).to_string())),
            None => Ok(()),
        }
    }
}

/// Point in the state space: wage share, employment rate and debt ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub omega: f64,
    pub lambda: f64,
    pub b: f64,
}

impl State {
    pub const fn new(omega: f64, lambda: f64, b: f64) -> Self {
        Self { omega, lambda, b }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.omega, self.lambda, self.b]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// `self + h * rate`, the Runge-Kutta stage update.
    pub fn add_scaled(self, h: f64, rate: State) -> State {
        State::new(
            self.omega + h * rate.omega,
            self.lambda + h * rate.lambda,
            self.b + h * rate.b,
        )
    }

    pub fn distance(self, other: State) -> f64 {
        let d = [
            self.omega - other.omega,
            self.lambda - other.lambda,
            self.b - other.b,
        ];
        d.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.omega.is_finite() && self.lambda.is_finite() && self.b.is_finite()
    }
}

/// Validated model parameters with the behavioural functions attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    params: ModelParams,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn baseline() -> Self {
        Self {
            params: ModelParams::baseline(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Profit share `1 - omega - r b`.
    pub fn profit_share(&self, omega: f64, b: f64) -> f64 {
        1.0 - omega - self.params.r * b
    }

    fn check_employment(func: &'static str, lambda: f64) -> Result<()> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::Domain {
                func,
                arg: lambda,
                reason: "employment rate must lie in [0, 1)",
            });
        }
        Ok(())
    }

    pub fn phillips(&self, lambda: f64) -> Result<f64> {
        Self::check_employment("phillips", lambda)?;
        let p = &self.params;
        Ok(p.phi1 / (1.0 - lambda).powi(2) - p.phi0)
    }

    pub fn phillips_d1(&self, lambda: f64) -> Result<f64> {
        Self::check_employment("phillips_d1", lambda)?;
        Ok(2.0 * self.params.phi1 / (1.0 - lambda).powi(3))
    }

    pub fn phillips_d2(&self, lambda: f64) -> Result<f64> {
        Self::check_employment("phillips_d2", lambda)?;
        Ok(6.0 * self.params.phi1 / (1.0 - lambda).powi(4))
    }

    pub fn phillips_d3(&self, lambda: f64) -> Result<f64> {
        Self::check_employment("phillips_d3", lambda)?;
        Ok(24.0 * self.params.phi1 / (1.0 - lambda).powi(5))
    }

    /// Inverse Phillips curve; defined for `y > phillips(0)` so the result lands in `(0, 1)`.
    pub fn phillips_inv(&self, y: f64) -> Result<f64> {
        let p = &self.params;
        if y.is_nan() || y <= p.phi1 - p.phi0 {
            return Err(Error::Domain {
                func: "phillips_inv",
                arg: y,
                reason: "value must exceed the Phillips curve at zero employment",
            });
        }
        Ok(1.0 - (p.phi1 / (y + p.phi0)).sqrt())
    }

    fn kappa_exp(&self, pi: f64) -> f64 {
        (self.params.kappa1 + self.params.kappa2 * pi).exp()
    }

    pub fn kappa(&self, pi: f64) -> f64 {
        self.params.kappa0 + self.kappa_exp(pi)
    }

    pub fn kappa_d1(&self, pi: f64) -> f64 {
        self.params.kappa2 * self.kappa_exp(pi)
    }

    pub fn kappa_d2(&self, pi: f64) -> f64 {
        self.params.kappa2.powi(2) * self.kappa_exp(pi)
    }

    pub fn kappa_d3(&self, pi: f64) -> f64 {
        self.params.kappa2.powi(3) * self.kappa_exp(pi)
    }

    pub fn kappa_inv(&self, y: f64) -> Result<f64> {
        let p = &self.params;
        if y.is_nan() || y <= p.kappa0 {
            return Err(Error::Domain {
                func: "kappa_inv",
                arg: y,
                reason: "value must exceed kappa0",
            });
        }
        Ok(((y - p.kappa0).ln() - p.kappa1) / p.kappa2)
    }

    pub fn growth(&self, pi: f64) -> f64 {
        self.kappa(pi) / self.params.nu - self.params.delta
    }

    pub fn growth_d1(&self, pi: f64) -> f64 {
        self.kappa_d1(pi) / self.params.nu
    }

    pub fn growth_d2(&self, pi: f64) -> f64 {
        self.kappa_d2(pi) / self.params.nu
    }

    pub fn growth_d3(&self, pi: f64) -> f64 {
        self.kappa_d3(pi) / self.params.nu
    }

    pub fn growth_inv(&self, y: f64) -> Result<f64> {
        self.kappa_inv(self.params.nu * (y + self.params.delta))
    }

    /// Inflation rate `Z(omega) = eta_p (xi omega - 1)`.
    pub fn inflation(&self, omega: f64) -> f64 {
        self.params.eta_p * (self.params.xi * omega - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn phillips_at_zero() {
        let m = Model::baseline();
        assert!((m.phillips(0.0).unwrap() - (-0.04333333)).abs() < 1e-12);
    }

    #[test]
    fn phillips_increasing_with_pole() {
        let m = Model::baseline();
        for l in [0.1, 0.5, 0.9] {
            assert!(m.phillips_d1(l).unwrap() > 0.0);
        }
        assert!(m.phillips(0.999).unwrap() > 1e4 * m.phillips(0.9).unwrap());
    }

    #[test]
    fn phillips_domain_errors() {
        let m = Model::baseline();
        assert!(matches!(m.phillips(1.0), Err(Error::Domain { .. })));
        assert!(matches!(m.phillips(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(m.phillips_d2(1.5), Err(Error::Domain { .. })));
        let phi_zero = m.phillips(0.0).unwrap();
        assert!(matches!(
            m.phillips_inv(phi_zero),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn phillips_inverse_examples() {
        let m = Model::baseline();
        for l in [0.5, 0.968365] {
            let y = m.phillips(l).unwrap();
            assert!((m.phillips_inv(y).unwrap() - l).abs() < 1e-12);
        }
        let p = m.params();
        let y = p.alpha + (1.0 - p.gamma) * 0.0049168;
        assert!((m.phillips_inv(y).unwrap() - 0.968365).abs() < 1e-6);
    }

    #[test]
    fn kappa_and_growth_inverse() {
        let m = Model::baseline();
        let p = *m.params();
        let pi = m.kappa_inv(p.nu * (p.alpha + p.beta + p.delta)).unwrap();
        // 1 - omega* - r b* with the reported equilibrium (0.836260, 0.968365, 0.063277)
        let cross = 1.0 - 0.836260 - p.r * 0.063277;
        assert!((pi - cross).abs() < 2e-6, "{pi} vs {cross}");
        assert!((pi - 0.161842).abs() < 1e-6);

        assert!(rel(m.kappa(m.kappa_inv(0.1).unwrap()), 0.1) < 1e-12);
        assert!(matches!(m.kappa_inv(p.kappa0), Err(Error::Domain { .. })));

        let target = p.alpha + p.beta;
        let g_inv = m.growth_inv(target).unwrap();
        assert!((m.growth(g_inv) - target).abs() < 1e-12);
        assert!((g_inv - 0.161842).abs() < 1e-6);
        assert_eq!(m.growth_d1(0.161842), m.kappa_d1(0.161842) / p.nu);
    }

    #[test]
    fn kappa_second_derivative_identity() {
        let m = Model::baseline();
        for pi in [0.0, 0.16, 0.5] {
            assert!(rel(m.kappa_d2(pi), m.params().kappa2 * m.kappa_d1(pi)) < 1e-15);
        }
    }

    #[test]
    fn growth_composition_is_exact() {
        let m = Model::baseline();
        let p = m.params();
        for pi in [-0.3, 0.0, 0.1, 0.16, 0.4] {
            assert_eq!(m.growth(pi) - (m.kappa(pi) / p.nu - p.delta), 0.0);
        }
    }

    #[test]
    fn inflation_readouts() {
        let m = Model::baseline();
        assert!((m.inflation(0.836260) - 0.0049).abs() < 1e-4);
        assert!((m.inflation(0.808446) - (-0.0418)).abs() < 1e-4);
        assert!(m.inflation(1.0 / m.params().xi).abs() < 1e-15);
        // affine with slope eta_p * xi
        let slope = (m.inflation(0.7) - m.inflation(0.2)) / 0.5;
        assert!(rel(slope, m.params().eta_p * m.params().xi) < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_params() {
        let base = ModelParams::baseline();
        assert!(Model::new(base).is_ok());
        let cases = [
            ModelParams { nu: 0.0, ..base },
            ModelParams {
                eta_p: -1.0,
                ..base
            },
            ModelParams { xi: 0.9, ..base },
            ModelParams { gamma: 1.2, ..base },
            ModelParams { phi1: 0.0, ..base },
            ModelParams {
                kappa2: 0.0,
                ..base
            },
            ModelParams {
                kappa0: 1.0,
                ..base
            },
            ModelParams {
                phi0: -0.05,
                ..base
            },
            ModelParams {
                r: f64::NAN,
                ..base
            },
        ];
        for bad in cases {
            assert!(
                matches!(Model::new(bad), Err(Error::InvalidParams(_))),
                "{bad:?}"
            );
        }
    }
}
