//! Method-of-steps integration of the delayed system with classic RK4.
//!
//! The step `dt` divides the delay, so full-step stage reads of `omega(t - tau)`
//! land on stored nodes. Half-step reads use cubic Hermite interpolation from
//! the stored values and derivatives of the two bracketing nodes.

use serde::{Deserialize, Serialize};

use crate::{Error, Model, Result, State};

/// The right-hand side refuses employment rates this close to the pole.
pub const POLE_GUARD: f64 = 1e-9;
/// Integration halts once the employment rate leaves `(0, 1 - LAMBDA_BAND)`.
pub const LAMBDA_BAND: f64 = 1e-6;
/// Default number of steps per delay interval.
pub const STEPS_PER_DELAY: usize = 64;
/// Default step without delay.
pub const UNDELAYED_DT: f64 = 0.01;

/// Time derivative of `(omega, lambda, b)` given the delayed wage share.
pub fn rhs(model: &Model, u: State, omega_delayed: f64) -> Result<State> {
    if u.lambda >= 1.0 - POLE_GUARD {
        return Err(Error::Domain {
            func: "rhs",
            arg: u.lambda,
            reason: "employment rate at the Phillips curve pole",
        });
    }
    let p = model.params();
    let pi = model.profit_share(u.omega, u.b);
    let z = model.inflation(omega_delayed);
    let g = model.growth(pi);
    Ok(State {
        omega: u.omega * (model.phillips(u.lambda)? - p.alpha - (1.0 - p.gamma) * z),
        lambda: u.lambda * (g - p.alpha - p.beta),
        b: model.kappa(pi) - pi - u.b * (z + g),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum History {
    /// `u(t) = u(0)` for `t` in `[-tau, 0)`.
    ConstantAtInitial,
    /// `u(t)` equal to the given state for `t` in `[-tau, 0)`.
    Constant(State),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub tau: f64,
    pub dt: f64,
    pub t_end: f64,
    pub initial: State,
    pub history: History,
}

impl SimConfig {
    /// Default step: `tau / 64`, or `0.01` without delay.
    pub fn default_dt(tau: f64) -> f64 {
        if tau > 0.0 {
            tau / STEPS_PER_DELAY as f64
        } else {
            UNDELAYED_DT
        }
    }

    pub fn new(tau: f64, t_end: f64, initial: State) -> Self {
        Self {
            tau,
            dt: Self::default_dt(tau),
            t_end,
            initial,
            history: History::ConstantAtInitial,
        }
    }

    /// Steps per delay interval, zero without delay.
    pub fn delay_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end = {} must be positive",
                self.t_end
            )));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!(
                "tau = {} must be non-negative",
                self.tau
            )));
        }
        if !self.initial.is_finite() {
            return Err(Error::Config("initial state is not finite".to_string()));
        }
        if self.tau == 0.0 {
            return Ok(0);
        }
        let n = (self.tau / self.dt).round();
        if (n * self.dt - self.tau).abs() > 1e-9 * self.tau || n < 4.0 {
            return Err(Error::Config(format!(
                "tau = {} must be an integer multiple N >= 4 of dt = {}",
                self.tau, self.dt
            )));
        }
        Ok(n as usize)
    }

    fn history_omega(&self) -> f64 {
        match self.history {
            History::ConstantAtInitial => self.initial.omega,
            History::Constant(s) => s.omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EventKind {
    /// Employment rate reached `1 - LAMBDA_BAND`.
    LambdaNearPole,
    /// Employment rate dropped to zero or below.
    LambdaNonPositive,
    NonFinite,
    /// A stage evaluation failed.
    RhsFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub derivatives: Vec<State>,
    pub events: Vec<Event>,
    pub dt: f64,
    pub tau: f64,
}

impl Trajectory {
    pub fn halted(&self) -> bool {
        !self.events.is_empty()
    }

    pub fn last(&self) -> State {
        *self.states.last().expect("trajectory has the initial node")
    }
}

/// Reads `omega(t_k + frac dt - tau)` from the stored grid or the history.
pub struct DelayLine<'a> {
    pub states: &'a [State],
    pub derivatives: &'a [State],
    pub lag: usize,
    pub dt: f64,
    pub history: f64,
}

impl DelayLine<'_> {
    pub fn read(&self, k: usize, frac: f64) -> f64 {
        let j = k as isize - self.lag as isize;
        if j < 0 {
            return if j == -1 && frac == 1.0 {
                self.states[0].omega
            } else {
                self.history
            };
        }
        let j = j as usize;
        if frac == 0.0 {
            return self.states[j].omega;
        }
        if frac == 1.0 {
            return self.states[j + 1].omega;
        }
        let s = frac;
        let (y0, y1) = (self.states[j].omega, self.states[j + 1].omega);
        let (m0, m1) = (self.derivatives[j].omega, self.derivatives[j + 1].omega);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * self.dt * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * self.dt * m1
    }
}

fn check_state(u: State, t: f64) -> Option<Event> {
    if !u.is_finite() {
        return Some(Event {
            t,
            kind: EventKind::NonFinite,
            detail: format!("state {u:?}"),
        });
    }
    if u.lambda >= 1.0 - LAMBDA_BAND {
        return Some(Event {
            t,
            kind: EventKind::LambdaNearPole,
            detail: format!("lambda = {}", u.lambda),
        });
    }
    if u.lambda <= 0.0 {
        return Some(Event {
            t,
            kind: EventKind::LambdaNonPositive,
            detail: format!("lambda = {}", u.lambda),
        });
    }
    None
}

/// Fixed-step RK4 by the method of steps. Integration stops at the first
/// event; the partial trajectory is returned with the event recorded.
pub fn simulate(model: &Model, cfg: &SimConfig) -> Result<Trajectory> {
    let lag = cfg.delay_steps()?;
    let dt = cfg.dt;
    let steps = (cfg.t_end / dt).round().max(1.0) as usize;
    let mut states = Vec::with_capacity(steps + 1);
    let mut derivatives = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut events = Vec::new();
    let history = cfg.history_omega();

    let u0 = cfg.initial;
    states.push(u0);
    times.push(0.0);
    if let Some(ev) = check_state(u0, 0.0) {
        events.push(ev);
    }
    let d0 = if lag == 0 { u0.omega } else { history };
    match rhs(model, u0, d0) {
        Ok(d) => derivatives.push(d),
        Err(e) => {
            derivatives.push(State::new(f64::NAN, f64::NAN, f64::NAN));
            events.push(Event {
                t: 0.0,
                kind: EventKind::RhsFailure,
                detail: e.to_string(),
            });
        }
    }

    for k in 0..steps {
        if !events.is_empty() {
            break;
        }
        let t = k as f64 * dt;
        let u = states[k];
        let k1 = derivatives[k];
        let step = |line: &DelayLine| -> Result<State> {
            let read = |stage: State, frac: f64| {
                if lag == 0 {
                    stage.omega
                } else {
                    line.read(k, frac)
                }
            };
            let s2 = u.add_scaled(0.5 * dt, k1);
            let k2 = rhs(model, s2, read(s2, 0.5))?;
            let s3 = u.add_scaled(0.5 * dt, k2);
            let k3 = rhs(model, s3, read(s3, 0.5))?;
            let s4 = u.add_scaled(dt, k3);
            let k4 = rhs(model, s4, read(s4, 1.0))?;
            Ok(State::new(
                u.omega + dt / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega),
                u.lambda + dt / 6.0 * (k1.lambda + 2.0 * k2.lambda + 2.0 * k3.lambda + k4.lambda),
                u.b + dt / 6.0 * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b),
            ))
        };
        let line = DelayLine {
            states: &states,
            derivatives: &derivatives,
            lag,
            dt,
            history,
        };
        let next = match step(&line) {
            Ok(n) => n,
            Err(e) => {
                events.push(Event {
                    t,
                    kind: EventKind::RhsFailure,
                    detail: e.to_string(),
                });
                break;
            }
        };
        let t_next = (k + 1) as f64 * dt;
        if let Some(ev) = check_state(next, t_next) {
            events.push(ev);
            if !next.is_finite() {
                break;
            }
        }
        states.push(next);
        times.push(t_next);
        let line = DelayLine {
            states: &states,
            derivatives: &derivatives,
            lag,
            dt,
            history,
        };
        let delayed = if lag == 0 {
            next.omega
        } else {
            line.read(k + 1, 0.0)
        };
        match rhs(model, next, delayed) {
            Ok(d) => derivatives.push(d),
            Err(e) => {
                derivatives.push(State::new(f64::NAN, f64::NAN, f64::NAN));
                if events.is_empty() {
                    events.push(Event {
                        t: t_next,
                        kind: EventKind::RhsFailure,
                        detail: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(Trajectory {
        times,
        states,
        derivatives,
        events,
        dt,
        tau: cfg.tau,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationMetrics {
    /// Start time of each window.
    pub window_starts: Vec<f64>,
    /// Max of `|u - eq|` (Euclidean) per window.
    pub amplitudes: Vec<f64>,
    /// Max of `|omega - omega*|` per window.
    pub omega_amplitudes: Vec<f64>,
    /// Mean spacing of upward crossings of `omega*` over the last half.
    pub period: f64,
    pub crossings: usize,
}

impl OscillationMetrics {
    /// Ratio of the last window amplitude to the first.
    pub fn growth_ratio(&self) -> f64 {
        self.amplitudes.last().unwrap() / self.amplitudes[0]
    }
}

/// Windowed amplitudes and the dominant period of a trajectory around `eq`.
pub fn oscillation_metrics(
    traj: &Trajectory,
    eq: State,
    window: f64,
) -> Result<OscillationMetrics> {
    let per = (window / traj.dt).round() as usize;
    if per == 0 || traj.states.len() < 4 * per {
        return Err(Error::Degenerate(format!(
            "trajectory of {} nodes holds fewer than four windows of {} nodes",
            traj.states.len(),
            per
        )));
    }
    let mut window_starts = Vec::new();
    let mut amplitudes = Vec::new();
    let mut omega_amplitudes = Vec::new();
    for chunk_start in (0..traj.states.len()).step_by(per) {
        let end = (chunk_start + per).min(traj.states.len());
        if end - chunk_start < per {
            break;
        }
        let slice = &traj.states[chunk_start..end];
        window_starts.push(traj.times[chunk_start]);
        amplitudes.push(slice.iter().map(|s| s.distance(eq)).fold(0.0, f64::max));
        omega_amplitudes.push(
            slice
                .iter()
                .map(|s| (s.omega - eq.omega).abs())
                .fold(0.0, f64::max),
        );
    }
    let half = traj.states.len() / 2;
    let mut ups = Vec::new();
    for i in half..traj.states.len() - 1 {
        let (a, b) = (
            traj.states[i].omega - eq.omega,
            traj.states[i + 1].omega - eq.omega,
        );
        if a < 0.0 && b >= 0.0 {
            let f = a / (a - b);
            ups.push(traj.times[i] + f * traj.dt);
        }
    }
    if ups.len() < 3 {
        return Err(Error::Degenerate(format!(
            "insufficient oscillation: {} upward crossings",
            ups.len()
        )));
    }
    let period = (ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64;
    Ok(OscillationMetrics {
        window_starts,
        amplitudes,
        omega_amplitudes,
        period,
        crossings: ups.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::find_e4;

    fn e41() -> State {
        find_e4(&Model::baseline()).unwrap()[1].state().unwrap()
    }

    #[test]
    fn rhs_vanishes_at_equilibrium() {
        let m = Model::baseline();
        let e = e41();
        let d = rhs(&m, e, e.omega).unwrap();
        assert!(d.omega.abs() < 1e-9 && d.lambda.abs() < 1e-9 && d.b.abs() < 1e-9);
    }

    #[test]
    fn rhs_hand_evaluation() {
        let m = Model::baseline();
        let p = m.params();
        let u = State::new(0.8, 0.9, 0.1);
        let d = rhs(&m, u, 0.8).unwrap();
        let pi = 1.0 - 0.8 - 0.03 * 0.1;
        let kappa = -0.0065 + (-5.0f64 + 20.0 * pi).exp();
        let g = kappa / 3.0 - 0.01;
        assert!((d.lambda - 0.9 * (g - 0.045)).abs() < 1e-15);
        let phi = 0.00006944 / 0.01 - 0.04340277;
        let z = 1.4 * (1.2 * 0.8 - 1.0);
        assert!((d.omega - 0.8 * (phi - p.alpha - 0.2 * z)).abs() < 1e-15);
        assert!(matches!(
            rhs(&m, State::new(0.8, 1.0, 0.1), 0.8),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let e = e41();
        let mut cfg = SimConfig::new(0.85, 10.0, e);
        assert_eq!(cfg.delay_steps().unwrap(), 64);
        cfg.dt = 0.3;
        assert!(matches!(cfg.delay_steps(), Err(Error::Config(_))));
        cfg.dt = 0.85 / 3.0;
        assert!(matches!(cfg.delay_steps(), Err(Error::Config(_))));
        let bad = SimConfig::new(0.0, -1.0, e);
        assert!(matches!(bad.delay_steps(), Err(Error::Config(_))));
    }

    #[test]
    fn stored_derivatives_match_rhs() {
        let m = Model::baseline();
        let e = e41();
        let cfg = SimConfig::new(0.5, 20.0, State::new(e.omega + 0.01, e.lambda, e.b));
        let tr = simulate(&m, &cfg).unwrap();
        let lag = cfg.delay_steps().unwrap();
        for i in (0..tr.states.len()).step_by(97) {
            let delayed = if i >= lag {
                tr.states[i - lag].omega
            } else {
                cfg.initial.omega
            };
            let d = rhs(&m, tr.states[i], delayed).unwrap();
            assert!(d.distance(tr.derivatives[i]) < 1e-12);
        }
        assert!(tr
            .times
            .windows(2)
            .all(|w| (w[1] - w[0] - cfg.dt).abs() < 1e-12));
    }

    #[test]
    fn whole_step_reads_are_exact() {
        let m = Model::baseline();
        let e = e41();
        let cfg = SimConfig::new(0.5, 5.0, State::new(e.omega + 0.01, e.lambda, e.b));
        let tr = simulate(&m, &cfg).unwrap();
        let lag = cfg.delay_steps().unwrap();
        let line = DelayLine {
            states: &tr.states,
            derivatives: &tr.derivatives,
            lag,
            dt: tr.dt,
            history: cfg.initial.omega,
        };
        for k in lag..tr.states.len() - 1 {
            assert_eq!(
                line.read(k, 0.0).to_bits(),
                tr.states[k - lag].omega.to_bits()
            );
            assert_eq!(
                line.read(k, 1.0).to_bits(),
                tr.states[k + 1 - lag].omega.to_bits()
            );
        }
        // the half-step read interpolates a cubic exactly
        let states: Vec<State> = (0..3)
            .map(|i| State::new((i as f64).powi(3), 0.5, 0.0))
            .collect();
        let derivs: Vec<State> = (0..3)
            .map(|i| State::new(3.0 * (i as f64).powi(2), 0.0, 0.0))
            .collect();
        let cubic = DelayLine {
            states: &states,
            derivatives: &derivs,
            lag: 0,
            dt: 1.0,
            history: 0.0,
        };
        assert!((cubic.read(1, 0.5) - 1.5f64.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn fourth_order_convergence() {
        let m = Model::baseline();
        let e = e41();
        let init = State::new(e.omega + 0.02, e.lambda - 0.01, e.b + 0.05);
        let run = |dt: f64| {
            let mut cfg = SimConfig::new(0.0, 10.0, init);
            cfg.dt = dt;
            simulate(&m, &cfg).unwrap().last()
        };
        let dt = 0.1;
        let reference = run(dt / 8.0);
        let factor = run(dt).distance(reference) / run(dt / 2.0).distance(reference);
        assert!((12.0..=20.0).contains(&factor), "factor {factor}");
    }

    #[test]
    fn equilibrium_is_invariant() {
        let m = Model::baseline();
        let e = e41();
        let tr = simulate(&m, &SimConfig::new(0.5, 100.0, e)).unwrap();
        assert!(!tr.halted());
        let sup = tr.states.iter().map(|s| s.distance(e)).fold(0.0, f64::max);
        assert!(sup < 1e-8, "{sup}");
    }

    #[test]
    fn stable_without_delay() {
        let m = Model::baseline();
        let e = e41();
        let init = State::new(e.omega + 1e-6, e.lambda, e.b);
        let tr = simulate(&m, &SimConfig::new(0.0, 200.0, init)).unwrap();
        // the slowest mode is real, so the tail decays without oscillating
        let per = (50.0 / tr.dt).round() as usize;
        let sampled: Vec<f64> = (1..=4).map(|i| tr.states[i * per].distance(e)).collect();
        assert!(sampled.windows(2).all(|w| w[1] < w[0]), "{sampled:?}");
        assert!(sampled[3] < init.distance(e));
    }

    #[test]
    fn constant_trajectory_has_no_period() {
        let m = Model::baseline();
        let e = e41();
        let tr = simulate(&m, &SimConfig::new(0.0, 50.0, e)).unwrap();
        assert!(matches!(
            oscillation_metrics(&tr, e, 10.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn pole_event_halts() {
        let m = Model::baseline();
        let tr = simulate(
            &m,
            &SimConfig::new(0.0, 50.0, State::new(0.2, 0.999_999_5, 0.0)),
        )
        .unwrap();
        assert!(tr.halted());
        assert_eq!(tr.events[0].kind, EventKind::LambdaNearPole);
    }
}
