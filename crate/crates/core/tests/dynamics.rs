use keen_delay::equilibria::find_e4;
use keen_delay::normal_form::{self, Route};
use keen_delay::sim::{oscillation_metrics, simulate, SimConfig};
use keen_delay::{Model, State};

fn e41(m: &Model) -> keen_delay::equilibria::Equilibrium {
    find_e4(m).unwrap().remove(1)
}

fn kicked(eq: State) -> State {
    State::new(eq.omega + 1e-3, eq.lambda, eq.b)
}

#[test]
fn envelope_grows_past_critical_delay() {
    let m = Model::baseline();
    let eq = e41(&m).state().unwrap();
    let tr = simulate(&m, &SimConfig::new(0.85, 400.0, kicked(eq))).unwrap();
    assert!(!tr.halted());
    let met = oscillation_metrics(&tr, eq, 100.0).unwrap();
    assert!(
        met.amplitudes.windows(2).all(|w| w[1] > w[0]),
        "{:?}",
        met.amplitudes
    );
}

#[test]
fn envelope_decays_below_critical_delay() {
    let m = Model::baseline();
    let eq = e41(&m).state().unwrap();
    let tr = simulate(&m, &SimConfig::new(0.80, 400.0, kicked(eq))).unwrap();
    let met = oscillation_metrics(&tr, eq, 100.0).unwrap();
    assert!(
        met.amplitudes.windows(2).all(|w| w[1] < w[0]),
        "{:?}",
        met.amplitudes
    );
    assert!((met.period - 2.913).abs() < 0.05 * 2.913, "{}", met.period);
}

#[test]
fn saturated_amplitude_matches_normal_form() {
    let m = Model::baseline();
    let e = e41(&m);
    let eq = e.state().unwrap();
    let nf = normal_form::analyze_at_tau0(&m, &e, 3).unwrap();
    let c1 = nf.route(Route::Complete).result.c1;
    let tau = 0.85;
    let growth = nf.velocity.finite_difference.re;
    // omega component of the critical eigenvector is one
    let z2 = nf.tau * growth * (tau - nf.tau) / -c1.re;
    let predicted = 2.0 * z2.sqrt();

    let tr = simulate(&m, &SimConfig::new(tau, 2400.0, kicked(eq))).unwrap();
    assert!(!tr.halted());
    let met = oscillation_metrics(&tr, eq, 200.0).unwrap();
    let n = met.omega_amplitudes.len();
    let (prev, last) = (met.omega_amplitudes[n - 2], met.omega_amplitudes[n - 1]);
    assert!(
        (last - prev).abs() < 1e-3 * last,
        "not saturated: {prev} {last}"
    );
    assert!(
        (last - predicted).abs() < 0.1 * predicted,
        "simulated {last}, predicted {predicted}"
    );
}
