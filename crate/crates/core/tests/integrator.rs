use delaybif::integrator::{attractor_summary, default_step, integrate};
use delaybif::{DdeSystem, HarvestedPredatorPrey, ParameterSet};

const E1: [f64; 2] = [6.061458241811056, 3.254242134274988];

fn run(tau: f64, t_end: f64) -> delaybif::integrator::Trajectory {
    let p = ParameterSet::reference().with_tau(tau);
    let dt = default_step(&[tau]);
    integrate(&HarvestedPredatorPrey, &p, &[E1[0] + 0.1, E1[1] + 0.1], t_end, dt).unwrap()
}

#[test]
fn short_delay_returns_to_equilibrium() {
    let tr = run(0.5, 400.0);
    let last = tr.states.last().unwrap();
    let dist = ((last[0] - E1[0]).powi(2) + (last[1] - E1[1]).powi(2)).sqrt();
    assert!(dist < 1e-4, "distance {dist}");
}

#[test]
fn peak_multiplicities() {
    for (tau, want) in [(7.10, 1), (8.60, 2), (8.78, 4)] {
        let s = attractor_summary(&run(tau, 1000.0), 0.8, 1e-3);
        assert_eq!(s.multiplicity, want, "tau {tau}: levels {:?}", s.levels);
    }
}

#[test]
fn period_two_peaks_are_distinct() {
    let s = attractor_summary(&run(8.60, 1000.0), 0.8, 1e-3);
    let (a, b) = (s.levels[0], s.levels[1]);
    assert!((a - b).abs() / a.max(b) > 0.01);
}

#[test]
fn step_halving_is_fourth_order() {
    let p = ParameterSet::reference().with_tau(7.1);
    let h = [E1[0] + 0.1, E1[1] + 0.1];
    let coarse = integrate(&HarvestedPredatorPrey, &p, &h, 100.0, 0.01).unwrap();
    let fine = integrate(&HarvestedPredatorPrey, &p, &h, 100.0, 0.005).unwrap();
    let a = coarse.states.last().unwrap();
    let b = fine.states.last().unwrap();
    let diff = (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
    assert!(diff < 1e-6, "difference {diff}");
}

/// Plain RK4 on the ODE obtained by dropping the delay, with a much smaller step.
fn reference_ode(x0: [f64; 2], t_end: f64, steps: usize) -> [f64; 2] {
    let sys = HarvestedPredatorPrey;
    let p = ParameterSet::reference().with_tau(0.0);
    let f = |x: [f64; 2]| {
        let mut out = [0.0; 2];
        sys.rhs(&x, &[&x], &p, &mut out);
        out
    };
    let h = t_end / steps as f64;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
        let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
        let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]]);
        for i in 0..2 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

#[test]
fn zero_delay_matches_ode() {
    let x0 = [10.0, 1.0];
    let p = ParameterSet::reference().with_tau(0.0);
    let tr = integrate(&HarvestedPredatorPrey, &p, &x0, 20.0, 0.01).unwrap();
    let want = reference_ode(x0, 20.0, 200_000);
    let got = tr.states.last().unwrap();
    for i in 0..2 {
        assert!((got[i] - want[i]).abs() < 1e-8, "{got:?} vs {want:?}");
    }
}

#[test]
fn trajectory_table_has_time_column() {
    let tr = run(0.5, 1.0);
    let csv = tr.to_table(10).to_csv();
    assert!(csv.starts_with("t,x1,x2\n"));
    assert_eq!(csv.lines().count(), 1 + 11);
}
