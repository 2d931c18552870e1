use delaybif::charpoly::reduce;
use delaybif::continuation::BranchSettings;
use delaybif::hopf::{hopf_agreement_report, refine_all, refine_hopf, HopfSettings};
use delaybif::model::steady_jacobians;
use delaybif::spectrum::{detect_stability_switches, SpectrumSettings};
use delaybif::steady::{annotate_stability, continue_equilibria, setup_equilibrium_branch, Branch, EquilibriumPoint};
use delaybif::{Error, HarvestedPredatorPrey, ParameterSet};

const E1: [f64; 2] = [6.061458241811056, 3.254242134274988];

const HOPF: [f64; 5] = [
    1.379413927096384,
    5.393140023781609,
    6.981037144585396,
    12.538835708751554,
    12.582660362074412,
];

fn annotated_branch() -> (Branch<EquilibriumPoint>, Vec<usize>) {
    let sys = HarvestedPredatorPrey;
    let settings = BranchSettings::new(ParameterSet::TAU, 0.0, 15.0, 0.05, 0.02);
    let seed = setup_equilibrium_branch(&sys, &ParameterSet::reference(), &[6.0, 3.0], settings).unwrap();
    let mut branch = continue_equilibria(&sys, seed, 300).unwrap();
    annotate_stability(&sys, &mut branch, &SpectrumSettings::default()).unwrap();
    let scan = detect_stability_switches(&branch.nunst().unwrap());
    assert!(scan.anomalies.is_empty());
    (branch, scan.hopf_candidates)
}

#[test]
fn branch_switches_and_hopf_points() {
    let sys = HarvestedPredatorPrey;
    let (branch, switches) = annotated_branch();
    let taus = branch.parameter_values();
    assert!((taus.last().unwrap() - 15.0).abs() < 1e-12);
    for w in taus.windows(2) {
        assert!(w[1] - w[0] <= 0.05 + 1e-12);
    }
    for pt in &branch.points {
        assert!((pt.x[0] - E1[0]).abs() < 1e-9 && (pt.x[1] - E1[1]).abs() < 1e-9);
    }
    assert_eq!(switches.len(), 5);
    for (i, &s) in switches.iter().enumerate() {
        assert!(taus[s] <= HOPF[i] && HOPF[i] <= taus[s + 1], "switch {i}: {} {}", taus[s], taus[s + 1]);
    }
    let hopf = refine_all(&sys, &branch, &switches, &HopfSettings::default(), 1e-6).unwrap();
    for (h, want) in hopf.iter().zip(HOPF) {
        assert!((h.parameter_value() - want).abs() < 1e-8, "{} vs {want}", h.parameter_value());
    }
}

#[test]
fn fifth_switch_needs_frequency_exclusion() {
    let sys = HarvestedPredatorPrey;
    let settings = HopfSettings::default();
    let (branch, switches) = annotated_branch();
    let fourth = refine_hopf(&sys, &branch, switches[3], &[], &settings).unwrap();
    let plain = refine_hopf(&sys, &branch, switches[4], &[], &settings).unwrap();
    assert!((plain.parameter_value() - fourth.parameter_value()).abs() < 1e-6);
    let excluded = refine_hopf(&sys, &branch, switches[4], &[fourth.omega], &settings).unwrap();
    assert!((excluded.parameter_value() - HOPF[4]).abs() < 1e-8);
    assert!((excluded.omega - fourth.omega).abs() > settings.exclude_tol);
    let all = [fourth.omega, excluded.omega];
    assert!(matches!(
        refine_hopf(&sys, &branch, switches[4], &all, &settings),
        Err(Error::NoCandidate(_)) | Err(Error::ExcludedFrequency { .. })
    ));
}

#[test]
fn refined_points_agree_with_analytic_delays() {
    let sys = HarvestedPredatorPrey;
    let (branch, switches) = annotated_branch();
    let hopf = refine_all(&sys, &branch, &switches, &HopfSettings::default(), 1e-6).unwrap();
    let red = reduce(&steady_jacobians(&sys, &E1, &ParameterSet::reference()).unwrap()).unwrap();
    let pairs: Vec<(f64, f64)> = hopf.iter().map(|h| (h.parameter_value(), h.omega)).collect();
    let report = hopf_agreement_report(&pairs, &red, 1e-6);
    assert_eq!(report.rows.len(), 5);
    assert!(report.all_within(), "{report:?}");
    let mut perturbed = pairs.clone();
    perturbed[2].0 += 0.1;
    assert!(!hopf_agreement_report(&perturbed, &red, 1e-6).rows[2].within_tolerance);
}
