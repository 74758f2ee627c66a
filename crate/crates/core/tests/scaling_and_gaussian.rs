use maisense_core::gaussian_cv::{cv_xi2_closed, cv_xi2_matrix, noise_ratio, GaussianScenario};
use maisense_core::optimizer::{loglog_fit, scaling_sweep, EstimationTarget};
use maisense_core::spin_moments::SpinScenario;
use maisense_core::{Error, Preparation, Strategy};
use proptest::prelude::*;

proptest! {
    #[test]
    fn loglog_fit_recovers_power_laws(slope in -2.0..2.0f64, scale in 0.1..10.0f64) {
        let pts: Vec<(f64, f64)> = [16.0, 64.0, 256.0, 1024.0].iter().map(|&x: &f64| (x, scale * x.powf(slope))).collect();
        let fit = loglog_fit(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-9);
        prop_assert!(fit.rms_residual < 1e-10);
    }

    #[test]
    fn cv_mai_never_loses_to_linear(r in 0.0..1.5f64, ra in 0.0..2.0f64, sigma in 0.0..1.5f64) {
        let lin = GaussianScenario::new(r, Strategy::Linear, 0.0, sigma).unwrap();
        let base = cv_xi2_closed(&lin).unwrap();
        for st in [Strategy::LocalMai, Strategy::NonlocalMai] {
            let gs = GaussianScenario::new(r, st, ra, sigma).unwrap();
            let mai = cv_xi2_matrix(&gs, &EstimationTarget::uniform(2)).unwrap().xi2_inv;
            prop_assert!(mai >= base * (1.0 - 1e-12));
            prop_assert!((mai - cv_xi2_closed(&gs).unwrap()).abs() / mai < 1e-9);
        }
        let ratio = noise_ratio(r, ra, sigma);
        prop_assert!(ratio > 0.0 && ratio <= 1.0 + 1e-15);
    }

    #[test]
    fn cv_gain_decreases_with_detection_noise(r in 0.05..1.5f64, ra in 0.0..2.0f64, s1 in 0.0..1.0f64, ds in 0.01..1.0f64) {
        for st in Strategy::ALL {
            let a = cv_xi2_closed(&GaussianScenario::new(r, st, ra, s1).unwrap()).unwrap();
            let b = cv_xi2_closed(&GaussianScenario::new(r, st, ra, s1 + ds).unwrap()).unwrap();
            prop_assert!(b < a);
        }
    }
}

#[test]
fn sweep_needs_three_atom_numbers() {
    let t = SpinScenario::new(64, 2, Preparation::ModeEntangled, 0.0, Strategy::Linear, 0.0).unwrap();
    assert!(matches!(scaling_sweep(&[64, 128], &t), Err(Error::TooFewPoints(2))));
    assert!(scaling_sweep(&[64, 128, 129], &t).is_err());
}

#[test]
fn mai_beats_linear_scaling() {
    let atoms = [64, 128, 256, 512];
    let slope = |st| {
        let t = SpinScenario::new(64, 2, Preparation::ModeEntangled, 0.0, st, 0.0).unwrap();
        scaling_sweep(&atoms, &t).unwrap().fit.slope
    };
    let lin = slope(Strategy::Linear);
    let nl = slope(Strategy::NonlocalMai);
    assert!(lin > 0.55 && lin < 0.8, "{lin}");
    assert!(nl > lin + 0.15, "{nl} vs {lin}");
}
