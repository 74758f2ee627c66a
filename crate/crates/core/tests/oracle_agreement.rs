use maisense_core::optimizer::{best_phi, optimize_phi, EstimationTarget};
use maisense_core::oracle::{oracle_blocks, oracle_block_data, oracle_moment_data, oracle_xi2};
use maisense_core::spin_moments::{closed_form_blocks, spin_moment_data, SpinScenario};
use maisense_core::{Preparation, Strategy};

const COMBOS: [(Preparation, Strategy); 5] = [
    (Preparation::ModeSeparable, Strategy::Linear),
    (Preparation::ModeSeparable, Strategy::LocalMai),
    (Preparation::ModeEntangled, Strategy::Linear),
    (Preparation::ModeEntangled, Strategy::NonlocalMai),
    (Preparation::ModeEntangled, Strategy::LocalMai),
];

#[test]
fn blocks_match_simulator_across_splits() {
    for n in [4, 6, 8] {
        for m in (1..=n).filter(|m| n % m == 0) {
            for (prep, st) in COMBOS {
                for (mu, ma) in [(0.0, 0.0), (0.3, 0.7), (1.1, 0.4), (2.5, 3.0)] {
                    let s = SpinScenario::new(n, m, prep, mu, st, ma).unwrap();
                    let d = closed_form_blocks(&s).unwrap().max_abs_diff(&oracle_blocks(&s).unwrap());
                    assert!(d < 1e-9, "N={n} M={m} {prep:?} {st:?} mu={mu} mu_mai={ma}: {d:e}");
                }
            }
        }
    }
}

#[test]
fn optimized_gain_matches_simulator() {
    for m in [1, 2, 3, 4] {
        for (prep, st) in COMBOS {
            let s = SpinScenario::<f64>::new(12, m, prep, 0.25, st, 0.3).unwrap();
            for t in EstimationTarget::all_sign_patterns(m) {
                let fast = optimize_phi(&spin_moment_data(&s).unwrap(), &t, s.mu_mai).unwrap().xi2_inv;
                let exact = oracle_xi2(&s, &t).unwrap();
                assert!((fast - exact).abs() / exact < 1e-8, "M={m} {prep:?} {st:?}: {fast} vs {exact}");
            }
        }
    }
}

#[test]
fn full_simulator_matrices_are_exchange_symmetric() {
    let s = SpinScenario::new(9, 3, Preparation::ModeEntangled, 0.4, Strategy::NonlocalMai, 0.5).unwrap();
    let dense = oracle_moment_data(&s).unwrap();
    let blocks = oracle_block_data(&s).unwrap();
    assert!(dense.gamma.max_abs_diff(&blocks.gamma) < 1e-10);
    assert!(dense.commutator.max_abs_diff(&blocks.commutator) < 1e-10);
}

#[test]
fn separable_states_have_no_cross_covariance_under_linear_readout() {
    let s = SpinScenario::new(4, 2, Preparation::ModeSeparable, 0.9, Strategy::Linear, 0.0).unwrap();
    let b = oracle_blocks(&s).unwrap();
    assert!(b.gamma_mn.max_abs() < 1e-12);
}

#[test]
fn nonlocal_readout_of_separable_states_runs_through_simulator() {
    let s = SpinScenario::<f64>::new(12, 2, Preparation::ModeSeparable, 0.2, Strategy::NonlocalMai, 0.25).unwrap();
    assert!(!s.has_closed_form());
    assert!(closed_form_blocks(&s).is_err());
    let (_, xi) = best_phi(&oracle_block_data(&s).unwrap()).unwrap();
    assert!(xi.is_finite() && xi > 0.0);
}
