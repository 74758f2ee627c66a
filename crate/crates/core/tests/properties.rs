use maisense_core::linalg::{orthonormalize_rows, sym_pseudo_inverse, Matrix, SymEigen};
use maisense_core::optimizer::{
    best_phi, default_mai_range, measurement_moment_matrix, moment_matrix_with, optimal_measurement_with,
    optimize_scenario, squeezing_and_xi2, structured_gamma_inverse, EstimationTarget, GeneratorSpec,
};
use maisense_core::spin_moments::{spin_moment_data, MomentData, SpinScenario};
use maisense_core::{Preparation, Strategy};
use proptest::prelude::*;

fn combo() -> impl proptest::strategy::Strategy<Value = (Preparation, Strategy)> {
    prop_oneof![
        Just((Preparation::ModeSeparable, Strategy::Linear)),
        Just((Preparation::ModeSeparable, Strategy::LocalMai)),
        Just((Preparation::ModeEntangled, Strategy::Linear)),
        Just((Preparation::ModeEntangled, Strategy::NonlocalMai)),
        Just((Preparation::ModeEntangled, Strategy::LocalMai)),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn matrix(rows: usize, cols: usize, v: &[f64]) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |i, j| v[i * cols + j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn structured_and_dense_paths_agree_for_any_signs(
        (prep, st) in combo(),
        modes in 1usize..=4,
        local in 2usize..=9,
        mu in 0.0..0.6f64,
        mu_mai in 0.0..0.8f64,
        signs in proptest::collection::vec(any::<bool>(), 4),
    ) {
        let s = SpinScenario::new(modes * local, modes, prep, mu, st, mu_mai).unwrap();
        let md = spin_moment_data(&s).unwrap();
        let (phi, reference) = best_phi(&md).unwrap();
        let t = EstimationTarget::from_signs(&signs[..modes]).unwrap();
        let g = GeneratorSpec::new(phi);
        let fast = squeezing_and_xi2(&md, &g, &t).unwrap();
        let dense = squeezing_and_xi2(&md.clone().dense_only(), &g, &t).unwrap();
        prop_assert!(rel(fast.xi2_inv, reference) < 1e-10);
        prop_assert!(rel(dense.xi2_inv, reference) < 1e-9);
        prop_assert!(fast.sigma.max_abs_diff(&dense.sigma) < 1e-9 * (1.0 + dense.sigma.max_abs()));
    }

    #[test]
    fn structured_inverse_matches_pseudo_inverse(
        (prep, st) in combo(),
        modes in 1usize..=6,
        local in 2usize..=8,
        mu in 0.01..1.0f64,
        mu_mai in 0.0..1.0f64,
    ) {
        let s = SpinScenario::new(modes * local, modes, prep, mu, st, mu_mai).unwrap();
        let md = spin_moment_data(&s).unwrap();
        let dense = sym_pseudo_inverse(&md.gamma, 1e-12).inverse;
        let fast = structured_gamma_inverse(md.blocks.as_ref().unwrap(), modes).unwrap();
        prop_assert!(fast.max_abs_diff(&dense) <= 1e-9 * (1.0 + dense.max_abs()));
    }

    #[test]
    fn entangled_gain_ignores_the_split(
        st in prop_oneof![Just(Strategy::Linear), Just(Strategy::NonlocalMai)],
        mu in 0.0..0.5f64,
        mu_mai in 0.0..0.8f64,
    ) {
        let value = |m: usize| {
            let s = SpinScenario::new(24, m, Preparation::ModeEntangled, mu, st, mu_mai).unwrap();
            best_phi(&spin_moment_data(&s).unwrap()).unwrap().1
        };
        let base = value(1);
        for m in [2, 3, 4, 6, 8, 12, 24] {
            prop_assert!(rel(value(m), base) < 1e-9);
        }
    }

    #[test]
    fn local_readout_on_single_atoms_is_linear(mu in 0.0..1.0f64, mu_mai in 0.0..3.0f64) {
        let lin = SpinScenario::new(12, 12, Preparation::ModeEntangled, mu, Strategy::Linear, 0.0).unwrap();
        let loc = lin.with_strategy(Strategy::LocalMai).with_mu_mai(mu_mai);
        let a = best_phi(&spin_moment_data(&lin).unwrap()).unwrap().1;
        let b = best_phi(&spin_moment_data(&loc).unwrap()).unwrap().1;
        prop_assert!(rel(a, b) < 1e-9);
    }

    #[test]
    fn unsqueezed_probe_sits_at_shot_noise(
        (prep, st) in combo(),
        modes in 1usize..=4,
        local in 2usize..=10,
        mu_mai in 0.0..3.0f64,
        signs in proptest::collection::vec(any::<bool>(), 4),
    ) {
        let s = SpinScenario::new(modes * local, modes, prep, 0.0, st, mu_mai).unwrap();
        let md = spin_moment_data(&s).unwrap();
        let (phi, _) = best_phi(&md).unwrap();
        let t = EstimationTarget::from_signs(&signs[..modes]).unwrap();
        let q = squeezing_and_xi2(&md, &GeneratorSpec::new(phi), &t).unwrap();
        prop_assert!((q.xi2_inv - 1.0).abs() < 1e-9);
    }

    #[test]
    fn optimized_mai_never_loses_to_linear(
        prep in prop_oneof![Just(Preparation::ModeSeparable), Just(Preparation::ModeEntangled)],
        modes in prop_oneof![Just(1usize), Just(2), Just(4)],
        mu in 0.0..0.4f64,
    ) {
        let lin = SpinScenario::new(40, modes, prep, mu, Strategy::Linear, 0.0).unwrap();
        let t = EstimationTarget::uniform(modes);
        let base = optimize_scenario(&lin, &t, (0.0, 0.0)).unwrap().xi2_inv;
        for st in [Strategy::LocalMai, Strategy::NonlocalMai] {
            let s = lin.with_strategy(st);
            if !s.has_closed_form() {
                continue;
            }
            let mai = optimize_scenario(&s, &t, default_mai_range(&s)).unwrap().xi2_inv;
            prop_assert!(mai >= base * (1.0 - 1e-12));
        }
    }

    #[test]
    fn optimal_measurement_dominates_random_ones(
        modes in 1usize..=3,
        a in proptest::collection::vec(-1.0..1.0f64, 36),
        c in proptest::collection::vec(-1.0..1.0f64, 36),
        r in proptest::collection::vec(-1.0..1.0f64, 18),
        sp in proptest::collection::vec(-1.0..1.0f64, 18),
    ) {
        let k = 2 * modes;
        let a = matrix(k, k, &a);
        let gamma = &a.matmul(&a.transpose()) + &Matrix::identity(k).scale(0.1);
        let md = MomentData::from_dense(gamma, matrix(k, k, &c), 1.0).unwrap();
        let r = orthonormalize_rows(&matrix(modes, k, &r));
        let sp = orthonormalize_rows(&matrix(modes, k, &sp));
        prop_assume!(r.is_some() && sp.is_some());
        let (r, sp) = (r.unwrap(), sp.unwrap());
        let best = moment_matrix_with(&md, &r).unwrap();
        let s = optimal_measurement_with(&md, &r).unwrap();
        let scale = 1.0 + best.max_abs();
        prop_assert!(measurement_moment_matrix(&md, &r, &s).unwrap().max_abs_diff(&best) < 1e-9 * scale);
        let other = measurement_moment_matrix(&md, &r, &sp).unwrap();
        prop_assert!(SymEigen::new(&(&best - &other).symmetrize()).min() > -1e-9 * scale);
    }
}

#[test]
fn single_precision_tracks_double() {
    for (prep, st) in [
        (Preparation::ModeSeparable, Strategy::LocalMai),
        (Preparation::ModeEntangled, Strategy::NonlocalMai),
        (Preparation::ModeEntangled, Strategy::Linear),
    ] {
        let s64 = SpinScenario::<f64>::new(20, 2, prep, 0.2, st, 0.25).unwrap();
        let s32 = SpinScenario::<f32>::new(20, 2, prep, 0.2, st, 0.25).unwrap();
        let a = best_phi(&spin_moment_data(&s64).unwrap()).unwrap().1;
        let b = best_phi(&spin_moment_data(&s32).unwrap()).unwrap().1;
        assert!(rel(a, b as f64) < 1e-4, "{a} vs {b}");
    }
}
