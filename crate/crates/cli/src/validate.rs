//! Self-checks: closed forms against the exact simulator, sign invariance,
//! matrix Cauchy-Schwarz optimality, structured inversion and the Gaussian
//! closed forms.

use maisense_core::gaussian_cv::{cv_xi2_closed, cv_xi2_matrix, noise_ratio, GaussianScenario};
use maisense_core::linalg::{orthonormalize_rows, sym_pseudo_inverse, Matrix, SymEigen};
use maisense_core::optimizer::{
    best_phi, golden_max, measurement_moment_matrix, moment_matrix_with, optimal_measurement_with,
    optimize_scenario, squeezing_and_xi2, structured_gamma_inverse, EstimationTarget, GeneratorSpec,
};
use maisense_core::oracle::oracle_blocks_detailed;
use maisense_core::spin_moments::{closed_form_blocks, spin_moment_data, MomentData, SpinScenario};
use maisense_core::{Preparation, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map};

use crate::config::{divisors, SweepConfig};
use crate::error::Result;
use crate::output::{Cell, Report, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, cases: usize, max_deviation: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            cases,
            max_deviation,
            threshold,
            passed: max_deviation.is_finite() && max_deviation <= threshold,
        }
    }
}

/// Combinations of preparation and readout with closed-form blocks.
pub const CLOSED_FORM_COMBOS: [(Preparation, Strategy); 5] = [
    (Preparation::ModeSeparable, Strategy::Linear),
    (Preparation::ModeSeparable, Strategy::LocalMai),
    (Preparation::ModeEntangled, Strategy::Linear),
    (Preparation::ModeEntangled, Strategy::NonlocalMai),
    (Preparation::ModeEntangled, Strategy::LocalMai),
];

fn fold_max(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

/// Every closed-form block entry against the simulator, plus the largest
/// imaginary residue seen by the simulator.
pub fn oracle_equivalence(atoms: &[usize], mu_grid: &[f64]) -> Result<(Check, Check)> {
    let mut jobs = Vec::new();
    for &n in atoms {
        for m in divisors(n) {
            for (prep, st) in CLOSED_FORM_COMBOS {
                for &mu in mu_grid {
                    jobs.push((n, m, prep, st, mu));
                }
            }
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(n, m, prep, st, mu)| -> Result<(usize, f64, f64)> {
            let mai: &[f64] = if st.is_mai() { mu_grid } else { &[0.0] };
            let mut dev: f64 = 0.0;
            let mut imag: f64 = 0.0;
            for &ma in mai {
                let s = SpinScenario::new(n, m, prep, mu, st, ma)?;
                let closed = closed_form_blocks(&s)?;
                let o = oracle_blocks_detailed(&s)?;
                dev = dev.max(closed.max_abs_diff(&o.blocks));
                imag = imag.max(o.imag_residue);
            }
            Ok((mai.len(), dev, imag))
        })
        .collect::<Result<Vec<_>>>()?;
    let cases = results.iter().map(|r| r.0).sum();
    Ok((
        Check::new("oracle_block_equivalence", cases, fold_max(results.iter().map(|r| r.1)), 1e-9),
        Check::new("oracle_imaginary_residue", cases, fold_max(results.iter().map(|r| r.2)), 1e-10),
    ))
}

/// `max_φ ξ⁻²(n)` on the dense path for an explicit target.
fn dense_xi2(md: &MomentData<f64>, t: &EstimationTarget<f64>) -> f64 {
    let f = |phi: f64| squeezing_and_xi2(md, &GeneratorSpec::new(phi), t).map_or(0.0, |q| q.xi2_inv);
    let steps = 64;
    let h = std::f64::consts::PI / steps as f64;
    let best = (0..steps).max_by(|&a, &b| f(h * a as f64).total_cmp(&f(h * b as f64))).unwrap_or(0);
    let c = h * best as f64;
    golden_max(&f, c - h, c + h, 1e-10).1
}

/// `ξ⁻²(n)` across all sign patterns (dense path) against the structured
/// `ξ⁻²(n_+)`, relative deviation.
pub fn sign_invariance(max_modes: usize) -> Result<Check> {
    let mut jobs = Vec::new();
    for m in 1..=max_modes {
        for (prep, st) in CLOSED_FORM_COMBOS {
            for &(mu, ma) in &[(0.0, 0.0), (0.15, 0.2), (0.4, 0.35)] {
                jobs.push(SpinScenario::new(6 * m, m, prep, mu, st, ma)?);
            }
        }
    }
    let devs = jobs
        .par_iter()
        .map(|s| -> Result<(usize, f64)> {
            let md = spin_moment_data(s)?;
            let (_, reference) = best_phi(&md)?;
            let dense = md.clone().dense_only();
            let patterns = EstimationTarget::all_sign_patterns(s.modes);
            let dev = fold_max(patterns.iter().map(|t| (dense_xi2(&dense, t) - reference).abs() / reference));
            Ok((patterns.len(), dev))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Check::new(
        "sign_invariance",
        devs.iter().map(|d| d.0).sum(),
        fold_max(devs.iter().map(|d| d.1)),
        1e-10,
    ))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    loop {
        if let Some(s) = orthonormalize_rows(&random_matrix(rng, rows, cols)) {
            return s;
        }
    }
}

/// Random `(Γ, C, R)` triples: the constructed `S` saturates `R M Rᵀ` and
/// dominates random orthonormal `S′` in the PSD order.
pub fn cauchy_schwarz(seed: u64, triples: usize, projections: usize, modes: &[usize]) -> Result<(Check, Check)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_dom: f64 = 0.0;
    let mut worst_sat: f64 = 0.0;
    let mut cases = 0;
    for &m in modes {
        let k = 2 * m;
        for _ in 0..triples {
            let a = random_matrix(&mut rng, k, k);
            let gamma = &a.matmul(&a.transpose()) + &Matrix::identity(k).scale(0.1);
            let c = random_matrix(&mut rng, k, k);
            let md = MomentData::from_dense(gamma, c, 1.0)?;
            let r = random_orthonormal(&mut rng, m, k);
            let best = moment_matrix_with(&md, &r)?;
            let s = optimal_measurement_with(&md, &r)?;
            let at_s = measurement_moment_matrix(&md, &r, &s)?;
            worst_sat = worst_sat.max(at_s.max_abs_diff(&best));
            for _ in 0..projections {
                let sp = random_orthonormal(&mut rng, m, k);
                let other = measurement_moment_matrix(&md, &r, &sp)?;
                let gap = SymEigen::new(&(&best - &other).symmetrize()).min();
                worst_dom = worst_dom.max(-gap);
                cases += 1;
            }
        }
    }
    let triples_total = triples * modes.len();
    Ok((
        Check::new("cauchy_schwarz_dominance", cases, worst_dom, 1e-9),
        Check::new("cauchy_schwarz_saturation", triples_total, worst_sat, 1e-9),
    ))
}

/// Two-block inverse of exchange-symmetric Γ against the dense pseudo-inverse.
pub fn structured_inverse(max_modes: usize) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for m in 1..=max_modes {
        for (prep, st) in CLOSED_FORM_COMBOS {
            let s = SpinScenario::new(4 * m, m, prep, 0.3, st, 0.45)?;
            let md = spin_moment_data(&s)?;
            let dense = sym_pseudo_inverse(&md.gamma, 1e-12).inverse;
            let fast = structured_gamma_inverse(md.blocks.as_ref().expect("closed form"), m)?;
            worst = worst.max(fast.max_abs_diff(&dense) / (1.0 + dense.max_abs()));
            cases += 1;
        }
    }
    Ok(Check::new("structured_inverse", cases, worst, 1e-10))
}

/// Gaussian matrix pipeline against the closed forms, and the noise ratio
/// against their quotient.
pub fn cv_closed_forms() -> Result<(Check, Check)> {
    let rs: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let sigmas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let target = EstimationTarget::uniform(2);
    let mut worst: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut cases = 0;
    for &r in &rs {
        for &sig in &sigmas {
            for ra in [0.0, r, 2.0 * r] {
                for st in Strategy::ALL {
                    let gs = GaussianScenario::new(r, st, ra, sig)?;
                    let closed = cv_xi2_closed(&gs)?;
                    let m = cv_xi2_matrix(&gs, &target)?.xi2_inv;
                    worst = worst.max((m - closed).abs() / closed);
                    cases += 1;
                }
                let lin = cv_xi2_closed(&GaussianScenario::new(r, Strategy::Linear, 0.0, sig)?)?;
                let mai = cv_xi2_closed(&GaussianScenario::new(r, Strategy::NonlocalMai, ra, sig)?)?;
                worst_ratio = worst_ratio.max((noise_ratio(r, ra, sig) - lin / mai).abs());
            }
        }
    }
    Ok((
        Check::new("cv_matrix_vs_closed_form", cases, worst, 1e-9),
        Check::new("cv_noise_ratio", rs.len() * sigmas.len() * 3, worst_ratio, 1e-12),
    ))
}

/// Unsqueezed probes sit exactly at the shot-noise limit.
pub fn shot_noise_anchor(max_modes: usize) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for m in 1..=max_modes {
        for (prep, st) in CLOSED_FORM_COMBOS {
            let s = SpinScenario::new(6 * m, m, prep, 0.0, st, 0.0)?;
            for t in EstimationTarget::all_sign_patterns(m) {
                let out = optimize_scenario(&s, &t, (0.0, std::f64::consts::PI))?;
                worst = worst.max((out.xi2_inv - 1.0).abs());
                cases += 1;
            }
        }
    }
    for st in Strategy::ALL {
        let gs = GaussianScenario::<f64>::new(0.0, st, 0.5, 0.0)?;
        for t in EstimationTarget::all_sign_patterns(2) {
            worst = worst.max((cv_xi2_matrix(&gs, &t)?.xi2_inv - 1.0).abs());
            cases += 1;
        }
    }
    Ok(Check::new("shot_noise_anchor", cases, worst, 1e-9))
}

pub fn run_validation(cfg: &SweepConfig) -> Result<Vec<Check>> {
    let mu_grid = cfg.mu.points_or_single();
    let (eq, imag) = oracle_equivalence(&cfg.n_list, &mu_grid)?;
    let (dom, sat) = cauchy_schwarz(7, 100, 100, &[2, 3])?;
    let (cv, ratio) = cv_closed_forms()?;
    Ok(vec![
        eq,
        imag,
        sign_invariance(4)?,
        dom,
        sat,
        structured_inverse(8)?,
        cv,
        ratio,
        shot_noise_anchor(4)?,
    ])
}

pub fn cmd_validate(cfg: &SweepConfig) -> Result<Report> {
    let checks = run_validation(cfg)?;
    let columns = ["check", "cases", "max_deviation", "threshold", "passed"].map(String::from).to_vec();
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                Cell::Text(c.name.clone()),
                Cell::Int(c.cases),
                Cell::Num(c.max_deviation),
                Cell::Num(c.threshold),
                Cell::Text(c.passed.to_string()),
            ]
        })
        .collect();
    let mut extra = Map::new();
    extra.insert("passed".into(), json!(checks.iter().all(|c| c.passed)));
    Ok(Report { table: Table { columns, rows }, extra })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_oracle_suite_passes() {
        let (eq, imag) = oracle_equivalence(&[4], &[0.0, 0.7, 2.9]).unwrap();
        assert!(eq.passed, "{eq:?}");
        assert!(imag.passed, "{imag:?}");
        assert_eq!(eq.cases, 3 * (2 * 3 + 3 * 9));
    }

    #[test]
    fn cauchy_schwarz_holds_on_a_few_triples() {
        let (dom, sat) = cauchy_schwarz(1, 3, 10, &[2]).unwrap();
        assert!(dom.passed && sat.passed, "{dom:?} {sat:?}");
    }

    #[test]
    fn failing_check_is_reported() {
        assert!(!Check::new("x", 1, 2.0, 1.0).passed);
        assert!(!Check::new("x", 1, f64::NAN, 1.0).passed);
    }
}
