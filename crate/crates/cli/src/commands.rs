//! Sweep drivers behind the `spin-gain`, `spin-scaling` and `cv-gain` subcommands.

use maisense_core::gaussian_cv::{cv_xi2_matrix, GaussianScenario};
use maisense_core::optimizer::{default_mai_range, optimize_scenario, scaling_sweep, EstimationTarget};
use maisense_core::spin_moments::SpinScenario;
use maisense_core::Strategy;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{SweepAxis, SweepConfig};
use crate::error::Result;
use crate::output::{json_number, Cell, Report, Table};

/// One optimized spin evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainPoint {
    pub xi2_inv: f64,
    pub gain_db: f64,
    pub mu_mai_opt: f64,
}

/// `ξ⁻²(n_+)` optimized over the generator angle and, for MAI, the MAI time.
pub fn spin_point(cfg: &SweepConfig, atoms: usize, modes: usize, mu: f64, strategy: Strategy) -> Result<GainPoint> {
    let s = SpinScenario::new(atoms, modes, cfg.preparation(), mu, strategy, 0.0)?;
    let range = cfg.mai_range.unwrap_or_else(|| default_mai_range(&s));
    let out = optimize_scenario(&s, &EstimationTarget::uniform(modes), range)?;
    Ok(GainPoint { xi2_inv: out.xi2_inv, gain_db: out.gain_db, mu_mai_opt: out.mu_mai_opt })
}

fn series(cfg: &SweepConfig) -> Vec<(usize, Strategy)> {
    cfg.modes.iter().flat_map(|&m| cfg.strategies().into_iter().map(move |s| (m, s))).collect()
}

pub fn series_name(metric: &str, strategy: Strategy, modes: usize) -> String {
    format!("{metric}_{}_M{modes}", strategy.label())
}

/// One row per `μ`; gain, `ξ⁻²` and optimal MAI time for every `(M, strategy)`.
pub fn cmd_spin_gain(cfg: &SweepConfig) -> Result<Report> {
    let series = series(cfg);
    let mut columns = vec!["mu".to_string()];
    for &(m, st) in &series {
        for metric in ["gain_db", "xi2_inv", "mu_mai_opt"] {
            columns.push(series_name(metric, st, m));
        }
    }
    let rows = cfg
        .mu
        .points()
        .into_par_iter()
        .map(|mu| {
            let mut row = vec![Cell::Num(mu)];
            for &(m, st) in &series {
                let p = spin_point(cfg, cfg.atoms, m, mu, st)?;
                row.extend([Cell::Num(p.gain_db), Cell::Num(p.xi2_inv), Cell::Num(p.mu_mai_opt)]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::from_table(Table { columns, rows }))
}

/// Long-format table of jointly optimized points with the per-series log-log fit.
pub fn cmd_spin_scaling(cfg: &SweepConfig) -> Result<Report> {
    let columns = [
        "strategy", "M", "N", "xi2_inv", "gain_db", "mu_opt", "mu_mai_opt", "slope", "intercept", "rms_residual",
    ]
    .map(String::from)
    .to_vec();
    let mut table = Table::new(columns);
    let mut fits = Vec::new();
    for (m, st) in series(cfg) {
        let template = SpinScenario::new(cfg.n_list[0], m, cfg.preparation(), 0.0, st, 0.0)?;
        let sweep = scaling_sweep(&cfg.n_list, &template)?;
        for p in &sweep.points {
            table.rows.push(vec![
                Cell::Text(st.label().to_string()),
                Cell::Int(m),
                Cell::Int(p.atoms),
                Cell::Num(p.xi2_inv),
                Cell::Num(10.0 * p.xi2_inv.log10()),
                Cell::Num(p.mu_opt),
                Cell::Num(p.mu_mai_opt),
                Cell::Num(sweep.fit.slope),
                Cell::Num(sweep.fit.intercept),
                Cell::Num(sweep.fit.rms_residual),
            ]);
        }
        fits.push(json!({
            "strategy": st.label(),
            "M": m,
            "slope": json_number(sweep.fit.slope),
            "intercept": json_number(sweep.fit.intercept),
            "rms_residual": json_number(sweep.fit.rms_residual),
        }));
    }
    let mut extra = Map::new();
    extra.insert("fits".into(), Value::Array(fits));
    Ok(Report { table, extra })
}

/// One row per swept `σ` (or `r`); gain and `ξ⁻²` per strategy.
pub fn cmd_cv_gain(cfg: &SweepConfig) -> Result<Report> {
    let strategies = cfg.strategies();
    let (axis, grid) = match cfg.sweep_axis {
        SweepAxis::Sigma => ("sigma", cfg.sigma_grid),
        SweepAxis::R => ("r", cfg.r_grid),
    };
    let mut columns = vec![axis.to_string()];
    for st in &strategies {
        columns.push(format!("gain_db_{}", st.label()));
        columns.push(format!("xi2_inv_{}", st.label()));
    }
    let target = EstimationTarget::uniform(2);
    let rows = grid
        .points()
        .into_par_iter()
        .map(|x| {
            let (r, sigma) = match cfg.sweep_axis {
                SweepAxis::Sigma => (cfg.r, x),
                SweepAxis::R => (x, cfg.sigma),
            };
            let mut row = vec![Cell::Num(x)];
            for &st in &strategies {
                let gs = GaussianScenario::new(r, st, cfg.r_mai_for(r), sigma)?;
                let out = cv_xi2_matrix(&gs, &target)?;
                row.extend([Cell::Num(out.gain_db), Cell::Num(out.xi2_inv)]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::from_table(Table { columns, rows }))
}
